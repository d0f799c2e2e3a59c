export { annotateCorpus, annotateSentenceChecked, sanitizeValue, AnnotationError,
         FACTOR_LAYERS } from "./annotate.js";
export type { LingAnnotation, TaggerEngine, AnnotatedCorpus } from "./annotate.js";
export { parseLine, serializeLine, FactoredFormatError } from "./factored.js";
export type { FactoredToken, Manifest } from "./factored.js";
export { createEngine, loadWinkEnglish, headsFromPos, rootIndex,
         WinkEnglishEngine } from "./engines/winkEnglish.js";
export { runAnnotate, main } from "./cli.js";
