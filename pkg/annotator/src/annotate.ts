// Corpus-level annotation: one LingAnnotation per input token, with the
// token parity and field hygiene enforced here rather than trusted from
// the engine. Engines never re-tokenize; they receive the pre-tokenized
// sentence and must return exactly one annotation per token.

import { FactoredToken, serializeLine, manifestFor, Manifest } from "./factored.js";

export interface LingAnnotation {
    pos: string;
    dep: string;
    headPos: string;
}

export interface TaggerEngine {
    readonly language: string;
    readonly version: string;
    annotateSentence(tokens: string[]): LingAnnotation[];
}

export class AnnotationError extends Error {}

export const FACTOR_LAYERS = ["pos", "dep", "head_pos"];

// Factor values must survive the factored line format; anything the
// tagger emits with whitespace or pipes is squashed deterministically.
export function sanitizeValue(value: string): string {
    const cleaned = value.replace(/[|\s]/g, "_");
    return cleaned.length > 0 ? cleaned : "_";
}

export function annotateSentenceChecked(
    engine: TaggerEngine,
    tokens: string[],
    lineNumber: number,
): FactoredToken[] {
    const annotations = engine.annotateSentence(tokens);
    if (annotations.length !== tokens.length) {
        throw new AnnotationError(
            `line ${lineNumber}: tagger returned ${annotations.length} annotations ` +
            `for ${tokens.length} tokens`);
    }
    return tokens.map((surface, i) => ({
        surface,
        factors: [
            sanitizeValue(annotations[i].pos),
            sanitizeValue(annotations[i].dep),
            sanitizeValue(annotations[i].headPos),
        ],
    }));
}

export interface AnnotatedCorpus {
    lines: string[];
    manifest: Manifest;
}

export function annotateCorpus(engine: TaggerEngine, inputLines: string[]): AnnotatedCorpus {
    const lines = inputLines.map((line, idx) => {
        const tokens = line.split(" ").filter((t) => t.length > 0);
        if (tokens.length === 0) {
            throw new AnnotationError(`line ${idx + 1}: empty sentence`);
        }
        return serializeLine(annotateSentenceChecked(engine, tokens, idx + 1));
    });
    return { lines, manifest: manifestFor(4, FACTOR_LAYERS) };
}
