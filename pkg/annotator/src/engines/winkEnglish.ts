// English engine: wink-nlp supplies the POS layer; dependency relations
// and head POS come from a deterministic head-assignment heuristic over
// the POS sequence (no off-the-shelf JS dependency parser exists). Tag
// values are engine-dependent and not part of the pipeline contract —
// only token parity, arity, and determinism are.

import { LingAnnotation, TaggerEngine, AnnotationError } from "../annotate.js";

type WinkDoc = {
    tokens(): { out(mapper?: unknown): string[] };
};
type WinkNLP = {
    readDoc(text: string): WinkDoc;
    its: { pos: unknown };
};

const NOMINAL = new Set(["NOUN", "PROPN"]);
const VERBAL = new Set(["VERB", "AUX"]);

function nearest(pos: string[], from: number, wanted: Set<string>): number {
    for (let j = from + 1; j < pos.length; j++) if (wanted.has(pos[j])) return j;
    for (let j = from - 1; j >= 0; j--) if (wanted.has(pos[j])) return j;
    return -1;
}

function nextOnly(pos: string[], from: number, wanted: Set<string>): number {
    for (let j = from + 1; j < pos.length; j++) if (wanted.has(pos[j])) return j;
    return -1;
}

export function rootIndex(pos: string[]): number {
    const verb = pos.findIndex((p) => VERBAL.has(p));
    if (verb >= 0) return verb;
    const noun = pos.findIndex((p) => NOMINAL.has(p));
    if (noun >= 0) return noun;
    return 0;
}

/** Deterministic shallow head assignment over a POS sequence. */
export function headsFromPos(pos: string[]): { head: number; dep: string }[] {
    const root = rootIndex(pos);
    return pos.map((p, i) => {
        if (i === root) return { head: i, dep: "ROOT" };
        let j: number;
        switch (p) {
            case "DET":
                j = nextOnly(pos, i, NOMINAL);
                return j >= 0 ? { head: j, dep: "det" } : { head: root, dep: "det" };
            case "ADJ":
                j = nextOnly(pos, i, NOMINAL);
                return j >= 0 ? { head: j, dep: "amod" } : { head: root, dep: "amod" };
            case "NUM":
                j = nextOnly(pos, i, NOMINAL);
                return j >= 0 ? { head: j, dep: "nummod" } : { head: root, dep: "nummod" };
            case "ADP":
            case "SCONJ":
                j = nextOnly(pos, i, new Set([...NOMINAL, "VERB", "PRON"]));
                return j >= 0 ? { head: j, dep: p === "ADP" ? "case" : "mark" }
                              : { head: root, dep: "dep" };
            case "ADV":
            case "PART":
                j = nearest(pos, i, new Set([...VERBAL, "ADJ"]));
                return j >= 0 ? { head: j, dep: "advmod" } : { head: root, dep: "advmod" };
            case "AUX":
                j = nextOnly(pos, i, new Set(["VERB"]));
                return j >= 0 ? { head: j, dep: "aux" } : { head: root, dep: "aux" };
            case "NOUN":
            case "PROPN":
                if (i + 1 < pos.length && NOMINAL.has(pos[i + 1]))
                    return { head: i + 1, dep: "compound" };
                return { head: root, dep: i < root ? "nsubj" : "obj" };
            case "PRON":
                return { head: root, dep: i < root ? "nsubj" : "obj" };
            case "VERB":
                return { head: root, dep: "conj" };
            case "CCONJ":
                j = i + 1 < pos.length ? i + 1 : root;
                return { head: j, dep: "cc" };
            case "PUNCT":
                return { head: root, dep: "punct" };
            default:
                return { head: root, dep: "dep" };
        }
    });
}

export class WinkEnglishEngine implements TaggerEngine {
    readonly language = "en";
    readonly version: string;
    private readonly nlp: WinkNLP;

    constructor(nlp: WinkNLP, modelVersion: string) {
        this.nlp = nlp;
        this.version = `wink-eng-lite-web-model@${modelVersion}`;
    }

    /**
     * POS-tag a pre-tokenized sentence without re-tokenizing: the text is
     * tagged as one string and wink's own tokens are re-aligned to the
     * input boundaries (an input token spanning several wink tokens takes
     * the POS of its first piece).
     */
    annotateSentence(tokens: string[]): LingAnnotation[] {
        const doc = this.nlp.readDoc(tokens.join(" "));
        const winkTokens = doc.tokens().out();
        const winkPos = doc.tokens().out(this.nlp.its.pos);
        const pos: string[] = [];
        let wi = 0;
        for (const token of tokens) {
            let assembled = "";
            let first = -1;
            while (assembled.length < token.length && wi < winkTokens.length) {
                if (first < 0) first = wi;
                assembled += winkTokens[wi];
                wi += 1;
            }
            if (assembled !== token || first < 0) {
                throw new AnnotationError(
                    `tagger token stream diverged from input at ${JSON.stringify(token)}`);
            }
            pos.push(winkPos[first]);
        }
        const heads = headsFromPos(pos);
        return pos.map((p, i) => ({
            pos: p,
            dep: heads[i].dep,
            headPos: pos[heads[i].head],
        }));
    }
}

export async function loadWinkEnglish(): Promise<TaggerEngine> {
    let winkNLP: (model: unknown) => WinkNLP;
    let model: unknown;
    let version: string;
    try {
        winkNLP = (await import("wink-nlp")).default as unknown as (m: unknown) => WinkNLP;
    } catch {
        throw new AnnotationError(
            "tagger library missing: install it with `npm install wink-nlp`");
    }
    try {
        const imported = await import("wink-eng-lite-web-model");
        model = imported.default;
        version = "1.x";
        try {
            const { createRequire } = await import("node:module");
            const require = createRequire(import.meta.url);
            version = require("wink-eng-lite-web-model/package.json").version;
        } catch {
            // keep the coarse version marker
        }
    } catch {
        throw new AnnotationError(
            "no English tagger model installed: run `npm install wink-eng-lite-web-model`");
    }
    return new WinkEnglishEngine(winkNLP(model), version);
}

const ENGINES: Record<string, () => Promise<TaggerEngine>> = {
    en: loadWinkEnglish,
};

export async function createEngine(language: string): Promise<TaggerEngine> {
    const loader = ENGINES[language];
    if (!loader) {
        const known = Object.keys(ENGINES).join(", ");
        throw new AnnotationError(
            `no tagger installed for language '${language}' (bundled: ${known}); ` +
            "install a tagger model for it and register an engine");
    }
    return loader();
}
