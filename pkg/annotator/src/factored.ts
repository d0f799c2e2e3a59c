// The pipe-separated factored line format consumed by the training
// pipeline: tokens joined by single spaces, fields of one token joined
// by `|` (surface first). Field values may not be empty or contain
// whitespace or `|`; all tokens of one file share the same arity.

export interface FactoredToken {
    surface: string;
    factors: string[];
}

export class FactoredFormatError extends Error {}

const FORBIDDEN = /[|\s]/;

export function validateField(value: string, where: string): string {
    if (value.length === 0)
        throw new FactoredFormatError(`empty field ${where}`);
    if (FORBIDDEN.test(value))
        throw new FactoredFormatError(
            `field ${JSON.stringify(value)} ${where} contains whitespace or '|'`);
    return value;
}

export function serializeLine(tokens: FactoredToken[]): string {
    return tokens
        .map((tok, i) => {
            const fields = [tok.surface, ...tok.factors];
            fields.forEach((f) => validateField(f, `in token ${i + 1}`));
            return fields.join("|");
        })
        .join(" ");
}

export function parseLine(line: string, expectedArity?: number): FactoredToken[] {
    if (line === "") return [];
    const tokens: FactoredToken[] = [];
    let arity = expectedArity;
    const chunks = line.split(" ");
    for (let i = 0; i < chunks.length; i++) {
        const fields = chunks[i].split("|");
        if (fields.some((f) => f === ""))
            throw new FactoredFormatError(`empty field in token ${i + 1}: ${chunks[i]}`);
        if (arity === undefined) arity = fields.length;
        else if (fields.length !== arity)
            throw new FactoredFormatError(
                `ragged arity at token ${i + 1}: got ${fields.length}, expected ${arity}`);
        tokens.push({ surface: fields[0], factors: fields.slice(1) });
    }
    return tokens;
}

export interface Manifest {
    kind: string | null;
    arity: number;
    factor_layers: string[];
}

export function manifestFor(arity: number, layers: string[]): Manifest {
    return { kind: null, arity, factor_layers: layers };
}
