import { describe, expect, it } from "vitest";

import { FactoredFormatError, parseLine, serializeLine } from "../src/factored.js";

describe("factored line format", () => {
    it("serializes surface plus factors with pipes", () => {
        const line = serializeLine([
            { surface: "apply", factors: ["VERB", "ROOT", "VERB"] },
            { surface: ".", factors: ["PUNCT", "punct", "VERB"] },
        ]);
        expect(line).toBe("apply|VERB|ROOT|VERB .|PUNCT|punct|VERB");
    });

    it("round-trips through parseLine", () => {
        const tokens = [
            { surface: "a", factors: ["X", "y", "Z"] },
            { surface: "b-", factors: ["B-X", "I-y", "$."] },
        ];
        expect(parseLine(serializeLine(tokens))).toEqual(tokens);
    });

    it("parses the empty line as an empty sentence", () => {
        expect(parseLine("")).toEqual([]);
    });

    it("rejects ragged arity with the token position", () => {
        expect(() => parseLine("a|x b", 2)).toThrowError(/token 2/);
    });

    it("rejects empty fields", () => {
        expect(() => parseLine("a||x")).toThrow(FactoredFormatError);
    });

    it("refuses to serialize fields with pipes or whitespace", () => {
        expect(() => serializeLine([{ surface: "a b", factors: [] }]))
            .toThrow(FactoredFormatError);
        expect(() => serializeLine([{ surface: "a", factors: ["x|y"] }]))
            .toThrow(FactoredFormatError);
    });
});
