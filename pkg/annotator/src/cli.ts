#!/usr/bin/env node
// `apeqe-annotate annotate --lang en --in corpus.txt --out corpus.factored`
// Reads a pre-tokenized corpus (one sentence per line, single-space
// separated) and writes the arity-4 factored file plus its manifest.

import { readFileSync, writeFileSync } from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { annotateCorpus, AnnotationError } from "./annotate.js";
import { FactoredFormatError } from "./factored.js";
import { createEngine } from "./engines/winkEnglish.js";

export async function runAnnotate(lang: string, inPath: string, outPath: string): Promise<void> {
    const raw = readFileSync(inPath, "utf-8");
    const lines = raw.length === 0 ? [] : raw.replace(/\n$/, "").split("\n");
    if (lines.length === 1 && lines[0] === "") lines.pop();
    const engine = await createEngine(lang);
    const { lines: annotated, manifest } = annotateCorpus(engine, lines);
    writeFileSync(outPath, annotated.length ? annotated.join("\n") + "\n" : "", "utf-8");
    writeFileSync(
        `${outPath}.manifest.json`,
        JSON.stringify({ ...manifest, tagger: engine.version }, Object.keys({
            arity: 0, factor_layers: 0, kind: 0, tagger: 0 }).sort(), 2) + "\n",
        "utf-8");
}

export async function main(argv: string[]): Promise<number> {
    const parser = yargs(argv)
        .command(
            "annotate",
            "emit POS/dep/head-POS factors for a pre-tokenized corpus",
            (y) =>
                y
                    .option("lang", { type: "string", demandOption: true })
                    .option("in", { type: "string", demandOption: true })
                    .option("out", { type: "string", demandOption: true }),
        )
        .demandCommand(1)
        .strict()
        .exitProcess(false)
        .fail((msg, err) => {
            throw err ?? new Error(msg);
        });
    let args;
    try {
        args = await parser.parse();
    } catch (err) {
        process.stderr.write(`usage error: ${(err as Error).message}\n`);
        return 2;
    }
    try {
        await runAnnotate(args.lang as string, args.in as string, args.out as string);
        return 0;
    } catch (err) {
        if (err instanceof AnnotationError || err instanceof FactoredFormatError) {
            process.stderr.write(`error: stage=annotate: ${err.message}\n`);
            return 1;
        }
        if ((err as NodeJS.ErrnoException).code === "ENOENT") {
            process.stderr.write(
                `error: stage=annotate: missing file: ${(err as NodeJS.ErrnoException).path}\n`);
            return 1;
        }
        throw err;
    }
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(
    process.argv[1].split("/").pop() as string);
if (invokedDirectly) {
    main(hideBin(process.argv)).then((code) => {
        process.exitCode = code;
    });
}
