"""Command-line pipeline: every stage is a thin wrapper over one module
operation chain.

All randomness derives from --seed; a declarative JSON --config file
supplies defaults and explicit flags win over it.  Errors print a single
machine-parsable line (``error: stage=<name>: <message>``) and exit 1;
usage problems exit 2.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

import numpy as np

from . import artifacts
from .corpus import TrainingTriple, Vocabulary, build_vocab, save_triples
from .ensemble import (
    EnsembleSpec,
    NBestHypothesis,
    ensemble_beam_search,
    load_ensemble_manifest,
    read_nbest_file,
    rescore_nbest,
    write_nbest_file,
)
from .errors import ApeQeError, ConfigurationError
from .inputs import (
    FactoredSentence,
    FactoredToken,
    ModelInputKind,
    build_input,
    read_factored_corpus,
    write_factored_corpus,
    SideAnnotations,
    TripleAnnotations,
)
from .mert import (
    GoldRecord,
    Objective,
    TunerConfig,
    mert_tune,
    read_weights_file,
    save_pool,
    write_weights_file,
)
from .metrics import MetricReport, accuracy, bleu, f1_mult, ter
from .model import (
    Checkpoint,
    MinRiskConfig,
    Seq2SeqModel,
    TrainConfig,
    average_checkpoints,
    load_checkpoint,
    save_checkpoint,
    train_min_risk,
    train_xent,
)
from .qe import tags_for_pair
from .subword import BPEModel, bpe_learn, desegment, segment_sentence

STAGES = {}


def stage(name):
    def register(fn):
        STAGES[name] = fn
        return fn
    return register


def _read_lines(path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def _write_lines(path, lines) -> None:
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _read_token_lines(path) -> list[list[str]]:
    return [line.split() for line in _read_lines(path)]


def _maybe_desegment(tokens: list[str], marker: str | None) -> list[str]:
    if not marker:
        return tokens
    sent = FactoredSentence(tuple(FactoredToken(t) for t in tokens))
    return list(desegment(sent, marker=marker).surfaces)


# ---------------------------------------------------------------------------
# Stage implementations (each receives the merged effective config dict)


@stage("bpe-learn")
def run_bpe_learn(cfg):
    sentences = []
    for path in cfg["input"]:
        sentences.extend(_read_token_lines(path))
    model = bpe_learn(sentences, cfg["merges"], marker=cfg["marker"])
    model.save(cfg["out"])
    return [cfg["out"]]


@stage("bpe-apply")
def run_bpe_apply(cfg):
    model = BPEModel.load(cfg["model"])
    out_lines = []
    for line in _read_lines(cfg["input"]):
        pieces = []
        for seg in segment_sentence(line.split(), model):
            pieces.extend(seg.pieces)
        out_lines.append(" ".join(pieces))
    _write_lines(cfg["out"], out_lines)
    return [cfg["out"]]


@stage("annotate-merge")
def run_annotate_merge(cfg):
    tokens = _read_token_lines(cfg["tokens"])
    layers = [_read_token_lines(p) for p in cfg["layers"]]
    names = cfg["names"] or [f"layer{i}" for i in range(len(layers))]
    for layer_path, layer in zip(cfg["layers"], layers):
        if len(layer) != len(tokens):
            raise ApeQeError(f"{layer_path}: {len(layer)} lines, tokens file has {len(tokens)}")
    sentences = []
    for i, toks in enumerate(tokens):
        for layer_path, layer in zip(cfg["layers"], layers):
            if len(layer[i]) != len(toks):
                raise ApeQeError(f"{layer_path}: line {i + 1} has {len(layer[i])} tokens, "
                                 f"expected {len(toks)}")
        factored = [FactoredToken(t, tuple(layer[i][j] for layer in layers))
                    for j, t in enumerate(toks)]
        sentences.append(FactoredSentence(tuple(factored)))
    write_factored_corpus(cfg["out"], sentences, layer_names=names)
    return [cfg["out"]]


@stage("build-input")
def run_build_input(cfg):
    kind = ModelInputKind(cfg["kind"])
    src = _read_token_lines(cfg["src"]) if cfg.get("src") else None
    mt = _read_token_lines(cfg["mt"]) if cfg.get("mt") else None
    n = len(src) if src is not None else len(mt)
    if src is not None and mt is not None and len(src) != len(mt):
        raise ApeQeError(f"src has {len(src)} lines, mt has {len(mt)}")

    alignments = None
    if kind is ModelInputKind.MT_ALIGNED:
        if not cfg.get("alignment"):
            raise ConfigurationError("mt-aligned input requires --alignment")
        alignments = _read_token_lines(cfg["alignment"])
    annot_src = annot_mt = None
    if kind is ModelInputKind.SRC_PLUS_MT_FACTOR:
        if not (cfg.get("src_annot") and cfg.get("mt_annot")):
            raise ConfigurationError("src+mt-factor input requires --src-annot and --mt-annot")
        annot_src, _ = read_factored_corpus(cfg["src_annot"])
        annot_mt, _ = read_factored_corpus(cfg["mt_annot"])

    sentences = []
    for i in range(n):
        src_i = tuple(src[i]) if src is not None else ("-",)
        mt_i = tuple(mt[i]) if mt is not None else ("-",)
        triple = TrainingTriple(src_i, mt_i, ("-",))
        annotations = None
        if kind is ModelInputKind.SRC_PLUS_MT_FACTOR:
            a_src, a_mt = annot_src[i], annot_mt[i]
            if a_src.surfaces != src_i or a_mt.surfaces != mt_i:
                raise ApeQeError(f"annotation surfaces disagree with corpus at line {i + 1}")
            annotations = TripleAnnotations(
                src=SideAnnotations(tuple(t.factors for t in a_src.tokens)),
                mt=SideAnnotations(tuple(t.factors for t in a_mt.tokens)))
        alignment = alignments[i] if alignments is not None else None
        sentences.append(build_input(triple, kind, annotations=annotations,
                                     alignment=alignment))
    write_factored_corpus(cfg["out"], sentences, kind=kind)
    return [cfg["out"]]


def _load_or_build_vocab(path_or_none, sentences, size) -> Vocabulary:
    if path_or_none:
        return Vocabulary.load(path_or_none)
    return build_vocab(sentences, size)


@stage("train")
def run_train(cfg):
    inputs, _ = read_factored_corpus(cfg["input"])
    targets = _read_token_lines(cfg["target"])
    if len(inputs) != len(targets):
        raise ApeQeError(f"{len(inputs)} input sentences vs {len(targets)} target lines")
    arity = inputs[0].arity if inputs else 1
    factor_vocabs = []
    for k in range(arity):
        if k == 0:
            column = [s.surfaces for s in inputs]
        else:
            column = [tuple(t.factors[k - 1] for t in s.tokens) for s in inputs]
        factor_vocabs.append(build_vocab(column, cfg["vocab_size"]))
    tgt_vocab = _load_or_build_vocab(cfg.get("tgt_vocab"), targets, cfg["tgt_vocab_size"])

    model = Seq2SeqModel.create(factor_vocabs, tgt_vocab, seed=cfg["seed"],
                                surface_dim=cfg["surface_dim"],
                                factor_dim=cfg["factor_dim"],
                                hidden_dim=cfg["hidden_dim"])
    pairs = [(model.encode_input(s), model.encode_target(t))
             for s, t in zip(inputs, targets)]
    dev_pairs = None
    if cfg.get("dev_input") and cfg.get("dev_target"):
        dev_inputs, _ = read_factored_corpus(cfg["dev_input"])
        dev_targets = _read_token_lines(cfg["dev_target"])
        dev_pairs = [(model.encode_input(s), model.encode_target(t))
                     for s, t in zip(dev_inputs, dev_targets)]

    tc = TrainConfig(epochs=cfg["epochs"], lr=cfg["lr"], batch_size=cfg["batch_size"],
                     clip_norm=cfg["clip_norm"], checkpoint_every=cfg["checkpoint_every"],
                     seed=cfg["seed"])
    checkpoints = train_xent(model.params, pairs, tc, dev_pairs=dev_pairs)
    if not checkpoints:
        raise ApeQeError("training produced no checkpoints (diverged immediately)")

    out_dir = Path(cfg["out_dir"])
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    ranked = checkpoints
    if all(c.dev_metric is not None for c in checkpoints):
        ranked = sorted(checkpoints, key=lambda c: (-c.dev_metric, c.step))
    kept = sorted(ranked[: cfg["keep_best"]], key=lambda c: c.step)
    for ckpt in kept:
        save_checkpoint(ckpt_dir / f"ckpt-{ckpt.step:06d}.ckpt", ckpt)
    last = checkpoints[-1]
    model.params = last.params
    model.save(out_dir, step=last.step, dev_metric=last.dev_metric)
    return [out_dir]


@stage("finetune-minrisk")
def run_finetune_minrisk(cfg):
    model = Seq2SeqModel.load(cfg["model_dir"])
    inputs, _ = read_factored_corpus(cfg["input"])
    targets = _read_token_lines(cfg["target"])
    pairs = [(model.encode_input(s), model.encode_target(t))
             for s, t in zip(inputs, targets)]
    mc = MinRiskConfig(iterations=cfg["iterations"], n_samples=cfg["samples"],
                       alpha=cfg["alpha"], lr=cfg["lr"], seed=cfg["seed"],
                       max_len=cfg["max_len"])
    train_min_risk(model.params, pairs, mc)
    out_dir = Path(cfg["out_dir"])
    model.save(out_dir)
    return [out_dir]


@stage("avg-checkpoints")
def run_avg_checkpoints(cfg):
    checkpoints = [load_checkpoint(p) for p in cfg["inputs"]]
    averaged = average_checkpoints(checkpoints)
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out_dir / "params.ckpt",
                    Checkpoint(averaged, step=max(c.step for c in checkpoints)))
    vocab_from = Path(cfg["vocab_from"])
    for vocab_file in sorted(vocab_from.glob("*vocab*.txt")):
        shutil.copyfile(vocab_file, out_dir / vocab_file.name)
    return [out_dir]


@stage("decode")
def run_decode(cfg):
    model = Seq2SeqModel.load(cfg["model_dir"])
    inputs, _ = read_factored_corpus(cfg["input"])
    best_lines = []
    nbest_lists = []
    for sent in inputs:
        hyps = model.decode(sent, beam_width=cfg["beam"], n_best=cfg["nbest"],
                            max_len=cfg["max_len"])
        tokens = model.ids_to_tokens(hyps[0].tokens)
        best_lines.append(" ".join(tokens))
        nbest_lists.append([
            NBestHypothesis(tokens=tuple(model.ids_to_tokens(h.tokens)), ids=h.tokens,
                            features=h.member_scores, combined=h.score,
                            finished=h.finished)
            for h in hyps])
    _write_lines(cfg["out"], best_lines)
    outs = [cfg["out"]]
    if cfg.get("nbest_out"):
        write_nbest_file(cfg["nbest_out"], nbest_lists)
        outs.append(cfg["nbest_out"])
    return outs


def _load_spec_with_weights(cfg) -> EnsembleSpec:
    spec = load_ensemble_manifest(cfg["manifest"])
    if cfg.get("weights"):
        names, weights, _ = read_weights_file(cfg["weights"])
        if tuple(names) != spec.names:
            raise ConfigurationError("weights file member names do not match the manifest")
        spec = spec.with_weights(weights)
    return spec


def _read_bundles(spec: EnsembleSpec, input_paths) -> list[list[FactoredSentence]]:
    if len(input_paths) != len(spec.members):
        raise ConfigurationError(f"{len(input_paths)} input files for "
                                 f"{len(spec.members)} ensemble members")
    per_member = []
    for path, member in zip(input_paths, spec.members):
        sents, _ = read_factored_corpus(path)
        per_member.append([FactoredSentence(s.tokens, member.kind) for s in sents])
    counts = {len(s) for s in per_member}
    if len(counts) != 1:
        raise ApeQeError(f"member input files differ in sentence count: {sorted(counts)}")
    return [list(bundle) for bundle in zip(*per_member)]


@stage("ensemble-decode")
def run_ensemble_decode(cfg):
    spec = _load_spec_with_weights(cfg)
    bundles = _read_bundles(spec, cfg["inputs"])
    best_lines = []
    nbest_lists = []
    for bundle in bundles:
        hyps = ensemble_beam_search(spec, bundle, beam_width=cfg["beam"],
                                    n_best=cfg["nbest"], max_len=cfg["max_len"])
        best_lines.append(" ".join(hyps[0].tokens))
        nbest_lists.append(hyps)
    _write_lines(cfg["out"], best_lines)
    outs = [cfg["out"]]
    if cfg.get("nbest_out"):
        write_nbest_file(cfg["nbest_out"], nbest_lists)
        outs.append(cfg["nbest_out"])
    return outs


@stage("rescore")
def run_rescore(cfg):
    spec = _load_spec_with_weights(cfg)
    bundles = _read_bundles(spec, cfg["inputs"])
    nbest = read_nbest_file(cfg["nbest"])
    if len(nbest) != len(bundles):
        raise ApeQeError(f"n-best file covers {len(nbest)} sentences, inputs {len(bundles)}")
    vocab = spec.tgt_vocab
    rescored_lists = []
    for bundle, hyps in zip(bundles, nbest):
        ids = [tuple(vocab.encode(tokens)) for tokens, _, _ in hyps]
        rescored_lists.append(rescore_nbest(spec, bundle, ids))
    write_nbest_file(cfg["out"], rescored_lists)
    return [cfg["out"]]


@stage("tune-mert")
def run_tune_mert(cfg):
    spec = _load_spec_with_weights(cfg)
    bundles = _read_bundles(spec, cfg["inputs"])
    objective = Objective(cfg["objective"])
    marker = cfg.get("desegment_marker")

    pe = [_maybe_desegment(t, marker) for t in _read_token_lines(cfg["pe"])] \
        if cfg.get("pe") else None
    mt = [_maybe_desegment(t, marker) for t in _read_token_lines(cfg["mt"])] \
        if cfg.get("mt") else None
    gold_tags = _read_token_lines(cfg["gold_tags"]) if cfg.get("gold_tags") else None
    if objective is Objective.F1_MULT and gold_tags is None:
        if mt is None or pe is None:
            raise ConfigurationError("f1-mult tuning requires --mt and --pe (or --gold-tags)")
        gold_tags = [tags_for_pair(m, p) for m, p in zip(mt, pe)]
    gold = []
    for i in range(len(bundles)):
        gold.append(GoldRecord(
            pe=tuple(pe[i]) if pe else None,
            mt=tuple(mt[i]) if mt else None,
            tags=tuple(gold_tags[i]) if gold_tags else None,
        ))

    tc = TunerConfig(objective=objective, iterations=cfg["iterations"],
                     nbest_size=cfg["nbest_size"], beam_width=cfg["beam"],
                     max_len=cfg["max_len"], seed=cfg["seed"],
                     shifts=cfg["shifts"],
                     convergence_threshold=cfg["convergence_threshold"])

    def decoder(weights):
        decoded = []
        trial = spec.with_weights(weights)
        for bundle in bundles:
            hyps = ensemble_beam_search(trial, bundle, beam_width=tc.beam_width,
                                        n_best=tc.nbest_size, max_len=tc.max_len)
            decoded.append([(tuple(_maybe_desegment(list(h.tokens), marker)),
                             h.ids, h.features) for h in hyps])
        return decoded

    weights, history = mert_tune(spec.weights, decoder, gold, tc)
    dev_value = history[-1].accepted_value if history else None
    write_weights_file(cfg["out"], spec.names, [float(w) for w in weights],
                       objective, len(history), dev_value)
    outs = [cfg["out"]]
    if cfg.get("pool_out"):
        # rebuild the pool once more at the tuned weights for persistence
        final = decoder(np.asarray(weights))
        from .mert import PoolEntry, SentencePool, hypothesis_stats

        pools = [SentencePool() for _ in final]
        for pool, hyps, g in zip(pools, final, gold):
            for words, ids, feats in hyps:
                pool.add(PoolEntry(tuple(ids), tuple(words),
                                   np.asarray(feats, dtype=np.float64),
                                   hypothesis_stats(words, g, objective, tc.shifts)))
        save_pool(cfg["pool_out"], pools, np.asarray(weights), objective)
        outs.append(cfg["pool_out"])
    return outs


def _tag_one(args):
    mt, pe, marker, case_sensitive, shifts = args
    tags = tags_for_pair(_maybe_desegment(mt, marker), _maybe_desegment(pe, marker),
                         case_sensitive=case_sensitive, shifts=shifts)
    return " ".join(tags)


@stage("qe-tags")
def run_qe_tags(cfg):
    mt_lines = _read_token_lines(cfg["mt"])
    pe_lines = _read_token_lines(cfg["pe"])
    if len(mt_lines) != len(pe_lines):
        raise ApeQeError(f"mt has {len(mt_lines)} lines, pe has {len(pe_lines)}")
    marker = cfg.get("desegment_marker")
    work = [(mt, pe, marker, cfg["case_sensitive"], cfg["shifts"])
            for mt, pe in zip(mt_lines, pe_lines)]
    out_lines = list(_parallel_map(_tag_one, work, cfg.get("jobs", 1)))
    _write_lines(cfg["out"], out_lines)
    return [cfg["out"]]


def _parallel_map(fn, items, jobs: int):
    """Order-preserving map, optionally over a process pool."""
    if jobs and jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items, chunksize=8))
    return [fn(item) for item in items]


def _ter_one(args):
    hyp, ref, shifts = args
    from .metrics import sentence_ter_stats

    if len(ref) == 0:
        raise ApeQeError("empty reference sentence")
    return sentence_ter_stats(hyp, ref, shifts=shifts)


@stage("eval")
def run_eval(cfg):
    report = MetricReport()
    if cfg.get("hyp") and cfg.get("ref"):
        hyps = _read_token_lines(cfg["hyp"])
        refs = _read_token_lines(cfg["ref"])
        report.bleu, report.bleu_stats = bleu(hyps, refs)
        jobs = cfg.get("jobs", 1)
        if jobs > 1:
            from apeqe.metrics import TerStats

            if len(hyps) != len(refs):
                raise ApeQeError(f"ter: {len(hyps)} hypotheses vs {len(refs)} references")
            parts = _parallel_map(_ter_one, [(h, r, cfg["shifts"]) for h, r in zip(hyps, refs)],
                                  jobs)
            stats = TerStats()
            for part in parts:
                stats = stats + part
            report.ter, report.ter_stats = stats.score(), stats
        else:
            report.ter, report.ter_stats = ter(hyps, refs, shifts=cfg["shifts"])
    if cfg.get("pred_tags") and cfg.get("gold_tags"):
        pred = _read_token_lines(cfg["pred_tags"])
        gold = _read_token_lines(cfg["gold_tags"])
        report.f1_mult, report.confusion = f1_mult(pred, gold)
        report.accuracy = accuracy(pred, gold)
    if report.as_dict() == {}:
        raise ConfigurationError("eval needs --hyp/--ref and/or --pred-tags/--gold-tags")
    print(report.render())
    if cfg.get("out"):
        Path(cfg["out"]).write_text(
            json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return [cfg["out"]]
    return []


@stage("synth-data")
def run_synth_data(cfg):
    from .corpus import round_trip_synthesize

    tgt2src = Seq2SeqModel.load(cfg["tgt2src"])
    src2tgt = Seq2SeqModel.load(cfg["src2tgt"])

    class _BeamTranslator:
        def __init__(self, model, beam, max_len):
            self.model, self.beam, self.max_len = model, beam, max_len

        def translate(self, tokens):
            return self.model.translate(tokens, beam_width=self.beam,
                                        max_len=self.max_len)

    refs = _read_token_lines(cfg["refs"])
    corpus = round_trip_synthesize(refs,
                                   _BeamTranslator(tgt2src, cfg["beam"], cfg["max_len"]),
                                   _BeamTranslator(src2tgt, cfg["beam"], cfg["max_len"]))
    prefix = cfg["out_prefix"]
    paths = [f"{prefix}.src", f"{prefix}.mt", f"{prefix}.pe"]
    save_triples(corpus, *paths)
    return paths


# ---------------------------------------------------------------------------
# Argument parsing: explicit flags override the --config file, which
# overrides built-in defaults.

DEFAULTS: dict[str, dict] = {
    "bpe-learn": {"marker": "@@"},
    "bpe-apply": {},
    "annotate-merge": {"names": None},
    "build-input": {"src": None, "mt": None, "alignment": None,
                    "src_annot": None, "mt_annot": None},
    "train": {"epochs": 10, "lr": 0.005, "batch_size": 8, "clip_norm": 1.0,
              "checkpoint_every": 0, "vocab_size": 200, "tgt_vocab_size": 200,
              "surface_dim": 64, "factor_dim": 8, "hidden_dim": 64,
              "keep_best": 4, "dev_input": None, "dev_target": None,
              "tgt_vocab": None},
    "finetune-minrisk": {"iterations": 1, "samples": 5, "alpha": 1.0, "lr": 0.001,
                         "max_len": 40},
    "avg-checkpoints": {},
    "decode": {"beam": 5, "nbest": 1, "max_len": 40, "nbest_out": None},
    "ensemble-decode": {"beam": 5, "nbest": 1, "max_len": 40, "nbest_out": None,
                        "weights": None},
    "rescore": {"weights": None},
    "tune-mert": {"objective": "ter", "iterations": 10, "nbest_size": 12, "beam": 5,
                  "max_len": 40, "shifts": True, "convergence_threshold": 1e-4,
                  "pe": None, "mt": None, "gold_tags": None, "pool_out": None,
                  "weights": None, "desegment_marker": None},
    "qe-tags": {"case_sensitive": False, "shifts": False, "desegment_marker": None},
    "eval": {"shifts": True, "hyp": None, "ref": None, "pred_tags": None,
             "gold_tags": None, "out": None},
    "synth-data": {"beam": 1, "max_len": 40},
}

SEED_REQUIRED = {"train", "finetune-minrisk", "tune-mert", "synth-data"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apeqe",
        description="Train, ensemble, tune, and evaluate APE/QE sequence models.")
    parser.add_argument("--config", help="JSON file with per-stage defaults")
    parser.add_argument("--seed", type=int, help="master random seed")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker processes for per-sentence stages")

    class _Sub(argparse._SubParsersAction):
        # --seed is also accepted after the subcommand for convenience
        def add_parser(self, name, **kwargs):
            p = super().add_parser(name, **kwargs)
            p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
            return p

    parser.register("action", "parsers", _Sub)
    sub = parser.add_subparsers(dest="stage", required=True)
    S = argparse.SUPPRESS

    p = sub.add_parser("bpe-learn", help="learn subword merge rules")
    p.add_argument("--input", nargs="+", required=True, default=S)
    p.add_argument("--merges", type=int, required=True, default=S)
    p.add_argument("--marker", default=S)
    p.add_argument("--out", required=True, default=S)

    p = sub.add_parser("bpe-apply", help="segment a corpus with learned merges")
    p.add_argument("--input", required=True, default=S)
    p.add_argument("--model", required=True, default=S)
    p.add_argument("--out", required=True, default=S)

    p = sub.add_parser("annotate-merge", help="zip token and factor-layer files")
    p.add_argument("--tokens", required=True, default=S)
    p.add_argument("--layers", nargs="+", required=True, default=S)
    p.add_argument("--names", nargs="+", default=S)
    p.add_argument("--out", required=True, default=S)

    p = sub.add_parser("build-input", help="construct one of the five input kinds")
    p.add_argument("--kind", required=True, default=S,
                   choices=[k.value for k in ModelInputKind])
    p.add_argument("--src", default=S)
    p.add_argument("--mt", default=S)
    p.add_argument("--alignment", default=S)
    p.add_argument("--src-annot", dest="src_annot", default=S)
    p.add_argument("--mt-annot", dest="mt_annot", default=S)
    p.add_argument("--out", required=True, default=S)

    p = sub.add_parser("train", help="cross-entropy training")
    p.add_argument("--input", required=True, default=S)
    p.add_argument("--target", required=True, default=S)
    p.add_argument("--dev-input", dest="dev_input", default=S)
    p.add_argument("--dev-target", dest="dev_target", default=S)
    p.add_argument("--tgt-vocab", dest="tgt_vocab", default=S)
    p.add_argument("--out-dir", dest="out_dir", required=True, default=S)
    for flag, typ in (("epochs", int), ("lr", float), ("batch-size", int),
                      ("clip-norm", float), ("checkpoint-every", int),
                      ("vocab-size", int), ("tgt-vocab-size", int),
                      ("surface-dim", int), ("factor-dim", int),
                      ("hidden-dim", int), ("keep-best", int)):
        p.add_argument(f"--{flag}", dest=flag.replace("-", "_"), type=typ, default=S)

    p = sub.add_parser("finetune-minrisk", help="minimum-risk fine-tuning")
    p.add_argument("--model-dir", dest="model_dir", required=True, default=S)
    p.add_argument("--input", required=True, default=S)
    p.add_argument("--target", required=True, default=S)
    p.add_argument("--out-dir", dest="out_dir", required=True, default=S)
    p.add_argument("--iterations", type=int, default=S)
    p.add_argument("--samples", type=int, default=S)
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--lr", type=float, default=S)
    p.add_argument("--max-len", dest="max_len", type=int, default=S)

    p = sub.add_parser("avg-checkpoints", help="elementwise-average checkpoints")
    p.add_argument("--inputs", nargs="+", required=True, default=S)
    p.add_argument("--vocab-from", dest="vocab_from", required=True, default=S)
    p.add_argument("--out-dir", dest="out_dir", required=True, default=S)

    p = sub.add_parser("decode", help="single-model beam search")
    p.add_argument("--model-dir", dest="model_dir", required=True, default=S)
    p.add_argument("--input", required=True, default=S)
    p.add_argument("--out", required=True, default=S)
    p.add_argument("--beam", type=int, default=S)
    p.add_argument("--nbest", type=int, default=S)
    p.add_argument("--nbest-out", dest="nbest_out", default=S)
    p.add_argument("--max-len", dest="max_len", type=int, default=S)

    p = sub.add_parser("ensemble-decode", help="weighted log-linear ensemble search")
    p.add_argument("--manifest", required=True, default=S)
    p.add_argument("--inputs", nargs="+", required=True, default=S)
    p.add_argument("--weights", default=S)
    p.add_argument("--out", required=True, default=S)
    p.add_argument("--beam", type=int, default=S)
    p.add_argument("--nbest", type=int, default=S)
    p.add_argument("--nbest-out", dest="nbest_out", default=S)
    p.add_argument("--max-len", dest="max_len", type=int, default=S)

    p = sub.add_parser("rescore", help="force-decode an n-best list under an ensemble")
    p.add_argument("--manifest", required=True, default=S)
    p.add_argument("--inputs", nargs="+", required=True, default=S)
    p.add_argument("--weights", default=S)
    p.add_argument("--nbest", required=True, default=S)
    p.add_argument("--out", required=True, default=S)

    p = sub.add_parser("tune-mert", help="minimum-error-rate weight tuning")
    p.add_argument("--manifest", required=True, default=S)
    p.add_argument("--inputs", nargs="+", required=True, default=S)
    p.add_argument("--weights", default=S)
    p.add_argument("--objective", choices=[o.value for o in Objective], default=S)
    p.add_argument("--pe", default=S)
    p.add_argument("--mt", default=S)
    p.add_argument("--gold-tags", dest="gold_tags", default=S)
    p.add_argument("--iterations", type=int, default=S)
    p.add_argument("--nbest-size", dest="nbest_size", type=int, default=S)
    p.add_argument("--beam", type=int, default=S)
    p.add_argument("--max-len", dest="max_len", type=int, default=S)
    p.add_argument("--shifts", dest="shifts", action="store_true", default=S)
    p.add_argument("--no-shifts", dest="shifts", action="store_false", default=S)
    p.add_argument("--convergence-threshold", dest="convergence_threshold",
                   type=float, default=S)
    p.add_argument("--desegment-marker", dest="desegment_marker", default=S)
    p.add_argument("--pool-out", dest="pool_out", default=S)
    p.add_argument("--out", required=True, default=S)

    p = sub.add_parser("qe-tags", help="derive OK/BAD tags from MT and (pseudo-)PE")
    p.add_argument("--mt", required=True, default=S)
    p.add_argument("--pe", required=True, default=S)
    p.add_argument("--out", required=True, default=S)
    p.add_argument("--case-sensitive", dest="case_sensitive", action="store_true", default=S)
    p.add_argument("--shifts", dest="shifts", action="store_true", default=S)
    p.add_argument("--desegment-marker", dest="desegment_marker", default=S)

    p = sub.add_parser("eval", help="BLEU / TER / F1-Mult / accuracy report")
    p.add_argument("--hyp", default=S)
    p.add_argument("--ref", default=S)
    p.add_argument("--pred-tags", dest="pred_tags", default=S)
    p.add_argument("--gold-tags", dest="gold_tags", default=S)
    p.add_argument("--shifts", dest="shifts", action="store_true", default=S)
    p.add_argument("--no-shifts", dest="shifts", action="store_false", default=S)
    p.add_argument("--out", default=S)

    p = sub.add_parser("synth-data", help="round-trip synthetic triples")
    p.add_argument("--refs", required=True, default=S)
    p.add_argument("--tgt2src", required=True, default=S)
    p.add_argument("--src2tgt", required=True, default=S)
    p.add_argument("--out-prefix", dest="out_prefix", required=True, default=S)
    p.add_argument("--beam", type=int, default=S)
    p.add_argument("--max-len", dest="max_len", type=int, default=S)

    return parser


def effective_config(args: argparse.Namespace) -> dict:
    """defaults < config file (stage section or flat) < explicit flags."""
    stage_name = args.stage
    cfg = dict(DEFAULTS.get(stage_name, {}))
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        section = raw.get(stage_name, raw if not any(k in STAGES for k in raw) else {})
        for key, value in section.items():
            cfg[key.replace("-", "_")] = value
    explicit = {k: v for k, v in vars(args).items()
                if k not in ("config", "stage", "jobs") and v is not None}
    cfg.update(explicit)
    if "seed" not in cfg or cfg.get("seed") is None:
        if stage_name in SEED_REQUIRED:
            raise ConfigurationError(f"--seed is mandatory for {stage_name}")
        cfg["seed"] = 0
    cfg["jobs"] = args.jobs
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = effective_config(args)
        np.random.seed(cfg["seed"])  # belt and braces; stages use local generators
        artifact_paths = STAGES[args.stage](cfg)
        hashed = {k: v for k, v in cfg.items() if k != "jobs"}
        for path in artifact_paths:
            artifacts.write_sidecar(path, args.stage, hashed, cfg.get("seed"))
    except ApeQeError as exc:
        print(f"error: stage={args.stage}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: stage={args.stage}: missing file: {exc.filename}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
