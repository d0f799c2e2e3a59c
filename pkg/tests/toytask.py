"""Seeded synthetic noisy-copy APE task used by the end-to-end tests.

PE sentences are random sequences over a small target vocabulary; SRC is
a token-bijective rendering of PE in a disjoint "source language"; MT is
PE corrupted by seeded substitutions, deletions, and insertions.  A SRC
model must learn translate-and-copy, an MT model learns to denoise; the
two are complementary, which is what makes the ensemble worth tuning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from apeqe.corpus import Corpus, TrainingTriple, build_vocab
from apeqe.ensemble import EnsembleMember, EnsembleSpec
from apeqe.inputs import ModelInputKind
from apeqe.model import Seq2SeqModel, TrainConfig, train_xent


@dataclass
class ToyTask:
    train: Corpus
    dev: Corpus
    vocab_size: int


def generate_toy_task(seed: int = 1234, n_train: int = 500, n_dev: int = 60,
                      n_symbols: int = 50, n_ambiguous_pairs: int = 8,
                      min_len: int = 3, max_len: int = 7,
                      p_sub: float = 0.12, p_del: float = 0.02,
                      p_ins: float = 0.02) -> ToyTask:
    """The SRC side is lossy (each ambiguous source symbol covers two
    target symbols) while the MT side is noisy; each model can fix what
    the other cannot, so the ensemble genuinely helps."""
    rng = np.random.default_rng(seed)
    tgt_syms = [f"t{i:02d}" for i in range(n_symbols)]
    src_of = {}
    for i, t in enumerate(tgt_syms):
        if i < 2 * n_ambiguous_pairs:
            src_of[t] = f"s{i // 2:02d}"
        else:
            src_of[t] = f"s{i - n_ambiguous_pairs:02d}"

    def make_triple() -> TrainingTriple:
        length = int(rng.integers(min_len, max_len + 1))
        pe = [tgt_syms[int(rng.integers(n_symbols))] for _ in range(length)]
        src = [src_of[t] for t in pe]
        mt: list[str] = []
        for tok in pe:
            r = rng.random()
            if r < p_del:
                continue
            if r < p_del + p_sub:
                mt.append(tgt_syms[int(rng.integers(n_symbols))])
            else:
                mt.append(tok)
            if rng.random() < p_ins:
                mt.append(tgt_syms[int(rng.integers(n_symbols))])
        if not mt:
            mt = [tgt_syms[int(rng.integers(n_symbols))]]
        return TrainingTriple(tuple(src), tuple(mt), tuple(pe))

    triples = tuple(make_triple() for _ in range(n_train + n_dev))
    return ToyTask(train=Corpus(triples[:n_train], name="toy-train"),
                   dev=Corpus(triples[n_train:], name="toy-dev"),
                   vocab_size=n_symbols)


def train_toy_model(task: ToyTask, kind: ModelInputKind, seed: int,
                    epochs: int = 16, lr: float = 0.008, lr_decay: float = 0.92,
                    hidden: int = 48, surface: int = 48,
                    batch_size: int = 8) -> Seq2SeqModel:
    """Train one single-factor model (SRC or MT input) against PE."""
    side = "src" if kind is ModelInputKind.SRC else "mt"
    inputs = task.train.side(side)
    targets = task.train.side("pe")
    in_vocab = build_vocab(inputs, max_size=task.vocab_size + 8)
    tgt_vocab = build_vocab(targets + task.train.side("mt"),
                            max_size=task.vocab_size + 8)
    model = Seq2SeqModel.create([in_vocab], tgt_vocab, seed=seed,
                                surface_dim=surface, hidden_dim=hidden)
    pairs = [(model.encode_input(list(s)), model.encode_target(list(t)))
             for s, t in zip(inputs, targets)]
    train_xent(model.params, pairs, TrainConfig(epochs=epochs, lr=lr, lr_decay=lr_decay,
                                                batch_size=batch_size, seed=seed))
    return model


def toy_ensemble(src_model: Seq2SeqModel, mt_model: Seq2SeqModel,
                 weights=(0.5, 0.5)) -> EnsembleSpec:
    return EnsembleSpec(
        (EnsembleMember("src", src_model, ModelInputKind.SRC),
         EnsembleMember("mt", mt_model, ModelInputKind.MT)),
        tuple(weights),
    )


def dev_bundles(spec: EnsembleSpec, task: ToyTask):
    from apeqe.inputs import FactoredSentence, FactoredToken

    bundles = []
    for triple in task.dev:
        bundle = []
        for member in spec.members:
            side = triple.src if member.kind is ModelInputKind.SRC else triple.mt
            bundle.append(FactoredSentence(tuple(FactoredToken(t) for t in side),
                                           member.kind))
        bundles.append(bundle)
    return bundles
