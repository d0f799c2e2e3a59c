"""The five model input representations and their external pipe format.

A factored token is rendered as ``surface|factor1|...|factorN``; tokens
are joined by single spaces.  Concatenated-side inputs carry exactly one
BREAK separator token, which replicates itself into every factor slot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import BREAK, TrainingTriple, validate_token
from .errors import AlignmentError, ConfigurationError, FactorParseError, ShapeError

ATTENTION_ROW_TOL = 1e-6


class ModelInputKind(str, Enum):
    SRC = "src"
    MT = "mt"
    MT_ALIGNED = "mt-aligned"
    SRC_PLUS_MT = "src+mt"
    SRC_PLUS_MT_FACTOR = "src+mt-factor"

    @property
    def concatenates(self) -> bool:
        return self in (ModelInputKind.SRC_PLUS_MT, ModelInputKind.SRC_PLUS_MT_FACTOR)


@dataclass(frozen=True)
class FactoredToken:
    """A surface form plus zero or more parallel factor strings."""

    surface: str
    factors: tuple[str, ...] = ()

    def __post_init__(self):
        validate_token(self.surface)
        for f in self.factors:
            validate_token(f, "in factor slot")

    @property
    def arity(self) -> int:
        return 1 + len(self.factors)

    def render(self) -> str:
        return "|".join((self.surface,) + self.factors)


def break_token(n_factors: int) -> FactoredToken:
    return FactoredToken(BREAK, (BREAK,) * n_factors)


@dataclass(frozen=True)
class FactoredSentence:
    """Uniform-arity token sequence, optionally bound to an input kind."""

    tokens: tuple[FactoredToken, ...]
    kind: ModelInputKind | None = None

    def __post_init__(self):
        arities = {t.arity for t in self.tokens}
        if len(arities) > 1:
            raise FactorParseError(f"non-uniform factor arity in sentence: {sorted(arities)}")
        if self.kind is not None and self.kind.concatenates:
            n_breaks = sum(1 for t in self.tokens if t.surface == BREAK)
            if n_breaks != 1:
                raise FactorParseError(
                    f"{self.kind.value} input must contain exactly one BREAK, found {n_breaks}")

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    @property
    def arity(self) -> int:
        return self.tokens[0].arity if self.tokens else 1

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.tokens)


@dataclass(frozen=True)
class SideAnnotations:
    """Word-parallel factor layers for one side (e.g. POS, dep, head POS)."""

    factors: tuple[tuple[str, ...], ...]
    layer_names: tuple[str, ...] = ("pos", "dep", "head_pos")

    def __len__(self) -> int:
        return len(self.factors)


@dataclass(frozen=True)
class TripleAnnotations:
    """Per-side annotations for one training triple."""

    src: SideAnnotations | None = None
    mt: SideAnnotations | None = None


def _bare(tokens: Sequence[str]) -> list[FactoredToken]:
    return [FactoredToken(t) for t in tokens]


def _factored(tokens: Sequence[str], side: SideAnnotations, side_name: str) -> list[FactoredToken]:
    if len(side) != len(tokens):
        raise AlignmentError(
            f"{side_name} annotations cover {len(side)} tokens, sentence has {len(tokens)}")
    return [FactoredToken(t, tuple(f)) for t, f in zip(tokens, side.factors)]


def build_input(triple: TrainingTriple, kind: ModelInputKind,
                annotations: TripleAnnotations | None = None,
                alignment: Sequence[str] | None = None) -> FactoredSentence:
    """Construct one model input sentence from a triple and its extras.

    MT_ALIGNED requires `alignment` (one source word per MT token);
    SRC_PLUS_MT_FACTOR requires `annotations` for both sides.  The
    alignment and annotation layers are expected at the same token
    granularity as the triple (already BILOU-projected if subword).
    """
    if kind is ModelInputKind.SRC:
        return FactoredSentence(tuple(_bare(triple.src)), kind)
    if kind is ModelInputKind.MT:
        return FactoredSentence(tuple(_bare(triple.mt)), kind)
    if kind is ModelInputKind.MT_ALIGNED:
        if alignment is None:
            raise ConfigurationError("mt-aligned input requires the alignment layer")
        if len(alignment) != len(triple.mt):
            raise AlignmentError(
                f"alignment layer has {len(alignment)} entries, MT has {len(triple.mt)} tokens")
        toks = [FactoredToken(t, (a,)) for t, a in zip(triple.mt, alignment)]
        return FactoredSentence(tuple(toks), kind)
    if kind is ModelInputKind.SRC_PLUS_MT:
        toks = _bare(triple.src) + [break_token(0)] + _bare(triple.mt)
        return FactoredSentence(tuple(toks), kind)
    if kind is ModelInputKind.SRC_PLUS_MT_FACTOR:
        if annotations is None or annotations.src is None or annotations.mt is None:
            missing = []
            if annotations is None or annotations.src is None:
                missing.append("src")
            if annotations is None or annotations.mt is None:
                missing.append("mt")
            raise ConfigurationError(
                f"src+mt-factor input requires factor layers for: {', '.join(missing)}")
        src_toks = _factored(triple.src, annotations.src, "src")
        mt_toks = _factored(triple.mt, annotations.mt, "mt")
        n_factors = src_toks[0].arity - 1 if src_toks else 0
        toks = src_toks + [break_token(n_factors)] + mt_toks
        return FactoredSentence(tuple(toks), kind)
    raise ConfigurationError(f"unknown input kind {kind!r}")


def attach_alignment_factor(mt: FactoredSentence, attention: np.ndarray,
                            src_words: Sequence[str],
                            subword_to_word: Sequence[int]) -> FactoredSentence:
    """Give each MT token the source *word* its attention argmax falls in.

    `attention` has one row per MT token and one column per source
    subword; `subword_to_word` maps source subword positions to word
    indices.  Argmax ties resolve to the lowest source index.
    """
    attention = np.asarray(attention, dtype=np.float64)
    expected = (len(mt), len(subword_to_word))
    if attention.shape != expected:
        raise ShapeError(f"attention shape {attention.shape}, expected {expected}")
    if len(mt) and not np.allclose(attention.sum(axis=1), 1.0, atol=ATTENTION_ROW_TOL):
        raise ShapeError("attention rows must each sum to 1")
    if any(w < 0 or w >= len(src_words) for w in subword_to_word):
        raise AlignmentError("subword_to_word maps outside the source word range")
    toks = []
    for token, row in zip(mt.tokens, attention):
        word = src_words[subword_to_word[int(np.argmax(row))]]
        toks.append(FactoredToken(token.surface, (word,)))
    return FactoredSentence(tuple(toks), ModelInputKind.MT_ALIGNED)


def serialize_factored(sentence: FactoredSentence) -> str:
    """Render a sentence in the pipe-separated line format, byte-exact."""
    return " ".join(t.render() for t in sentence.tokens)


def parse_factored(line: str, expected_arity: int | None = None,
                   kind: ModelInputKind | None = None) -> FactoredSentence:
    """Inverse of serialize_factored; validates uniform factor arity."""
    if line == "":
        return FactoredSentence((), kind)
    tokens = []
    arity = expected_arity
    for i, chunk in enumerate(line.split(" "), start=1):
        fields = chunk.split("|")
        if any(f == "" for f in fields):
            raise FactorParseError(f"empty field in token {i}: {chunk!r}")
        if arity is None:
            arity = len(fields)
        elif len(fields) != arity:
            raise FactorParseError(
                f"ragged arity at token {i}: got {len(fields)}, expected {arity}")
        tokens.append(FactoredToken(fields[0], tuple(fields[1:])))
    return FactoredSentence(tuple(tokens), kind)


def write_factored_corpus(path: str | Path, sentences: Iterable[FactoredSentence],
                          kind: ModelInputKind | None = None,
                          layer_names: Sequence[str] = ()) -> None:
    """Write one sentence per line plus a sidecar manifest with the arity."""
    path = Path(path)
    sentences = list(sentences)
    lines = [serialize_factored(s) for s in sentences]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    arity = sentences[0].arity if sentences else 1
    manifest = {
        "kind": kind.value if kind else None,
        "arity": arity,
        "factor_layers": list(layer_names),
    }
    manifest_path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                   encoding="utf-8")


def read_factored_corpus(path: str | Path) -> tuple[list[FactoredSentence], dict]:
    """Read a factored file; the sidecar manifest, if present, pins the arity."""
    path = Path(path)
    manifest = {}
    if manifest_path(path).exists():
        manifest = json.loads(manifest_path(path).read_text(encoding="utf-8"))
    arity = manifest.get("arity")
    kind = ModelInputKind(manifest["kind"]) if manifest.get("kind") else None
    sentences = []
    for line in path.read_text(encoding="utf-8").splitlines():
        sentences.append(parse_factored(line, expected_arity=arity, kind=kind))
    return sentences, manifest


def manifest_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")
