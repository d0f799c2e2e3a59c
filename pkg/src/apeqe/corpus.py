"""Triple corpora, vocabularies, and synthetic-data composition.

A training example is a (source, MT hypothesis, post-edit) triple of
whitespace-pretokenized sentences.  Files are UTF-8, one sentence per
line, single-space separated, with `|` reserved for the factored format
and therefore forbidden inside raw tokens.
"""

from __future__ import annotations

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .errors import CorpusValidationError, ParallelismError

logger = logging.getLogger(__name__)

#: Reserved vocabulary symbols, in id order.
PAD, BOS, EOS, UNK, BREAK = "<pad>", "<s>", "</s>", "<unk>", "BREAK"
RESERVED_SYMBOLS = (PAD, BOS, EOS, UNK, BREAK)
PAD_ID, BOS_ID, EOS_ID, UNK_ID, BREAK_ID = range(5)


def validate_token(token: str, where: str = "") -> str:
    """Reject tokens that would corrupt the line-based external formats."""
    if not token:
        raise CorpusValidationError(f"empty token {where}".strip())
    if "|" in token:
        raise CorpusValidationError(f"token {token!r} contains reserved '|' {where}".strip())
    if any(ch.isspace() for ch in token):
        raise CorpusValidationError(f"token {token!r} contains whitespace {where}".strip())
    return token


@dataclass(frozen=True)
class TrainingTriple:
    """One (SRC, MT, PE) example; all three sides non-empty."""

    src: tuple[str, ...]
    mt: tuple[str, ...]
    pe: tuple[str, ...]

    def __post_init__(self):
        for name, side in (("src", self.src), ("mt", self.mt), ("pe", self.pe)):
            if len(side) == 0:
                raise CorpusValidationError(f"{name} side is empty")
            for tok in side:
                validate_token(tok, f"on {name} side")


@dataclass(frozen=True)
class Corpus:
    """An ordered, immutable list of training triples."""

    triples: tuple[TrainingTriple, ...]
    name: str = ""

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self):
        return iter(self.triples)

    def __getitem__(self, i):
        return self.triples[i]

    def side(self, which: str) -> list[tuple[str, ...]]:
        """All sentences of one side ('src', 'mt' or 'pe'), in order."""
        if which not in ("src", "mt", "pe"):
            raise ValueError(f"unknown corpus side {which!r}")
        return [getattr(t, which) for t in self.triples]


def _read_lines(path: str | Path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def _parse_side(lines: list[str], path: str | Path) -> list[tuple[str, ...]]:
    sentences = []
    for i, line in enumerate(lines, start=1):
        if line != line.strip() or "  " in line:
            raise CorpusValidationError(f"{path}:{i}: irregular whitespace")
        if not line:
            raise CorpusValidationError(f"{path}:{i}: empty line")
        sentences.append(tuple(line.split(" ")))
    return sentences


def load_triples(src_path: str | Path, mt_path: str | Path, pe_path: str | Path,
                 name: str = "") -> Corpus:
    """Load three line-parallel files; line i of each forms triple i."""
    paths = (src_path, mt_path, pe_path)
    lines = [_read_lines(p) for p in paths]
    counts = [len(ls) for ls in lines]
    if len(set(counts)) != 1:
        detail = ", ".join(f"{p}={c}" for p, c in zip(paths, counts))
        raise ParallelismError(f"parallel files differ in line count: {detail}")
    sides = [_parse_side(ls, p) for ls, p in zip(lines, paths)]
    triples = tuple(TrainingTriple(s, m, e) for s, m, e in zip(*sides))
    return Corpus(triples, name=name or str(src_path))


def save_triples(corpus: Corpus, src_path: str | Path, mt_path: str | Path,
                 pe_path: str | Path) -> None:
    """Inverse of load_triples: writes three line-parallel files."""
    for path, which in ((src_path, "src"), (mt_path, "mt"), (pe_path, "pe")):
        text = "\n".join(" ".join(sent) for sent in corpus.side(which))
        Path(path).write_text(text + "\n" if text else "", encoding="utf-8")


class Vocabulary:
    """Bijective symbol<->id map with dense ids and fixed reserved slots."""

    def __init__(self, symbols: Sequence[str]):
        if tuple(symbols[: len(RESERVED_SYMBOLS)]) != RESERVED_SYMBOLS:
            raise CorpusValidationError("vocabulary must start with the reserved symbols")
        self._symbols = tuple(symbols)
        self._ids = {s: i for i, s in enumerate(self._symbols)}
        if len(self._ids) != len(self._symbols):
            raise CorpusValidationError("vocabulary contains duplicate symbols")

    def __len__(self) -> int:
        return len(self._symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._symbols == other._symbols

    @property
    def symbols(self) -> tuple[str, ...]:
        return self._symbols

    def id(self, symbol: str) -> int:
        """Map a symbol to its id; unknown symbols fall back to UNK."""
        return self._ids.get(symbol, UNK_ID)

    def symbol(self, idx: int) -> str:
        return self._symbols[idx]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.id(t) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self._symbols[i] for i in ids]

    def content_hash(self) -> str:
        """Stable fingerprint used to detect vocabulary mixups across models."""
        payload = "\n".join(self._symbols).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self._symbols) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls(Path(path).read_text(encoding="utf-8").splitlines())


def build_vocab(sentences: Iterable[Sequence[str]], max_size: int) -> Vocabulary:
    """Keep the most frequent symbols, ties broken lexicographically.

    `max_size` counts the reserved symbols; it must exceed their number.
    Deterministic: same input, same result.
    """
    if max_size <= len(RESERVED_SYMBOLS):
        raise ValueError(f"max_size must exceed {len(RESERVED_SYMBOLS)} reserved symbols")
    counts = Counter()
    for sent in sentences:
        counts.update(sent)
    for sym in RESERVED_SYMBOLS:
        counts.pop(sym, None)
    budget = max_size - len(RESERVED_SYMBOLS)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [sym for sym, _ in ranked[:budget]]
    return Vocabulary(list(RESERVED_SYMBOLS) + kept)


def upsample_concat(large: Corpus, small: Corpus, factor: int) -> Corpus:
    """Concatenate `large` with `factor` literal copies of `small`."""
    if factor < 1:
        raise ValueError("upsampling factor must be >= 1")
    triples = large.triples + small.triples * factor
    return Corpus(triples, name=f"{large.name}+{factor}x{small.name}")


class Translator(Protocol):
    """Anything that maps a token sequence to a token sequence."""

    def translate(self, tokens: Sequence[str]) -> list[str]: ...


def round_trip_synthesize(refs: Iterable[Sequence[str]], tgt2src: Translator,
                          src2tgt: Translator, name: str = "synthetic") -> Corpus:
    """Build (pseudo-source, pseudo-hypothesis, reference) triples.

    Each reference is translated into the source language and back; the
    reference itself becomes the PE side.  Sentences whose decode fails
    or comes back empty are skipped with a warning.
    """
    triples = []
    for i, ref in enumerate(refs):
        try:
            pseudo_src = tgt2src.translate(ref)
            pseudo_hyp = src2tgt.translate(pseudo_src)
            triples.append(TrainingTriple(tuple(pseudo_src), tuple(pseudo_hyp), tuple(ref)))
        except Exception as exc:  # noqa: BLE001 - any decode failure skips the line
            logger.warning("round-trip failed for sentence %d: %s", i, exc)
    return Corpus(tuple(triples), name=name)
