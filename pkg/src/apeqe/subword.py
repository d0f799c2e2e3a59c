"""Byte-pair subword segmentation and word<->subword factor projection.

Merges are learned greedily on word frequencies; non-final pieces carry
a continuation marker.  The default marker is ``@@``; a display marker
of ``-`` matches the convention of rendering segmentation as ``-`` plus
whitespace.  Word-level factors are projected onto pieces with ``B-`` /
``I-`` prefixes (singletons stay bare) and the projection is invertible.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import AlignmentError, FactorParseError, MalformedPrefixError
from .inputs import FactoredSentence, FactoredToken

DEFAULT_MARKER = "@@"
B_PREFIX = "B-"
I_PREFIX = "I-"


@dataclass(frozen=True)
class BPEModel:
    """An ordered, duplicate-free list of symbol-pair merges."""

    merges: tuple[tuple[str, str], ...]
    marker: str = DEFAULT_MARKER

    def __post_init__(self):
        if len(set(self.merges)) != len(self.merges):
            raise ValueError("duplicate merge rule in BPE model")
        if not self.marker:
            raise ValueError("continuation marker must be non-empty")

    def save(self, path: str | Path) -> None:
        lines = [f"#apeqe-bpe v1 marker={self.marker}"]
        lines += [f"{a} {b}" for a, b in self.merges]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BPEModel":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith("#apeqe-bpe v1 marker="):
            raise FactorParseError(f"{path}: missing BPE header line")
        marker = lines[0].split("marker=", 1)[1]
        merges = []
        for i, line in enumerate(lines[1:], start=2):
            parts = line.split(" ")
            if len(parts) != 2:
                raise FactorParseError(f"{path}:{i}: merge rule needs two symbols")
            merges.append((parts[0], parts[1]))
        return cls(tuple(merges), marker=marker)


@dataclass(frozen=True)
class SegmentedToken:
    """The pieces of one source word; non-final pieces carry the marker."""

    pieces: tuple[str, ...]
    origin_index: int = 0

    def __post_init__(self):
        if not self.pieces or any(not p for p in self.pieces):
            raise ValueError("pieces must be non-empty")

    def word(self, marker: str = DEFAULT_MARKER) -> str:
        """Strip continuation markers and concatenate back to the word."""
        parts = [_strip_marker(p, marker) for p in self.pieces[:-1]]
        return "".join(parts) + self.pieces[-1]


def _strip_marker(piece: str, marker: str) -> str:
    if piece.endswith(marker) and len(piece) > len(marker):
        return piece[: -len(marker)]
    return piece


def _merge_pair(symbols: list[str], a: str, b: str) -> list[str]:
    # Single left-to-right pass; a merged symbol never re-forms the same
    # pair with its neighbours, so one pass reaches the fixpoint.
    out = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == a and symbols[i + 1] == b:
            out.append(a + b)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def bpe_learn(sentences: Iterable[Sequence[str]], num_merges: int,
              marker: str = DEFAULT_MARKER) -> BPEModel:
    """Greedy merge learning; ties broken lexicographically by pair."""
    if num_merges < 0:
        raise ValueError("num_merges must be >= 0")
    word_freq = Counter()
    for sent in sentences:
        word_freq.update(sent)
    inventory = {w: list(w) for w in word_freq}
    merges: list[tuple[str, str]] = []
    for _ in range(num_merges):
        pair_freq: Counter[tuple[str, str]] = Counter()
        for word, syms in inventory.items():
            freq = word_freq[word]
            for a, b in zip(syms, syms[1:]):
                pair_freq[(a, b)] += freq
        if not pair_freq:
            break
        best_count = max(pair_freq.values())
        best = min(p for p, c in pair_freq.items() if c == best_count)
        merges.append(best)
        for word, syms in inventory.items():
            if len(syms) > 1:
                inventory[word] = _merge_pair(syms, *best)
    return BPEModel(tuple(merges), marker=marker)


def bpe_apply(word: str, model: BPEModel, origin_index: int = 0) -> SegmentedToken:
    """Deterministically segment one word under the learned merges."""
    if not word:
        raise ValueError("cannot segment an empty word")
    symbols = list(word)
    for a, b in model.merges:
        if len(symbols) == 1:
            break
        symbols = _merge_pair(symbols, a, b)
    if len(symbols) == 1:
        return SegmentedToken((word,), origin_index)
    pieces = tuple(s + model.marker for s in symbols[:-1]) + (symbols[-1],)
    return SegmentedToken(pieces, origin_index)


def segment_sentence(words: Sequence[str], model: BPEModel) -> list[SegmentedToken]:
    return [bpe_apply(w, model, i) for i, w in enumerate(words)]


def segmented_surfaces(segmentation: Sequence[SegmentedToken]) -> list[str]:
    """Flatten a per-word segmentation into the subword token stream."""
    return [p for seg in segmentation for p in seg.pieces]


def subword_to_word_map(segmentation: Sequence[SegmentedToken]) -> list[int]:
    """Map each flattened subword position to its source word index."""
    return [seg.origin_index for seg in segmentation for _ in seg.pieces]


def project_factors_bilou(word_factors: Sequence[tuple[str, ...]],
                          segmentation: Sequence[SegmentedToken]) -> FactoredSentence:
    """Spread word-level factors over pieces with B-/I- prefixes.

    Unsegmented words keep their factors bare; a word split into n >= 2
    pieces gets ``B-`` on the first piece and ``I-`` on the rest, on
    every factor of that word.
    """
    if len(word_factors) != len(segmentation):
        raise AlignmentError(
            f"{len(word_factors)} factor tuples for {len(segmentation)} segmented words")
    tokens: list[FactoredToken] = []
    for factors, seg in zip(word_factors, segmentation):
        factors = tuple(factors)
        if len(seg.pieces) == 1:
            tokens.append(FactoredToken(seg.pieces[0], factors))
            continue
        for j, piece in enumerate(seg.pieces):
            prefix = B_PREFIX if j == 0 else I_PREFIX
            tokens.append(FactoredToken(piece, tuple(prefix + f for f in factors)))
    return FactoredSentence(tuple(tokens))


def _prefix_class(token: FactoredToken) -> str:
    """'B', 'I' or 'bare'; mixed prefixes within one token are malformed."""
    if not token.factors:
        return "bare"
    classes = set()
    for f in token.factors:
        if f.startswith(B_PREFIX):
            classes.add("B")
        elif f.startswith(I_PREFIX):
            classes.add("I")
        else:
            classes.add("bare")
    if len(classes) != 1:
        raise MalformedPrefixError(f"mixed factor prefixes on token {token.render()!r}")
    return classes.pop()


def desegment(sentence: FactoredSentence, marker: str = DEFAULT_MARKER) -> FactoredSentence:
    """Merge subword pieces back into words, stripping prefixes and markers.

    With factors present, grouping follows the B-/I- prefixes; bare
    (arity-1) sentences group by the continuation marker alone.  Word
    factors are taken from the B- piece.
    """
    if sentence.arity >= 2:
        return _desegment_by_prefixes(sentence, marker)
    return _desegment_by_marker(sentence, marker)


def _desegment_by_prefixes(sentence: FactoredSentence, marker: str) -> FactoredSentence:
    words: list[FactoredToken] = []
    group_pieces: list[str] = []
    group_factors: tuple[str, ...] | None = None

    def close_group(pos: int):
        nonlocal group_pieces, group_factors
        if not group_pieces:
            return
        if len(group_pieces) == 1:
            raise MalformedPrefixError(f"B- piece without I- continuation before token {pos}")
        surface = "".join(_strip_marker(p, marker) for p in group_pieces[:-1]) + group_pieces[-1]
        words.append(FactoredToken(surface, group_factors or ()))
        group_pieces, group_factors = [], None

    for pos, token in enumerate(sentence.tokens, start=1):
        cls = _prefix_class(token)
        if cls == "bare":
            close_group(pos)
            words.append(token)
        elif cls == "B":
            close_group(pos)
            group_pieces = [token.surface]
            group_factors = tuple(f[len(B_PREFIX):] for f in token.factors)
        else:  # I-
            if not group_pieces:
                raise MalformedPrefixError(f"orphan I- piece at token {pos}")
            group_pieces.append(token.surface)
    close_group(len(sentence) + 1)
    return FactoredSentence(tuple(words))


def _desegment_by_marker(sentence: FactoredSentence, marker: str) -> FactoredSentence:
    words: list[FactoredToken] = []
    buffer: list[str] = []
    for token in sentence.tokens:
        s = token.surface
        if s.endswith(marker) and len(s) > len(marker):
            buffer.append(s[: -len(marker)])
        else:
            words.append(FactoredToken("".join(buffer) + s))
            buffer = []
    if buffer:
        words.append(FactoredToken("".join(buffer)))
    return FactoredSentence(tuple(words))
