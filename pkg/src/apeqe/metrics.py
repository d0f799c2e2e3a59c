"""Corpus metrics: BLEU, TER (optionally with block shifts), F1-Mult, accuracy.

Every metric is computed from additive per-sentence sufficient
statistics, so corpus values can be re-derived exactly from summed
stats — the property the MERT envelope relies on.  BLEU and TER scores
live in [0,1] and [0,inf); the display layer may scale by 100.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .errors import ApeQeError

BLEU_ORDER = 4
#: Block shifts further than this many positions are not searched.
DEFAULT_SHIFT_CAP = 10
#: Maximum shifted-block length, as in the standard TER procedure.
DEFAULT_MAX_BLOCK = 10


# ---------------------------------------------------------------------------
# BLEU


@dataclass(frozen=True)
class BleuStats:
    """Clipped n-gram matches, n-gram totals, and length totals."""

    clipped: tuple[int, ...] = (0,) * BLEU_ORDER
    totals: tuple[int, ...] = (0,) * BLEU_ORDER
    hyp_len: int = 0
    ref_len: int = 0

    def __add__(self, other: "BleuStats") -> "BleuStats":
        return BleuStats(
            tuple(a + b for a, b in zip(self.clipped, other.clipped)),
            tuple(a + b for a, b in zip(self.totals, other.totals)),
            self.hyp_len + other.hyp_len,
            self.ref_len + other.ref_len,
        )

    def score(self) -> float:
        """4-gram BLEU with brevity penalty; add-one smoothing for n >= 2."""
        if self.hyp_len == 0:
            return 0.0
        log_prec = 0.0
        for n in range(BLEU_ORDER):
            c, t = self.clipped[n], self.totals[n]
            if n > 0:
                c, t = c + 1, t + 1
            if c == 0 or t == 0:
                return 0.0
            log_prec += math.log(c / t) / BLEU_ORDER
        if self.hyp_len >= self.ref_len:
            bp = 1.0
        else:
            bp = math.exp(1.0 - self.ref_len / self.hyp_len)
        return bp * math.exp(log_prec)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def sentence_bleu_stats(hyp: Sequence[str], ref: Sequence[str]) -> BleuStats:
    clipped, totals = [], []
    for n in range(1, BLEU_ORDER + 1):
        hyp_grams = _ngrams(hyp, n)
        ref_grams = _ngrams(ref, n)
        clipped.append(sum(min(c, ref_grams[g]) for g, c in hyp_grams.items()))
        totals.append(max(0, len(hyp) - n + 1))
    return BleuStats(tuple(clipped), tuple(totals), len(hyp), len(ref))


def bleu(hypotheses: Sequence[Sequence[str]],
         references: Sequence[Sequence[str]]) -> tuple[float, BleuStats]:
    """Corpus BLEU over parallel hypothesis/reference token sequences."""
    if len(hypotheses) != len(references):
        raise ApeQeError(
            f"bleu: {len(hypotheses)} hypotheses vs {len(references)} references")
    if not hypotheses:
        raise ApeQeError("bleu: empty corpus")
    stats = BleuStats()
    for hyp, ref in zip(hypotheses, references):
        stats = stats + sentence_bleu_stats(hyp, ref)
    return stats.score(), stats


def sentence_bleu(hyp: Sequence[str], ref: Sequence[str]) -> float:
    """Smoothed sentence-level BLEU (the min-risk training metric)."""
    return sentence_bleu_stats(hyp, ref).score()


# ---------------------------------------------------------------------------
# TER


@dataclass(frozen=True)
class TerStats:
    edits: int = 0
    ref_len: int = 0

    def __add__(self, other: "TerStats") -> "TerStats":
        return TerStats(self.edits + other.edits, self.ref_len + other.ref_len)

    def score(self) -> float:
        if self.ref_len == 0:
            return 0.0 if self.edits == 0 else float(self.edits)
        return self.edits / self.ref_len


def _edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    n, m = len(a), len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        cur = [i] + [0] * m
        ai = a[i - 1]
        for j in range(1, m + 1):
            cur[j] = min(prev[j - 1] + (0 if ai == b[j - 1] else 1),
                         prev[j] + 1, cur[j - 1] + 1)
        prev = cur
    return prev[m]


def _ref_spans(ref: Sequence[str], max_block: int) -> set[tuple[str, ...]]:
    spans = set()
    for length in range(1, min(max_block, len(ref)) + 1):
        for i in range(len(ref) - length + 1):
            spans.add(tuple(ref[i:i + length]))
    return spans


def shift_search(hyp: Sequence[str], ref: Sequence[str],
                 shift_cap: int = DEFAULT_SHIFT_CAP,
                 max_block: int = DEFAULT_MAX_BLOCK) -> tuple[int, int, list[int]]:
    """Greedy best-first block-shift search.

    Repeatedly applies the shift that most reduces the plain edit
    distance (shifted blocks must match some reference span), stopping
    when no shift improves.  Returns (edit distance after shifts,
    number of shifts, permutation of original hypothesis positions).
    """
    order = list(range(len(hyp)))
    words = list(hyp)
    edits = _edit_distance(words, ref)
    n_shifts = 0
    spans = _ref_spans(ref, max_block)
    while edits > 0:
        best = None  # (new_edits, start, length, dest)
        n = len(words)
        for length in range(1, min(max_block, n) + 1):
            for start in range(n - length + 1):
                block = tuple(words[start:start + length])
                if block not in spans:
                    continue
                rest = words[:start] + words[start + length:]
                for dest in range(len(rest) + 1):
                    if dest == start:
                        continue
                    if abs(dest - start) > shift_cap:
                        continue
                    candidate = rest[:dest] + list(block) + rest[dest:]
                    new_edits = _edit_distance(candidate, ref)
                    if new_edits < edits and (best is None or new_edits < best[0]):
                        best = (new_edits, start, length, dest)
        if best is None:
            break
        new_edits, start, length, dest = best
        moved_words = words[start:start + length]
        moved_order = order[start:start + length]
        del words[start:start + length]
        del order[start:start + length]
        words[dest:dest] = moved_words
        order[dest:dest] = moved_order
        edits = new_edits
        n_shifts += 1
    return edits, n_shifts, order


def sentence_ter_stats(hyp: Sequence[str], ref: Sequence[str], shifts: bool = True,
                       case_sensitive: bool = False,
                       shift_cap: int = DEFAULT_SHIFT_CAP,
                       max_block: int = DEFAULT_MAX_BLOCK) -> TerStats:
    if not case_sensitive:
        hyp = [w.lower() for w in hyp]
        ref = [w.lower() for w in ref]
    if shifts:
        edits, n_shifts, _ = shift_search(hyp, ref, shift_cap, max_block)
        return TerStats(edits + n_shifts, len(ref))
    return TerStats(_edit_distance(hyp, ref), len(ref))


def ter(hypotheses: Sequence[Sequence[str]], references: Sequence[Sequence[str]],
        shifts: bool = True, case_sensitive: bool = False) -> tuple[float, TerStats]:
    """Corpus TER = total edits (incl. shifts) / total reference length."""
    if len(hypotheses) != len(references):
        raise ApeQeError(
            f"ter: {len(hypotheses)} hypotheses vs {len(references)} references")
    stats = TerStats()
    for i, (hyp, ref) in enumerate(zip(hypotheses, references)):
        if len(ref) == 0:
            raise ApeQeError(f"ter: empty reference at sentence {i}")
        stats = stats + sentence_ter_stats(hyp, ref, shifts=shifts,
                                           case_sensitive=case_sensitive)
    return stats.score(), stats


# ---------------------------------------------------------------------------
# Word-level QE metrics


@dataclass(frozen=True)
class QEConfusion:
    """Corpus-level OK/BAD confusion counts; additive across sentences."""

    tp_ok: int = 0
    fp_ok: int = 0
    fn_ok: int = 0
    tp_bad: int = 0
    fp_bad: int = 0
    fn_bad: int = 0

    def __add__(self, other: "QEConfusion") -> "QEConfusion":
        return QEConfusion(*(a + b for a, b in zip(self._astuple(), other._astuple())))

    def _astuple(self):
        return (self.tp_ok, self.fp_ok, self.fn_ok, self.tp_bad, self.fp_bad, self.fn_bad)

    @classmethod
    def from_tags(cls, predicted: Sequence[str], gold: Sequence[str]) -> "QEConfusion":
        tp_ok = fp_ok = fn_ok = tp_bad = fp_bad = fn_bad = 0
        for p, g in zip(predicted, gold):
            if p == "OK":
                if g == "OK":
                    tp_ok += 1
                else:
                    fp_ok += 1
                    fn_bad += 1
            else:
                if g == "BAD":
                    tp_bad += 1
                else:
                    fp_bad += 1
                    fn_ok += 1
        return cls(tp_ok, fp_ok, fn_ok, tp_bad, fp_bad, fn_bad)

    @staticmethod
    def _f1(tp: int, fp: int, fn: int) -> float:
        denom = 2 * tp + fp + fn
        return 2 * tp / denom if denom else 0.0

    def f1_ok(self) -> float:
        return self._f1(self.tp_ok, self.fp_ok, self.fn_ok)

    def f1_bad(self) -> float:
        return self._f1(self.tp_bad, self.fp_bad, self.fn_bad)

    def f1_mult(self) -> float:
        return self.f1_ok() * self.f1_bad()

    def accuracy(self) -> float:
        total = self.tp_ok + self.fp_ok + self.tp_bad + self.fp_bad
        return (self.tp_ok + self.tp_bad) / total if total else 0.0


def _check_tag_lengths(predicted, gold, metric: str):
    if len(predicted) != len(gold):
        raise ApeQeError(f"{metric}: {len(predicted)} predicted vs {len(gold)} gold sentences")
    for i, (p, g) in enumerate(zip(predicted, gold)):
        if len(p) != len(g):
            raise ApeQeError(f"{metric}: tag length mismatch at sentence {i}: "
                             f"{len(p)} predicted vs {len(g)} gold")


def f1_mult(predicted: Sequence[Sequence[str]],
            gold: Sequence[Sequence[str]]) -> tuple[float, QEConfusion]:
    """F1(OK) x F1(BAD) over corpus-level confusion counts."""
    _check_tag_lengths(predicted, gold, "f1_mult")
    confusion = QEConfusion()
    for p, g in zip(predicted, gold):
        confusion = confusion + QEConfusion.from_tags(p, g)
    return confusion.f1_mult(), confusion


def accuracy(predicted: Sequence[Sequence[str]],
             gold: Sequence[Sequence[str]]) -> float:
    """Fraction of matching tags over all tags."""
    _check_tag_lengths(predicted, gold, "accuracy")
    confusion = QEConfusion()
    for p, g in zip(predicted, gold):
        confusion = confusion + QEConfusion.from_tags(p, g)
    return confusion.accuracy()


# ---------------------------------------------------------------------------
# Combined report


@dataclass
class MetricReport:
    """All metric columns that apply to one evaluation run."""

    bleu: float | None = None
    bleu_stats: BleuStats | None = None
    ter: float | None = None
    ter_stats: TerStats | None = None
    f1_mult: float | None = None
    confusion: QEConfusion | None = None
    accuracy: float | None = None

    def recomputed(self) -> "MetricReport":
        """Re-derive every score from its sufficient statistics."""
        return MetricReport(
            bleu=self.bleu_stats.score() if self.bleu_stats else None,
            bleu_stats=self.bleu_stats,
            ter=self.ter_stats.score() if self.ter_stats else None,
            ter_stats=self.ter_stats,
            f1_mult=self.confusion.f1_mult() if self.confusion else None,
            confusion=self.confusion,
            accuracy=self.confusion.accuracy() if self.confusion else None,
        )

    def as_dict(self) -> dict:
        out: dict = {}
        if self.bleu is not None:
            out["bleu"] = self.bleu
            out["bleu_stats"] = {"clipped": list(self.bleu_stats.clipped),
                                 "totals": list(self.bleu_stats.totals),
                                 "hyp_len": self.bleu_stats.hyp_len,
                                 "ref_len": self.bleu_stats.ref_len}
        if self.ter is not None:
            out["ter"] = self.ter
            out["ter_stats"] = {"edits": self.ter_stats.edits,
                                "ref_len": self.ter_stats.ref_len}
        if self.f1_mult is not None:
            c = self.confusion
            out["f1_mult"] = self.f1_mult
            out["f1_ok"] = c.f1_ok()
            out["f1_bad"] = c.f1_bad()
            out["confusion"] = {"tp_ok": c.tp_ok, "fp_ok": c.fp_ok, "fn_ok": c.fn_ok,
                                "tp_bad": c.tp_bad, "fp_bad": c.fp_bad, "fn_bad": c.fn_bad}
        if self.accuracy is not None:
            out["accuracy"] = self.accuracy
        return out

    def render(self) -> str:
        rows = []
        if self.bleu is not None:
            rows.append(("BLEU", f"{self.bleu:.4f}"))
        if self.ter is not None:
            rows.append(("TER", f"{self.ter:.4f}"))
        if self.f1_mult is not None:
            rows.append(("F1-Mult", f"{self.f1_mult:.4f}"))
        if self.accuracy is not None:
            rows.append(("Accuracy", f"{self.accuracy:.4f}"))
        width = max((len(name) for name, _ in rows), default=0)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)
