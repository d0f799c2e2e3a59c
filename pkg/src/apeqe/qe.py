"""Word-level MT/post-edit alignment and OK/BAD tag derivation.

The MT hypothesis is aligned with a (pseudo-)post-edit by minimal-cost
word edit distance (match 0, substitute/insert/delete 1).  MT words
consumed by a Match become OK; Substitute and Delete make them BAD;
Insert operations consume no MT word and emit no tag.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

OK = "OK"
BAD = "BAD"


class EditOp(Enum):
    MATCH = "match"
    SUBSTITUTE = "substitute"
    DELETE = "delete"    # MT word absent from PE
    INSERT = "insert"    # PE word absent from MT


@dataclass(frozen=True)
class EditStep:
    """One alignment operation; indices are None on the unconsumed side."""

    op: EditOp
    mt_index: int | None
    pe_index: int | None


@dataclass(frozen=True)
class EditScript:
    steps: tuple[EditStep, ...]

    @property
    def cost(self) -> int:
        return sum(1 for s in self.steps if s.op is not EditOp.MATCH)

    def counts(self) -> dict[EditOp, int]:
        out = {op: 0 for op in EditOp}
        for s in self.steps:
            out[s.op] += 1
        return out


def edit_align(mt_words: Sequence[str], pe_words: Sequence[str],
               case_sensitive: bool = False) -> EditScript:
    """Minimal-cost word alignment between MT and post-edit.

    Matching is case-insensitive unless `case_sensitive`.  The backtrace
    is deterministic, preferring Match > Substitute > Delete > Insert
    when costs tie.
    """
    if case_sensitive:
        a, b = list(mt_words), list(pe_words)
    else:
        a = [w.lower() for w in mt_words]
        b = [w.lower() for w in pe_words]
    n, m = len(a), len(b)
    # d[i][j] = minimal edits between a[:i] and b[:j]
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        d[i][0] = i
    for j in range(1, m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        row, prev = d[i], d[i - 1]
        ai = a[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (0 if ai == b[j - 1] else 1)
            row[j] = min(diag, prev[j] + 1, row[j - 1] + 1)

    steps: list[EditStep] = []
    i, j = n, m
    while i > 0 or j > 0:
        here = d[i][j]
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and d[i - 1][j - 1] == here:
            steps.append(EditStep(EditOp.MATCH, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and d[i - 1][j - 1] + 1 == here:
            steps.append(EditStep(EditOp.SUBSTITUTE, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and d[i - 1][j] + 1 == here:
            steps.append(EditStep(EditOp.DELETE, i - 1, None))
            i -= 1
        else:
            steps.append(EditStep(EditOp.INSERT, None, j - 1))
            j -= 1
    steps.reverse()
    return EditScript(tuple(steps))


def derive_tags(script: EditScript) -> list[str]:
    """Per-MT-word OK/BAD labels, in MT word order."""
    tagged: list[tuple[int, str]] = []
    for step in script.steps:
        if step.mt_index is None:
            continue
        tagged.append((step.mt_index, OK if step.op is EditOp.MATCH else BAD))
    tagged.sort(key=lambda t: t[0])
    return [tag for _, tag in tagged]


def tags_for_pair(mt_words: Sequence[str], pe_words: Sequence[str],
                  case_sensitive: bool = False, shifts: bool = False) -> list[str]:
    """Align then tag; always yields one tag per MT word.

    With `shifts` the TER block-shift search reorders the MT side first
    (a shifted word that then matches stays OK); the default is plain
    shift-free edit distance, which reproduces the gold-tag convention.
    """
    if not shifts:
        return derive_tags(edit_align(mt_words, pe_words, case_sensitive=case_sensitive))

    from .metrics import shift_search

    if case_sensitive:
        mt_cmp, pe_cmp = list(mt_words), list(pe_words)
    else:
        mt_cmp = [w.lower() for w in mt_words]
        pe_cmp = [w.lower() for w in pe_words]
    _, _, order = shift_search(mt_cmp, pe_cmp)
    shifted = [mt_words[i] for i in order]
    shifted_tags = tags_for_pair(shifted, pe_words, case_sensitive=case_sensitive)
    tags = [OK] * len(mt_words)
    for pos, orig in enumerate(order):
        tags[orig] = shifted_tags[pos]
    return tags
