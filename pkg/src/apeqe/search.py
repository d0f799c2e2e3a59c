"""Weighted beam search over one or more synchronized step scorers.

A scorer exposes ``start()`` and ``step(state, prev_id) -> (logp, attn,
state)``; members advance in lockstep over a shared output vocabulary
and candidates are ranked by the weighted sum of member log
probabilities.  Single-model decoding is the one-member special case,
which keeps the two paths token-identical by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np


class StepScorer(Protocol):
    def start(self): ...

    def step(self, state, prev_id: int) -> tuple[np.ndarray, np.ndarray, object]: ...


@dataclass(frozen=True)
class SearchHypothesis:
    """One decoded candidate with per-member cumulative log probabilities.

    `tokens` excludes BOS/EOS; `attention` holds one row per performed
    step (including the EOS step when finished), per member.
    """

    tokens: tuple[int, ...]
    score: float
    member_scores: tuple[float, ...]
    attention: tuple[np.ndarray, ...]
    finished: bool

    @property
    def logprob(self) -> float:
        """Single-member convenience alias."""
        return self.member_scores[0] if len(self.member_scores) == 1 else self.score


@dataclass
class _Beam:
    tokens: tuple[int, ...]
    score: float
    member_scores: np.ndarray
    states: list
    attn: list[list[np.ndarray]]
    prev_id: int


def beam_search(scorers: Sequence[StepScorer], weights: Sequence[float], *,
                bos_id: int, eos_id: int, beam_width: int, n_best: int,
                max_len: int) -> list[SearchHypothesis]:
    """Rank hypotheses by weighted cumulative log probability.

    Finished hypotheses leave the beam when they emit EOS.  If nothing
    finishes within `max_len` steps, the best unfinished hypothesis is
    returned flagged.  Ties are stable: lower beam slot, then lower
    token id.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    weights = np.asarray(weights, dtype=np.float64)
    n_members = len(scorers)
    beams = [_Beam((), 0.0, np.zeros(n_members), [s.start() for s in scorers],
                   [[] for _ in range(n_members)], bos_id)]
    finished: list[SearchHypothesis] = []

    for _ in range(max_len):
        if not beams:
            break
        stepped = []
        for beam in beams:
            logps, attns, states = [], [], []
            for scorer, state in zip(scorers, beam.states):
                logp, attn, new_state = scorer.step(state, beam.prev_id)
                logps.append(np.asarray(logp, dtype=np.float64))
                attns.append(attn)
                states.append(new_state)
            combined = sum(w * lp for w, lp in zip(weights, logps))
            stepped.append((beam, logps, attns, states, combined))

        vocab = stepped[0][4].shape[0]
        flat = np.concatenate([beam.score + combined for beam, *_, combined in stepped])
        k = min(beam_width, flat.shape[0])
        order = np.argsort(-flat, kind="stable")[:k]

        next_beams = []
        for flat_idx in order:
            b_idx, token = divmod(int(flat_idx), vocab)
            beam, logps, attns, states, _ = stepped[b_idx]
            member_scores = beam.member_scores + np.array([lp[token] for lp in logps])
            attn_hist = [hist + [attn] for hist, attn in zip(beam.attn, attns)]
            if token == eos_id:
                finished.append(SearchHypothesis(
                    tokens=beam.tokens,
                    score=float(flat[flat_idx]),
                    member_scores=tuple(float(s) for s in member_scores),
                    attention=tuple(np.array(h) for h in attn_hist),
                    finished=True,
                ))
            else:
                next_beams.append(_Beam(beam.tokens + (token,), float(flat[flat_idx]),
                                        member_scores, states, attn_hist, token))
        beams = next_beams

    finished.sort(key=lambda h: -h.score)
    if finished:
        return finished[:n_best]
    # nothing reached EOS: surface the best unfinished candidate, flagged
    best = max(beams, key=lambda b: b.score)
    return [SearchHypothesis(best.tokens, best.score,
                             tuple(float(s) for s in best.member_scores),
                             tuple(np.array(h) for h in best.attn), False)]
