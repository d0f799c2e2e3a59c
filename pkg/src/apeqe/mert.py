"""Minimum-error-rate tuning of ensemble weights over n-best pools.

Hypothesis scores are linear in a step gamma along a search direction,
so the per-sentence argmax as a function of gamma is the upper envelope
of lines; corpus objectives (TER down, F1-Mult up) are evaluated exactly
on each envelope interval from summed sufficient statistics.  The outer
loop re-decodes, merges hypotheses into a deduplicated pool, line
searches over axis and random directions from random restarts, and
L1-normalizes the accepted point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ApeQeError, ConfigurationError
from .metrics import QEConfusion, sentence_ter_stats
from .qe import tags_for_pair

logger = logging.getLogger(__name__)


class Objective(str, Enum):
    TER = "ter"
    F1_MULT = "f1-mult"

    @property
    def maximize(self) -> bool:
        return self is Objective.F1_MULT

    def score(self, agg: np.ndarray) -> float:
        if self is Objective.TER:
            edits, ref_len = agg
            return float(edits) / float(ref_len) if ref_len else float(edits)
        return QEConfusion(*(int(x) for x in agg)).f1_mult()

    def better(self, a: float, b: float, margin: float = 0.0) -> bool:
        """Is `a` strictly better than `b` by at least `margin`?"""
        return a > b + margin if self.maximize else a < b - margin

    def not_worse(self, a: float, b: float, slack: float = 0.0) -> bool:
        return a >= b - slack if self.maximize else a <= b + slack


@dataclass(frozen=True)
class GoldRecord:
    """Per-sentence references the objectives need.

    TER needs the post-edit; F1-Mult needs the MT words plus gold tags.
    """

    pe: tuple[str, ...] | None = None
    mt: tuple[str, ...] | None = None
    tags: tuple[str, ...] | None = None


def hypothesis_stats(hyp_words: Sequence[str], gold: GoldRecord,
                     objective: Objective, shifts: bool = True) -> np.ndarray:
    """Sufficient statistics of one hypothesis under one objective.

    TER: (edit count vs PE, |PE|).  F1-Mult: the OK/BAD confusion of the
    tags derived from aligning MT against the hypothesis-as-pseudo-PE.
    """
    if objective is Objective.TER:
        if gold.pe is None:
            raise ConfigurationError("TER objective requires the post-edit reference")
        stats = sentence_ter_stats(list(hyp_words), list(gold.pe), shifts=shifts)
        return np.array([stats.edits, stats.ref_len], dtype=np.int64)
    if gold.mt is None or gold.tags is None:
        raise ConfigurationError("F1-Mult objective requires MT words and gold tags")
    tags = tags_for_pair(gold.mt, list(hyp_words))
    conf = QEConfusion.from_tags(tags, gold.tags)
    return np.array([conf.tp_ok, conf.fp_ok, conf.fn_ok,
                     conf.tp_bad, conf.fp_bad, conf.fn_bad], dtype=np.int64)


@dataclass
class PoolEntry:
    ids: tuple[int, ...]
    words: tuple[str, ...]
    features: np.ndarray
    stats: np.ndarray


class SentencePool:
    """Deduplicated hypothesis pool for one dev sentence."""

    def __init__(self):
        self.entries: list[PoolEntry] = []
        self._seen: set[tuple[int, ...]] = set()
        self._features: np.ndarray | None = None
        self._stats: np.ndarray | None = None

    def __len__(self):
        return len(self.entries)

    def add(self, entry: PoolEntry) -> bool:
        if entry.ids in self._seen:
            return False
        self._seen.add(entry.ids)
        self.entries.append(entry)
        self._features = None
        self._stats = None
        return True

    @property
    def features(self) -> np.ndarray:
        if self._features is None:
            self._features = np.stack([e.features for e in self.entries])
        return self._features

    @property
    def stats(self) -> np.ndarray:
        if self._stats is None:
            self._stats = np.stack([e.stats for e in self.entries])
        return self._stats


def evaluate_weights(pools: Sequence[SentencePool], weights: np.ndarray,
                     objective: Objective) -> float:
    """Corpus objective of the per-sentence argmax under fixed weights."""
    agg = None
    for pool in pools:
        scores = pool.features @ weights
        stats = pool.stats[int(np.argmax(scores))]
        agg = stats if agg is None else agg + stats
    if agg is None:
        raise ApeQeError("cannot evaluate an empty pool")
    return objective.score(agg)


def _upper_envelope(intercepts: np.ndarray, slopes: np.ndarray) -> list[tuple[float, int]]:
    """[(x_start, entry index)] of the max over lines a + gamma*b."""
    order = sorted(range(len(slopes)), key=lambda i: (slopes[i], -intercepts[i], i))
    dedup = []
    for i in order:
        if dedup and slopes[i] == slopes[dedup[-1]]:
            continue  # same slope, lower or equal intercept: dominated
        dedup.append(i)
    hull: list[tuple[float, int]] = []  # (x_start, idx)
    hull_lines: list[int] = []
    for i in dedup:
        x = -np.inf
        while hull:
            x0, _ = hull[-1]
            j = hull_lines[-1]
            x = (intercepts[j] - intercepts[i]) / (slopes[i] - slopes[j])
            if x <= x0:
                hull.pop()
                hull_lines.pop()
            else:
                break
        hull.append((x if hull else -np.inf, i))
        hull_lines.append(i)
    return hull


def line_search(pools: Sequence[SentencePool], weights: np.ndarray,
                direction: np.ndarray, objective: Objective) -> tuple[float, float]:
    """Exact 1-D optimization of the corpus objective along a direction.

    Returns (best step, objective value at that step); the step is the
    midpoint of the optimal envelope interval, ties preferring the
    smallest |gamma| then the smallest gamma.
    """
    direction = np.asarray(direction, dtype=np.float64)
    if not np.any(direction):
        raise ApeQeError("line search direction is all-zero")
    weights = np.asarray(weights, dtype=np.float64)

    events: list[tuple[float, int, int, int]] = []  # (x, sentence, old idx, new idx)
    agg = None
    for s, pool in enumerate(pools):
        a = pool.features @ weights
        b = pool.features @ direction
        hull = _upper_envelope(a, b)
        first = hull[0][1]
        agg = pool.stats[first] if agg is None else agg + pool.stats[first]
        for (x, idx), (_, prev_idx) in zip(hull[1:], hull[:-1]):
            events.append((x, s, prev_idx, idx))
    if agg is None:
        raise ApeQeError("cannot line-search an empty pool")

    if not events:
        return 0.0, objective.score(agg)

    events.sort(key=lambda e: e[0])
    # Breakpoints closer than float noise (degenerate common crossings)
    # collapse into one cluster; midpoints of ulp-wide intervals would be
    # numerically meaningless.
    clusters: list[list[tuple[float, int, int, int]]] = []
    for event in events:
        if clusters and event[0] - clusters[-1][-1][0] <= 1e-9 * max(1.0, abs(event[0])):
            clusters[-1].append(event)
        else:
            clusters.append([event])

    candidates: list[tuple[float, float]] = []  # (gamma, swept value)
    candidates.append((clusters[0][0][0] - 1.0, objective.score(agg)))
    pool_stats = [p.stats for p in pools]
    for c, cluster in enumerate(clusters):
        for _, s, old, new in cluster:
            agg = agg - pool_stats[s][old] + pool_stats[s][new]
        right = cluster[-1][0]
        if c + 1 < len(clusters):
            gamma = (right + clusters[c + 1][0][0]) / 2.0
        else:
            gamma = right + 1.0
        candidates.append((gamma, objective.score(agg)))

    # Best-first by (swept value, |gamma|, gamma); verify each candidate by
    # direct re-ranking, falling back to the best verified point seen.
    candidates.sort(key=lambda cv: ((-cv[1] if objective.maximize else cv[1]),
                                    abs(cv[0]), cv[0]))
    fallback: tuple[float, float] | None = None
    for gamma, swept in candidates[:32]:
        actual = evaluate_weights(pools, weights + gamma * direction, objective)
        if actual == swept:
            return gamma, actual
        if fallback is None or objective.better(actual, fallback[1]):
            fallback = (gamma, actual)
    return fallback


def normalize_l1(weights: np.ndarray) -> np.ndarray:
    total = float(np.abs(weights).sum())
    if total == 0.0:
        return weights.copy()
    return weights / total


@dataclass
class TunerConfig:
    objective: Objective = Objective.TER
    iterations: int = 10
    n_random_directions: int = 8
    n_restarts: int = 4
    nbest_size: int = 12
    beam_width: int = 5
    max_len: int = 40
    convergence_threshold: float = 1e-4
    seed: int = 1
    shifts: bool = True
    max_inner_steps: int = 25
    min_step_gain: float = 1e-9


@dataclass
class IterationRecord:
    iteration: int
    pool_sizes: int
    incumbent_value: float
    accepted_value: float


#: A decoder maps weights to per-sentence lists of (words, ids, features).
DecodeFn = Callable[[np.ndarray], Sequence[Sequence[tuple[tuple[str, ...],
                                                          tuple[int, ...],
                                                          Sequence[float]]]]]


def mert_tune(weights0: Sequence[float], decoder: DecodeFn,
              gold: Sequence[GoldRecord], config: TunerConfig,
              ) -> tuple[np.ndarray, list[IterationRecord]]:
    """Iterated decode / line-search loop; returns L1-normalized weights.

    The returned weights never score worse than the incumbent on the
    accumulated hypothesis pool of their iteration.  Decoder failure
    aborts with the incumbent weights.
    """
    w = normalize_l1(np.asarray(weights0, dtype=np.float64))
    k = w.shape[0]
    rng = np.random.default_rng(config.seed)
    pools: list[SentencePool] | None = None
    history: list[IterationRecord] = []

    for it in range(config.iterations):
        try:
            nbest = decoder(w)
        except Exception as exc:  # noqa: BLE001 - decoder failure keeps incumbent
            logger.warning("decoder failed at iteration %d (%s); keeping incumbent", it, exc)
            break
        if pools is None:
            pools = [SentencePool() for _ in nbest]
        if len(nbest) != len(pools):
            raise ApeQeError("decoder returned a different number of sentences")
        for pool, hyps, gold_rec in zip(pools, nbest, gold):
            for words, ids, features in hyps:
                stats = hypothesis_stats(words, gold_rec, config.objective,
                                         shifts=config.shifts)
                pool.add(PoolEntry(tuple(ids), tuple(words),
                                   np.asarray(features, dtype=np.float64), stats))
        if any(len(p) == 0 for p in pools):
            raise ApeQeError("empty hypothesis pool for some sentence")

        incumbent_value = evaluate_weights(pools, w, config.objective)
        best_w, best_value = w, incumbent_value
        starts = [w] + [normalize_l1(rng.standard_normal(k))
                        for _ in range(config.n_restarts)]
        for start in starts:
            cur = start.copy()
            cur_value = evaluate_weights(pools, cur, config.objective)
            for _ in range(config.max_inner_steps):
                directions = [np.eye(k)[i] for i in range(k)]
                for _ in range(config.n_random_directions):
                    vec = rng.standard_normal(k)
                    directions.append(vec / np.linalg.norm(vec))
                step = None
                for dvec in directions:
                    gamma, value = line_search(pools, cur, dvec, config.objective)
                    if gamma == 0.0:
                        continue
                    if not config.objective.better(value, cur_value, config.min_step_gain):
                        continue
                    if step is None or config.objective.better(value, step[2]):
                        step = (gamma, dvec, value)
                if step is None:
                    break
                gamma, dvec, _ = step
                cur = normalize_l1(cur + gamma * dvec)
                cur_value = evaluate_weights(pools, cur, config.objective)
            if config.objective.better(cur_value, best_value):
                best_w, best_value = cur, cur_value

        # accept-only-improvement: never worse than the incumbent on this pool
        if config.objective.not_worse(best_value, incumbent_value):
            w = normalize_l1(best_w)
        history.append(IterationRecord(it, sum(len(p) for p in pools),
                                       incumbent_value, best_value))
        if abs(best_value - incumbent_value) < config.convergence_threshold:
            break
    return w, history


# ---------------------------------------------------------------------------
# Weights file and pool persistence


def write_weights_file(path: str | Path, names: Sequence[str], weights: Sequence[float],
                       objective: Objective, iterations: int,
                       dev_objective: float | None) -> None:
    lines = [f"# objective={objective.value}",
             f"# iterations={iterations}",
             f"# dev_objective={dev_objective!r}"]
    lines += [f"{n}\t{w!r}" for n, w in zip(names, weights)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_weights_file(path: str | Path) -> tuple[list[str], list[float], dict]:
    header: dict = {}
    names: list[str] = []
    weights: list[float] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            header[key.strip()] = value.strip()
            continue
        name, _, value = line.partition("\t")
        names.append(name)
        weights.append(float(value))
    return names, weights, header


def save_pool(path: str | Path, pools: Sequence[SentencePool],
              weights: np.ndarray, objective: Objective) -> None:
    """Persist the accumulated pool in the n-best format plus stats columns."""
    lines = []
    for sid, pool in enumerate(pools):
        for entry in pool.entries:
            feats = " ".join(repr(float(f)) for f in entry.features)
            combined = float(entry.features @ weights)
            stats = ",".join(str(int(x)) for x in entry.stats)
            lines.append(f"{sid} ||| {' '.join(entry.words)} ||| {feats} ||| "
                         f"{combined!r} ||| {objective.value}:{stats}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
