import numpy as np
import pytest

from apeqe.errors import ApeQeError, ConfigurationError
from apeqe.mert import (
    GoldRecord,
    Objective,
    PoolEntry,
    SentencePool,
    TunerConfig,
    evaluate_weights,
    hypothesis_stats,
    line_search,
    mert_tune,
    normalize_l1,
    read_weights_file,
    save_pool,
    write_weights_file,
)


def make_pool(features, stats):
    pool = SentencePool()
    for i, (f, s) in enumerate(zip(features, stats)):
        pool.add(PoolEntry(ids=(i,), words=(f"h{i}",),
                           features=np.asarray(f, dtype=np.float64),
                           stats=np.asarray(s, dtype=np.int64)))
    return pool


def random_instance(rng, objective, n_sents=None, n_hyps=None, n_feats=None):
    n_sents = n_sents or rng.integers(1, 11)
    n_feats = n_feats or rng.integers(1, 6)
    pools = []
    for _ in range(n_sents):
        h = n_hyps or rng.integers(1, 21)
        feats = rng.normal(size=(h, n_feats)) * 3
        if objective is Objective.TER:
            ref_len = int(rng.integers(3, 12))
            stats = [(int(rng.integers(0, ref_len + 3)), ref_len) for _ in range(h)]
        else:
            stats = [tuple(int(x) for x in rng.integers(0, 6, size=6)) for _ in range(h)]
        pools.append(make_pool(feats, stats))
    return pools, int(n_feats)


def grid_objective_values(pools, w, d, gammas, objective):
    """Vectorized re-ranking of every grid point (independent oracle)."""
    agg = np.zeros((len(gammas), pools[0].stats.shape[1]), dtype=np.int64)
    for pool in pools:
        a = pool.features @ w
        b = pool.features @ d
        scores = a[:, None] + np.outer(b, gammas)
        winners = np.argmax(scores, axis=0)
        agg += pool.stats[winners]
    if objective is Objective.TER:
        return agg[:, 0] / agg[:, 1]
    tp_ok, fp_ok, fn_ok = agg[:, 0], agg[:, 1], agg[:, 2]
    tp_bad, fp_bad, fn_bad = agg[:, 3], agg[:, 4], agg[:, 5]
    d_ok = 2 * tp_ok + fp_ok + fn_ok
    d_bad = 2 * tp_bad + fp_bad + fn_bad
    f_ok = np.divide(2 * tp_ok, d_ok, out=np.zeros(len(gammas)), where=d_ok > 0)
    f_bad = np.divide(2 * tp_bad, d_bad, out=np.zeros(len(gammas)), where=d_bad > 0)
    return f_ok * f_bad


class TestHypothesisStats:
    def test_hypothesis_equal_to_pe_has_zero_edits(self):
        gold = GoldRecord(pe=("ein", "Baum", "."))
        stats = hypothesis_stats(("ein", "Baum", "."), gold, Objective.TER)
        assert list(stats) == [0, 3]

    def test_hypothesis_equal_to_mt_tags_all_ok(self):
        gold = GoldRecord(mt=("a", "b", "c"), tags=("OK", "BAD", "OK"))
        stats = hypothesis_stats(("a", "b", "c"), gold, Objective.F1_MULT)
        # predicted all OK: tp_ok = gold OKs, fp_ok = gold BADs
        assert list(stats) == [2, 1, 0, 0, 0, 1]

    def test_paper_fixture_diagonal_confusion(self, paper_example):
        gold = GoldRecord(mt=tuple(paper_example["mt_words"]),
                          tags=tuple(paper_example["gold_tags"]))
        stats = hypothesis_stats(tuple(paper_example["pe"]), gold, Objective.F1_MULT)
        tp_ok, fp_ok, fn_ok, tp_bad, fp_bad, fn_bad = stats
        assert fp_ok == fn_ok == fp_bad == fn_bad == 0
        assert tp_ok == paper_example["gold_tags"].count("OK")
        assert tp_bad == paper_example["gold_tags"].count("BAD")

    def test_missing_gold_side_is_configuration_error(self):
        with pytest.raises(ConfigurationError):
            hypothesis_stats(("x",), GoldRecord(), Objective.TER)
        with pytest.raises(ConfigurationError):
            hypothesis_stats(("x",), GoldRecord(pe=("x",)), Objective.F1_MULT)


class TestLineSearch:
    def test_single_hypothesis_returns_gamma_zero(self):
        pools = [make_pool([[1.0, 2.0]], [(1, 5)])]
        gamma, value = line_search(pools, np.array([1.0, 0.0]),
                                   np.array([0.0, 1.0]), Objective.TER)
        assert gamma == 0.0
        assert value == pytest.approx(0.2)

    def test_all_zero_direction_rejected(self):
        pools = [make_pool([[1.0]], [(1, 5)])]
        with pytest.raises(ApeQeError):
            line_search(pools, np.array([1.0]), np.array([0.0]), Objective.TER)

    def test_hand_set_two_by_two_matches_grid(self):
        # sentence 1: hyp0 wins for small gamma, hyp1 for large gamma
        pools = [
            make_pool([[1.0, 0.0], [0.0, 1.0]], [(0, 4), (3, 4)]),
            make_pool([[0.5, 0.2], [0.1, 0.9]], [(2, 5), (0, 5)]),
        ]
        w = np.array([1.0, 0.0])
        d = np.array([0.0, 1.0])
        gamma, value = line_search(pools, w, d, Objective.TER)
        gammas = np.linspace(-5, 5, 10_000)
        grid = grid_objective_values(pools, w, d, gammas, Objective.TER)
        assert value <= grid.min() + 1e-12
        assert value == pytest.approx(evaluate_weights(pools, w + gamma * d, Objective.TER))

    @pytest.mark.parametrize("objective", [Objective.TER, Objective.F1_MULT])
    def test_random_instances_beat_or_tie_grid(self, objective):
        rng = np.random.default_rng(101 if objective is Objective.TER else 202)
        for _ in range(100):
            pools, k = random_instance(rng, objective)
            w = rng.normal(size=k)
            d = rng.normal(size=k)
            if not np.any(d):
                continue
            gamma, value = line_search(pools, w, d, objective)
            gammas = np.linspace(-5.0, 5.0, 10_000)
            grid = grid_objective_values(pools, w, d, gammas, objective)
            if objective is Objective.TER:
                assert value <= grid.min() + 1e-12
            else:
                assert value >= grid.max() - 1e-12

    def test_value_matches_direct_rerank_at_gamma(self):
        rng = np.random.default_rng(7)
        for objective in (Objective.TER, Objective.F1_MULT):
            pools, k = random_instance(rng, objective, n_sents=4, n_hyps=6, n_feats=3)
            w, d = rng.normal(size=k), rng.normal(size=k)
            gamma, value = line_search(pools, w, d, objective)
            assert value == evaluate_weights(pools, w + gamma * d, objective)


class TestNormalization:
    def test_l1_normalized_sums_to_one(self):
        w = normalize_l1(np.array([2.0, -6.0]))
        assert abs(np.abs(w).sum() - 1.0) < 1e-12

    def test_ranking_preserved(self):
        rng = np.random.default_rng(11)
        pools, k = random_instance(rng, Objective.TER, n_sents=5, n_hyps=8, n_feats=4)
        w = rng.normal(size=k) * 4
        for pool in pools:
            base = np.argsort(-(pool.features @ w), kind="stable")
            scaled = np.argsort(-(pool.features @ normalize_l1(w)), kind="stable")
            assert list(base) == list(scaled)

    def test_zero_vector_unchanged(self):
        w = normalize_l1(np.zeros(3))
        assert list(w) == [0.0, 0.0, 0.0]


def constant_decoder(nbest_lists):
    """A stub decoder that ignores weights and returns fixed n-best lists."""

    def decode(_weights):
        return nbest_lists

    return decode


class TestMertTune:
    def test_zero_iterations_returns_normalized_initial(self):
        w, history = mert_tune([2.0, 2.0], constant_decoder([]), [],
                               TunerConfig(iterations=0))
        assert list(w) == [0.5, 0.5]
        assert history == []

    def test_two_member_toy_matches_simplex_grid(self):
        rng = np.random.default_rng(31)
        gold = []
        nbest = []
        for _ in range(6):
            pe = tuple(f"w{int(x)}" for x in rng.integers(0, 5, size=5))
            gold.append(GoldRecord(pe=pe))
            hyps = []
            for h in range(6):
                words = tuple(f"w{int(x)}" for x in rng.integers(0, 5, size=5))
                feats = tuple(float(f) for f in rng.normal(size=2) * 2)
                hyps.append((words, (h,), feats))
            # make sure the reference itself is reachable for some weights
            hyps.append((pe, (99,), tuple(float(f) for f in rng.normal(size=2) * 2)))
            nbest.append(hyps)
        config = TunerConfig(objective=Objective.TER, iterations=4, seed=3,
                             shifts=False, convergence_threshold=0.0)
        w, history = mert_tune([1.0, 1.0], constant_decoder(nbest), gold, config)

        # independent simplex grid oracle over weight directions
        pools = [SentencePool() for _ in nbest]
        for pool, hyps, g in zip(pools, nbest, gold):
            for words, ids, feats in hyps:
                pool.add(PoolEntry(tuple(ids), words, np.asarray(feats),
                                   hypothesis_stats(words, g, Objective.TER, shifts=False)))
        best_grid = min(
            evaluate_weights(pools, np.array([np.cos(t), np.sin(t)]), Objective.TER)
            for t in np.linspace(0, 2 * np.pi, 2000, endpoint=False))
        tuned_value = evaluate_weights(pools, w, Objective.TER)
        assert tuned_value <= best_grid + 1e-3

    def test_accepted_value_never_worse_than_incumbent(self):
        rng = np.random.default_rng(41)
        for objective in (Objective.TER, Objective.F1_MULT):
            gold, nbest = [], []
            for _ in range(5):
                pe = tuple(f"w{int(x)}" for x in rng.integers(0, 4, size=4))
                mt = tuple(f"w{int(x)}" for x in rng.integers(0, 4, size=4))
                from apeqe.qe import tags_for_pair
                gold.append(GoldRecord(pe=pe, mt=mt, tags=tuple(tags_for_pair(mt, pe))))
                hyps = []
                for h in range(5):
                    words = tuple(f"w{int(x)}" for x in rng.integers(0, 4, size=4))
                    hyps.append((words, (h,), tuple(float(f) for f in rng.normal(size=3))))
                nbest.append(hyps)
            config = TunerConfig(objective=objective, iterations=3, seed=5, shifts=False,
                                 convergence_threshold=0.0)
            _, history = mert_tune([1.0, 1.0, 1.0], constant_decoder(nbest), gold, config)
            for record in history:
                assert objective.not_worse(record.accepted_value, record.incumbent_value)

    def test_pool_growth_is_monotone(self):
        rng = np.random.default_rng(51)
        gold = [GoldRecord(pe=("a", "b"))]
        call_count = [0]

        def growing_decoder(_w):
            call_count[0] += 1
            hyps = [(("a",), (1,), (-1.0,))]
            for extra in range(call_count[0]):
                hyps.append(((f"x{extra}",), (10 + extra,), (float(-2 - extra),)))
            return [hyps]

        config = TunerConfig(objective=Objective.TER, iterations=3, seed=1,
                             shifts=False, convergence_threshold=-1.0)
        _, history = mert_tune([1.0], growing_decoder, gold, config)
        sizes = [r.pool_sizes for r in history]
        assert sizes == sorted(sizes)
        assert len(sizes) == 3

    def test_decoder_failure_keeps_incumbent(self):
        def broken(_w):
            raise RuntimeError("decode exploded")

        w, history = mert_tune([3.0, 1.0], broken, [], TunerConfig(iterations=5))
        assert list(w) == [0.75, 0.25]
        assert history == []


class TestWeightsFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "weights.tsv"
        write_weights_file(path, ["src", "mt"], [0.162, -0.183],
                           Objective.F1_MULT, 10, 0.554)
        names, weights, header = read_weights_file(path)
        assert names == ["src", "mt"]
        assert weights == [0.162, -0.183]
        assert header["objective"] == "f1-mult"
        assert header["iterations"] == "10"

    def test_save_pool_format(self, tmp_path):
        pool = make_pool([[1.0, 2.0]], [(1, 5)])
        path = tmp_path / "pool.nbest"
        save_pool(path, [pool], np.array([1.0, 0.0]), Objective.TER)
        text = path.read_text()
        assert "|||" in text
        assert "ter:1,5" in text
