import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apeqe.errors import AlignmentError, MalformedPrefixError
from apeqe.inputs import FactoredSentence, FactoredToken, parse_factored, serialize_factored
from apeqe.subword import (
    BPEModel,
    SegmentedToken,
    bpe_apply,
    bpe_learn,
    desegment,
    project_factors_bilou,
    segment_sentence,
    segmented_surfaces,
    subword_to_word_map,
)


def brute_force_pair_counts(words: dict[str, int], inventory: dict[str, list[str]]):
    counts = Counter()
    for word, freq in words.items():
        syms = inventory[word]
        for pair in zip(syms, syms[1:]):
            counts[pair] += freq
    return counts


class TestBpeLearn:
    def test_zero_merges_segments_to_characters(self):
        model = bpe_learn([["abc"]], 0)
        assert model.merges == ()
        seg = bpe_apply("abc", model)
        assert seg.pieces == ("a@@", "b@@", "c")
        assert seg.word() == "abc"

    def test_low_lower_matches_pair_count_oracle(self):
        corpus = [["low", "lower"]]
        model = bpe_learn(corpus, 2)
        # oracle: greedy two rounds of brute-force pair counting
        words = {"low": 1, "lower": 1}
        inventory = {w: list(w) for w in words}
        expected = []
        for _ in range(2):
            counts = brute_force_pair_counts(words, inventory)
            top = max(counts.values())
            best = min(p for p, c in counts.items() if c == top)
            expected.append(best)
            for w, syms in inventory.items():
                out, i = [], 0
                while i < len(syms):
                    if i + 1 < len(syms) and (syms[i], syms[i + 1]) == best:
                        out.append(syms[i] + syms[i + 1])
                        i += 2
                    else:
                        out.append(syms[i])
                        i += 1
                inventory[w] = out
        assert list(model.merges) == expected
        assert expected == [("l", "o"), ("lo", "w")]

    def test_training_corpus_closure(self):
        rng = random.Random(5)
        sents = [["".join(rng.choice("abcd") for _ in range(rng.randrange(1, 7)))
                  for _ in range(5)] for _ in range(10)]
        model = bpe_learn(sents, 30)
        piece_vocab = set()
        for sent in sents:
            for word in sent:
                piece_vocab.update(bpe_apply(word, model).pieces)
        # re-application yields only known pieces
        for sent in sents:
            for word in sent:
                assert set(bpe_apply(word, model).pieces) <= piece_vocab

    def test_merge_count_capped_by_available_pairs(self):
        model = bpe_learn([["ab"]], 100)
        assert len(model.merges) == 1


class TestBpeApply:
    def test_display_marker_fixture(self):
        model = bpe_learn([["Vektor", "masken"]], 10, marker="-")
        seg = bpe_apply("Vektormasken", model)
        assert seg.pieces == ("Vektor-", "masken")
        assert seg.word(marker="-") == "Vektormasken"

    def test_single_learned_symbol_has_no_marker(self):
        model = bpe_learn([["aa"]], 5)
        seg = bpe_apply("aa", model)
        assert seg.pieces == ("aa",)

    def test_strip_and_concatenate_recovers_200_random_words(self):
        rng = random.Random(9)
        words = ["".join(rng.choice("abcdef") for _ in range(rng.randrange(1, 12)))
                 for _ in range(200)]
        model = bpe_learn([words], 40)
        for word in words:
            assert bpe_apply(word, model).word() == word

    def test_prefix_stable_across_neighbors(self):
        model = bpe_learn([["alpha", "beta", "gamma"]], 15)
        alone = bpe_apply("alpha", model).pieces
        in_sentence = segment_sentence(["beta", "alpha", "gamma"], model)[1].pieces
        assert alone == in_sentence

    def test_deterministic(self):
        corpus = [["banana", "bandana"]]
        m1, m2 = bpe_learn(corpus, 8), bpe_learn(corpus, 8)
        assert m1.merges == m2.merges

    def test_save_load_round_trip(self, tmp_path):
        model = bpe_learn([["low", "lower", "lowest"]], 6, marker="-")
        model.save(tmp_path / "merges.txt")
        loaded = BPEModel.load(tmp_path / "merges.txt")
        assert loaded == model


class TestProjectFactors:
    def test_paper_fixture_bilou_projection(self):
        seg = [SegmentedToken(("Vektor-", "masken"), 0)]
        sent = project_factors_bilou([("NN", "sb", "VVINF")], seg)
        assert serialize_factored(sent) == (
            "Vektor-|B-NN|B-sb|B-VVINF masken|I-NN|I-sb|I-VVINF")

    def test_unsegmented_word_keeps_bare_factors(self):
        seg = [SegmentedToken(("auto",), 0)]
        sent = project_factors_bilou([("JJ", "amod", "NNS")], seg)
        assert serialize_factored(sent) == "auto|JJ|amod|NNS"

    def test_length_mismatch_is_alignment_error(self):
        with pytest.raises(AlignmentError):
            project_factors_bilou([("A",), ("B",)], [SegmentedToken(("x",), 0)])

    def test_factor_count_preserved(self):
        seg = [SegmentedToken(("ab@@", "cd"), 0), SegmentedToken(("e",), 1)]
        sent = project_factors_bilou([("P", "Q"), ("R", "S")], seg)
        assert all(t.arity == 3 for t in sent.tokens)


class TestDesegment:
    def test_paper_inverse_fixture(self):
        sent = parse_factored("Vektor-|B-NN masken|I-NN")
        words = desegment(sent, marker="-")
        assert serialize_factored(words) == "Vektormasken|NN"

    def test_all_bare_sentence_is_identity(self):
        sent = parse_factored("auto|JJ vector|NN")
        assert desegment(sent) == sent

    def test_orphan_i_piece_rejected_with_position(self):
        sent = parse_factored("auto|JJ masken|I-NN")
        with pytest.raises(MalformedPrefixError) as err:
            desegment(sent)
        assert "2" in str(err.value)

    def test_bare_sentence_groups_by_marker(self):
        sent = parse_factored("Vektor@@ masken auto")
        words = desegment(sent)
        assert words.surfaces == ("Vektormasken", "auto")

    def test_fuzz_project_then_desegment_is_identity(self):
        rng = random.Random(21)
        alphabet = "abcdefgh"
        for _ in range(1000):
            n_words = rng.randrange(1, 7)
            n_factors = rng.randrange(0, 4)
            words, factors, segs = [], [], []
            for i in range(n_words):
                w = "".join(rng.choice(alphabet) for _ in range(rng.randrange(1, 9)))
                words.append(w)
                factors.append(tuple(f"f{rng.randrange(10)}" for _ in range(n_factors)))
                cuts = sorted(rng.sample(range(1, len(w)), rng.randrange(0, min(3, len(w)))))
                bounds = [0] + cuts + [len(w)]
                raw = [w[a:b] for a, b in zip(bounds, bounds[1:])]
                pieces = tuple(p + "@@" for p in raw[:-1]) + (raw[-1],)
                segs.append(SegmentedToken(pieces, i))
            projected = project_factors_bilou(factors, segs)
            recovered = desegment(projected)
            assert recovered.surfaces == tuple(words)
            assert tuple(t.factors for t in recovered.tokens) == tuple(factors)


class TestHelpers:
    def test_surfaces_and_word_map(self):
        segs = segment_sentence(["low", "go"], bpe_learn([["lo", "go"]], 2))
        flat = segmented_surfaces(segs)
        mapping = subword_to_word_map(segs)
        assert len(flat) == len(mapping)
        assert mapping == sorted(mapping)


@given(st.lists(st.text(alphabet="abcd", min_size=1, max_size=8), min_size=1, max_size=6))
@settings(max_examples=60, deadline=None)
def test_segmentation_round_trip_property(words):
    model = bpe_learn([words], 10)
    for word in words:
        assert bpe_apply(word, model).word() == word
