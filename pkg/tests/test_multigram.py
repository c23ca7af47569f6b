import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import CAT_ROWS, cat_utterance, random_lexicon, random_sequence
from oracles import segmentation_oracle, segmentations
from lexmdl.corpus import Alphabet
from lexmdl.lexicon import Lexicon, renormalize
from lexmdl.multigram import (COMPLETE, VITERBI, CompiledLexicon, ParseError, accumulate_counts,
                              em_iterate, forward_backward, initial_lexicon, install,
                              utterance_bits, viterbi_parse)


def ab_lexicon(p_a=0.5, p_b=0.25, p_ab=0.25):
    lex = Lexicon(Alphabet(["a", "b"]))
    ab = lex.add_word((0, 1), (0, 1))
    renormalize(lex, {0: p_a, 1: p_b, ab: p_ab})
    return lex, ab


def test_single_parse_chart():
    lex = Lexicon(Alphabet(["a"]))
    renormalize(lex, {0: 1.0})
    chart = forward_backward(lex, [0])
    assert chart.total == pytest.approx(1.0)
    assert chart.posteriors() == {(0, 1, 0): pytest.approx(1.0)}


def test_two_segmentation_example():
    lex, ab = ab_lexicon()
    chart = forward_backward(lex, [0, 1])
    assert chart.total == pytest.approx(0.375, rel=1e-12)
    post = chart.posteriors()
    assert post[(0, 2, ab)] == pytest.approx(2 / 3, rel=1e-12)
    assert post[(0, 1, 0)] == pytest.approx(1 / 3, rel=1e-12)
    assert post[(1, 2, 1)] == pytest.approx(1 / 3, rel=1e-12)
    assert chart.alpha[0] == pytest.approx(1.0) and chart.beta[-1] == pytest.approx(1.0)
    assert chart.alpha[-1] == pytest.approx(chart.beta[0], rel=1e-9)


def test_two_segmentation_counts_and_viterbi():
    lex, ab = ab_lexicon()
    res = accumulate_counts(lex, [(0, 1)], COMPLETE, reestimate_reps=False)
    # one extra use of a and of b comes from the rep of ab
    assert res.counts[ab] == pytest.approx(2 / 3)
    assert res.counts[0] == pytest.approx(1 / 3 + 1)
    assert res.counts[1] == pytest.approx(1 / 3 + 1)
    seg = viterbi_parse(lex, (0, 1), deep=False)
    assert seg.word_ids == [ab]
    assert seg.log_prob == pytest.approx(math.log(0.25))


def test_viterbi_tie_prefers_longer_word():
    x = math.sqrt(2) - 1          # p(a) = p(b) = x, p(ab) = x * x
    lex, ab = ab_lexicon(x, x, x * x)
    assert lex[ab].code_len == pytest.approx(lex[0].code_len + lex[1].code_len, rel=1e-12)
    assert viterbi_parse(lex, (0, 1), deep=False).word_ids == [ab]


def test_dominant_single_word_chosen():
    lex, ab = ab_lexicon(0.2, 0.2, 0.6)
    assert viterbi_parse(lex, (0, 1, 0, 1), deep=False).word_ids == [ab, ab]


def test_cat_counts_reproduce_table(cat):
    lex, ids = cat
    res = accumulate_counts(lex, [cat_utterance(lex)], VITERBI, reestimate_reps=False)
    for surface, _, count in CAT_ROWS:
        assert res.counts.get(ids[surface], 0.0) == pytest.approx(count)


def test_repeated_single_symbol_counts():
    lex = Lexicon(Alphabet(["a"]))
    renormalize(lex, {0: 1.0})
    res = accumulate_counts(lex, [(0,)] * 7)
    assert res.counts[0] == pytest.approx(7.0)


def test_zero_count_terminal_is_an_error():
    lex = Lexicon(Alphabet(["a", "b"]))
    renormalize(lex, {0: 1.0, 1: 0.0})
    with pytest.raises(ParseError, match="zero probability"):
        forward_backward(lex, [0, 1])
    with pytest.raises(ValueError):
        forward_backward(lex, [])


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 100_000))
def test_forward_backward_matches_enumeration(seed):
    rng = random.Random(seed)
    lex = random_lexicon(rng, alphabet_size=rng.randint(1, 3), max_words=8)
    seq = random_sequence(rng, len(lex.alphabet), rng.randint(1, 10))
    probs = {w.id: lex.prob(w.id) for w in lex}
    surfaces = {w.id: w.surface for w in lex}
    total, post, best = segmentation_oracle(seq, probs, surfaces)
    chart = forward_backward(lex, seq)
    assert chart.total == pytest.approx(total, rel=1e-10)
    got = chart.posteriors()
    assert set(k for k, v in got.items() if v > 0) == set(post)
    for key, value in post.items():
        assert got[key] == pytest.approx(value, rel=1e-10, abs=1e-300)
    # every position is covered by exactly one word in each segmentation
    for i in range(len(seq)):
        assert sum(p for (k, l, _), p in got.items() if k <= i < l) == pytest.approx(1.0,
                                                                                      abs=1e-9)
    seg = viterbi_parse(lex, seq, deep=True)
    assert math.exp(seg.log_prob) == pytest.approx(best, rel=1e-10)
    n_segs = sum(1 for _ in segmentations(seq, surfaces))
    if n_segs == 1:
        assert math.exp(seg.log_prob) == pytest.approx(chart.total, rel=1e-10)
    else:
        assert math.exp(seg.log_prob) < chart.total
    # fringe of the deep tree is the input
    leaves = [n for top in seg.nodes for n in top.walk() if not n.children]
    assert [lex[n.word_id].surface[0] for n in leaves] == list(seq)


def random_corpus(rng):
    lex = random_lexicon(rng, alphabet_size=rng.randint(2, 3), max_words=6)
    utts = [tuple(random_sequence(rng, len(lex.alphabet), rng.randint(1, 8)))
            for _ in range(rng.randint(1, 6))]
    return lex, utts


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from([COMPLETE, VITERBI]))
def test_em_never_decreases_likelihood(seed, mode):
    lex, utts = random_corpus(random.Random(seed))
    trace = []
    em_iterate(lex, utts, iters=5, mode=mode, trace=trace)
    for before, after in zip(trace, trace[1:]):
        assert after >= before - 1e-9


def test_one_em_pass_is_accumulate_then_install():
    lex, utts = random_corpus(random.Random(5))
    manual = lex.copy()
    install(manual, accumulate_counts(manual, utts))
    em_iterate(lex, utts, iters=1)
    assert lex.checksum() == manual.checksum()


def test_unique_parse_is_a_fixed_point():
    lex = Lexicon(Alphabet(["a", "b"]))
    renormalize(lex, {0: 1, 1: 1})
    utts = [(0, 1, 1), (1, 0)]
    em_iterate(lex, utts, iters=1)
    first = lex.counts()
    em_iterate(lex, utts, iters=4)
    for w, c in lex.counts().items():
        assert c == pytest.approx(first[w], abs=1e-9)


def test_reps_re_derived_from_shorter_words():
    lex = Lexicon(Alphabet(["a", "b"]))
    ab = lex.add_word((0, 1), (0, 1))
    abab = lex.add_word((0, 1, 0, 1), (0, 1, 0, 1))
    renormalize(lex, {0: 1, 1: 1, ab: 10, abab: 1})
    em_iterate(lex, [(0, 1, 0, 1)], iters=1)
    assert lex[abab].rep == (ab, ab)


def test_threaded_counts_match_serial():
    rng = random.Random(11)
    lex = random_lexicon(rng, alphabet_size=3, max_words=8)
    utts = [tuple(random_sequence(rng, 3, rng.randint(1, 12))) for _ in range(40)]
    one = accumulate_counts(lex, utts, threads=1)
    four = accumulate_counts(lex, utts, threads=4)
    assert four.log_likelihood == pytest.approx(one.log_likelihood, rel=1e-12)
    for w, c in one.counts.items():
        assert four.counts[w] == pytest.approx(c, rel=1e-12, abs=1e-12)


def test_total_cost_not_above_viterbi_cost():
    lex, utts = random_corpus(random.Random(3))
    vit = utterance_bits(lex, utts, VITERBI)
    tot = utterance_bits(lex, utts, "total")
    assert all(t <= v + 1e-9 for t, v in zip(tot, vit))


def test_initial_lexicon_counts_symbols():
    lex = initial_lexicon(Alphabet(["a", "b"]), [(0, 0, 1)])
    assert lex.counts() == {0: 2.0, 1: 1.0}


def test_compiled_lexicon_skips_zero_count_words():
    lex, ab = ab_lexicon()
    renormalize(lex, {0: 1, 1: 1, ab: 0})
    assert viterbi_parse(lex, (0, 1), CompiledLexicon(lex), deep=False).word_ids == [0, 1]
