"""End-to-end acceptance checks, one per criterion.

Every check prints a single `PASS` or `FAIL` line (criterion 9 prints
`SKIP` unless a Brown corpus is supplied through LEXMDL_BROWN_CORPUS).
Run on its own with

    pytest tests/test_acceptance.py -s -q
"""
import itertools
import os
import random
import time

import numpy as np
import pytest

from helpers import (CAT_INPUT, CAT_INPUT_BITS, CAT_REP_BITS, CAT_TOTAL_BITS, cat_lexicon,
                     random_lexicon, random_sequence)
from oracles import phi_given_pi_oracle, segmentation_oracle
from lexmdl.channel import Channel, ChannelTables
from lexmdl.corpus import Alphabet, TextConfig, load_text
from lexmdl.evaluation import compression_report, parse_corpus, segmentation_report
from lexmdl.lexicon import description_length, word_cost
from lexmdl.moves import MoveConfig, train
from lexmdl.multigram import COMPLETE, em_iterate, forward_backward, initial_lexicon
from lexmdl.phonology import FEATURES, ChannelParams, feature_distribution, lookup_symbol
from lexmdl.synth import corrupt, generate


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, verdict=None):
        line = f"{verdict or ('PASS' if ok else 'FAIL')} criterion {number}: {detail}"
        with capsys.disabled():
            print("\n" + line, flush=True)
        return ok
    return emit


def hidden_lexicon(rng, symbols, size=20):
    words = set()
    while len(words) < size:
        words.add(tuple(int(x) for x in rng.choice(symbols, int(rng.integers(2, 7)))))
    words = sorted(words)
    return words, rng.dirichlet(np.full(size, 2.0))


def test_worked_example(report):
    start = time.perf_counter()
    lex, ids = cat_lexicon()
    input_bits = sum(lex[ids[w]].code_len for w in CAT_INPUT)
    dl = description_length(lex, [input_bits])
    rows = {w: word_cost(lex, ids[w]) for w in CAT_REP_BITS}
    elapsed = time.perf_counter() - start
    bad_rows = {w: round(v, 3) for w, v in rows.items() if abs(v - CAT_REP_BITS[w]) > 0.02}
    ok = (abs(dl.total_bits - CAT_TOTAL_BITS) <= 0.02
          and abs(dl.input_bits - CAT_INPUT_BITS) <= 0.02 and not bad_rows and elapsed < 1)
    assert report(1, ok, f"total {dl.total_bits:.3f} (target {CAT_TOTAL_BITS}), input "
                         f"{dl.input_bits:.3f} (target {CAT_INPUT_BITS}), |rep(the)| "
                         f"{rows['the']:.3f}, rows off target {bad_rows}, {elapsed:.3f}s")


def test_multigram_oracle(report):
    start = time.perf_counter()
    worst = 0.0
    for seed in range(200):
        rng = random.Random(seed)
        lex = random_lexicon(rng, alphabet_size=rng.randint(1, 3), max_words=8)
        seq = random_sequence(rng, len(lex.alphabet), rng.randint(1, 10))
        total, post, _ = segmentation_oracle(seq, {w.id: lex.prob(w.id) for w in lex},
                                             {w.id: w.surface for w in lex})
        chart = forward_backward(lex, seq)
        got = chart.posteriors()
        worst = max(worst, abs(chart.total - total) / total)
        for key in set(post) | {k for k, v in got.items() if v > 0}:
            want = post.get(key, 0.0)
            worst = max(worst, abs(got.get(key, 0.0) - want) / max(want, 1e-300))
    elapsed = time.perf_counter() - start
    assert report(2, worst <= 1e-10 and elapsed < 10,
                  f"200 instances, worst relative error {worst:.2e}, {elapsed:.2f}s")


def test_em_monotone(report):
    start = time.perf_counter()
    worst = 0.0
    for seed in range(50):
        rng = random.Random(1000 + seed)
        lex = random_lexicon(rng, alphabet_size=rng.randint(2, 3), max_words=6)
        utts = [tuple(random_sequence(rng, len(lex.alphabet), rng.randint(1, 8)))
                for _ in range(rng.randint(1, 6))]
        trace = []
        em_iterate(lex, utts, iters=8, mode=COMPLETE, trace=trace)
        worst = max([worst] + [b - a for b, a in zip(trace, trace[1:])])
    elapsed = time.perf_counter() - start
    assert report(3, worst <= 1e-9 and elapsed < 30,
                  f"50 corpora x 8 passes, largest decrease {worst:.2e}, {elapsed:.2f}s")


def test_synthetic_recovery(report):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    words, probs = hidden_lexicon(rng, np.arange(10))
    utts, gold = generate(list(zip(words, probs)), 2000, seed=0)
    alphabet = Alphabet([chr(97 + i) for i in range(10)])
    lex, trace, _ = train(initial_lexicon(alphabet, utts), utts, MoveConfig(max_outer=15))
    found = sum(w in lex.surface_index for w in words)
    seg = segmentation_report(parse_corpus(lex, utts), gold)
    saving = 1 - trace[-1].total_bits / trace[0].total_bits
    elapsed = time.perf_counter() - start
    ok = (found >= 18 and seg.recall >= 0.90 and seg.crossing <= 0.05 and saving >= 0.20
          and elapsed < 120 and len(trace) - 1 <= 15)
    assert report(4, ok, f"{found}/20 words, recall {seg.recall:.3f}, crossing "
                         f"{seg.crossing:.3f}, DL saving {saving:.1%}, "
                         f"{len(trace) - 1} iterations, {elapsed:.1f}s")


def trained_bits(n):
    utts = [(0,) * n]
    _, trace, _ = train(initial_lexicon(Alphabet(["a"]), utts), utts, MoveConfig(max_outer=15))
    return trace[-1].total_bits


def test_identical_characters(report):
    start = time.perf_counter()
    d256, d1024, d4096 = (trained_bits(n) for n in (256, 1024, 4096))
    elapsed = time.perf_counter() - start
    ok = d4096 - d1024 <= d1024 - d256 + 1e-9 and d4096 / 4096 < 0.2 and elapsed < 60
    assert report(5, ok, f"DL at n=256/1024/4096: {d256:.2f}/{d1024:.2f}/{d4096:.2f} bits, "
                         f"{d4096 / 4096:.4f} bits/char at 4096, {elapsed:.2f}s")


def test_channel_normalization(report):
    start = time.perf_counter()
    tables = ChannelTables()
    action_err = float(np.max(np.abs(tables.outgoing_mass() - 1.0)))
    feature_err = 0.0
    params = ChannelParams()
    for f, (_, values, _, _) in enumerate(FEATURES):
        ctx = list(values) + [None]
        for kind in ("insert", "map", "copy"):
            for q, u, n in itertools.product(ctx, repeat=3):
                dist = feature_distribution(f, kind, q, u, n, params)
                feature_err = max(feature_err, abs(float(dist.sum()) - 1.0))
    elapsed = time.perf_counter() - start
    ok = action_err <= 1e-12 and feature_err <= 1e-12 and elapsed < 30
    assert report(6, ok, f"action mass error {action_err:.1e} over "
                         f"{tables.outgoing_mass().size} states, feature error "
                         f"{feature_err:.1e}, {elapsed:.2f}s")


def test_channel_oracle(report):
    start = time.perf_counter()
    mini = ChannelTables(symbols=["p", "t", "m", "s", "aa", "iy"])
    worst, pairs = 0.0, 0
    for m in (1, 2):
        for pi in itertools.product(range(6), repeat=m):
            for length in range(4):
                for phi in itertools.product(range(6), repeat=length):
                    worst = max(worst, abs(mini.phi_given_pi(pi, phi)
                                           - phi_given_pi_oracle(mini.model, pi, phi)))
                    pairs += 1
    elapsed = time.perf_counter() - start
    assert report(7, worst <= 1e-12 and elapsed < 60,
                  f"{pairs} pairs, worst absolute error {worst:.1e}, {elapsed:.2f}s")


NOISY_INVENTORY = ("p", "t", "k", "m", "s", "aa", "iy", "uw", "eh", "ow")


def test_noisy_recovery(report):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    words, probs = hidden_lexicon(rng, [lookup_symbol(s) for s in NOISY_INVENTORY])
    clean, gold = generate(list(zip(words, probs)), 2000, seed=0)
    phones, _ = corrupt(clean, seed=0, gold=gold)
    changed = sum(a != b for a, b in zip(clean, phones)) / len(clean)
    lex, trace, _ = train(initial_lexicon(Alphabet.phonemes(), phones), phones,
                          MoveConfig(max_outer=15), channel=Channel())
    found = sum(w in lex.surface_index for w in words)
    elapsed = time.perf_counter() - start
    assert report(8, found >= 12 and elapsed < 600,
                  f"{found}/20 words, {changed:.0%} of utterances altered by the channel, "
                  f"{len(lex)} entries, {elapsed:.0f}s")


def test_brown_corpus(report):
    path = os.environ.get("LEXMDL_BROWN_CORPUS")
    if not path:
        report(9, True, "advisory stretch run; set LEXMDL_BROWN_CORPUS to a text file",
               verdict="SKIP")
        pytest.skip("no Brown corpus supplied")
    start = time.perf_counter()
    alphabet, utts = load_text(path, TextConfig())
    lex, trace, _ = train(initial_lexicon(alphabet, utts), utts, MoveConfig(max_outer=15))
    rate = compression_report(lex, utts).bits_per_char
    ok = len(trace) - 1 == 15 or trace[-1].words_added + trace[-1].words_deleted == 0
    ok &= abs(rate - 2.12) <= 0.15 * 2.12
    # advisory only: the outcome is printed but never fails the run
    report(9, ok, f"{rate:.3f} bits/char, {len(lex)} entries, "
                  f"{time.perf_counter() - start:.0f}s (advisory)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
