"""Time the compiled chart kernels against the pure-Python reference.

    python benchmarks/bench_kernels.py [--utterances 300] [--repeat 3]

Both backends run on the same synthetic corpus and lexicon; the script
checks that they return the same log-likelihoods before timing them.
"""
import argparse
import logging
import math
import time

import numpy as np

from lexmdl import _pykernels
from lexmdl.channel import ChannelTables
from lexmdl.corpus import Alphabet
from lexmdl.lexicon import Lexicon, renormalize
from lexmdl.multigram import CompiledLexicon
from lexmdl.phonology import lookup_symbol
from lexmdl.synth import corrupt, generate

try:
    from lexmdl import _ckernels
except ImportError:      # extension not built
    _ckernels = None

log = logging.getLogger("bench")


def text_case(n_utts, seed):
    rng = np.random.default_rng(seed)
    words = sorted({tuple(int(x) for x in rng.integers(0, 10, rng.integers(2, 7)))
                    for _ in range(40)})
    utts, _ = generate({w: 1.0 for w in words}, n_utts, seed=seed)
    lex = Lexicon(Alphabet([chr(97 + i) for i in range(10)]))
    for w in words:
        if w not in lex.surface_index:
            lex.add_word(w, lex.spelling(w))
    renormalize(lex, {w.id: 1.0 + float(rng.random()) for w in lex})
    comp = CompiledLexicon(lex)
    args = (comp.child_start, comp.child_sym, comp.child_node, comp.node_word, comp.logp)
    seqs = [np.asarray(u, dtype=np.int32) for u in utts]
    return args, seqs, len(comp.ids)


def noisy_case(n_utts, seed):
    rng = np.random.default_rng(seed)
    inv = [lookup_symbol(s) for s in ("p", "t", "k", "m", "s", "aa", "iy", "uw", "eh", "ow")]
    words = sorted({tuple(int(x) for x in rng.choice(inv, rng.integers(2, 6)))
                    for _ in range(20)})
    clean, _ = generate({w: 1.0 for w in words}, n_utts, seed=seed)
    phones, _ = corrupt(clean, seed=seed)
    lex = Lexicon(Alphabet.phonemes())
    for w in words:
        lex.add_word(w, w)
    renormalize(lex, {w.id: 1.0 if w.is_terminal else 5.0 for w in lex})
    comp = CompiledLexicon(lex)
    t = ChannelTables()
    args = ([np.array(s, dtype=np.int32) for s in comp.surfaces], np.asarray(comp.logp),
            t.p_ins, t.p_map, t.p_copy, t.p_del, t.params.c_I, t.params.c_M, 2)
    seqs = [np.asarray(u, dtype=np.int32) for u in phones]
    return args, seqs, len(comp.ids)


def run_exact(module, case):
    args, seqs, n_words = case
    counts = np.zeros(n_words)
    return module.ExactMatcher(*args).em_batch(seqs, counts)


def run_noisy(module, case, budget):
    args, seqs, n_words = case
    matcher = module.NoisyMatcher(*args)
    counts = np.zeros(n_words)
    return sum(matcher.chart(s, budget, counts, False, None)["log_z"] for s in seqs)


def best_time(fn, repeat):
    times, value = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        value = fn()
        times.append(time.perf_counter() - start)
    return min(times), value


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--utterances", type=int, default=300)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    if _ckernels is None:
        log.error("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        return 1

    text = text_case(args.utterances, args.seed)
    noisy = noisy_case(max(1, args.utterances // 10), args.seed)
    jobs = [("exact forward-backward", lambda m: run_exact(m, text))]
    for budget in (0.0, 1e-4):
        jobs.append((f"noisy chart, budget {budget:g}",
                     lambda m, b=budget: run_noisy(m, noisy, b)))

    print(f"{'kernel':<28}{'python s':>10}{'cython s':>10}{'speedup':>9}")
    for name, job in jobs:
        slow_t, slow_v = best_time(lambda: job(_pykernels), args.repeat)
        fast_t, fast_v = best_time(lambda: job(_ckernels), args.repeat)
        if not math.isclose(slow_v, fast_v, rel_tol=1e-9):
            log.error("%s: backends disagree (%r vs %r)", name, slow_v, fast_v)
            return 1
        print(f"{name:<28}{slow_t:>10.3f}{fast_t:>10.3f}{slow_t / fast_t:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
