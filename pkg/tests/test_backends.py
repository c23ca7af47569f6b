"""The compiled kernels and the pure-Python reference must agree."""
import os
import random

import numpy as np
import pytest

from helpers import random_lexicon, random_sequence
from lexmdl import _pykernels, kernels
from lexmdl.channel import ChannelTables
from lexmdl.corpus import Alphabet
from lexmdl.lexicon import Lexicon, renormalize
from lexmdl.multigram import CompiledLexicon

ck = pytest.importorskip("lexmdl._ckernels")


def test_default_backend_is_compiled():
    forced = os.environ.get("LEXMDL_PURE_PYTHON", "") not in ("", "0")
    assert kernels.BACKEND == ("python" if forced else "cython")


def exact_pair(lex):
    comp = CompiledLexicon(lex)
    args = (comp.child_start, comp.child_sym, comp.child_node, comp.node_word, comp.logp)
    return comp, ck.ExactMatcher(*args), _pykernels.ExactMatcher(*args)


def test_exact_kernels_agree():
    rng = random.Random(11)
    for _ in range(100):
        lex = random_lexicon(rng, rng.randint(2, 4))
        comp, fast, slow = exact_pair(lex)
        seqs = [np.asarray(random_sequence(rng, len(lex.alphabet), rng.randint(1, 12)),
                           dtype=np.int32) for _ in range(3)]
        for seq in seqs:
            for proper in (False, True):
                c1, c2 = np.zeros(len(comp.ids)), np.zeros(len(comp.ids))
                s1, s2 = [], []
                z1 = fast.forward_backward(seq, c1, proper, s1)[0]
                z2 = slow.forward_backward(seq, c2, proper, s2)[0]
                assert z1 == pytest.approx(z2, rel=1e-12, abs=1e-300)
                np.testing.assert_allclose(c1, c2, rtol=1e-10, atol=1e-14)
                assert sorted(s[:3] for s in s1) == sorted(s[:3] for s in s2)
                v1, v2 = fast.viterbi(seq, proper), slow.viterbi(seq, proper)
                assert v1[1] == v2[1]
                assert v1[0] == pytest.approx(v2[0], rel=1e-12, abs=1e-300)
        c1, c2 = np.zeros(len(comp.ids)), np.zeros(len(comp.ids))
        assert fast.em_batch(seqs, c1) == pytest.approx(slow.em_batch(seqs, c2), rel=1e-12)
        np.testing.assert_allclose(c1, c2, rtol=1e-10, atol=1e-14)


MINI = ["p", "t", "m", "s", "aa", "iy"]


@pytest.mark.parametrize("budget", [0.0, 1e-4, 1e-2])
def test_noisy_kernels_agree(budget):
    rng = random.Random(4)
    tables = ChannelTables(symbols=MINI)
    for _ in range(25):
        lex = Lexicon(Alphabet(MINI, mode="phoneme"))
        for _ in range(rng.randint(0, 4)):
            surf = tuple(rng.randrange(6) for _ in range(rng.randint(2, 4)))
            if surf not in lex.surface_index:
                lex.add_word(surf, surf)
        renormalize(lex, {w.id: rng.uniform(0.5, 3.0) for w in lex})
        comp = CompiledLexicon(lex)
        surfaces = [np.array(s, dtype=np.int32) for s in comp.surfaces]
        args = (surfaces, np.asarray(comp.logp), tables.p_ins, tables.p_map, tables.p_copy,
                tables.p_del, tables.params.c_I, tables.params.c_M, 2)
        fast, slow = ck.NoisyMatcher(*args), _pykernels.NoisyMatcher(*args)
        phones = np.asarray([rng.randrange(6) for _ in range(rng.randint(1, 9))],
                            dtype=np.int32)
        for viterbi in (False, True):
            c1, c2 = np.zeros(len(comp.ids)), np.zeros(len(comp.ids))
            r1 = fast.chart(phones, budget, c1, viterbi, None)
            r2 = slow.chart(phones, budget, c2, viterbi, None)
            assert r1["log_z"] == pytest.approx(r2["log_z"], rel=1e-10)
            assert (r1["edges"], r1["pruned"]) == (r2["edges"], r2["pruned"])
            np.testing.assert_allclose(c1, c2, rtol=1e-9, atol=1e-14)
            np.testing.assert_allclose(r1["log_alpha"], r2["log_alpha"], rtol=1e-10)
            np.testing.assert_allclose(r1["log_beta"], r2["log_beta"], rtol=1e-10)
            if viterbi:
                assert [tuple(x) for x in r1["path"]] == [tuple(x) for x in r2["path"]]
                assert r1["viterbi_log"] == pytest.approx(r2["viterbi_log"], rel=1e-10)
