"""Brute-force reference implementations used by the tests.

Everything here is deliberately naive: explicit enumeration of
segmentations, transducer derivations and word sequences.  None of it
shares code with the dynamic programs it checks, apart from reading the
per-phone probability tables of the phone model.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

from lexmdl.phonology import FEATURES, ChannelParams, PhoneModel


# -- segmentation --------------------------------------------------------------
def segmentations(seq: Sequence[int], surfaces: Dict[int, Tuple[int, ...]]):
    """Yield every covering of `seq` by words, as [(start, end, word_id)]."""
    seq = tuple(seq)
    n = len(seq)

    def rec(k):
        if k == n:
            yield []
            return
        for wid, surf in surfaces.items():
            m = len(surf)
            if m and seq[k:k + m] == surf:
                for rest in rec(k + m):
                    yield [(k, k + m, wid)] + rest

    yield from rec(0)


def segmentation_oracle(seq, probs: Dict[int, float], surfaces: Dict[int, Tuple[int, ...]]):
    """(total probability, span posteriors, best probability) by enumeration."""
    total = 0.0
    best = 0.0
    mass: Dict[Tuple[int, int, int], float] = defaultdict(float)
    live = {w: s for w, s in surfaces.items() if probs.get(w, 0.0) > 0}
    for seg in segmentations(seq, live):
        p = math.prod(probs[w] for _, _, w in seg)
        total += p
        best = max(best, p)
        for span in seg:
            mass[span] += p
    post = {k: v / total for k, v in mass.items()} if total > 0 else {}
    return total, post, best


def description_length_oracle(rows: Sequence[Tuple[float, Sequence[int]]],
                              input_words: Sequence[int]) -> Tuple[float, float]:
    """(total bits, input bits) for a lexicon given as (count, rep) rows.

    rows[i] is word i; terminals have an empty rep.  Counts are used as
    given (they must already include rep mentions).
    """
    C = sum(c for c, _ in rows)
    bits = [-math.log2(c / C) if c > 0 else math.inf for c, _ in rows]
    dictionary = sum(bits[r] for _, rep in rows for r in rep)
    inp = sum(bits[w] for w in input_words)
    return dictionary + inp, inp


# -- transducer ----------------------------------------------------------------
def _delete_prob(model: PhoneModel, q, u, n) -> float:
    d = 0.0
    if q is not None:
        d += model.p_copy(q, q, u, n)
    if n is not None:
        d += model.p_copy(n, q, u, n)
    return min(model.params.c_D, d)


def derivations(model: PhoneModel, pi: Sequence[int], phi: Sequence[int],
                q0: Optional[int] = None, n_end: Optional[int] = None):
    """Yield the probability of every transducer derivation of phi from pi.

    Each derivation is an explicit action sequence; the walk follows the
    three-state machine action by action without any table sharing.
    """
    cI, cM = model.params.c_I, model.params.c_M
    P = model.P
    pi, phi = list(pi), list(phi)
    m, L = len(pi), len(phi)

    def walk(state, i, j, q, prob):
        if prob == 0.0:
            return
        if i == m:
            if j == L:
                yield prob
            return
        u = pi[i]
        n = pi[i + 1] if i + 1 < m else n_end
        D = _delete_prob(model, q, u, n)
        if state == "start":
            p_ins, p_map = cI, (1 - cI) * cM
            p_del = (1 - cI) * (1 - cM) * D
            p_cpy = (1 - cI) * (1 - cM) * (1 - D)
        elif state == "inserted":
            p_ins, p_map = 0.0, cM
            p_del = (1 - cM) * D
            p_cpy = (1 - cM) * (1 - D)
        else:
            p_ins, p_map, p_del, p_cpy = 0.0, cM, 0.0, 1 - cM
        if j < L:
            s = phi[j]
            if p_ins:
                yield from walk("inserted", i, j + 1, s, prob * p_ins * model.p_insert(s))
            if p_map:
                yield from walk("mapped", i, j + 1, s, prob * p_map * model.p_map(s, q, u))
            yield from walk("start", i + 1, j + 1, s, prob * p_cpy * model.p_copy(s, q, u, n))
        if p_del:
            yield from walk("start", i + 1, j, q, prob * p_del)

    assert P > 0
    yield from walk("start", 0, 0, q0, 1.0)


def phi_given_pi_oracle(model, pi, phi, q0=None, n_end=None) -> float:
    return math.fsum(derivations(model, pi, phi, q0, n_end))


# -- noisy chart ----------------------------------------------------------------
def noisy_chart_oracle(model: PhoneModel, phones: Sequence[int],
                       words: Dict[int, Tuple[Tuple[int, ...], float]], max_extra: int = 2):
    """Total probability and span posteriors of a phone string.

    `words` maps id -> (phoneme surface, probability).  Every covering of
    the phones by non-empty spans, and every assignment of words to spans,
    is enumerated.  A span may hold at most len(surface) + max_extra phones.
    The previous surface phone and the next word's first phoneme are the
    cross-word contexts.
    """
    phones = tuple(phones)
    L = len(phones)

    @lru_cache(maxsize=None)
    def span_prob(wid, k, l, nxt):
        surf = words[wid][0]
        if l - k > len(surf) + max_extra:
            return 0.0
        q0 = phones[k - 1] if k > 0 else None
        return phi_given_pi_oracle(model, surf, phones[k:l], q0, nxt)

    total = 0.0
    best = 0.0
    mass: Dict[Tuple[int, int, int], float] = defaultdict(float)
    ids = sorted(w for w, (_, p) in words.items() if p > 0)
    for cuts in itertools.product((0, 1), repeat=L - 1):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [L]
        spans = list(zip(bounds, bounds[1:]))
        for assign in itertools.product(ids, repeat=len(spans)):
            p = 1.0
            for t, ((k, l), w) in enumerate(zip(spans, assign)):
                nxt = words[assign[t + 1]][0][0] if t + 1 < len(assign) else None
                p *= words[w][1] * span_prob(w, k, l, nxt)
                if p == 0.0:
                    break
            if p == 0.0:
                continue
            total += p
            best = max(best, p)
            for (k, l), w in zip(spans, assign):
                mass[(k, l, w)] += p
    post = {key: v / total for key, v in mass.items()} if total > 0 else {}
    return total, post, best


# -- phone model -----------------------------------------------------------------
def feature_oracle(feature: int, kind: str, q, u, n, params: ChannelParams) -> List[float]:
    """Per-feature conditional distribution written straight from the formula."""
    name, values, mu, alpha = FEATURES[feature]
    mu = params.mu.get(name, mu)
    if kind == "insert":
        return [1.0 / len(values)] * len(values)
    raw = []
    for v in values:
        x = mu + params.beta_u * (v == u) + alpha * params.beta_q * (v == q)
        if kind == "copy":
            x += alpha * params.beta_n * (v == (q if params.strict_appendix_a else n))
        raw.append(x)
    z = sum(raw)
    return [x / z for x in raw] if z > 0 else [1.0 / len(values)] * len(values)
