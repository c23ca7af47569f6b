"""Synthetic corpora drawn from a known lexicon, with optional channel noise."""
from __future__ import annotations

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import TrueSegmentation
from .phonology import ChannelParams

_logger = logging.getLogger(__name__)

MEAN_WORDS = 6.0
MAX_RETRIES = 100


def _entries(true_lexicon) -> Tuple[List[Tuple[int, ...]], np.ndarray]:
    """(surfaces, probabilities) from a mapping, pair list or Lexicon."""
    if hasattr(true_lexicon, "nonterminals"):
        pairs = [(w.surface, w.count) for w in true_lexicon if w.count > 0]
    elif hasattr(true_lexicon, "items"):
        pairs = list(true_lexicon.items())
    else:
        pairs = list(true_lexicon)
    surfaces = [tuple(s) for s, _ in pairs]
    probs = np.array([float(p) for _, p in pairs])
    if not surfaces or np.any(probs < 0) or probs.sum() <= 0:
        raise ValueError("true lexicon needs non-negative weights with a positive sum")
    return surfaces, probs / probs.sum()


def geometric_length(mean: float = MEAN_WORDS) -> Callable[[np.random.Generator], int]:
    return lambda rng: int(rng.geometric(1.0 / mean))


def generate(true_lexicon, utterance_count: int,
             length_distribution: Optional[Callable[[np.random.Generator], int]] = None,
             seed: int = 0) -> Tuple[List[Tuple[int, ...]], List[TrueSegmentation]]:
    """Sample utterances as i.i.d. word sequences.

    Returns terminal sequences and their gold word boundaries.
    """
    surfaces, probs = _entries(true_lexicon)
    draw_len = length_distribution or geometric_length()
    rng = np.random.default_rng(seed)
    utterances, gold = [], []
    for _ in range(utterance_count):
        n = max(1, draw_len(rng))
        picks = rng.choice(len(surfaces), size=n, p=probs)
        seq = tuple(s for i in picks for s in surfaces[i])
        utterances.append(seq)
        gold.append(TrueSegmentation.from_lengths([len(surfaces[i]) for i in picks]))
    return utterances, gold


def corrupt(utterances: Sequence[Sequence[int]], params: Optional[ChannelParams] = None,
            seed: int = 0, gold: Optional[Sequence[TrueSegmentation]] = None, tables=None
            ) -> Tuple[List[Tuple[int, ...]], Optional[List[TrueSegmentation]]]:
    """Pass each phoneme sequence through the transducer sampler.

    Gold boundaries are carried over to phone positions: a phone belongs to
    the phoneme being read when it was written.  Utterances that lose every
    phone are redrawn.
    """
    from .channel import ChannelTables

    tables = tables or ChannelTables((params or ChannelParams()).validate())
    rng = np.random.default_rng(seed)
    out, out_gold = [], []
    for i, pi in enumerate(utterances):
        pi = list(pi)
        guard = max(100, 4 * len(pi))
        for _ in range(MAX_RETRIES):
            phones, source, truncated = tables.sample(pi, rng, guard)
            if phones and not truncated:
                break
        else:
            raise RuntimeError(f"utterance {i}: sampler kept failing")
        out.append(tuple(phones))
        if gold is not None:
            bounds = gold[i].boundaries
            lengths = [sum(1 for s in source if a <= s < b) for a, b in zip(bounds, bounds[1:])]
            out_gold.append(TrueSegmentation.from_lengths(lengths))
    return out, (out_gold if gold is not None else None)
