"""Shared fixtures: the worked "thecatinthehat" lexicon and small random lexicons."""
from __future__ import annotations

import random
from typing import Dict, List, Tuple

from lexmdl.corpus import Alphabet
from lexmdl.lexicon import Lexicon, renormalize

CAT_TEXT = "thecatinthehat"

# surface, rep (by surface), count
CAT_ROWS = (
    ("the", ("t", "h", "e"), 2),
    ("at", ("a", "t"), 2),
    ("t", (), 2),
    ("h", (), 2),
    ("cat", ("c", "at"), 1),
    ("hat", ("h", "at"), 1),
    ("thecat", ("the", "cat"), 1),
    ("thehat", ("the", "hat"), 1),
    ("e", (), 1),
    ("a", (), 1),
    ("c", (), 1),
    ("i", (), 1),
    ("n", (), 1),
)
CAT_INPUT = ("thecat", "i", "n", "thehat")

# published table values (bits), two decimals
CAT_CODE_LEN = {"the": 3.09, "at": 3.09, "t": 3.09, "h": 3.09, "cat": 4.09, "hat": 4.09,
                "thecat": 4.09, "thehat": 4.09, "e": 4.09, "a": 4.09, "c": 4.09,
                "i": 4.09, "n": 4.09}
CAT_REP_BITS = {"the": 10.27, "at": 6.18, "cat": 7.18, "hat": 6.18, "thecat": 7.18,
                "thehat": 7.18}
CAT_INPUT_BITS = 16.36
CAT_TOTAL_BITS = 60.53


def cat_lexicon() -> Tuple[Lexicon, Dict[str, int]]:
    """The worked example lexicon with fixed reps and counts out of 17."""
    alphabet = Alphabet([r[0] for r in CAT_ROWS if not r[1]])
    lex = Lexicon(alphabet)
    ids = {g: alphabet.id_of(g) for g in alphabet.glyphs}
    for surface, rep, _ in sorted((r for r in CAT_ROWS if r[1]), key=lambda r: len(r[0])):
        ids[surface] = lex.add_word(tuple(alphabet.id_of(ch) for ch in surface),
                                    tuple(ids[r] for r in rep))
    renormalize(lex, {ids[s]: c for s, _, c in CAT_ROWS})
    return lex, ids


def cat_utterance(lex: Lexicon) -> Tuple[int, ...]:
    return tuple(lex.alphabet.id_of(ch) for ch in CAT_TEXT)


def random_lexicon(rng: random.Random, alphabet_size: int = 3, max_words: int = 8,
                   max_len: int = 4) -> Lexicon:
    """Terminals plus random concatenations, with random positive counts."""
    alphabet = Alphabet([chr(97 + i) for i in range(alphabet_size)])
    lex = Lexicon(alphabet)
    target = rng.randint(alphabet_size, max(alphabet_size, max_words))
    tries = 0
    while len(lex) < target and tries < 200:
        tries += 1
        n = rng.randint(2, max_len)
        surf = tuple(rng.randrange(alphabet_size) for _ in range(n))
        if surf in lex.surface_index:
            continue
        lex.add_word(surf, lex.spelling(surf))
    renormalize(lex, {w.id: rng.uniform(0.1, 5.0) for w in lex})
    return lex


def random_sequence(rng: random.Random, alphabet_size: int, length: int) -> List[int]:
    return [rng.randrange(alphabet_size) for _ in range(length)]
