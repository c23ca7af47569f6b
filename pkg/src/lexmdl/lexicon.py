"""Hierarchical dictionary with multigram probabilities and description-length accounting.

Every word is either a terminal (an alphabet symbol, no representation)
or a nonterminal whose representation is a sequence of other words.
Two kinds of nonterminal exist:

* concatenative: the surfaces of the representation concatenate to the
  word's surface, and each member is strictly shorter;
* variant: the representation is a single non-variant word of the same
  length whose surface differs; the difference is paid for with
  `variant_bits` of phoneme-to-phone channel cost.

Ordering words by (surface length, is-variant) makes every representation
point strictly downward, so the representation graph is always acyclic.
"""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .corpus import Alphabet

_logger = logging.getLogger(__name__)

INF = math.inf
HEADER = "# lexmdl lexicon v1"


class LexiconError(ValueError):
    """Invariant violation or malformed lexicon file."""


@dataclass
class Word:
    id: int
    surface: Tuple[int, ...]
    rep: Tuple[int, ...] = ()
    count: float = 0.0
    code_len: float = INF
    variant: bool = False
    variant_bits: float = 0.0

    @property
    def is_terminal(self) -> bool:
        return not self.rep

    @property
    def order_key(self) -> Tuple[int, int]:
        return (len(self.surface), int(self.variant))


@dataclass
class DescriptionLength:
    input_bits: float
    dictionary_bits: float

    @property
    def total_bits(self) -> float:
        return self.input_bits + self.dictionary_bits


class Lexicon:
    """Terminals plus nonterminal words with counts and code lengths."""

    def __init__(self, alphabet: Alphabet, overhead_bits: float = 0.0):
        self.alphabet = alphabet
        self.overhead_bits = overhead_bits
        self.words: Dict[int, Word] = {}
        self.surface_index: Dict[Tuple[int, ...], int] = {}
        self.next_id = len(alphabet)
        for i in range(len(alphabet)):
            self._insert(Word(i, (i,)))

    # -- construction ----------------------------------------------------------
    def _insert(self, word: Word) -> None:
        if word.surface in self.surface_index:
            raise LexiconError(f"surface already present: {self.render(word.surface)!r}")
        self.words[word.id] = word
        self.surface_index[word.surface] = word.id

    @property
    def mode(self) -> str:
        return self.alphabet.mode

    def add_word(self, surface: Sequence[int], rep: Sequence[int], count: float = 0.0,
                 variant: bool = False, variant_bits: float = 0.0,
                 word_id: Optional[int] = None) -> int:
        surface, rep = tuple(surface), tuple(rep)
        wid = self.next_id if word_id is None else word_id
        if wid in self.words:
            raise LexiconError(f"duplicate word id {wid}")
        word = Word(wid, surface, rep, count, INF, variant, variant_bits)
        self._check_rep(word)
        self._insert(word)
        self.next_id = max(self.next_id, wid + 1)
        return wid

    def _check_rep(self, word: Word) -> None:
        if not word.rep:
            raise LexiconError(f"word {word.id} has an empty representation")
        for r in word.rep:
            if r not in self.words:
                raise LexiconError(f"word {word.id} refers to unknown id {r}")
        members = [self.words[r] for r in word.rep]
        if word.variant:
            if len(members) != 1 or members[0].variant:
                raise LexiconError(f"variant {word.id} must be represented by one plain word")
            if len(members[0].surface) != len(word.surface):
                raise LexiconError(f"variant {word.id} changes the surface length")
            if members[0].surface == word.surface:
                raise LexiconError(f"variant {word.id} equals its base surface")
            return
        joined = tuple(s for m in members for s in m.surface)
        if joined != word.surface:
            raise LexiconError(
                f"representation of word {word.id} does not concatenate to its surface")
        for m in members:
            if len(m.surface) >= len(word.surface):
                raise LexiconError(
                    f"word {word.id} is represented by word {m.id} that is not shorter")

    def set_rep(self, word_id: int, rep: Sequence[int]) -> None:
        word = self.words[word_id]
        old = word.rep
        word.rep = tuple(rep)
        try:
            self._check_rep(word)
        except LexiconError:
            word.rep = old
            raise

    def remove_word(self, word_id: int) -> None:
        """Delete a nonterminal, splicing its representation into its users."""
        word = self.words.get(word_id)
        if word is None:
            raise LexiconError(f"unknown word id {word_id}")
        if word.is_terminal:
            raise LexiconError("terminals are permanent")
        # a variant's base has a different surface, so it is spelled out instead
        splice = self.spelling(word.surface) if word.variant else word.rep
        for other in self.words.values():
            if word_id not in other.rep:
                continue
            if other.variant:
                other.variant = False
                other.variant_bits = 0.0
                other.rep = self.spelling(other.surface)
            else:
                new_rep: List[int] = []
                for r in other.rep:
                    new_rep.extend(splice if r == word_id else (r,))
                other.rep = tuple(new_rep)
        del self.words[word_id]
        del self.surface_index[word.surface]

    # -- views -----------------------------------------------------------------
    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word_id: int) -> bool:
        return word_id in self.words

    def __getitem__(self, word_id: int) -> Word:
        return self.words[word_id]

    def __iter__(self) -> Iterator[Word]:
        return iter(self.words[i] for i in sorted(self.words))

    def terminals(self) -> List[Word]:
        return [w for w in self if w.is_terminal]

    def nonterminals(self) -> List[Word]:
        return [w for w in self if not w.is_terminal]

    @property
    def total_count(self) -> float:
        return sum(w.count for w in self.words.values())

    def prob(self, word_id: int) -> float:
        return 2.0 ** -self.words[word_id].code_len

    def spelling(self, surface: Sequence[int]) -> Tuple[int, ...]:
        """Terminal-by-terminal representation of a surface."""
        return tuple(self.surface_index[(s,)] for s in surface)

    def render(self, surface: Iterable[int]) -> str:
        return self.alphabet.render(surface)

    def find(self, text: str) -> Optional[int]:
        """Word id for a rendered surface (text: characters; phonemes: symbols)."""
        if self.mode == "phoneme":
            from .phonology import lookup_symbol
            surface = tuple(lookup_symbol(t) for t in text.split())
        else:
            surface = tuple(self.alphabet.id_of(c) for c in text)
        return self.surface_index.get(surface)

    def bracketed(self, word_id: int) -> str:
        """One-level bracketing: nonterminal members shown as [surface]."""
        word = self.words[word_id]
        if word.is_terminal:
            return self.render(word.surface)
        parts = []
        for r in word.rep:
            m = self.words[r]
            text = self.render(m.surface)
            parts.append(text if m.is_terminal else f"[{text}]")
        sep = " " if self.mode == "phoneme" else ""
        inner = sep.join(parts)
        return f"[~{inner}]" if word.variant else f"[{inner}]"

    def check(self) -> None:
        """Raise LexiconError if any structural invariant is broken."""
        for i in range(len(self.alphabet)):
            w = self.words.get(i)
            if w is None or w.surface != (i,) or w.rep:
                raise LexiconError(f"terminal {i} missing or malformed")
        for w in self.words.values():
            if self.surface_index.get(w.surface) != w.id:
                raise LexiconError(f"surface index out of sync for word {w.id}")
            if not w.is_terminal:
                self._check_rep(w)
                for r in w.rep:
                    if self.words[r].order_key >= w.order_key:
                        raise LexiconError(f"cycle risk at word {w.id}")

    def copy(self) -> "Lexicon":
        new = Lexicon.__new__(Lexicon)
        new.alphabet = self.alphabet
        new.overhead_bits = self.overhead_bits
        new.words = {i: Word(w.id, w.surface, w.rep, w.count, w.code_len, w.variant,
                             w.variant_bits) for i, w in self.words.items()}
        new.surface_index = dict(self.surface_index)
        new.next_id = self.next_id
        return new

    def checksum(self) -> str:
        h = hashlib.sha256()
        for w in self:
            h.update(repr((w.id, w.surface, w.rep, w.count, w.variant,
                           w.variant_bits)).encode())
        return h.hexdigest()

    def counts(self) -> Dict[int, float]:
        return {w.id: w.count for w in self}


# -- accounting ----------------------------------------------------------------
def word_cost(lexicon: Lexicon, word_id: int) -> float:
    """Bits needed to write a word's representation in the dictionary."""
    if word_id not in lexicon:
        raise LexiconError(f"unknown word id {word_id}")
    word = lexicon[word_id]
    if word.is_terminal:
        return 0.0
    bits = sum(lexicon[r].code_len for r in word.rep)
    return bits + word.variant_bits


def dictionary_bits(lexicon: Lexicon) -> float:
    return sum(word_cost(lexicon, w.id) + lexicon.overhead_bits
               for w in lexicon.nonterminals())


def description_length(lexicon: Lexicon, utterance_costs: Iterable[float]) -> DescriptionLength:
    return DescriptionLength(float(sum(utterance_costs)), dictionary_bits(lexicon))


def segmentation_cost(lexicon: Lexicon, word_ids: Iterable[int]) -> float:
    """Index cost of writing a fixed sequence of words."""
    return sum(lexicon[w].code_len for w in word_ids)


def renormalize(lexicon: Lexicon, new_counts: Mapping[int, float]) -> Lexicon:
    """Install new counts and recompute code lengths (in place)."""
    total = 0.0
    for wid, c in new_counts.items():
        if c < 0:
            raise LexiconError(f"negative count for word {wid}")
        if wid not in lexicon:
            raise LexiconError(f"count given for unknown word {wid}")
        total += c
    if total <= 0:
        raise LexiconError("all counts are zero")
    for w in lexicon.words.values():
        c = float(new_counts.get(w.id, 0.0))
        w.count = c
        w.code_len = -math.log2(c / total) if c > 0 else INF
    return lexicon


# -- serialization -------------------------------------------------------------
_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(c, c) for c in text)


def _unescape(text: str) -> str:
    out, i = [], 0
    table = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}
    while i < len(text):
        c = text[i]
        if c == "\\" and i + 1 < len(text) and text[i + 1] in table:
            out.append(table[text[i + 1]])
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def serialize(lexicon: Lexicon, path) -> None:
    lines = [f"{HEADER}\tmode={lexicon.mode}\toverhead_bits={lexicon.overhead_bits!r}"]
    for w in lexicon:
        surf = _escape(lexicon.render(w.surface))
        if w.variant:
            rep = f"~{w.rep[0]}:{w.variant_bits!r}"
        else:
            rep = " ".join(str(r) for r in w.rep)
        lines.append(f"{w.id}\t{w.count!r}\t{surf}\t{rep}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def deserialize(path) -> Lexicon:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise LexiconError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return loads(text)


def loads(text: str) -> Lexicon:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(HEADER):
        raise LexiconError("missing lexicon header")
    meta = dict(kv.split("=", 1) for kv in lines[0].split("\t")[1:] if "=" in kv)
    mode = meta.get("mode", "text")
    rows = []
    for n, line in enumerate(lines[1:], start=2):
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise LexiconError(f"line {n}: expected 4 tab-separated fields")
        try:
            wid, count = int(fields[0]), float(fields[1])
        except ValueError:
            raise LexiconError(f"line {n}: bad id or count") from None
        rows.append((n, wid, count, _unescape(fields[2]), fields[3]))
    terminals = [r for r in rows if r[4] == ""]
    glyphs = [r[3] for r in sorted(terminals, key=lambda r: r[1])]
    if [r[1] for r in sorted(terminals, key=lambda r: r[1])] != list(range(len(glyphs))):
        raise LexiconError("terminal ids must be dense from 0")
    if mode == "phoneme":
        from .phonology import SYMBOLS
        alphabet = Alphabet(list(glyphs), mode="phoneme")
        if tuple(glyphs) != SYMBOLS[:len(glyphs)]:
            raise LexiconError("phoneme lexicon terminals must follow the built-in inventory")
    else:
        alphabet = Alphabet(list(glyphs), mode="text")
    lex = Lexicon(alphabet, float(meta.get("overhead_bits", 0.0)))
    for _, wid, count, _, _ in terminals:
        lex.words[wid].count = count

    def parse_surface(n, text):
        try:
            if mode == "phoneme":
                return tuple(alphabet.id_of(t) for t in text.split(" "))
            return tuple(alphabet.id_of(c) for c in text)
        except KeyError:
            raise LexiconError(f"line {n}: surface uses an unknown terminal") from None

    pending = []
    for n, wid, count, surf, rep in rows:
        if rep == "":
            continue
        surface = parse_surface(n, surf)
        if rep.startswith("~"):
            base, _, bits = rep[1:].partition(":")
            try:
                pending.append((n, wid, count, surface, (int(base),), True, float(bits or 0)))
            except ValueError:
                raise LexiconError(f"line {n}: malformed variant field") from None
        else:
            try:
                ids = tuple(int(x) for x in rep.split())
            except ValueError:
                raise LexiconError(f"line {n}: malformed representation") from None
            pending.append((n, wid, count, surface, ids, False, 0.0))
    # insert in dependency order (shorter / non-variant first)
    pending.sort(key=lambda r: (len(r[3]), r[5], r[1]))
    for n, wid, count, surface, rep, variant, bits in pending:
        for r in rep:
            if r not in lex.words and not any(p[1] == r for p in pending):
                raise LexiconError(f"line {n}: representation refers to unknown id {r}")
        try:
            lex.add_word(surface, rep, count, variant, bits, word_id=wid)
        except LexiconError as exc:
            raise LexiconError(f"line {n}: {exc}") from None
    lex.check()
    if lex.total_count > 0:
        renormalize(lex, lex.counts())
    return lex
