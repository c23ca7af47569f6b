"""Reading text and phoneme corpora into terminal-id sequences."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import phonology

_logger = logging.getLogger(__name__)

SENTENCE_END = ".?!"
GOLD_MARK = "|"


class CorpusError(ValueError):
    """Malformed or unreadable input data."""


@dataclass(frozen=True)
class Terminal:
    id: int
    glyph: str


@dataclass
class Alphabet:
    """Dense mapping between terminal glyphs and ids."""

    glyphs: List[str]
    mode: str = "text"
    _index: Dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {g: i for i, g in enumerate(self.glyphs)}
        if len(self._index) != len(self.glyphs):
            raise CorpusError("duplicate glyph in alphabet")

    def __len__(self) -> int:
        return len(self.glyphs)

    def __contains__(self, glyph: str) -> bool:
        return glyph in self._index

    def id_of(self, glyph: str) -> int:
        return self._index[glyph]

    def terminals(self) -> List[Terminal]:
        return [Terminal(i, g) for i, g in enumerate(self.glyphs)]

    def add(self, glyph: str) -> int:
        if glyph not in self._index:
            self._index[glyph] = len(self.glyphs)
            self.glyphs.append(glyph)
        return self._index[glyph]

    def render(self, ids: Iterable[int]) -> str:
        sep = " " if self.mode == "phoneme" else ""
        return sep.join(self.glyphs[i] for i in ids)

    @classmethod
    def phonemes(cls) -> "Alphabet":
        return cls(list(phonology.SYMBOLS), mode="phoneme")


@dataclass
class Utterance:
    terminals: Tuple[int, ...]
    source_line: int = 0

    def __len__(self) -> int:
        return len(self.terminals)


@dataclass(frozen=True)
class TrueSegmentation:
    boundaries: Tuple[int, ...]

    def __post_init__(self):
        b = self.boundaries
        if not b or b[0] != 0 or any(x >= y for x, y in zip(b, b[1:])):
            raise CorpusError(f"bad boundary list {b}")

    @property
    def regions(self) -> List[Tuple[int, int]]:
        return list(zip(self.boundaries, self.boundaries[1:]))

    @classmethod
    def from_lengths(cls, lengths: Sequence[int]) -> "TrueSegmentation":
        out = [0]
        for n in lengths:
            if n > 0:
                out.append(out[-1] + n)
        return cls(tuple(out))


@dataclass
class TextConfig:
    case_fold: bool = True
    sentence_split: bool = True
    line_utterances: bool = False      # every input line is its own utterance
    alphabet: Optional[Sequence[str]] = None   # fixed alphabet; None = grow from data


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _split_sentences(text: str) -> List[str]:
    # delimiter stays as the last character of its sentence
    parts = re.split(r"(?<=[.?!])", text)
    return [p for p in parts if p]


def text_to_utterances(text: str, config: Optional[TextConfig] = None,
                       alphabet: Optional[Alphabet] = None
                       ) -> Tuple[Alphabet, List[Utterance]]:
    config = config or TextConfig()
    fixed = alphabet is not None or config.alphabet is not None
    if alphabet is None:
        alphabet = Alphabet(list(config.alphabet) if config.alphabet is not None else [])
    if config.case_fold:
        text = text.lower()
    if config.line_utterances:
        chunks = [(i + 1, line) for i, line in enumerate(text.splitlines())]
    else:
        chunks = [(1, text)]
    utterances: List[Utterance] = []
    for lineno, chunk in chunks:
        if not config.line_utterances:
            # line structure carries no meaning in document mode
            chunk = re.sub(r"[\r\n\t]", " ", chunk)
        pieces = _split_sentences(chunk) if config.sentence_split else [chunk]
        for piece in pieces:
            piece = piece.replace("\t", " ")
            if not piece.strip():
                continue
            ids = []
            for ch in piece:
                if ch not in alphabet:
                    if fixed:
                        raise CorpusError(
                            f"character {ch!r} at line {lineno} is outside the alphabet")
                    alphabet.add(ch)
                ids.append(alphabet.id_of(ch))
            utterances.append(Utterance(tuple(ids), lineno))
    return alphabet, utterances


def load_text(path, config: Optional[TextConfig] = None,
              alphabet: Optional[Alphabet] = None) -> Tuple[Alphabet, List[Utterance]]:
    """Load a text corpus.

    Text is case folded and split after every '.', '?' and '!' (the
    delimiter stays with its sentence).  Tabs and line breaks become spaces
    unless `line_utterances` is set, in which case each line is an
    utterance of its own.
    """
    return text_to_utterances(_read(path), config, alphabet)


def load_alphabet_file(path) -> List[str]:
    """One glyph per line; the literal token `<space>` stands for ' '."""
    glyphs = []
    for line in _read(path).splitlines():
        if not line:
            continue
        glyphs.append(" " if line == "<space>" else line)
    return glyphs


def parse_phoneme_line(line: str, lineno: int = 0
                       ) -> Tuple[Tuple[int, ...], Optional[TrueSegmentation]]:
    ids: List[int] = []
    lengths: List[int] = []
    marked = False
    current = 0
    for tok in line.split():
        if tok == GOLD_MARK:
            marked = True
            lengths.append(current)
            current = 0
            continue
        try:
            ids.append(phonology.lookup_symbol(tok))
        except KeyError:
            raise CorpusError(f"unknown phoneme '{tok}' at line {lineno}") from None
        current += 1
    lengths.append(current)
    if not ids:
        return (), None
    seg = TrueSegmentation.from_lengths(lengths) if marked else None
    return tuple(ids), seg


def phonemes_to_utterances(text: str) -> Tuple[Alphabet, List[Utterance],
                                               List[Optional[TrueSegmentation]]]:
    alphabet = Alphabet.phonemes()
    utterances: List[Utterance] = []
    gold: List[Optional[TrueSegmentation]] = []
    for i, line in enumerate(text.splitlines()):
        ids, seg = parse_phoneme_line(line, i + 1)
        if not ids:
            continue
        utterances.append(Utterance(ids, i + 1))
        gold.append(seg)
    return alphabet, utterances, gold


def load_phonemes(path) -> Tuple[Alphabet, List[Utterance], List[Optional[TrueSegmentation]]]:
    """Load a phoneme corpus: one utterance per line, '|' marks gold boundaries."""
    return phonemes_to_utterances(_read(path))


def load_gold_text(path, alphabet: Alphabet, config: Optional[TextConfig] = None
                   ) -> Tuple[List[Utterance], List[TrueSegmentation]]:
    """Gold file for text mode: one utterance per line, '|' between regions."""
    config = config or TextConfig()
    utterances, gold = [], []
    for i, line in enumerate(_read(path).splitlines()):
        if config.case_fold:
            line = line.lower()
        pieces = line.split(GOLD_MARK)
        if not "".join(pieces).strip():
            continue
        ids: List[int] = []
        for ch in "".join(pieces):
            if ch not in alphabet:
                raise CorpusError(f"character {ch!r} at line {i + 1} is outside the alphabet")
            ids.append(alphabet.id_of(ch))
        utterances.append(Utterance(tuple(ids), i + 1))
        gold.append(TrueSegmentation.from_lengths([len(p) for p in pieces]))
    return utterances, gold


def render_gold(alphabet: Alphabet, utterance: Utterance, seg: TrueSegmentation) -> str:
    parts = [alphabet.render(utterance.terminals[a:b]) for a, b in seg.regions]
    joiner = " | " if alphabet.mode == "phoneme" else GOLD_MARK
    return joiner.join(parts)
