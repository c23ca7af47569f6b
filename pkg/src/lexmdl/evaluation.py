"""Compression and segmentation metrics."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Iterable, List, Tuple

from .lexicon import Lexicon, description_length
from .multigram import VITERBI, CompiledLexicon, Segmentation, utterance_bits, viterbi_parse

_logger = logging.getLogger(__name__)


class EvaluationError(ValueError):
    pass


@dataclass
class CompressionReport:
    total_bits: float
    input_bits: float
    dictionary_bits: float
    bits_per_char: float
    entropy_rate_bits_per_char: float
    parameter_fraction: float
    characters: int
    held_out: bool = False

    def rows(self) -> List[Tuple[str, str]]:
        return [(k, f"{v:.6f}" if isinstance(v, float) else str(v))
                for k, v in asdict(self).items()]


@dataclass
class SegmentationReport:
    recall: float
    crossing: float
    region_count: int

    def rows(self) -> List[Tuple[str, str]]:
        return [("recall", f"{self.recall:.6f}"), ("crossing", f"{self.crossing:.6f}"),
                ("region_count", str(self.region_count))]


def compression_report(lexicon: Lexicon, utterances, held_out: bool = False,
                       channel=None, cost: str = VITERBI) -> CompressionReport:
    """Description length of a corpus under a fixed lexicon.

    With `held_out`, the utterances were not used in training: the lexicon
    is left untouched and only its entropy on them is meaningful, but the
    dictionary bits are still reported for reference.
    """
    utterances = list(utterances)
    before = lexicon.checksum() if held_out else None
    bits = utterance_bits(lexicon, utterances, cost, channel)
    dl = description_length(lexicon, bits)
    if before is not None and lexicon.checksum() != before:
        raise EvaluationError("lexicon changed during held-out evaluation")
    chars = sum(len(getattr(u, "terminals", u)) for u in utterances)
    if chars == 0:
        raise EvaluationError("empty corpus")
    total = dl.total_bits
    return CompressionReport(total, dl.input_bits, dl.dictionary_bits, total / chars,
                             dl.input_bits / chars,
                             dl.dictionary_bits / total if total > 0 else 0.0, chars, held_out)


def _spans(parse) -> Tuple[List[Tuple[int, int]], int]:
    if isinstance(parse, Segmentation):
        spans = parse.spans(all_levels=True)
        end = parse.nodes[-1].end if parse.nodes else 0
    else:
        spans = [tuple(s) for s in parse]
        end = max((b for _, b in spans), default=0)
    return spans, end


def segmentation_report(parses: Iterable, true_segmentations: Iterable) -> SegmentationReport:
    """Recall and crossing rates of hierarchical parses against gold regions.

    A region is recalled when some word at any level spans it exactly.  It
    is crossed when some word span (a, b) partially overlaps it, i.e.
    a < x < b < y or x < a < y < b for region (x, y).
    """
    hits = crossed = regions = 0
    for i, (parse, gold) in enumerate(zip(parses, true_segmentations)):
        spans, end = _spans(parse)
        bounds = getattr(gold, "boundaries", gold)
        if end != bounds[-1]:
            raise EvaluationError(f"utterance {i}: parse covers {end} symbols, "
                                  f"gold covers {bounds[-1]}")
        span_set = set(spans)
        for x, y in zip(bounds, bounds[1:]):
            regions += 1
            hits += (x, y) in span_set
            crossed += any(a < x < b < y or x < a < y < b for a, b in span_set)
    if regions == 0:
        return SegmentationReport(0.0, 0.0, 0)
    return SegmentationReport(hits / regions, crossed / regions, regions)


def parse_corpus(lexicon: Lexicon, utterances, channel=None) -> List[Segmentation]:
    compiled = CompiledLexicon(lexicon)
    return [viterbi_parse(lexicon, u, compiled, channel, deep=True) for u in utterances]
