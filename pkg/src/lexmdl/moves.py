"""Dictionary moves: adding concatenations, deleting words, merging variants.

All deltas are changes in total description length (bits) estimated from
expected counts.  Because counts include one use per representation slot,
the total description length is sum_w -c(w) log2 p(w) over the whole
combined description, so a move only needs the words whose counts change:

    delta = sum_w (-c'(w) log2 p'(w) + c(w) log2 p(w))

where the sum runs over every word, and the words whose counts do not
change contribute (C - sum of changed counts) * log2(C'/C) through the
change of the total C.
"""
from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .lexicon import Lexicon, LexiconError, description_length, renormalize, word_cost
from .multigram import (COMPLETE, VITERBI, CompiledLexicon, Segmentation, accumulate_counts,
                        em_iterate, install, utterance_bits, viterbi_parse)

_logger = logging.getLogger(__name__)

MAX_OUTER = 15
DELETION_GUARD = 2.0
MERGE_MIN_SUPPORT = 3
MERGE_MIN_FRACTION = 0.5
NEW_WORD_DISCOUNT = 1.0
MAX_CANDIDATES = 10000
# a component left with at most this many uses outside the new word is flagged
COMPONENT_FLAG_USES = 1.0


@dataclass
class MoveConfig:
    em_iters: int = 3
    em_mode: str = COMPLETE
    cost: str = VITERBI
    max_outer: int = MAX_OUTER
    deletion_guard: float = DELETION_GUARD
    merge_min_support: int = MERGE_MIN_SUPPORT
    merge_min_fraction: float = MERGE_MIN_FRACTION
    new_word_discount: float = NEW_WORD_DISCOUNT
    max_candidates: int = MAX_CANDIDATES
    threads: int = 1
    audit: bool = False


@dataclass
class Candidate:
    surface: Tuple[int, ...]
    rep: Tuple[int, ...]
    est_count: float
    usage_in: Dict[int, float] = field(default_factory=dict)    # c(w|X)
    usage_rep: Dict[int, float] = field(default_factory=dict)   # c'(w|X)
    variant: bool = False
    variant_bits: float = 0.0
    channel_bits_per_use: float = 0.0    # change in channel cost per use


@dataclass
class DeltaReport:
    delta_bits: float
    breakdown: Dict[str, float] = field(default_factory=dict)
    new_counts: Dict[int, float] = field(default_factory=dict)   # changed words only
    new_total: float = 0.0
    component_flags: Dict[int, bool] = field(default_factory=dict)


@dataclass
class AuditEntry:
    move: str            # add | delete | merge
    surface: str
    predicted_bits: float
    before_bits: float
    after_bits: float

    @property
    def helped(self) -> bool:
        return self.after_bits < self.before_bits


@dataclass
class MoveReport:
    added: List[int] = field(default_factory=list)
    deleted: List[int] = field(default_factory=list)
    merged: List[int] = field(default_factory=list)
    audit: List[AuditEntry] = field(default_factory=list)
    converged: bool = False


def _xlog2(c: float, p: float) -> float:
    """c * log2 p with 0 log 0 = 0."""
    return 0.0 if c <= 0.0 else c * math.log2(p)


def _delta(lexicon: Lexicon, changed: Dict[int, float], removed: Optional[int],
           new_count: Optional[float]) -> Tuple[float, float, Dict[str, float]]:
    """Bits change when `changed` words take new counts.

    `removed` is a word whose count drops to zero; `new_count` is the count
    of a new word.  Returns (delta, new total, breakdown).
    """
    C = lexicon.total_count
    base_changed = sum(lexicon[w].count for w in changed)
    if removed is not None:
        base_changed += lexicon[removed].count
    C_new = C - base_changed + sum(changed.values()) + (new_count or 0.0)
    if C_new <= 0:
        return math.inf, C_new, {}
    old_terms = sum(_xlog2(lexicon[w].count, lexicon[w].count / C)
                    for w in changed if lexicon[w].count > 0)
    new_terms = sum(-_xlog2(c, c / C_new) for c in changed.values() if c > 0)
    rest = (C - base_changed) * math.log2(C_new / C)
    parts = {"changed_words": new_terms + old_terms, "unchanged_words": rest}
    if new_count:
        parts["new_word"] = -_xlog2(new_count, new_count / C_new)
    if removed is not None:
        c = lexicon[removed].count
        parts["removed_word"] = _xlog2(c, c / C) if c > 0 else 0.0
    return sum(parts.values()), C_new, parts


# -- candidates ----------------------------------------------------------------
def propose_candidates(lexicon: Lexicon, parses: Sequence, max_candidates: int = MAX_CANDIDATES,
                       discount: float = NEW_WORD_DISCOUNT, include_reps: bool = True
                       ) -> List[Candidate]:
    """Adjacent pairs and triples from Viterbi parses and dictionary reps.

    `parses` holds Segmentations or plain word-id lists.  Candidates are
    keyed by surface; the most frequent representation is kept.
    """
    seqs: List[Sequence[int]] = [p.word_ids if isinstance(p, Segmentation) else list(p)
                                 for p in parses]
    if include_reps:
        seqs.extend(w.rep for w in lexicon.nonterminals() if not w.variant)
    by_surface: Dict[Tuple[int, ...], Counter] = defaultdict(Counter)
    for ids in seqs:
        for n in (2, 3):
            free_from: Dict[Tuple[int, ...], int] = {}
            for i in range(len(ids) - n + 1):
                rep = tuple(ids[i:i + n])
                # overlapping repeats ("a a a") can only be used once per n words
                if i < free_from.get(rep, 0):
                    continue
                free_from[rep] = i + n
                surf = tuple(s for r in rep for s in lexicon[r].surface)
                if surf not in lexicon.surface_index:
                    by_surface[surf][rep] += 1
    out = []
    for surf, reps in by_surface.items():
        rep, _ = max(reps.items(), key=lambda kv: (kv[1], [-x for x in kv[0]]))
        out.append(Candidate(surf, rep, discount * sum(reps.values())))
    out.sort(key=lambda c: (-c.est_count, c.surface))
    return out[:max_candidates]


def _surface_usage(lexicon: Lexicon, surface, compiled: CompiledLexicon) -> Dict[int, float]:
    """Expected word usage when parsing a surface with the current lexicon."""
    counts = np.zeros(len(compiled.ids))
    log_z = compiled.exact_matcher().forward_backward(
        np.asarray(surface, dtype=np.int32), counts, False, None)[0]
    if log_z == -math.inf:
        return {}
    return {compiled.ids[i]: float(c) for i, c in enumerate(counts) if c > 0}


def score_addition(lexicon: Lexicon, candidate: Candidate,
                   compiled: Optional[CompiledLexicon] = None) -> DeltaReport:
    """Estimated change in description length from adding `candidate`."""
    if not candidate.usage_in:
        if candidate.variant:
            candidate.usage_in = {candidate.rep[0]: 1.0}
        else:
            compiled = compiled or CompiledLexicon(lexicon)
            candidate.usage_in = _surface_usage(lexicon, candidate.surface, compiled)
    if not candidate.usage_rep:
        candidate.usage_rep = dict(Counter(candidate.rep))
    cx = candidate.est_count
    changed: Dict[int, float] = {}
    for w in sorted(set(candidate.usage_in) | set(candidate.usage_rep)):
        c = lexicon[w].count + candidate.usage_rep.get(w, 0.0) \
            - cx * candidate.usage_in.get(w, 0.0)
        changed[w] = max(0.0, c)
    delta, C_new, parts = _delta(lexicon, changed, None, cx)
    parts["overhead"] = lexicon.overhead_bits
    if candidate.variant:
        parts["variant_bits"] = candidate.variant_bits
        parts["channel"] = cx * candidate.channel_bits_per_use
    delta += parts["overhead"] + parts.get("variant_bits", 0.0) + parts.get("channel", 0.0)
    flags = {w: changed[w] - candidate.usage_rep.get(w, 0.0) <= COMPONENT_FLAG_USES
             for w in candidate.usage_rep if not lexicon[w].is_terminal}
    return DeltaReport(delta, parts, changed, C_new, flags)


def score_deletion(lexicon: Lexicon, word_id: int, channel=None) -> DeltaReport:
    """Estimated change in description length from deleting a nonterminal."""
    if word_id not in lexicon:
        raise LexiconError(f"unknown word id {word_id}")
    word = lexicon[word_id]
    if word.is_terminal:
        raise LexiconError("terminals are permanent")
    cx = word.count
    slots = Counter(word.rep)
    changed = {w: max(0.0, lexicon[w].count + n * (cx - 1.0)) for w, n in sorted(slots.items())}
    delta, C_new, parts = _delta(lexicon, changed, word_id, None)
    parts["overhead"] = -lexicon.overhead_bits
    extra = parts["overhead"]
    if word.variant:
        parts["variant_bits"] = -word.variant_bits
        extra += parts["variant_bits"]
        if channel is not None:
            base = lexicon[word.rep[0]].surface
            t = channel.tables
            gain = (-math.log2(t.phi_given_pi(base, word.surface))
                    + math.log2(t.phi_given_pi(word.surface, word.surface)))
            # uses by other reps do not go through the channel
            users = sum(1 for w in lexicon.nonterminals() if word_id in w.rep)
            parts["channel"] = max(0.0, cx - users) * gain
            extra += parts["channel"]
    return DeltaReport(delta + extra, parts, changed, C_new, {})


def _apply_counts(lexicon: Lexicon, report: DeltaReport, extra: Dict[int, float]) -> None:
    counts = lexicon.counts()
    counts.update(report.new_counts)
    counts.update(extra)
    renormalize(lexicon, {w: c for w, c in counts.items() if w in lexicon})


# -- variants ------------------------------------------------------------------
def merge_surface_variant(lexicon: Lexicon, word_id: int, observed_surface: Sequence[int],
                          support_count: float, channel,
                          min_support: int = MERGE_MIN_SUPPORT) -> Optional[Candidate]:
    """Candidate variant word for a systematically different realization.

    Returns None when support is too low or nothing differs.  The caller
    scores the candidate with `score_addition` and adds it if worthwhile.
    """
    observed = tuple(observed_surface)
    word = lexicon[word_id]
    if support_count < min_support or observed == word.surface or word.variant:
        return None
    if len(observed) != len(word.surface) or observed in lexicon.surface_index:
        return None
    t = channel.tables
    p_var = t.phi_given_pi(word.surface, observed)
    if p_var <= 0.0:
        return None
    bits = -math.log2(p_var)
    per_use = -math.log2(t.phi_given_pi(observed, observed)) - bits
    return Candidate(observed, (word_id,), float(support_count), {word_id: 1.0},
                     {word_id: 1.0}, True, bits, per_use)


def _variant_candidates(lexicon: Lexicon, utterances, parses: Sequence[Segmentation],
                        channel, cfg: MoveConfig) -> List[Candidate]:
    uses: Dict[int, int] = Counter()
    realized: Dict[int, Counter] = defaultdict(Counter)
    for utt, seg in zip(utterances, parses):
        phones = tuple(getattr(utt, "terminals", utt))
        for node in seg.nodes:
            w = lexicon[node.word_id]
            if w.is_terminal or w.variant:
                continue
            uses[w.id] += 1
            obs = phones[node.start:node.end]
            if obs != w.surface:
                realized[w.id][obs] += 1
    out = []
    for wid in sorted(realized):
        obs, n = max(realized[wid].items(), key=lambda kv: (kv[1], kv[0]))
        if n < cfg.merge_min_fraction * uses[wid]:
            continue
        cand = merge_surface_variant(lexicon, wid, obs, n, channel, cfg.merge_min_support)
        if cand is not None:
            out.append(cand)
    return out


# -- outer loop ----------------------------------------------------------------
def refreshed_description_length(lexicon: Lexicon, utterances, channel=None,
                                 cost: str = VITERBI) -> float:
    """True description length after one Viterbi re-estimation on a copy."""
    lex = lexicon.copy()
    install(lex, accumulate_counts(lex, utterances, VITERBI, True, channel))
    bits = utterance_bits(lex, utterances, cost, channel)
    return description_length(lex, bits).total_bits


def _parses(lexicon: Lexicon, utterances, channel) -> List[Segmentation]:
    compiled = CompiledLexicon(lexicon)
    return [viterbi_parse(lexicon, u, compiled, channel, deep=False) for u in utterances]


def _add_stage(lexicon: Lexicon, utterances, channel, cfg: MoveConfig,
               report: MoveReport) -> None:
    parses = _parses(lexicon, utterances, channel)
    compiled = CompiledLexicon(lexicon)
    cands = propose_candidates(lexicon, parses, cfg.max_candidates, cfg.new_word_discount)
    if channel is not None:
        cands.extend(_variant_candidates(lexicon, utterances, parses, channel, cfg))
    scored = []
    for cand in cands:
        rep = score_addition(lexicon, cand, compiled)
        if rep.delta_bits < 0:
            scored.append((rep.delta_bits, cand.surface, cand, rep))
    scored.sort(key=lambda x: (x[0], x[1]))
    before = refreshed_description_length(lexicon, utterances, channel, cfg.cost) \
        if cfg.audit and scored else None
    seen = set()
    new_counts: Dict[int, float] = {}
    for delta, surf, cand, rep in scored:
        if surf in seen or surf in lexicon.surface_index:
            continue
        seen.add(surf)
        wid = lexicon.add_word(cand.surface, cand.rep, cand.est_count, cand.variant,
                               cand.variant_bits)
        new_counts[wid] = cand.est_count
        (report.merged if cand.variant else report.added).append(wid)
        _logger.debug("add %r delta %.2f", lexicon.render(surf), delta)
    if new_counts:
        counts = lexicon.counts()
        counts.update(new_counts)
        renormalize(lexicon, counts)
    if before is not None and new_counts:
        after = refreshed_description_length(lexicon, utterances, channel, cfg.cost)
        predicted = sum(x[0] for x in scored if x[1] in seen)
        report.audit.append(AuditEntry("add", f"{len(new_counts)} words", predicted,
                                       before, after))


def _delete_stage(lexicon: Lexicon, utterances, channel, cfg: MoveConfig,
                  report: MoveReport) -> None:
    original = {w.id: word_cost(lexicon, w.id) for w in lexicon.nonterminals()}
    # words adopted in this pass are only reconsidered in the next one
    guarded = set(report.added) | set(report.merged)
    while True:
        best = None
        for w in lexicon.nonterminals():
            if w.id in guarded:
                continue
            if word_cost(lexicon, w.id) > cfg.deletion_guard * original.get(w.id, math.inf):
                guarded.add(w.id)
                continue
            rep = score_deletion(lexicon, w.id, channel)
            if rep.delta_bits < 0 and (best is None or rep.delta_bits < best[0]):
                best = (rep.delta_bits, w.id, rep)
        if best is None:
            return
        delta, wid, rep = best
        before = refreshed_description_length(lexicon, utterances, channel, cfg.cost) \
            if cfg.audit else None
        surf = lexicon.render(lexicon[wid].surface)
        lexicon.remove_word(wid)
        _apply_counts(lexicon, rep, {})
        report.deleted.append(wid)
        _logger.debug("delete %r delta %.2f", surf, delta)
        if before is not None:
            after = refreshed_description_length(lexicon, utterances, channel, cfg.cost)
            report.audit.append(AuditEntry("delete", surf, delta, before, after))


def apply_moves(lexicon: Lexicon, utterances, config: Optional[MoveConfig] = None,
                channel=None) -> MoveReport:
    """One outer iteration: EM, batch additions, EM, greedy deletions.

    The lexicon is modified in place.
    """
    cfg = config or MoveConfig()
    utterances = list(utterances)
    report = MoveReport()
    em_iterate(lexicon, utterances, cfg.em_iters, cfg.em_mode, channel, cfg.threads)
    _add_stage(lexicon, utterances, channel, cfg, report)
    em_iterate(lexicon, utterances, cfg.em_iters, cfg.em_mode, channel, cfg.threads)
    _delete_stage(lexicon, utterances, channel, cfg, report)
    report.converged = not (report.added or report.deleted or report.merged)
    for entry in report.audit:
        _logger.info("audit %s %s: predicted %.2f, actual %.2f", entry.move, entry.surface,
                     entry.predicted_bits, entry.after_bits - entry.before_bits)
    return report


@dataclass
class TraceRow:
    iteration: int
    input_bits: float
    dictionary_bits: float
    total_bits: float
    words_added: int
    words_deleted: int
    lexicon_size: int

    HEADER = ("iteration", "input_bits", "dictionary_bits", "total_bits", "words_added",
              "words_deleted", "lexicon_size")

    def as_tsv(self) -> str:
        return "\t".join([str(self.iteration), f"{self.input_bits:.4f}",
                          f"{self.dictionary_bits:.4f}", f"{self.total_bits:.4f}",
                          str(self.words_added), str(self.words_deleted),
                          str(self.lexicon_size)])


def train(lexicon: Lexicon, utterances, config: Optional[MoveConfig] = None, channel=None,
          on_iteration=None) -> Tuple[Lexicon, List[TraceRow], List[AuditEntry]]:
    """Outer loop until no move applies or `max_outer` iterations."""
    cfg = config or MoveConfig()
    utterances = list(utterances)
    trace: List[TraceRow] = []
    audit: List[AuditEntry] = []
    bits = utterance_bits(lexicon, utterances, cfg.cost, channel)
    dl = description_length(lexicon, bits)
    trace.append(TraceRow(0, dl.input_bits, dl.dictionary_bits, dl.total_bits, 0, 0,
                          len(lexicon)))
    if on_iteration is not None:
        on_iteration(trace[0])
    for it in range(1, cfg.max_outer + 1):
        report = apply_moves(lexicon, utterances, cfg, channel)
        audit.extend(report.audit)
        bits = utterance_bits(lexicon, utterances, cfg.cost, channel)
        dl = description_length(lexicon, bits)
        row = TraceRow(it, dl.input_bits, dl.dictionary_bits, dl.total_bits,
                       len(report.added) + len(report.merged), len(report.deleted),
                       len(lexicon))
        trace.append(row)
        _logger.info("iteration %d: %.1f bits (%d words, +%d -%d)", it, row.total_bits,
                     row.lexicon_size, row.words_added, row.words_deleted)
        if on_iteration is not None:
            on_iteration(row)
        if report.converged:
            break
    return lexicon, trace, audit
