"""Forward-backward, Viterbi and EM for the multigram model.

Word emission is context independent: an utterance is a sequence of words
drawn i.i.d. from the lexicon distribution, and the probability of the
utterance sums over every way of covering it with word surfaces.  In
phoneme mode with a channel, word surfaces are underlying phonemes and
the input is a phone string; see `channel.noisy_chart`.

Dictionary representations take part in estimation: every EM pass
re-derives each nonterminal's representation as the best parse of its own
surface using strictly shorter words, and one count per representation
slot is added to the input counts.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .lexicon import Lexicon, LexiconError, renormalize

_logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
NEG_INF = -math.inf
COMPLETE, VITERBI = "complete", "viterbi"


class ParseError(ValueError):
    """A sequence has zero probability under the lexicon."""


def _as_seq(utterance) -> Tuple[int, ...]:
    return tuple(getattr(utterance, "terminals", utterance))


class CompiledLexicon:
    """Dense arrays for the chart kernels.

    Dense index order follows lexicon id order, so "smaller dense index"
    means "smaller id" for tie-breaking.  Zero-count words stay in the
    arrays with log-probability -inf and are never matched.
    """

    def __init__(self, lexicon: Lexicon):
        self.lexicon = lexicon
        words = list(lexicon)
        self.ids = [w.id for w in words]
        self.index = {wid: i for i, wid in enumerate(self.ids)}
        self.surfaces = [w.surface for w in words]
        self.logp = np.array([-(w.code_len * LN2) if w.code_len < math.inf else NEG_INF
                              for w in words], dtype=np.float64)
        self._build_trie()
        self._exact = None

    def _build_trie(self) -> None:
        children: List[Dict[int, int]] = [{}]
        node_word = [-1]
        for d, surf in enumerate(self.surfaces):
            node = 0
            for s in surf:
                nxt = children[node].get(s)
                if nxt is None:
                    nxt = len(children)
                    children[node][s] = nxt
                    children.append({})
                    node_word.append(-1)
                node = nxt
            node_word[node] = d
        starts, syms, nodes = [0], [], []
        for ch in children:
            for s in sorted(ch):
                syms.append(s)
                nodes.append(ch[s])
            starts.append(len(syms))
        self.child_start = np.array(starts, dtype=np.int32)
        self.child_sym = np.array(syms, dtype=np.int32)
        self.child_node = np.array(nodes, dtype=np.int32)
        self.node_word = np.array(node_word, dtype=np.int32)

    def exact_matcher(self):
        if self._exact is None:
            self._exact = kernels.ExactMatcher(self.child_start, self.child_sym,
                                               self.child_node, self.node_word, self.logp)
        return self._exact

    def noisy_matcher(self, channel):
        return channel.matcher([np.array(s, dtype=np.int32) for s in self.surfaces], self.logp)

    def count_dict(self, dense: np.ndarray) -> Dict[int, float]:
        return {wid: float(dense[i]) for i, wid in enumerate(self.ids)}


@dataclass
class Chart:
    """Forward/backward quantities in natural-log space.

    log_alpha[k] = ln p(t_0..t_{k-1}) and log_beta[k] = ln p(t_k..t_{n-1}).
    spans holds (start, end, word_id, posterior).
    """

    log_alpha: np.ndarray
    log_beta: np.ndarray
    spans: List[Tuple[int, int, int, float]] = field(default_factory=list)
    edges: int = 0
    pruned: int = 0
    unpruned_log_total: Optional[float] = None

    @property
    def alpha(self) -> np.ndarray:
        return np.exp(self.log_alpha)

    @property
    def beta(self) -> np.ndarray:
        return np.exp(self.log_beta)

    @property
    def log_total(self) -> float:
        return float(self.log_beta[0])

    @property
    def total(self) -> float:
        return math.exp(self.log_total)

    def posteriors(self) -> Dict[Tuple[int, int, int], float]:
        return {(k, l, w): p for k, l, w, p in self.spans}


@dataclass
class Node:
    word_id: int
    start: int
    end: int
    children: List["Node"] = field(default_factory=list)

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass
class Segmentation:
    """Top-level word sequence with optional recursive expansion."""

    nodes: List[Node]
    log_prob: float

    @property
    def word_ids(self) -> List[int]:
        return [n.word_id for n in self.nodes]

    @property
    def bits(self) -> float:
        return -self.log_prob / LN2

    def spans(self, all_levels: bool = True) -> List[Tuple[int, int]]:
        if not all_levels:
            return [(n.start, n.end) for n in self.nodes]
        return [(m.start, m.end) for n in self.nodes for m in n.walk()]

    def render(self, lexicon: Lexicon, deep: bool = False) -> str:
        sep = " " if lexicon.mode == "phoneme" else ""
        if not deep:
            return " | ".join(lexicon.render(lexicon[w].surface) for w in self.word_ids) \
                if lexicon.mode == "phoneme" else \
                "|".join(lexicon.render(lexicon[w].surface) for w in self.word_ids)

        def show(node: Node) -> str:
            word = lexicon[node.word_id]
            if not node.children:
                return lexicon.render(word.surface)
            return "[" + sep.join(show(c) for c in node.children) + "]"

        return sep.join(show(n) if n.children else f"[{show(n)}]" for n in self.nodes)


# -- core operations -----------------------------------------------------------
def _require_parse(log_z: float, what: str = "sequence") -> None:
    if log_z == NEG_INF:
        raise ParseError(f"{what} has zero probability under the lexicon "
                         "(a needed terminal has count 0)")


def forward_backward(lexicon: Lexicon, sequence, compiled: Optional[CompiledLexicon] = None,
                     channel=None, proper: bool = False) -> Chart:
    """Chart with span posteriors for one terminal (or phone) sequence."""
    seq = _as_seq(sequence)
    if not seq:
        raise ValueError("empty sequence")
    if channel is not None:
        from .channel import noisy_chart
        return noisy_chart(lexicon, seq, channel=channel, prune_budget=channel.prune_budget)
    compiled = compiled or CompiledLexicon(lexicon)
    spans: List[Tuple[int, int, int, float]] = []
    log_z, la, lb = compiled.exact_matcher().forward_backward(
        np.asarray(seq, dtype=np.int32), None, proper, spans)
    _require_parse(log_z)
    spans = [(k, l, compiled.ids[w], p) for k, l, w, p in spans]
    spans.sort()
    return Chart(np.array(la), np.array(lb), spans)


def _noisy_children(lexicon: Lexicon, word, phones: Sequence[int], channel) -> List[int]:
    """Phone offsets of the underlying positions 0..len(surface) in one alignment."""
    _, path = channel.tables.best_alignment(word.surface, phones)
    offsets = [0]
    out = 0
    for action, _ in path:
        if action == "delete":
            offsets.append(out)
            continue
        out += 1
        if action == "copy":
            offsets.append(out)
    return offsets


def expand(lexicon: Lexicon, word_id: int, start: int, end: int,
           compiled: Optional[CompiledLexicon] = None) -> Node:
    """Recursive bracketing of one word over an exact-surface span."""
    word = lexicon[word_id]
    node = Node(word_id, start, end)
    if word.is_terminal:
        return node
    if word.variant:
        # the stored base has a different surface; bracket the observed one
        compiled = compiled or CompiledLexicon(lexicon)
        _, path = compiled.exact_matcher().viterbi(np.asarray(word.surface, dtype=np.int32), True)
        members = [(k, l, compiled.ids[w]) for k, l, w in path]
    else:
        members, pos = [], 0
        for r in word.rep:
            n = len(lexicon[r].surface)
            members.append((pos, pos + n, r))
            pos += n
    for k, l, r in members:
        node.children.append(expand(lexicon, r, start + k, start + l, compiled))
    return node


def viterbi_parse(lexicon: Lexicon, sequence, compiled: Optional[CompiledLexicon] = None,
                  channel=None, deep: bool = True, proper: bool = False) -> Segmentation:
    """Most probable segmentation; with `deep`, each word is expanded via its rep.

    Ties go to the longer word, then to the smaller id.
    """
    seq = _as_seq(sequence)
    if not seq:
        raise ValueError("empty sequence")
    compiled = compiled or CompiledLexicon(lexicon)
    if channel is not None:
        res = compiled.noisy_matcher(channel).chart(
            np.asarray(seq, dtype=np.int32), channel.prune_budget, None, True, None)
        if res["log_z"] == NEG_INF:
            from .channel import ChartError
            raise ChartError("no surviving path; retry with a smaller prune budget")
        log_prob, path = res["viterbi_log"], res["path"]
    else:
        log_prob, path = compiled.exact_matcher().viterbi(np.asarray(seq, dtype=np.int32),
                                                          proper)
        _require_parse(log_prob)
    nodes = []
    for k, l, w in path:
        wid = compiled.ids[w]
        if not deep:
            nodes.append(Node(wid, k, l))
        elif channel is None:
            nodes.append(expand(lexicon, wid, k, l, compiled))
        else:
            # underlying positions are mapped onto phones through the best alignment
            inner = expand(lexicon, wid, 0, len(lexicon[wid].surface), compiled)
            offsets = _noisy_children(lexicon, lexicon[wid], seq[k:l], channel)
            for m in inner.walk():
                m.start, m.end = k + offsets[m.start], k + offsets[m.end]
            nodes.append(inner)
    return Segmentation(nodes, log_prob)


# -- estimation ----------------------------------------------------------------
@dataclass
class CountResult:
    counts: Dict[int, float]
    reps: Dict[int, Tuple[int, ...]]
    input_log_likelihood: float        # natural log
    rep_log_likelihood: float

    @property
    def log_likelihood(self) -> float:
        return self.input_log_likelihood + self.rep_log_likelihood


def _chunks(items: List, n: int) -> List[List]:
    size = max(1, math.ceil(len(items) / max(1, n)))
    return [items[i:i + size] for i in range(0, len(items), size)]


def _estep_chunk(compiled: CompiledLexicon, seqs, mode, channel):
    dense = np.zeros(len(compiled.ids))
    total = 0.0
    if channel is None:
        matcher = compiled.exact_matcher()
        if mode == COMPLETE:
            total = matcher.em_batch(seqs, dense, False)
        else:
            for i, seq in enumerate(seqs):
                lp, path = matcher.viterbi(seq, False)
                if lp == NEG_INF:
                    raise ParseError(f"utterance {i} has zero probability")
                total += lp
                for _, _, w in path:
                    dense[w] += 1.0
        return dense, total
    matcher = compiled.noisy_matcher(channel)
    for i, seq in enumerate(seqs):
        res = matcher.chart(seq, channel.prune_budget, dense if mode == COMPLETE else None,
                            mode == VITERBI, None)
        if res["log_z"] == NEG_INF:
            from .channel import ChartError
            raise ChartError(f"utterance {i}: no surviving path; "
                             "retry with a smaller prune budget")
        if mode == COMPLETE:
            total += res["log_z"]
        else:
            total += res["viterbi_log"]
            for _, _, w in res["path"]:
                dense[w] += 1.0
    return dense, total


def derive_reps(lexicon: Lexicon, compiled: Optional[CompiledLexicon] = None
                ) -> Tuple[Dict[int, Tuple[int, ...]], float]:
    """Best parse of each nonterminal surface by strictly shorter words.

    Variants keep their single base word.  Returns (reps, ln probability of
    all rep sequences under the current distribution).
    """
    compiled = compiled or CompiledLexicon(lexicon)
    matcher = compiled.exact_matcher()
    reps: Dict[int, Tuple[int, ...]] = {}
    total = 0.0
    for word in lexicon.nonterminals():
        if word.variant:
            rep = word.rep
        else:
            lp, path = matcher.viterbi(np.asarray(word.surface, dtype=np.int32), True)
            rep = tuple(compiled.ids[w] for _, _, w in path) if lp > NEG_INF else word.rep
        reps[word.id] = rep
        total += float(sum(compiled.logp[compiled.index[r]] for r in rep))
    return reps, total


def accumulate_counts(lexicon: Lexicon, utterances, mode: str = COMPLETE,
                      reestimate_reps: bool = True, channel=None, threads: int = 1,
                      compiled: Optional[CompiledLexicon] = None) -> CountResult:
    """Expected word counts over the input plus one per representation slot."""
    if mode not in (COMPLETE, VITERBI):
        raise ValueError(f"unknown mode {mode!r}")
    compiled = compiled or CompiledLexicon(lexicon)
    seqs = [np.asarray(_as_seq(u), dtype=np.int32) for u in utterances]
    if threads > 1 and len(seqs) > 1:
        parts = _chunks(seqs, threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: _estep_chunk(compiled, c, mode, channel), parts))
    else:
        results = [_estep_chunk(compiled, seqs, mode, channel)]
    dense = np.zeros(len(compiled.ids))
    input_ll = 0.0
    for d, t in results:     # fixed order keeps the sum deterministic
        dense += d
        input_ll += t
    if reestimate_reps:
        reps, rep_ll = derive_reps(lexicon, compiled)
    else:
        reps = {w.id: w.rep for w in lexicon.nonterminals()}
        rep_ll = float(sum(compiled.logp[compiled.index[r]] for rep in reps.values()
                           for r in rep))
    for rep in reps.values():
        for r in rep:
            dense[compiled.index[r]] += 1.0
    return CountResult(compiled.count_dict(dense), reps, input_ll, rep_ll)


def install(lexicon: Lexicon, result: CountResult) -> Lexicon:
    """M-step: adopt re-derived reps and renormalize."""
    for wid, rep in result.reps.items():
        if lexicon[wid].rep != rep:
            lexicon.set_rep(wid, rep)
    return renormalize(lexicon, result.counts)


def em_iterate(lexicon: Lexicon, utterances, iters: int = 3, mode: str = COMPLETE,
               channel=None, threads: int = 1, reestimate_reps: bool = True,
               trace: Optional[List[float]] = None) -> Lexicon:
    """Run `iters` EM passes in place.

    If `trace` is a list, the combined log-likelihood (natural log, input
    plus representations) before every pass is appended, followed by the
    value after the last pass.
    """
    if iters < 1:
        raise ValueError("iters must be at least 1")
    utterances = list(utterances)
    for it in range(iters):
        result = accumulate_counts(lexicon, utterances, mode, reestimate_reps, channel, threads)
        if trace is not None:
            trace.append(result.log_likelihood)
        _logger.debug("EM pass %d: log-likelihood %.6f", it, result.log_likelihood)
        install(lexicon, result)
    if trace is not None:
        trace.append(accumulate_counts(lexicon, utterances, mode, reestimate_reps, channel,
                                       threads).log_likelihood)
    return lexicon


def utterance_bits(lexicon: Lexicon, utterances, cost: str = VITERBI, channel=None,
                   compiled: Optional[CompiledLexicon] = None) -> List[float]:
    """Per-utterance encoding cost in bits.

    `viterbi` charges the best segmentation's index costs; `total` charges
    -log2 of the total probability.
    """
    compiled = compiled or CompiledLexicon(lexicon)
    out = []
    for i, u in enumerate(utterances):
        seq = np.asarray(_as_seq(u), dtype=np.int32)
        if channel is not None:
            res = compiled.noisy_matcher(channel).chart(seq, channel.prune_budget, None,
                                                        cost == VITERBI, None)
            lp = res["viterbi_log"] if cost == VITERBI else res["log_z"]
        elif cost == VITERBI:
            lp = compiled.exact_matcher().viterbi(seq, False)[0]
        else:
            lp = compiled.exact_matcher().forward(seq, False)[-1]
        if lp == NEG_INF:
            raise ParseError(f"utterance {i} has zero probability under the lexicon")
        out.append(-lp / LN2)
    return out


def corpus_cost(lexicon: Lexicon, utterances, cost: str = VITERBI, channel=None) -> float:
    return float(sum(utterance_bits(lexicon, utterances, cost, channel)))


def initial_lexicon(alphabet, utterances, overhead_bits: float = 0.0) -> Lexicon:
    """Terminal-only lexicon with counts from symbol frequencies."""
    lex = Lexicon(alphabet, overhead_bits)
    counts = {i: 0.0 for i in range(len(alphabet))}
    for u in utterances:
        for t in _as_seq(u):
            counts[t] += 1.0
    if not any(counts.values()):
        raise LexiconError("corpus is empty")
    return renormalize(lex, counts)
