"""Three-state stochastic transducer from underlying phonemes to surface phones.

States are `start`, `inserted` and `mapped`.  From each state the
transducer makes an ordered cascade of decisions (insert? map? delete?
copy), which is what makes every state's outgoing mass sum to one:

    start:    insert  c_I p_I(s)                              -> inserted
              map     c_M (1-c_I) p_M(s|q,u)                  -> mapped
              delete  (1-c_I)(1-c_M) D                         -> start, advance
              copy    (1-c_I)(1-c_M)(1-D) p_C(s|q,u,n)         -> start, advance
    inserted: map     c_M p_M(s|q,u)                           -> mapped
              delete  (1-c_M) D                                -> start, advance
              copy    (1-c_M)(1-D) p_C(s|q,u,n)                -> start, advance
    mapped:   map     c_M p_M(s|q,u)                           -> mapped
              copy    (1-c_M) p_C(s|q,u,n)                     -> start, advance

with D = min(c_D, p_C(q|q,u,n) + p_C(n|q,u,n)).  q is the previous surface
phone, u the phoneme under the read head and n the phoneme after it.  The
machine halts once the read head passes the last phoneme.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .phonology import ChannelParams, PhoneModel

_logger = logging.getLogger(__name__)

START, INSERTED, MAPPED = "start", "inserted", "mapped"
TAGS = (START, INSERTED, MAPPED)
DEFAULT_PRUNE_BUDGET = 1e-4
DEFAULT_MAX_EXTRA = 2


class ChartError(RuntimeError):
    """No parse survives (sequence unparseable or pruning too aggressive)."""


@dataclass(frozen=True)
class TransducerState:
    tag: str
    read_pos: int
    last_phone: Optional[int] = None    # None: nothing written yet


@dataclass(frozen=True)
class Action:
    name: str            # insert | map | delete | copy
    phone: Optional[int]
    next_tag: str
    prob: float


class ChannelTables:
    """Dense probability tables for one phone model and parameter set.

    Index P in a context slot (q or n) means "absent".
    """

    def __init__(self, params: Optional[ChannelParams] = None,
                 symbols: Optional[Sequence[str]] = None,
                 model: Optional[PhoneModel] = None):
        self.model = model or PhoneModel(params, symbols)
        self.params = self.model.params
        P = self.P = self.model.P
        self.p_ins = self.model.p_insert_table
        self.p_map = self.model.p_map_table
        self.p_copy = self.model.p_copy_table
        # D[q, u, n] = min(c_D, p_C(q|q,u,n) + p_C(n|q,u,n)); absent contexts add nothing
        d = np.zeros((P + 1, P, P + 1))
        q_idx = np.arange(P)
        d[:P] += self.p_copy[q_idx, :, :, q_idx]
        d[:, :, :P] += self.p_copy[:, :, q_idx, q_idx]
        self.p_del = np.minimum(self.params.c_D, d)

    def q_index(self, q: Optional[int]) -> int:
        return self.P if q is None else q

    def step_distribution(self, state: TransducerState, u: int, n: Optional[int]
                          ) -> List[Action]:
        """All actions available from `state` reading phoneme u (next phoneme n)."""
        cI, cM = self.params.c_I, self.params.c_M
        q = self.q_index(state.last_phone)
        ni = self.q_index(n)
        D = float(self.p_del[q, u, ni])
        out: List[Action] = []
        if state.tag == START:
            for s in range(self.P):
                out.append(Action("insert", s, INSERTED, cI * self.p_ins[s]))
            go = (1 - cI) * (1 - cM)
            for s in range(self.P):
                out.append(Action("map", s, MAPPED, cM * (1 - cI) * self.p_map[q, u, s]))
            out.append(Action("delete", None, START, go * D))
            for s in range(self.P):
                out.append(Action("copy", s, START, go * (1 - D) * self.p_copy[q, u, ni, s]))
        elif state.tag == INSERTED:
            for s in range(self.P):
                out.append(Action("map", s, MAPPED, cM * self.p_map[q, u, s]))
            out.append(Action("delete", None, START, (1 - cM) * D))
            for s in range(self.P):
                out.append(Action("copy", s, START, (1 - cM) * (1 - D) * self.p_copy[q, u, ni, s]))
        elif state.tag == MAPPED:
            for s in range(self.P):
                out.append(Action("map", s, MAPPED, cM * self.p_map[q, u, s]))
            for s in range(self.P):
                out.append(Action("copy", s, START, (1 - cM) * self.p_copy[q, u, ni, s]))
        else:
            raise ValueError(f"unknown state tag {state.tag!r}")
        return out

    def outgoing_mass(self) -> np.ndarray:
        """Total action probability per state, shape (3, P+1, P, P+1) over [tag, q, u, n].

        Same sums as `step_distribution`, for every context at once.
        """
        cI, cM = self.params.c_I, self.params.c_M
        ins = self.p_ins.sum()
        mp = self.p_map.sum(axis=-1)[:, :, None]         # (P+1, P, 1)
        cp = self.p_copy.sum(axis=-1)                     # (P+1, P, P+1)
        D = self.p_del
        go = (1 - cI) * (1 - cM)
        start = cI * ins + cM * (1 - cI) * mp + go * D + go * (1 - D) * cp
        inserted = cM * mp + (1 - cM) * D + (1 - cM) * (1 - D) * cp
        mapped = cM * mp + (1 - cM) * cp
        return np.stack([start, inserted, np.broadcast_to(mapped, start.shape)])

    def _lattice(self, pi, phi, q0, n_end, semiring):
        """Transducer lattice over (tag, read position, output position)."""
        m, L = len(pi), len(phi)
        cI, cM = self.params.c_I, self.params.c_M
        go = (1 - cI) * (1 - cM)
        P = self.P
        cell = {t: np.zeros((m + 1, L + 1)) for t in TAGS}
        back: Dict[Tuple[str, int, int], Tuple[str, int, int, str, Optional[int]]] = {}
        cell[START][0, 0] = 1.0

        def push(tag, i, j, value, src, action, phone):
            if value <= 0.0:
                return
            if semiring == "sum":
                cell[tag][i, j] += value
            elif value > cell[tag][i, j]:
                cell[tag][i, j] = value
                back[(tag, i, j)] = src + (action, phone)

        for i in range(m):
            u = pi[i]
            n = pi[i + 1] if i + 1 < m else (P if n_end is None else n_end)
            for j in range(L + 1):
                q = (phi[j - 1] if j > 0 else (P if q0 is None else q0))
                D = self.p_del[q, u, n]
                for tag in TAGS:
                    v = cell[tag][i, j]
                    if v <= 0.0:
                        continue
                    src = (tag, i, j)
                    if tag == START:
                        f_map, f_go = cM * (1 - cI), go
                    else:
                        f_map, f_go = cM, 1 - cM
                    if j < L:
                        s = phi[j]
                        if tag == START:
                            push(INSERTED, i, j + 1, v * cI * self.p_ins[s], src, "insert", s)
                        push(MAPPED, i, j + 1, v * f_map * self.p_map[q, u, s], src, "map", s)
                    if tag != MAPPED:
                        push(START, i + 1, j, v * f_go * D, src, "delete", None)
                        if j < L:
                            push(START, i + 1, j + 1,
                                 v * f_go * (1 - D) * self.p_copy[q, u, n, phi[j]],
                                 src, "copy", phi[j])
                    elif j < L:
                        push(START, i + 1, j + 1, v * (1 - cM) * self.p_copy[q, u, n, phi[j]],
                             src, "copy", phi[j])
        return cell, back

    def phi_given_pi(self, pi: Sequence[int], phi: Sequence[int],
                     q0: Optional[int] = None, n_end: Optional[int] = None) -> float:
        """p(phi | pi) summed over all derivations."""
        if len(pi) == 0:
            raise ValueError("pi must be non-empty")
        cell, _ = self._lattice(list(pi), list(phi), q0, n_end, "sum")
        return float(cell[START][len(pi), len(phi)])

    def best_alignment(self, pi: Sequence[int], phi: Sequence[int]
                       ) -> Tuple[float, List[Tuple[str, Optional[int]]]]:
        """Most probable derivation as (probability, [(action, phone), ...])."""
        cell, back = self._lattice(list(pi), list(phi), None, None, "max")
        m, L = len(pi), len(phi)
        best = float(cell[START][m, L])
        if best <= 0.0:
            return 0.0, []
        path = []
        key = (START, m, L)
        while key in back:
            tag, i, j, action, phone = back[key]
            path.append((action, phone))
            key = (tag, i, j)
        path.reverse()
        return best, path

    def sample(self, pi: Sequence[int], rng: np.random.Generator,
               max_len: int = 100) -> Tuple[List[int], List[int], bool]:
        """Draw a phone string for `pi`.

        Returns (phones, source, truncated) where source[t] is the index into
        `pi` of the phoneme being read when phone t was written.
        """
        cI, cM = self.params.c_I, self.params.c_M
        P = self.P
        cdf_ins = np.cumsum(self.p_ins)
        phones: List[int] = []
        source: List[int] = []
        tag, i = START, 0
        m = len(pi)

        def draw(pvec):
            return int(min(np.searchsorted(np.cumsum(pvec), rng.random() * pvec.sum()), P - 1))

        while i < m:
            if len(phones) >= max_len:
                return phones, source, True
            q = phones[-1] if phones else P
            u = pi[i]
            n = pi[i + 1] if i + 1 < m else P
            D = self.p_del[q, u, n]
            r = rng.random()
            if tag == START and r < cI:
                s = int(min(np.searchsorted(cdf_ins, rng.random()), P - 1))
                phones.append(s)
                source.append(i)
                tag = INSERTED
                continue
            if tag == START:
                r = (r - cI) / (1 - cI)
            if r < cM:
                phones.append(draw(self.p_map[q, u]))
                source.append(i)
                tag = MAPPED
                continue
            r = (r - cM) / (1 - cM)
            if tag != MAPPED and r < D:
                i += 1
                tag = START
                continue
            phones.append(draw(self.p_copy[q, u, n]))
            source.append(i)
            i += 1
            tag = START
        return phones, source, False


@dataclass
class Channel:
    """Bundle of transducer tables plus chart search settings."""

    params: ChannelParams = field(default_factory=ChannelParams)
    prune_budget: float = DEFAULT_PRUNE_BUDGET
    max_extra: int = DEFAULT_MAX_EXTRA
    symbols: Optional[Sequence[str]] = None
    _tables: Optional[ChannelTables] = field(default=None, repr=False)

    @property
    def tables(self) -> ChannelTables:
        if self._tables is None:
            self._tables = ChannelTables(self.params, self.symbols)
        return self._tables

    def matcher(self, word_phon, logp):
        t = self.tables
        return kernels.NoisyMatcher(word_phon, np.asarray(logp, dtype=np.float64),
                                    t.p_ins, t.p_map, t.p_copy, t.p_del,
                                    t.params.c_I, t.params.c_M, self.max_extra)


def step_distribution(state: TransducerState, u: int, n: Optional[int],
                      params: Optional[ChannelParams] = None) -> List[Action]:
    return ChannelTables(params).step_distribution(state, u, n)


def phi_given_pi(pi: Sequence[int], phi: Sequence[int],
                 params: Optional[ChannelParams] = None) -> float:
    return ChannelTables(params).phi_given_pi(pi, phi)


def noisy_chart(lexicon, phones: Sequence[int], params: Optional[ChannelParams] = None,
                prune_budget: float = DEFAULT_PRUNE_BUDGET, channel: Optional[Channel] = None,
                audit: bool = False):
    """Multigram chart whose words match the phones through the transducer.

    Returns a multigram.Chart.  With `audit`, the chart also carries
    `unpruned_log_total`, the total from an exhaustive (budget 0) run.
    """
    from .multigram import Chart, CompiledLexicon

    if channel is None:
        channel = Channel(params or ChannelParams(), prune_budget)
    compiled = CompiledLexicon(lexicon)
    matcher = compiled.noisy_matcher(channel)
    spans: List[Tuple[int, int, int, float]] = []
    seq = np.asarray(phones, dtype=np.int32)
    res = matcher.chart(seq, prune_budget, None, False, spans)
    if res["log_z"] == -math.inf:
        raise ChartError("no surviving path; retry with a smaller prune budget"
                         if prune_budget > 0 else "phone sequence cannot be parsed")
    chart = Chart(np.array(res["log_alpha"]), np.array(res["log_beta"]),
                  [(k, l, compiled.ids[w], p) for k, l, w, p in spans])
    chart.edges = res["edges"]
    chart.pruned = res["pruned"]
    if audit:
        full = matcher.chart(seq, 0.0, None, False, None)
        chart.unpruned_log_total = full["log_z"]
    return chart
