"""Pure-Python chart kernels.

Reference implementation of the hot loops; `_ckernels` mirrors it line for
line.  All probabilities are handled in natural-log space or with a
running per-position scale so that long sequences cannot underflow.

Word indices here are dense positions in the compiled arrays, not lexicon
ids.  A word with log-probability -inf is never matched.
"""
from __future__ import annotations

import math

NEG_INF = -math.inf
TIE_TOL = 1e-12


def _better(new: float, old: float) -> bool:
    return new > old + TIE_TOL * max(1.0, abs(old))


class ExactMatcher:
    """Exact-surface multigram chart over a prefix trie of word surfaces."""

    def __init__(self, child_start, child_sym, child_node, node_word, logp):
        n_nodes = len(node_word)
        cs = [int(x) for x in child_start]
        sym = [int(x) for x in child_sym]
        node = [int(x) for x in child_node]
        self.children = [{sym[c]: node[c] for c in range(cs[i], cs[i + 1])}
                         for i in range(n_nodes)]
        self.node_word = [int(x) for x in node_word]
        self.logp = [float(x) for x in logp]

    def _edges(self, seq, k, proper):
        """(end, word) pairs for every word whose surface starts at k."""
        n = len(seq)
        children, node_word, logp = self.children, self.node_word, self.logp
        out = []
        node = 0
        for l in range(k, n):
            node = children[node].get(seq[l])
            if node is None:
                break
            w = node_word[node]
            if w >= 0 and logp[w] > NEG_INF and not (proper and k == 0 and l + 1 == n):
                out.append((l + 1, w))
        return out

    def forward(self, seq, proper=False):
        n = len(seq)
        logp = self.logp
        la = [NEG_INF] * (n + 1)
        acc = [0.0] * (n + 1)
        scale = [NEG_INF] * (n + 1)
        la[0] = 0.0
        for k in range(n):
            if k > 0:
                la[k] = scale[k] + math.log(acc[k]) if acc[k] > 0 else NEG_INF
            if la[k] == NEG_INF:
                continue
            for l, w in self._edges(seq, k, proper):
                v = la[k] + logp[w]
                if v > scale[l]:
                    acc[l] = (acc[l] * math.exp(scale[l] - v) if acc[l] > 0 else 0.0) + 1.0
                    scale[l] = v
                else:
                    acc[l] += math.exp(v - scale[l])
        if n > 0:
            la[n] = scale[n] + math.log(acc[n]) if acc[n] > 0 else NEG_INF
        return la

    def forward_backward(self, seq, counts=None, proper=False, spans=None):
        """Return ln p(seq); add span posteriors to `counts` (indexable by word).

        If `spans` is a list, (start, end, word, posterior) tuples are appended.
        """
        n = len(seq)
        la = self.forward(seq, proper)
        log_z = la[n]
        lb = [NEG_INF] * (n + 1)
        lb[n] = 0.0
        if log_z == NEG_INF:
            return NEG_INF, la, lb
        logp = self.logp
        for k in range(n - 1, -1, -1):
            edges = [(l, w, logp[w] + lb[l]) for l, w in self._edges(seq, k, proper)
                     if lb[l] > NEG_INF]
            if not edges:
                continue
            m = max(e[2] for e in edges)
            lb[k] = m + math.log(sum(math.exp(e[2] - m) for e in edges))
            if la[k] == NEG_INF:
                continue
            if counts is not None or spans is not None:
                for l, w, v in edges:
                    post = math.exp(la[k] + v - log_z)
                    if counts is not None:
                        counts[w] += post
                    if spans is not None:
                        spans.append((k, l, w, post))
        return log_z, la, lb

    def viterbi(self, seq, proper=False):
        """Best segmentation as (ln prob, [(start, end, word), ...]).

        Ties go to the longer final word, then the smaller word index.
        """
        n = len(seq)
        logp = self.logp
        best = [NEG_INF] * (n + 1)
        back = [None] * (n + 1)
        best[0] = 0.0
        for k in range(n):
            if best[k] == NEG_INF:
                continue
            for l, w in self._edges(seq, k, proper):
                v = best[k] + logp[w]
                if back[l] is None or _better(v, best[l]):
                    best[l] = v
                    back[l] = (k, w)
        if back[n] is None:
            return NEG_INF, []
        path = []
        l = n
        while l > 0:
            k, w = back[l]
            path.append((k, l, w))
            l = k
        path.reverse()
        return best[n], path

    def em_batch(self, seqs, counts, proper=False):
        """Sum of ln p over sequences; raises on the first unparseable one."""
        total = 0.0
        for i, seq in enumerate(seqs):
            log_z = self.forward_backward(seq, counts, proper)[0]
            if log_z == NEG_INF:
                raise ValueError(f"sequence {i} cannot be parsed")
            total += log_z
        return total


class NoisyMatcher:
    """Multigram chart where words match phones through the three-state transducer.

    Args:
        word_phon: per word, its underlying phoneme indices.
        logp: per word log-probability (natural log; -inf = disabled).
        p_ins, p_map, p_copy, p_del: transducer tables from the phone model
            (see channel.ChannelTables); context index P means "absent".
        c_I, c_M: insertion and mapping constants.
        max_extra: a word of m phonemes may cover at most m + max_extra phones.
    """

    def __init__(self, word_phon, logp, p_ins, p_map, p_copy, p_del, c_I, c_M, max_extra):
        self.word_phon = [tuple(int(x) for x in u) for u in word_phon]
        self.logp = [float(x) for x in logp]
        self.P = len(p_ins)
        self.p_ins = [float(x) for x in p_ins]
        self.p_map = p_map.tolist()
        self.p_copy = p_copy.tolist()
        self.p_del = p_del.tolist()
        self.c_I = float(c_I)
        self.c_M = float(c_M)
        self.max_extra = int(max_extra)
        active = [w for w, lp in enumerate(self.logp) if lp > NEG_INF and self.word_phon[w]]
        self.active = active
        self.first_keys = sorted({self.word_phon[w][0] for w in active})
        # probability that the next word starts with each key, for log_alpha
        mass = {}
        for w in active:
            n = self.word_phon[w][0]
            mass[n] = mass.get(n, 0.0) + math.exp(self.logp[w])
        tot = sum(mass.values())
        self.key_prior = [mass[n] / tot for n in self.first_keys] if tot > 0 else []
        # a boundary still owes at least the best word prior before it can go on
        self.best_logp = max((self.logp[w] for w in active), default=0.0)
        # pruned hypotheses at one position add up; split the budget between them
        self.margin = math.log(max(1, len(active)) * (2 * self.max_extra + 1))

    # -- per-word transducer lattice ------------------------------------------
    def _word_dp(self, phi, k, u, keys_at, ref, base, log_budget, stats):
        """Span scores for word u starting at phone k.

        Returns {span_length: [score per key]}, where keys are next-word
        first phonemes (or the end sentinel at the utterance end).
        """
        L = len(phi)
        m = len(u)
        S = min(m + self.max_extra, L - k)
        if S < 1:
            return {}
        P = self.P
        cI, cM = self.c_I, self.c_M
        p_ins, p_map, p_copy, p_del = self.p_ins, self.p_map, self.p_copy, self.p_del
        st = [[0.0] * (S + 1) for _ in range(m)]
        ins = [[0.0] * (S + 1) for _ in range(m)]
        mp = [[0.0] * (S + 1) for _ in range(m)]
        fin = {}
        st[0][0] = 1.0
        a_go = (1.0 - cI) * (1.0 - cM)
        for i in range(m):
            ui = u[i]
            last = i == m - 1
            nn = u[i + 1] if not last else -1
            row_alive = False
            for j in range(S + 1):
                a, b, c = st[i][j], ins[i][j], mp[i][j]
                tot = a + b + c
                if tot <= 0.0:
                    continue
                pos = k + j
                if log_budget > NEG_INF and ref[pos] > NEG_INF and pos < L:
                    if math.log(tot) + base < log_budget + ref[pos] + self.best_logp - self.margin:
                        st[i][j] = ins[i][j] = mp[i][j] = 0.0
                        stats[1] += 1
                        continue
                row_alive = True
                q = phi[pos - 1] if pos > 0 else P
                if j < S:
                    s = phi[pos]
                    if a > 0.0:
                        ins[i][j + 1] += a * cI * p_ins[s]
                    mp[i][j + 1] += (a * cM * (1.0 - cI) + (b + c) * cM) * p_map[q][ui][s]
                dl = a * a_go + b * (1.0 - cM)
                cl = c * (1.0 - cM)
                if not last:
                    d = p_del[q][ui][nn]
                    st[i + 1][j] += dl * d
                    if j < S:
                        st[i + 1][j + 1] += (dl * (1.0 - d) + cl) * p_copy[q][ui][nn][phi[pos]]
                else:
                    if j >= 1 and dl > 0.0:
                        keys = keys_at(k + j)
                        vec = fin.setdefault(j, [0.0] * len(keys))
                        dq = p_del[q][ui]
                        for t, n in enumerate(keys):
                            vec[t] += dl * dq[n]
                    if j < S:
                        s = phi[pos]
                        keys = keys_at(k + j + 1)
                        vec = fin.setdefault(j + 1, [0.0] * len(keys))
                        dq = p_del[q][ui]
                        cq = p_copy[q][ui]
                        for t, n in enumerate(keys):
                            vec[t] += (dl * (1.0 - dq[n]) + cl) * cq[n][s]
            if not row_alive:
                return {}
        return {j: v for j, v in fin.items() if any(x > 0.0 for x in v)}

    def chart(self, phi, prune_budget=0.0, counts=None, viterbi=False, spans=None):
        """Run the noisy chart over one phone sequence.

        Returns a dict with keys: log_z, log_alpha, log_beta, path (Viterbi
        [(start, end, word)] when requested), viterbi_log, edges, pruned.
        """
        L = len(phi)
        P = self.P
        END = P
        first_keys = self.first_keys
        key_pos = {n: t for t, n in enumerate(first_keys)}
        end_keys = [END]

        def keys_at(l):
            return end_keys if l == L else first_keys

        log_budget = math.log(prune_budget) if prune_budget > 0 else NEG_INF
        stats = [0, 0]
        # forward accumulators: per position a vector over keys plus a log scale
        acc = [None] * (L + 1)
        scale = [NEG_INF] * (L + 1)
        ref = [NEG_INF] * (L + 1)
        A = [None] * (L + 1)        # normalized vectors (max 1) once finalized
        ls = [NEG_INF] * (L + 1)
        A[0] = [1.0] * len(first_keys)
        ls[0] = 0.0
        ref[0] = 0.0
        edges = []   # (k, l, w, scores)
        for k in range(L):
            if k > 0:
                if acc[k] is None:
                    continue
                mx = max(acc[k])
                if mx <= 0.0:
                    continue
                A[k] = [x / mx for x in acc[k]]
                ls[k] = scale[k] + math.log(mx)
            Ak = A[k]
            for w in self.active:
                u = self.word_phon[w]
                fa = Ak[key_pos[u[0]]]
                if fa <= 0.0:
                    continue
                if log_budget > NEG_INF and math.log(fa) < log_budget - self.margin:
                    stats[1] += 1
                    continue
                base = ls[k] + math.log(fa) + self.logp[w]
                res = self._word_dp(phi, k, u, keys_at, ref, base, log_budget, stats)
                for j in sorted(res):
                    sc = res[j]
                    l = k + j
                    edges.append((k, l, w, sc))
                    stats[0] += 1
                    if acc[l] is None:
                        acc[l] = [x for x in sc]
                        scale[l] = base
                    elif base > scale[l]:
                        f = math.exp(scale[l] - base)
                        acc[l] = [x * f + y for x, y in zip(acc[l], sc)]
                        scale[l] = base
                    else:
                        f = math.exp(base - scale[l])
                        vec = acc[l]
                        for t in range(len(vec)):
                            vec[t] += f * sc[t]
                    ref[l] = scale[l] + math.log(max(acc[l])) if max(acc[l]) > 0 else NEG_INF
        if acc[L] is None or acc[L][0] <= 0.0:
            return {"log_z": NEG_INF, "edges": stats[0], "pruned": stats[1],
                    "log_alpha": None, "log_beta": None, "path": [], "viterbi_log": NEG_INF}
        log_z = scale[L] + math.log(acc[L][0])
        log_alpha = [NEG_INF] * (L + 1)
        for l in range(L):
            if A[l] is not None:
                mix = sum(a * b for a, b in zip(A[l], self.key_prior))
                if mix > 0.0:
                    log_alpha[l] = ls[l] + math.log(mix)
        log_alpha[L] = log_z
        out = {"log_z": log_z, "edges": stats[0], "pruned": stats[1],
               "log_alpha": log_alpha, "path": [], "viterbi_log": NEG_INF}

        # backward over the surviving edges, k descending
        nkeys = len(first_keys)
        Bacc = [None] * (L + 1)
        Bscale = [NEG_INF] * (L + 1)
        B = [None] * (L + 1)
        lsB = [NEG_INF] * (L + 1)
        B[L] = [1.0]
        lsB[L] = 0.0
        for e in range(len(edges) - 1, -1, -1):
            k, l, w, sc = edges[e]
            if B[l] is None:
                if Bacc[l] is None:
                    continue
                mx = max(Bacc[l])
                if mx <= 0.0:
                    continue
                B[l] = [x / mx for x in Bacc[l]]
                lsB[l] = Bscale[l] + math.log(mx)
            inner = sum(x * y for x, y in zip(sc, B[l]))
            if inner <= 0.0:
                continue
            lv = self.logp[w] + lsB[l] + math.log(inner)
            t = key_pos[self.word_phon[w][0]]
            if Bacc[k] is None:
                Bacc[k] = [0.0] * nkeys
                Bacc[k][t] = 1.0
                Bscale[k] = lv
            elif lv > Bscale[k]:
                f = math.exp(Bscale[k] - lv)
                Bacc[k] = [x * f for x in Bacc[k]]
                Bacc[k][t] += 1.0
                Bscale[k] = lv
            else:
                Bacc[k][t] += math.exp(lv - Bscale[k])
            if counts is not None or spans is not None:
                fa = A[k][t]
                post = math.exp(ls[k] + math.log(fa) + lv - log_z) if fa > 0 else 0.0
                if counts is not None:
                    counts[w] += post
                if spans is not None:
                    spans.append((k, l, w, post))
        log_beta = [NEG_INF] * (L + 1)
        log_beta[L] = 0.0
        for k in range(L):
            src = Bacc[k]
            if src is not None and max(src) > 0:
                log_beta[k] = Bscale[k] + math.log(sum(src))
        out["log_beta"] = log_beta

        if viterbi:
            V = [None] * (L + 1)
            bp = [None] * (L + 1)
            V[0] = [0.0] * nkeys
            for e, (k, l, w, sc) in enumerate(edges):
                if V[k] is None:
                    continue
                vk = V[k][key_pos[self.word_phon[w][0]]]
                if vk == NEG_INF:
                    continue
                base = vk + self.logp[w]
                if V[l] is None:
                    V[l] = [NEG_INF] * len(sc)
                    bp[l] = [-1] * len(sc)
                for t, x in enumerate(sc):
                    if x <= 0.0:
                        continue
                    v = base + math.log(x)
                    if bp[l][t] < 0 or _better(v, V[l][t]):
                        V[l][t] = v
                        bp[l][t] = e
            path = []
            l, t = L, 0
            while l > 0:
                e = bp[l][t]
                k, _, w, _ = edges[e]
                path.append((k, l, w))
                l, t = k, key_pos[self.word_phon[w][0]]
            path.reverse()
            out["path"] = path
            out["viterbi_log"] = V[L][0]
        return out
