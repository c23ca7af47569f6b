# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled chart kernels.

A line-for-line port of `_pykernels` with the same interfaces; see that
module for the algorithms.  Arithmetic is performed in the same order so
the two backends agree to rounding.
"""
import numpy as np

from libc.math cimport exp, log, fabs, INFINITY
from libc.stdlib cimport malloc, free
from libcpp.vector cimport vector

cdef double NEG_INF = -INFINITY
cdef double TIE_TOL = 1e-12


cdef inline bint _better(double new, double old) noexcept nogil:
    cdef double a = fabs(old)
    if a < 1.0:
        a = 1.0
    return new > old + TIE_TOL * a


cdef class ExactMatcher:
    """Exact-surface multigram chart over a prefix trie of word surfaces."""

    cdef int[::1] cs
    cdef int[::1] sym
    cdef int[::1] node
    cdef int[::1] nword
    cdef double[::1] lp
    cdef int depth

    def __init__(self, child_start, child_sym, child_node, node_word, logp):
        self.cs = np.ascontiguousarray(child_start, dtype=np.int32)
        self.sym = np.ascontiguousarray(child_sym, dtype=np.int32)
        self.node = np.ascontiguousarray(child_node, dtype=np.int32)
        self.nword = np.ascontiguousarray(node_word, dtype=np.int32)
        self.lp = np.ascontiguousarray(logp, dtype=np.float64)
        self.depth = self._depth()

    def _depth(self):
        # longest surface = depth of the trie
        cdef int best = 0
        stack = [(0, 0)]
        while stack:
            nd, d = stack.pop()
            if d > best:
                best = d
            for c in range(self.cs[nd], self.cs[nd + 1]):
                stack.append((self.node[c], d + 1))
        return best

    @property
    def logp(self):
        return list(self.lp)

    cdef inline int _child(self, int nd, int s) noexcept nogil:
        cdef int lo = self.cs[nd]
        cdef int hi = self.cs[nd + 1] - 1
        cdef int mid
        while lo <= hi:
            mid = (lo + hi) >> 1
            if self.sym[mid] == s:
                return self.node[mid]
            if self.sym[mid] < s:
                lo = mid + 1
            else:
                hi = mid - 1
        return -1

    cdef int _edges(self, const int* seq, int n, int k, bint proper,
                    int* outl, int* outw) noexcept nogil:
        cdef int cnt = 0
        cdef int nd = 0
        cdef int l, w
        for l in range(k, n):
            nd = self._child(nd, seq[l])
            if nd < 0:
                break
            w = self.nword[nd]
            if w >= 0 and self.lp[w] > NEG_INF and not (proper and k == 0 and l + 1 == n):
                outl[cnt] = l + 1
                outw[cnt] = w
                cnt += 1
        return cnt

    cdef void _forward(self, const int* seq, int n, bint proper, double* la,
                       double* acc, double* scale, int* bl, int* bw) noexcept nogil:
        cdef int k, i, ne, l, w
        cdef double v
        for k in range(n + 1):
            la[k] = NEG_INF
            acc[k] = 0.0
            scale[k] = NEG_INF
        la[0] = 0.0
        for k in range(n):
            if k > 0:
                la[k] = scale[k] + log(acc[k]) if acc[k] > 0 else NEG_INF
            if la[k] == NEG_INF:
                continue
            ne = self._edges(seq, n, k, proper, bl, bw)
            for i in range(ne):
                l = bl[i]
                w = bw[i]
                v = la[k] + self.lp[w]
                if v > scale[l]:
                    acc[l] = (acc[l] * exp(scale[l] - v) if acc[l] > 0 else 0.0) + 1.0
                    scale[l] = v
                else:
                    acc[l] += exp(v - scale[l])
        if n > 0:
            la[n] = scale[n] + log(acc[n]) if acc[n] > 0 else NEG_INF

    cdef double _fb(self, const int* seq, int n, bint proper, double* la, double* lb,
                    double* acc, double* scale, int* bl, int* bw, double* ev,
                    double* counts, int* sk, int* sl, int* sw, double* sp,
                    int* nspans) noexcept nogil:
        """Forward-backward core; spans are written when `sk` is not NULL."""
        cdef int k, i, ne, cnt, l, w
        cdef double log_z, m, tot, post
        self._forward(seq, n, proper, la, acc, scale, bl, bw)
        log_z = la[n]
        for k in range(n + 1):
            lb[k] = NEG_INF
        lb[n] = 0.0
        if log_z == NEG_INF:
            return NEG_INF
        for k in range(n - 1, -1, -1):
            ne = self._edges(seq, n, k, proper, bl, bw)
            cnt = 0
            for i in range(ne):
                if lb[bl[i]] > NEG_INF:
                    bl[cnt] = bl[i]
                    bw[cnt] = bw[i]
                    ev[cnt] = self.lp[bw[i]] + lb[bl[i]]
                    cnt += 1
            if cnt == 0:
                continue
            m = ev[0]
            for i in range(1, cnt):
                if ev[i] > m:
                    m = ev[i]
            tot = 0.0
            for i in range(cnt):
                tot += exp(ev[i] - m)
            lb[k] = m + log(tot)
            if la[k] == NEG_INF:
                continue
            if counts != NULL or sk != NULL:
                for i in range(cnt):
                    post = exp(la[k] + ev[i] - log_z)
                    if counts != NULL:
                        counts[bw[i]] += post
                    if sk != NULL:
                        sk[nspans[0]] = k
                        sl[nspans[0]] = bl[i]
                        sw[nspans[0]] = bw[i]
                        sp[nspans[0]] = post
                        nspans[0] += 1
        return log_z

    def forward(self, seq, bint proper=False):
        cdef int[::1] s = np.ascontiguousarray(seq, dtype=np.int32)
        cdef int n = s.shape[0]
        la = np.empty(n + 1)
        acc = np.empty(n + 1)
        scale = np.empty(n + 1)
        bl = np.empty(self.depth + 1, dtype=np.int32)
        bw = np.empty(self.depth + 1, dtype=np.int32)
        cdef double[::1] la_v = la, acc_v = acc, sc_v = scale
        cdef int[::1] bl_v = bl, bw_v = bw
        cdef const int* sp = &s[0] if n > 0 else NULL
        self._forward(sp, n, proper, &la_v[0], &acc_v[0], &sc_v[0], &bl_v[0], &bw_v[0])
        return la.tolist()

    def forward_backward(self, seq, counts=None, bint proper=False, spans=None):
        """Return ln p(seq); add span posteriors to `counts` (float64 array)."""
        cdef int[::1] s = np.ascontiguousarray(seq, dtype=np.int32)
        cdef int n = s.shape[0]
        cdef int d = self.depth + 1
        la = np.empty(n + 1)
        lb = np.empty(n + 1)
        work = np.empty(2 * (n + 1) + d)
        ibuf = np.empty(2 * d, dtype=np.int32)
        cdef double[::1] la_v = la, lb_v = lb, w_v = work
        cdef int[::1] i_v = ibuf
        cdef double[::1] c_v
        cdef double* cptr = NULL
        cdef int nsp = 0
        cdef int[::1] sk_v, sl_v, sw_v
        cdef double[::1] sp_v
        cdef int* skp = NULL
        cdef int* slp = NULL
        cdef int* swp = NULL
        cdef double* spp = NULL
        cdef int cap = max(1, n * d)
        cdef const int* seqp = &s[0] if n > 0 else NULL
        if counts is not None:
            c_v = counts
            cptr = &c_v[0]
        if spans is not None:
            sk_v = np.empty(cap, dtype=np.int32)
            sl_v = np.empty(cap, dtype=np.int32)
            sw_v = np.empty(cap, dtype=np.int32)
            sp_v = np.empty(cap)
            skp, slp, swp, spp = &sk_v[0], &sl_v[0], &sw_v[0], &sp_v[0]
        log_z = self._fb(seqp, n, proper, &la_v[0], &lb_v[0], &w_v[0], &w_v[n + 1],
                         &i_v[0], &i_v[d], &w_v[2 * (n + 1)], cptr, skp, slp, swp, spp, &nsp)
        if spans is not None:
            for i in range(nsp):
                spans.append((sk_v[i], sl_v[i], sw_v[i], sp_v[i]))
        return log_z, la.tolist(), lb.tolist()

    def viterbi(self, seq, bint proper=False):
        """Best segmentation as (ln prob, [(start, end, word), ...])."""
        cdef int[::1] s = np.ascontiguousarray(seq, dtype=np.int32)
        cdef int n = s.shape[0]
        cdef int d = self.depth + 1
        best_a = np.full(n + 1, NEG_INF)
        backk = np.full(n + 1, -1, dtype=np.int32)
        backw = np.full(n + 1, -1, dtype=np.int32)
        ibuf = np.empty(2 * d, dtype=np.int32)
        cdef double[::1] best = best_a
        cdef int[::1] bk = backk, bwv = backw, i_v = ibuf
        cdef int k, i, ne, l, w
        cdef double v
        cdef const int* seqp = &s[0] if n > 0 else NULL
        best[0] = 0.0
        with nogil:
            for k in range(n):
                if best[k] == NEG_INF:
                    continue
                ne = self._edges(seqp, n, k, proper, &i_v[0], &i_v[d])
                for i in range(ne):
                    l = i_v[i]
                    w = i_v[d + i]
                    v = best[k] + self.lp[w]
                    if bk[l] < 0 or _better(v, best[l]):
                        best[l] = v
                        bk[l] = k
                        bwv[l] = w
        if n == 0 or bk[n] < 0:
            return NEG_INF, []
        path = []
        l = n
        while l > 0:
            path.append((bk[l], l, bwv[l]))
            l = bk[l]
        path.reverse()
        return best[n], path

    def em_batch(self, seqs, counts, bint proper=False):
        """Sum of ln p over sequences; raises on the first unparseable one."""
        cdef double total = 0.0
        cdef double log_z
        cdef double[::1] c_v = counts
        cdef int[::1] s
        cdef int n, d = self.depth + 1
        cdef int maxn = max([len(x) for x in seqs], default=0)
        work = np.empty(4 * (maxn + 1) + d)
        ibuf = np.empty(2 * d, dtype=np.int32)
        cdef double[::1] w_v = work
        cdef int[::1] i_v = ibuf
        cdef int nsp = 0
        for idx, seq in enumerate(seqs):
            s = np.ascontiguousarray(seq, dtype=np.int32)
            n = s.shape[0]
            if n == 0:
                raise ValueError(f"sequence {idx} cannot be parsed")
            with nogil:
                log_z = self._fb(&s[0], n, proper, &w_v[0], &w_v[n + 1], &w_v[2 * (n + 1)],
                                 &w_v[3 * (n + 1)], &i_v[0], &i_v[d], &w_v[4 * (n + 1)],
                                 &c_v[0], NULL, NULL, NULL, NULL, &nsp)
            if log_z == NEG_INF:
                raise ValueError(f"sequence {idx} cannot be parsed")
            total += log_z
        return total


cdef class NoisyMatcher:
    """Multigram chart where words match phones through the three-state transducer."""

    cdef int W, P, nk, max_extra, maxm
    cdef int[::1] wstart
    cdef int[::1] wphon
    cdef double[::1] lp
    cdef double[::1] p_ins
    cdef double[::1] p_map
    cdef double[::1] p_copy
    cdef double[::1] p_del
    cdef double c_I, c_M
    cdef double best_logp, margin
    cdef int[::1] active
    cdef int[::1] keys
    cdef int[::1] key_pos
    cdef double[::1] key_prior
    cdef public list first_keys

    def __init__(self, word_phon, logp, p_ins, p_map, p_copy, p_del, c_I, c_M, max_extra):
        starts = [0]
        flat = []
        for u in word_phon:
            flat.extend(int(x) for x in u)
            starts.append(len(flat))
        self.W = len(starts) - 1
        self.wstart = np.array(starts, dtype=np.int32)
        self.wphon = np.array(flat if flat else [0], dtype=np.int32)
        self.lp = np.ascontiguousarray(logp, dtype=np.float64)
        self.P = len(p_ins)
        self.p_ins = np.ascontiguousarray(p_ins, dtype=np.float64)
        self.p_map = np.ascontiguousarray(p_map, dtype=np.float64).ravel()
        self.p_copy = np.ascontiguousarray(p_copy, dtype=np.float64).ravel()
        self.p_del = np.ascontiguousarray(p_del, dtype=np.float64).ravel()
        self.c_I = float(c_I)
        self.c_M = float(c_M)
        self.max_extra = int(max_extra)
        lp = list(self.lp)
        act = [w for w in range(self.W) if lp[w] > -np.inf and starts[w + 1] > starts[w]]
        self.active = np.array(act if act else [0], dtype=np.int32)[:len(act)]
        firsts = sorted({flat[starts[w]] for w in act})
        self.first_keys = firsts
        self.nk = len(firsts)
        self.keys = np.array(firsts + [0], dtype=np.int32)
        kp = np.full(self.P + 1, -1, dtype=np.int32)
        for t, n in enumerate(firsts):
            kp[n] = t
        self.key_pos = kp
        mass = {}
        for w in act:
            n = flat[starts[w]]
            mass[n] = mass.get(n, 0.0) + float(np.exp(lp[w]))
        tot = sum(mass.values())
        self.key_prior = np.array([mass[n] / tot for n in firsts] + [0.0]) if tot > 0 \
            else np.zeros(1)
        self.maxm = max([starts[w + 1] - starts[w] for w in range(self.W)], default=0)
        # a boundary still owes at least the best word prior before it can go on
        self.best_logp = max([lp[w] for w in act], default=0.0)
        # pruned hypotheses at one position add up; split the budget between them
        self.margin = float(np.log(max(1, len(act)) * (2 * self.max_extra + 1)))

    cdef inline int _first(self, int w) noexcept nogil:
        return self.wphon[self.wstart[w]]

    cdef bint _word_dp(self, const int* phi, int L, int k, int w, double base,
                       double log_budget, double* ref, double* st, double* ins, double* mp,
                       double* fin, char* finset, long* pruned) noexcept nogil:
        """Fill fin[j * nk + t] for span lengths j; returns False if nothing survives."""
        cdef int m = self.wstart[w + 1] - self.wstart[w]
        cdef const int* u = &self.wphon[self.wstart[w]]
        cdef int S = m + self.max_extra
        cdef int P = self.P, nk = self.nk
        cdef int P1 = P + 1
        cdef int i, j, t, pos, q, s, ui, nn, n, width, cols
        cdef bint last, row_alive
        cdef double a, b, c, tot, dl, cl, d
        cdef double cI = self.c_I, cM = self.c_M
        cdef double a_go = (1.0 - cI) * (1.0 - cM)
        cdef double* vec
        if L - k < S:
            S = L - k
        if S < 1:
            return False
        cols = S + 1
        for i in range(m * cols):
            st[i] = 0.0
            ins[i] = 0.0
            mp[i] = 0.0
        for j in range(self.maxm + self.max_extra + 2):
            finset[j] = 0
        st[0] = 1.0
        for i in range(m):
            ui = u[i]
            last = i == m - 1
            nn = u[i + 1] if not last else -1
            row_alive = False
            for j in range(S + 1):
                a = st[i * cols + j]
                b = ins[i * cols + j]
                c = mp[i * cols + j]
                tot = a + b + c
                if tot <= 0.0:
                    continue
                pos = k + j
                if log_budget > NEG_INF and ref[pos] > NEG_INF and pos < L:
                    if log(tot) + base < log_budget + ref[pos] + self.best_logp - self.margin:
                        st[i * cols + j] = 0.0
                        ins[i * cols + j] = 0.0
                        mp[i * cols + j] = 0.0
                        pruned[0] += 1
                        continue
                row_alive = True
                q = phi[pos - 1] if pos > 0 else P
                if j < S:
                    s = phi[pos]
                    if a > 0.0:
                        ins[i * cols + j + 1] += a * cI * self.p_ins[s]
                    mp[i * cols + j + 1] += (a * cM * (1.0 - cI) + (b + c) * cM) * \
                        self.p_map[(q * P + ui) * P + s]
                dl = a * a_go + b * (1.0 - cM)
                cl = c * (1.0 - cM)
                if not last:
                    d = self.p_del[(q * P + ui) * P1 + nn]
                    st[(i + 1) * cols + j] += dl * d
                    if j < S:
                        st[(i + 1) * cols + j + 1] += (dl * (1.0 - d) + cl) * \
                            self.p_copy[((q * P + ui) * P1 + nn) * P + phi[pos]]
                else:
                    if j >= 1 and dl > 0.0:
                        width = 1 if k + j == L else nk
                        vec = &fin[j * nk]
                        if not finset[j]:
                            for t in range(width):
                                vec[t] = 0.0
                            finset[j] = 1
                        for t in range(width):
                            n = P if k + j == L else self.keys[t]
                            vec[t] += dl * self.p_del[(q * P + ui) * P1 + n]
                    if j < S:
                        s = phi[pos]
                        width = 1 if k + j + 1 == L else nk
                        vec = &fin[(j + 1) * nk]
                        if not finset[j + 1]:
                            for t in range(width):
                                vec[t] = 0.0
                            finset[j + 1] = 1
                        for t in range(width):
                            n = P if k + j + 1 == L else self.keys[t]
                            vec[t] += (dl * (1.0 - self.p_del[(q * P + ui) * P1 + n]) + cl) * \
                                self.p_copy[((q * P + ui) * P1 + n) * P + s]
            if not row_alive:
                return False
        return True

    def chart(self, phi, prune_budget=0.0, counts=None, viterbi=False, spans=None):
        """Run the noisy chart over one phone sequence (see `_pykernels`)."""
        cdef int[::1] ph = np.ascontiguousarray(phi, dtype=np.int32)
        cdef int L = ph.shape[0]
        cdef int P = self.P
        cdef int nk = self.nk
        cdef int nkk = nk if nk > 0 else 1
        cdef double log_budget = log(prune_budget) if prune_budget > 0 else NEG_INF
        cdef long n_edges = 0, n_pruned = 0
        cdef int S_max = self.maxm + self.max_extra
        cdef int cols = S_max + 1
        acc_a = np.zeros((L + 1) * nkk)
        A_a = np.zeros((L + 1) * nkk)
        vecs = np.full(4 * (L + 1), NEG_INF)
        flags = np.zeros(2 * (L + 1), dtype=np.int8)
        scratch = np.zeros(3 * max(1, self.maxm * cols) + (S_max + 2) * nkk)
        finset_a = np.zeros(S_max + 2, dtype=np.int8)
        cdef double[::1] acc = acc_a, A = A_a, vv = vecs, scr = scratch
        cdef signed char[::1] fl = flags, fs = finset_a
        cdef double* scale = &vv[0]
        cdef double* ref = &vv[L + 1]
        cdef double* ls = &vv[2 * (L + 1)]
        cdef signed char* has_acc = &fl[0]
        cdef signed char* has_A = &fl[L + 1]
        cdef double* st = &scr[0]
        cdef double* insb = &scr[max(1, self.maxm * cols)]
        cdef double* mpb = &scr[2 * max(1, self.maxm * cols)]
        cdef double* fin = &scr[3 * max(1, self.maxm * cols)]
        cdef vector[int] ek, el, ew, eoff
        cdef vector[double] esc
        cdef int k, i, t, j, l, w, width, fk, e
        cdef double mx, fa, base, f, x
        cdef const int* phip = &ph[0] if L > 0 else NULL
        cdef int n_active = self.active.shape[0]

        for t in range(nk):
            A[t] = 1.0
        has_A[0] = 1
        ls[0] = 0.0
        ref[0] = 0.0
        with nogil:
            for k in range(L):
                if k > 0:
                    if not has_acc[k]:
                        continue
                    mx = acc[k * nkk]
                    for t in range(1, nk):
                        if acc[k * nkk + t] > mx:
                            mx = acc[k * nkk + t]
                    if mx <= 0.0:
                        continue
                    for t in range(nk):
                        A[k * nkk + t] = acc[k * nkk + t] / mx
                    has_A[k] = 1
                    ls[k] = scale[k] + log(mx)
                for i in range(n_active):
                    w = self.active[i]
                    fa = A[k * nkk + self.key_pos[self._first(w)]]
                    if fa <= 0.0:
                        continue
                    if log_budget > NEG_INF and log(fa) < log_budget - self.margin:
                        n_pruned += 1
                        continue
                    base = ls[k] + log(fa) + self.lp[w]
                    if not self._word_dp(phip, L, k, w, base, log_budget, ref, st, insb, mpb,
                                         fin, <char*>&fs[0], &n_pruned):
                        continue
                    for j in range(1, S_max + 2):
                        if not fs[j]:
                            continue
                        l = k + j
                        width = 1 if l == L else nk
                        x = 0.0
                        for t in range(width):
                            if fin[j * nkk + t] > 0.0:
                                x = 1.0
                        if x == 0.0:
                            continue
                        ek.push_back(k)
                        el.push_back(l)
                        ew.push_back(w)
                        eoff.push_back(<int>esc.size())
                        for t in range(width):
                            esc.push_back(fin[j * nkk + t])
                        n_edges += 1
                        if not has_acc[l]:
                            for t in range(width):
                                acc[l * nkk + t] = fin[j * nkk + t]
                            has_acc[l] = 1
                            scale[l] = base
                        elif base > scale[l]:
                            f = exp(scale[l] - base)
                            for t in range(width):
                                acc[l * nkk + t] = acc[l * nkk + t] * f + fin[j * nkk + t]
                            scale[l] = base
                        else:
                            f = exp(base - scale[l])
                            for t in range(width):
                                acc[l * nkk + t] += f * fin[j * nkk + t]
                        mx = acc[l * nkk]
                        for t in range(1, width):
                            if acc[l * nkk + t] > mx:
                                mx = acc[l * nkk + t]
                        ref[l] = scale[l] + log(mx) if mx > 0 else NEG_INF

        if not has_acc[L] or acc[L * nkk] <= 0.0:
            return {"log_z": NEG_INF, "edges": n_edges, "pruned": n_pruned,
                    "log_alpha": None, "log_beta": None, "path": [], "viterbi_log": NEG_INF}
        cdef double log_z = scale[L] + log(acc[L * nkk])
        log_alpha = [NEG_INF] * (L + 1)
        for l in range(L):
            if has_A[l]:
                x = 0.0
                for t in range(nk):
                    x += A[l * nkk + t] * self.key_prior[t]
                if x > 0.0:
                    log_alpha[l] = ls[l] + log(x)
        log_alpha[L] = log_z
        out = {"log_z": log_z, "edges": n_edges, "pruned": n_pruned,
               "log_alpha": log_alpha, "path": [], "viterbi_log": NEG_INF}

        # backward over the surviving edges, k descending
        Bacc_a = np.zeros((L + 1) * nkk)
        B_a = np.zeros((L + 1) * nkk)
        bvec = np.full(2 * (L + 1), NEG_INF)
        bfl = np.zeros(2 * (L + 1), dtype=np.int8)
        cdef double[::1] Bacc = Bacc_a, B = B_a, bv = bvec
        cdef signed char[::1] bf = bfl
        cdef double* Bscale = &bv[0]
        cdef double* lsB = &bv[L + 1]
        cdef signed char* has_Bacc = &bf[0]
        cdef signed char* has_B = &bf[L + 1]
        cdef double[::1] c_v
        cdef double* cptr = NULL
        cdef bint want_spans = spans is not None
        cdef double inner, lv, post
        cdef long ne_total = <long>ek.size()
        cdef long ei
        if counts is not None:
            c_v = counts
            cptr = &c_v[0]
        B[L * nkk] = 1.0
        has_B[L] = 1
        lsB[L] = 0.0
        for ei in range(ne_total - 1, -1, -1):
            k = ek[ei]
            l = el[ei]
            w = ew[ei]
            width = 1 if l == L else nk
            if not has_B[l]:
                if not has_Bacc[l]:
                    continue
                mx = Bacc[l * nkk]
                for t in range(1, nk):
                    if Bacc[l * nkk + t] > mx:
                        mx = Bacc[l * nkk + t]
                if mx <= 0.0:
                    continue
                for t in range(nk):
                    B[l * nkk + t] = Bacc[l * nkk + t] / mx
                has_B[l] = 1
                lsB[l] = Bscale[l] + log(mx)
            inner = 0.0
            for t in range(width):
                inner += esc[eoff[ei] + t] * B[l * nkk + t]
            if inner <= 0.0:
                continue
            lv = self.lp[w] + lsB[l] + log(inner)
            fk = self.key_pos[self._first(w)]
            if not has_Bacc[k]:
                for t in range(nk):
                    Bacc[k * nkk + t] = 0.0
                Bacc[k * nkk + fk] = 1.0
                has_Bacc[k] = 1
                Bscale[k] = lv
            elif lv > Bscale[k]:
                f = exp(Bscale[k] - lv)
                for t in range(nk):
                    Bacc[k * nkk + t] = Bacc[k * nkk + t] * f
                Bacc[k * nkk + fk] += 1.0
                Bscale[k] = lv
            else:
                Bacc[k * nkk + fk] += exp(lv - Bscale[k])
            if cptr != NULL or want_spans:
                fa = A[k * nkk + fk]
                post = exp(ls[k] + log(fa) + lv - log_z) if fa > 0 else 0.0
                if cptr != NULL:
                    cptr[w] += post
                if want_spans:
                    spans.append((k, l, w, post))
        log_beta = [NEG_INF] * (L + 1)
        log_beta[L] = 0.0
        for k in range(L):
            if has_Bacc[k]:
                mx = Bacc[k * nkk]
                x = Bacc[k * nkk]
                for t in range(1, nk):
                    if Bacc[k * nkk + t] > mx:
                        mx = Bacc[k * nkk + t]
                    x += Bacc[k * nkk + t]
                if mx > 0:
                    log_beta[k] = Bscale[k] + log(x)
        out["log_beta"] = log_beta

        if viterbi:
            V_a = np.full((L + 1) * nkk, NEG_INF)
            bp_a = np.full((L + 1) * nkk, -1, dtype=np.int64)
            hv_a = np.zeros(L + 1, dtype=np.int8)
            out["path"], out["viterbi_log"] = self._viterbi(
                L, nk, nkk, V_a, bp_a, hv_a, ek, el, ew, eoff, esc)
        return out

    cdef tuple _viterbi(self, int L, int nk, int nkk, double[::1] V, long[::1] bp,
                        signed char[::1] hv, vector[int]& ek, vector[int]& el,
                        vector[int]& ew, vector[int]& eoff, vector[double]& esc):
        cdef long ei, ne_total = <long>ek.size()
        cdef int k, l, w, t, width
        cdef double vk, base, x, v
        for t in range(nk):
            V[t] = 0.0
        hv[0] = 1
        for ei in range(ne_total):
            k = ek[ei]
            l = el[ei]
            w = ew[ei]
            if not hv[k]:
                continue
            vk = V[k * nkk + self.key_pos[self._first(w)]]
            if vk == NEG_INF:
                continue
            base = vk + self.lp[w]
            width = 1 if l == L else nk
            if not hv[l]:
                hv[l] = 1
            for t in range(width):
                x = esc[eoff[ei] + t]
                if x <= 0.0:
                    continue
                v = base + log(x)
                if bp[l * nkk + t] < 0 or _better(v, V[l * nkk + t]):
                    V[l * nkk + t] = v
                    bp[l * nkk + t] = ei
        path = []
        l, t = L, 0
        while l > 0:
            ei = bp[l * nkk + t]
            k = ek[ei]
            w = ew[ei]
            path.append((k, l, w))
            l, t = k, self.key_pos[self._first(w)]
        path.reverse()
        return path, V[L * nkk]
