"""Hot inner-loop kernels.

Every function here is written in numba-compatible Python and compiled with
``@maybe_njit`` when the numba backend is active (see :mod:`ratioproc.backend`).
The same source runs under plain CPython when ``RATIOPROC_NUMBA=0``; the large
problem sizes in the scaling studies are only practical on the numba path.

Kernels return plain scalars/arrays; witness assembly and input validation
live in :mod:`ratioproc.sim`.
"""

from __future__ import annotations

import numpy as np

from .backend import maybe_njit

NEG_INF = -1.0e300


# ---------------------------------------------------------------------------
# Fenwick tree over 1-based ranks (used by the box sweep)
# ---------------------------------------------------------------------------


@maybe_njit
def _fen_insert(tree, rank):
    i = rank
    n = tree.shape[0] - 1
    while i <= n:
        tree[i] += 1
        i += i & (-i)


@maybe_njit
def _fen_prefix(tree, rank):
    s = 0
    i = rank
    while i > 0:
        s += tree[i]
        i -= i & (-i)
    return s


@maybe_njit
def _fen_select(tree, m, log2n):
    """Smallest 1-based rank whose prefix sum reaches ``m``."""
    pos = 0
    rem = m
    bit = 1 << log2n
    n = tree.shape[0] - 1
    while bit > 0:
        nxt = pos + bit
        if nxt <= n and tree[nxt] < rem:
            pos = nxt
            rem -= tree[nxt]
        bit >>= 1
    return pos + 1


# ---------------------------------------------------------------------------
# Exact sup over intervals, weight == 1 on the slice  (lengths in (lo, hi])
# ---------------------------------------------------------------------------


@maybe_njit
def intervals_scan(xs, lo, hi):
    """Exact sup of ``|P_n[a,b] - (b-a)|`` over intervals with length in (lo, hi].

    ``xs`` must be sorted ascending inside [0, 1].  Returns
    ``(value, side, a, b, eff_len, count)`` where ``side`` is +1 for the
    ``P_n - P`` branch and -1 for ``P - P_n``; ``eff_len`` is the length at
    which the sup value is realized (a limit when it saturates a constraint).

    Candidate families (each branch is monotone in the interval length at a
    fixed point count, so extremes sit at point-anchored or length-saturated
    intervals):
      * closed point pairs [x_i, x_j], length <= hi, length clamped up to lo,
      * open point pairs (x_i, x_j) realizing minimal counts,
      * length-saturated windows (len = hi or -> lo+) anchored at a sample
        point or a domain edge.
    """
    n = xs.shape[0]
    inv_n = 1.0 / n

    best = NEG_INF
    b_side = 1
    b_a = 0.0
    b_b = 0.0
    b_len = 0.0
    b_count = 0

    # --- positive branch, pair candidates -------------------------------
    # branch A: x_i >= x_j - lo     value = (j-i+1)/n - lo
    # branch B: x_i in [x_j-hi, x_j-lo)   value = P_j - Q_i
    dq = np.empty(n, np.int64)  # monotone deque of indices, increasing Q
    head = 0
    tail = 0
    iB = 0  # first index with x_i >= x_j - hi
    iA = 0  # first index with x_i >= x_j - lo
    for j in range(n):
        lo_edge = xs[j] - hi
        hi_edge = xs[j] - lo
        while iA < n and xs[iA] < hi_edge:
            # index leaves branch A's complement -> becomes eligible for B
            q = iA * inv_n - xs[iA]
            while tail > head and (dq[tail - 1] * inv_n - xs[dq[tail - 1]]) >= q:
                tail -= 1
            dq[tail] = iA
            tail += 1
            iA += 1
        while iB < iA and xs[iB] < lo_edge:
            iB += 1
        while tail > head and dq[head] < iB:
            head += 1
        # branch A (length clamped to lo; limit value when b-a < lo)
        if iA <= j:
            val = (j - iA + 1) * inv_n - lo
            if val > best:
                best = val
                b_side = 1
                b_a = xs[iA]
                b_b = xs[j]
                b_len = lo if lo > xs[j] - xs[iA] else xs[j] - xs[iA]
                b_count = j - iA + 1
        # branch B (exact closed pair)
        if tail > head:
            i = dq[head]
            val = ((j + 1) * inv_n - xs[j]) - (i * inv_n - xs[i])
            if val > best:
                best = val
                b_side = 1
                b_a = xs[i]
                b_b = xs[j]
                b_len = xs[j] - xs[i]
                b_count = j - i + 1

    # --- negative branch, open pair candidates --------------------------
    # value = (x_j - x_i) - (j-1-i)/n over x_i in [x_j-hi, x_j-lo)
    head = 0
    tail = 0
    iB = 0
    iA = 0
    for j in range(n):
        lo_edge = xs[j] - hi
        hi_edge = xs[j] - lo
        while iA < n and xs[iA] < hi_edge:
            s = xs[iA] - iA * inv_n
            while tail > head and (xs[dq[tail - 1]] - dq[tail - 1] * inv_n) >= s:
                tail -= 1
            dq[tail] = iA
            tail += 1
            iA += 1
        while iB < iA and xs[iB] < lo_edge:
            iB += 1
        while tail > head and dq[head] < iB:
            head += 1
        if tail > head:
            i = dq[head]
            val = (xs[j] - (j - 1) * inv_n) - (xs[i] - i * inv_n)
            if val > best:
                best = val
                b_side = -1
                b_a = xs[i]
                b_b = xs[j]
                b_len = xs[j] - xs[i]
                b_count = j - 1 - i

    # --- negative branch, domain-edge to point-limit intervals -----------
    # [0, x_j): length x_j, count j;  (x_i, 1]: length 1 - x_i, count n-1-i
    for j in range(n):
        ln = xs[j]
        if lo < ln <= hi:
            val = ln - j * inv_n
            if val > best:
                best = val
                b_side = -1
                b_a = 0.0
                b_b = ln
                b_len = ln
                b_count = j
        ln = 1.0 - xs[j]
        if lo < ln <= hi:
            c = n - 1 - j
            val = ln - c * inv_n
            if val > best:
                best = val
                b_side = -1
                b_a = xs[j]
                b_b = 1.0
                b_len = ln
                b_count = c

    # --- negative branch, length-saturated windows ----------------------
    # anchored at sample points (open at the anchor) and at domain edges
    for pass_len in range(2):
        ln = hi if pass_len == 0 else lo
        if ln <= 0.0:
            continue
        # domain edges: [0, ln] and [1-ln, 1]
        c_left = np.searchsorted(xs, ln, side="left")
        val = ln - c_left * inv_n
        if val > best:
            best = val
            b_side = -1
            b_a = 0.0
            b_b = ln
            b_len = ln
            b_count = c_left
        c_right = n - np.searchsorted(xs, 1.0 - ln, side="right")
        val = ln - c_right * inv_n
        if val > best:
            best = val
            b_side = -1
            b_a = 1.0 - ln
            b_b = 1.0
            b_len = ln
            b_count = c_right
        for i in range(n):
            # window (x_i, x_i + ln): excludes the anchor point
            top = xs[i] + ln
            if top <= 1.0:
                c = np.searchsorted(xs, top, side="left") - (i + 1)
                val = ln - c * inv_n
                if val > best:
                    best = val
                    b_side = -1
                    b_a = xs[i]
                    b_b = top
                    b_len = ln
                    b_count = c
            bot = xs[i] - ln
            if bot >= 0.0:
                c = i - np.searchsorted(xs, bot, side="right")
                val = ln - c * inv_n
                if val > best:
                    best = val
                    b_side = -1
                    b_a = bot
                    b_b = xs[i]
                    b_len = ln
                    b_count = c

    return best, b_side, b_a, b_b, b_len, b_count


# ---------------------------------------------------------------------------
# d = 2 box c.d.f. sweep
# ---------------------------------------------------------------------------


@maybe_njit
def _build_ladder(n, lpo, full):
    """Ascending distinct count levels: 1, 2, ... n for the full scan, else
    round(2^(t/lpo)) -- nested along doublings of lpo."""
    if full:
        out = np.empty(n, np.int64)
        for i in range(n):
            out[i] = i + 1
        return out
    tmp = np.empty(4 * lpo * 64, np.int64)
    cnt = 0
    t = 0
    prev = 0
    while True:
        lvl = int(round(2.0 ** (t / lpo)))
        if lvl <= prev:
            lvl = prev + 1
        if lvl > n:
            break
        tmp[cnt] = lvl
        cnt += 1
        prev = lvl
        t += 1
    return tmp[:cnt].copy()


@maybe_njit
def box2_sweep(xs, yranks, ys_all, r2, d2, m_exp, lpo, full):
    """Sup of ``|F_n(x) - V| / V**m_exp`` over ``V = x1*x2 in (r2, d2]``.

    ``xs``: x-coordinates in ascending order; ``yranks``: 1-based global
    y-rank of the point at each x position; ``ys_all``: all y-coordinates
    sorted ascending.

    Column sweep: after inserting the first ``k`` points (x <= xs[k-1]) the
    count function of ``y`` is the rank among inserted y's.  Per column,
    positive-branch candidates are the corners ``(x, y_(m))`` and the
    within-cell surface extremes at ``V = r2+`` and ``V = d2``; negative
    branch candidates are the upper cell limits ``(x_next-, y_(c+1)-)``
    capped at ``V = d2``.

    ``full=True`` scans every count level (exact); otherwise levels follow a
    geometric ladder with ``lpo`` levels per octave (certified lower bound,
    nondecreasing in ``lpo`` along doublings).

    Returns ``(value, side, x, y, V, count)``.
    """
    n = xs.shape[0]
    inv_n = 1.0 / n
    tree = np.zeros(n + 1, np.int64)
    log2n = 0
    while (1 << (log2n + 1)) <= n:
        log2n += 1

    best = NEG_INF
    b_side = 1
    b_x = 0.0
    b_y = 0.0
    b_v = 0.0
    b_c = 0

    # region left of the first sample point: count 0
    v_lim = xs[0] * 1.0 if n > 0 else 1.0
    v_eval = v_lim if v_lim < d2 else d2
    if v_eval > r2:
        val = v_eval * v_eval ** (-m_exp)
        if val > best:
            best = val
            b_side = -1
            b_x = xs[0]
            b_y = 1.0
            b_v = v_eval
            b_c = 0

    ladder = _build_ladder(n, lpo, full)
    for i in range(n):
        _fen_insert(tree, yranks[i])
        k = i + 1
        x = xs[i]
        xn = xs[i + 1] if i + 1 < n else 1.0

        # positive branch ladder over count levels
        for li in range(ladder.shape[0]):
            lvl = ladder[li]
            if lvl > k:
                break
            rank = _fen_select(tree, lvl, log2n)
            y_m = ys_all[rank - 1]
            v = x * y_m
            if v > d2:
                break
            if v > r2:
                val = (lvl * inv_n - v) * v ** (-m_exp)
                if val > best:
                    best = val
                    b_side = 1
                    b_x = x
                    b_y = y_m
                    b_v = v
                    b_c = lvl

        # positive-branch surface extremes for this column
        y_r = r2 / x
        if y_r < 1.0:
            c = _fen_prefix(tree, np.searchsorted(ys_all, y_r, side="right"))
            val = (c * inv_n - r2) * r2 ** (-m_exp)
            if val > best:
                best = val
                b_side = 1
                b_x = x
                b_y = y_r
                b_v = r2
                b_c = c
        y_d = d2 / x
        if y_d < 1.0:
            c = _fen_prefix(tree, np.searchsorted(ys_all, y_d, side="right"))
            val = (c * inv_n - d2) * d2 ** (-m_exp)
            if val > best:
                best = val
                b_side = 1
                b_x = x
                b_y = y_d
                b_v = d2
                b_c = c

        # negative branch ladder (count c, top of the cell at y_(c+1));
        # once the cell top clears d2 the value only worsens with c -> break
        for li in range(ladder.shape[0] + 1):
            c_lvl = 0 if li == 0 else ladder[li - 1]
            if c_lvl > k:
                break
            if c_lvl < k:
                rank = _fen_select(tree, c_lvl + 1, log2n)
                y_top = ys_all[rank - 1]
            else:
                y_top = 1.0
            v_lim = xn * y_top
            v_eval = v_lim if v_lim < d2 else d2
            if v_eval > r2:
                val = (v_eval - c_lvl * inv_n) * v_eval ** (-m_exp)
                if val > best:
                    best = val
                    b_side = -1
                    b_x = xn
                    b_y = y_top
                    b_v = v_eval
                    b_c = c_lvl
                if m_exp > 1.0:
                    # interior critical point of (V - c/n) * V^{-m}
                    v_star = m_exp * (c_lvl * inv_n) / (m_exp - 1.0)
                    if r2 < v_star < v_eval:
                        val = (v_star - c_lvl * inv_n) * v_star ** (-m_exp)
                        if val > best:
                            best = val
                            b_side = -1
                            b_x = xn
                            b_y = y_top
                            b_v = v_star
                            b_c = c_lvl
            if v_lim >= d2 and m_exp <= 1.0:
                break
        # the all-points cell (count k, top of the domain)
        v_lim = xn * 1.0
        v_eval = v_lim if v_lim < d2 else d2
        if v_eval > r2:
            val = (v_eval - k * inv_n) * v_eval ** (-m_exp)
            if val > best:
                best = val
                b_side = -1
                b_x = xn
                b_y = 1.0
                b_v = v_eval
                b_c = k

        # negative-branch d2-surface extreme at the right cell edge
        y_dn = d2 / xn
        if y_dn < 1.0:
            c = _fen_prefix(tree, np.searchsorted(ys_all, y_dn, side="left"))
            val = (d2 - c * inv_n) * d2 ** (-m_exp)
            if val > best:
                best = val
                b_side = -1
                b_x = xn
                b_y = y_dn
                b_v = d2
                b_c = c

    return best, b_side, b_x, b_y, b_v, b_c


# ---------------------------------------------------------------------------
# Pool-adjacent-violators least squares
# ---------------------------------------------------------------------------


@maybe_njit
def pava(y, w):
    """Weighted least-squares nondecreasing fit of ``y`` (in index order)."""
    n = y.shape[0]
    sol = np.empty(n, np.float64)
    wts = np.empty(n, np.float64)
    start = np.empty(n, np.int64)
    nb = 0
    for i in range(n):
        sol_val = y[i]
        w_val = w[i]
        st = i
        while nb > 0 and sol[nb - 1] >= sol_val:
            sol_val = (sol[nb - 1] * wts[nb - 1] + sol_val * w_val) / (wts[nb - 1] + w_val)
            w_val = wts[nb - 1] + w_val
            st = start[nb - 1]
            nb -= 1
        sol[nb] = sol_val
        wts[nb] = w_val
        start[nb] = st
        nb += 1
    out = np.empty(n, np.float64)
    for b in range(nb):
        end = start[b + 1] if b + 1 < nb else n
        for i in range(start[b], end):
            out[i] = sol[b]
    return out
