"""Dense bounded-variable simplex with Bland's anti-cycling rule as fallback.

Solves::

    max / min  c @ x
    s.t.       lo_i <= A_i @ x <= hi_i
               l_j  <= x_j     <= u_j

Each two-sided row gets an activity variable ``w_i = A_i @ x`` with bounds
``[lo_i, hi_i]`` so the equality system is ``A x - w = 0``; bounds are
handled by the ratio test (bound flips), so the basis is only ``m x m``.

Decoy LPs mix Poisson weights spanning dozens of orders of magnitude, so
rows and columns are equilibrated first, and the basis is refactorised at
every iteration instead of updating a tableau.
"""
from __future__ import annotations

import numpy as np

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-9
COST_TOL = 1e-12
BLAND_AFTER = 8


class LPError(RuntimeError):
    pass


class InfeasibleLPError(LPError):
    pass


class UnboundedLPError(LPError):
    """Cannot happen for box-bounded problems; signals an internal fault."""


def _basic_values(M, basis, x, B_inv=None):
    nb = np.ones(M.shape[1], dtype=bool)
    nb[basis] = False
    rhs = -M[:, nb] @ x[nb]
    return B_inv @ rhs if B_inv is not None else np.linalg.solve(M[:, basis], rhs)


def _simplex(M, x, basis, at_upper, lb, ub, cost, max_iter):
    m, ntot = M.shape
    movable_all = ub - lb > 0
    degenerate_run = 0
    for _ in range(max_iter):
        # The basis is tiny (one row per intensity), so an explicit inverse
        # per iteration is cheaper than three separate solves.
        B_inv = np.linalg.inv(M[:, basis])
        x[basis] = _basic_values(M, basis, x, B_inv)
        d = cost - (cost[basis] @ B_inv) @ M
        nonbasic = movable_all.copy()
        nonbasic[basis] = False
        cand = nonbasic & np.where(at_upper, d < -COST_TOL, d > COST_TOL)
        idx = np.flatnonzero(cand)
        if idx.size == 0:
            return
        # Dantzig pricing until pivots stall, then Bland (smallest index) to
        # rule out cycling.
        bland = degenerate_run >= BLAND_AFTER
        j = idx[0] if bland else idx[np.argmax(np.abs(d[idx]))]
        dirn = -1.0 if at_upper[j] else 1.0
        alpha = dirn * (B_inv @ M[:, j])
        xb = x[basis]
        t_best = ub[j] - lb[j]
        leave = -1
        leave_to_upper = False
        tol = PIVOT_TOL * max(1.0, float(np.abs(alpha).max(initial=0.0)))
        dec = alpha > tol
        inc = alpha < -tol
        lim = np.full(m, np.inf)
        lim[dec] = (xb[dec] - lb[basis][dec]) / alpha[dec]
        lim[inc] = (ub[basis][inc] - xb[inc]) / (-alpha[inc])
        lim = np.maximum(lim, 0.0)
        if m:
            t_rows = lim.min()
            if np.isfinite(t_rows) and (t_rows < t_best or not np.isfinite(t_best)):
                tied = np.flatnonzero(lim <= t_rows + 1e-15)
                # Ties: smallest variable index leaves (Bland) or largest pivot.
                r = tied[np.argmin(basis[tied])] if bland else tied[np.argmax(np.abs(alpha[tied]))]
                t_best = t_rows
                leave = r
                leave_to_upper = bool(inc[r])
        if not np.isfinite(t_best):
            raise UnboundedLPError("objective unbounded")
        degenerate_run = degenerate_run + 1 if t_best <= 1e-15 else 0
        if leave < 0:
            at_upper[j] = not at_upper[j]
            x[j] = ub[j] if at_upper[j] else lb[j]
            continue
        x[j] = x[j] + dirn * t_best
        old = basis[leave]
        x[old] = ub[old] if leave_to_upper else lb[old]
        at_upper[old] = leave_to_upper
        basis[leave] = j
        at_upper[j] = False
    raise LPError("simplex iteration limit reached")


def solve(c, A, lo, hi, var_lo, var_hi, maximize=True, max_iter=10_000):
    """Optimise ``c @ x`` over the box/row constraints; returns ``(value, x)``."""
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float)).reshape(-1, c.size)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    var_lo = np.asarray(var_lo, dtype=float)
    var_hi = np.asarray(var_hi, dtype=float)
    m, n = A.shape
    if np.any(lo > hi + FEAS_TOL) or np.any(var_lo > var_hi + FEAS_TOL):
        raise InfeasibleLPError("a constraint has lower side above its upper side")
    hi = np.maximum(hi, lo)
    var_hi = np.maximum(var_hi, var_lo)

    # Equilibrate: x = col * xs, rows multiplied by row.
    colmax = np.abs(A).max(axis=0, initial=0.0)
    col = np.where(colmax > 0, 1.0 / np.where(colmax > 0, colmax, 1.0), 1.0)
    As = A * col
    rowmax = np.abs(As).max(axis=1, initial=0.0)
    row = np.where(rowmax > 0, 1.0 / np.where(rowmax > 0, rowmax, 1.0), 1.0)
    As = As * row[:, None]
    lo_s, hi_s = lo * row, hi * row
    vlo_s, vhi_s = var_lo / col, var_hi / col
    c_s = c * col

    # Columns: x (n) | w (m) | artificials (m).
    ntot = n + 2 * m
    lb = np.concatenate([vlo_s, lo_s, np.zeros(m)])
    ub = np.concatenate([vhi_s, hi_s, np.full(m, np.inf)])
    x = np.zeros(ntot)
    x[:n] = vlo_s
    x[n : n + m] = lo_s
    resid = x[n : n + m] - As @ x[:n]
    sgn = np.where(resid >= 0, 1.0, -1.0)
    x[n + m :] = np.abs(resid)
    M = np.hstack([As, -np.eye(m), np.diag(sgn)])
    basis = np.arange(n + m, ntot)
    at_upper = np.zeros(ntot, dtype=bool)

    phase1 = np.zeros(ntot)
    phase1[n + m :] = -1.0
    _simplex(M, x, basis, at_upper, lb, ub, phase1, max_iter)
    x[basis] = _basic_values(M, basis, x) if m else x[basis]
    if x[n + m :].sum() > FEAS_TOL * max(m, 1):
        raise InfeasibleLPError("no point satisfies all constraints")

    # Pin artificials to zero and swap out any that are still basic.
    ub[n + m :] = 0.0
    x[n + m :] = 0.0
    for r in range(m):
        if basis[r] < n + m:
            continue
        e = np.zeros(m)
        e[r] = 1.0
        row_r = np.linalg.solve(M[:, basis].T, e) @ M
        cands = np.flatnonzero(np.abs(row_r[: n + m]) > PIVOT_TOL)
        cands = cands[~np.isin(cands, basis)]
        if cands.size:
            j = cands[np.argmax(np.abs(row_r[cands]))]
            basis[r] = j
            at_upper[j] = False

    cost = np.zeros(ntot)
    cost[:n] = c_s if maximize else -c_s
    _simplex(M, x, basis, at_upper, lb, ub, cost, max_iter)
    x[basis] = _basic_values(M, basis, x) if m else x[basis]
    sol = np.clip(x[:n] * col, var_lo, var_hi)
    return float(c @ sol), sol
