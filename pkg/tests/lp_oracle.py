"""Brute-force reference solvers for small box-constrained LPs.

``dual_vertex_max`` minimises the piecewise-linear dual function over the
vertices of its hyperplane arrangement; ``primal_vertex_max`` enumerates
primal vertices directly and is only practical for a handful of variables.
Both assume the primal problem is feasible.
"""
from __future__ import annotations

from itertools import combinations

import numpy as np


def _dual_value(y, c, A, lo, hi, var_lo, var_hi):
    reduced = c[None, :] - y @ A
    box = np.where(reduced > 0, reduced * var_hi, reduced * var_lo).sum(axis=1)
    rows = (np.maximum(y, 0) * hi - np.maximum(-y, 0) * lo).sum(axis=1)
    return box + rows


def dual_vertex_max(c, A, lo, hi, var_lo, var_hi):
    """max c@x s.t. lo <= A x <= hi, var_lo <= x <= var_hi, via the dual."""
    c, A = np.asarray(c, float), np.atleast_2d(np.asarray(A, float))
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    var_lo, var_hi = np.asarray(var_lo, float), np.asarray(var_hi, float)
    m, n = A.shape
    if m == 0:
        return float(np.where(c > 0, c * var_hi, c * var_lo).sum())
    # Hyperplanes in y-space: (A^T y)_j = c_j and y_i = 0.
    normals = np.vstack([A.T, np.eye(m)])
    offsets = np.concatenate([c, np.zeros(m)])
    subsets = np.array(list(combinations(range(n + m), m)))
    mats = normals[subsets]
    rhs = offsets[subsets]
    ok = np.abs(np.linalg.det(mats)) > 1e-12
    ys = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    return float(_dual_value(ys, c, A, lo, hi, var_lo, var_hi).min())


def primal_vertex_max(c, A, lo, hi, var_lo, var_hi, tol=1e-9):
    """Enumerate every vertex of the primal polytope; returns None if infeasible."""
    c, A = np.asarray(c, float), np.atleast_2d(np.asarray(A, float))
    m, n = A.shape
    normals = np.vstack([np.eye(n), np.eye(n), A, A]) if m else np.vstack([np.eye(n), np.eye(n)])
    values = np.concatenate([var_lo, var_hi, lo, hi]) if m else np.concatenate([var_lo, var_hi])
    best = None
    for idx in combinations(range(len(values)), n):
        M = normals[list(idx)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, values[list(idx)])
        if np.any(x < var_lo - tol) or np.any(x > var_hi + tol):
            continue
        if m and (np.any(A @ x < lo - tol) or np.any(A @ x > hi + tol)):
            continue
        v = float(c @ x)
        best = v if best is None else max(best, v)
    return best


def random_feasible_lp(rng: np.random.Generator, max_vars=14, max_rows=6):
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(0, max_rows + 1))
    A = rng.uniform(-1, 1, (m, n))
    if rng.random() < 0.3:
        A = np.round(A, 1)
    x0 = rng.uniform(0, 1, n)
    ax = A @ x0
    lo = ax - rng.uniform(0, 0.5, m)
    hi = ax + rng.uniform(0, 0.5, m)
    if rng.random() < 0.2:
        lo = hi = ax.copy()
    c = rng.uniform(-1, 1, n)
    return c, A, lo, hi, np.zeros(n), np.ones(n)
