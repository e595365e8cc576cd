"""Pure numpy simplex kernel (fallback for the compiled ``_simplex`` module).

Dictionary layout: ``tab`` has one row per basic variable plus a trailing
objective row; column 0 holds the right-hand side and columns 1.. the
coefficients of the nonbasic variables, so that

    x_B[i] = tab[i, 0] - sum_j tab[i, j + 1] * x_N[j]
    z      = tab[-1, 0] - sum_j tab[-1, j + 1] * x_N[j]

``basis`` and ``nonbasis`` hold integer labels used by Bland's rule.
"""
import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2


def pivot(tab, basis, nonbasis, r, s):
    """Exchange basic row ``r`` with nonbasic column ``s`` in place."""
    c = s + 1
    p = tab[r, c]
    row = tab[r] / p
    row[c] = 1.0 / p
    col = tab[:, c].copy()
    col[r] = 0.0
    tab -= np.outer(col, row)
    tab[:, c] = -col / p
    tab[r] = row
    basis[r], nonbasis[s] = nonbasis[s], basis[r]


def simplex_loop(tab, basis, nonbasis, max_iter, tol, bland_after):
    """Run primal simplex pivots until optimal, unbounded, or out of iterations.

    Dantzig's rule is used until ``bland_after`` consecutive degenerate pivots
    occur; from then on Bland's smallest-label rule prevents cycling.

    Returns ``(status, iterations, used_bland)``.
    """
    m = tab.shape[0] - 1
    bland = bland_after <= 0
    degenerate = 0
    it = 0
    while True:
        d = tab[m, 1:]
        cand = np.flatnonzero(d < -tol)
        if cand.size == 0:
            return OPTIMAL, it, bland
        if it >= max_iter:
            return ITERATION_LIMIT, it, bland
        if bland:
            s = int(cand[np.argmin(nonbasis[cand])])
        else:
            s = int(cand[np.argmin(d[cand])])
        a = tab[:m, s + 1]
        rows = np.flatnonzero(a > tol)
        if rows.size == 0:
            return UNBOUNDED, it, bland
        rhs = np.maximum(tab[rows, 0], 0.0)
        ratios = rhs / a[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol]
        r = int(ties[np.argmin(basis[ties])])
        if best <= tol:
            degenerate += 1
            if not bland and bland_after > 0 and degenerate >= bland_after:
                bland = True
        else:
            degenerate = 0
        pivot(tab, basis, nonbasis, r, s)
        it += 1
