"""Linear programs for the linearized stat-arb subproblems, and a dense solver.

Problems are stored as ``maximize c @ x  s.t.  A @ x <= b,  lower <= x <= upper``
with ``+-inf`` bounds meaning "unbounded on that side".
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import _kernels

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-9


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LpError(RuntimeError):
    pass


class LpIterationLimitError(LpError):
    """Simplex ran out of pivots; ``last_x`` is the last primal iterate."""

    def __init__(self, message, last_x=None):
        super().__init__(message)
        self.last_x = last_x


@dataclass(frozen=True)
class LpProblem:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        m = c.shape[0]
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (m,)).copy()
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (m,)).copy()
        if m < 1 or A.shape != (b.shape[0], m) or b.shape[0] < 1:
            raise ValueError(f"inconsistent LP dimensions: c {c.shape}, A {A.shape}, b {b.shape}")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise ValueError("NaN bound")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("LP data must be finite")
        labels = tuple(self.labels) if self.labels else tuple(f"x{j}" for j in range(m))
        if len(labels) != m:
            raise ValueError("one label per variable required")
        for arr in (c, A, b, lower, upper):
            arr.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "labels", labels)

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.b.shape[0]

    def is_feasible(self, x, tol: float = 1e-8) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(self.A @ x <= self.b + tol)
            and np.all(x >= self.lower - tol)
            and np.all(x <= self.upper + tol)
        )


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    objective_value: float
    status: LpStatus
    iterations: int = 0


def _rescale_gradient(grad: np.ndarray) -> np.ndarray:
    return grad / max(1.0, float(np.max(np.abs(grad), initial=0.0)))


def _abs_rows(n: int, offset_s: int, offset_u: int, m: int, leverage_limit: float):
    """Rows encoding ``s - u <= 0``, ``-s - u <= 0`` and ``sum(u) <= L``."""
    A = np.zeros((2 * n + 1, m))
    idx = np.arange(n)
    A[idx, offset_s + idx] = 1.0
    A[idx, offset_u + idx] = -1.0
    A[n + idx, offset_s + idx] = -1.0
    A[n + idx, offset_u + idx] = -1.0
    A[2 * n, offset_u:offset_u + n] = 1.0
    b = np.zeros(2 * n + 1)
    b[2 * n] = leverage_limit
    return A, b


def build_fixed_band_lp(scaled_prices, gradient, leverage_limit: float) -> LpProblem:
    """Linearized fixed-band subproblem in variables ``(s, mu, u)``.

    The objective is the rescaled gradient pulled back to holdings,
    ``c_s = P.T @ g / max(1, |g|_inf)``.
    """
    P = np.asarray(scaled_prices, dtype=float)
    g = np.asarray(gradient, dtype=float).ravel()
    if P.ndim != 2 or P.shape[0] < 2:
        raise ValueError("need at least two days of prices")
    T, n = P.shape
    if g.shape != (T,):
        raise ValueError(f"gradient length {g.shape[0]} != {T} days")
    if not leverage_limit > 0:
        raise ValueError("leverage limit must be positive")
    m = 2 * n + 1
    c = np.zeros(m)
    c[:n] = P.T @ _rescale_gradient(g)
    band = np.zeros((2 * T, m))
    band[:T, :n] = P
    band[:T, n] = -1.0
    band[T:, :n] = -P
    band[T:, n] = 1.0
    absA, absb = _abs_rows(n, 0, n + 1, m, leverage_limit)
    A = np.vstack([band, absA])
    b = np.concatenate([np.ones(2 * T), absb])
    lower = np.concatenate([np.full(n, -np.inf), [0.0], np.full(n, -np.inf)])
    upper = np.full(m, np.inf)
    labels = [f"s{i}" for i in range(n)] + ["mu"] + [f"u{i}" for i in range(n)]
    return LpProblem(c, A, b, lower, upper, tuple(labels))


def moving_band_residuals(scaled_prices_with_warmup, memory: int) -> np.ndarray:
    """Matrix R with ``R @ s = p_t - mean(p_{t-M+1..t})`` for each in-window day."""
    P = np.asarray(scaled_prices_with_warmup, dtype=float)
    M = int(memory)
    if M < 1:
        raise ValueError("memory must be >= 1")
    T = P.shape[0] - (M - 1)
    if T < 2:
        raise ValueError(
            f"moving band with memory {M} needs at least {M - 1} warmup rows plus 2 "
            f"window rows, got {P.shape[0]} rows"
        )
    trailing = np.lib.stride_tricks.sliding_window_view(P, M, axis=0).sum(axis=-1) / M
    return P[M - 1:] - trailing


def build_moving_band_lp(
    scaled_prices_with_warmup, gradient, leverage_limit: float, memory: int
) -> LpProblem:
    """Linearized moving-band subproblem in variables ``(s, u)``.

    The midpoint is the trailing M-day mean of the portfolio price, a linear
    function of ``s``, so it does not appear as a variable.
    """
    P = np.asarray(scaled_prices_with_warmup, dtype=float)
    R = moving_band_residuals(P, memory)
    T, n = R.shape
    g = np.asarray(gradient, dtype=float).ravel()
    if g.shape != (T,):
        raise ValueError(f"gradient length {g.shape[0]} != {T} window days")
    if not leverage_limit > 0:
        raise ValueError("leverage limit must be positive")
    m = 2 * n
    c = np.zeros(m)
    c[:n] = P[memory - 1:].T @ _rescale_gradient(g)
    band = np.zeros((2 * T, m))
    band[:T, :n] = R
    band[T:, :n] = -R
    absA, absb = _abs_rows(n, 0, n, m, leverage_limit)
    A = np.vstack([band, absA])
    b = np.concatenate([np.ones(2 * T), absb])
    lower = np.full(m, -np.inf)
    upper = np.full(m, np.inf)
    labels = [f"s{i}" for i in range(n)] + [f"u{i}" for i in range(n)]
    return LpProblem(c, A, b, lower, upper, tuple(labels))


def _standard_form(prob: LpProblem):
    """Map to ``max c2 @ y, A2 @ y <= b2, y >= 0`` with ``x = x0 + D @ y``."""
    m = prob.n_vars
    cols = []
    x0 = np.zeros(m)
    extra_rows = []
    for j in range(m):
        lo, hi = prob.lower[j], prob.upper[j]
        if lo > hi:
            return None
        if np.isfinite(lo):
            x0[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            x0[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    D = np.zeros((m, len(cols)))
    for k, (j, sign) in enumerate(cols):
        D[j, k] = sign
    A2 = prob.A @ D
    b2 = prob.b - prob.A @ x0
    if extra_rows:
        E = np.zeros((len(extra_rows), len(cols)))
        for r, (k, width) in enumerate(extra_rows):
            E[r, k] = 1.0
        A2 = np.vstack([A2, E])
        b2 = np.concatenate([b2, [w for _, w in extra_rows]])
    c2 = prob.c @ D
    return c2, A2, b2, x0, D


def _primal_values(tab, basis, n_struct):
    y = np.zeros(n_struct)
    for i, label in enumerate(basis):
        if 0 <= label < n_struct:
            y[label] = tab[i, 0]
    return np.maximum(y, 0.0)


def solve_standard(c, A, b, *, max_iter=None, bland_after=50, backend=None):
    """Two-phase dictionary simplex for ``max c @ y, A @ y <= b, y >= 0``.

    Returns ``(status, y, value, iterations)``. Phase one uses a single
    auxiliary variable entered on the most violated row.
    """
    if backend is None:
        pivot, loop = _kernels.pivot, _kernels.simplex_loop
    else:
        pivot, loop = _kernels.get_backend(backend)
    k, n = A.shape
    if max_iter is None:
        max_iter = 50 * (k + n) + 1000
    iterations = 0
    basis = np.arange(n, n + k, dtype=np.int64)
    if b.min(initial=0.0) < -FEAS_TOL:
        aux = n + k
        tab = np.zeros((k + 1, n + 2))
        tab[:k, 0] = b
        tab[:k, 1:n + 1] = A
        tab[:k, n + 1] = -1.0
        tab[k, n + 1] = 1.0
        nonbasis = np.append(np.arange(n, dtype=np.int64), aux)
        pivot(tab, basis, nonbasis, int(np.argmin(b)), n)
        status, its, _ = loop(tab, basis, nonbasis, max_iter, PIVOT_TOL, bland_after)
        iterations += its + 1
        if status == _kernels.ITERATION_LIMIT:
            raise LpIterationLimitError("phase one iteration limit", _primal_values(tab, basis, n))
        if tab[k, 0] < -1e-7:
            return LpStatus.INFEASIBLE, None, None, iterations
        rows = np.flatnonzero(basis == aux)
        if rows.size:
            r = int(rows[0])
            j = int(np.argmax(np.abs(tab[r, 1:])))
            if abs(tab[r, j + 1]) > PIVOT_TOL:
                pivot(tab, basis, nonbasis, r, j)
                iterations += 1
        if np.any(basis == aux):
            # aux row is identically zero: drop it
            keep = basis != aux
            keep = np.append(keep, True)
            tab = tab[keep]
            basis = basis[basis != aux]
        col = int(np.flatnonzero(nonbasis == aux)[0])
        tab = np.ascontiguousarray(np.delete(tab, col + 1, axis=1))
        nonbasis = np.ascontiguousarray(np.delete(nonbasis, col))
        basis = np.ascontiguousarray(basis)
        tab[:, 0] = np.where(np.abs(tab[:, 0]) < 1e-12, 0.0, tab[:, 0])
        # rebuild the objective row in the current nonbasic variables
        obj = np.zeros(tab.shape[1])
        for j, label in enumerate(nonbasis):
            if label < n:
                obj[j + 1] = -c[label]
        for i, label in enumerate(basis):
            if label < n and c[label] != 0.0:
                obj += c[label] * tab[i]
        tab[-1] = obj
    else:
        tab = np.zeros((k + 1, n + 1))
        tab[:k, 0] = np.maximum(b, 0.0)
        tab[:k, 1:] = A
        tab[k, 1:] = -c
        nonbasis = np.arange(n, dtype=np.int64)
    status, its, _ = loop(tab, basis, nonbasis, max_iter, PIVOT_TOL, bland_after)
    iterations += its
    y = _primal_values(tab, basis, n)
    if status == _kernels.ITERATION_LIMIT:
        raise LpIterationLimitError("phase two iteration limit", y)
    if status == _kernels.UNBOUNDED:
        return LpStatus.UNBOUNDED, None, None, iterations
    return LpStatus.OPTIMAL, y, float(c @ y), iterations


def solve_lp(prob: LpProblem, *, backend=None, max_iter=None) -> LpSolution:
    """Solve to a vertex optimum; infeasible/unbounded are reported in ``status``.

    Raises :class:`LpIterationLimitError` if pivoting does not terminate.
    """
    sf = _standard_form(prob)
    if sf is None:
        return LpSolution(np.full(prob.n_vars, np.nan), float("nan"), LpStatus.INFEASIBLE)
    c2, A2, b2, x0, D = sf
    status, y, _, its = solve_standard(c2, A2, b2, max_iter=max_iter, backend=backend)
    if status is not LpStatus.OPTIMAL:
        value = float("inf") if status is LpStatus.UNBOUNDED else float("nan")
        return LpSolution(np.full(prob.n_vars, np.nan), value, status, its)
    x = x0 + D @ y
    return LpSolution(x, float(prob.c @ x), LpStatus.OPTIMAL, its)


def _fmt_terms(coeffs, labels):
    terms = [f"{v:+.12g}*{name}" for v, name in zip(coeffs, labels) if v != 0.0]
    return " ".join(terms) if terms else "0"


def dump_lp(prob: LpProblem, path: str | Path) -> None:
    """Write an LP-style text rendering (diagnostics only)."""
    lines = [f"max: {_fmt_terms(prob.c, prob.labels)};"]
    for row, rhs in zip(prob.A, prob.b):
        lines.append(f"{_fmt_terms(row, prob.labels)} <= {rhs:.12g};")
    for name, lo, hi in zip(prob.labels, prob.lower, prob.upper):
        if np.isfinite(lo) or np.isfinite(hi):
            lines.append(f"{lo:.12g} <= {name} <= {hi:.12g};")
        else:
            lines.append(f"{name} free;")
    Path(path).write_text("\n".join(lines) + "\n")
