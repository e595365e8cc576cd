# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simplex kernel; same layout and pivot rules as ``_simplex_py``."""
cdef enum:
    OPTIMAL = 0
    UNBOUNDED = 1
    ITERATION_LIMIT = 2


cdef void _pivot(double[:, ::1] tab, long[::1] basis, long[::1] nonbasis,
                 Py_ssize_t r, Py_ssize_t s) noexcept nogil:
    cdef Py_ssize_t m1 = tab.shape[0], w = tab.shape[1]
    cdef Py_ssize_t c = s + 1, i, j
    cdef double p = tab[r, c]
    cdef double f
    cdef long tmp
    for j in range(w):
        tab[r, j] = tab[r, j] / p
    tab[r, c] = 1.0 / p
    for i in range(m1):
        if i == r:
            continue
        f = tab[i, c]
        if f == 0.0:
            continue
        for j in range(w):
            tab[i, j] = tab[i, j] - f * tab[r, j]
        tab[i, c] = -f / p
    tmp = basis[r]
    basis[r] = nonbasis[s]
    nonbasis[s] = tmp


def pivot(double[:, ::1] tab, long[::1] basis, long[::1] nonbasis,
          Py_ssize_t r, Py_ssize_t s):
    _pivot(tab, basis, nonbasis, r, s)


def simplex_loop(double[:, ::1] tab, long[::1] basis, long[::1] nonbasis,
                 long max_iter, double tol, long bland_after):
    cdef Py_ssize_t m = tab.shape[0] - 1, n = tab.shape[1] - 1
    cdef Py_ssize_t i, j, s, r
    cdef bint bland = bland_after <= 0
    cdef long degenerate = 0, it = 0
    cdef double d, best_d, a, ratio, best
    cdef long best_label
    cdef int status
    with nogil:
        while True:
            s = -1
            best_d = 0.0
            best_label = 0
            for j in range(n):
                d = tab[m, j + 1]
                if d < -tol:
                    if bland:
                        if s < 0 or nonbasis[j] < best_label:
                            s = j
                            best_label = nonbasis[j]
                    elif s < 0 or d < best_d:
                        s = j
                        best_d = d
            if s < 0:
                status = OPTIMAL
                break
            if it >= max_iter:
                status = ITERATION_LIMIT
                break
            best = -1.0
            for i in range(m):
                a = tab[i, s + 1]
                if a > tol:
                    ratio = tab[i, 0]
                    if ratio < 0.0:
                        ratio = 0.0
                    ratio = ratio / a
                    if best < 0.0 or ratio < best:
                        best = ratio
            if best < 0.0:
                status = UNBOUNDED
                break
            r = -1
            for i in range(m):
                a = tab[i, s + 1]
                if a > tol:
                    ratio = tab[i, 0]
                    if ratio < 0.0:
                        ratio = 0.0
                    ratio = ratio / a
                    if ratio <= best + tol and (r < 0 or basis[i] < basis[r]):
                        r = i
            if best <= tol:
                degenerate += 1
                if not bland and bland_after > 0 and degenerate >= bland_after:
                    bland = True
            else:
                degenerate = 0
            _pivot(tab, basis, nonbasis, r, s)
            it += 1
    return status, it, bool(bland)
