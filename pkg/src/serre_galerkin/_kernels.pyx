# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: quadrature-node evaluation, banded assembly and a
cyclic banded LDL^T factorization.

Storage conventions are those documented in ``_fallback``.
"""

import numpy as np
from libc.math cimport sqrt, isfinite, fabs

from .errors import SolverBreakdown as BreakdownError

IMPLEMENTATION = "cython"

cdef double TINY = 1e-250


def quad_values(const double[::1] coef, const double[:, ::1] table):
    return quad_values_multi(coef, np.ascontiguousarray(table)[None, :, :])[0]


def quad_values_multi(const double[::1] coef, const double[:, :, ::1] tables):
    cdef Py_ssize_t n = coef.shape[0]
    cdef Py_ssize_t nd = tables.shape[0]
    cdef Py_ssize_t r = tables.shape[1]
    cdef Py_ssize_t nq = tables.shape[2]
    out_arr = np.empty((nd, n, nq))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t e, q, a, j, k
    cdef double s
    cdef double cl[16]
    cdef double tb[1024]
    if r > 16 or nd * r * nq > 1024:
        raise ValueError("spline order too large for compiled evaluation")
    for k in range(nd):
        for a in range(r):
            for q in range(nq):
                tb[(k * nq + q) * r + a] = tables[k, a, q]
    for e in range(n):
        for a in range(r):
            j = e - a
            if j < 0:
                j += n
            cl[a] = coef[j]
        for k in range(nd):
            for q in range(nq):
                s = 0.0
                for a in range(r):
                    s += cl[a] * tb[(k * nq + q) * r + a]
                out[k, e, q] = s
    return out_arr


def assemble_sym(const double[:, ::1] w0, w1, const double[:, ::1] v0,
                 const double[:, ::1] v1, const double[::1] wq):
    cdef Py_ssize_t n = w0.shape[0]
    cdef Py_ssize_t nq = w0.shape[1]
    cdef Py_ssize_t r = v0.shape[0]
    cdef Py_ssize_t nl = r * (r + 1) // 2
    cdef bint has1 = w1 is not None
    cdef const double[:, ::1] w1v = w1 if has1 else w0
    # packed lower-triangle products per quadrature node
    p0_arr = np.zeros((nq, nl))
    p1_arr = np.zeros((nq, nl))
    cdef double[:, ::1] p0 = p0_arr
    cdef double[:, ::1] p1 = p1_arr
    cdef Py_ssize_t e, q, a, b, i, m
    for q in range(nq):
        m = 0
        for a in range(r):
            for b in range(a + 1):
                p0[q, m] = wq[q] * v0[a, q] * v0[b, q]
                p1[q, m] = wq[q] * v1[a, q] * v1[b, q]
                m += 1
    band_arr = np.zeros((r, n))
    cdef double[:, ::1] band = band_arr
    cdef double loc[64]
    cdef double x0, x1
    if nl > 64:
        raise ValueError("spline order too large for compiled assembly")
    for e in range(n):
        for m in range(nl):
            loc[m] = 0.0
        if has1:
            for q in range(nq):
                x0 = w0[e, q]
                x1 = w1v[e, q]
                for m in range(nl):
                    loc[m] += x0 * p0[q, m] + x1 * p1[q, m]
        else:
            for q in range(nq):
                x0 = w0[e, q]
                for m in range(nl):
                    loc[m] += x0 * p0[q, m]
        m = 0
        for a in range(r):
            i = e - a
            if i < 0:
                i += n
            for b in range(a + 1):
                band[a - b, i] += loc[m]
                m += 1
    return band_arr


def load(const double[:, ::1] g0, g1, const double[:, ::1] v0,
         const double[:, ::1] v1, const double[::1] wq):
    cdef Py_ssize_t n = g0.shape[0]
    cdef Py_ssize_t nq = g0.shape[1]
    cdef Py_ssize_t r = v0.shape[0]
    cdef bint has1 = g1 is not None
    cdef const double[:, ::1] g1v = g1 if has1 else g0
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t e, q, a, i
    cdef double s, y0, y1
    for e in range(n):
        for q in range(nq):
            y0 = wq[q] * g0[e, q]
            y1 = wq[q] * g1v[e, q] if has1 else 0.0
            for a in range(r):
                i = e - a
                if i < 0:
                    i += n
                out[i] += y0 * v0[a, q] + y1 * v1[a, q]
    return out_arr


cdef double _sym_entry(double[:, ::1] band, Py_ssize_t i, Py_ssize_t j):
    cdef Py_ssize_t n = band.shape[1]
    cdef Py_ssize_t p = band.shape[0] - 1
    cdef Py_ssize_t d = (j - i) % n
    if d < 0:
        d += n
    if d <= p:
        return band[d, i]
    if n - d <= p:
        return band[n - d, j]
    return 0.0


cdef class CyclicFactor:
    """Banded LDL^T of the leading ``N - p`` block plus a ``p x p`` Schur
    complement (Cholesky) that absorbs the periodic corner coupling."""

    cdef readonly Py_ssize_t n, p, n1
    cdef double[:, ::1] lb      # lb[0, j] = D[j]; lb[d, j] = L[j + d, j]
    cdef double[:, ::1] c       # corner coupling, (n1, p)
    cdef double[:, ::1] y       # B^{-1} C, (n1, p)
    cdef double[:, ::1] sch     # lower Cholesky factor of the Schur complement

    def __init__(self, band_in):
        cdef double[:, ::1] band = np.ascontiguousarray(band_in, dtype=np.float64)
        cdef Py_ssize_t p = band.shape[0] - 1
        cdef Py_ssize_t n = band.shape[1]
        cdef Py_ssize_t n1 = n - p
        self.n = n
        self.p = p
        self.n1 = n1
        self.lb = np.zeros((p + 1, n1))
        self.c = np.zeros((n1, p))
        self.y = np.zeros((n1, p))
        self.sch = np.zeros((p, p))
        cdef double[:, ::1] lb = self.lb
        cdef Py_ssize_t i, j, k, k0, m, a, b
        cdef double s, dj
        for j in range(n1):
            k0 = j - p if j > p else 0
            s = band[0, j]
            for k in range(k0, j):
                s -= lb[j - k, k] * lb[j - k, k] * lb[0, k]
            if not (s > 0.0 and isfinite(s)):
                raise BreakdownError(f"non-positive pivot {s!r} at row {j}")
            lb[0, j] = s
            dj = s
            for i in range(j + 1, min(j + p + 1, n1)):
                s = band[i - j, j]
                k0 = i - p if i > p else 0
                for k in range(k0, j):
                    s -= lb[i - k, k] * lb[j - k, k] * lb[0, k]
                lb[i - j, j] = s / dj
        for i in range(n1):
            if i < p or i >= n1 - p:
                for m in range(p):
                    self.c[i, m] = _sym_entry(band, i, n1 + m)
        cdef double[::1] col = np.empty(n1)
        for m in range(p):
            for i in range(n1):
                col[i] = self.c[i, m]
            self._band_solve(col)
            for i in range(n1):
                self.y[i, m] = col[i]
        cdef double[:, ::1] sch = self.sch
        for a in range(p):
            for b in range(p):
                s = _sym_entry(band, n1 + a, n1 + b)
                for i in range(n1):
                    if i < p or i >= n1 - p:
                        s -= self.c[i, a] * self.y[i, b]
                sch[a, b] = s
        for j in range(p):
            s = sch[j, j]
            for k in range(j):
                s -= sch[j, k] * sch[j, k]
            if not (s > 0.0 and isfinite(s)):
                raise BreakdownError(f"Schur complement not positive definite (pivot {s!r})")
            sch[j, j] = sqrt(s)
            for i in range(j + 1, p):
                s = sch[i, j]
                for k in range(j):
                    s -= sch[i, k] * sch[j, k]
                sch[i, j] = s / sch[j, j]
        for i in range(p):
            for j in range(i + 1, p):
                sch[i, j] = 0.0

    cdef void _band_solve(self, double[::1] x) noexcept:
        cdef double[:, ::1] lb = self.lb
        cdef Py_ssize_t n1 = self.n1, p = self.p
        cdef Py_ssize_t i, k, k0, k1
        cdef double s
        for i in range(n1):
            s = x[i]
            k0 = i - p if i > p else 0
            for k in range(k0, i):
                s -= lb[i - k, k] * x[k]
            # corner-coupling columns decay geometrically; keep them out of
            # the (very slow) subnormal range
            if fabs(s) < TINY:
                s = 0.0
            x[i] = s
        for i in range(n1):
            x[i] /= lb[0, i]
        for i in range(n1 - 1, -1, -1):
            s = x[i]
            k1 = min(i + p + 1, n1)
            for k in range(i + 1, k1):
                s -= lb[k - i, i] * x[k]
            if fabs(s) < TINY:
                s = 0.0
            x[i] = s

    def solve(self, b_in):
        cdef double[::1] b = np.ascontiguousarray(b_in, dtype=np.float64)
        cdef Py_ssize_t n1 = self.n1, p = self.p
        out = np.empty(self.n)
        cdef double[::1] x = out
        cdef Py_ssize_t i, a, k
        cdef double s
        for i in range(n1):
            x[i] = b[i]
        self._band_solve(x[:n1])
        cdef double[::1] x2 = x[n1:]
        for a in range(p):
            s = b[n1 + a]
            for i in range(n1):
                if i < p or i >= n1 - p:
                    s -= self.c[i, a] * x[i]
            x2[a] = s
        for a in range(p):
            s = x2[a]
            for k in range(a):
                s -= self.sch[a, k] * x2[k]
            x2[a] = s / self.sch[a, a]
        for a in range(p - 1, -1, -1):
            s = x2[a]
            for k in range(a + 1, p):
                s -= self.sch[k, a] * x2[k]
            x2[a] = s / self.sch[a, a]
        for i in range(n1):
            s = x[i]
            for a in range(p):
                s -= self.y[i, a] * x2[a]
            x[i] = s
        return out


def serre_terms(const double[::1] eta_c, const double[::1] u_c,
                const double[:, :, ::1] tables, const double[::1] wq):
    """Fused single pass over cells for the semidiscrete right-hand side.

    Returns ``(b1, b2, band, eta_min)`` with ``b1 = ((eta u)_x, phi_i)``,
    ``b2 = (eta eta_x + eta u u_x, phi_i) + 1/3 (eta^3 (u u_xx - u_x^2), phi_i')``
    and ``band`` the upper storage of ``(eta phi_j, phi_i) + 1/3 (eta^3 phi_j', phi_i')``.
    """
    cdef Py_ssize_t n = eta_c.shape[0]
    cdef Py_ssize_t r = tables.shape[1]
    cdef Py_ssize_t nq = tables.shape[2]
    cdef Py_ssize_t nl = r * (r + 1) // 2
    if r > 8 or nq > 16:
        raise ValueError("spline order too large for the fused kernel")
    cdef double t0[8][16]
    cdef double t1[8][16]
    cdef double t2[8][16]
    cdef double p0[16][36]
    cdef double p1[16][36]
    cdef double ce[8]
    cdef double cu[8]
    cdef double w0[16]
    cdef double w1[16]
    cdef double g1[16]
    cdef double g2[16]
    cdef double g3[16]
    cdef double loc[36]
    cdef Py_ssize_t e, q, a, b, i, j, m
    cdef double et, etx, uu, ux, uxx, e3, s1, s2, emin = 1e300
    for a in range(r):
        for q in range(nq):
            t0[a][q] = tables[0, a, q]
            t1[a][q] = tables[1, a, q]
            t2[a][q] = tables[2, a, q]
    for q in range(nq):
        m = 0
        for a in range(r):
            for b in range(a + 1):
                p0[q][m] = t0[a][q] * t0[b][q]
                p1[q][m] = t1[a][q] * t1[b][q]
                m += 1
    b1_arr = np.zeros(n)
    b2_arr = np.zeros(n)
    band_arr = np.zeros((r, n))
    cdef double[::1] b1 = b1_arr
    cdef double[::1] b2 = b2_arr
    cdef double[:, ::1] band = band_arr
    for e in range(n):
        for a in range(r):
            j = e - a
            if j < 0:
                j += n
            ce[a] = eta_c[j]
            cu[a] = u_c[j]
        for q in range(nq):
            et = 0.0
            etx = 0.0
            uu = 0.0
            ux = 0.0
            uxx = 0.0
            for a in range(r):
                et += ce[a] * t0[a][q]
                etx += ce[a] * t1[a][q]
                uu += cu[a] * t0[a][q]
                ux += cu[a] * t1[a][q]
                uxx += cu[a] * t2[a][q]
            if et < emin:
                emin = et
            e3 = et * et * et / 3.0
            w0[q] = wq[q] * et
            w1[q] = wq[q] * e3
            g1[q] = wq[q] * (et * ux + etx * uu)
            g2[q] = wq[q] * et * (etx + uu * ux)
            g3[q] = wq[q] * e3 * (uu * uxx - ux * ux)
        for a in range(r):
            i = e - a
            if i < 0:
                i += n
            s1 = 0.0
            s2 = 0.0
            for q in range(nq):
                s1 += g1[q] * t0[a][q]
                s2 += g2[q] * t0[a][q] + g3[q] * t1[a][q]
            b1[i] += s1
            b2[i] += s2
        for m in range(nl):
            loc[m] = 0.0
        for q in range(nq):
            for m in range(nl):
                loc[m] += w0[q] * p0[q][m] + w1[q] * p1[q][m]
        m = 0
        for a in range(r):
            i = e - a
            if i < 0:
                i += n
            for b in range(a + 1):
                band[a - b, i] += loc[m]
                m += 1
    return b1_arr, b2_arr, band_arr, emin
