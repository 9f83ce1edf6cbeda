"""Uniform periodic B-spline spaces on ``[-L, L)``.

A space of order ``r`` holds the ``N`` periodic translates of the uniform
B-spline of degree ``r - 1`` (global smoothness ``C^{r-2}``). Basis function
``j`` is supported on cells ``j, ..., j + r - 1`` (mod ``N``), so in cell
``e`` the nonzero functions are ``(e - a) mod N`` for ``a = 0..r-1`` with
local shape ``B(s + a)``, ``s`` the local coordinate in ``[0, 1)``.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import comb, factorial
from numbers import Real

import numpy as np
from numpy.polynomial import legendre
from numpy.polynomial import polynomial as P

from . import kernels
from .errors import SizingError, SolverBreakdown

MAX_ORDER = 6


@dataclass(frozen=True)
class PeriodicMesh:
    """Uniform mesh of ``N`` cells on ``[-L, L)``."""

    L: float
    N: int

    @property
    def h(self):
        return 2.0 * self.L / self.N

    @property
    def nodes(self):
        return -self.L + self.h * np.arange(self.N)

    def wrap(self, x):
        """Map positions periodically into ``[-L, L)``."""
        return np.mod(np.asarray(x, dtype=float) + self.L, 2.0 * self.L) - self.L


def bspline_pieces(r):
    """Power-basis coefficients of the local pieces of the mother B-spline.

    Row ``a`` holds the coefficients (lowest degree first) of ``B(s + a)``
    on ``s in [0, 1]``, built from the truncated-power representation with
    exact rational arithmetic.
    """
    p = r - 1
    out = np.zeros((r, r))
    for a in range(r):
        coeffs = [Fraction(0)] * r
        for k in range(a + 1):
            m = a - k
            sign = (-1) ** k * comb(r, k)
            for j in range(p + 1):
                coeffs[j] += Fraction(sign * comb(p, j) * m ** (p - j), factorial(p))
        out[a] = [float(c) for c in coeffs]
    return out


class PeriodicSplineSpace:
    """Periodic spline space of order ``r`` on a uniform mesh.

    Parameters
    ----------
    mesh : PeriodicMesh
    r : int
        Spline order (degree ``r - 1``).
    nquad : int, optional
        Gauss-Legendre points per cell, default ``r + 2``.
    """

    def __init__(self, mesh, r, nquad=None):
        self.mesh = mesh
        self.r = int(r)
        self.nquad = int(nquad) if nquad is not None else self.r + 2
        g, w = legendre.leggauss(self.nquad)
        self.quad_s = 0.5 * (g + 1.0)
        self.quad_w = 0.5 * w
        self.pieces = bspline_pieces(self.r)
        # piece derivatives, d = 0..r-1, each (r, r) power-basis rows
        self._dpieces = [self.pieces]
        for _ in range(1, self.r):
            prev = self._dpieces[-1]
            self._dpieces.append(np.array([np.pad(P.polyder(row), (0, self.r - len(P.polyder(row)))) for row in prev]))
        h = mesh.h
        nd = min(3, self.r)
        tabs = np.empty((nd, self.r, self.nquad))
        for d in range(nd):
            for a in range(self.r):
                tabs[d, a] = P.polyval(self.quad_s, self._dpieces[d][a]) / h**d
        self.tables = np.ascontiguousarray(tabs)
        self.wq = np.ascontiguousarray(self.quad_w * h)
        self.x_quad = mesh.nodes[:, None] + h * self.quad_s[None, :]

    def __repr__(self):
        return f"PeriodicSplineSpace(L={self.mesh.L}, N={self.N}, r={self.r})"

    @property
    def N(self):
        return self.mesh.N

    @property
    def h(self):
        return self.mesh.h

    @property
    def dim(self):
        return self.mesh.N

    def table(self, deriv):
        if deriv < self.tables.shape[0]:
            return self.tables[deriv]
        return np.ascontiguousarray(
            [P.polyval(self.quad_s, self._dpieces[deriv][a]) / self.h**deriv for a in range(self.r)]
        )

    def basis_values(self, x, deriv=0):
        """Dense ``(len(x), N)`` matrix of basis values at positions ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        e, s = self.locate(x)
        out = np.zeros((x.size, self.N))
        for a in range(self.r):
            vals = P.polyval(s, self._dpieces[deriv][a]) / self.h**deriv
            np.add.at(out, (np.arange(x.size), (e - a) % self.N), vals)
        return out

    def locate(self, x):
        """Cell index and local coordinate of (wrapped) positions."""
        xw = np.asarray(x, dtype=float) + self.mesh.L
        xw = np.mod(xw, 2.0 * self.mesh.L)
        t = xw / self.h
        e = np.floor(t).astype(np.int64)
        e = np.minimum(e, self.N - 1)
        return e, t - e

    def quad_values(self, coef, deriv=0):
        """Field values (or derivative) at all quadrature nodes, ``(N, nq)``."""
        return kernels.quad_values(np.ascontiguousarray(coef, dtype=float), self.table(deriv))

    def at_quad(self, w, t=None):
        """Evaluate a weight given as callable, field, array or constant at the quadrature nodes."""
        if isinstance(w, FieldCoeffs):
            self.check(w)
            return self.quad_values(w.c)
        if isinstance(w, Real):
            return np.full((self.N, self.nquad), float(w))
        if callable(w):
            vals = w(self.x_quad) if t is None else w(self.x_quad, t)
            return np.ascontiguousarray(np.broadcast_to(vals, self.x_quad.shape), dtype=float)
        return np.ascontiguousarray(w, dtype=float)

    def check(self, f):
        if f.space is not self:
            raise ValueError("field belongs to a different spline space")

    def integrate(self, vals):
        """Quadrature of values sampled at the quadrature nodes."""
        return float(np.sum(vals @ self.wq))

    def field(self, c):
        return FieldCoeffs(self, np.asarray(c, dtype=float))

    def constant(self, value):
        return FieldCoeffs(self, np.full(self.N, float(value)))

    @cached_property
    def mass_matrix(self):
        return assemble_weighted_gram(self, 1.0, 0, 0)

    @cached_property
    def mass_factor(self):
        return self.mass_matrix.factor()


@dataclass
class FieldCoeffs:
    """Coefficients of one spline field in the B-spline basis."""

    space: PeriodicSplineSpace
    c: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if self.c.shape != (self.space.N,):
            raise ValueError(f"expected {self.space.N} coefficients, got shape {self.c.shape}")

    def __call__(self, x, deriv=0):
        return eval_field(self, x, deriv)

    def copy(self):
        return FieldCoeffs(self.space, self.c.copy())

    def nodal_values(self, deriv=0):
        return eval_field(self, self.space.mesh.nodes, deriv)


def make_space(L, N, r, nquad=None):
    """Build the order-``r`` periodic spline space on ``N`` cells of ``[-L, L)``."""
    if int(r) != r or r < 3:
        raise SizingError(f"spline order must be an integer >= 3, got {r}")
    if r > MAX_ORDER:
        raise SizingError(f"spline order {r} exceeds the supported maximum {MAX_ORDER}")
    if int(N) != N or N < 2 * r:
        raise SizingError(f"need N >= 2r = {2 * r} cells, got N={N}")
    if not L > 0:
        raise SizingError(f"half-length must be positive, got L={L}")
    return PeriodicSplineSpace(PeriodicMesh(float(L), int(N)), int(r), nquad)


def eval_field(f, x, deriv=0):
    """Value of a spline field (or its derivative) at ``x``, wrapped periodically."""
    space = f.space
    if not 0 <= deriv < space.r:
        raise ValueError(f"derivative order {deriv} not available for order-{space.r} splines")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    e, s = space.locate(x)
    out = np.zeros(x.shape)
    dp = space._dpieces[deriv]
    for a in range(space.r):
        out += f.c[(e - a) % space.N] * P.polyval(s, dp[a])
    out /= space.h**deriv
    return float(out[0]) if scalar else out


class CyclicBandedMatrix:
    """Cyclic-banded ``N x N`` matrix in diagonal storage.

    ``band[d + p, i] = M[i, (i + d) mod N]`` for ``d = -p..p``. The
    factorization of a symmetric matrix is computed on first use and cached.
    """

    def __init__(self, band, symmetric=False):
        band = np.asarray(band, dtype=float)
        if band.ndim != 2 or band.shape[0] % 2 != 1:
            raise ValueError("band must have shape (2p+1, N)")
        self.band = band
        self.symmetric = bool(symmetric)
        self._factor = None

    @classmethod
    def from_symmetric(cls, upper):
        """Build from upper storage ``upper[d, i] = M[i, (i + d) mod N]``, ``d = 0..p``."""
        upper = np.asarray(upper, dtype=float)
        p, n = upper.shape[0] - 1, upper.shape[1]
        band = np.zeros((2 * p + 1, n))
        band[p:] = upper
        for d in range(1, p + 1):
            # M[i, i-d] = M[i-d, i] = upper[d, i-d]
            band[p - d] = np.roll(upper[d], d)
        return cls(band, symmetric=True)

    @property
    def N(self):
        return self.band.shape[1]

    @property
    def half_bandwidth(self):
        return self.band.shape[0] // 2

    @property
    def upper(self):
        return self.band[self.half_bandwidth :]

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        p = self.half_bandwidth
        y = np.zeros(self.N)
        for d in range(-p, p + 1):
            y += self.band[d + p] * np.roll(x, -d)
        return y

    __matmul__ = matvec

    def to_dense(self):
        n, p = self.N, self.half_bandwidth
        m = np.zeros((n, n))
        idx = np.arange(n)
        for d in range(-p, p + 1):
            np.add.at(m, (idx, (idx + d) % n), self.band[d + p])
        return m

    def is_symmetric(self, tol=0.0):
        p = self.half_bandwidth
        for d in range(1, p + 1):
            if np.max(np.abs(self.band[p + d] - np.roll(self.band[p - d], -d)), initial=0.0) > tol:
                return False
        return True

    def factor(self):
        if self._factor is None:
            if not self.symmetric:
                raise ValueError("only symmetric cyclic-banded matrices can be factored")
            self._factor = kernels.CyclicFactor(np.ascontiguousarray(self.upper))
        return self._factor

    def solve(self, b):
        return self.factor().solve(b)


def assemble_weighted_gram(space, w, du, dv):
    """Matrix ``M[i, j] = (w phi_j^(du), phi_i^(dv))`` by per-cell Gauss quadrature."""
    if du not in (0, 1, 2) or dv not in (0, 1, 2):
        raise ValueError("derivative orders must be 0, 1 or 2")
    wv = space.at_quad(w)
    if du == dv:
        t = space.table(du)
        upper = kernels.assemble_sym(wv, None, t, t, space.wq)
        return CyclicBandedMatrix.from_symmetric(upper)
    tu, tv = space.table(du), space.table(dv)
    n, r = space.N, space.r
    p = r - 1
    # loc[e, a, b]: row (e - a), column (e - b)
    loc = np.einsum("eq,q,aq,bq->eab", wv, space.wq, tv, tu)
    band = np.zeros((2 * p + 1, n))
    for a in range(r):
        for b in range(r):
            band[a - b + p] += np.roll(loc[:, a, b], -a)
    return CyclicBandedMatrix(band, symmetric=False)


def assemble_load(space, g, dv=0, t=None):
    """Vector ``b[i] = (g, phi_i^(dv))``."""
    gv = space.at_quad(g, t)
    tab = space.table(dv)
    return kernels.load(gv, None, tab, tab, space.wq)


def factor_solve(M, b):
    """Solve ``M x = b`` for a symmetric positive definite cyclic-banded ``M``.

    Raises
    ------
    SolverBreakdown
        If ``M`` is not numerically positive definite.
    """
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise SolverBreakdown("right-hand side is not finite")
    return M.solve(b)


def interpolate(space, f):
    """Spline interpolant of ``f``: at the mesh nodes for even ``r``,
    at cell midpoints for odd ``r`` (where nodal interpolation is singular
    for even ``N``). Solved as a circulant system by FFT."""
    s0 = 0.0 if space.r % 2 == 0 else 0.5
    pts = space.mesh.nodes + s0 * space.h
    g = np.zeros(space.N)
    for a in range(space.r):
        g[a] = P.polyval(s0, space.pieces[a])
    vals = np.asarray(f(pts), dtype=float)
    c = np.fft.ifft(np.fft.fft(vals) / np.fft.fft(g)).real
    return FieldCoeffs(space, c)
