"""Pure numpy/scipy implementations of the hot kernels.

These mirror the compiled ``_kernels`` extension one for one and are used
when the extension is not built, or when ``SERRE_GALERKIN_PURE=1``.

Storage conventions shared with the extension
---------------------------------------------
Local tables ``v[a, q]`` hold the value at quadrature node ``q`` of cell
``e`` of the global basis function ``(e - a) mod N``.

A symmetric cyclic-banded matrix with half bandwidth ``p`` is stored as
``band[d, i] = M[i, (i + d) mod N]`` for ``d = 0..p``.
"""

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, cho_solve_banded, cholesky_banded

from .errors import SolverBreakdown as BreakdownError

IMPLEMENTATION = "python"


def _local_index(n, r):
    return (np.arange(n)[:, None] - np.arange(r)[None, :]) % n


def quad_values(coef, table):
    """Values of a spline field at every quadrature node, shape ``(N, nq)``."""
    n = coef.shape[0]
    r = table.shape[0]
    return coef[_local_index(n, r)] @ table


def quad_values_multi(coef, tables):
    """Stacked ``quad_values`` for several tables ``(nd, r, nq)``."""
    n = coef.shape[0]
    nd, r, nq = tables.shape
    loc = coef[_local_index(n, r)]
    return np.stack([loc @ tables[k] for k in range(nd)])


def assemble_sym(w0, w1, v0, v1, wq):
    """Band of ``(w0 phi_j, phi_i) + (w1 phi_j', phi_i')``.

    ``wq`` are the per-cell quadrature weights already scaled by ``h``;
    ``v1`` is already scaled by ``1/h``. ``w1`` may be None.
    """
    n, nq = w0.shape
    r = v0.shape[0]
    outer0 = np.einsum("aq,bq->qab", v0, v0).reshape(nq, r * r)
    loc = ((w0 * wq) @ outer0).reshape(n, r, r)
    if w1 is not None:
        outer1 = np.einsum("aq,bq->qab", v1, v1).reshape(nq, r * r)
        loc += ((w1 * wq) @ outer1).reshape(n, r, r)
    band = np.zeros((r, n))
    for a in range(r):
        for b in range(a + 1):
            band[a - b] += np.roll(loc[:, a, b], -a)
    return band


def load(g0, g1, v0, v1, wq):
    """Vector ``(g0, phi_i) + (g1, phi_i')``; ``g1`` may be None."""
    cont = (g0 * wq) @ v0.T
    if g1 is not None:
        cont += (g1 * wq) @ v1.T
    out = np.zeros(cont.shape[0])
    for a in range(cont.shape[1]):
        out += np.roll(cont[:, a], -a)
    return out


def _sym_entry(band, i, j):
    n = band.shape[1]
    p = band.shape[0] - 1
    d = (j - i) % n
    if d <= p:
        return band[d, i]
    if n - d <= p:
        return band[n - d, j]
    return 0.0


class CyclicFactor:
    """Factorization of a symmetric positive definite cyclic-banded matrix.

    The leading ``N - p`` block is banded without wrap-around and is
    Cholesky-factored; the wrap-around coupling is eliminated through a
    ``p x p`` Schur complement.
    """

    def __init__(self, band):
        band = np.asarray(band, dtype=float)
        p = band.shape[0] - 1
        n = band.shape[1]
        n1 = n - p
        self.n, self.p, self.n1 = n, p, n1
        # scipy upper form: ab[p + i - j, j] = M[i, j], i <= j
        ab = np.zeros((p + 1, n1))
        for d in range(p + 1):
            ab[p - d, d:] = band[d, : n1 - d]
        try:
            self._cb = cholesky_banded(ab, lower=False, check_finite=True)
        except (LinAlgError, ValueError) as exc:
            raise BreakdownError(f"banded block is not positive definite: {exc}") from None
        c = np.zeros((n1, p))
        for i in list(range(min(p, n1))) + list(range(max(n1 - p, 0), n1)):
            for m in range(p):
                c[i, m] = _sym_entry(band, i, n1 + m)
        dmat = np.array([[_sym_entry(band, n1 + a, n1 + b) for b in range(p)] for a in range(p)])
        self._c = c
        y = cho_solve_banded((self._cb, False), c, check_finite=False)
        # corner-coupling columns decay geometrically; drop the subnormal tail
        y[np.abs(y) < 1e-250] = 0.0
        self._y = y
        schur = dmat - c.T @ self._y
        try:
            self._schur = cho_factor(schur, check_finite=True)
        except (LinAlgError, ValueError) as exc:
            raise BreakdownError(f"Schur complement is not positive definite: {exc}") from None

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        y1 = cho_solve_banded((self._cb, False), b[: self.n1], check_finite=False)
        x2 = cho_solve(self._schur, b[self.n1 :] - self._c.T @ y1, check_finite=False)
        x = np.empty_like(b)
        x[: self.n1] = y1 - self._y @ x2
        x[self.n1 :] = x2
        return x


def serre_terms(eta_c, u_c, tables, wq):
    """Loads and depth-weighted matrix band of the semidiscrete right-hand side.

    Returns ``(b1, b2, band, eta_min)``; see the compiled counterpart.
    """
    eta, eta_x = quad_values_multi(eta_c, tables[:2])
    u, u_x, u_xx = quad_values_multi(u_c, tables[:3])
    v0, v1 = tables[0], tables[1]
    eta3 = eta**3 / 3.0
    b1 = load(eta * u_x + eta_x * u, None, v0, v1, wq)
    b2 = load(eta * (eta_x + u * u_x), eta3 * (u * u_xx - u_x * u_x), v0, v1, wq)
    band = assemble_sym(eta, eta3, v0, v1, wq)
    return b1, b2, band, float(eta.min())
