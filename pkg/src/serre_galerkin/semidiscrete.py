"""Galerkin semidiscretization of the periodic Serre equations.

With ``eta`` the depth and ``u`` the depth-averaged velocity, both in the
spline space, the coefficient ODE is

    (eta_t, phi) + ((eta u)_x, phi) = 0
    (eta u_t, chi) + 1/3 (eta^3 u_tx, chi') + (eta eta_x, chi) + (eta u u_x, chi)
        + 1/3 (eta^3 (u u_xx - u_x^2), chi') = 0

for all basis functions ``phi``, ``chi``. The first equation uses the
constant mass matrix (factored once); the second needs the depth-weighted
matrix rebuilt at every evaluation.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import SolverBreakdown
from .spline_space import CyclicBandedMatrix, FieldCoeffs, assemble_load


@dataclass
class SerreState:
    """Depth and velocity fields at time ``t``."""

    eta: FieldCoeffs
    u: FieldCoeffs
    t: float = 0.0

    def __post_init__(self):
        if self.eta.space is not self.u.space:
            raise ValueError("eta and u must live on the same spline space")

    @property
    def space(self):
        return self.eta.space

    def copy(self):
        return SerreState(self.eta.copy(), self.u.copy(), self.t)

    def min_depth(self):
        """Minimum of ``eta`` over the quadrature nodes."""
        return float(self.space.quad_values(self.eta.c).min())


class SerreOperator:
    """Right-hand side of the semidiscrete system, with reusable workspace.

    Parameters
    ----------
    space : PeriodicSplineSpace
    forcing : callable, optional
        ``forcing(x, t) -> (f_eta, f_u)`` evaluated at quadrature nodes; the
        loads ``(f_eta, phi)`` and ``(f_u, chi)`` are added to the two
        equations. Used for manufactured solutions.
    """

    def __init__(self, space, forcing=None):
        self.space = space
        self.forcing = forcing
        self.mass_factor = space.mass_factor
        tabs = space.tables
        self._tables = np.ascontiguousarray(tabs[:3])
        self._v0 = np.ascontiguousarray(tabs[0])
        self._v1 = np.ascontiguousarray(tabs[1])
        self._wq = space.wq
        self.evaluations = 0

    def __call__(self, eta_c, u_c, t=0.0):
        """Return ``(eta_t, u_t)`` coefficient arrays."""
        self.evaluations += 1
        b1, b2, a_band, emin = kernels.serre_terms(eta_c, u_c, self._tables, self._wq)
        if not emin > 0.0:
            raise SolverBreakdown(f"depth lost positivity (min eta = {emin:.6g}) at t = {t:.6g}")
        np.negative(b1, out=b1)
        np.negative(b2, out=b2)
        if self.forcing is not None:
            f_eta, f_u = self.forcing(self.space.x_quad, t)
            v0, v1, wq = self._v0, self._v1, self._wq
            b1 += kernels.load(np.ascontiguousarray(f_eta), None, v0, v1, wq)
            b2 += kernels.load(np.ascontiguousarray(f_u), None, v0, v1, wq)
        eta_t = self.mass_factor.solve(b1)
        u_t = kernels.CyclicFactor(a_band).solve(b2)
        return eta_t, u_t

    def depth_matrix(self, eta):
        """``A(eta)[i, j] = (eta phi_j, phi_i) + 1/3 (eta^3 phi_j', phi_i')``."""
        ev = self.space.quad_values(eta.c)
        band = kernels.assemble_sym(ev, ev**3 / 3.0, self._v0, self._v1, self._wq)
        return CyclicBandedMatrix.from_symmetric(band)


def rhs(state, operator=None):
    """Time derivatives ``(eta_t, u_t)`` of a state, as fields."""
    op = operator if operator is not None else SerreOperator(state.space)
    et, ut = op(state.eta.c, state.u.c, state.t)
    return FieldCoeffs(state.space, et), FieldCoeffs(state.space, ut)


def project_l2(space, f):
    """L2 projection of ``f`` (callable on positions, or a field) onto ``space``."""
    if isinstance(f, FieldCoeffs):
        space.check(f)
        return f.copy()
    b = assemble_load(space, f)
    return FieldCoeffs(space, space.mass_factor.solve(b))


def _derivative_at_quad(space, f, df):
    if isinstance(f, FieldCoeffs):
        return space.quad_values(f.c, 1)
    if df is not None:
        return space.at_quad(df)
    # fourth-order central difference
    x = space.x_quad
    d = 1e-3 * space.h
    return (8.0 * (f(x + d) - f(x - d)) - (f(x + 2 * d) - f(x - 2 * d))) / (12.0 * d)


def project_elliptic_u0(space, eta0, u0, du0=None):
    """Projection of ``u0`` under the depth-weighted form ``(eta0 v, phi) + 1/3 (eta0^3 v', phi')``.

    ``eta0`` and ``u0`` may be callables or fields; ``du0`` is the
    derivative of a callable ``u0`` (estimated by finite differences when
    omitted).
    """
    e = space.at_quad(eta0)
    e3 = e**3 / 3.0
    uq = space.at_quad(u0)
    duq = _derivative_at_quad(space, u0, du0)
    t0, t1 = space.table(0), space.table(1)
    band = kernels.assemble_sym(e, e3, t0, t1, space.wq)
    b = kernels.load(e * uq, e3 * duq, t0, t1, space.wq)
    return FieldCoeffs(space, kernels.CyclicFactor(band).solve(b))


def initial_state(space, eta0, u0, t0=0.0, velocity_projection="l2", du0=None):
    """L2-projected depth and L2 or elliptic projected velocity."""
    eta = project_l2(space, eta0)
    if velocity_projection == "l2":
        u = project_l2(space, u0)
    elif velocity_projection == "elliptic":
        u = project_elliptic_u0(space, eta0, u0, du0)
    else:
        raise ValueError(f"unknown velocity projection {velocity_projection!r}")
    return SerreState(eta, u, t0)

