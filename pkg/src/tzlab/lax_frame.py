"""Flat connections, extended frames on grids, and PDE residuals.

The connection in the gauge where the third frame column is the surface:

    U = [[h_u/h, 0, lam], [lam, -h_u/h, 0], [0, lam, 0]]
    V = (1/lam) [[0, 1/h^2, 0], [0, 0, h], [h, 0, 0]]

with F^{-1} F_u = U and F^{-1} F_v = V.  Its columns are
(X_u/lam, lam X_v/h, X).
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from . import exact_solutions as ex
from .errors import NonPositiveH, ZeroLambda
from .grids import Grid, d_u, d_uu, d_v, d_vv, interior, nanmax_abs
from .immersion import ImmersionGrid
from .loopalgebra import I3


def _threads():
    try:
        return max(1, int(os.environ.get("TZLAB_THREADS", "1")))
    except ValueError:
        return 1


class SolutionField:
    """A solution h of the Tzitzeica equation on a grid.

    Either analytic (``evaluator(u, v) -> (h, h_u, h_v)`` at arbitrary
    points) or given by node values, whose derivatives are taken by finite
    differences and whose off-node values come from cubic splines.
    """

    def __init__(self, grid: Grid, h=None, evaluator: Optional[Callable] = None, name="",
                 h_u=None, h_v=None):
        if (h is None) == (evaluator is None):
            raise ValueError("give exactly one of node values or an evaluator")
        self.grid = grid
        self.evaluator = evaluator
        self.name = name
        if evaluator is not None:
            U, V = grid.mesh()
            self.h, self.h_u, self.h_v = (np.asarray(a, float) for a in evaluator(U, V))
        else:
            self.h = np.asarray(h, float)
            if self.h.shape != grid.shape:
                raise ValueError("h does not match the grid")
            # exact partials may be supplied (e.g. from a transformation jet)
            self.h_u = d_u(self.h, grid) if h_u is None else np.asarray(h_u, float)
            self.h_v = d_v(self.h, grid) if h_v is None else np.asarray(h_v, float)

    @property
    def analytic(self):
        return self.evaluator is not None

    @classmethod
    def vacuum(cls, grid):
        return cls(grid, evaluator=ex.vacuum_h, name="vacuum")

    @classmethod
    def one_soliton(cls, grid, p: ex.SolitonParams):
        return cls(grid, evaluator=lambda u, v: ex.one_soliton_h(u, v, p, partials=True),
                   name="one-soliton")

    @classmethod
    def from_values(cls, grid, h, name="", h_u=None, h_v=None):
        return cls(grid, h=h, name=name, h_u=h_u, h_v=h_v)

    def refine(self):
        """Same solution on the grid with halved step (analytic fields only)."""
        if not self.analytic:
            raise ValueError("only analytic fields can be refined")
        return SolutionField(self.grid.refine(), evaluator=self.evaluator, name=self.name)

    def jet(self, u, v):
        if self.analytic:
            return tuple(np.asarray(a, float) for a in self.evaluator(u, v))
        raise ValueError("off-grid jets of a grid field need a line spline")

    # values at nodes and half-nodes, used by the integrator
    def _u_half(self):
        """h and h_u at (u_i + du/2, v_j), shape (nu-1, nv)."""
        g = self.grid
        um = (g.u[:-1] + g.u[1:]) / 2
        if self.analytic:
            Um, Vm = np.meshgrid(um, g.v, indexing="ij")
            h, hu, _ = self.jet(Um, Vm)
            return h, hu
        sp = CubicSpline(g.u, self.h, axis=0)
        return sp(um), sp.derivative()(um)

    def _v_half(self):
        """h at (u_i, v_j + dv/2), shape (nu, nv-1)."""
        g = self.grid
        vm = (g.v[:-1] + g.v[1:]) / 2
        if self.analytic:
            Um, Vm = np.meshgrid(g.u, vm, indexing="ij")
            return self.jet(Um, Vm)[0]
        return CubicSpline(g.v, self.h, axis=1)(vm)

    def node_h_u(self):
        """h_u at nodes, consistent with the spline used off-node."""
        if self.analytic:
            return self.h_u
        return CubicSpline(self.grid.u, self.h, axis=0).derivative()(self.grid.u)


def _check_lambda(lam):
    if lam == 0:
        raise ZeroLambda("spectral parameter must be nonzero")


def _U(h, hu, lam):
    h, hu = np.broadcast_arrays(np.asarray(h, float), np.asarray(hu, float))
    out = np.zeros(h.shape + (3, 3), complex)
    w = hu / h
    out[..., 0, 0], out[..., 1, 1] = w, -w
    out[..., 0, 2] = out[..., 1, 0] = out[..., 2, 1] = lam
    return out


def _V(h, lam):
    h = np.asarray(h, float)
    out = np.zeros(h.shape + (3, 3), complex)
    out[..., 0, 1] = 1 / h**2
    out[..., 1, 2] = out[..., 2, 0] = h
    return out / lam


def connection_matrices(field: SolutionField, at, lam):
    """(U, V) at the point ``at = (u, v)``."""
    _check_lambda(lam)
    u, v = at
    if field.analytic:
        h, hu, _ = field.jet(u, v)
    else:
        i, j = field.grid.nearest(u, v)
        h, hu = field.h[i, j], field.h_u[i, j]
    if np.any(np.asarray(h) <= 0):
        raise NonPositiveH(f"h = {h} <= 0 at {at}; the frame gauge needs h > 0")
    return _U(h, hu, complex(lam)), _V(h, complex(lam))


def _sweep(F0, k0, A_node, A_mid, d):
    """RK4 for F' = F A along a line, both directions from index ``k0``.

    A_node: (n, B, 3, 3) at nodes, A_mid: (n-1, B, 3, 3) between nodes.
    Returns (n, B, 3, 3).
    """
    n = A_node.shape[0]
    out = np.empty((n,) + F0.shape, complex)
    out[k0] = F0

    def step(F, a0, am, a1, s):
        k1 = F @ a0
        k2 = (F + s / 2 * k1) @ am
        k3 = (F + s / 2 * k2) @ am
        k4 = (F + s * k3) @ a1
        return F + s / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    for k in range(k0, n - 1):
        out[k + 1] = step(out[k], A_node[k], A_mid[k], A_node[k + 1], d)
    for k in range(k0, 0, -1):
        out[k - 1] = step(out[k], A_node[k], A_mid[k - 1], A_node[k - 1], -d)
    return out


@dataclass(eq=False)
class FrameGrid:
    grid: Grid
    lam: complex
    F: np.ndarray
    h: np.ndarray
    basepoint: tuple = (0.0, 0.0)
    basepoint_value: Optional[np.ndarray] = None
    path_residual: float = 0.0
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.basepoint_value is None:
            self.basepoint_value = I3.copy()
        if self.mask is None:
            self.mask = ~np.all(np.isfinite(self.F), axis=(-2, -1))

    @property
    def det_residual(self):
        return nanmax_abs(np.linalg.det(self.F) - 1)


def integrate_frame(field: SolutionField, lam, basepoint=(0.0, 0.0), check_path=True,
                    max_step=None):
    """Frame with F = I at the node nearest ``basepoint``.

    Integrates in u along the basepoint row, then in v along every column.
    With ``check_path`` the opposite order is run as well and the largest
    nodewise difference is stored as ``path_residual``.  For analytic fields
    ``max_step`` integrates on a refined grid and samples the result back.
    """
    _check_lambda(lam)
    lam = complex(lam)
    g = field.grid
    if max_step is not None and field.analytic and max(g.du, g.dv) > max_step:
        ib, jb = g.nearest(*basepoint)
        fine, k = field, 1
        while max(fine.grid.du, fine.grid.dv) > max_step:
            fine, k = fine.refine(), 2 * k
        fg = integrate_frame(fine, lam, (g.u[ib], g.v[jb]), check_path)
        return FrameGrid(g, lam, fg.F[::k, ::k].copy(), field.h.copy(), fg.basepoint,
                         fg.basepoint_value, fg.path_residual)
    if np.any(field.h <= 0):
        i, j = np.argwhere(field.h <= 0)[0]
        raise NonPositiveH(f"h <= 0 at node ({i}, {j}); integrate only where h > 0")
    hm_u, hum = field._u_half()
    hm_v = field._v_half()
    if np.any(hm_u <= 0) or np.any(hm_v <= 0):
        raise NonPositiveH("h <= 0 between nodes")
    hu_nodes = field.node_h_u()
    Un = _U(field.h, hu_nodes, lam)          # (nu, nv, 3, 3)
    Um = _U(hm_u, hum, lam)                   # (nu-1, nv, 3, 3)
    Vn = _V(field.h, lam)
    Vm = _V(hm_v, lam)                        # (nu, nv-1, 3, 3)
    ib, jb = g.nearest(*basepoint)
    start = I3[None]

    # u along the basepoint row, then v along each column
    row = _sweep(start, ib, Un[:, jb, None], Um[:, jb, None], g.du)[:, 0]
    cols = _sweep(row, jb, np.swapaxes(Vn, 0, 1), np.swapaxes(Vm, 0, 1), g.dv)
    F = np.swapaxes(cols, 0, 1)

    path = 0.0
    if check_path:
        col = _sweep(start, jb, Vn[ib, :, None], Vm[ib, :, None], g.dv)[:, 0]
        F2 = _sweep(col, ib, Un, Um, g.du)
        path = float(abs(F2 - F).max())
    return FrameGrid(g, lam, F, field.h.copy(), (g.u[ib], g.v[jb]), I3.copy(), path)


def vacuum_frame_grid(grid, lam, basepoint=(0.0, 0.0)):
    """Closed-form vacuum frame on a grid, F = I at ``basepoint``."""
    U, V = grid.mesh()
    F = ex.vacuum_frame(U, V, lam, basepoint)
    return FrameGrid(grid, complex(lam), F, np.ones(grid.shape), tuple(basepoint))


def surface_from_frame(fg: FrameGrid) -> ImmersionGrid:
    """Third frame column as a surface; h is recovered as det(X_u, X_v, X) by FD."""
    X = fg.F[..., :, 2]
    Xu_fd, Xv_fd = d_u(X, fg.grid), d_v(X, fg.grid)
    h = np.linalg.det(np.stack([Xu_fd, Xv_fd, X], axis=-1))
    lam = fg.lam
    Xu = lam * fg.F[..., :, 0]
    Xv = fg.h[..., None] * fg.F[..., :, 1] / lam
    if abs(lam.imag) == 0 and np.all(abs(np.nan_to_num(X.imag)) < 1e-9):
        X, Xu, Xv, h, lam = X.real, Xu.real, Xv.real, h.real, lam.real
    return ImmersionGrid(fg.grid, X, h, lam, fg.mask.copy(), Xu, Xv)


@dataclass(eq=False)
class ScalarSolution:
    grid: Grid
    phi: np.ndarray
    phi_u: np.ndarray
    phi_v: np.ndarray
    gamma: complex

    @property
    def p(self):
        return self.phi_u / self.phi

    @property
    def q(self):
        return self.phi_v / self.phi


def scalar_solution(line, fg: FrameGrid) -> ScalarSolution:
    """phi, phi_u, phi_v read off the row vector line*F at the pole lam = alpha."""
    rep = line.rep if hasattr(line, "rep") else np.asarray(line, complex)
    row = np.einsum("i,...ij->...j", rep, fg.F)
    a = fg.lam
    return ScalarSolution(fg.grid, row[..., 2], a * row[..., 0],
                          fg.h * row[..., 1] / a, a**3)


def analytic_scalar(grid, lambda1, c0=1.0, c1=0.0, c2=0.0):
    """Vacuum scalar solution with exact partials on a grid."""
    U, V = grid.mesh()
    phi, pu, pv = ex.vacuum_scalar(U, V, lambda1, c0, c1, c2, partials=True)
    return ScalarSolution(grid, phi, pu, pv, complex(lambda1) ** 3)


def tzitzeica_residual_values(h, grid):
    """h_uv h - h_u h_v - h^3 + 1 by central differences; NaN on the boundary."""
    h = np.asarray(h, float)
    hu, hv = d_u(h, grid), d_v(h, grid)
    huv = d_v(hu, grid)
    return interior(huv * h - hu * hv - h**3 + 1)


def tzitzeica_residual(field):
    """Residual grid of a SolutionField (or anything with ``h`` and ``grid``)."""
    return tzitzeica_residual_values(field.h, field.grid)


def zero_curvature_residual(field: SolutionField, lam):
    """Max interior norm of U_v - V_u - [U, V] (zero for a flat connection)."""
    _check_lambda(lam)
    if np.any(field.h <= 0):
        raise NonPositiveH("h <= 0 on the grid")
    g = field.grid
    lam = complex(lam)
    U, V = _U(field.h, field.h_u, lam), _V(field.h, lam)
    R = d_v(U, g) - d_u(V, g) - (U @ V - V @ U)
    R = interior(np.linalg.norm(R, axis=(-2, -1)))
    return nanmax_abs(R)


def _d4(f, d, axis):
    """Fourth-order central first derivative; NaN on two boundary nodes."""
    f = np.moveaxis(np.asarray(f), axis, 0)
    out = np.full(f.shape, np.nan, dtype=np.result_type(f, float))
    out[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * d)
    return np.moveaxis(out, 0, axis)


def linear_system_residual(sol: ScalarSolution, h, h_u, h_v, order=2):
    """Max residuals of the three linear-system equations for a scalar solution.

    Second derivatives are taken by differencing the exact first-derivative
    components once (order 2 or 4).
    """
    g = sol.grid
    if order == 2:
        du, dv = (lambda f: d_u(f, g)), (lambda f: d_v(f, g))
        band = 1
    elif order == 4:
        du, dv = (lambda f: _d4(f, g.du, 0)), (lambda f: _d4(f, g.dv, 1))
        band = 2
    else:
        raise ValueError("order must be 2 or 4")
    phi, pu, pv, gm = sol.phi, sol.phi_u, sol.phi_v, sol.gamma
    r1 = du(pu) - (h_u / h) * pu - (gm / h) * pv
    r2 = dv(pu) - h * phi
    r3 = dv(pv) - pu / (gm * h) - (h_v / h) * pv
    return tuple(nanmax_abs(interior(abs(r), band)) for r in (r1, r2, r3))


def surface_linear_residual(X: ImmersionGrid, gamma=None):
    """Max interior residuals of X_uu, X_uv, X_vv against the linear system (FD)."""
    g = X.grid
    gamma = X.gamma if gamma is None else gamma
    Xm = X.masked(X.X)
    h = X.masked(X.h)
    hu, hv = d_u(h, g), d_v(h, g)
    Xu, Xv = d_u(Xm, g), d_v(Xm, g)
    hh = h[..., None]
    r1 = d_uu(Xm, g) - (hu / h)[..., None] * Xu - (gamma / hh) * Xv
    r2 = d_v(Xu, g) - hh * Xm
    r3 = d_vv(Xm, g) - Xu / (gamma * hh) - (hv / h)[..., None] * Xv
    return tuple(nanmax_abs(interior(np.linalg.norm(r, axis=-1))) for r in (r1, r2, r3))


# families of frames indexed by the spectral parameter ----------------------

class FrameFamily:
    """Frames of one solution at any spectral value; subclasses supply ``_frame``."""

    grid: Grid
    h: np.ndarray

    def __init__(self):
        self._cache = {}

    def at(self, lam):
        key = complex(lam)
        if key not in self._cache:
            self._cache[key] = self._frame(key)
        return self._cache[key]

    def at_many(self, lams):
        lams = [complex(x) for x in lams]
        todo = [x for x in lams if x not in self._cache]
        n = _threads()
        if n > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=n) as pool:
                for x, F in zip(todo, pool.map(self._frame, todo)):
                    self._cache[x] = F
        return [self.at(x) for x in lams]

    def unleft(self, lam):
        """Frame with accumulated left factors removed; its third column is the surface."""
        return self.at(lam)

    @property
    def mask(self):
        return np.zeros(self.grid.shape, bool)

    def frame_grid(self, lam):
        return FrameGrid(self.grid, complex(lam), self.at(lam), self.h, self.basepoint,
                         mask=self.mask.copy())

    def surface(self, lam):
        """Surface at ``lam`` with exact partials from the frame columns."""
        K = self.unleft(lam)
        lam = complex(lam)
        X, Xu, Xv = K[..., :, 2], lam * K[..., :, 0], self.h[..., None] * K[..., :, 1] / lam
        return ImmersionGrid(self.grid, X, self.h, lam, self.mask.copy(), Xu, Xv)


class VacuumFamily(FrameFamily):
    def __init__(self, grid, basepoint=(0.0, 0.0)):
        super().__init__()
        self.grid = grid
        self.basepoint = tuple(basepoint)
        self.h = np.ones(grid.shape)

    def _frame(self, lam):
        U, V = self.grid.mesh()
        return ex.vacuum_frame(U, V, lam, self.basepoint)


class IntegratedFamily(FrameFamily):
    def __init__(self, field: SolutionField, basepoint=(0.0, 0.0)):
        super().__init__()
        self.field = field
        self.grid = field.grid
        self.h = field.h
        ib, jb = field.grid.nearest(*basepoint)
        self.basepoint = (field.grid.u[ib], field.grid.v[jb])

    def _frame(self, lam):
        return integrate_frame(self.field, lam, self.basepoint, check_path=False).F
