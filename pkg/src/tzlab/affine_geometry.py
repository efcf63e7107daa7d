"""Affine invariants of a surface in asymptotic coordinates, by finite differences.

Analytic partials carried by an ImmersionGrid are ignored on purpose: every
quantity here is recomputed from the sampled points so that it checks the
closed forms independently.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FrameDegenerate, ZeroH
from .grids import d_u, d_uu, d_v, d_vv, interior, nanmax_abs
from .immersion import ImmersionGrid

DEGENERATE_TOL = 1e-10


@dataclass
class BlaschkeData:
    h: np.ndarray
    aJ: np.ndarray
    bJ: np.ndarray
    H: np.ndarray
    K: np.ndarray
    xi: np.ndarray


def _fd(X: ImmersionGrid):
    Xm = X.masked(X.X)
    g = X.grid
    return Xm, d_u(Xm, g), d_v(Xm, g)


def conformal_factor(X: ImmersionGrid):
    """h = det(X_u, X_v, X) with central differences."""
    Xm, Xu, Xv = _fd(X)
    return np.linalg.det(np.stack([Xu, Xv, Xm], axis=-1))


def _check_h(h):
    if np.any(np.nan_to_num(abs(h), nan=1.0) < 1e-14):
        raise ZeroH("h vanishes at an unmasked node")


def _frame(X: ImmersionGrid):
    """Moving frame [X_u, X_v, X] as columns, with the degeneracy check."""
    Xm, Xu, Xv = _fd(X)
    M = np.stack([Xu, Xv, Xm], axis=-1)
    det = np.linalg.det(M)
    scale = (np.linalg.norm(Xu, axis=-1) * np.linalg.norm(Xv, axis=-1)
             * np.linalg.norm(Xm, axis=-1))
    if np.any(np.nan_to_num(abs(det) < DEGENERATE_TOL * scale, nan=False)):
        raise FrameDegenerate("X_u, X_v, X are nearly dependent")
    return Xm, Xu, Xv, M, det


def affine_normal(X: ImmersionGrid):
    """xi = X_uv / h: half the Laplacian of the metric 2 h du dv."""
    Xm, Xu, _ = _fd(X)
    h = conformal_factor(X)
    _check_h(h)
    return d_v(Xu, X.grid) / h[..., None]


def shape_residual_values(X: ImmersionGrid, h=None):
    """Nodewise |X_uv - h X| (NaN on the boundary), with the attached h by default."""
    Xm, Xu, _ = _fd(X)
    if h is None:
        h = X.h if X.h is not None else conformal_factor(X)
    h = X.masked(np.asarray(h))
    r = d_v(Xu, X.grid) - h[..., None] * Xm
    return interior(np.linalg.norm(r, axis=-1))


def shape_residual(X: ImmersionGrid, h=None):
    """Max interior |X_uv - h X|."""
    return nanmax_abs(shape_residual_values(X, h))


def _solve(M, b):
    M = np.where(np.isfinite(M), M, 0.0)
    bad = ~np.all(np.isfinite(b), axis=-1) | (np.linalg.det(M) == 0)
    M = np.where(bad[..., None, None], np.eye(3), M)
    c = np.linalg.solve(M, np.where(bad[..., None], 0.0, b)[..., None])[..., 0]
    c[bad] = np.nan
    return c


def _decompose(X: ImmersionGrid):
    g = X.grid
    Xm, Xu, Xv, M, h = _frame(X)
    _check_h(h)
    Xuu, Xvv = d_uu(Xm, g), d_vv(Xm, g)
    aJ = h * _solve(M, Xuu)[..., 1]
    bJ = h * _solve(M, Xvv)[..., 0]
    return Xu, Xv, Xuu, Xvv, h, aJ, bJ


def fubini_pick_residual_values(X: ImmersionGrid):
    """Nodewise size of the remainders r_u, r_v left after the decomposition."""
    g = X.grid
    Xu, Xv, Xuu, Xvv, h, aJ, bJ = _decompose(X)
    hu, hv = d_u(h, g), d_v(h, g)
    ru = Xuu - (hu / h)[..., None] * Xu - (aJ / h)[..., None] * Xv
    rv = Xvv - (bJ / h)[..., None] * Xu - (hv / h)[..., None] * Xv
    r = np.fmax(np.linalg.norm(ru, axis=-1), np.linalg.norm(rv, axis=-1))
    # h is itself differenced, so h_u on the first interior row sees one-sided
    # boundary stencils twice; that band is only first order and is skipped
    return interior(r, 2)


def fubini_pick(X: ImmersionGrid, return_residual=False):
    """Cubic-form coefficients from X_uu and X_vv expanded in [X_u, X_v, X].

    X_uu = (h_u/h) X_u + (aJ/h) X_v + r_u and X_vv = (bJ/h) X_u + (h_v/h) X_v + r_v.
    """
    aJ, bJ = _decompose(X)[-2:]
    if not return_residual:
        return aJ, bJ
    return aJ, bJ, nanmax_abs(fubini_pick_residual_values(X))


def curvatures(X: ImmersionGrid):
    """Affine mean and Gauss curvature from the shape operator S = d xi."""
    g = X.grid
    _, Xu, Xv, _, _ = _frame(X)
    xi = affine_normal(X)
    B = np.stack([Xu, Xv, xi], axis=-1)
    cu = _solve(B, d_u(xi, g))
    cv = _solve(B, d_v(xi, g))
    # columns of S in the basis (X_u, X_v)
    s11, s21 = cu[..., 0], cu[..., 1]
    s12, s22 = cv[..., 0], cv[..., 1]
    H = (s11 + s22) / 2
    K = s11 * s22 - s12 * s21
    return H, K


def blaschke_data(X: ImmersionGrid) -> BlaschkeData:
    aJ, bJ = fubini_pick(X)
    H, K = curvatures(X)
    return BlaschkeData(conformal_factor(X), aJ, bJ, H, K, affine_normal(X))
