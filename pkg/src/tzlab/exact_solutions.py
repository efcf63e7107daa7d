"""Closed-form solutions: vacuum frame, surface and scalars, and the one-soliton family."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonRealOutput, PoleCollision, ZeroLambda
from .loopalgebra import EPS, I3, N, N2, OMEGA

SQ3 = np.sqrt(3.0)
KZ = 2.0 / (3.0 * SQ3)
MASK_COS = 1e-6

# X0 = X0_FROM_FRAME @ (third column of the vacuum frame); det = 1
X0_FROM_FRAME = np.array([
    [np.cos(2 * np.pi / 3), np.cos(4 * np.pi / 3), 1.0],
    [np.sin(2 * np.pi / 3), np.sin(4 * np.pi / 3), 0.0],
    [KZ, KZ, KZ],
])


def _nonzero(lam, name="lambda"):
    if lam == 0:
        raise ZeroLambda(f"{name} must be nonzero")


@dataclass(frozen=True)
class VacuumParams:
    lam: float = 1.0

    def __post_init__(self):
        _nonzero(self.lam)


@dataclass(frozen=True)
class SolitonParams:
    """Data of the one-soliton seed scalar c0 R(l1) + c1 R(eps^2 l1) + conj(c1) R(eps^4 l1).

    c1 = rho0 * exp(i theta0), beta0 = c0 / (2 rho0).
    """

    lambda1: float
    theta0: float = 0.0
    beta0: float = 0.0
    rho0: float = 1.0

    def __post_init__(self):
        _nonzero(self.lambda1, "lambda1")
        if not np.iscomplexobj(self.rho0) and self.rho0 <= 0:
            raise ValueError("rho0 must be positive")

    @property
    def c0(self):
        return 2 * self.beta0 * self.rho0

    @property
    def c1(self):
        return self.rho0 * np.exp(1j * self.theta0)


# vacuum ------------------------------------------------------------------

def _phases(u, v, lam):
    u, v = np.asarray(u, float), np.asarray(v, float)
    return lam * u + v / lam, lam * u - v / lam


def vacuum_surface(u, v, lam=1.0, partials=False):
    """Vacuum affine sphere of revolution; returns X or (X, X_u, X_v), last axis xyz."""
    _nonzero(lam)
    s, t = _phases(u, v, lam)
    th = SQ3 * t / 2
    es, e2 = np.exp(-s / 2), np.exp(s)

    def vec(shift, scale):
        return np.stack([es * np.cos(th + shift), es * np.sin(th + shift), KZ * e2],
                        axis=-1) * scale

    X = vec(0.0, 1.0)
    if not partials:
        return X
    return X, vec(2 * np.pi / 3, lam), vec(4 * np.pi / 3, 1 / lam)


def vacuum_frame(u, v, lam=1.0, basepoint=(0.0, 0.0)):
    """exp(lam (u-u0) N + (v-v0) N^2 / lam) via the circulant eigenbasis; shape (..., 3, 3)."""
    _nonzero(lam)
    u = np.asarray(u, float) - basepoint[0]
    v = np.asarray(v, float) - basepoint[1]
    lam = complex(lam)
    k = np.arange(3)
    mu = lam * u[..., None] * OMEGA**k + v[..., None] * OMEGA ** (2 * k) / lam
    e = np.exp(mu)
    a = e.mean(-1)
    b = (e * OMEGA ** (-k)).mean(-1)
    c = (e * OMEGA ** (-2 * k)).mean(-1)
    return a[..., None, None] * I3 + b[..., None, None] * N + c[..., None, None] * N2


def vacuum_scalar(u, v, lambda1, c0=1.0, c1=0.0, c2=0.0, partials=False):
    """c0 R(l1) + c1 R(eps^2 l1) + c2 R(eps^4 l1), R(l) = exp(l u + v / l)."""
    _nonzero(lambda1, "lambda1")
    u, v = np.asarray(u, float), np.asarray(v, float)
    phi = phi_u = phi_v = 0j
    for c, lk in ((c0, lambda1), (c1, EPS**2 * lambda1), (c2, EPS**4 * lambda1)):
        if c == 0:
            continue
        R = c * np.exp(lk * u + v / lk)
        phi = phi + R
        phi_u = phi_u + lk * R
        phi_v = phi_v + R / lk
    shape = np.broadcast(u, v).shape
    phi, phi_u, phi_v = (np.broadcast_to(np.asarray(x, complex), shape).copy()
                         for x in (phi, phi_u, phi_v))
    return (phi, phi_u, phi_v) if partials else phi


def vacuum_h(u, v):
    """Vacuum conformal factor h = 1 with its (zero) partials."""
    one = np.ones(np.broadcast(np.asarray(u), np.asarray(v)).shape)
    return one, 0 * one, 0 * one


# one soliton -------------------------------------------------------------

def one_soliton_scalar(u, v, p: SolitonParams, partials=False):
    return vacuum_scalar(u, v, p.lambda1, p.c0, p.c1, np.conj(p.c1), partials)


def _soliton_parts(u, v, p):
    l1 = p.lambda1
    s1, t1 = l1 * np.asarray(u, complex) + np.asarray(v, complex) / l1, \
        l1 * np.asarray(u, complex) - np.asarray(v, complex) / l1
    arg = SQ3 * t1 / 2 + p.theta0
    E = np.exp(1.5 * s1)
    return s1, t1, arg, E


def one_soliton_h(u, v, p: SolitonParams, partials=False, allow_complex=False):
    """h1 = 1 - 2 (ln phi)_uv for the one-soliton seed; NaN where the bracket vanishes.

    With ``allow_complex`` lambda1, theta0 may be complex (hyperbolic variant);
    the result must still be real within 1e-9.
    """
    if not allow_complex and any(np.iscomplexobj(x) for x in (p.lambda1, p.theta0, p.beta0)):
        raise ValueError("complex soliton parameters need allow_complex=True")
    l1, beta = p.lambda1, p.beta0
    _, _, arg, E = _soliton_parts(u, v, p)
    C = np.cos(arg)
    D = beta * E + C
    num = 6 * beta * E * C + 1.5
    with np.errstate(all="ignore"):
        h = 1 - num / D**2
        # derivatives of the bracket pieces
        S = np.sin(arg)
        E_u, E_v = 1.5 * l1 * E, 1.5 * E / l1
        C_u, C_v = -S * SQ3 * l1 / 2, S * SQ3 / (2 * l1)
        out = [h]
        if partials:
            for Ex, Cx in ((E_u, C_u), (E_v, C_v)):
                num_x = 6 * beta * (Ex * C + E * Cx)
                D_x = beta * Ex + Cx
                out.append(-(num_x * D - 2 * num * D_x) / D**3)
    bad = abs(D) <= MASK_COS
    res = []
    for a in out:
        a = np.where(bad, np.nan, a)
        im = np.nanmax(abs(np.imag(a))) if np.any(~bad) else 0.0
        if im > 1e-9 * max(1.0, np.nanmax(abs(a)) if np.any(~bad) else 1.0):
            raise NonRealOutput(f"one-soliton h has imaginary part {im:.3g}")
        res.append(np.real(a))
    return tuple(res) if partials else res[0]


def one_soliton_surface(u, v, lam, p: SolitonParams):
    """Surface of the lambda-family member transformed by the one-soliton scalar.

    Valid for beta0 = 0.  Written in the coordinates of :func:`vacuum_surface`;
    NaN rows where the tangent is undefined.
    """
    if p.beta0 != 0:
        raise ValueError("closed-form surface requires beta0 = 0")
    _nonzero(lam)
    l1 = p.lambda1
    den = lam**3 + l1**3
    if abs(den) <= 1e-9 * (abs(lam) ** 3 + abs(l1) ** 3):
        raise PoleCollision("lambda^3 = -lambda1^3")
    s, t = _phases(u, v, lam)
    th = SQ3 * t / 2
    t1 = l1 * np.asarray(u, float) - np.asarray(v, float) / l1
    arg = SQ3 * t1 / 2 + p.theta0
    es, e2 = np.exp(-s / 2), np.exp(s)

    def V(sign):
        return np.stack([
            es * (lam * np.cos(th + 4 * np.pi / 3) + sign * l1 * np.cos(th + 2 * np.pi / 3)),
            es * (lam * np.sin(th + 4 * np.pi / 3) + sign * l1 * np.sin(th + 2 * np.pi / 3)),
            KZ * e2 * (lam + sign * l1),
        ], axis=-1)

    X0 = vacuum_surface(u, v, lam)
    with np.errstate(all="ignore"):
        tan = np.tan(arg)
        X1 = ((lam**3 - l1**3) / den) * X0 + (lam * l1 / den) * (
            SQ3 * tan[..., None] * V(1) + V(-1))
    bad = abs(np.cos(arg)) <= MASK_COS
    X1[bad] = np.nan
    return X1


def cubic_residual(point):
    """x^3 + y^3 + z^3 - 3xyz - 1 along the last axis."""
    p = np.asarray(point)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    return x**3 + y**3 + z**3 - 3 * x * y * z - 1


def affine_fit(source, target, translation=False):
    """Least-squares matrix A (and offset) with target ~ source @ A.T (+ offset).

    Returns ``(A, offset, max_residual)``; NaN rows are ignored.
    """
    S = np.asarray(source).reshape(-1, 3)
    Tg = np.asarray(target).reshape(-1, 3)
    ok = np.all(np.isfinite(S), axis=1) & np.all(np.isfinite(Tg), axis=1)
    S, Tg = S[ok], Tg[ok]
    if translation:
        S1 = np.hstack([S, np.ones((len(S), 1))])
        coef, *_ = np.linalg.lstsq(S1, Tg, rcond=None)
        A, off = coef[:3].T, coef[3]
    else:
        coef, *_ = np.linalg.lstsq(S, Tg, rcond=None)
        A, off = coef.T, np.zeros(3)
    resid = float(abs(S @ A.T + off - Tg).max()) if len(S) else np.nan
    return A, off, resid
