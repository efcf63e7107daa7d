"""Classical and dressing transformations of affine spheres.

Conventions: a surface X of the family member at ``gamma = lam**3`` solves

    X_uu = (h_u/h) X_u + (gamma/h) X_v,  X_uv = h X,  X_vv = X_u/(gamma h) + (h_v/h) X_v

and a scalar solution phi at ``gamma1`` solves the same system.  With
p = phi_u/phi, q = phi_v/phi the transformed solution is h1 = -h + 2 p q,
which equals h - 2 (ln phi)_uv because phi_uv = h phi.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import (AllMasked, DegenerateKernel, GammaCollision, NonRealOutput,
                     OpenConditionViolated, PoleCollision, ZeroH)
from .grids import Grid, nanmax_abs
from .immersion import ImmersionGrid
from .lax_frame import (FrameFamily, FrameGrid, IntegratedFamily, ScalarSolution,
                        SolutionField, VacuumFamily, scalar_solution)
from .loopalgebra import P, cone_distance
from .rational_elements import (Kind, LoopProduct, SimpleElement, element_inverse_matrix,
                                permute_factorize)
from .report import MASK_CAP, VerificationReport

PHI_TOL = 1e-8
OPEN_TOL = 1e-8
KERNEL_TOL = 1e-10
CIRCLE_RADIUS = 1e-3
CIRCLE_POINTS = 8


# classical transformation -------------------------------------------------

@dataclass
class Jet:
    """Values with first partials: h and a solution Y of the linear system at gamma."""

    h: np.ndarray
    h_u: np.ndarray
    h_v: np.ndarray
    Y: np.ndarray
    Y_u: np.ndarray
    Y_v: np.ndarray
    gamma: complex


def _e(a, like):
    """Broadcast a node array against Y (which may carry a trailing xyz axis)."""
    a = np.asarray(a)
    return a[..., None] if np.ndim(like) == a.ndim + 1 else a


def classical_step(jet: Jet, phi, phi_u, phi_v, gamma1):
    """One classical transformation with exact first partials of the output.

    Second derivatives of Y and phi come from the linear system, so no
    differencing is involved.
    """
    h, hu, hv, gm = jet.h, jet.h_u, jet.h_v, jet.gamma
    Y, Yu, Yv = jet.Y, jet.Y_u, jet.Y_v
    p, q = phi_u / phi, phi_v / phi
    p_u = (hu / h) * p + (gamma1 / h) * q - p * p
    p_v = h - p * q
    q_u = p_v
    q_v = p / (gamma1 * h) + (hv / h) * q - q * q
    h1 = -h + 2 * p * q
    h1u = -hu + 2 * (p_u * q + p * q_u)
    h1v = -hv + 2 * (p_v * q + p * q_v)

    E = lambda a: _e(a, Y)  # noqa: E731
    He = E(h)
    A, B = Yv / He, Yu / He
    A_u = Y - E(hu / h**2) * Yv
    A_v = Yu / (gm * He**2)
    B_u = gm * Yv / He**2
    B_v = Y - E(hv / h**2) * Yu
    den = gm + gamma1
    Y1 = ((gm - gamma1) * Y - 2 * gm * E(p) * A + 2 * gamma1 * E(q) * B) / den
    Y1u = ((gm - gamma1) * Yu - 2 * gm * (E(p_u) * A + E(p) * A_u)
           + 2 * gamma1 * (E(q_u) * B + E(q) * B_u)) / den
    Y1v = ((gm - gamma1) * Yv - 2 * gm * (E(p_v) * A + E(p) * A_v)
           + 2 * gamma1 * (E(q_v) * B + E(q) * B_v)) / den
    return Jet(h1, h1u, h1v, Y1, Y1u, Y1v, gm)


def _phi_mask(phi):
    a = abs(np.asarray(phi))
    ref = np.nanmax(a) if np.any(np.isfinite(a)) else 0.0
    return ~np.isfinite(a) | (a < PHI_TOL * ref)


def _maybe_real(a, tol=1e-12):
    if a is None or not np.iscomplexobj(a):
        return a
    if nanmax_abs(a.imag) <= tol * max(1.0, nanmax_abs(a.real)):
        return a.real.copy()
    return a


def _mask_nan(a, mask):
    a = np.array(a, dtype=np.result_type(a, float), copy=True)
    a[mask] = np.nan
    return a


def classical_transform(h: SolutionField, X: ImmersionGrid, phi: ScalarSolution,
                        mask_cap=MASK_CAP):
    """Classical transform of (h, X) by phi; returns (h1 field, X1 surface).

    Nodes where |phi| < 1e-8 max|phi| are masked.  X partials are the exact
    ones carried by ``X`` when present, finite differences otherwise.
    """
    gm, g1 = complex(X.gamma), complex(phi.gamma)
    if abs(gm + g1) <= 1e-12 * (abs(gm) + abs(g1)):
        raise GammaCollision("gamma = -gamma1")
    mask = _phi_mask(phi.phi) | X.mask
    if mask.all():
        raise AllMasked("phi vanishes on every node")
    Xu, Xv = X.partials()
    with np.errstate(all="ignore"):
        jet = classical_step(Jet(h.h, h.h_u, h.h_v, X.X, Xu, Xv, gm),
                             phi.phi, phi.phi_u, phi.phi_v, g1)
    vals = [_maybe_real(_mask_nan(a, mask)) for a in
            (jet.h, jet.h_u, jet.h_v, jet.Y, jet.Y_u, jet.Y_v)]
    h1 = SolutionField.from_values(X.grid, np.real(vals[0]), "transformed",
                                   np.real(vals[1]), np.real(vals[2])) \
        if not np.iscomplexobj(vals[0]) else _ComplexField(X.grid, *vals[:3])
    X1 = ImmersionGrid(X.grid, vals[3], vals[0], X.lam, mask, vals[4], vals[5],
                       vals[1], vals[2])
    return h1, X1


class _ComplexField:
    """Minimal stand-in for a SolutionField with complex values (intermediate steps)."""

    def __init__(self, grid, h, h_u, h_v):
        self.grid, self.h, self.h_u, self.h_v = grid, h, h_u, h_v


def field_of(X: ImmersionGrid):
    """The solution attached to a surface, as a field with its partials."""
    if X.h_u is None:
        return SolutionField.from_values(X.grid, np.real(X.h))
    if np.iscomplexobj(X.h):
        return _ComplexField(X.grid, X.h, X.h_u, X.h_v)
    return SolutionField.from_values(X.grid, X.h, h_u=X.h_u, h_v=X.h_v)


def transform_scalar(h, phi2: ScalarSolution, phi1: ScalarSolution):
    """phi2 carried along the transformation by phi1 (a scalar solution for h1)."""
    g1, g2 = complex(phi1.gamma), complex(phi2.gamma)
    if abs(g1 + g2) <= 1e-12 * (abs(g1) + abs(g2)):
        raise GammaCollision("gamma1 = -gamma2")
    with np.errstate(all="ignore"):
        jet = classical_step(Jet(h.h, h.h_u, h.h_v, phi2.phi, phi2.phi_u, phi2.phi_v, g2),
                             phi1.phi, phi1.phi_u, phi1.phi_v, g1)
    return ScalarSolution(phi2.grid, jet.Y, jet.Y_u, jet.Y_v, g2)


# duality ------------------------------------------------------------------

def dual_surface(X: ImmersionGrid, h=None) -> ImmersionGrid:
    """X* = X_u x X_v / h, a member of the family at -lam.

    When X carries exact partials the dual gets exact ones too:
    X*_u = X_u x X and X*_v = X x X_v.
    """
    hv = X.h if h is None else (h.h if hasattr(h, "h") else np.asarray(h))
    hv = X.masked(hv)
    if np.any(np.nan_to_num(abs(hv), nan=1.0) < 1e-14):
        raise ZeroH("h vanishes at an unmasked node")
    Xu, Xv = X.partials()
    Xs = np.cross(Xu, Xv) / hv[..., None]
    Xsu = Xsv = None
    if X.Xu is not None:
        Xsu, Xsv = np.cross(X.Xu, X.X), np.cross(X.X, X.Xv)
    return ImmersionGrid(X.grid, Xs, hv, -X.lam, X.mask.copy(), Xsu, Xsv, X.h_u, X.h_v)


# closed forms of the dressed surfaces ---------------------------------------

def dressed_surface_closed_form(X: ImmersionGrid, h, phi: ScalarSolution, alpha, lam=None,
                                kind=Kind.RANK1):
    """Closed-form dressed surface at ``lam`` (default X.lam).

    Rank1: [(lam^3 - a^3) h X - 2 lam^3 p X_v + 2 a^3 q X_u] / [(lam^3 + a^3) h]
    Rank2: [(lam^3 + a^3) h X - 2 lam^3 p X_v - 2 a^3 q X_u] / [(lam^3 - a^3) h]
    with p, q the log-derivatives of phi.  Both attach h - 2 (ln phi)_uv.
    """
    kind = Kind(kind) if not isinstance(kind, Kind) else kind
    lam = X.lam if lam is None else lam
    G, A = complex(lam) ** 3, complex(alpha) ** 3
    s = 1.0 if kind is Kind.RANK1 else -1.0
    den = G + s * A
    if abs(den) <= 1e-12 * (abs(G) + abs(A)):
        raise PoleCollision("spectral value hits a pole of the closed form")
    hv = h.h if hasattr(h, "h") else np.asarray(h)
    mask = _phi_mask(phi.phi) | X.mask
    Xu, Xv = X.partials()
    with np.errstate(all="ignore"):
        p, q = phi.phi_u / phi.phi, phi.phi_v / phi.phi
        E = lambda a: _e(a, X.X)  # noqa: E731
        Y = ((G - s * A) * E(hv) * X.X - 2 * G * E(p) * Xv + 2 * s * A * E(q) * Xu) / (den * E(hv))
        h1 = -hv + 2 * p * q
    Y, h1 = _maybe_real(_mask_nan(Y, mask)), _maybe_real(_mask_nan(h1, mask))
    return ImmersionGrid(X.grid, Y, h1, lam, mask)


# dressing -----------------------------------------------------------------

@dataclass
class TildeLineField:
    """Nodewise lines (a, b, 1) of the right factor and the open-condition flags."""

    grid: Grid
    lines: np.ndarray
    open_flag: np.ndarray


def _rank2_kernel(A, Fa):
    K = A @ Fa @ P
    _, s, Vh = np.linalg.svd(K)
    degenerate = s[..., 1] <= KERNEL_TOL * s[..., 0]
    return np.conj(Vh[..., -1, :]), degenerate


class DressedFamily(FrameFamily):
    """Frames g(lam) F(lam) k(lam)^{-1} of the solution dressed by ``element``.

    ``k`` is the simple element with the same kind and pole whose line
    varies over the grid; it is what makes the product regular at the poles.
    """

    def __init__(self, base: FrameFamily, element: SimpleElement, mask_cap=MASK_CAP,
                 allow_complex=False):
        super().__init__()
        if not allow_complex and not element.claims_tau:
            raise ValueError("complex pole or line: pass allow_complex=True")
        self.base, self.element = base, element
        self.grid, self.basepoint = base.grid, base.basepoint
        al = element.pole
        Fa = base.at(al)
        if element.kind is Kind.RANK1:
            raw = np.einsum("i,...ij->...j", element.line.rep, Fa)
            bad = np.zeros(self.grid.shape, bool)
        else:
            raw, bad = _rank2_kernel(element.residue(), Fa)
        with np.errstate(all="ignore"):
            mask = base.mask | ~np.all(np.isfinite(raw), axis=-1)
            raw_ok = np.where(mask[..., None], 1.0, raw)
            mask |= cone_distance(raw_ok) <= OPEN_TOL
            mask |= _phi_mask(np.where(mask, np.nan, raw[..., 2]))
        if np.any(bad & ~mask):
            i, j = np.argwhere(bad & ~mask)[0]
            raise DegenerateKernel(f"kernel of A F(alpha) P is not a line at node ({i}, {j})")
        frac = mask.mean()
        nodes = np.argwhere(mask & ~base.mask)
        if frac > mask_cap or (len(nodes) and mask_cap <= 0):
            raise OpenConditionViolated(
                f"open condition fails on {len(nodes)} nodes ({frac:.1%})", nodes)
        with np.errstate(all="ignore"):
            tilde = raw / raw[..., 2:3]
        tilde[mask] = [0.0, 0.0, 1.0]
        self._mask = mask
        self.tilde = TildeLineField(self.grid, _mask_nan(tilde, mask), ~mask)
        self._a, self._b = tilde[..., 0], tilde[..., 1]
        hh = (2 * self._a * self._b - 1) * base.h
        self.h = _maybe_real(_mask_nan(hh, mask))
        self.raw_line = raw

    @property
    def mask(self):
        return self._mask

    def right_inverse(self, lam):
        e = self.element
        return element_inverse_matrix(e.kind, e.pole, self._a, self._b, lam)

    def _frame(self, lam):
        F = self.element.evaluate(lam) @ self.base.at(lam) @ self.right_inverse(lam)
        F[self._mask] = np.nan
        return F

    def unleft(self, lam):
        K = self.base.unleft(lam) @ self.right_inverse(lam)
        K[self._mask] = np.nan
        return K

    def left_elements(self):
        out = [self.element]
        if isinstance(self.base, DressedFamily):
            out = self.base.left_elements() + out
        return out

    def residues(self, radius=CIRCLE_RADIUS, points=CIRCLE_POINTS):
        """Discrete contour integrals of the new frame around +alpha and -alpha."""
        al = self.element.pole
        out = {}
        ang = np.exp(2j * np.pi * np.arange(points) / points)
        for name, c in (("+alpha", al), ("-alpha", -al)):
            zs = c + radius * ang
            Fs = [self._frame(z) for z in zs]
            res = sum(F * (z - c) for F, z in zip(Fs, zs)) / points
            out[name] = nanmax_abs(res)
        return out

    def det_residual(self, lam):
        return nanmax_abs(np.linalg.det(self.at(lam)) - 1)


class DressResult(NamedTuple):
    ftilde: FrameGrid
    tilde: TildeLineField
    surface: ImmersionGrid
    family: DressedFamily
    residues: dict


def _family(base):
    if isinstance(base, FrameFamily):
        return base
    if isinstance(base, SolutionField):
        return IntegratedFamily(base)
    raise TypeError("expected a FrameFamily or SolutionField")


def _check_lambda_vs_pole(e, lam):
    L, A = complex(lam) ** 3, e.pole**3
    scale = abs(L) + abs(A)
    if abs(L - A) <= 1e-9 * scale or abs(L + A) <= 1e-9 * scale:
        raise PoleCollision("output spectral value sits on a pole of the element or its inverse")


def _dress(e, base, lam, mask_cap, allow_complex, check_residues):
    fam = DressedFamily(_family(base), e, mask_cap, allow_complex)
    _check_lambda_vs_pole(e, lam)
    res = fam.residues() if check_residues else {}
    X = fam.surface(lam)
    X.X, X.Xu, X.Xv = (_maybe_real(a, 1e-12) for a in (X.X, X.Xu, X.Xv))
    if np.iscomplexobj(X.X) is False and isinstance(X.lam, complex) and X.lam.imag == 0:
        X.lam = X.lam.real
    return DressResult(fam.frame_grid(lam), fam.tilde, X, fam, res)


def dress_rank1(e: SimpleElement, base, lam=1.0, mask_cap=MASK_CAP, allow_complex=False,
                check_residues=True):
    """Dress by a rank-1 element; the surface is the third column of F k^{-1}."""
    if e.kind is not Kind.RANK1:
        raise ValueError("dress_rank1 needs a rank-1 element")
    return _dress(e, base, lam, mask_cap, allow_complex, check_residues)


def dress_rank2(e: SimpleElement, base, lam=1.0, mask_cap=MASK_CAP, allow_complex=False,
                check_residues=True):
    """Dress by a rank-2 element; right-factor lines come from the kernel of A F(alpha) P."""
    if e.kind is not Kind.RANK2:
        raise ValueError("dress_rank2 needs a rank-2 element")
    return _dress(e, base, lam, mask_cap, allow_complex, check_residues)


def rank2_closed_form_scale(alpha, lam):
    """Constant c with (rank-2 dressing surface) = c * (rank-2 closed form)."""
    G, A = complex(lam) ** 3, complex(alpha) ** 3
    return (G - A) / (G + A)


def chain(base, elements, mask_cap=MASK_CAP, allow_complex=False):
    """Dress successively; ``elements[0]`` acts first."""
    fam = _family(base)
    for e in elements:
        fam = DressedFamily(fam, e, mask_cap, allow_complex)
    return fam


# permutability and breathers ------------------------------------------------

def _surface_gap(A: ImmersionGrid, B: ImmersionGrid):
    return nanmax_abs(A.masked(B.masked(A.X - B.X)))


def _h_gap(a, b):
    """Nodewise |a - b| / max(1, |a|): h blows up near singular curves."""
    a, b = np.asarray(a), np.asarray(b)
    with np.errstate(invalid="ignore"):
        return nanmax_abs(abs(a - b) / np.maximum(1.0, abs(a)))


def permutability_check(base, g1: SimpleElement, g2: SimpleElement, lam=1.0, seed=42,
                        tol=1e-7, mask_cap=MASK_CAP):
    """Both orders of a double dressing, through loop-group factors and classically."""
    g1t, g2t = permute_factorize(g1, g2)
    fam = _family(base)
    rep = VerificationReport(mask_cap=mask_cap)

    rng = np.random.default_rng(seed)
    samples = rng.normal(size=12) + 1j * rng.normal(size=12)
    perm = (g2t.evaluate(samples) @ g1.evaluate(samples)
            - g1t.evaluate(samples) @ g2.evaluate(samples))
    rep.add("perm-identity", abs(perm).max(), 1e-10)

    f12 = chain(fam, [g1, g2t], mask_cap)
    f21 = chain(fam, [g2, g1t], mask_cap)
    X12, X21 = f12.surface(lam), f21.surface(lam)
    mf = float((X12.mask | X21.mask).mean())
    rep.add("h12-h21", _h_gap(f12.h, f21.h), tol, mf)
    rep.add("X12-X21", _surface_gap(X12, X21), tol, mf)

    # classical route: scalars from the seed frames, carried by the jets
    X0 = fam.surface(lam)
    h0 = field_of(ImmersionGrid(fam.grid, X0.X, fam.h, lam, X0.mask, X0.Xu, X0.Xv,
                                *_seed_partials(fam)))
    phis = {k: scalar_solution(g.line, fam.frame_grid(g.pole)) for k, g in ((1, g1), (2, g2))}
    routes = {}
    for a, b in ((1, 2), (2, 1)):
        h1, X1 = classical_transform(h0, X0, phis[a], mask_cap)
        phi_ab = transform_scalar(h0, phis[b], phis[a])
        h2, X2 = classical_transform(h1, X1, phi_ab, mask_cap)
        routes[(a, b)] = (h2, X2)
    (hc12, Xc12), (hc21, Xc21) = routes[(1, 2)], routes[(2, 1)]
    mfc = float((Xc12.mask | Xc21.mask).mean())
    rep.add("classical-h12-h21", _h_gap(hc12.h, hc21.h), tol, mfc)
    rep.add("classical-X12-X21", _surface_gap(Xc12, Xc21), tol, mfc)
    rep.add("dressing-vs-classical-h12", _h_gap(f12.h, hc12.h), tol, max(mf, mfc))
    rep.add("dressing-vs-classical-X12", _surface_gap(X12, Xc12), tol, max(mf, mfc))
    rep.lines = (g1t.line, g2t.line)
    rep.h12 = f12.h
    return rep


def _seed_partials(fam):
    """Partials of the seed h: exact for integrated analytic fields, FD otherwise."""
    if isinstance(fam, IntegratedFamily):
        return fam.field.h_u, fam.field.h_v
    if isinstance(fam, VacuumFamily):
        z = np.zeros(fam.grid.shape)
        return z, z
    f = SolutionField.from_values(fam.grid, np.real(fam.h))
    return f.h_u, f.h_v


@dataclass
class BreatherResult:
    """Real breather output; imag_h and imag_X are the absolute discarded parts."""

    h: SolutionField
    X: ImmersionGrid
    imag_h: float
    imag_X: float
    family: Optional[DressedFamily] = None


def dress_breather(f: LoopProduct, base, lam=1.0, mask_cap=MASK_CAP, tol=1e-9):
    """Dress by a breather product, rightmost factor first; returns real h and X."""
    if not f.breather:
        raise ValueError("expected a breather product")
    fam = chain(base, list(reversed(f.factors)), mask_cap, allow_complex=True)
    X = fam.surface(lam)
    imag_h = nanmax_abs(np.imag(fam.h))
    imag_X = nanmax_abs(np.imag(X.masked(X.X)))
    # judged relative to max(1, |value|): near singular curves h reaches 1e5 or more
    with np.errstate(invalid="ignore"):
        rel_h = nanmax_abs(np.imag(fam.h) / np.maximum(1.0, abs(fam.h)))
        Xm = X.masked(X.X)
        rel_X = nanmax_abs(np.imag(Xm) / np.maximum(1.0, abs(Xm)))
    if rel_h > tol or rel_X > tol:
        raise NonRealOutput(f"breather output is not real: |Im h| = {imag_h:.3g}, "
                            f"|Im X| = {imag_X:.3g}")
    h = np.real(fam.h)
    Xr = ImmersionGrid(X.grid, np.real(X.X), h, complex(lam).real, X.mask,
                       np.real(X.Xu), np.real(X.Xv))
    return BreatherResult(SolutionField.from_values(X.grid, h, "breather"), Xr,
                          imag_h, imag_X, fam)


def conjugate_breather(f: LoopProduct) -> LoopProduct:
    """The same loop written with conjugated factor data.

    Conjugation keeps the factor order, so the pole alpha moves to the left.
    """
    return LoopProduct([SimpleElement(e.kind, np.conj(e.pole), e.line.conj())
                        for e in f.factors], breather=True)
