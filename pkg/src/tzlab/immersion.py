"""Surfaces sampled on a grid, with optional exact partials and a node mask."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .grids import Grid, d_u, d_v
from .loopalgebra import IMAG_TOL


@dataclass(eq=False)
class ImmersionGrid:
    """X on the nodes of ``grid`` (shape ``(nu, nv, 3)``) and its conformal factor.

    ``h`` is the factor attached by whoever produced the surface: the seed
    or transformed solution for closed forms and dressings, the recovered
    det(X_u, X_v, X) for frames.  ``mask`` is True on discarded nodes.
    """

    grid: Grid
    X: np.ndarray
    h: Optional[np.ndarray] = None
    lam: complex = 1.0
    mask: Optional[np.ndarray] = None
    Xu: Optional[np.ndarray] = None
    Xv: Optional[np.ndarray] = None
    h_u: Optional[np.ndarray] = None
    h_v: Optional[np.ndarray] = None

    def __post_init__(self):
        self.X = np.asarray(self.X)
        if self.X.shape != self.grid.shape + (3,):
            raise ValueError(f"X has shape {self.X.shape}, grid is {self.grid.shape}")
        if self.mask is None:
            self.mask = ~np.all(np.isfinite(self.X), axis=-1)
        else:
            self.mask = np.asarray(self.mask, bool) | ~np.all(np.isfinite(self.X), axis=-1)

    @property
    def gamma(self):
        return self.lam**3

    @property
    def masked_fraction(self):
        return float(self.mask.mean())

    def masked(self, a):
        """Copy of a node array with masked nodes set to NaN."""
        a = np.array(a, dtype=np.result_type(a, float), copy=True)
        a[self.mask] = np.nan
        return a

    def fd_partials(self):
        X = self.masked(self.X)
        return d_u(X, self.grid), d_v(X, self.grid)

    def partials(self):
        if self.Xu is not None and self.Xv is not None:
            return self.Xu, self.Xv
        return self.fd_partials()

    def imag_max(self):
        if not np.iscomplexobj(self.X):
            return 0.0
        im = abs(self.masked(self.X).imag)
        return float(np.nanmax(im)) if np.any(np.isfinite(im)) else 0.0

    def real(self, tol=IMAG_TOL):
        """Real copy; raises ValueError if any imaginary part exceeds ``tol``."""
        def re(a, check=True):
            if a is None or not np.iscomplexobj(a):
                return a
            if check:
                im = np.abs(np.where(self.mask[(...,) + (None,) * (a.ndim - 2)], 0, a.imag))
                im = np.nan_to_num(im)
                if im.size and im.max() > tol:
                    raise ValueError(f"imaginary part {im.max():.3g} exceeds {tol:g}")
            return a.real.copy()
        return replace(self, X=re(self.X), h=re(self.h), Xu=re(self.Xu, False),
                       Xv=re(self.Xv, False), h_u=re(self.h_u, False),
                       h_v=re(self.h_v, False), lam=complex(self.lam).real
                       if abs(complex(self.lam).imag) == 0 else self.lam)

    def scaled(self, k):
        """The surface k*X.  The attached h is kept: X_uv = hX is linear in X."""
        def sc(a):
            return None if a is None else k * a
        return replace(self, X=k * self.X, Xu=sc(self.Xu), Xv=sc(self.Xv))
