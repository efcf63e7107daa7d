"""Rectangular grids in asymptotic coordinates and finite-difference helpers.

Arrays living on a grid always carry the node axes first, shape
``(nu, nv, ...)``, with ``u`` along axis 0 and ``v`` along axis 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Grid:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if len(self.u) < 2 or len(self.v) < 2:
            raise ValueError("grid needs at least 2 nodes per direction")

    @classmethod
    def regular(cls, nu, nv, u0=-1.0, u1=1.0, v0=-1.0, v1=1.0):
        if nu < 2 or nv < 2:
            raise ValueError(f"grid counts must be >= 2, got {nu}x{nv}")
        if not (u1 > u0 and v1 > v0):
            raise ValueError("degenerate domain")
        return cls(np.linspace(u0, u1, nu), np.linspace(v0, v1, nv))

    @classmethod
    def parse(cls, counts="41x41", domain="-1:1,-1:1"):
        """Build a grid from CLI-style strings ``"NxM"`` and ``"u0:u1,v0:v1"``."""
        try:
            nu, nv = (int(s) for s in counts.lower().split("x"))
            us, vs = domain.split(",")
            u0, u1 = (float(s) for s in us.split(":"))
            v0, v1 = (float(s) for s in vs.split(":"))
        except ValueError as exc:
            raise ValueError(f"bad grid spec {counts!r} / {domain!r}") from exc
        return cls.regular(nu, nv, u0, u1, v0, v1)

    @property
    def shape(self):
        return (len(self.u), len(self.v))

    @property
    def du(self):
        return float(self.u[1] - self.u[0])

    @property
    def dv(self):
        return float(self.v[1] - self.v[0])

    def mesh(self):
        return np.meshgrid(self.u, self.v, indexing="ij")

    def refine(self):
        """Grid with the step halved; its even nodes coincide with ours."""
        nu, nv = self.shape
        return Grid(np.linspace(self.u[0], self.u[-1], 2 * nu - 1),
                    np.linspace(self.v[0], self.v[-1], 2 * nv - 1))

    def nearest(self, u, v):
        return int(np.argmin(abs(self.u - u))), int(np.argmin(abs(self.v - v)))

    def __repr__(self):
        return (f"Grid({self.shape[0]}x{self.shape[1]}, "
                f"[{self.u[0]:g},{self.u[-1]:g}]x[{self.v[0]:g},{self.v[-1]:g}])")


def d_u(f, grid):
    return np.gradient(f, grid.du, axis=0, edge_order=2)


def d_v(f, grid):
    return np.gradient(f, grid.dv, axis=1, edge_order=2)


def d_uv(f, grid):
    return d_v(d_u(f, grid), grid)


def _second(f, d, axis):
    f = np.moveaxis(np.asarray(f), axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / d**2
    if len(f) >= 4:
        out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / d**2
        out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / d**2
    else:
        out[0] = out[1]
        out[-1] = out[-2]
    return np.moveaxis(out, 0, axis)


def d_uu(f, grid):
    return _second(f, grid.du, 0)


def d_vv(f, grid):
    return _second(f, grid.dv, 1)


def interior(a, width=1):
    """Copy of ``a`` with a boundary band of ``width`` nodes set to NaN."""
    out = np.array(a, dtype=np.result_type(a, float), copy=True)
    out[:width] = np.nan
    out[-width:] = np.nan
    out[:, :width] = np.nan
    out[:, -width:] = np.nan
    return out


def nanmax_abs(a):
    """Max of |a| ignoring NaN; 0.0 for an all-NaN array."""
    a = np.abs(np.asarray(a))
    if a.size == 0 or np.all(np.isnan(a)):
        return 0.0
    return float(np.nanmax(a))


def coarse_nodes(fine):
    """Values of a refined-grid array at the nodes of the coarse grid."""
    return fine[::2, ::2]


def grow_mask(mask, width=1):
    """Dilate a boolean node mask so FD stencils touching it are excluded too."""
    out = np.array(mask, dtype=bool, copy=True)
    for _ in range(width):
        m = out.copy()
        m[1:] |= out[:-1]
        m[:-1] |= out[1:]
        m[:, 1:] |= out[:, :-1]
        m[:, :-1] |= out[:, 1:]
        out = m
    return out
