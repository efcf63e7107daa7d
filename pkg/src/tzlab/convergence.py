"""Grid-refinement checks for residuals that are only small up to discretization error."""
from __future__ import annotations

import numpy as np

from .grids import Grid, grow_mask

BLOWUP_CAP = 20.0
GROW = 2


def near_blowup(h, cap=BLOWUP_CAP):
    """Nodes where h is undefined or larger than ``cap`` in modulus."""
    h = np.asarray(h)
    with np.errstate(invalid="ignore"):
        return ~np.isfinite(h) | (abs(h) > cap)


def refinement_pair(fn, grid: Grid, grow=GROW):
    """Max residuals at step d and d/2, compared on the coarse nodes.

    ``fn(grid)`` returns ``(residual_nodes, bad_nodes)``.  Bad nodes of
    either grid, dilated by ``grow`` coarse nodes, are left out of both
    maxima so the two numbers cover the same set.
    Returns ``(coarse, fine, masked_fraction)``.
    """
    rc, bc = fn(grid)
    rf, bf = fn(grid.refine())
    rf, bf = rf[::2, ::2], bf[::2, ::2]
    m = grow_mask(np.asarray(bc) | np.asarray(bf), grow)
    keep = ~m & np.isfinite(rc) & np.isfinite(rf)
    if not keep.any():
        return np.nan, np.nan, 1.0
    return float(abs(rc[keep]).max()), float(abs(rf[keep]).max()), float(m.mean())


def add_refinement_check(rep, name, fn, grid: Grid, grow=GROW):
    coarse, fine, frac = refinement_pair(fn, grid, grow)
    return rep.add_ratio(name, coarse, fine, masked_fraction=frac)
