"""3x3 complex matrix helpers, the twisting automorphisms and projective lines.

Matrices are plain ``numpy`` arrays of shape ``(3, 3)`` (or stacks
``(..., 3, 3)`` where noted).  Everything is computed in complex double
precision; real values are extracted with :func:`real_part`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonTraceFree, SingularMatrix

EPS = np.exp(1j * np.pi / 3)
OMEGA = EPS**2

T = np.array([[0, 1, 0], [-EPS, 0, 0], [0, 0, EPS**2]], dtype=complex)
T_INV = np.linalg.inv(T)
P = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]], dtype=complex)
Q = np.diag([EPS**4, EPS**2, 1]).astype(complex)
Q_INV = np.diag([EPS**2, EPS**4, 1]).astype(complex)
N = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=complex)
N2 = N @ N
I3 = np.eye(3, dtype=complex)

SINGULAR_TOL = 1e-12
LINE_TOL = 1e-10
IMAG_TOL = 1e-9


@dataclass(frozen=True)
class StructureConstants:
    epsilon: complex = EPS
    T: np.ndarray = field(default_factory=lambda: T.copy())
    P: np.ndarray = field(default_factory=lambda: P.copy())
    Q: np.ndarray = field(default_factory=lambda: Q.copy())
    N: np.ndarray = field(default_factory=lambda: N.copy())


def as_matrix(M):
    M = np.asarray(M, dtype=complex)
    if M.shape[-2:] != (3, 3):
        raise ValueError(f"expected 3x3 matrix, got shape {M.shape}")
    return M


def is_invertible(M, tol=SINGULAR_TOL):
    M = as_matrix(M)
    scale = np.linalg.norm(M, axis=(-2, -1)) ** 3
    return np.all(abs(np.linalg.det(M)) > tol * scale)


def inv(M, tol=SINGULAR_TOL):
    """Inverse with a scale-aware singularity test |det| > tol*||M||^3."""
    M = as_matrix(M)
    if not is_invertible(M, tol):
        raise SingularMatrix("matrix is singular to working precision")
    return np.linalg.inv(M)


def real_part(a, tol=IMAG_TOL):
    """Real part of ``a``; raises if the imaginary part is not negligible."""
    a = np.asarray(a)
    if np.iscomplexobj(a):
        im = np.nanmax(abs(a.imag)) if a.size else 0.0
        if im > tol:
            raise ValueError(f"imaginary part {im:.3g} exceeds {tol:g}")
        return a.real.copy()
    return a.astype(float)


def tau(M):
    return np.conj(as_matrix(M))


def sigma_group(M):
    M = as_matrix(M)
    return T @ inv(np.swapaxes(M, -1, -2)) @ T_INV


def sigma_algebra(M):
    M = as_matrix(M)
    return -T @ np.swapaxes(M, -1, -2) @ T_INV


def nu(M):
    return Q @ as_matrix(M) @ Q_INV


def mu(M):
    M = as_matrix(M)
    return P @ inv(np.swapaxes(M, -1, -2)) @ P


def eigenspace_project(M, j, tol=1e-10):
    """Component of a trace-free ``M`` in the eps**j eigenspace of sigma_algebra."""
    M = as_matrix(M)
    if abs(np.trace(M)) > tol * max(1.0, np.linalg.norm(M)):
        raise NonTraceFree(f"trace {np.trace(M):.3g} is not zero")
    out = np.zeros_like(M)
    S = M
    for k in range(6):
        out += EPS ** (-j * k) * S
        S = sigma_algebra(S)
    return out / 6


# eigenspace shapes, handy for tests and docs
def shape(j, x=1.0, y=2.0):
    """A representative member of the eps**j eigenspace (``y`` used by j = 1, 5)."""
    x, y = complex(x), complex(y)
    z = 0j
    shapes = {
        0: [[x, z, z], [z, -x, z], [z, z, z]],
        1: [[z, z, x], [y, z, z], [z, x, z]],
        2: [[z, z, z], [z, z, x], [-x, z, z]],
        3: [[x, z, z], [z, x, z], [z, z, -2 * x]],
        4: [[z, z, x], [z, z, z], [z, -x, z]],
        5: [[z, y, z], [z, z, x], [x, z, z]],
    }
    return np.array(shapes[j], dtype=complex)


class ProjLine:
    """A line C*(a, b, c) in C^3, stored with c = 1 whenever c is nonzero."""

    __slots__ = ("rep",)

    def __init__(self, rep):
        z = np.asarray(rep, dtype=complex).reshape(3)
        nz = np.linalg.norm(z)
        if nz == 0 or not np.isfinite(nz):
            raise ValueError("a line needs a finite nonzero representative")
        if abs(z[2]) > LINE_TOL * nz:
            z = z / z[2]
        else:
            z = z / z[np.argmax(abs(z))]
        object.__setattr__(self, "rep", z)

    def __setattr__(self, name, value):
        raise AttributeError("ProjLine is immutable")

    @property
    def a(self):
        return self.rep[0]

    @property
    def b(self):
        return self.rep[1]

    @property
    def c(self):
        return self.rep[2]

    def is_real(self, tol=1e-12):
        return bool(np.all(abs(self.rep.imag) <= tol))

    def conj(self):
        return ProjLine(np.conj(self.rep))

    def __eq__(self, other):
        if not isinstance(other, ProjLine):
            return NotImplemented
        x, y = self.rep, other.rep
        # proportional iff the 2x2 minors vanish
        cross = np.outer(x, y) - np.outer(y, x)
        return bool(abs(cross).max() <= LINE_TOL * np.linalg.norm(x) * np.linalg.norm(y))

    def __hash__(self):
        return hash(tuple(np.round(self.rep, 8)))

    def __repr__(self):
        def fmt(z):
            return f"{z.real:g}" if abs(z.imag) < 1e-15 else f"{z:g}"
        return "ProjLine(" + ", ".join(fmt(z) for z in self.rep) + ")"


def cone_contains(line, tol=LINE_TOL):
    """True if the line lies in the degeneracy cone {2 z1 z2 = z3^2 or z3 = 0}."""
    z = line.rep if isinstance(line, ProjLine) else np.asarray(line, dtype=complex)
    n = np.linalg.norm(z)
    return bool(abs(2 * z[0] * z[1] - z[2] ** 2) <= tol * n**2 or abs(z[2]) <= tol * n)


def cone_distance(z):
    """Scale-free distance-like measure of stacked row vectors ``z`` from the cone."""
    z = np.asarray(z, dtype=complex)
    n = np.linalg.norm(z, axis=-1)
    quad = abs(2 * z[..., 0] * z[..., 1] - z[..., 2] ** 2) / n**2
    lin = abs(z[..., 2]) / n
    return np.minimum(quad, lin)
