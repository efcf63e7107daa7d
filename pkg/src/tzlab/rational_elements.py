"""Simple rational elements of the twisted loop group and their products.

A simple element is fixed by its kind (rank 1 or rank 2 residue), a pole
``alpha`` and a line ``(a, b, 1)`` off the degeneracy cone.  Its value is

    g(lam) = I + 2 / (lam**3 - alpha**3) * M(lam)

with ``M`` quadratic in ``lam``.  Poles sit at alpha times the cube roots of
unity; the inverse is ``P g(-lam)^t P``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import loopalgebra as la
from .errors import AtPole, BadArgument, ConeLine, PoleCollision, ZeroPole
from .loopalgebra import EPS, P, Q, Q_INV, ProjLine, cone_contains
from .report import VerificationReport

POLE_TOL = 1e-9


class Kind(str, enum.Enum):
    RANK1 = "Rank1"
    RANK2 = "Rank2"

    @property
    def rank(self):
        return 1 if self is Kind.RANK1 else 2


def _kind(kind):
    if isinstance(kind, Kind):
        return kind
    k = str(kind).lower().replace("-", "").replace("_", "")
    if k in ("rank1", "1"):
        return Kind.RANK1
    if k in ("rank2", "2"):
        return Kind.RANK2
    raise ValueError(f"unknown element kind {kind!r}")


def numerator(kind, alpha, a, b, lam):
    """The matrix M(lam) of the element; broadcasts over a, b and lam."""
    kind = _kind(kind)
    a, b, lam = np.broadcast_arrays(np.asarray(a, complex), np.asarray(b, complex),
                                    np.asarray(lam, complex))
    al = complex(alpha)
    k = 2 * a * b - 1
    al3, al2l, all2 = al**3 * np.ones_like(lam), al**2 * lam, al * lam**2
    if kind is Kind.RANK1:
        rows = [
            [al3 * a * b / k, all2 * b**2 / k, al2l * b / k],
            [al2l * a**2, al3 * a * b, all2 * a],
            [all2 * a, al2l * b, al3],
        ]
    else:
        rows = [
            [al3 * (a * b - 1) / k, -all2 * b**2 / k, al2l * b / k],
            [al2l * a**2, al3 * (1 - a * b), -all2 * a],
            [-all2 * a, al2l * b, 0 * al3],
        ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def _check_pole(alpha, lam, sign=1.0):
    lam = np.asarray(lam, complex)
    gap = abs(lam**3 - sign * complex(alpha) ** 3)
    scale = abs(lam) ** 3 + abs(alpha) ** 3
    if np.any(gap <= POLE_TOL * scale):
        where = "pole" if sign > 0 else "pole of the inverse"
        raise AtPole(f"spectral value at a {where} (alpha={alpha})")


def element_matrix(kind, alpha, a, b, lam):
    """Value of the simple element with line (a, b, 1); broadcasts over a, b, lam."""
    _check_pole(alpha, lam)
    lam = np.asarray(lam, complex)
    M = numerator(kind, alpha, a, b, lam)
    c = (2 / (lam**3 - complex(alpha) ** 3))[..., None, None]
    return la.I3 + c * M


def element_inverse_matrix(kind, alpha, a, b, lam):
    """Inverse of :func:`element_matrix`, computed as P g(-lam)^t P."""
    _check_pole(alpha, lam, sign=-1.0)
    lam = np.asarray(lam, complex)
    g = la.I3 + (2 / (-lam**3 - complex(alpha) ** 3))[..., None, None] * numerator(
        kind, alpha, a, b, -lam)
    return P @ np.swapaxes(g, -1, -2) @ P


def _as_line(line):
    return line if isinstance(line, ProjLine) else ProjLine(line)


@dataclass(frozen=True)
class SimpleElement:
    kind: Kind
    pole: complex
    line: ProjLine

    def __post_init__(self):
        object.__setattr__(self, "kind", _kind(self.kind))
        object.__setattr__(self, "pole", complex(self.pole))
        object.__setattr__(self, "line", _as_line(self.line))
        if self.pole == 0:
            raise ZeroPole("pole must be nonzero")
        if cone_contains(self.line):
            raise ConeLine(f"{self.line} lies in the degeneracy cone")

    @property
    def a(self):
        return self.line.a

    @property
    def b(self):
        return self.line.b

    @property
    def rank(self):
        return self.kind.rank

    @property
    def claims_tau(self):
        return abs(self.pole.imag) <= 1e-14 * abs(self.pole) and self.line.is_real()

    def numerator(self, lam):
        return numerator(self.kind, self.pole, self.a, self.b, lam)

    def residue(self, point=None):
        """Residue of g at ``point`` (default: the pole alpha)."""
        z = self.pole if point is None else complex(point)
        if abs(z**3 - self.pole**3) > POLE_TOL * abs(self.pole) ** 3:
            raise ValueError(f"{z} is not a pole")
        return 2 * self.numerator(z) / (3 * z**2)

    def residue_matrix(self, point=None):
        """Residue at ``point`` divided by 2*point; these obey the Q-conjugation rules."""
        z = self.pole if point is None else complex(point)
        return self.residue(z) / (2 * z)

    def evaluate(self, lam):
        if np.ndim(lam) == 0 and np.isinf(abs(complex(lam))):
            return la.I3.copy()
        return element_matrix(self.kind, self.pole, self.a, self.b, lam)

    def evaluate_inverse(self, lam):
        if np.ndim(lam) == 0 and np.isinf(abs(complex(lam))):
            return la.I3.copy()
        return element_inverse_matrix(self.kind, self.pole, self.a, self.b, lam)

    def det_at(self, lam):
        _check_pole(self.pole, lam)
        lam = np.asarray(lam, complex)
        return ((lam**3 + self.pole**3) / (lam**3 - self.pole**3)) ** self.rank

    def with_line(self, line):
        return SimpleElement(self.kind, self.pole, line)

    def to_json(self):
        return {
            "kind": self.kind.value,
            "pole": [self.pole.real, self.pole.imag],
            "line": [[z.real, z.imag] for z in self.line.rep],
        }

    @classmethod
    def from_json(cls, d):
        return cls(d["kind"], complex(*d["pole"]), [complex(*z) for z in d["line"]])


def make_rank1(alpha, line):
    return SimpleElement(Kind.RANK1, alpha, line)


def make_rank2(alpha, line):
    return SimpleElement(Kind.RANK2, alpha, line)


@dataclass(frozen=True)
class LoopProduct:
    """Ordered product; ``factors[0]`` is the leftmost matrix."""

    factors: Sequence[SimpleElement]
    breather: bool = False

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if self.breather and len(self.factors) != 2:
            raise ValueError("a breather has exactly two factors")

    @property
    def claims_tau(self):
        return self.breather or all(f.claims_tau for f in self.factors)

    def evaluate(self, lam):
        out = la.I3
        for f in self.factors:
            out = out @ f.evaluate(lam)
        return out

    def evaluate_inverse(self, lam):
        out = la.I3
        for f in self.factors:
            out = f.evaluate_inverse(lam) @ out
        return out

    def det_at(self, lam):
        out = 1.0
        for f in self.factors:
            out = out * f.det_at(lam)
        return out

    def to_json(self):
        return {"factors": [f.to_json() for f in self.factors], "breather": self.breather}

    @classmethod
    def from_json(cls, d):
        return cls([SimpleElement.from_json(f) for f in d["factors"]], d.get("breather", False))


def from_json(d):
    return LoopProduct.from_json(d) if "factors" in d else SimpleElement.from_json(d)


def evaluate(e, lam):
    return e.evaluate(lam)


def evaluate_inverse(e, lam):
    return e.evaluate_inverse(lam)


def det_at(e, lam):
    return e.det_at(lam)


def _cube_collision(a1, a2):
    c1, c2 = complex(a1) ** 3, complex(a2) ** 3
    scale = abs(c1) + abs(c2)
    return abs(c1 - c2) <= POLE_TOL * scale or abs(c1 + c2) <= POLE_TOL * scale


def permute_factorize(g1, g2):
    """Lines for which g(a2, l2~) g1 = g(a1, l1~) g2.

    Returns the pair ``(g(a1, l1~), g(a2, l2~))`` of the same kinds as g1, g2.
    """
    if _cube_collision(g1.pole, g2.pole):
        raise PoleCollision("the cubes of the poles coincide up to sign")
    l1 = g1.line.rep @ g2.evaluate_inverse(g1.pole)
    l2 = g2.line.rep @ g1.evaluate_inverse(g2.pole)
    out = []
    for g, l in ((g1, l1), (g2, l2)):
        line = ProjLine(l)
        if cone_contains(line):
            raise ConeLine(f"updated line {line} lies in the degeneracy cone")
        out.append(SimpleElement(g.kind, g.pole, line))
    return out[0], out[1]


def breather_line(alpha, line):
    """Line l* = conj(l) g(alpha, l)(conj alpha)^{-1} of the conjugate factor."""
    g = make_rank1(alpha, line)
    return ProjLine(np.conj(g.line.rep) @ g.evaluate_inverse(np.conj(g.pole)))


def make_breather(alpha, line):
    """g(conj alpha, l*) g(alpha, l), a product fixed by complex conjugation.

    l* is the line that permute_factorize attaches to g(conj alpha, conj l)
    when it is moved past g(alpha, l).
    """
    alpha = complex(alpha)
    if alpha == 0:
        raise ZeroPole("pole must be nonzero")
    arg = np.angle(alpha)
    ok = 0 < arg < np.pi / 3 and abs(arg - np.pi / 6) > 1e-12
    if not ok:
        raise BadArgument(f"arg(alpha) = {arg:.6g} must lie in (0, pi/6) or (pi/6, pi/3)")
    g = make_rank1(alpha, line)
    gbar = make_rank1(np.conj(alpha), g.line.conj())
    _, gstar = permute_factorize(g, gbar)
    return LoopProduct([gstar, g], breather=True)


def reality_residuals(e, samples, tau=None):
    """Max residuals of the nu, mu and (optionally) tau conditions."""
    samples = np.asarray(samples, complex).ravel()
    if tau is None:
        tau = e.claims_tau
    G = e.evaluate(samples)
    out = {
        "nu": float(abs(Q @ G @ Q_INV - e.evaluate(EPS**4 * samples)).max()),
        "mu": float(abs(P - G @ P @ np.swapaxes(e.evaluate(-samples), -1, -2)).max()),
    }
    if tau:
        out["tau"] = float(abs(np.conj(e.evaluate(np.conj(samples))) - G).max())
    return out


def verify_reality(e, samples, tol=1e-10, tau=None):
    rep = VerificationReport()
    for name, r in reality_residuals(e, samples, tau).items():
        rep.add(f"reality-{name}", r, tol)
    return rep
