"""Command-line driver, mesh export and JSON reports.

Each subcommand builds a surface, runs its checks and exits 0 when every
check passes, 1 when one fails and 2 on bad input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys

import numpy as np

from . import exact_solutions as ex
from .affine_geometry import curvatures, fubini_pick, shape_residual_values
from .convergence import add_refinement_check, near_blowup
from .errors import (BadArgument, ConeLine, EmptyGrid, PoleCollision, TzlabError,
                     ZeroLambda, ZeroPole)
from .grids import Grid, interior, nanmax_abs
from .immersion import ImmersionGrid
from .lax_frame import (IntegratedFamily, SolutionField, VacuumFamily, analytic_scalar,
                        integrate_frame, scalar_solution, tzitzeica_residual_values)
from .loopalgebra import ProjLine
from .rational_elements import (Kind, SimpleElement, make_breather, permute_factorize,
                                verify_reality)
from .report import VerificationReport
from .transforms import (chain, classical_transform, dress_breather, dress_rank1, dress_rank2,
                         dressed_surface_closed_form, dual_surface, permutability_check, rank2_closed_form_scale)

ALGEBRA_TOL = 1e-10
FRAME_TOL = 1e-8
MAX_STEP = 1 / 64
USAGE_ERRORS = (BadArgument, ConeLine, PoleCollision, ZeroLambda, ZeroPole)


# export -------------------------------------------------------------------

def _fmt(x):
    return format(float(x), ".17g")


def export_mesh(X: ImmersionGrid, path, fmt=None):
    """Write X as an OBJ triangle mesh or a CSV table (format from the suffix by default)."""
    fmt = (fmt or str(path).rsplit(".", 1)[-1]).lower()
    if fmt not in ("obj", "csv"):
        raise ValueError(f"unknown mesh format {fmt!r}")
    pts = np.real(X.X)
    ok = ~X.mask & np.all(np.isfinite(pts), axis=-1)
    if ok.sum() < 4:
        raise EmptyGrid(f"only {int(ok.sum())} unmasked nodes, export needs 4")
    text = _obj(pts, ok) if fmt == "obj" else _csv(X, pts, ok)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _obj(pts, ok):
    nu, nv = ok.shape
    index = -np.ones(ok.shape, int)
    index[ok] = np.arange(1, ok.sum() + 1)
    out = io.StringIO()
    for i in range(nu):
        for j in range(nv):
            if ok[i, j]:
                out.write("v " + " ".join(_fmt(c) for c in pts[i, j]) + "\n")
    for i in range(nu - 1):
        for j in range(nv - 1):
            a, b, c, d = index[i, j], index[i + 1, j], index[i + 1, j + 1], index[i, j + 1]
            for tri in ((a, b, c), (a, c, d)):
                if min(tri) > 0:
                    out.write("f %d %d %d\n" % tri)
    return out.getvalue()


def _csv(X, pts, ok):
    U, V = X.grid.mesh()
    h = np.real(X.h) if X.h is not None else np.full(X.grid.shape, np.nan)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["u", "v", "x", "y", "z", "h"])
    for i in range(ok.shape[0]):
        for j in range(ok.shape[1]):
            xyz = [_fmt(c) for c in pts[i, j]] if ok[i, j] else ["", "", ""]
            hv = _fmt(h[i, j]) if np.isfinite(h[i, j]) else ""
            w.writerow([_fmt(U[i, j]), _fmt(V[i, j])] + xyz + [hv])
    return out.getvalue()


def read_csv(path):
    """Inverse of the CSV export: returns (u, v, X, h) with NaN for empty fields."""
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))

    def num(s):
        return float(s) if s != "" else math.nan
    u = np.array([num(r["u"]) for r in rows])
    v = np.array([num(r["v"]) for r in rows])
    X = np.array([[num(r[k]) for k in "xyz"] for r in rows])
    h = np.array([num(r["h"]) for r in rows])
    return u, v, X, h


def _clean(o):
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (float, np.floating)):
        return float(o) if math.isfinite(o) else None
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def write_report(r: VerificationReport, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_clean(r.as_dict()), fh, indent=2, allow_nan=False)
        fh.write("\n")


# parsing helpers ------------------------------------------------------------

def parse_complex(s):
    """'1.5', '1,0.5' (re,im) or Python syntax like '1+0.5j'."""
    if isinstance(s, (int, float, complex)):
        return complex(s)
    s = str(s).strip()
    if "," in s:
        re_, im = s.split(",")
        return complex(float(re_), float(im))
    return complex(s.replace(" ", ""))


def parse_line(s):
    if isinstance(s, (list, tuple)):
        vals = [parse_complex(x) for x in s]
    else:
        vals = [complex(x.replace(" ", "")) for x in str(s).split(",")]
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"a line needs three components, got {s!r}")
    return ProjLine(vals)


def _real_if(z):
    z = complex(z)
    return z.real if z.imag == 0 else z


def _grid(cfg):
    g = Grid.parse(cfg.grid, cfg.domain)
    if min(g.shape) < 3:
        raise BadArgument("grid counts must be at least 3")
    return g


def _rng_seed(cfg):
    if cfg.rng_seed is not None:
        return int(cfg.rng_seed)
    if isinstance(cfg.seed, str) and cfg.seed.lstrip("-").isdigit():
        return int(cfg.seed)
    return 42


def _seed_kind(cfg, default="vacuum"):
    s = getattr(cfg, "seed", None)
    if s is None or str(s).lstrip("-").isdigit():
        return default
    if s not in ("vacuum", "soliton"):
        raise BadArgument(f"unknown seed solution {s!r}")
    return s


def _soliton(cfg):
    return ex.SolitonParams(cfg.lambda1, cfg.theta0, cfg.beta0, cfg.rho0)


def _base_family(cfg, grid):
    if _seed_kind(cfg) == "vacuum":
        return VacuumFamily(grid), SolutionField.vacuum(grid)
    field = SolutionField.one_soliton(grid, _soliton(cfg))
    return IntegratedFamily(field), field


def _pde(h, gr):
    h = np.real(np.asarray(h))
    return abs(tzitzeica_residual_values(h, gr)), near_blowup(h)


def _shape(X: ImmersionGrid):
    return shape_residual_values(X), near_blowup(X.h) | X.mask


def _rel_gap(a, b):
    """Nodewise |a - b| / max(1, |b|): absolute where |b| <= 1, relative beyond."""
    with np.errstate(invalid="ignore"):
        return nanmax_abs(abs(np.asarray(a) - b) / np.maximum(1.0, abs(np.asarray(b))))


def _vacuum_X(gr, lam):
    U, V = gr.mesh()
    X, Xu, Xv = ex.vacuum_surface(U, V, lam, partials=True)
    z = np.zeros(gr.shape)
    return ImmersionGrid(gr, X, np.ones(gr.shape), lam, None, Xu, Xv, z, z)


# pipelines ---------------------------------------------------------------

def run_vacuum(cfg):
    g, lam = _grid(cfg), cfg.lam
    rep = VerificationReport(mask_cap=cfg.mask_cap)
    X = _vacuum_X(g, lam)
    add_refinement_check(rep, "pde", lambda gr: _pde(np.ones(gr.shape), gr), g)
    add_refinement_check(rep, "affine-sphere", lambda gr: _shape(_vacuum_X(gr, lam)), g)
    F = ex.vacuum_frame(*g.mesh(), lam)
    rep.add("cubic", nanmax_abs(ex.cubic_residual(F[..., :, 2])), ALGEBRA_TOL)
    fg = integrate_frame(SolutionField.vacuum(g), lam, max_step=MAX_STEP)
    rep.add("frame-vs-exponential", abs(fg.F - F).max(), FRAME_TOL)
    rep.add("frame-det", fg.det_residual, FRAME_TOL)
    rep.add("frame-path", fg.path_residual, FRAME_TOL)
    return rep, X


def _soliton_transform(gr, lam, p):
    phi = analytic_scalar(gr, p.lambda1, p.c0, p.c1, np.conj(p.c1))
    return classical_transform(SolutionField.vacuum(gr), _vacuum_X(gr, lam), phi, mask_cap=1.0)


def run_soliton(cfg):
    """One-soliton surface: classical transform of the vacuum against the closed forms."""
    g, lam, p = _grid(cfg), cfg.lam, _soliton(cfg)
    rep = VerificationReport(mask_cap=cfg.mask_cap)
    U, V = g.mesh()
    h_closed = ex.one_soliton_h(U, V, p)
    h1, X1 = _soliton_transform(g, lam, p)
    rep.add("h-closed-form", _rel_gap(h1.h, h_closed), ALGEBRA_TOL)
    add_refinement_check(rep, "pde", lambda gr: _pde(ex.one_soliton_h(*gr.mesh(), p), gr), g)
    add_refinement_check(rep, "affine-sphere",
                         lambda gr: _shape(_soliton_transform(gr, lam, p)[1]), g)
    if p.beta0 == 0:
        Xc = ex.one_soliton_surface(U, V, lam, p)
        with np.errstate(invalid="ignore"):
            gap = np.linalg.norm(X1.X - Xc, axis=-1) / np.maximum(1.0, np.linalg.norm(Xc, axis=-1))
        rep.add("surface-closed-form", nanmax_abs(X1.masked(gap)), FRAME_TOL)
        return rep, ImmersionGrid(g, Xc, h_closed, lam)
    return rep, X1


def _element(cfg):
    kind = Kind.RANK1 if cfg.rank in (1, "1", Kind.RANK1) else Kind.RANK2
    return SimpleElement(kind, _real_if(cfg.alpha), cfg.line)


def _dress_pipeline(cfg, grid, e, residues=False):
    """Dressed surface at cfg.lam and the matching closed form (already rescaled)."""
    fam, field = _base_family(cfg, grid)
    dress = dress_rank1 if e.kind is Kind.RANK1 else dress_rank2
    res = dress(e, fam, cfg.lam, cfg.mask_cap, cfg.allow_complex, check_residues=residues)
    base_X = fam.surface(cfg.lam)
    base_X = ImmersionGrid(grid, base_X.X, field.h, cfg.lam, base_X.mask, base_X.Xu, base_X.Xv)
    al = e.pole
    if e.kind is Kind.RANK1:
        phi = scalar_solution(e.line, fam.frame_grid(al))
        scale = 1.0
    else:
        phi = scalar_solution(e.line, fam.frame_grid(-al))
        scale = rank2_closed_form_scale(al, cfg.lam)
    cf = dressed_surface_closed_form(base_X, field, phi, al, cfg.lam, e.kind)
    return res, cf, scale


def run_dress(cfg):
    """Dress a seed by one simple element and compare with the closed form."""
    g = _grid(cfg)
    e = _element(cfg)
    rep = VerificationReport(mask_cap=cfg.mask_cap)
    res, cf, scale = _dress_pipeline(cfg, g, e, residues=True)
    d, X = res.family, res.surface
    mf = X.masked_fraction
    with np.errstate(invalid="ignore"):
        gap = np.linalg.norm(X.X - scale * cf.X, axis=-1)
        gap = gap / np.maximum(1.0, np.linalg.norm(scale * cf.X, axis=-1))
    rep.add("dressing-vs-closed-form", nanmax_abs(X.masked(gap)), FRAME_TOL, mf)
    rep.add("h-vs-closed-form", _rel_gap(d.h, cf.h), FRAME_TOL, mf)
    for k, r in res.residues.items():
        rep.add(f"residue{k}", r, FRAME_TOL, mf)
    rep.add("frame-det", d.det_residual(cfg.lam), FRAME_TOL, mf)
    if cfg.convergence:
        add_refinement_check(rep, "pde", lambda gr: _pde(
            _dress_pipeline(cfg, gr, e)[0].family.h, gr), g)
        add_refinement_check(rep, "affine-sphere", lambda gr: _shape(
            _dress_pipeline(cfg, gr, e)[0].surface), g)
    if cfg.save_element:
        with open(cfg.save_element, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(_clean(e.to_json()), fh, indent=2)
            fh.write("\n")
    return rep, X


def run_transform(cfg):
    """Classical transform of the vacuum by a general vacuum scalar solution."""
    g, lam = _grid(cfg), cfg.lam
    rep = VerificationReport(mask_cap=cfg.mask_cap)
    c0, c1 = parse_complex(cfg.c0), parse_complex(cfg.c1)
    c2 = np.conj(c1) if cfg.c2 is None else parse_complex(cfg.c2)

    def build(gr):
        phi = analytic_scalar(gr, cfg.lambda1, _real_if(c0), _real_if(c1), _real_if(c2))
        return classical_transform(SolutionField.vacuum(gr), _vacuum_X(gr, lam), phi, 1.0)
    h1, X1 = build(g)
    if np.iscomplexobj(X1.X):
        rep.add("real-output", X1.imag_max(), 1e-9)
    if c0.imag == 0 and c2 == np.conj(c1) and abs(c1) > 0:
        rho = abs(c1)
        p = ex.SolitonParams(cfg.lambda1, float(np.angle(c1)), c0.real / (2 * rho), rho)
        rep.add("h-closed-form", _rel_gap(h1.h, ex.one_soliton_h(*g.mesh(), p)), ALGEBRA_TOL)
    add_refinement_check(rep, "pde", lambda gr: _pde(build(gr)[0].h, gr), g)
    add_refinement_check(rep, "affine-sphere", lambda gr: _shape(build(gr)[1]), g)
    return rep, X1


def _surface_for(cfg, grid):
    """Seed surface, or its dressing when an element is given; carries exact partials."""
    if cfg.alpha is not None:
        return _dress_pipeline(cfg, grid, _element(cfg))[0].surface
    fam, field = _base_family(cfg, grid)
    X = fam.surface(cfg.lam)
    return ImmersionGrid(grid, np.real(X.X), field.h, cfg.lam, X.mask, np.real(X.Xu),
                         np.real(X.Xv), field.h_u, field.h_v)


def unimodular(X: ImmersionGrid):
    """X scaled so that det(X_u, X_v, X) = h, using the exact partials.

    Dressed surfaces carry det(X_u, X_v, X) = c h with a constant c; the
    returned spread is the nodewise variation of c (zero up to round-off).
    """
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.linalg.det(np.stack([X.Xu, X.Xv, X.X], axis=-1)) / X.h
    c = np.real_if_close(c[~X.mask])
    c0 = np.median(np.real(c))
    spread = float(abs(c - c0).max() / abs(c0)) if c.size else 0.0
    return X.scaled(np.cbrt(1.0 / c0)), spread


def run_dual(cfg):
    """Dual surface; applying the dual twice returns the central reflection -X."""
    g = _grid(cfg)
    rep = VerificationReport(mask_cap=cfg.mask_cap)
    X, spread = unimodular(_surface_for(cfg, g))
    rep.add("normalization-constant", spread, FRAME_TOL)
    D = dual_surface(X)
    rep.add("involution", _rel_gap(dual_surface(D).X, -X.X), FRAME_TOL, D.masked_fraction)
    add_refinement_check(rep, "affine-sphere", lambda gr: _shape(
        dual_surface(unimodular(_surface_for(cfg, gr))[0])), g)
    return rep, D


def run_permute(cfg):
    g = _grid(cfg)
    g1 = SimpleElement(Kind.RANK1, _real_if(cfg.alpha1), cfg.line1)
    g2 = SimpleElement(Kind.RANK1, _real_if(cfg.alpha2), cfg.line2)
    g1t, g2t = permute_factorize(g1, g2)
    print("l1~ =", _line_str(g1t.line))
    print("l2~ =", _line_str(g2t.line))
    fam, _ = _base_family(cfg, g)
    rep = permutability_check(fam, g1, g2, cfg.lam, seed=_rng_seed(cfg), mask_cap=cfg.mask_cap)
    X = chain(fam, [g1, g2t], cfg.mask_cap).surface(cfg.lam)
    return rep, ImmersionGrid(g, np.real(X.X), np.real(rep.h12), cfg.lam, X.mask)


def _line_str(line):
    return "(" + ", ".join(f"{_real_if(z):.17g}" for z in line.rep) + ")"


def run_breather(cfg):
    g = _grid(cfg)
    rep = VerificationReport(mask_cap=cfg.mask_cap)
    alpha = parse_complex(cfg.alpha) if cfg.alpha is not None else np.exp(1j * np.pi / 8)
    f = make_breather(alpha, cfg.line)
    rng = np.random.default_rng(_rng_seed(cfg))
    samples = rng.normal(size=12) + 1j * rng.normal(size=12)
    rep.extend(verify_reality(f, samples))
    fam, _ = _base_family(cfg, g)
    B = dress_breather(f, fam, cfg.lam, cfg.mask_cap)
    rep.add("imag-h", B.imag_h, 1e-9, B.X.masked_fraction)
    rep.add("imag-X", B.imag_X, 1e-9, B.X.masked_fraction)

    add_refinement_check(rep, "pde", lambda gr: _pde(
        dress_breather(f, _base_family(cfg, gr)[0], cfg.lam, 1.0).h.h, gr), g)
    add_refinement_check(rep, "affine-sphere", lambda gr: _shape(
        dress_breather(f, _base_family(cfg, gr)[0], cfg.lam, 1.0).X), g)
    return rep, B.X


def run_verify(cfg):
    """Randomized loop-group identities and frame checks."""
    rng = np.random.default_rng(_rng_seed(cfg))
    rep = VerificationReport(mask_cap=cfg.mask_cap)
    samples = rng.normal(size=12) + 1j * rng.normal(size=12)
    for kind in (Kind.RANK1, Kind.RANK2):
        worst = {"nu": 0.0, "mu": 0.0, "tau": 0.0, "det": 0.0}
        for _ in range(cfg.count):
            e = random_element(rng, kind)
            r = verify_reality(e, samples, tol=ALGEBRA_TOL)
            for c in r.checks:
                key = c.name.split("-")[1]
                worst[key] = max(worst[key], c.residual)
            d0 = e.det_at(samples)
            dd = abs(np.linalg.det(e.evaluate(samples)) - d0) / abs(d0)
            worst["det"] = max(worst["det"], float(dd.max()))
        for k, v in worst.items():
            rep.add(f"{kind.value}-{k}", v, ALGEBRA_TOL)
    g = Grid.regular(65, 65, 0, 1, 0, 1)
    fg = integrate_frame(SolutionField.vacuum(g), cfg.lam)
    Uu, Vv = g.mesh()
    rep.add("frame-vs-exponential", abs(fg.F - ex.vacuum_frame(Uu, Vv, cfg.lam)).max(), FRAME_TOL)
    rep.add("frame-det", fg.det_residual, FRAME_TOL)
    pts = rng.uniform(-1, 1, size=(20, 2))
    lams = rng.uniform(0.5, 2, size=20) * rng.choice([-1, 1], size=20)
    cub = max(abs(ex.cubic_residual(ex.vacuum_frame(u, v, lm)[:, 2]))
              for (u, v), lm in zip(pts, lams))
    rep.add("cubic", cub, ALGEBRA_TOL)
    X = ImmersionGrid(g, np.real(fg.F[..., :, 2]), np.ones(g.shape), cfg.lam)
    aJ, bJ = fubini_pick(X)
    H, K = curvatures(X)
    lam3 = cfg.lam**3
    for name, err in (("aJ", aJ - lam3), ("bJ", bJ - 1 / lam3), ("H", H - 1), ("K", K - 1)):
        rep.add(f"vacuum-{name}", nanmax_abs(interior(err)), 1e-2)
    return rep, None


def random_element(rng, kind):
    """A real simple element with pole in [0.5, 2] and line away from the cone."""
    while True:
        alpha = rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
        a, b = rng.uniform(-2, 2, size=2)
        if abs(2 * a * b - 1) > 0.1:
            return SimpleElement(kind, alpha, (a, b, 1.0))


def run_export(cfg):
    g = _grid(cfg)
    if cfg.element:
        with open(cfg.element, encoding="utf-8") as fh:
            e = SimpleElement.from_json(json.load(fh))
        cfg.alpha, cfg.line, cfg.rank = e.pole, e.line, e.kind
        X = _dress_pipeline(cfg, g, e)[0].surface
    elif _seed_kind(cfg) == "soliton" and cfg.beta0 == 0:
        Uu, Vv = g.mesh()
        p = _soliton(cfg)
        X = ImmersionGrid(g, ex.one_soliton_surface(Uu, Vv, cfg.lam, p),
                          ex.one_soliton_h(Uu, Vv, p), cfg.lam)
    else:
        X = _surface_for(cfg, g)
    if cfg.out is None:
        raise BadArgument("export needs --out")
    return VerificationReport(), X


COMMANDS = {
    "vacuum": run_vacuum, "soliton": run_soliton, "dress": run_dress,
    "transform": run_transform, "dual": run_dual, "permute": run_permute,
    "breather": run_breather, "verify": run_verify, "export": run_export,
}


# argument parsing ---------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="JSON file with kebab-case keys matching the flags")
    p.add_argument("--grid", default="41x41", help="node counts NxM (default 41x41)")
    p.add_argument("--domain", default="-1:1,-1:1", help="u0:u1,v0:v1 (default -1:1,-1:1)")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="spectral value of the output surface (default 1.0)")
    p.add_argument("--seed", default=None,
                   help="seed solution (vacuum|soliton), or an integer RNG seed")
    p.add_argument("--rng-seed", type=int, default=None, help="RNG seed (default 42)")
    p.add_argument("--mask-cap", type=float, default=0.2,
                   help="largest tolerated masked fraction (default 0.2)")
    p.add_argument("--out", help="mesh output path (.obj or .csv)")
    p.add_argument("--format", choices=["obj", "csv"], help="mesh format (default from suffix)")
    p.add_argument("--report", help="JSON report path")
    p.add_argument("--lambda1", type=float, default=1.3)
    p.add_argument("--theta0", type=float, default=0.4)
    p.add_argument("--beta0", type=float, default=0.0)
    p.add_argument("--rho0", type=float, default=1.0)


def build_parser():
    parser = argparse.ArgumentParser(prog="tzlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    ps = {name: sub.add_parser(name, help=COMMANDS[name].__doc__) for name in COMMANDS}
    for p in ps.values():
        _common(p)
    for name in ("dress", "dual", "export"):
        p = ps[name]
        p.add_argument("--rank", type=int, choices=[1, 2], default=1)
        p.add_argument("--alpha", type=parse_complex, default=None)
        p.add_argument("--line", type=parse_line, default=ProjLine((1, 1, 1)))
        p.add_argument("--allow-complex", action="store_true")
    ps["dress"].add_argument("--convergence", action="store_true",
                             help="also run the grid-refinement checks")
    ps["dress"].add_argument("--save-element", help="write the element as JSON")
    ps["export"].add_argument("--element", help="element JSON from dress --save-element")
    ps["transform"].add_argument("--c0", default="0")
    ps["transform"].add_argument("--c1", default="1")
    ps["transform"].add_argument("--c2", default=None, help="default: conjugate of c1")
    ps["permute"].add_argument("--alpha1", type=parse_complex, default=1.0)
    ps["permute"].add_argument("--alpha2", type=parse_complex, default=2.0)
    ps["permute"].add_argument("--line1", type=parse_line, default=ProjLine((0, 1, 1)))
    ps["permute"].add_argument("--line2", type=parse_line, default=ProjLine((0, 1, 1)))
    ps["breather"].add_argument("--alpha", default=None, help="complex pole, e.g. 0.92,0.38")
    ps["breather"].add_argument("--line", type=parse_line, default=ProjLine((1, 1, 1)))
    ps["verify"].add_argument("--count", type=int, default=20)
    return parser, ps


def _apply_config(argv, parser, subparsers):
    """Fold a --config JSON file into the subcommand defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or known.command not in subparsers:
        return
    with open(known.config, encoding="utf-8") as fh:
        data = json.load(fh)
    sp = subparsers[known.command]
    dests = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, val in data.items():
        dest = "lam" if key == "lambda" else key.replace("-", "_")
        if dest not in dests:
            parser.error(f"unknown config key {key!r}")
        act = dests[dest]
        if act.type is not None and isinstance(val, (str, int, float, list)):
            val = act.type(val if not isinstance(val, list) else val)
        defaults[dest] = val
    sp.set_defaults(**defaults)


_NEGATIVE = re.compile(r"^-[\d.]")


def _join_negative_values(argv):
    """'--domain -1:1,0:1' -> '--domain=-1:1,0:1' so argparse keeps negative values."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "=" not in tok and i + 1 < len(argv)
                and _NEGATIVE.match(argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def run(argv=None):
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    parser, subparsers = build_parser()
    try:
        _apply_config(argv, parser, subparsers)
        cfg = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not hasattr(cfg, "allow_complex"):
        cfg.allow_complex = False
    for k in ("alpha", "convergence", "save_element", "element", "rank", "line"):
        if not hasattr(cfg, k):
            setattr(cfg, k, None)
    if cfg.command == "dress" and cfg.alpha is None:
        cfg.alpha = 1.2
    try:
        rep, X = COMMANDS[cfg.command](cfg)
        if cfg.out and X is not None:
            export_mesh(X, cfg.out, cfg.format)
    except USAGE_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except TzlabError as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        nodes = getattr(exc, "nodes", None)
        if nodes:
            print("offending nodes: " + " ".join(f"({i},{j})" for i, j in nodes[:20]),
                  file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(rep.summary())
    if cfg.report:
        write_report(rep, cfg.report)
    return 0 if rep.passed else 1


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
