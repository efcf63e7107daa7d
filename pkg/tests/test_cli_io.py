import json
import subprocess
import sys

import numpy as np
import pytest

from tzlab.cli_io import (build_parser, export_mesh, parse_complex, parse_line, read_csv, run,
                          write_report)
from tzlab.errors import EmptyGrid
from tzlab.grids import Grid
from tzlab.immersion import ImmersionGrid
from tzlab.lax_frame import VacuumFamily
from tzlab.report import VerificationReport


def surface(n=2, m=2, mask=None, seed=0):
    g = Grid.regular(n, m, 0, 1, 0, 1)
    X = np.random.default_rng(seed).normal(size=(n, m, 3)) * 10.0 ** np.arange(-3, 0)
    return ImmersionGrid(g, X, np.linspace(0.5, 2, n * m).reshape(n, m), 1.0, mask)


# meshes

def test_obj_counts(tmp_path):
    p = tmp_path / "m.obj"
    export_mesh(surface(), p)
    lines = p.read_text().splitlines()
    assert sum(ln.startswith("v ") for ln in lines) == 4
    assert sum(ln.startswith("f ") for ln in lines) == 2


def test_obj_drops_masked_faces(tmp_path):
    mask = np.zeros((3, 3), bool)
    mask[1, 1] = True
    p = tmp_path / "m.obj"
    export_mesh(surface(3, 3, mask), p)
    lines = p.read_text().splitlines()
    assert sum(ln.startswith("v ") for ln in lines) == 8
    # quads split along the (i, j)-(i+1, j+1) diagonal; two triangles miss the centre
    assert sum(ln.startswith("f ") for ln in lines) == 2
    mask[1, 1], mask[2, 2] = False, True
    export_mesh(surface(3, 3, mask), p)
    lines = p.read_text().splitlines()
    assert sum(ln.startswith("f ") for ln in lines) == 6
    faces = [list(map(int, ln.split()[1:])) for ln in lines if ln.startswith("f ")]
    assert max(max(f) for f in faces) <= 8 and min(min(f) for f in faces) >= 1


def test_empty_grid(tmp_path):
    with pytest.raises(EmptyGrid):
        export_mesh(surface(mask=np.ones((2, 2), bool)), tmp_path / "m.obj")
    with pytest.raises(EmptyGrid):
        export_mesh(surface(mask=np.eye(2, dtype=bool)), tmp_path / "m.csv")


def test_csv_round_trip(tmp_path):
    mask = np.zeros((4, 5), bool)
    mask[2, 3] = True
    S = surface(4, 5, mask, seed=3)
    p = tmp_path / "m.csv"
    export_mesh(S, p)
    raw = p.read_bytes()
    assert b"\r" not in raw and raw.startswith(b"u,v,x,y,z,h\n")
    u, v, X, h = read_csv(p)
    ok = ~mask.ravel()
    assert abs(X[ok] - S.X.reshape(-1, 3)[ok]).max() <= 1e-15
    assert np.isnan(X[~ok]).all()
    assert np.array_equal(u.reshape(4, 5), S.grid.mesh()[0])


def test_csv_format_flag(tmp_path):
    p = tmp_path / "mesh.txt"
    export_mesh(surface(), p, fmt="csv")
    assert p.read_text().startswith("u,v,x,y,z,h")


# reports

def test_empty_report(tmp_path):
    p = tmp_path / "r.json"
    write_report(VerificationReport(), p)
    assert json.loads(p.read_text()) == {"checks": [], "pass": True}


def test_report_strict_json(tmp_path):
    r = VerificationReport()
    r.add("ok", 1e-12, 1e-10)
    r.add("bad", float("nan"), 1e-10)
    p = tmp_path / "r.json"
    write_report(r, p)

    def reject(c):
        raise ValueError(c)
    d = json.loads(p.read_text(), parse_constant=reject)
    assert d["pass"] is False
    assert list(d["checks"][0]) == ["name", "residual", "tol", "pass", "masked_fraction"]
    assert d["checks"][0]["residual"] == 1e-12
    assert d["checks"][1]["residual"] is None


def test_report_mask_cap():
    r = VerificationReport(mask_cap=0.2)
    r.add("x", 0.0, 1.0, masked_fraction=0.3)
    assert not r.passed


# parsing

def test_parse_helpers():
    assert parse_complex("0.5,-2") == 0.5 - 2j
    assert parse_complex("1+2j") == 1 + 2j
    assert parse_complex("3") == 3
    assert np.allclose(parse_line("2,4,2").rep, [1, 2, 1])


def test_parser_defaults():
    a = build_parser()[0].parse_args(["vacuum"])
    assert a.grid == "41x41" and a.domain == "-1:1,-1:1" and a.lam == 1.0


# run

def run_ok(argv, tmp_path, name="r.json"):
    p = tmp_path / name
    code = run(argv + ["--report", str(p)])
    return code, json.loads(p.read_text())


def test_vacuum_example(tmp_path):
    code, rep = run_ok(["vacuum", "--lambda", "1.0", "--grid", "41x41", "--domain", "-1:1,-1:1",
                        "--out", str(tmp_path / "vac.obj")], tmp_path)
    assert code == 0 and rep["pass"]
    names = {c["name"] for c in rep["checks"]}
    assert {"pde", "affine-sphere", "cubic"} <= names
    assert (tmp_path / "vac.obj").read_text().count("\nv ") + 1 >= 41 * 41


def test_dress_example(tmp_path):
    code, rep = run_ok(["dress", "--seed", "vacuum", "--rank", "1", "--alpha", "1.2",
                        "--line", "1,1,1", "--lambda", "0.7", "--grid", "41x41"], tmp_path)
    assert code == 0
    c = next(c for c in rep["checks"] if c["name"] == "dressing-vs-closed-form")
    assert c["residual"] < 1e-8


def test_permute_prints_lines(tmp_path, capsys):
    code, rep = run_ok(["permute", "--alpha1", "1", "--alpha2", "2", "--line1", "0,1,1",
                        "--line2", "0,1,1"], tmp_path)
    out = capsys.readouterr().out
    assert code == 0
    l1 = [ln for ln in out.splitlines() if ln.startswith("l1~")][0]
    l2 = [ln for ln in out.splitlines() if ln.startswith("l2~")][0]
    v1 = [float(x) for x in l1.split("(")[1].rstrip(")").split(",")]
    v2 = [float(x) for x in l2.split("(")[1].rstrip(")").split(",")]
    assert np.allclose(v1, [0, -1 / 7, 1], atol=1e-14)
    assert np.allclose(v2, [0, 5 / 7, 1], atol=1e-14)
    assert "h12-h21" in out


@pytest.mark.parametrize("cmd", ["soliton", "transform", "dual", "breather", "verify", "export"])
def test_commands_pass_with_defaults(cmd, tmp_path):
    # 21x21 is enough except where convergence ratios need the default 41x41 on [-1, 1]^2
    argv = [cmd] if cmd in ("soliton", "transform") else [cmd, "--grid", "21x21"]
    if cmd == "export":
        argv += ["--out", str(tmp_path / "x.csv")]
    code, rep = run_ok(argv, tmp_path)
    assert code == 0, rep


def test_failing_check_exits_1(tmp_path):
    code, rep = run_ok(["soliton", "--mask-cap", "0"], tmp_path)
    assert code == 1 and rep["pass"] is False


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["vacuum", "--grid", "2x5"],
    ["vacuum", "--grid", "axb"],
    ["dress", "--line", "1,0,0"],
    ["dress", "--alpha", "1.2", "--lambda", "-1.2"],
    ["export"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert run(argv) == 2


def test_open_condition_exits_1(capsys):
    g = Grid.regular(21, 21, -1, 1, -1, 1)
    F = VacuumFamily(g).at(1.2)[14, 5].real
    a = -(F[2, 2] + 0.3 * F[1, 2]) / F[0, 2]    # puts the updated line on the cone there
    code = run(["dress", "--alpha", "1.2", "--line", f"{float(a)!r},0.3,1", "--mask-cap", "0",
                "--grid", "21x21"])
    err = capsys.readouterr()
    assert code == 1
    assert "OpenConditionViolated" in err.out + err.err
    assert "(14,5)" in err.err


def test_byte_identical_runs(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        d.mkdir()
        run(["verify", "--grid", "21x21", "--report", str(d / "r.json")])
        run(["dress", "--alpha", "1.2", "--line", "0.3,-0.8,1", "--lambda", "0.7",
             "--out", str(d / "m.obj"), "--report", str(d / "d.json")])
        outs.append([(d / f).read_bytes() for f in ("r.json", "m.obj", "d.json")])
    assert outs[0] == outs[1]


def test_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"grid": "21x21", "lambda": 0.8, "domain": "-0.5:0.5,-0.5:0.5",
                               "mask-cap": 0.1}))
    code, rep = run_ok(["vacuum", "--config", str(cfg)], tmp_path)
    assert code == 0
    code2, rep2 = run_ok(["vacuum", "--grid", "21x21", "--lambda", "0.8", "--domain",
                          "-0.5:0.5,-0.5:0.5", "--mask-cap", "0.1"], tmp_path, "r2.json")
    assert rep == rep2


def test_save_element_and_export(tmp_path):
    el = tmp_path / "e.json"
    assert run(["dress", "--alpha", "1.2", "--line", "0.3,-0.8,1", "--save-element", str(el),
                "--grid", "21x21"]) == 0
    assert json.loads(el.read_text())["kind"] == "Rank1"
    assert run(["export", "--element", str(el), "--grid", "21x21",
                "--out", str(tmp_path / "m.obj")]) == 0
    assert (tmp_path / "m.obj").stat().st_size > 0


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "tzlab", "permute", "--grid", "21x21"],
                       capture_output=True, text=True, cwd=tmp_path)
    assert r.returncode == 0 and "l1~" in r.stdout
