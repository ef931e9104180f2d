import csv
import json

import numpy as np
import pytest

from filmreduce.cli import main, parse_config
from filmreduce.errors import ConfigInvalid


def run(tmp_path, command, cfg, *extra):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / command
    return main([command, "--config", str(path), "--out", str(out), *extra]), out


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_geometry_cylinder_c0(tmp_path):
    code, out = run(tmp_path, "geometry", {"chart": {"kind": "cylinder", "radius": 2}})
    assert code == 0
    rows = read_csv(out / "geometry.csv")
    assert len(rows) == 17 * 17
    assert {float(r["c0"]) for r in rows} == {2.0}


def test_solve_planar_identity(tmp_path):
    cfg = {"chart": {"kind": "planar"}, "grid": {"n1": 33, "n2": 33, "n3": 9}}
    code, out = run(tmp_path, "solve", cfg)
    assert code == 0
    u = np.array([[float(r[k]) for k in ("u1", "u2", "u3")] for r in read_csv(out / "solve_field.csv")])
    assert np.max(np.abs(u - [0, 0, 1])) <= 1e-6
    summary = json.loads((out / "solve_summary.json").read_text())
    assert summary["converged"] is True


def test_validate_default_planar(tmp_path):
    code, out = run(tmp_path, "validate", {})
    assert code == 0
    for name in ("series_summary.json", "limit_summary.json"):
        s = json.loads((out / name).read_text())
        assert set(s) == {"slope", "intercept", "fit_residual", "pass"}
        assert s["pass"] is True and s["slope"] >= 0.9
    rows = read_csv(out / "limit.csv")
    assert list(rows[0])[:4] == ["h", "J_direct", "J_series_or_limit", "residual"]


def test_energy_and_variant_flag(tmp_path):
    cfg = {"chart": {"kind": "cylinder", "radius": 2}, "state": {"kind": "identity"}}
    code, out = run(tmp_path, "energy", cfg, "--variant", "printed")
    assert code == 0
    rows = read_csv(out / "energy_breakdown.csv")
    assert [r["variant"] for r in rows] == ["general", "printed"]
    # (lambda/4 + mu/2)(r - 1)^2 |omega| r with unit Lame constants
    assert float(rows[1]["total"]) - float(rows[0]["total"]) == pytest.approx(0.75 * np.pi / 2 * 2)
    assert all(abs(float(r["total"])) < 1e-10 for r in read_csv(out / "energy_J.csv"))


def test_cascade_identity_passes_and_random_fails_boundary(tmp_path):
    code, out = run(tmp_path, "cascade", {"state": {"kind": "identity"}})
    assert code == 0
    assert all(r["pass"] == "true" for r in read_csv(out / "constraints.csv"))
    code, out = run(tmp_path, "cascade", {})
    assert code == 2
    rows = {r["quantity"]: r["pass"] for r in read_csv(out / "constraints.csv")}
    assert rows["max_abs_phi0_3"] == "true" and rows["boundary_phi0"] == "false"


def test_crosscheck(tmp_path):
    code, out = run(tmp_path, "crosscheck", {"samples": 3})
    assert code == 0
    rows = read_csv(out / "crosscheck.csv")
    assert rows[-1]["sample"] == "max" and float(rows[-1]["abs_general_printed"]) <= 1e-10


def test_determinism(tmp_path):
    cfg = {"chart": {"kind": "cylinder", "radius": 2}, "seed": 7}
    _, a = run(tmp_path / "a", "validate", cfg) if (tmp_path / "a").mkdir() is None else None
    _, b = run(tmp_path / "b", "validate", cfg) if (tmp_path / "b").mkdir() is None else None
    for name in ("series.csv", "limit.csv", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


@pytest.mark.parametrize("cfg, key", [
    ({"colour": 1}, "colour"),
    ({"chart": {"kind": "torus"}}, "chart"),
    ({"material": {"lambda": -1}}, "material"),
    ({"grid": {"n1": 3}}, "grid.n1"),
    ({"grid": {"n4": 9}}, "grid"),
    ({"schedule": {"K": 1}}, "schedule"),
    ({"boundary": [1, 0]}, "boundary"),
    ({"qform": "euclid"}, "qform"),
    ({"variant": "both"}, "variant"),
    ({"seed": -1}, "seed"),
    ({"state": {"kind": "bent"}}, "state.kind"),
    ({"solver": {"speed": 2}}, "solver"),
])
def test_invalid_config_names_key(cfg, key):
    with pytest.raises(ConfigInvalid, match=key):
        parse_config(cfg)


def test_error_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "geometry", {"bogus": True})
    assert code == 1
    assert "bogus" in capsys.readouterr().err
    assert main(["geometry", "--config", str(tmp_path / "missing.json")]) == 1
