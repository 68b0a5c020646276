import csv
import io
import json

import pytest

from semiisac import analytic as A
from semiisac import checks
from semiisac import scenario as S
from semiisac.cli import SWEEP_HEADER, load_sweep_spec, main, run_sweep


def run(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, list(csv.reader(io.StringIO(out.getvalue())))


def test_eval_diversity_and_slope():
    code, rows = run(["eval", "--config", "paper-sec6", "--scenario", "noma-i", "--user", "c",
                      "--metric", "diversity", "--metric", "slope"])
    assert code == 0
    assert rows[0] == ["scenario", "user", "metric", "method", "value", "ci"]
    assert rows[1][:3] == ["noma-i", "c", "diversity"] and float(rows[1][4]) == 3
    assert rows[2][2] == "slope" and float(rows[2][4]) == pytest.approx(7213.4752044448, rel=1e-12)


def test_eval_reir_zero_at_beta0(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"preset": "paper-sec6",
                                "bandwidth": {"beta_semi": 0.0, "epsilon_semi": 1.0}}))
    code, rows = run(["eval", "--config", str(path), "--metric", "reir"])
    assert code == 0 and float(rows[1][4]) == 0.0


def test_eval_with_mc_rows():
    code, rows = run(["eval", "--scenario", "oma", "--user", "c", "--metric", "op", "--samples", "5000", "--seed", "3"])
    assert code == 0
    assert [r[3] for r in rows[1:]] == ["analytic", "montecarlo"]
    assert rows[2][5] != ""


def test_eval_bad_config_exits_nonzero(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"preset": "paper-sec6", "geometry": {"d_c": -3}}))
    assert main(["eval", "--config", str(path)], out=io.StringIO()) != 0
    assert main(["eval", "--config", str(tmp_path / "missing.json")], out=io.StringIO()) != 0


def _spec(tmp_path, **kw):
    spec = {"config": "paper-sec6", "axis": "powers.P_c_dBm",
            "range": {"start": 5, "stop": 35, "points": 4}, "scenarios": ["noma-i"],
            "metrics": ["op", "rate"], "mc": {"n_samples": 5000, "seed": 9}}
    spec.update(kw)
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(spec))
    return p


def test_sweep_header_order_and_determinism(tmp_path):
    p = _spec(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--spec", str(p), "--out", str(a)]) == 0
    assert main(["sweep", "--spec", str(p), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.reader(a.open()))
    assert rows[0] == SWEEP_HEADER
    axis = [float(r[0]) for r in rows[1:]]
    assert axis == sorted(axis)
    assert len(rows) - 1 == 4 * 2 * 2 * 2
    # 17 significant digits
    assert all(len(r[5].replace("-", "").replace(".", "").split("e")[0].lstrip("0")) <= 17 for r in rows[1:])


def test_sweep_workers_do_not_change_output(tmp_path):
    spec = load_sweep_spec(_spec(tmp_path))
    serial = run_sweep(spec)
    spec.workers = 3
    assert run_sweep(spec) == serial


def test_sweep_beta_with_complement(tmp_path):
    p = _spec(tmp_path, axis="bandwidth.beta_semi", complement="bandwidth.epsilon_semi",
              range={"start": 0, "stop": 1, "points": 3}, scenarios=["fd", "oma", "noma-i"],
              metrics=["capacity"], mc=None)
    rows = run_sweep(load_sweep_spec(p))
    by = {(r[0], r[1]): r[5] for r in rows}
    for b in (0.0, 0.5, 1.0):
        assert by[(b, "fd")] <= by[(b, "oma")] <= by[(b, "noma-i")] * (1 + 1e-12)


def test_sweep_rejects_bad_axis(tmp_path):
    with pytest.raises(ValueError):
        load_sweep_spec(_spec(tmp_path, axis="powers.nope"))
    with pytest.raises(ValueError):
        load_sweep_spec(_spec(tmp_path, range={"start": 0, "stop": 1, "points": 1}))


def test_sweep_failure_names_axis_value(tmp_path):
    # a distance below the 1 m reference fails at the first point
    p = _spec(tmp_path, axis="geometry.d_c", range={"start": 0.5, "stop": 10, "points": 2}, mc=None)
    out = io.StringIO()
    assert main(["sweep", "--spec", str(p)], out=out) != 0


def test_validate_fault_injection():
    cfg = S.preset()
    bad = checks.check_constants(cfg, checks.corrupt_constants(cfg, "a3"))
    failed = [r.name for r in bad if not r.passed]
    assert failed == ["constants_consistency:a3"]
    assert all(r.passed for r in checks.check_constants(cfg))


def test_validate_cli_fault_exit_code():
    out = io.StringIO()
    code = main(["validate", "--profile", "quick", "--inject-fault", "a3", "--samples", "20000"], out=out)
    assert code != 0
    lines = out.getvalue().splitlines()
    assert "constants_consistency:a3" in out.getvalue()
    assert any(line.startswith("constants_consistency:a3,") and line.endswith(",fail") for line in lines)


def test_validate_m1_includes_rayleigh_check(tmp_path):
    cfg = S.preset(**{"fading.m": 1})
    results = checks.run_checks(cfg, "quick")
    names = {r.name: r for r in results}
    assert "reir_general_vs_rayleigh" in names and names["reir_general_vs_rayleigh"].passed
    assert all(r.passed for r in results), [r.name for r in results if not r.passed]
