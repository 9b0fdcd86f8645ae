import json
from pathlib import Path

import numpy as np
import pytest

from dampscat import __version__, cli
from dampscat.errors import StiffnessError

ZERO = """
coefficient = { kind = "zero" }
spectral = { kind = "dirichlet_interval", k = 8 }
[times]
t_min = 1.0
t_max = 100.0
points = 5
[tolerances]
integrator = 1e-13
[verify]
levels = 2
samples = 5
rep_threshold = 1e-9
q1_T = [10.0, 1000.0]
"""

INTEG = """
coefficient = { kind = "power_law", p = 2.0 }
spectral = { kind = "dirichlet_interval", k = 4 }
data = { kind = "smooth_bump", lo = 0.5, hi = 4.0 }
[times]
t_min = 10.0
t_max = 1000.0
points = 3
"""


def _run(tmp_path, text, *argv):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(text)
    return cli.main([argv[0], "--config", str(cfg), *argv[1:]])


def _read(path):
    lines = Path(path).read_text().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    return body[0].split(","), [r.split(",") for r in body[1:]], lines


def test_verify_free_case(tmp_path):
    out = tmp_path / "v.csv"
    assert _run(tmp_path, ZERO, "verify", "--out", str(out)) == 0
    header, rows, lines = _read(out)
    assert header == ["suite", "check", "value", "threshold", "result"]
    assert all(r[4] in ("pass", "skipped") for r in rows)
    assert lines[-1].startswith("# config_hash=") and lines[-1].endswith(f"version={__version__}")
    diag = json.loads(out.with_suffix(".diag.json").read_text())
    assert diag["exit_code"] == 0 and diag["status"] == "ok"
    rep = [r for r in rows if r[0] == "hyperbolic-rep"][0]
    assert float(rep[2]) <= 1e-9


def test_verify_single_suite_detail_schema(tmp_path):
    out = tmp_path / "v.csv"
    assert _run(tmp_path, ZERO, "verify", "hyperbolic-rep", "--out", str(out)) == 0
    header, rows, _ = _read(tmp_path / "v_hyperbolic_rep.csv")
    assert header == ["lambda", "s", "t", "rel_err", "im_residue"] and len(rows) == 5


def test_simulate_columns(tmp_path):
    out = tmp_path / "traj.csv"
    assert _run(tmp_path, ZERO, "simulate", "--out", str(out), "--dump-modes") == 0
    header, rows, _ = _read(out)
    assert header[:3] == ["t", "lambda_t", "energy_E"] and len(header) == 3 + 4 * 8
    e = np.array([float(r[2]) for r in rows])
    assert np.ptp(e) / e[0] < 1e-9


def test_classify_and_contradiction(tmp_path):
    out = tmp_path / "c.csv"
    assert _run(tmp_path, INTEG, "classify", "--out", str(out)) == 0
    assert _read(out)[1][0][0] == "Integrable"
    lie = 'coefficient = { kind = "mu_over_1pt", mu = 0.3, mu_upper = 0.1 }\n'
    assert _run(tmp_path, lie, "classify", "--out", str(out)) == 2
    diag = json.loads(out.with_suffix(".diag.json").read_text())
    assert diag["status"] == "check_failure" and diag["info"]["witness_t"] > 0


def test_wave_op_then_residual(tmp_path):
    table = tmp_path / "w.csv"
    assert _run(tmp_path, INTEG, "wave-op", "--out", str(table)) == 0
    header, rows, lines = _read(table)
    assert header == ["lambda", "w11", "w12", "w21", "w22", "conv_error", "horizon"]
    assert "# normalization=classical" in lines
    res = tmp_path / "r.csv"
    assert _run(tmp_path, INTEG, "scatter-residual", "--waveop", str(table),
                "--out", str(res)) == 0
    header, rows, _ = _read(res)
    assert header == ["t", "lambda_t", "residual", "energy_u", "energy_v"]
    r = np.array([float(x[2]) for x in rows])
    t = np.array([float(x[0]) for x in rows])
    assert np.all(r * (1 + t) < 10 * r[0] * (1 + t[0]))


def test_wave_op_with_minus(tmp_path):
    text = INTEG + "[wave_op]\nwith_minus = true\n"
    out = tmp_path / "w.csv"
    assert _run(tmp_path, text, "wave-op", "--out", str(out)) == 0
    _, rows, _ = _read(tmp_path / "w_scattering.csv")
    assert len(rows) == 4 and all(float(r[5]) > 0 for r in rows)


def test_two_sided_columns(tmp_path):
    out = tmp_path / "ratio.csv"
    assert _run(tmp_path, ZERO, "two-sided", "--out", str(out)) == 0
    header, rows, _ = _read(out)
    assert header == ["t", "lambda_t", "energy_E", "ratio"]


def test_missing_coefficient_exit_3_no_outputs(tmp_path, capsys):
    out = tmp_path / "x.csv"
    assert _run(tmp_path, "seed = 1\n", "verify", "--out", str(out)) == 3
    assert not out.exists() and not out.with_suffix(".diag.json").exists()
    assert json.loads(capsys.readouterr().err)["status"] == "config_error"


def test_missing_waveop_file_is_config_error(tmp_path):
    out = tmp_path / "r.csv"
    code = _run(tmp_path, INTEG, "scatter-residual", "--waveop", str(tmp_path / "no.csv"),
                "--out", str(out))
    assert code == 3 and not out.exists()


def test_numerical_failure_exit_4(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise StiffnessError("step size underflow", t=12.5)
    monkeypatch.setattr(cli, "evolve", boom)
    out = tmp_path / "t.csv"
    assert _run(tmp_path, ZERO, "simulate", "--out", str(out)) == 4
    diag = json.loads(out.with_suffix(".diag.json").read_text())
    assert diag["error"] == "StiffnessError" and diag["t"] == 12.5


def test_global_flags_before_subcommand(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(ZERO)
    out = tmp_path / "s.csv"
    assert cli.main(["--config", str(cfg), "--out", str(out), "--seed", "3",
                     "simulate"]) == 0
    assert out.exists()


def test_verify_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert _run(tmp_path, ZERO, "verify", "--out", str(d / "v.csv"), "--seed", "7") == 0
    for f in sorted(p.name for p in a.glob("*.csv")):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_epsilon_restricts_q1_tail(tmp_path):
    out = tmp_path / "v.csv"
    text = ZERO.replace('coefficient = { kind = "zero" }',
                        'coefficient = { kind = "mu_over_1pt", mu = 0.3 }\nepsilon = 2.0')
    assert _run(tmp_path, text, "verify", "q1-tail", "--out", str(out)) == 0
    _, rows, _ = _read(tmp_path / "v_q1_tail.csv")
    assert {float(r[0]) for r in rows} == {5.0}
    diag = json.loads(out.with_suffix(".diag.json").read_text())
    assert diag["info"]["q1-tail"]["epsilon"] == 2.0
