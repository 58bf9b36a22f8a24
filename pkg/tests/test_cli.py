import json

import numpy as np
import pytest

from omx.cli import ConfigError, load_config, main, run_spectrum, run_sweep, run_transistor
from omx.scan import ScanResult, compare


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


SPECTRUM_CFG = """
[params]
g0 = 8
kappa = 1
Omega_a = 0.01

[grid.Delta_a]
start = -8
stop = 8
points = 81
"""


def test_config_units_and_anchor(tmp_path):
    cfg = load_config(write(tmp_path / "c.cfg", """
[params]
kappa = 5 MHz
g0 = 50 MHz
omega_m = 4 GHz
Q = 1e5
T = 100 mK
"""))
    p = cfg.params
    assert p.kappa == 1.0 and p.kappa_hz == 5e6
    assert p.g0 == pytest.approx(10.0)
    assert p.omega_m == pytest.approx(800.0)
    assert p.N_th == pytest.approx(0.1724, abs=2e-3)


def test_config_rejects_unknown_keys(tmp_path):
    with pytest.raises(ConfigError, match="unknown parameter"):
        load_config(write(tmp_path / "c.cfg", "[params]\nbogus = 3\n"))


def test_config_grids(tmp_path):
    cfg = load_config(write(tmp_path / "c.cfg", """
[params]
g0 = 1

[grid.x]
start = 1
stop = 100
points = 3
scale = log

[grid.y]
values = 0.5, 1.5
"""))
    assert cfg.grid("x") == pytest.approx([1.0, 10.0, 100.0])
    assert cfg.grid("y") == pytest.approx([0.5, 1.5])
    with pytest.raises(ConfigError, match="missing"):
        cfg.grid("z")


def test_spectrum_scenario_and_determinism(tmp_path):
    cfg_path = write(tmp_path / "spectrum.cfg", SPECTRUM_CFG)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["spectrum", "--config", str(cfg_path), "--out", str(out_a)]) == 0
    assert main(["spectrum", "--config", str(cfg_path), "--out", str(out_b)]) == 0
    csv_a = (out_a / "spectrum.csv").read_bytes()
    csv_b = (out_b / "spectrum.csv").read_bytes()
    assert csv_a == csv_b
    header = [ln for ln in csv_a.decode().splitlines() if not ln.startswith("#")][0]
    assert header.split(",")[0] == "Delta_a"
    meta = json.loads((out_a / "spectrum.json").read_text())["metadata"]
    assert meta["params"]["g0"] == 8.0
    assert meta["grids"]["Delta_a"][0] == -8.0


def test_spectrum_antibunching_content(tmp_path):
    cfg = load_config(write(tmp_path / "c.cfg", SPECTRUM_CFG))
    res = run_spectrum(cfg)
    g2 = res.columns["g2_analytic"]
    grid = res.axes[0][1]
    assert g2[np.abs(grid) == 4.0].max() < 1.0
    assert g2[grid == 0.0][0] > 1.0


def test_missing_config_exits_2(tmp_path):
    assert main(["spectrum", "--config", str(tmp_path / "nope.cfg"),
                 "--out", str(tmp_path)]) == 2


def test_empty_grid_exits_2(tmp_path):
    cfg_path = write(tmp_path / "bad.cfg", """
[params]
g0 = 8

[grid.Delta_a]
values =
""")
    assert main(["spectrum", "--config", str(cfg_path), "--out", str(tmp_path)]) == 2


def test_transistor_scenario(tmp_path):
    cfg = load_config(write(tmp_path / "t.cfg", """
[params]
g0 = 10
kappa = 1
omega_m = 100
J = 50

[grid.Delta]
start = -8
stop = 8
points = 65

[run]
n_m = 0, 1
"""))
    res = run_transistor(cfg)
    assert res.n_rows == 2 * 65
    absr = res.columns["r_abs"].reshape(2, 65)
    assert absr[0].min() > 1 - 1e-6          # empty ladder: no dip
    assert absr[1].min() < 0.2               # split ladder: deep dips


def test_sweep_parallel_matches_serial(tmp_path):
    text = """
[params]
g0 = 8
kappa = 1
Omega_a = 0.01

[grid.Delta_a]
start = 1
stop = 4
points = 7

[grid.N_th]
values = 0, 1

[run]
observable = six_state_g2
jobs = {jobs}
"""
    serial = run_sweep(load_config(write(tmp_path / "s1.cfg", text.format(jobs=1))))
    parallel = run_sweep(load_config(write(tmp_path / "s2.cfg", text.format(jobs=2))))
    assert np.array_equal(serial.columns["g2_analytic"], parallel.columns["g2_analytic"])
    assert serial.n_rows == 14


def test_sweep_requires_known_observable(tmp_path):
    cfg = load_config(write(tmp_path / "s.cfg", """
[params]
g0 = 8

[grid.Delta_a]
values = 1

[run]
observable = nope
"""))
    with pytest.raises(ConfigError, match="observable"):
        run_sweep(cfg)


def test_compare_reports_and_axis_mismatch():
    axes = [("x", np.array([1.0, 2.0]))]
    a = ScanResult(axes, {"v": np.array([1.0, 2.0])})
    b = ScanResult(axes, {"v": np.array([1.0, 2.0])})
    rep = compare(a, b, tolerance=1e-12)
    assert rep.max_rel == 0.0 and rep.ok
    c = ScanResult([("x", np.array([1.0, 3.0]))], {"v": np.array([1.0, 2.0])})
    with pytest.raises(ValueError, match="axis mismatch"):
        compare(a, c, tolerance=0.1)
    d = ScanResult(axes, {"v": np.array([1.1, 2.0])})
    rep = compare(a, d, tolerance=0.05)
    assert not rep.ok and rep.max_rel == pytest.approx(0.1, rel=1e-9)


def test_scan_result_rejects_nan_and_bad_shape():
    with pytest.raises(ValueError, match="NaN"):
        ScanResult([("x", np.array([1.0]))], {"v": np.array([np.nan])})
    with pytest.raises(ValueError, match="shape"):
        ScanResult([("x", np.array([1.0, 2.0]))], {"v": np.array([1.0])})


def test_compare_effective_exit_codes(tmp_path):
    base = """
[params]
g0 = 1
kappa = 0.025
gamma = 2.5e-4
N_th = 1
Delta_s = -1
omega_m = 0.5
Delta_a = -5.5
alpha = 1

[run]
alphas = 1.0
n_max = 2
truncations = a:4, s:3, m:7
{tol}
"""
    ok_cfg = write(tmp_path / "ok.cfg", base.format(tol=""))
    assert main(["compare-effective", "--config", str(ok_cfg),
                 "--out", str(tmp_path / "ok")]) == 0
    tight = write(tmp_path / "tight.cfg", base.format(tol="tolerance_re = 1e-6"))
    assert main(["compare-effective", "--config", str(tight),
                 "--out", str(tmp_path / "tight")]) == 4


def test_g2scan_full_vs_analytic_within_tolerance(tmp_path):
    from omx.cli import run_g2scan
    from omx.scan import ScanResult as SR
    cfg = load_config(write(tmp_path / "g.cfg", """
[params]
g0 = 8
kappa = 1
omega_m = 160
J = 80
Omega_a = 0.01
gamma = 0.01

[grid.Delta_a]
values = -4, -2, 2, 2.8, 4

[run]
truncations = a:4, s:4, m:6
jobs = 2
"""))
    res = run_g2scan(cfg)
    axes = res.axes
    numeric = SR(axes, {"g2": res.columns["g2_numeric"]})
    analytic = SR(axes, {"g2": res.columns["g2_analytic"]})
    rep = compare(analytic, numeric, tolerance=0.10)
    assert rep.ok, f"max rel deviation {rep.max_rel:.3f}"
    assert np.all(res.columns["residual"] < 1e-9)


def test_json_roundtrip(tmp_path):
    axes = [("x", np.array([1.0, 2.0])), ("y", np.array([0.0, 0.5, 1.0]))]
    cols = {"z": np.arange(6.0), "w": np.arange(6) * (1 + 2j)}
    res = ScanResult(axes, cols, {"note": "roundtrip"})
    res.write_json(tmp_path / "r.json")
    back = ScanResult.read_json(tmp_path / "r.json")
    assert [n for n, _ in back.axes] == ["x", "y"]
    assert np.allclose(back.columns["w"], cols["w"])
    assert back.metadata["note"] == "roundtrip"


def test_gate_error_surface_monotone(tmp_path):
    from omx.cli import run_gate_error
    cfg = load_config(write(tmp_path / "ge.cfg", """
[params]
g0 = 1
gamma = 8e-5
delta = 3
alpha = 1

[grid.kappa]
values = 0.0025, 0.01

[grid.Gamma_m]
values = 1e-5, 1e-3
"""))
    res = run_gate_error(cfg)
    surface = res.columns["eps_g"].reshape(2, 2)
    assert np.all(np.diff(surface, axis=0) > 0)  # larger kappa hurts
    assert np.all(np.diff(surface, axis=1) > 0)  # larger Gamma_m hurts


def test_ming2_scenario(tmp_path):
    cfg_path = write(tmp_path / "m.cfg", """
[params]
g0 = 8
kappa = 1
Omega_a = 0.01

[grid.g0]
values = 8, 16

[run]
nth_list = 0, 1
""")
    out = tmp_path / "out"
    assert main(["ming2", "--config", str(cfg_path), "--out", str(out)]) == 0
    lines = (out / "ming2.csv").read_text().splitlines()
    header = [ln for ln in lines if not ln.startswith("#")][0]
    assert header == "g0,N_th,min_g2,argmin_delta_a"


def test_malformed_grid_entry_is_config_error(tmp_path):
    cfg_path = write(tmp_path / "bad.cfg", """
[params]
g0 = 2

[grid.Delta_a]
values = 1.0, nofail
""")
    assert main(["spectrum", "--config", str(cfg_path), "--out", str(tmp_path)]) == 2


def test_g2scan_solver_failure_flushes_partial(tmp_path, monkeypatch):
    import omx.cli as climod
    from omx.dynamics import SolverError

    real = climod._g2_point
    calls = {"n": 0}

    def flaky(args):
        calls["n"] += 1
        if calls["n"] == 3:
            raise SolverError("forced")
        return real(args)

    monkeypatch.setattr(climod, "_g2_point", flaky)
    cfg_path = write(tmp_path / "scan.cfg", """
[params]
g0 = 2
kappa = 1
omega_m = 40
J = 20
Omega_a = 0.01
gamma = 0.01

[grid.Delta_a]
values = 0.5, 1.0, 1.5, 2.0

[run]
truncations = a:3, s:3, m:3
""")
    out = tmp_path / "out"
    assert main(["g2scan", "--config", str(cfg_path), "--out", str(out)]) == 3
    partial = (out / "g2scan.partial.csv").read_text()
    rows = [ln for ln in partial.splitlines() if not ln.startswith("#")]
    assert len(rows) == 1 + 2  # header + the two solved points
    assert "aborted_at" in partial


def test_unwritable_output_is_config_error(tmp_path):
    cfg_path = write(tmp_path / "s.cfg", SPECTRUM_CFG)
    blocker = tmp_path / "blocker"
    blocker.write_text("a file where a directory must go")
    assert main(["spectrum", "--config", str(cfg_path),
                 "--out", str(blocker / "sub")]) == 2
