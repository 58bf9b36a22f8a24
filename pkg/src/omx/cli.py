"""Scenario runner: config-driven sweeps with deterministic CSV/JSON output.

Subcommands:
    omx spectrum|g2scan|ming2|transistor|gate-error|phonon-eigen|
        compare-effective|sweep --config FILE --out DIR

Exit codes: 0 success, 2 config error, 3 solver failure, 4 tolerance
failure (compare-effective).

Config grammar (INI-style, '#' comments):

    [params]            # any SystemParams field; values take unit suffixes
    g0 = 8              # bare numbers are kappa units (or dimensionless)
    kappa = 5 MHz       # a physical kappa anchors Hz/kHz/MHz/GHz inputs
    T = 100 mK          # temperatures in K/mK/uK

    [grid.Delta_a]      # one section per swept axis
    start = -8
    stop = 8
    points = 161
    scale = lin         # or log
    # or instead:  values = -8, -4, 0, 4, 8

    [run]               # scenario options (truncations, jobs, n_m, ...)
    truncations = a:4, s:4, m:6
    jobs = 1

Every output embeds the resolved parameters, grids, and options, enough to
reproduce the run; repeated runs of one config are byte identical.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields as dc_fields
from pathlib import Path

import numpy as np

from . import __version__, analytics, models
from .dynamics import SolverError, g2_zero, nonhermitian_eigs, reflection_spectrum, steady_state
from .hilbert import annihilator
from .params import SystemParams, parse_quantity
from .scan import CompareReport, ScanResult

WEAK_DRIVE_DEFAULT = 0.01  # in units of kappa; used wherever a probe is implied


class ConfigError(ValueError):
    pass


class ScanAborted(RuntimeError):
    """A grid point failed to solve; carries whatever was already computed."""

    def __init__(self, message: str, partial: "ScanResult | None" = None):
        super().__init__(message)
        self.partial = partial


# ---------------------------------------------------------------- config ---

_PARAM_FIELDS = {f.name for f in dc_fields(SystemParams)} - {"meta", "kappa_hz"}


class Config:
    def __init__(self, params: SystemParams, grids: dict, run: dict, raw: dict):
        self.params = params
        self.grids = grids
        self.run = run
        self.raw = raw

    def grid(self, name: str) -> np.ndarray:
        if name not in self.grids:
            raise ConfigError(f"missing [grid.{name}] section")
        g = self.grids[name]
        if len(g) == 0:
            raise ConfigError(f"grid {name!r} is empty")
        return g

    def opt(self, key: str, default=None):
        return self.run.get(key, default)


def _parse_grid(section) -> np.ndarray:
    try:
        if "values" in section:
            return np.array([float(v) for v in section["values"].split(",") if v.strip()])
        start, stop = float(section["start"]), float(section["stop"])
        points = int(section["points"])
    except KeyError as exc:
        raise ConfigError(f"grid needs start/stop/points or values (missing {exc})") from exc
    except ValueError as exc:
        raise ConfigError(f"bad grid entry: {exc}") from exc
    if points < 1:
        raise ConfigError("grid points must be >= 1")
    scale = section.get("scale", "lin").strip().lower()
    if scale == "lin":
        return np.linspace(start, stop, points)
    if scale == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError("log grids need positive endpoints")
        return np.geomspace(start, stop, points)
    raise ConfigError(f"unknown grid scale {scale!r}")


def load_config(path) -> Config:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    raw_params = dict(cp["params"]) if cp.has_section("params") else {}
    kappa_hz = None
    if "kappa" in raw_params:
        text = raw_params["kappa"].strip()
        parts = text.split()
        if len(parts) == 2 and parts[1].lower() in ("hz", "khz", "mhz", "ghz", "thz"):
            kappa_hz = parse_quantity(parts[0] + " " + parts[1], kappa_hz=1.0)  # value in Hz
            raw_params["kappa"] = "1.0"
    kw = {}
    for key, text in raw_params.items():
        if key not in _PARAM_FIELDS:
            raise ConfigError(f"unknown parameter {key!r}")
        try:
            kw[key] = parse_quantity(text, kappa_hz)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    kw["kappa_hz"] = kappa_hz
    try:
        params = SystemParams(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameters: {exc}") from exc

    grids = {}
    for section in cp.sections():
        if section.startswith("grid."):
            grids[section[5:]] = _parse_grid(cp[section])
    run = dict(cp["run"]) if cp.has_section("run") else {}
    return Config(params, grids, run, {s: dict(cp[s]) for s in cp.sections()})


def _parse_truncations(text) -> dict[str, int]:
    out = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        label, _, dim = item.partition(":")
        if not dim:
            raise ConfigError(f"truncation entry {item!r} is not label:dim")
        out[label.strip()] = int(dim)
    return out


def _truncations(cfg: Config, default=None):
    text = cfg.opt("truncations")
    if text is None:
        return default
    return _parse_truncations(text)


def _floats(text) -> list[float]:
    return [float(v) for v in str(text).split(",") if str(v).strip()]


def _provenance(cfg: Config, scenario: str, **extra) -> dict:
    meta = {
        "omx_version": __version__,
        "scenario": scenario,
        "deterministic": True,
        "params": {k: v for k, v in (
            (f.name, getattr(cfg.params, f.name)) for f in dc_fields(cfg.params))
            if v is not None and f"{k}" != "meta"},
        "grids": {name: [float(v) for v in vals] for name, vals in cfg.grids.items()},
        "run": dict(cfg.run),
    }
    meta.update(extra)
    return meta


# ------------------------------------------------------------- scenarios ---

def _weak_params(cfg: Config) -> SystemParams:
    p = cfg.params
    if not p.Omega_a:
        p = p.replace(Omega_a=WEAK_DRIVE_DEFAULT * p.kappa)
    if p.omega_m is None:
        # resonant operating point, large compared to g0 and kappa
        om = 20.0 * max(p.g0, p.kappa)
        p = p.replace(omega_m=om, J=om / 2)
    elif p.J is None:
        p = p.replace(J=p.omega_m / 2)  # resonant tunnel splitting
    return p


def run_spectrum(cfg: Config) -> ScanResult:
    """Weak-drive excitation spectrum and g2 versus Delta_a (closed form)."""
    p = _weak_params(cfg)
    grid = cfg.grid("Delta_a")
    n0 = (p.Omega_a / p.kappa) ** 2
    na, g2 = [], []
    for da in grid:
        res = analytics.six_state_g2(p.replace(Delta_a=float(da)))
        na.append(res.mean_na / n0)
        g2.append(res.g2_zero)
    return ScanResult([("Delta_a", grid)],
                      {"na_over_n0_analytic": np.array(na),
                       "g2_analytic": np.array(g2)},
                      _provenance(cfg, "spectrum", n0=n0))


def _g2_point(args):
    p, da, truncations, check = args
    model = models.build_rwa(p.replace(Delta_a=float(da)), truncations)
    rep = steady_state(model, check_unique=check)
    n_op = annihilator(model.space, "a")
    nbar = float(np.real(rep.state.expect(n_op.dag() @ n_op)))
    return nbar, g2_zero(rep.state, "a"), rep.residual


def run_g2scan(cfg: Config) -> ScanResult:
    """Full master-equation g2 and excitation scan with analytic overlay.

    A solver failure raises ScanAborted naming the grid point, carrying the
    points solved so far.
    """
    p = _weak_params(cfg)
    if p.gamma is None:
        p = p.replace(gamma=0.01 * p.kappa, Q=None)
    grid = cfg.grid("Delta_a")
    truncations = _truncations(cfg, {"a": 4, "s": 4, "m": 6})
    jobs = int(cfg.opt("jobs", 1))
    check = cfg.opt("check_unique", "first")
    tasks = [(p, da, truncations, check == "all" or (check == "first" and i == 0))
             for i, da in enumerate(grid)]
    rows = []
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for row in pool.map(_g2_point, tasks):
                    rows.append(row)
        else:
            for t in tasks:
                rows.append(_g2_point(t))
    except SolverError as exc:
        done = grid[: len(rows)]
        partial = ScanResult(
            [("Delta_a", done)],
            {"na_numeric": np.array([r[0] for r in rows]),
             "g2_numeric": np.array([r[1] for r in rows]),
             "residual": np.array([r[2] for r in rows])},
            _provenance(cfg, "g2scan", truncations=truncations,
                        aborted_at=float(grid[len(rows)])))
        raise ScanAborted(
            f"solver failed at Delta_a = {grid[len(rows)]}: {exc}", partial) from exc
    n0 = (p.Omega_a / p.kappa) ** 2
    na_num = np.array([r[0] for r in rows]) / n0
    g2_num = np.array([r[1] for r in rows])
    residual = np.array([r[2] for r in rows])
    na_an, g2_an = [], []
    for da in grid:
        res = analytics.six_state_g2(p.replace(Delta_a=float(da)))
        na_an.append(res.mean_na / n0)
        g2_an.append(res.g2_zero)
    return ScanResult(
        [("Delta_a", grid)],
        {"na_over_n0_numeric": na_num, "g2_numeric": g2_num,
         "na_over_n0_analytic": np.array(na_an), "g2_analytic": np.array(g2_an),
         "residual": residual},
        _provenance(cfg, "g2scan", truncations=truncations, n0=n0))


def run_ming2(cfg: Config) -> ScanResult:
    g0_grid = cfg.grid("g0")
    nth = np.array(_floats(cfg.opt("nth_list", "0")))
    res = analytics.min_g2_scan(cfg.params, g0_grid, nth)
    res.metadata.update(_provenance(cfg, "ming2"))
    return res


def run_transistor(cfg: Config) -> ScanResult:
    p = cfg.params
    grid = cfg.grid("Delta")
    n_ms = [int(v) for v in _floats(cfg.opt("n_m", "0, 1"))]
    omega = float(cfg.opt("omega", WEAK_DRIVE_DEFAULT * p.kappa))
    truncations = _truncations(cfg, None) or {"s": 4, "ap": 4}
    r_all = []
    for n_m in n_ms:
        model = models.build_transistor(p, n_m, (truncations["s"], truncations["ap"]))
        refl = reflection_spectrum(model, "s", grid, omega)
        r_all.extend(r for _, r in refl)
    r_all = np.array(r_all)
    return ScanResult(
        [("n_m", np.array(n_ms)), ("Delta", grid)],
        {"r": r_all, "r_abs": np.abs(r_all), "r_phase": np.angle(r_all)},
        _provenance(cfg, "transistor", omega=omega, truncations=truncations))


def run_gate_error(cfg: Config) -> ScanResult:
    """Conditional-phase gate error over (kappa, Gamma_m), optimized in Delta_s."""
    p = cfg.params
    kappas = cfg.grid("kappa")
    gammas_m = cfg.grid("Gamma_m")
    exact = str(cfg.opt("exact", "false")).lower() in ("1", "true", "yes")
    eps, ds_opt, tg = [], [], []
    for kap in kappas:
        for gm in gammas_m:
            # Gamma_m = gamma/4 at N_th = 0
            pp = p.replace(kappa=float(kap), gamma=4.0 * float(gm), N_th=0.0,
                           T=None, Q=None)
            budget = analytics.phase_gate_error(pp, exact=exact)
            eps.append(budget.epsilon_g)
            ds_opt.append(budget.delta_s_opt)
            tg.append(budget.t_g)
    return ScanResult(
        [("kappa", kappas), ("Gamma_m", gammas_m)],
        {"eps_g": np.array(eps), "delta_s_opt": np.array(ds_opt),
         "t_g": np.array(tg)},
        _provenance(cfg, "gate-error", exact=exact))


def run_phonon_eigen(cfg: Config) -> ScanResult:
    """Hybridized-phonon eigenvalue ladder: exact versus closed form.

    Emits (Re lambda_n - n tilde_omega_m)/Lambda0 and |Im lambda_n|/Lambda0
    per Fock index and drive amplitude, for the non-Hermitian model and for
    the analytic prediction.
    """
    p = cfg.params
    alphas = np.array(_floats(cfg.opt("alphas", "0.5, 1.0")))
    n_max = int(cfg.opt("n_max", 3))
    truncations = _truncations(cfg, {"a": 5, "s": 3, "m": 9})
    lam0 = analytics.phonon_nonlinearity(p.replace(alpha=1.0)).Lambda0
    re_num, im_num, re_pred, im_pred, ovl = [], [], [], [], []
    for alpha in alphas:
        pa = p.replace(alpha=complex(alpha))
        frame = models.hybridize(pa)
        h = models.build_nonhermitian(pa, truncations)
        eigs = {e.n: e for e in nonhermitian_eigs(h, n_max + 1)}
        for n in range(n_max + 1):
            lam = eigs[n].value
            pred = analytics.eigenvalue_prediction(pa, n)
            re_num.append((lam.real - n * frame.tilde_omega_m) / lam0)
            im_num.append(abs(lam.imag) / lam0)
            re_pred.append((pred.real - n * frame.tilde_omega_m) / lam0)
            im_pred.append(abs(pred.imag) / lam0)
            ovl.append(eigs[n].overlap)
    return ScanResult(
        [("alpha", alphas), ("n", np.arange(n_max + 1))],
        {"re_dev_over_L0_numeric": np.array(re_num),
         "im_over_L0_numeric": np.array(im_num),
         "re_dev_over_L0_analytic": np.array(re_pred),
         "im_over_L0_analytic": np.array(im_pred),
         "overlap": np.array(ovl)},
        _provenance(cfg, "phonon-eigen", truncations=truncations, Lambda0=lam0))


def run_compare_effective(cfg: Config) -> tuple[ScanResult, list[CompareReport]]:
    """phonon-eigen scan plus per-point analytic-vs-numeric deviations.

    Reports one comparison per observable (real-part deviation relative to
    the predicted Kerr splitting, skipping n = 0 where both vanish; decay
    rates for all n). The command exits 4 when any report is out of
    tolerance.
    """
    res = run_phonon_eigen(cfg)
    tol_re = float(cfg.opt("tolerance_re", 0.15))
    tol_im = float(cfg.opt("tolerance_im", 0.20))
    n_col = res.axis_grid()[1]
    nonzero = n_col > 0
    rel_re = np.zeros(res.n_rows)
    rel_re[nonzero] = np.abs(
        res.columns["re_dev_over_L0_numeric"][nonzero]
        / res.columns["re_dev_over_L0_analytic"][nonzero] - 1.0)
    rel_im = np.abs(res.columns["im_over_L0_numeric"]
                    / res.columns["im_over_L0_analytic"] - 1.0)
    res.columns["rel_err_re"] = rel_re
    res.columns["rel_err_im"] = rel_im
    reports = [
        CompareReport(float(rel_re[nonzero].max()), float(np.median(rel_re[nonzero])),
                      tol_re, ["re_dev_over_L0"]),
        CompareReport(float(rel_im.max()), float(np.median(rel_im)),
                      tol_im, ["im_over_L0"]),
    ]
    res.metadata.update(scenario="compare-effective",
                        tolerance_re=tol_re, tolerance_im=tol_im,
                        max_rel_err_re=reports[0].max_rel,
                        max_rel_err_im=reports[1].max_rel)
    return res, reports


_SWEEP_OBSERVABLES = {}


def _sweep_g2(p: SystemParams) -> dict:
    res = analytics.six_state_g2(p)
    return {"g2_analytic": res.g2_zero, "mean_na": res.mean_na}


def _sweep_transistor(p: SystemParams) -> dict:
    b = analytics.transistor_error(p)
    return {"epsilon": b.epsilon, "tau_opt": b.tau_opt, "Gamma_m": b.Gamma_m}


def _sweep_nonlinearity(p: SystemParams) -> dict:
    b = analytics.phonon_nonlinearity(p)
    return {"Lambda": b.Lambda, "Gamma_phi": b.Gamma_phi, "gamma_prime": b.gamma_prime}


def _sweep_gate(p: SystemParams) -> dict:
    b = analytics.phase_gate_error(p)
    return {"eps_g": b.epsilon_g, "delta_s_opt": b.delta_s_opt, "t_g": b.t_g}


_SWEEP_OBSERVABLES.update({
    "six_state_g2": _sweep_g2,
    "transistor_error": _sweep_transistor,
    "phonon_nonlinearity": _sweep_nonlinearity,
    "phase_gate_error": _sweep_gate,
})


def _sweep_point(args):
    p, names, values, obs_name = args
    pp = p.replace(**dict(zip(names, map(float, values))))
    return _SWEEP_OBSERVABLES[obs_name](pp)


def run_sweep(cfg: Config) -> ScanResult:
    """Generic analytic sweep over any SystemParams fields."""
    obs_name = cfg.opt("observable")
    if obs_name not in _SWEEP_OBSERVABLES:
        raise ConfigError(
            f"observable must be one of {sorted(_SWEEP_OBSERVABLES)}; got {obs_name!r}")
    if not cfg.grids:
        raise ConfigError("sweep needs at least one [grid.<param>] section")
    names = list(cfg.grids)
    for name in names:
        if name not in _PARAM_FIELDS:
            raise ConfigError(f"cannot sweep unknown parameter {name!r}")
    axes = [(name, cfg.grids[name]) for name in names]
    mesh = np.meshgrid(*[v for _, v in axes], indexing="ij")
    points = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    tasks = [(cfg.params, names, pt, obs_name) for pt in points]
    jobs = int(cfg.opt("jobs", 1))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    columns = {k: np.array([r[k] for r in rows]) for k in rows[0]}
    return ScanResult(axes, columns, _provenance(cfg, "sweep", observable=obs_name))


_SCENARIOS = {
    "spectrum": run_spectrum,
    "g2scan": run_g2scan,
    "ming2": run_ming2,
    "transistor": run_transistor,
    "gate-error": run_gate_error,
    "phonon-eigen": run_phonon_eigen,
    "sweep": run_sweep,
}


# ------------------------------------------------------------------ main ---

def _emit(result: ScanResult, out_dir: Path, stem: str) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        result.write_csv(out_dir / f"{stem}.csv")
        result.write_json(out_dir / f"{stem}.json")
    except OSError as exc:
        raise ConfigError(f"cannot write to {out_dir}: {exc}") from exc
    print(f"wrote {out_dir / (stem + '.csv')} ({result.n_rows} rows)")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="omx",
        description="Multimode optomechanics scenario runner (data output only; "
                    "plotting is external)")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in list(_SCENARIOS) + ["compare-effective"]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario config file")
        p.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    try:
        if args.scenario == "compare-effective":
            result, reports = run_compare_effective(cfg)
            _emit(result, out_dir, "compare-effective")
            for rep in reports:
                print(f"{rep.compared[0]}: max rel dev {rep.max_rel:.4f}, "
                      f"median {rep.median_rel:.4f}, tolerance {rep.tolerance:.4f} "
                      f"-> {'ok' if rep.ok else 'FAIL'}")
            return 0 if all(r.ok for r in reports) else 4
        result = _SCENARIOS[args.scenario](cfg)
        _emit(result, out_dir, args.scenario)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ScanAborted as exc:
        if exc.partial is not None and exc.partial.n_rows:
            try:
                _emit(exc.partial, out_dir, f"{args.scenario}.partial")
            except ConfigError as io_exc:
                print(f"could not flush partial results: {io_exc}", file=sys.stderr)
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
