"""Command-line front end.

Exit codes: 0 success, 2 configuration or input-format error, 3 numerical
failure, 4 missing input.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import math
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as dg
from . import io, nse2d, synthfield, transport
from .config import Config
from .errors import (
    BlowUpError,
    ConfigError,
    DataFormatError,
    DomainError,
    FiltnoiseError,
    IntegrationIncompleteError,
    MissingInputError,
)
from .kernels import kernel_from_name

log = logging.getLogger("filtnoise")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISSING = 0, 2, 3, 4


class Context:
    def __init__(self, args, cfg: Config):
        self.args = args
        self.cfg = cfg
        self.out = Path(args.out)
        self.outputs = []
        self.inputs = []
        seed = args.seed if args.seed is not None else cfg.get("global", "seed", None)
        if seed is None:
            raise ConfigError("a seed is required: pass --seed or set [global] seed")
        try:
            self.seed = int(seed)
        except ValueError:
            raise ConfigError(f"seed must be an integer, got {seed!r}") from None
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        threads = args.threads or os.environ.get("FILTNOISE_THREADS") or cfg.get("global", "threads", "1")
        self.threads = max(1, int(threads))

    def path(self, name):
        p = self.out / name
        self.outputs.append(p)
        return p

    def config_snapshot(self):
        snap = self.cfg.as_dict()
        snap.setdefault("global", {})
        snap["global"]["seed"] = str(self.seed)
        return snap


# --- dns --------------------------------------------------------------------------

def _solver_config(cfg: Config, seed, threads):
    s = "dns"
    eps = cfg.float(s, "epsilon", 1.0)
    forcing = None
    if cfg.has(s, "k_f") and eps > 0:
        forcing = nse2d.ForcingSpec(cfg.float(s, "k_f"), cfg.int(s, "bandwidth", 1), eps)
    try:
        return nse2d.SolverConfig(
            cfg.int(s, "N"), cfg.float(s, "nu"), cfg.float(s, "alpha"), cfg.float(s, "dt"),
            forcing, seed, cfg.get(s, "integrator", "rk3"), threads,
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def _write_modes(ctx, series, prefix="modes"):
    for m in series:
        p = ctx.path(f"{prefix}/mode_{m.mode[0]}_{m.mode[1]}.csv")
        io.write_csv(p, ["t", "value"], zip(m.times, m.samples))


def _write_spectrum(ctx, state):
    io.write_csv(ctx.path("spectrum.csv"), ["k", "E_k"], nse2d.energy_spectrum(state))


def cmd_dns(ctx: Context):
    cfg = ctx.cfg
    sc = _solver_config(cfg, ctx.seed, ctx.threads)
    steps = cfg.int("dns", "steps")
    spin = cfg.int("dns", "spinup_steps", 0)
    every = cfg.int("dns", "sample_every", 1)
    modes = cfg.pairs("dns", "modes")
    init = cfg.get("dns", "initial", "zero")
    if init == "zero":
        state = nse2d.zeros(sc.N)
    elif init.startswith("random"):
        state = nse2d.random_state(sc.N, cfg.float("dns", "initial_k", 4.0), ctx.seed)
    else:
        state, _ = io.read_snapshot(init)
        ctx.inputs.append(init)
    try:
        res = nse2d.run(sc, state, steps, modes, every, spin)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    io.write_snapshot(ctx.path("final.fnvs"), res.state, sc.nu, sc.alpha, sc.seed)
    _write_spectrum(ctx, res.state)
    io.write_csv(ctx.path("energy.csv"), ["t", "energy"], zip(res.energy_times, res.energies))
    _write_modes(ctx, res.series)
    io.write_json(ctx.path("run.json"), {
        "steps": res.steps,
        "t_final": res.state.t,
        "energy": nse2d.energy(res.state),
        "enstrophy": nse2d.enstrophy(res.state),
        "stationarity": nse2d.stationarity_statistic(res.energy_times, res.energies),
    })


def cmd_modes(ctx: Context):
    """Continue a run from a snapshot and record the requested modes."""
    cfg = ctx.cfg
    snap = cfg.get("modes", "snapshot", None) or cfg.get("dns", "initial", None)
    if not snap:
        raise ConfigError("missing [modes] snapshot")
    state, meta = io.read_snapshot(snap)
    ctx.inputs.append(snap)
    sc = _solver_config(cfg, ctx.seed, ctx.threads)
    if sc.N != state.N:
        raise ConfigError(f"snapshot has N={state.N}, config has N={sc.N}")
    modes = cfg.pairs("modes", "modes")
    try:
        res = nse2d.run(sc, state, cfg.int("modes", "steps"), modes, cfg.int("modes", "sample_every", 1))
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    _write_modes(ctx, res.series)


# --- diagnostics -----------------------------------------------------------------

def _mode_name(path):
    return Path(path).stem


def cmd_diag(ctx: Context):
    cfg = ctx.cfg
    patterns = [p.strip() for p in cfg.get("diag", "inputs", "").split(";") if p.strip()]
    files = []
    for pat in patterns:
        hits = sorted(glob.glob(pat))
        if not hits and not any(c in pat for c in "*?["):
            raise MissingInputError(f"missing input file: {pat}")
        files.extend(hits)
    if not files:
        log.warning("no mode series to analyse; nothing to do")
        return
    level = cfg.float("diag", "level", 0.95)
    max_lag_cfg = cfg.get("diag", "max_lag", None)
    rows = []
    series = []
    for f in files:
        _, data = io.read_csv(f)
        ctx.inputs.append(f)
        if data.shape[1] != 2 or len(data) < 3:
            raise DataFormatError(f, None, "expected two columns (t, value) and at least 3 rows")
        dt = float(data[1, 0] - data[0, 0])
        vals = data[:, 1]
        series.append(vals)
        n = len(vals)
        max_lag = float(max_lag_cfg) if max_lag_cfg else (n // 10) * dt
        est = dg.with_bartlett(dg.autocorrelation((vals, dt), max_lag), level)
        rec = {"source": os.path.basename(f), "n_samples": n, "dt": dt, "max_lag": max_lag}
        try:
            relax = dg.relaxation_time(est)
            rec.update(tau=relax.tau, truncation_lag=relax.truncation_lag, tau_complete=True)
        except IntegrationIncompleteError as exc:
            rec.update(tau=exc.partial, truncation_lag=float(est.lags[-1]), tau_complete=False)
        try:
            fit = dg.fit_beta(est, rec["tau"])
            rec["beta_star"] = "inf" if math.isinf(fit.beta_star) else fit.beta_star
            rec["fit_objective"] = fit.objective
        except FiltnoiseError as exc:
            rec["beta_star"] = None
            rec["fit_error"] = str(exc)
        rec["initial_slope"] = dg.initial_slope(est)
        if n >= 10_000:
            g = dg.gaussianity_check(vals)
            rec.update(skewness=g.skewness, excess_kurtosis=g.excess_kurtosis, ks_statistic=g.ks_statistic)
        rec["lags"] = est.lags
        rec["R"] = est.values
        rec["V"] = 1.0 - est.values
        rec["ci"] = est.ci_halfwidths
        io.write_json(ctx.path(f"diag/{_mode_name(f)}.json"), rec)
        for lag, r, ci in zip(est.lags, est.values, est.ci_halfwidths):
            rows.append((_mode_name(f), lag, lag / rec["tau"], r, 1.0 - r, ci))
    io.write_csv(ctx.path("collapse.csv"), ["mode", "lag", "lag_over_tau", "R", "V", "ci"], rows)
    if len(series) > 1 and len({len(s) for s in series}) == 1:
        cc = dg.cross_correlation(series)
        io.write_json(ctx.path("correlations.json"), {
            "sources": [os.path.basename(f) for f in files],
            "matrix": cc.values,
            "max_offdiag": cc.max_offdiag,
        })


def cmd_collapse(ctx: Context):
    """Merge per-mode diagnostics into one plot-ready table with the model covariance."""
    cfg = ctx.cfg
    src = Path(cfg.get("report", "diag_dir", "") or "")
    files = sorted(src.glob("*.json")) if src.is_dir() else []
    if not src.is_dir():
        raise MissingInputError(f"missing diagnostics directory: {src}")
    kernel = kernel_from_name(cfg.get("report", "kernel", "gaussian"))
    rows = []
    for f in files:
        rec = json.loads(f.read_text(encoding="utf-8"))
        ctx.inputs.append(f)
        tau = rec["tau"]
        for lag, r in zip(rec["lags"], rec["R"]):
            u = lag / tau
            rows.append((f.stem, u, r, float(kernel.covariance(u)), 1.0 - r))
    if not rows:
        log.warning("no diagnostics records in %s", src)
    io.write_csv(ctx.path("collapse_report.csv"), ["mode", "lag_over_tau", "R", "C_model", "V"], rows)


# --- synthesis and transport -----------------------------------------------------------

def _field_from_config(cfg: Config, seed):
    s = "synth"
    if cfg.has(s, "field_json"):
        doc = json.loads(Path(cfg.get(s, "field_json")).read_text(encoding="utf-8"))
        shell = synthfield.ShellSpec(int(doc["k_max"]), int(doc["half_width"]))
        return synthfield.build_umax(float(doc["E"]), shell, doc["kernel"], float(doc["tau"]), int(doc["seed"]))
    if not cfg.has(s, "tau"):
        raise ConfigError("missing [synth] tau")
    try:
        shell = synthfield.ShellSpec(cfg.int(s, "k_max"), cfg.int(s, "half_width", 1))
        return synthfield.build_umax(
            cfg.float(s, "E"), shell, cfg.get(s, "kernel", "gaussian"), cfg.float(s, "tau"), seed
        )
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def cmd_synth(ctx: Context):
    f = _field_from_config(ctx.cfg, ctx.seed)
    ctx.path("field.json").write_text(f.to_json() + "\n", encoding="utf-8")
    io.write_csv(ctx.path("modes.csv"), ["kx", "ky"], f.kvec)
    q = synthfield.q_matrix(f.shell, (0.0, 0.0))
    io.write_json(ctx.path("q_matrix.json"), {"Q": q.Q, "isotropic": q.isotropic, "deviation": q.deviation})
    if ctx.cfg.has("synth", "horizon"):
        dt = ctx.cfg.float("synth", "dt")
        real = f.realize(dt, ctx.cfg.float("synth", "horizon"))
        cols = [f"cos_{a}_{b}" for a, b in f.kvec] + [f"sin_{a}_{b}" for a, b in f.kvec]
        data = np.column_stack([real.times, real.xi.reshape(-1, len(real.times)).T])
        io.write_csv(ctx.path("paths.csv"), ["t"] + cols, data)


def _bands(cfg, key, default):
    raw = cfg.get("tracer", key, default)
    lo, hi = (float(v) for v in raw.split(","))
    return lo, hi


def cmd_disperse(ctx: Context):
    cfg = ctx.cfg
    s = "tracer"
    kind = cfg.get(s, "field", "synthetic")
    M = cfg.int(s, "M", 10000)
    realizations = cfg.int(s, "realizations", 100 if kind != "constant" else 1)
    dt = cfg.float(s, "dt")
    T = cfg.float(s, "T")
    report = {"field": kind, "M": M, "dt": dt, "T": T}
    pred = None
    if kind == "constant":
        u0 = tuple(float(v) for v in cfg.get(s, "u0", "1,0").split(","))
        fld = transport.ConstantField(u0)
        tau = cfg.float(s, "tau", T / 50.0 * 0.999)
        report["ballistic_only"] = True
    elif kind in ("synthetic", "white-noise"):
        fld = _field_from_config(cfg, ctx.seed)
        tau = fld.tau
        if kind == "white-noise":
            fld = synthfield.white_noise_field(fld)
        else:
            pred = transport.VariancePrediction(fld.kernel.covariance, fld.tau, fld.E)
        base = fld.base if kind == "white-noise" else fld
        report.update(tau=tau, E=base.E, **transport.effective_diffusivity(tau, base.E))
    else:
        raise ConfigError(f"unknown [tracer] field {kind!r}")
    try:
        curve = transport.advect(fld, M, dt, T, ctx.seed, realizations, cfg.int(s, "record_every", 1))
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    io.write_csv(ctx.path("dispersion.csv"), ["t", "var_x", "stderr", "var_total"], curve.rows())
    if pred is not None:
        t = curve.times
        v = pred(t)
        io.write_csv(ctx.path("prediction.csv"), ["t", "var_x", "stderr", "var_total"],
                     np.column_stack([t, v, np.zeros_like(v), 2 * v]))
    try:
        reg = transport.regime_check(curve, tau)
    except DomainError as exc:
        raise DomainError(f"{exc}; required span is [tau/50, 50 tau] with tau={tau:.6g}") from None
    short_band = _bands(cfg, "short_band", "1.6,2.1")
    long_band = _bands(cfg, "long_band", "0.9,1.1")
    report.update(
        slope_short=reg.slope_short,
        slope_long=reg.slope_long,
        transition_estimate=reg.transition_estimate,
        short_pass=short_band[0] <= reg.slope_short <= short_band[1],
        long_pass=long_band[0] <= reg.slope_long <= long_band[1],
    )
    if kind == "constant":
        report["long_pass"] = abs(reg.slope_long - 2.0) < 1e-6
    elif kind == "white-noise":
        # no ballistic range in the white-in-time limit
        report["short_pass"] = None
    io.write_json(ctx.path("regime.json"), report)


def cmd_predict(ctx: Context):
    cfg = ctx.cfg
    s = "predict"
    if not cfg.has(s, "tau"):
        raise ConfigError("missing [predict] tau")
    tau = cfg.float(s, "tau")
    E = cfg.float(s, "E")
    if tau <= 0 or E <= 0:
        raise ConfigError("tau and E must be positive")
    kernel = kernel_from_name(cfg.get(s, "kernel", "gaussian"))
    t = np.geomspace(cfg.float(s, "t_min", tau / 100), cfg.float(s, "t_max", 100 * tau), cfg.int(s, "points", 200))
    pred = transport.VariancePrediction(kernel.covariance, tau, E)
    v = pred(t)
    io.write_csv(ctx.path("prediction.csv"), ["t", "var_x", "stderr", "var_total"],
                 np.column_stack([t, v, np.zeros_like(v), 2 * v]))
    reg = transport.regime_check((t, v), tau)
    io.write_json(ctx.path("regime.json"), {
        "tau": tau, "E": E, "slope_short": reg.slope_short, "slope_long": reg.slope_long,
        "transition_estimate": reg.transition_estimate, **transport.effective_diffusivity(tau, E),
    })


COMMANDS = {
    ("dns", "run"): cmd_dns,
    ("modes", "extract"): cmd_modes,
    ("diag", "run"): cmd_diag,
    ("synth", "build"): cmd_synth,
    ("tracer", "disperse"): cmd_disperse,
    ("tracer", "predict"): cmd_predict,
    ("report", "collapse"): cmd_collapse,
}


def build_parser():
    p = argparse.ArgumentParser(prog="filtnoise", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    groups = p.add_subparsers(dest="group", required=True)
    subs = {}
    for group, action in COMMANDS:
        if group not in subs:
            subs[group] = groups.add_parser(group).add_subparsers(dest="action", required=True)
        sp = subs[group].add_parser(action)
        sp.add_argument("--config", required=True, help="INI-style config file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="overrides [global] seed")
        sp.add_argument("--threads", type=int, default=None, help="FFT worker threads")
        sp.add_argument("--log-level", default="WARNING")
    return p


def _cleanup(ctx, created_dir):
    for p in ctx.outputs:
        if p.exists():
            p.unlink()
    if created_dir and ctx.out.exists():
        shutil.rmtree(ctx.out, ignore_errors=True)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    ctx = None
    created = False
    try:
        cfg = Config.load(args.config)
        ctx = Context(args, cfg)
        created = not ctx.out.exists()
        ctx.out.mkdir(parents=True, exist_ok=True)
        started = io.now()
        COMMANDS[(args.group, args.action)](ctx)
        io.write_manifest(ctx.out, f"{args.group} {args.action}", ctx.config_snapshot(), ctx.inputs,
                          ctx.outputs, started)
        return EXIT_OK
    except MissingInputError as exc:
        code, msg = EXIT_MISSING, str(exc)
    except (ConfigError, DataFormatError) as exc:
        code, msg = EXIT_CONFIG, str(exc)
    except BlowUpError as exc:
        code, msg = EXIT_NUMERIC, f"blow-up at step {exc.step}: {exc}"
    except (DomainError, FiltnoiseError, FloatingPointError) as exc:
        code, msg = EXIT_NUMERIC, str(exc)
    if ctx is not None:
        _cleanup(ctx, created)
    print(f"filtnoise: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
