"""Desk-scale end-to-end experiment: DNS, mode statistics, model calibration and dispersion.

One forced run is spun up, the most energetic shell is read off the spectrum,
and a collection phase records Fourier-mode series and DNS tracer dispersion.
The measured shell energy and relaxation time then calibrate the synthetic
field, whose dispersion is compared with the DNS tracers.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import diagnostics as dg
from . import nse2d, synthfield, transport
from .errors import IntegrationIncompleteError
from .kernels import kernel_from_name

log = logging.getLogger(__name__)

DEFAULT_MODES = ((3, 4), (6, 8), (9, 12), (12, 16), (15, 20), (18, 24), (32, 0), (30, 30))


@dataclass
class DeskConfig:
    N: int = 256
    nu: float = 2e-4
    alpha: float = 0.5
    dt: float = 2e-3
    k_f: float = 32
    bandwidth: int = 1
    epsilon: float = 1.0
    seed: int = 2024
    threads: int = 1
    spinup: float | None = None  # default 20 / alpha
    collect: float = 240.0
    sample_every: int = 5
    modes: tuple = DEFAULT_MODES
    forced_mode: tuple = (32, 0)
    shell_half_width: int = 1
    n_shell_modes: int = 8
    spectrum_every: float = 1.0
    tracers: int = 2500
    releases: int = 4
    tracer_substep: int = 2
    kernel: str = "gaussian"
    model_tracers: int = 10000
    model_realizations: int = 100
    model_steps_per_tau: int = 100

    @property
    def spinup_time(self):
        return self.spinup if self.spinup is not None else 20.0 / self.alpha

    def solver_config(self):
        return nse2d.SolverConfig(
            self.N, self.nu, self.alpha, self.dt,
            nse2d.ForcingSpec(self.k_f, self.bandwidth, self.epsilon),
            self.seed, "rk3", self.threads,
        )


@dataclass
class ModeStats:
    mode: tuple
    modulus: float
    slope: float
    tau: float
    truncation_lag: float
    complete: bool


@dataclass
class DeskResult:
    config: DeskConfig
    mode_stats: list
    max_corr: float
    spectrum: np.ndarray
    k_max: int
    E_shell: float
    tau_shell: float
    shell_taus: list
    stationarity: float
    dns_curve: transport.DispersionCurve
    model_curve: transport.DispersionCurve
    series: list = field(repr=False, default_factory=list)
    timings: dict = field(default_factory=dict)

    def summary(self):
        return {
            "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.config).items()},
            "modes": [asdict(m) for m in self.mode_stats],
            "max_corr": self.max_corr,
            "k_max": self.k_max,
            "E_shell": self.E_shell,
            "tau_shell": self.tau_shell,
            "stationarity": self.stationarity,
            "timings": self.timings,
        }


def mode_statistics(series, max_lag=None) -> ModeStats:
    """Initial V slope and relaxation time of one mode series.

    ``max_lag`` defaults to the longest lag the estimator accepts (a tenth of the record).
    """
    n = len(series.samples)
    if max_lag is None:
        max_lag = (n // 10) * series.dt_sample
    est = dg.with_bartlett(dg.autocorrelation(series, max_lag))
    try:
        r = dg.relaxation_time(est)
        tau, lag, ok = r.tau, r.truncation_lag, True
    except IntegrationIncompleteError as exc:
        tau, lag, ok = exc.partial, float(est.lags[-1]), False
    return ModeStats(tuple(series.mode), float(np.hypot(*series.mode)), dg.initial_slope(est), tau, lag, ok)


def shell_sample_modes(k_max, n, N):
    """``n`` wavevectors spread in angle over the half plane with ``rint|k| = k_max``."""
    kv = synthfield.ShellSpec(k_max, 0).wavevectors()
    kv = kv[(3 * np.abs(kv) < N).all(axis=1)]
    ang = np.arctan2(kv[:, 1], kv[:, 0])
    order = np.argsort(ang)
    pick = order[np.linspace(0, len(order) - 1, min(n, len(order))).round().astype(int)]
    return [tuple(int(v) for v in kv[i]) for i in pick]


def _peak(spec):
    return int(spec[np.argmax(spec[:, 1]), 0])


def run_desk(cfg: DeskConfig) -> DeskResult:
    timings = {}
    sc = cfg.solver_config()
    solver = nse2d.Solver(sc)
    state = nse2d.zeros(cfg.N)

    t0 = time.perf_counter()
    spin_steps = int(round(cfg.spinup_time / cfg.dt))
    spec_every = max(1, int(round(cfg.spectrum_every / cfg.dt)))
    # shell choice from the spectrum averaged over the last quarter of the spin-up
    spin_specs = []
    for n in range(1, spin_steps + 1):
        state = solver.step(state)
        if n > 0.75 * spin_steps and n % spec_every == 0:
            spin_specs.append(nse2d.energy_spectrum(state))
    k_max = _peak(np.mean(spin_specs, axis=0)) if spin_specs else _peak(nse2d.energy_spectrum(state))
    timings["spinup"] = time.perf_counter() - t0
    log.info("spin-up done at t=%.1f, E=%.4g, k_max=%d", state.t, nse2d.energy(state), k_max)

    shell_modes = shell_sample_modes(k_max, cfg.n_shell_modes, cfg.N)
    modes = list(cfg.modes) + [m for m in shell_modes if m not in cfg.modes]
    n_collect = int(round(cfg.collect / cfg.dt))
    tracer_dt = cfg.tracer_substep * cfg.dt
    duration = cfg.collect / cfg.releases
    tracers = transport.DNSTracers(
        cfg.tracers, cfg.tracer_substep, duration - tracer_dt, cfg.dt, cfg.releases, duration, cfg.seed + 1
    )
    specs = []

    def callback(slv, st):
        tracers(slv, st)
        if slv.steps_taken % spec_every == 0:
            specs.append(nse2d.energy_spectrum(st))

    t0 = time.perf_counter()
    res = nse2d.run(
        sc, state, n_collect, modes, cfg.sample_every, 0, energy_every=spec_every, solver=solver, callback=callback
    )
    timings["collect"] = time.perf_counter() - t0

    spectrum = np.mean(specs, axis=0)
    shell = synthfield.ShellSpec(k_max, cfg.shell_half_width)
    E_shell = synthfield.shell_energy_from_spectrum(spectrum, shell)
    by_mode = {s.mode: s for s in res.series}
    stats = [mode_statistics(by_mode[tuple(m)]) for m in cfg.modes]
    shell_stats = [mode_statistics(by_mode[m]) for m in shell_modes]
    tau_shell = float(np.mean([s.tau for s in shell_stats]))
    cc = dg.cross_correlation([by_mode[tuple(m)] for m in cfg.modes])
    dns_curve = tracers.curve()

    t0 = time.perf_counter()
    model = synthfield.build_umax(E_shell, shell, kernel_from_name(cfg.kernel), tau_shell, cfg.seed + 2)
    mdt = tau_shell / cfg.model_steps_per_tau
    model_curve = transport.advect(
        model, cfg.model_tracers, mdt, dns_curve.times[-1], cfg.seed + 3, cfg.model_realizations
    )
    timings["model"] = time.perf_counter() - t0

    return DeskResult(
        cfg, stats, cc.max_offdiag, spectrum, k_max, E_shell, tau_shell,
        [asdict(s) for s in shell_stats],
        nse2d.stationarity_statistic(res.energy_times, res.energies),
        dns_curve, model_curve, res.series, timings,
    )


def compare_dispersion(result: DeskResult):
    """Regime slopes of both curves and the ratio of their diffusive growth rates."""
    tau = result.tau_shell
    dns = transport.regime_check(result.dns_curve, tau)
    model = transport.regime_check(result.model_curve, tau)
    t_end = min(result.dns_curve.times[-1], result.model_curve.times[-1], 50 * tau)
    rate_dns = transport.diffusive_rate(result.dns_curve, 5 * tau, t_end)
    rate_model = transport.diffusive_rate(result.model_curve, 5 * tau, t_end)
    return {
        "tau": tau,
        "dns": dns,
        "model": model,
        "rate_dns": rate_dns,
        "rate_model": rate_model,
        "rate_ratio": rate_dns / rate_model,
        "predicted_rate": tau * result.E_shell / 2.0,
        "span_ok": math.isfinite(tau),
    }
