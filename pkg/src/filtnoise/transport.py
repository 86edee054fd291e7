"""Passive-tracer dispersion in DNS and synthetic fields, and its closed-form predictions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nse2d
from .errors import BlowUpError, DomainError
from .kernels import CovarianceFunction, gamma_antiderivative
from .synthfield import SyntheticField, WhiteNoiseField

TWO_PI = 2.0 * math.pi


@dataclass
class TracerEnsemble:
    """Unwrapped tracer positions; velocity lookups wrap modulo ``2 pi``."""

    positions: np.ndarray
    dt: float
    seed: int = 0

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=np.float64, ndmin=2)
        if len(self.positions) < 1:
            raise DomainError("need at least one tracer")
        self.origin = self.positions.copy()

    @property
    def M(self):
        return len(self.positions)

    @property
    def displacement(self):
        return self.positions - self.origin

    def check(self, step):
        if not np.all(np.isfinite(self.positions)):
            raise BlowUpError(step, f"non-finite tracer position at step {step}")


def initial_positions(M, seed, mode="uniform"):
    if mode == "origin":
        return np.zeros((M, 2))
    if mode == "uniform":
        return np.random.default_rng(seed).uniform(0.0, TWO_PI, size=(M, 2))
    raise DomainError(f"unknown initial-position mode {mode!r}")


@dataclass(frozen=True)
class DispersionCurve:
    """Second moments of tracer displacement about the start point.

    ``variance`` is ``E[X_t^2]`` of the first component, ``var_total`` is
    ``E[|x(t) - x(0)|^2]``; ``var_y`` is kept for isotropy checks.
    """

    times: np.ndarray
    variance: np.ndarray
    stderr: np.ndarray
    var_total: np.ndarray
    var_y: np.ndarray | None = None
    stderr_y: np.ndarray | None = None

    def rows(self):
        return np.column_stack([self.times, self.variance, self.stderr, self.var_total])


class _Accumulator:
    """Per-block sums of squared displacements at the record times."""

    def __init__(self, n_times, n_blocks):
        self.sx = np.zeros((n_blocks, n_times))
        self.sy = np.zeros((n_blocks, n_times))
        self.count = np.zeros(n_blocks)

    def add(self, block, k, disp):
        self.sx[block, k] += np.sum(disp[:, 0] ** 2)
        self.sy[block, k] += np.sum(disp[:, 1] ** 2)

    def curve(self, times):
        n = self.count[:, None]
        mx = self.sx / n
        my = self.sy / n
        b = len(n)
        vx = self.sx.sum(0) / n.sum()
        vy = self.sy.sum(0) / n.sum()
        if b > 1:
            ex = mx.std(axis=0, ddof=1) / math.sqrt(b)
            ey = my.std(axis=0, ddof=1) / math.sqrt(b)
        else:
            ex = np.zeros_like(vx)
            ey = np.zeros_like(vy)
        return DispersionCurve(np.asarray(times), vx, ex, vx + vy, vy, ey)


def _record_grid(n_steps, record_every):
    return np.arange(0, n_steps + 1, record_every)


@dataclass(frozen=True)
class ConstantField:
    """Spatially uniform, steady velocity ``u0``."""

    u0: tuple

    def velocity(self, points, t=0.0):
        return np.broadcast_to(np.asarray(self.u0, dtype=np.float64), np.shape(points)).copy()


def _ab2(ens, vel_fn, n_steps, record_every, acc, block):
    """Adams-Bashforth 2 with an explicit Euler first step."""
    dt = ens.dt
    k = 0
    acc.add(block, k, ens.displacement)
    prev = None
    for n in range(n_steps):
        u = vel_fn(ens.positions, n * dt)
        if prev is None:
            ens.positions += dt * u
        else:
            ens.positions += dt * (1.5 * u - 0.5 * prev)
        prev = u
        if (n + 1) % record_every == 0:
            ens.check(n + 1)
            k += 1
            acc.add(block, k, ens.displacement)


def advect(
    field,
    M: int,
    dt: float,
    T: float,
    seed: int,
    n_realizations: int = 1,
    record_every: int = 1,
    initial: str = "uniform",
) -> DispersionCurve:
    """Monte Carlo dispersion of ``M`` tracers in a synthetic, white-noise or constant field.

    Tracers are split evenly over ``n_realizations`` independent field
    realizations. Standard errors come from the spread of the realization
    means (or of tracer blocks when there is a single realization).
    """
    if M < 1 or n_realizations < 1 or M % n_realizations:
        raise DomainError("M must be a positive multiple of n_realizations")
    if not (dt > 0 and T >= dt):
        raise DomainError("need dt > 0 and T >= dt")
    n_steps = int(round(T / dt))
    times = _record_grid(n_steps, record_every) * dt
    per = M // n_realizations
    blocks = n_realizations if n_realizations > 1 else min(M, 20)
    acc = _Accumulator(len(times), blocks)
    seeds = np.random.SeedSequence(seed).generate_state(n_realizations, dtype=np.uint64)

    for r in range(n_realizations):
        pos = initial_positions(per, int(seeds[r]), initial)
        if n_realizations > 1:
            groups = [(r, slice(0, per))]
        else:
            edges = np.linspace(0, per, blocks + 1).astype(int)
            groups = [(b, slice(edges[b], edges[b + 1])) for b in range(blocks)]
        ens = TracerEnsemble(pos, dt, int(seeds[r]))
        if isinstance(field, WhiteNoiseField):
            rng = np.random.default_rng(np.random.SeedSequence([int(seeds[r]), 1]))
            _euler_maruyama(ens, field, rng, n_steps, record_every, acc, groups)
        else:
            if isinstance(field, SyntheticField):
                real = field.realize(dt, n_steps * dt, realization=int(seeds[r]))
                xi = real.xi

                def vel(p, t, _xi=xi, _dt=dt):
                    i = int(round(t / _dt))
                    return field.velocity(p, _xi[0, :, i], _xi[1, :, i])
            elif isinstance(field, ConstantField):
                vel = field.velocity
            else:
                raise DomainError(f"unsupported field type {type(field).__name__}")
            sub = _GroupAcc(acc, groups)
            _ab2(ens, vel, n_steps, record_every, sub, None)
        for b, sl in groups:
            acc.count[b] += sl.stop - sl.start
    return acc.curve(times)


class _GroupAcc:
    """Routes one ensemble's displacements to their accumulator blocks."""

    def __init__(self, acc, groups):
        self.acc = acc
        self.groups = groups

    def add(self, _block, k, disp):
        for b, sl in self.groups:
            self.acc.add(b, k, disp[sl])


def _euler_maruyama(ens, field: WhiteNoiseField, rng, n_steps, record_every, acc, groups):
    sub = _GroupAcc(acc, groups)
    k = 0
    sub.add(None, k, ens.displacement)
    for n in range(n_steps):
        ens.positions += field.displacement(ens.positions, rng, ens.dt)
        if (n + 1) % record_every == 0:
            ens.check(n + 1)
            k += 1
            sub.add(None, k, ens.displacement)


class DNSTracers:
    """Tracers advected by AB2 inside a running DNS; use as an ``nse2d.run`` callback.

    Tracers move every ``substep`` solver steps with ``dt = substep * solver.dt``
    using spline-interpolated velocity. Batches of ``M`` tracers are released at
    ``release_times`` and followed for ``duration``.
    """

    def __init__(self, M, substep, duration, solver_dt, releases=1, release_spacing=None, seed=0):
        self.M = int(M)
        self.substep = int(substep)
        self.dt = substep * solver_dt
        self.n_track = int(round(duration / self.dt))
        spacing = release_spacing if release_spacing is not None else duration
        self.release_steps = [int(round(i * spacing / self.dt)) for i in range(releases)]
        self.seeds = np.random.SeedSequence(seed).generate_state(releases, dtype=np.uint64)
        self.acc = _Accumulator(self.n_track + 1, releases)
        self.active = {}
        self.counter = 0
        self.n_solver = 0

    @property
    def total_tracer_steps(self):
        return self.release_steps[-1] + self.n_track

    def __call__(self, solver, state):
        self.n_solver += 1
        if self.n_solver % self.substep:
            return
        self.tick(state)

    def tick(self, state):
        n = self.counter
        for b, start in enumerate(self.release_steps):
            if start == n:
                ens = TracerEnsemble(initial_positions(self.M, int(self.seeds[b]), "uniform"), self.dt)
                self.active[b] = [ens, None, 0]
                self.acc.add(b, 0, ens.displacement)
                self.acc.count[b] = self.M
        if self.active:
            pts = np.concatenate([a[0].positions for a in self.active.values()])
            u_all = nse2d.velocity_at(state, pts, method="spline")
            off = 0
            for b in list(self.active):
                ens, prev, k = self.active[b]
                u = u_all[off:off + ens.M]
                off += ens.M
                ens.positions += self.dt * (u if prev is None else 1.5 * u - 0.5 * prev)
                k += 1
                ens.check(k)
                self.acc.add(b, k, ens.displacement)
                if k >= self.n_track:
                    del self.active[b]
                else:
                    self.active[b] = [ens, u, k]
        self.counter += 1

    @property
    def done(self):
        return self.counter > self.release_steps[-1] and not self.active

    def curve(self) -> DispersionCurve:
        return self.acc.curve(np.arange(self.n_track + 1) * self.dt)


@dataclass(frozen=True)
class VariancePrediction:
    covariance: CovarianceFunction
    tau: float
    E: float

    def __call__(self, t):
        return predict_variance(self, t)


def predict_variance(pred: VariancePrediction, t):
    """``tau^2 E int_0^{t/tau} Gamma(r) dr`` for a scalar or array ``t``."""
    ts = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(ts < 0) or np.any(~np.isfinite(ts)):
        raise DomainError("t must be finite and >= 0")
    out = np.array([gamma_antiderivative(pred.covariance, v / pred.tau) for v in ts])
    out *= pred.tau**2 * pred.E
    return out if np.ndim(t) else float(out[0])


@dataclass(frozen=True)
class RegimeReport:
    slope_short: float
    slope_long: float
    transition_estimate: float

    def __iter__(self):
        return iter((self.slope_short, self.slope_long, self.transition_estimate))


def _fit(t, v, lo, hi):
    sel = (t >= lo * (1 - 1e-9)) & (t <= hi * (1 + 1e-9)) & (v > 0)
    if sel.sum() < 2:
        raise DomainError(f"fewer than two samples in [{lo:.4g}, {hi:.4g}]")
    b, a = np.polyfit(np.log(t[sel]), np.log(v[sel]), 1)
    return float(b), float(a)


def regime_check(curve, tau) -> RegimeReport:
    """Log-log slopes over ``[tau/50, tau/5]`` and ``[5 tau, 50 tau]`` and the crossing time."""
    if isinstance(curve, DispersionCurve):
        t, v = np.asarray(curve.times), np.asarray(curve.variance)
    else:
        t, v = (np.asarray(a, dtype=np.float64) for a in curve)
    pos = t > 0
    if not pos.any() or t[pos].min() > tau / 50 * (1 + 1e-9) or t.max() < 50 * tau * (1 - 1e-9):
        raise DomainError(f"curve must span [{tau / 50:.4g}, {50 * tau:.4g}]")
    s1, a1 = _fit(t, v, tau / 50, tau / 5)
    s2, a2 = _fit(t, v, 5 * tau, 50 * tau)
    trans = math.exp((a2 - a1) / (s1 - s2)) if abs(s1 - s2) > 1e-9 else math.inf
    return RegimeReport(s1, s2, trans)


def effective_diffusivity(tau, E):
    """``(tau E / 4, tau E / 2)``: per-component diffusivity and variance growth rate."""
    if not (tau > 0 and E > 0):
        raise DomainError("tau and E must be positive")
    return {"diffusivity": tau * E / 4.0, "variance_slope": tau * E / 2.0}


def diffusive_rate(curve: DispersionCurve, t_lo, t_hi):
    """Least-squares slope of ``E[X^2]`` against ``t`` on ``[t_lo, t_hi]``."""
    t = np.asarray(curve.times)
    sel = (t >= t_lo) & (t <= t_hi)
    if sel.sum() < 2:
        raise DomainError("too few samples in the fit window")
    return float(np.polyfit(t[sel], curve.variance[sel], 1)[0])
