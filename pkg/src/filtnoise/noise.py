"""Sample paths of filtered white noise and checks of the white-noise limit.

The process is ``xi_t = int theta((t - s) / tau) / sqrt(tau) dW_s``. On a
uniform grid this becomes a discrete convolution of iid normals with the
sampled kernel, evaluated with an FFT.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.integrate import cumulative_trapezoid
from scipy.signal import fftconvolve

from .errors import DomainError
from .kernels import Kernel


@dataclass(frozen=True)
class FilteredNoiseSpec:
    kernel: Kernel
    tau: float
    dt: float
    horizon: float
    seed: int

    def __post_init__(self):
        for name in ("tau", "dt", "horizon"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating)) and math.isfinite(v)):
                raise DomainError(f"{name} must be finite, got {v!r}")
        if self.tau <= 0 or self.dt <= 0:
            raise DomainError("tau and dt must be positive")
        if self.dt > self.tau:
            raise DomainError(f"dt={self.dt} exceeds tau={self.tau}; the path would alias")
        if self.horizon < self.dt:
            raise DomainError("horizon must be at least one step")
        if self.dt > self.tau / 10:
            warnings.warn(
                f"dt={self.dt} > tau/10; discretisation bias may be visible", RuntimeWarning, stacklevel=3
            )

    @property
    def n_samples(self):
        return int(round(self.horizon / self.dt)) + 1


@dataclass(frozen=True)
class SamplePath:
    times: np.ndarray
    values: np.ndarray
    spec: FilteredNoiseSpec | None = None

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def __len__(self):
        return len(self.values)


def filter_weights(kernel: Kernel, tau, dt):
    """Convolution weights ``sqrt(dt/tau) theta(m dt / tau)`` for ``|m| <= K``.

    Rescaled by one scalar so that ``sum w^2 = 1`` (unit discrete variance).
    A singular kernel value at the origin is replaced by its cell average.
    """
    half = int(math.ceil(kernel.support_radius * tau / dt))
    m = np.arange(-half, half + 1)
    x = m * dt / tau
    w = np.empty(len(m))
    nz = m != 0
    w[nz] = kernel.evaluate(x[nz])
    centre = float(kernel.evaluate(np.array(0.0)))
    if not math.isfinite(centre):
        h = 0.5 * dt / tau
        centre = integrate.quad(lambda s: float(kernel.evaluate(np.array(s))), 0.0, h, limit=200)[0] / h
    w[half] = centre
    w *= math.sqrt(dt / tau)
    return w / math.sqrt(np.sum(w * w))


def driving_normals(spec: FilteredNoiseSpec, n_paths=None):
    """Standard normals on the extended driving grid, from ``spec.seed``.

    Column ``j`` drives the increment on ``[s_j, s_j + dt)`` with
    ``s_j = (j - K) dt``.
    """
    half = int(math.ceil(spec.kernel.support_radius * spec.tau / spec.dt))
    rng = np.random.default_rng(spec.seed)
    shape = (spec.n_samples + 2 * half,) if n_paths is None else (n_paths, spec.n_samples + 2 * half)
    return rng.standard_normal(shape), half


def filter_normals(eta, weights):
    """Apply the kernel weights along the last axis ('valid' convolution)."""
    w = weights if eta.ndim == 1 else weights[None, :]
    return fftconvolve(eta, w, mode="valid", axes=-1)


def simulate_path(spec: FilteredNoiseSpec) -> SamplePath:
    """One realization of the filtered noise on ``t_i = i dt``, ``0 <= t_i <= T``."""
    eta, _ = driving_normals(spec)
    w = filter_weights(spec.kernel, spec.tau, spec.dt)
    values = filter_normals(eta, w)
    times = np.arange(spec.n_samples) * spec.dt
    return SamplePath(times, values, spec)


def simulate_paths(kernel: Kernel, tau, dt, horizon, seeds):
    """Independent paths for each seed, stacked as ``(len(seeds), n_samples)``.

    Row ``i`` equals ``simulate_path`` with ``seeds[i]``.
    """
    specs = [FilteredNoiseSpec(kernel, tau, dt, horizon, int(s)) for s in seeds]
    if not specs:
        return np.arange(0), np.zeros((0, 0))
    w = filter_weights(kernel, tau, dt)
    etas = np.stack([driving_normals(s)[0] for s in specs])
    times = np.arange(specs[0].n_samples) * dt
    return times, filter_normals(etas, w)


def empirical_autocovariance(path: SamplePath, max_lag: int):
    """Biased (1/N), mean-removed autocovariance at lags ``0..max_lag`` (in samples).

    Returns an array of shape ``(max_lag + 1, 2)`` with columns ``(lag, value)``.
    """
    x = np.asarray(path.values, dtype=np.float64)
    n = len(x)
    if max_lag < 0 or max_lag >= n / 2:
        raise DomainError(f"max_lag={max_lag} must be < len(path)/2 = {n / 2}")
    acov = _acov(x, max_lag)
    return np.column_stack([np.arange(max_lag + 1), acov])


def _acov(x, max_lag):
    x = x - x.mean()
    n = len(x)
    nfft = 1 << int(math.ceil(math.log2(2 * n - 1)))
    f = np.fft.rfft(x, nfft)
    full = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1]
    return full / n


def integrated_path(path: SamplePath) -> SamplePath:
    """``I(t) = int_0^t xi_s ds`` by the cumulative trapezoid rule."""
    vals = cumulative_trapezoid(path.values, path.times, initial=0.0)
    return SamplePath(path.times, vals, path.spec)


@dataclass(frozen=True)
class GapResult:
    """RMS distance between ``int_0^t xi`` and ``sqrt(tau) W_t`` and its bound."""

    rms_gap: float
    bound: float
    probe_times: np.ndarray
    probe_rms: np.ndarray

    def __iter__(self):
        return iter((self.rms_gap, self.bound))


def white_noise_gap(spec: FilteredNoiseSpec, n_realizations: int, n_probes: int = 10) -> GapResult:
    """Couple ``xi`` and ``sqrt(tau) W`` through the same normals and measure their gap.

    ``W_t`` is the cumulative sum of the driving increments on ``[0, t)``.
    The bound ``sqrt(2 M) tau`` holds at every ``t``.
    """
    if n_realizations < 100:
        raise DomainError("n_realizations must be >= 100")
    seeds = np.random.SeedSequence(spec.seed).generate_state(n_realizations, dtype=np.uint64)
    w = filter_weights(spec.kernel, spec.tau, spec.dt)
    n = spec.n_samples
    times = np.arange(n) * spec.dt
    probe_idx = np.unique(np.linspace(0, n - 1, n_probes + 2).round().astype(int)[1:])

    sq = np.zeros(len(probe_idx))
    batch = 100
    for start in range(0, n_realizations, batch):
        chunk = seeds[start:start + batch]
        etas = []
        for s in chunk:
            eta, half = driving_normals(FilteredNoiseSpec(spec.kernel, spec.tau, spec.dt, spec.horizon, int(s)))
            etas.append(eta)
        eta = np.stack(etas)
        xi = filter_normals(eta, w)
        integral = cumulative_trapezoid(xi, dx=spec.dt, axis=1, initial=0.0)
        # increments on [t_j, t_j + dt) for j = 0..n-2 drive W on [0, t_i)
        incr = eta[:, half:half + n - 1] * math.sqrt(spec.dt)
        brownian = np.concatenate([np.zeros((len(chunk), 1)), np.cumsum(incr, axis=1)], axis=1)
        gap = integral[:, probe_idx] - math.sqrt(spec.tau) * brownian[:, probe_idx]
        sq += np.sum(gap * gap, axis=0)
    probe_rms = np.sqrt(sq / n_realizations)
    bound = math.sqrt(2.0 * spec.kernel.first_abs_moment) * spec.tau
    return GapResult(float(probe_rms[-1]), bound, times[probe_idx], probe_rms)
