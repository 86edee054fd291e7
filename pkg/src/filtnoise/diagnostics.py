"""Mode statistics: autocorrelation, increment variance, relaxation time,
Bartlett bands, cross-correlation, Gaussianity and kernel-smoothness fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

from .errors import DomainError, FitUndefinedError, IntegrationIncompleteError
from .kernels import matern_kernel

BETA_GRID = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, math.inf)
FIT_THRESHOLD = 0.1


@dataclass(frozen=True)
class AutocorrEstimate:
    lags: np.ndarray
    values: np.ndarray
    n_samples: int
    ci_halfwidths: np.ndarray | None = None

    @property
    def dt(self):
        return float(self.lags[1] - self.lags[0])


@dataclass(frozen=True)
class RelaxationEstimate:
    tau: float
    truncation_lag: float
    rule: str = "bartlett-zero-band"


@dataclass(frozen=True)
class KernelFit:
    beta_star: float
    objective: float
    grid: tuple
    objectives: tuple = ()


@dataclass(frozen=True)
class CorrelationMatrix:
    values: np.ndarray
    degenerate: np.ndarray

    @property
    def max_offdiag(self):
        n = len(self.values)
        mask = ~np.eye(n, dtype=bool) & ~self.degenerate
        return float(np.max(np.abs(self.values[mask]))) if mask.any() else 0.0


def _series(series):
    """Return ``(values, dt)`` from a ModeSeries, SamplePath or ``(values, dt)`` pair."""
    if hasattr(series, "samples"):
        return np.asarray(series.samples, dtype=np.float64), float(series.dt_sample)
    if hasattr(series, "values") and hasattr(series, "times"):
        return np.asarray(series.values, dtype=np.float64), float(series.times[1] - series.times[0])
    values, dt = series
    return np.asarray(values, dtype=np.float64), float(dt)


def autocorrelation(series, max_lag) -> AutocorrEstimate:
    """Normalized, mean-removed, biased (1/N) sample autocorrelation up to lag ``max_lag`` (time units)."""
    x, dt = _series(series)
    n = len(x)
    n_lags = int(math.floor(max_lag / dt + 1e-9))
    if n < 10 * n_lags:
        raise DomainError(f"series of {n} samples too short for {n_lags} lags (need 10x)")
    x = x - x.mean()
    nfft = 1 << int(math.ceil(math.log2(2 * n - 1)))
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: n_lags + 1] / n
    if acov[0] <= 0:
        raise DomainError("series has zero variance")
    values = acov / acov[0]
    values[0] = 1.0
    return AutocorrEstimate(np.arange(n_lags + 1) * dt, values, n)


def from_covariance(cov, tau, dt, max_lag, n_samples) -> AutocorrEstimate:
    """An exact (noise-free) estimate ``R(D) = C(D / tau)``, with Bartlett bands for ``n_samples``."""
    lags = np.arange(int(round(max_lag / dt)) + 1) * dt
    est = AutocorrEstimate(lags, np.asarray(cov(lags / tau), dtype=np.float64), int(n_samples))
    return with_bartlett(est)


def increment_variance(est: AutocorrEstimate):
    """``V(D) = 1 - R(D)`` as an array of ``(lag, V)`` rows."""
    return np.column_stack([est.lags, 1.0 - est.values])


def loglog_slope(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        raise DomainError("need at least two positive points for a log-log fit")
    slope, _ = np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)
    return float(slope)


def initial_slope(est: AutocorrEstimate, n_lags=5):
    """Log-log slope of ``V`` over the first ``n_lags`` nonzero lags."""
    v = increment_variance(est)[1:n_lags + 1]
    return loglog_slope(v[:, 0], v[:, 1])


def bartlett_ci(est: AutocorrEstimate, level=0.95):
    """Half-widths ``z sqrt((1 + 2 sum_{j<n} R_j^2) / N)`` per lag (zero at lag 0)."""
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    z = stats.norm.ppf(0.5 * (1.0 + level))
    r2 = est.values**2
    # sum_{j=1}^{n-1} R_j^2 for n = 1, 2, ...
    partial = np.concatenate([[0.0], np.cumsum(r2[1:])[:-1]])
    hw = z * np.sqrt((1.0 + 2.0 * partial) / est.n_samples)
    hw = np.concatenate([[0.0], hw])[: len(est.values)]
    return hw


def with_bartlett(est: AutocorrEstimate, level=0.95) -> AutocorrEstimate:
    return replace(est, ci_halfwidths=bartlett_ci(est, level))


def relaxation_time(est: AutocorrEstimate, rule="bartlett-zero-band") -> RelaxationEstimate:
    """``tau = 2 int_0^D* R``, truncated where ``R`` first enters the Bartlett zero band.

    Raises
    ------
    IntegrationIncompleteError
        If ``R`` stays outside the band up to the last lag; carries the partial value.
    """
    if rule != "bartlett-zero-band":
        raise DomainError(f"unknown truncation rule {rule!r}")
    if est.ci_halfwidths is None:
        raise DomainError("estimate has no Bartlett half-widths; call with_bartlett first")
    inside = np.nonzero(np.abs(est.values[1:]) <= est.ci_halfwidths[1:])[0]
    if len(inside) == 0:
        partial = 2.0 * trapezoid(est.values, est.lags)
        raise IntegrationIncompleteError(partial)
    stop = inside[0] + 1
    tau = 2.0 * trapezoid(est.values[: stop + 1], est.lags[: stop + 1])
    return RelaxationEstimate(float(tau), float(est.lags[stop]), rule)


def fit_beta(est: AutocorrEstimate, tau: RelaxationEstimate, grid=BETA_GRID) -> KernelFit:
    """Pick the Matern smoothness whose covariance best matches ``R`` where ``R > 0.1``.

    Ties (within 1e-12 relative or 1e-20 absolute) go to the larger ``beta``.
    """
    grid = tuple(float(b) for b in grid)
    if not grid:
        raise DomainError("empty beta grid")
    t = tau.tau if isinstance(tau, RelaxationEstimate) else float(tau)
    sel = est.values > FIT_THRESHOLD
    if not sel.any():
        raise FitUndefinedError("no lags with R above the reliability threshold")
    u = est.lags[sel] / t
    r = est.values[sel]
    objectives = []
    for beta in grid:
        c = matern_kernel(beta).covariance(u)
        objectives.append(float(np.sum((r - c) ** 2)))
    best = None
    for beta, obj in sorted(zip(grid, objectives), key=lambda p: -p[0]):
        if best is None or obj < best[1] * (1 - 1e-12) - 1e-20:
            best = (beta, obj)
    return KernelFit(best[0], best[1], grid, tuple(objectives))


def cross_correlation(series_list) -> CorrelationMatrix:
    """Contemporaneous Pearson correlations; zero-variance series are flagged, not NaN."""
    data = [(_series(s)[0] if not isinstance(s, np.ndarray) else s) for s in series_list]
    lengths = {len(d) for d in data}
    if len(lengths) > 1:
        raise DomainError("series must have equal lengths")
    x = np.asarray(data, dtype=np.float64)
    mean = x.mean(axis=1, keepdims=True)
    x = x - mean
    norms = np.sqrt(np.sum(x * x, axis=1))
    zero = norms <= 1e-12 * np.sqrt(x.shape[1]) * np.maximum(1e-300, np.abs(mean[:, 0]))
    safe = np.where(zero, 1.0, norms)
    corr = (x @ x.T) / np.outer(safe, safe)
    degenerate = zero[:, None] | zero[None, :]
    corr[degenerate] = 0.0
    np.fill_diagonal(corr, 1.0)
    np.fill_diagonal(degenerate, False)
    return CorrelationMatrix(corr, degenerate)


@dataclass(frozen=True)
class GaussianityReport:
    skewness: float
    excess_kurtosis: float
    ks_statistic: float

    def __iter__(self):
        return iter((self.skewness, self.excess_kurtosis, self.ks_statistic))


def gaussianity_check(series) -> GaussianityReport:
    """Skewness, excess kurtosis and KS distance of the standardized series to N(0, 1)."""
    x = series if isinstance(series, np.ndarray) else _series(series)[0]
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 10_000:
        raise DomainError("need at least 1e4 samples")
    z = (x - x.mean()) / x.std()
    return GaussianityReport(
        float(stats.skew(z)),
        float(stats.kurtosis(z, fisher=True)),
        float(stats.kstest(z, "norm").statistic),
    )
