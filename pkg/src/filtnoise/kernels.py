"""Admissible filtering kernels and their self-convolution covariances.

A kernel ``theta`` is a nonnegative, even function with unit L1 and L2 norms
and a finite first absolute moment ``M``. The covariance of the filtered
process is ``C = theta * theta`` (evaluated at lags measured in units of the
relaxation time), which satisfies ``C(0) = 1`` and ``int_0^inf C = 1/2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache, partial
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special
from scipy.interpolate import CubicSpline

from .errors import DomainError, KernelValidationError

GAUSSIAN_SUPPORT = math.sqrt(16.0 * math.log(10.0) / (2.0 * math.pi))
TAIL_MASS = 1e-10
NUMERIC_STEP = 1e-3

_QUAD = dict(epsabs=1e-13, epsrel=1e-12, limit=400)


@dataclass(frozen=True)
class CovarianceFunction:
    """Even covariance ``C(u)`` with ``u`` in units of the relaxation time."""

    func: Callable[[np.ndarray], np.ndarray]
    form: str
    support: float

    def evaluate(self, u):
        u = np.abs(np.asarray(u, dtype=np.float64))
        return self.func(u)

    __call__ = evaluate


@dataclass(frozen=True)
class Kernel:
    """A mollifier ``theta`` with its covariance and first absolute moment."""

    label: str
    density: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    first_abs_moment: float
    covariance: CovarianceFunction
    beta: float | None = None
    singular_at_zero: bool = False
    breakpoints: tuple = field(default=(0.0,))

    def evaluate(self, x):
        return self.density(np.asarray(x, dtype=np.float64))

    __call__ = evaluate


@dataclass(frozen=True)
class MaternParams:
    beta: float
    gamma_beta: float

    @classmethod
    def from_beta(cls, beta):
        return cls(beta=beta, gamma_beta=matern_gamma(beta))


@dataclass
class ValidationReport:
    entries: list

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float


# --- Gaussian ---------------------------------------------------------------

def _gaussian_density(x):
    return math.sqrt(2.0) * np.exp(-2.0 * math.pi * x * x)


def _gaussian_cov(u):
    return np.exp(-math.pi * u * u)


def gaussian_kernel() -> Kernel:
    """``theta(x) = sqrt(2) exp(-2 pi x^2)`` with ``C(u) = exp(-pi u^2)``."""
    cov = CovarianceFunction(_gaussian_cov, "analytic", 2.0 * GAUSSIAN_SUPPORT)
    return Kernel(
        label="gaussian",
        density=_gaussian_density,
        support_radius=GAUSSIAN_SUPPORT,
        first_abs_moment=math.sqrt(2.0) / (2.0 * math.pi),
        covariance=cov,
        beta=math.inf,
    )


# --- Matern -----------------------------------------------------------------

def matern_gamma(beta):
    """Scale ``gamma_beta = 2^(2b+1) G(b+1/2) G(b+1) / G(2b+1/2)``."""
    return math.exp(
        (2 * beta + 1) * math.log(2.0)
        + special.gammaln(beta + 0.5)
        + special.gammaln(beta + 1.0)
        - special.gammaln(2 * beta + 0.5)
    )


def zk(nu, z):
    """``z^nu K_nu(z)`` for ``z > 0``, stable for large ``nu`` and small ``z``.

    Uses the exponentially scaled Bessel function in log space; where that
    overflows (tiny ``z``) the two-term small-argument series is used.
    """
    if np.ndim(z) == 0:
        return np.float64(_zk_scalar(nu, float(z)))
    z = np.asarray(z, dtype=np.float64)
    out = np.zeros_like(z)
    pos = z > 0
    zp = z[pos]
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        kve = special.kve(nu, zp)
        vals = np.exp(nu * np.log(zp) + np.log(kve) - zp)
    bad = ~np.isfinite(vals)
    if np.any(bad) and nu > 0:
        zb = zp[bad]
        lead = math.exp((nu - 1) * math.log(2.0) + special.gammaln(nu))
        # next term is O(z^2) for nu > 1 and O(z^(2 nu)) otherwise, negligible where kve overflows
        vals[bad] = lead * (1.0 - zb * zb / (4.0 * (nu - 1.0))) if nu > 1 else lead
    out[pos] = vals
    if np.any(~pos):
        out[~pos] = math.exp((nu - 1) * math.log(2.0) + special.gammaln(nu)) if nu > 0 else np.inf
    return out


def _zk_scalar(nu, z):
    # same branches as zk without the array overhead (quadrature calls this per point)
    if z <= 0:
        return math.exp((nu - 1) * math.log(2.0) + special.gammaln(nu)) if nu > 0 else math.inf
    kve = float(special.kve(nu, z))
    if 0 < kve < math.inf:
        val = math.exp(nu * math.log(z) + math.log(kve) - z)
        if val < math.inf:
            return val
    if nu > 0:
        lead = math.exp((nu - 1) * math.log(2.0) + special.gammaln(nu))
        return lead * (1.0 - z * z / (4.0 * (nu - 1.0))) if nu > 1 else lead
    return math.nan


def _matern_log_prefactor(beta):
    return (
        (beta + 1) * math.log(2.0)
        - 0.5 * math.log(math.pi)
        + special.gammaln(beta + 1.0)
        - special.gammaln(2 * beta + 0.5)
    )


def _matern_density(x, beta, gamma, pref):
    z = gamma * np.abs(x)
    return pref * zk(beta, z)


def _matern_cov(u, nu, gamma, pref):
    return pref * zk(nu, gamma * u)


def _tail_radius(density, gamma, mass=TAIL_MASS):
    def tail(x):
        val, _ = integrate.quad(lambda s: float(density(np.array(s))), x, np.inf, limit=200)
        return 2.0 * val

    hi = 1.0 / gamma
    while tail(hi) > mass:
        hi *= 1.5
    lo = hi / 1.5
    return optimize.brentq(lambda x: math.log(tail(x)) - math.log(mass), lo, hi, xtol=1e-10)


def matern_kernel(beta) -> Kernel:
    """Matern-type kernel of smoothness ``beta``; ``beta = inf`` is the Gaussian kernel.

    ``beta = 0`` gives ``C(u) = exp(-2|u|)``; the kernel itself has a
    logarithmic singularity at the origin.
    """
    if isinstance(beta, str):
        if beta.lower() not in ("inf", "infinity"):
            raise DomainError(f"unknown beta {beta!r}")
        beta = math.inf
    beta = float(beta)
    if math.isnan(beta) or beta < 0:
        raise DomainError(f"beta must be >= 0, got {beta}")
    if math.isinf(beta):
        return gaussian_kernel()
    return _matern(beta)


@lru_cache(maxsize=64)
def _matern(beta):
    gamma = matern_gamma(beta)
    pref = math.exp(_matern_log_prefactor(beta))
    density = partial(_matern_density, beta=beta, gamma=gamma, pref=pref)

    nu = 2 * beta + 0.5
    cov_pref = math.exp(
        0.5 * math.log(2.0 / math.pi)
        + special.gammaln(beta + 0.5)
        + special.gammaln(beta + 1.0)
        - special.gammaln(2 * beta + 0.5)
        - special.gammaln(2 * beta + 1.0)
    )
    # int_0^inf x (g x)^b K_b(g x) dx = 2^b G(b+1) / g^2
    moment = 2.0 * pref * math.exp(beta * math.log(2.0) + special.gammaln(beta + 1.0)) / gamma**2

    radius = _tail_radius(density, gamma)
    cov = CovarianceFunction(
        partial(_matern_cov, nu=nu, gamma=gamma, pref=cov_pref), "analytic", 2.0 * radius
    )
    return Kernel(
        label=f"matern:{beta:g}",
        density=density,
        support_radius=radius,
        first_abs_moment=moment,
        covariance=cov,
        beta=beta,
        singular_at_zero=(beta == 0),
    )


# --- numeric self-convolution ----------------------------------------------

def _quad_pieces(f, a, b, points):
    cuts = sorted({a, b, *[p for p in points if a < p < b]})
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, _ = integrate.quad(f, lo, hi, **_QUAD)
        total += val
    return total


def self_convolution(kernel: Kernel, u):
    """``(theta * theta)(u)`` by adaptive quadrature, one integral per lag.

    Independent of the closed-form covariances; used to check them.
    """
    u_arr = np.atleast_1d(np.abs(np.asarray(u, dtype=np.float64)))
    r = kernel.support_radius
    out = np.empty_like(u_arr)

    def theta(x):
        return float(kernel.evaluate(np.array(x)))

    bps = tuple(kernel.breakpoints)
    for i, ui in enumerate(u_arr):
        if ui >= 2 * r:
            out[i] = 0.0
            continue
        pts = list(bps) + [ui + b for b in bps]
        out[i] = _quad_pieces(lambda s: theta(ui - s) * theta(s), ui - r, r, pts)
    return out if np.ndim(u) else out[0]


def numeric_covariance(density, support, step=NUMERIC_STEP) -> CovarianceFunction:
    """Covariance from a midpoint-sampled discrete autocorrelation of ``density``.

    Lags are multiples of ``step``; values between lags use a cubic spline.
    """
    from scipy.signal import fftconvolve

    j = int(math.ceil(support / step))
    x = (np.arange(-j, j) + 0.5) * step
    vals = np.asarray(density(x), dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise KernelValidationError("density is not finite on the sampling grid")
    corr = fftconvolve(vals, vals[::-1]) * step
    centre = len(vals) - 1
    c = corr[centre:]
    lags = np.arange(len(c)) * step
    spline = CubicSpline(lags, c, bc_type=((1, 0.0), "not-a-knot"))
    upper = lags[-1]

    def func(u):
        out = np.where(u <= upper, spline(np.minimum(u, upper)), 0.0)
        return out

    return CovarianceFunction(func, "numeric-self-convolution", upper)


# --- custom densities -------------------------------------------------------

def _rescaled(density, a):
    def theta(x):
        return density(np.asarray(x) / a) / a

    return theta


def kernel_from_density(density, support, label="custom", step=NUMERIC_STEP) -> Kernel:
    """Rescale a symmetric probability density to unit L2 norm.

    ``theta(x) = density(x / A) / A`` with ``A = int density^2``.

    Raises
    ------
    KernelValidationError
        If the density is negative, not even, or does not integrate to one
        (to 1e-4) over ``[-support, support]``.
    """
    support = float(support)
    if not support > 0:
        raise DomainError("support must be positive")

    def f(s):
        return float(np.asarray(density(np.array(s))))

    probe = np.linspace(0.0, support, 2001)
    pos = np.asarray(density(probe), dtype=np.float64)
    neg = np.asarray(density(-probe), dtype=np.float64)
    scale = max(np.max(np.abs(pos)), 1e-300)
    if np.any(pos < 0) or np.any(neg < 0):
        raise KernelValidationError("density takes negative values")
    if np.max(np.abs(pos - neg)) > 1e-4 * scale:
        raise KernelValidationError("density is not even")
    mass = 2.0 * integrate.quad(f, 0.0, support, limit=400)[0]
    if abs(mass - 1.0) > 1e-4:
        raise KernelValidationError(f"density integrates to {mass:.6g}, expected 1")
    a = 2.0 * integrate.quad(lambda s: f(s) ** 2, 0.0, support, limit=400)[0]

    theta = _rescaled(density, a)
    radius = a * support
    moment = 2.0 * integrate.quad(lambda s: s * float(theta(s)), 0.0, radius, limit=400)[0]
    cov = numeric_covariance(theta, radius, step=step)
    return Kernel(
        label=label,
        density=theta,
        support_radius=radius,
        first_abs_moment=moment,
        covariance=cov,
    )


def load_density_csv(path):
    """Read a two-column ``x, density`` CSV into a linear interpolant and its support."""
    path = Path(path)
    xs, ys = [], []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#"):
                continue
            try:
                xs.append(float(row[0]))
                ys.append(float(row[1]))
            except (ValueError, IndexError):
                if lineno == 1:
                    continue  # header
                raise KernelValidationError(f"{path}:{lineno}: cannot parse {row!r}") from None
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    order = np.argsort(xs)
    xs, ys = xs[order], ys[order]

    def density(x):
        return np.interp(x, xs, ys, left=0.0, right=0.0)

    return density, float(np.max(np.abs(xs)))


def kernel_from_name(name: str) -> Kernel:
    """Parse ``gaussian``, ``matern:<beta>`` (``matern:inf`` allowed) or ``custom:<path>``."""
    name = name.strip()
    if name == "gaussian":
        return gaussian_kernel()
    if name.startswith("matern:"):
        arg = name.split(":", 1)[1]
        try:
            beta = float(arg)
        except ValueError:
            raise DomainError(f"bad Matern smoothness {arg!r}") from None
        return matern_kernel(beta)
    if name.startswith("custom:"):
        path = name.split(":", 1)[1]
        density, support = load_density_csv(path)
        return kernel_from_density(density, support, label=name)
    raise DomainError(f"unknown kernel {name!r}")


# --- checks and integrals ---------------------------------------------------

def _norm_quad(kernel, power, weight=None):
    r = kernel.support_radius

    def f(s):
        v = float(kernel.evaluate(np.array(s))) ** power
        return v * abs(s) if weight == "abs" else v

    pts = [b for b in kernel.breakpoints if b > 0]
    return _quad_pieces(f, 0.0, r, pts) + _quad_pieces(f, -r, 0.0, [-p for p in pts])


def validate_kernel(k: Kernel, tol: float) -> ValidationReport:
    """Check nonnegativity, evenness, unit L1 and L2 norms and finite ``M``.

    Failures are reported, never raised.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    x = np.linspace(-k.support_radius, k.support_radius, 4001)
    x = x[x != 0.0] if k.singular_at_zero else x
    vals = k.evaluate(x)
    mirrored = k.evaluate(-x)
    neg = float(max(0.0, -np.min(vals)))
    asym = float(np.max(np.abs(vals - mirrored)))
    l1 = _norm_quad(k, 1)
    l2 = _norm_quad(k, 2)
    m = _norm_quad(k, 1, weight="abs")
    m_res = abs(m - k.first_abs_moment) / max(abs(m), 1e-300) if math.isfinite(m) else math.inf
    entries = [
        CheckResult("nonnegative", neg <= tol, neg),
        CheckResult("symmetric", asym <= max(tol, 1e-12), asym),
        CheckResult("l1_norm", abs(l1 - 1.0) <= tol, abs(l1 - 1.0)),
        CheckResult("l2_norm", abs(l2 - 1.0) <= tol, abs(l2 - 1.0)),
        CheckResult("first_moment", math.isfinite(m) and m_res <= tol, m_res),
    ]
    return ValidationReport(entries)


def gamma_integral(c: CovarianceFunction, s):
    """``Gamma(s) = int_0^s C(r) dr``; tends to 1/2 as ``s`` grows."""
    s = float(s)
    if math.isnan(s) or s < 0:
        raise DomainError(f"lag must be >= 0, got {s}")
    upper = min(s, c.support)
    if upper == 0.0:
        return 0.0
    val, _ = integrate.quad(lambda r: float(c.evaluate(r)), 0.0, upper, **_QUAD)
    return val


def gamma_antiderivative(c: CovarianceFunction, x):
    """``int_0^x Gamma(r) dr``, computed as ``int_0^x (x - s) C(s) ds``."""
    x = float(x)
    if math.isnan(x) or x < 0:
        raise DomainError(f"argument must be >= 0, got {x}")
    upper = min(x, c.support)
    if upper == 0.0:
        return 0.0
    val, _ = integrate.quad(lambda s: (x - s) * float(c.evaluate(s)), 0.0, upper, **_QUAD)
    return val
