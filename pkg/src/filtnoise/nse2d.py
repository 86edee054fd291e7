"""Pseudo-spectral solver for stochastically forced 2D Navier-Stokes in vorticity form.

    d_t w + u . grad w + alpha w - nu lap w = d_t W      on [0, 2 pi)^2

Coefficients are stored in the real-FFT half layout, shape ``(N, N//2 + 1)``,
normalized so that ``w(x) = sum_k w_k exp(i k . x)``. Axis 0 carries ``k_x``
(signed, FFT order), axis 1 carries ``k_y >= 0``. Modes with ``3|k_x| >= N`` or
``3|k_y| >= N`` are kept at zero (2/3 rule).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from . import _backend
from .errors import BlowUpError, DomainError

log = logging.getLogger(__name__)

INTEGRATORS = ("rk3", "implicit-midpoint")


@dataclass(frozen=True)
class ForcingSpec:
    """White-in-time forcing on the ring ``k_f - bandwidth <= |k| <= k_f + bandwidth``.

    ``epsilon`` is the mean energy injection rate.
    """

    k_f: float
    bandwidth: int = 1
    epsilon: float = 1.0


@dataclass(frozen=True)
class SolverConfig:
    N: int
    nu: float
    alpha: float
    dt: float
    forcing: ForcingSpec | None = None
    seed: int = 0
    integrator: str = "rk3"
    threads: int = 1

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 8 or self.N % 4:
            raise DomainError(f"N must be a positive multiple of 4, got {self.N}")
        if self.nu < 0 or self.alpha < 0:
            raise DomainError("nu and alpha must be nonnegative")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError("dt must be positive")
        if self.integrator not in INTEGRATORS:
            raise DomainError(f"integrator must be one of {INTEGRATORS}")
        f = self.forcing
        if f is not None:
            if not (f.k_f - f.bandwidth > 0 and 3 * (f.k_f + f.bandwidth) < self.N):
                raise DomainError(
                    f"forcing ring [{f.k_f - f.bandwidth}, {f.k_f + f.bandwidth}] outside (0, N/3)"
                )
            if f.epsilon < 0:
                raise DomainError("epsilon must be nonnegative")


@dataclass(frozen=True)
class VorticityState:
    coeffs: np.ndarray
    N: int
    t: float = 0.0

    def full_coefficients(self):
        """The ``(N, N)`` coefficient array, ``full[kx % N, ky % N]``."""
        n = self.N
        full = np.zeros((n, n), dtype=complex)
        half = self.coeffs
        full[:, : n // 2 + 1] = half
        kx = np.arange(n)
        for ky in range(1, n // 2):
            full[:, n - ky] = np.conj(half[(-kx) % n, ky])
        return full

    def physical(self):
        return sfft.irfft2(self.coeffs, s=(self.N, self.N), norm="forward")


@dataclass(frozen=True)
class ModeSeries:
    mode: tuple
    samples: np.ndarray
    dt_sample: float

    @property
    def times(self):
        return np.arange(len(self.samples)) * self.dt_sample


class Grid:
    """Wavenumber arrays and masks for one resolution."""

    def __init__(self, n):
        self.N = n
        self.kx = (sfft.fftfreq(n) * n)[:, None]
        self.ky = np.arange(n // 2 + 1, dtype=np.float64)[None, :]
        self.k2 = self.kx**2 + self.ky**2
        self.inv_k2 = np.where(self.k2 > 0, 1.0 / np.where(self.k2 > 0, self.k2, 1.0), 0.0)
        self.dealias = (3 * np.abs(self.kx) < n) & (3 * self.ky < n)
        self.dealias[0, 0] = False
        # each ky > 0 column stands for two conjugate modes
        self.weight = np.where(self.ky > 0, 2.0, 1.0) * np.ones_like(self.k2)
        self.kmod = np.sqrt(self.k2)


@lru_cache(maxsize=8)
def grid(n) -> Grid:
    return Grid(n)


def zeros(n) -> VorticityState:
    return VorticityState(np.zeros((n, n // 2 + 1), dtype=complex), n, 0.0)


def from_physical(omega, t=0.0) -> VorticityState:
    """Project a real ``(N, N)`` field onto the dealiased, zero-mean band."""
    omega = np.asarray(omega, dtype=np.float64)
    n = omega.shape[0]
    coeffs = sfft.rfft2(omega, norm="forward")
    coeffs[~grid(n).dealias] = 0.0
    return VorticityState(coeffs, n, t)


def random_state(n, k_peak=4.0, seed=0, amplitude=1.0) -> VorticityState:
    """A smooth random field with a spectrum peaked near ``k_peak``."""
    rng = np.random.default_rng(seed)
    g = grid(n)
    noise = rng.standard_normal((n, n))
    coeffs = sfft.rfft2(noise, norm="forward")
    coeffs *= np.exp(-((g.kmod - k_peak) ** 2) / (2.0 * max(k_peak, 1.0)))
    coeffs[~g.dealias] = 0.0
    z = 0.5 * np.sum(g.weight * np.abs(coeffs) ** 2)
    if z > 0:
        coeffs *= amplitude / math.sqrt(z)
    return VorticityState(coeffs, n, 0.0)


# --- invariants ---------------------------------------------------------------

def energy(state: VorticityState) -> float:
    g = grid(state.N)
    return float(0.5 * np.sum(g.weight * np.abs(state.coeffs) ** 2 * g.inv_k2))


def enstrophy(state: VorticityState) -> float:
    g = grid(state.N)
    return float(0.5 * np.sum(g.weight * np.abs(state.coeffs) ** 2))


def energy_spectrum(state: VorticityState):
    """Shell-summed kinetic energy in unit bins centred on integers.

    Returns an array of ``(k, E_k)`` rows for ``k = 1 .. kmax``; ``sum E_k`` is
    the total kinetic energy ``<|u|^2> / 2``.
    """
    g = grid(state.N)
    e = 0.5 * g.weight * np.abs(state.coeffs) ** 2 * g.inv_k2
    bins = np.rint(g.kmod).astype(int)
    kmax = int(bins[g.dealias].max())
    spec = np.bincount(bins.ravel(), weights=e.ravel(), minlength=kmax + 1)[: kmax + 1]
    return np.column_stack([np.arange(1, kmax + 1), spec[1:]])


def check_invariants(state: VorticityState, tol=1e-12):
    """Raise ``AssertionError`` if symmetry, zero mean or dealiasing is violated."""
    g = grid(state.N)
    c = state.coeffs
    scale = max(float(np.max(np.abs(c))), 1e-300)
    assert abs(c[0, 0]) <= tol * scale, "nonzero mean"
    assert np.all(c[~g.dealias] == 0), "energy in the dealiased band"
    full = state.full_coefficients()
    n = state.N
    idx = (-np.arange(n)) % n
    mirror = np.conj(full[idx][:, idx])
    assert np.max(np.abs(full - mirror)) <= tol * scale, "Hermitian symmetry broken"


# --- dynamics -----------------------------------------------------------------

def _to_phys(arrs, n, threads):
    return sfft.irfft2(arrs, s=(n, n), axes=(-2, -1), norm="forward", workers=threads)


def nonlinear(coeffs, g: Grid, threads=1, return_umax=False):
    """Dealiased ``-(u . grad w)`` in spectral space."""
    psi = coeffs * g.inv_k2
    stack = np.stack([1j * g.ky * psi, -1j * g.kx * psi, 1j * g.kx * coeffs, 1j * g.ky * coeffs])
    u, v, wx, wy = _to_phys(stack, g.N, threads)
    adv = sfft.rfft2(u * wx + v * wy, norm="forward", workers=threads)
    adv[~g.dealias] = 0.0
    if return_umax:
        return -adv, float(np.sqrt(np.max(u * u + v * v)))
    return -adv


class Forcing:
    """Draws Hermitian-symmetric complex increments on the forced ring."""

    def __init__(self, spec: ForcingSpec, g: Grid):
        self.spec = spec
        ring = (g.kmod >= spec.k_f - spec.bandwidth) & (g.kmod <= spec.k_f + spec.bandwidth) & g.dealias
        indep = ring & ((g.ky > 0) | (g.kx > 0))
        self.idx = np.nonzero(indep)
        mirror = ring & (g.ky == 0) & (g.kx < 0)
        self.mirror_dst = np.nonzero(mirror)
        self.mirror_src = ((-g.kx[self.mirror_dst[0], 0]).astype(int) % g.N, self.mirror_dst[1])
        # sum over every forced wavevector of |k|^-2 (conjugates included)
        s = float(np.sum(g.weight[ring] * g.inv_k2[ring]))
        self.variance = 2.0 * spec.epsilon / s if s > 0 else 0.0
        self.n_modes = len(self.idx[0])
        self.shape = g.k2.shape

    def increment(self, rng, dt):
        z = rng.standard_normal((2, self.n_modes))
        amp = math.sqrt(0.5 * self.variance * dt)
        out = np.zeros(self.shape, dtype=complex)
        out[self.idx] = amp * (z[0] + 1j * z[1])
        out[self.mirror_dst] = np.conj(out[self.mirror_src])
        return out


@dataclass
class Solver:
    """Stateful time stepper; holds the grid, forcing and random stream of one run."""

    config: SolverConfig
    rng: np.random.Generator = field(default=None)

    def __post_init__(self):
        c = self.config
        self.grid = grid(c.N)
        self.lin = -(c.alpha + c.nu * self.grid.k2)
        self.forcing = Forcing(c.forcing, self.grid) if c.forcing and c.forcing.epsilon > 0 else None
        if self.rng is None:
            self.rng = np.random.default_rng(c.seed)
        self.steps_taken = 0
        self.umax = 0.0
        dt = c.dt
        self._e1 = np.exp(self.lin * dt)
        self._eh = np.exp(self.lin * dt / 2)
        self._ehm = np.exp(-self.lin * dt / 2)

    def _rk3(self, w):
        g, dt, th = self.grid, self.config.dt, self.config.threads
        n0, self.umax = nonlinear(w, g, th, return_umax=True)
        w1 = self._e1 * (w + dt * n0)
        w2 = 0.75 * self._eh * w + 0.25 * self._ehm * (w1 + dt * nonlinear(w1, g, th))
        return (self._e1 * w + 2.0 * self._eh * (w2 + dt * nonlinear(w2, g, th))) / 3.0

    def _midpoint(self, w, tol=1e-13, max_iter=200):
        g, dt, th = self.grid, self.config.dt, self.config.threads
        scale = max(float(np.max(np.abs(w))), 1e-300)
        new = w.copy()
        for _ in range(max_iter):
            mid = 0.5 * (w + new)
            nxt = w + dt * (nonlinear(mid, g, th) + self.lin * mid)
            delta = float(np.max(np.abs(nxt - new)))
            new = nxt
            if delta <= tol * scale:
                break
        self.umax = 0.0
        return new

    def step(self, state: VorticityState) -> VorticityState:
        c = self.config
        with np.errstate(over="ignore", invalid="ignore"):
            w = self._advance(state)
        if self.forcing is not None:
            w = w + self.forcing.increment(self.rng, c.dt)
        w[~self.grid.dealias] = 0.0
        self.steps_taken += 1
        if not np.all(np.isfinite(w)):
            raise BlowUpError(self.steps_taken)
        return VorticityState(w, state.N, state.t + c.dt)

    def _advance(self, state):
        c = self.config
        if c.integrator == "rk3":
            w = self._rk3(state.coeffs)
            cfl = self.umax * c.dt * c.N / (2 * math.pi)
            if cfl > 1.0:
                log.warning("CFL number %.2f > 1 at step %d", cfl, self.steps_taken)
        else:
            w = self._midpoint(state.coeffs)
        return w


def step(state: VorticityState, config: SolverConfig, rng=None) -> VorticityState:
    """Advance one time step; prefer :class:`Solver` for repeated stepping."""
    return Solver(config, rng).step(state)


def conservation_probe(state: VorticityState, config: SolverConfig, steps: int) -> float:
    """Relative enstrophy drift ``|Z(end) - Z(0)| / Z(0)`` of an unforced inviscid run."""
    if config.nu != 0 or config.alpha != 0:
        raise DomainError("conservation probe requires nu = alpha = 0")
    if config.forcing is not None and config.forcing.epsilon > 0:
        raise DomainError("conservation probe requires forcing to be disabled")
    z0 = enstrophy(state)
    solver = Solver(config)
    for _ in range(steps):
        state = solver.step(state)
    if z0 == 0:
        return 0.0
    return abs(enstrophy(state) - z0) / z0


# --- mode series and runs --------------------------------------------------------

def _mode_index(n, mode):
    kx, ky = int(mode[0]), int(mode[1])
    if (kx, ky) == (0, 0) or 3 * abs(kx) >= n or 3 * abs(ky) >= n:
        raise DomainError(f"mode {mode} outside the resolved band for N={n}")
    if ky < 0 or (ky == 0 and kx < 0):
        return (-kx) % n, -ky, True
    return kx % n, ky, False


def mode_value(state: VorticityState, mode) -> complex:
    i, j, conj = _mode_index(state.N, mode)
    v = state.coeffs[i, j]
    return complex(np.conj(v) if conj else v)


@dataclass
class RunResult:
    state: VorticityState
    series: list
    energy_times: np.ndarray
    energies: np.ndarray
    steps: int


def run(
    config: SolverConfig,
    state: VorticityState | None = None,
    n_steps: int = 0,
    modes=(),
    sample_every: int = 1,
    spinup_steps: int = 0,
    energy_every: int = 10,
    solver: Solver | None = None,
    callback=None,
) -> RunResult:
    """Spin up for ``spinup_steps`` then record ``Re w_k`` every ``sample_every`` steps.

    ``callback(solver, state)`` is invoked after every step of the recorded phase.
    """
    if sample_every < 1:
        raise DomainError("sample_every must be >= 1")
    solver = solver or Solver(config)
    state = state or zeros(config.N)
    idx = [_mode_index(config.N, m) for m in modes]
    for _ in range(spinup_steps):
        state = solver.step(state)
    n_samples = n_steps // sample_every + 1
    samples = np.zeros((len(idx), n_samples))
    rows = np.array([i for i, _, _ in idx], dtype=int)
    cols = np.array([j for _, j, _ in idx], dtype=int)

    def record(k, st):
        if len(idx):
            samples[:, k] = st.coeffs[rows, cols].real

    record(0, state)
    e_t, e_v = [state.t], [energy(state)]
    for n in range(1, n_steps + 1):
        state = solver.step(state)
        if callback is not None:
            callback(solver, state)
        if n % sample_every == 0:
            record(n // sample_every, state)
        if n % energy_every == 0:
            e_t.append(state.t)
            e_v.append(energy(state))
    series = [
        ModeSeries(tuple(int(v) for v in m), samples[i].copy(), sample_every * config.dt)
        for i, m in enumerate(modes)
    ]
    return RunResult(state, series, np.asarray(e_t), np.asarray(e_v), spinup_steps + n_steps)


def extract_mode_series(run_result: RunResult, modes):
    """Pick the recorded series for ``modes`` out of a finished run."""
    by_mode = {s.mode: s for s in run_result.series}
    out = []
    for m in modes:
        key = (int(m[0]), int(m[1]))
        if key not in by_mode:
            raise DomainError(f"mode {m} was not recorded")
        out.append(by_mode[key])
    return out


def stationarity_statistic(times, energies):
    """``|trend slope| * T_half / mean`` over the second half of an energy record."""
    times = np.asarray(times)
    energies = np.asarray(energies)
    half = len(times) // 2
    t, e = times[half:], energies[half:]
    if len(t) < 2 or np.mean(e) == 0:
        return 0.0
    slope = np.polyfit(t, e, 1)[0]
    return float(abs(slope) * (t[-1] - t[0]) / np.mean(e))


# --- velocity lookups -------------------------------------------------------------

DIRECT_MODE_LIMIT = 64


def velocity_coefficients(state: VorticityState):
    """Spectral velocity ``(u_hat, v_hat)`` from ``u = (d_y psi, -d_x psi)``, ``psi = w / |k|^2``."""
    g = grid(state.N)
    psi = state.coeffs * g.inv_k2
    return 1j * g.ky * psi, -1j * g.kx * psi


def physical_velocity(state: VorticityState, threads=1):
    uh, vh = velocity_coefficients(state)
    return _to_phys(np.stack([uh, vh]), state.N, threads)


def spline_coefficients(state: VorticityState, threads=1):
    """Cubic B-spline coefficient grids of ``u`` and ``v`` on the 2x oversampled mesh."""
    n = state.N
    m = 2 * n
    g = grid(n)
    uh, vh = velocity_coefficients(state)
    h = 2 * math.pi / m
    transfer = ((2.0 + np.cos(g.kx * h)) / 3.0) * ((2.0 + np.cos(g.ky * h)) / 3.0)
    pad = np.zeros((2, m, m // 2 + 1), dtype=complex)
    kx = g.kx[:, 0].astype(int)
    rows = kx % m
    cols = slice(0, n // 2 + 1)
    pad[0][rows, cols] = uh / transfer
    pad[1][rows, cols] = vh / transfer
    cu, cv = _to_phys(pad, m, threads)
    return cu, cv


def _direct_terms(state: VorticityState):
    g = grid(state.N)
    uh, vh = velocity_coefficients(state)
    nz = np.nonzero(state.coeffs != 0)
    w = g.weight[nz]
    kvec = np.column_stack([g.kx[nz[0], 0], g.ky[0, nz[1]]]).astype(np.int64)
    cos_w = np.column_stack([w * uh[nz].real, w * vh[nz].real])
    sin_w = np.column_stack([-w * uh[nz].imag, -w * vh[nz].imag])
    return kvec, cos_w, sin_w


def velocity_at(state: VorticityState, positions, method="auto"):
    """Velocity at arbitrary points; positions are wrapped periodically.

    ``method="auto"`` sums Fourier modes directly when at most 64 are nonzero,
    otherwise interpolates a cubic B-spline on the 2x oversampled grid.
    """
    pts = np.atleast_2d(np.asarray(positions, dtype=np.float64))
    n_active = int(np.count_nonzero(state.coeffs))
    if method == "auto":
        method = "direct" if n_active <= DIRECT_MODE_LIMIT else "spline"
    if method == "direct":
        kvec, cw, sw = _direct_terms(state)
        return _backend.mode_velocity(pts, kvec, cw, sw)
    if method == "spline":
        cu, cv = spline_coefficients(state)
        return _backend.spline_velocity(cu, cv, pts)
    raise DomainError(f"unknown method {method!r}")


def with_time(state: VorticityState, t) -> VorticityState:
    return replace(state, t=t)
