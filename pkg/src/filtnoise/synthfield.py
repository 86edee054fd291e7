"""Synthetic velocity fields: divergence-free Fourier modes with filtered-noise coefficients.

Basis vectors are normalized to unit mean square over the torus,

    e_k^cos(x) = sqrt(2) k_perp/|k| cos(k . x),   e_k^sin(x) = sqrt(2) k_perp/|k| sin(k . x),

with ``k_perp = (-k_y, k_x)`` and ``k`` restricted to the half plane
``k_x > 0`` or ``k_x = 0, k_y > 0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import DomainError
from .kernels import Kernel, kernel_from_name
from .noise import filter_weights, filter_normals

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class BasisMode:
    k: tuple
    parity: str = "cos"

    def __post_init__(self):
        if tuple(self.k) == (0, 0):
            raise DomainError("wavevector (0, 0) has no divergence-free mode")
        if self.parity not in ("cos", "sin"):
            raise DomainError(f"parity must be 'cos' or 'sin', got {self.parity!r}")

    @property
    def direction(self):
        kx, ky = self.k
        n = math.hypot(kx, ky)
        return np.array([-ky / n, kx / n])


def basis_mode_eval(mode: BasisMode, x):
    """Evaluate ``e_k`` at one point or an ``(M, 2)`` array of points."""
    pts = np.asarray(x, dtype=np.float64)
    phase = pts[..., 0] * mode.k[0] + pts[..., 1] * mode.k[1]
    s = np.cos(phase) if mode.parity == "cos" else np.sin(phase)
    return SQRT2 * s[..., None] * mode.direction


def torus_inner(a: BasisMode, b: BasisMode, n=256):
    """Torus-averaged inner product ``<e_a, e_b>`` by the rectangle rule on an ``n x n`` grid."""
    g = np.arange(n) * (2 * math.pi / n)
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    return float(np.mean(np.sum(basis_mode_eval(a, pts) * basis_mode_eval(b, pts), axis=1)))


@dataclass(frozen=True)
class ShellSpec:
    """Integer wavevectors whose rounded modulus lies in ``[k_max - half_width, k_max + half_width]``."""

    k_max: int
    half_width: int = 1

    def __post_init__(self):
        if self.k_max - self.half_width < 1 or self.half_width < 0:
            raise DomainError(f"invalid shell k_max={self.k_max}, half_width={self.half_width}")

    def wavevectors(self):
        """Half-plane wavevectors of the shell as an ``(n, 2)`` integer array."""
        r = self.k_max + self.half_width + 1
        kx, ky = np.meshgrid(np.arange(0, r + 1), np.arange(-r, r + 1), indexing="ij")
        kx, ky = kx.ravel(), ky.ravel()
        half = (kx > 0) | ((kx == 0) & (ky > 0))
        b = np.rint(np.hypot(kx, ky))
        sel = half & (b >= self.k_max - self.half_width) & (b <= self.k_max + self.half_width)
        return np.column_stack([kx[sel], ky[sel]]).astype(np.int64)

    @property
    def n_bins(self):
        return 2 * self.half_width + 1

    def modes(self):
        return [BasisMode((int(a), int(b)), p) for a, b in self.wavevectors() for p in ("cos", "sin")]


def _directions(kvec):
    kvec = np.asarray(kvec, dtype=np.float64)
    n = np.hypot(kvec[:, 0], kvec[:, 1])
    return SQRT2 * np.column_stack([-kvec[:, 1] / n, kvec[:, 0] / n])


@dataclass(frozen=True)
class QReport:
    Q: np.ndarray
    isotropic: np.ndarray
    deviation: float


def q_matrix(shell: ShellSpec, x) -> QReport:
    """``Q(x) = sum e_k (x) e_k`` over both parities, against ``pi k_max (2 hw + 1) I``.

    ``deviation`` is the relative Frobenius distance to the isotropic matrix.
    """
    kvec = shell.wavevectors()
    d = _directions(kvec)
    if np.shape(x)[-1] != 2:
        raise DomainError("x must be a 2D point")
    # each k contributes (cos^2 + sin^2) d d^T, so Q does not vary with x
    q = d.T @ d
    iso = math.pi * shell.k_max * shell.n_bins * np.eye(2)
    dev = float(np.linalg.norm(q - iso) / np.linalg.norm(iso))
    return QReport(q, iso, dev)


def shell_amplitude(E, shell: ShellSpec):
    """Common amplitude ``sqrt(E / (2 pi k_max (2 hw + 1)))``; ``E`` is the shell's ``<|u|^2>``."""
    return math.sqrt(E / (2.0 * math.pi * shell.k_max * shell.n_bins))


def shell_energy_from_spectrum(spectrum, shell: ShellSpec):
    """Velocity variance ``<|u|^2>`` of the shell from a kinetic-energy bin spectrum (rows ``(k, E_k)``)."""
    spectrum = np.asarray(spectrum)
    k = np.rint(spectrum[:, 0])
    sel = (k >= shell.k_max - shell.half_width) & (k <= shell.k_max + shell.half_width)
    return float(2.0 * np.sum(spectrum[sel, 1]))


@dataclass(frozen=True)
class FieldRealization:
    """Coefficient paths ``xi`` of one realization on a uniform time grid.

    ``xi`` has shape ``(2, n_k, n_t)``: cosine then sine parity.
    """

    times: np.ndarray
    xi: np.ndarray

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class SyntheticField:
    kvec: np.ndarray
    amplitude: float
    kernel: Kernel
    tau: float
    seed: int
    shell: ShellSpec
    E: float
    kernel_name: str = "gaussian"

    @property
    def n_modes(self):
        return 2 * len(self.kvec)

    @property
    def seeds(self):
        """Per-path seeds, cosine block then sine block."""
        return np.random.SeedSequence(self.seed).generate_state(self.n_modes, dtype=np.uint64)

    def realize(self, dt, horizon, realization=0) -> FieldRealization:
        """Filtered-noise paths for all modes; ``realization`` picks an independent copy."""
        tau = float(self.tau)
        w = filter_weights(self.kernel, tau, dt)
        half = (len(w) - 1) // 2
        n_t = int(round(horizon / dt)) + 1
        ss = np.random.SeedSequence([int(self.seed), int(realization)])
        rng = np.random.default_rng(ss)
        eta = rng.standard_normal((self.n_modes, n_t + 2 * half))
        xi = filter_normals(eta, w).reshape(2, len(self.kvec), n_t)
        return FieldRealization(np.arange(n_t) * dt, xi)

    def weights(self, xi_cos, xi_sin):
        d = _directions(self.kvec) * self.amplitude
        return d * np.asarray(xi_cos)[:, None], d * np.asarray(xi_sin)[:, None]

    def velocity(self, points, xi_cos, xi_sin):
        cw, sw = self.weights(xi_cos, xi_sin)
        return _backend.mode_velocity(np.atleast_2d(np.asarray(points, dtype=np.float64)), self.kvec, cw, sw)

    def velocity_at(self, realization: FieldRealization, points, t):
        """Velocity at time ``t``, interpolating coefficients linearly between samples."""
        s = t / realization.dt
        i = int(min(max(math.floor(s), 0), len(realization.times) - 2))
        a = s - i
        xi = (1 - a) * realization.xi[:, :, i] + a * realization.xi[:, :, i + 1]
        return self.velocity(points, xi[0], xi[1])

    def to_json(self):
        return json.dumps(
            {
                "k_max": self.shell.k_max,
                "half_width": self.shell.half_width,
                "kernel": self.kernel_name,
                "tau": self.tau,
                "E": self.E,
                "seed": int(self.seed),
                "amplitude": self.amplitude,
                "n_modes": self.n_modes,
            },
            sort_keys=True,
        )


def build_umax(E_kmax, shell: ShellSpec, kernel: Kernel | str, tau, seed) -> SyntheticField:
    """Most energetic shell of the model field with common amplitude and shared ``tau``.

    ``E_kmax`` is the velocity variance ``<|u|^2>`` carried by the shell.
    """
    if not (tau > 0 and math.isfinite(tau)):
        raise DomainError("tau must be positive")
    if E_kmax < 0:
        raise DomainError("E_kmax must be nonnegative")
    name = kernel if isinstance(kernel, str) else kernel.label
    if isinstance(kernel, str):
        kernel = kernel_from_name(kernel)
    kvec = shell.wavevectors()
    if len(kvec) == 0:
        raise DomainError(f"shell {shell} contains no wavevectors")
    return SyntheticField(kvec, shell_amplitude(E_kmax, shell), kernel, float(tau), int(seed), shell, float(E_kmax), name)


def field_variance(field_: SyntheticField):
    """Exact stationary ``E |u(x, t)|^2`` (independent of ``x``)."""
    d = _directions(field_.kvec)
    return float(field_.amplitude**2 * np.sum(d * d))


@dataclass(frozen=True)
class WhiteNoiseField:
    """White-in-time limit: over a step ``dt`` each coefficient is ``sqrt(tau / dt) N(0, 1)``."""

    base: SyntheticField
    tau: float = field(default=None)

    def __post_init__(self):
        if self.tau is None:
            object.__setattr__(self, "tau", float(self.base.tau))

    @property
    def diffusivity(self):
        return self.tau * self.base.E / 4.0

    def coefficients(self, rng, dt):
        scale = math.sqrt(self.tau / dt)
        z = rng.standard_normal((2, len(self.base.kvec)))
        return scale * z[0], scale * z[1]

    def displacement(self, points, rng, dt):
        """One Euler-Maruyama increment ``u dt`` with white-noise coefficients."""
        c, s = self.coefficients(rng, dt)
        return self.base.velocity(points, c, s) * dt


def white_noise_field(field_: SyntheticField) -> WhiteNoiseField:
    tau = np.asarray(field_.tau, dtype=np.float64)
    if tau.ndim > 0 and not np.all(tau == tau.flat[0]):
        raise DomainError("white-noise limit needs a single tau over the shell")
    return WhiteNoiseField(field_, float(tau.flat[0]) if tau.ndim else float(tau))
