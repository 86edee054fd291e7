import math

import numpy as np
import pytest
import scipy.fft as sfft
from hypothesis import given
from hypothesis import strategies as st

from filtnoise import nse2d as ns
from filtnoise.errors import BlowUpError, DomainError


def single_mode(N, kx, ky, amp):
    st_ = ns.zeros(N)
    c = st_.coeffs.copy()
    i, j, conj = ns._mode_index(N, (kx, ky))
    c[i, j] = np.conj(amp) if conj else amp
    if j == 0:
        c[(-i) % N, 0] = np.conj(c[i, 0])
    return ns.VorticityState(c, N)


# --- config validation -------------------------------------------------------------

@pytest.mark.parametrize("N", [102, 30, 6])
def test_N_must_be_multiple_of_four(N):
    with pytest.raises(DomainError):
        ns.SolverConfig(N, 0.01, 0.1, 0.01)


def test_forcing_ring_inside_band():
    with pytest.raises(DomainError):
        ns.SolverConfig(64, 0.01, 0.1, 0.01, ns.ForcingSpec(21, 1))
    with pytest.raises(DomainError):
        ns.SolverConfig(64, 0.01, 0.1, 0.01, ns.ForcingSpec(1, 1))
    ns.SolverConfig(64, 0.01, 0.1, 0.01, ns.ForcingSpec(8, 1))


def test_bad_integrator():
    with pytest.raises(DomainError):
        ns.SolverConfig(64, 0.01, 0.1, 0.01, integrator="euler")


# --- state invariants -----------------------------------------------------------------

def test_from_physical_projects_band():
    rng = np.random.default_rng(0)
    s = ns.from_physical(rng.standard_normal((32, 32)))
    ns.check_invariants(s)
    g = ns.grid(32)
    assert np.all(s.coeffs[~g.dealias] == 0)


def test_full_coefficients_match_fft2():
    s = ns.random_state(32, 4, seed=3)
    full = sfft.fft2(s.physical(), norm="forward")
    assert np.allclose(s.full_coefficients(), full, atol=1e-14)


def test_physical_round_trip():
    s = ns.random_state(32, 4, seed=5)
    back = ns.from_physical(s.physical())
    assert np.allclose(back.coeffs, s.coeffs, atol=1e-15)


def test_dealias_strict_two_thirds():
    g = ns.grid(48)
    kx = np.abs(g.kx[:, 0])
    assert not g.dealias[kx == 16].any()  # exactly N/3 is removed
    assert g.dealias[kx == 15, 1].all()


# --- stepping ---------------------------------------------------------------------------

def test_zero_state_is_fixed_point():
    cfg = ns.SolverConfig(32, 0.01, 0.1, 0.01)
    s = ns.step(ns.zeros(32), cfg)
    assert np.all(s.coeffs == 0) and s.t == pytest.approx(0.01)


@pytest.mark.parametrize("integrator", ["rk3", "implicit-midpoint"])
def test_single_mode_decay(integrator):
    nu, alpha = 0.01, 0.1
    s0 = single_mode(32, 1, 0, 0.7 - 0.2j)
    cfg = ns.SolverConfig(32, nu, alpha, 0.01, integrator=integrator)
    solver = ns.Solver(cfg)
    s = s0
    for _ in range(100):
        s = solver.step(s)
    expected = (0.7 - 0.2j) * math.exp(-(alpha + nu) * 1.0)
    tol = 1e-8 if integrator == "rk3" else 1e-6  # midpoint is second order in the linear part
    assert abs(ns.mode_value(s, (1, 0)) - expected) < tol
    ns.check_invariants(s)


def test_single_mode_decay_oblique():
    s = single_mode(32, 3, 4, 1.0)
    solver = ns.Solver(ns.SolverConfig(32, 0.01, 0.1, 0.01))
    for _ in range(50):
        s = solver.step(s)
    assert abs(ns.mode_value(s, (3, 4)) - math.exp(-(0.1 + 0.25) * 0.5)) < 1e-12


def test_forced_run_deterministic():
    cfg = ns.SolverConfig(32, 0.01, 0.1, 0.01, ns.ForcingSpec(6, 1, 1.0), seed=7)
    a = ns.run(cfg, n_steps=20, modes=[(6, 0)]).state
    b = ns.run(cfg, n_steps=20, modes=[(6, 0)]).state
    assert np.array_equal(a.coeffs, b.coeffs)
    ns.check_invariants(a)


def test_forcing_only_on_ring():
    g = ns.grid(64)
    f = ns.Forcing(ns.ForcingSpec(8, 1, 1.0), g)
    inc = f.increment(np.random.default_rng(0), 0.01)
    on = np.abs(inc) > 0
    assert np.all((g.kmod[on] >= 7) & (g.kmod[on] <= 9))
    st_ = ns.VorticityState(inc, 64)
    ns.check_invariants(st_)


def test_forcing_injection_rate():
    g = ns.grid(64)
    f = ns.Forcing(ns.ForcingSpec(8, 1, 0.5), g)
    rng = np.random.default_rng(1)
    inj = [0.5 * np.sum(g.weight * np.abs(f.increment(rng, 0.01)) ** 2 * g.inv_k2) for _ in range(4000)]
    assert np.mean(inj) / 0.01 == pytest.approx(0.5, rel=0.03)


def test_blow_up_reports_step():
    s = single_mode(32, 2, 1, 1e200)
    s = ns.VorticityState(s.coeffs + single_mode(32, 1, 3, 1e200).coeffs, 32)
    solver = ns.Solver(ns.SolverConfig(32, 0.0, 0.0, 1.0))
    with pytest.raises(BlowUpError) as ei:
        for _ in range(5):
            s = solver.step(s)
    assert ei.value.step >= 1


def test_cfl_warning(caplog):
    s = ns.random_state(32, 4, seed=1, amplitude=1e3)
    solver = ns.Solver(ns.SolverConfig(32, 0.0, 0.0, 0.01))
    with caplog.at_level("WARNING"):
        solver.step(s)
    assert "CFL" in caplog.text


# --- conservation -------------------------------------------------------------------------

def test_midpoint_conserves_enstrophy():
    s = ns.random_state(64, 4, seed=2)
    drift = ns.conservation_probe(s, ns.SolverConfig(64, 0, 0, 0.01, integrator="implicit-midpoint"), 100)
    assert drift < 1e-10


def test_midpoint_conserves_energy():
    s = ns.random_state(64, 4, seed=2)
    solver = ns.Solver(ns.SolverConfig(64, 0, 0, 0.01, integrator="implicit-midpoint"))
    e0 = ns.energy(s)
    for _ in range(100):
        s = solver.step(s)
    assert abs(ns.energy(s) - e0) / e0 < 1e-10


def test_rk3_drift_reported():
    s = ns.random_state(64, 4, seed=2)
    drift = ns.conservation_probe(s, ns.SolverConfig(64, 0, 0, 0.005), 100)
    assert 0 <= drift < 1e-4


def test_conservation_zero_field():
    assert ns.conservation_probe(ns.zeros(32), ns.SolverConfig(32, 0, 0, 0.01, integrator="implicit-midpoint"), 3) == 0


@pytest.mark.parametrize("kw", [dict(nu=0.1), dict(alpha=0.1)])
def test_conservation_preconditions(kw):
    base = dict(N=32, nu=0.0, alpha=0.0, dt=0.01)
    base.update(kw)
    with pytest.raises(DomainError):
        ns.conservation_probe(ns.zeros(32), ns.SolverConfig(**base), 1)
    with pytest.raises(DomainError):
        ns.conservation_probe(ns.zeros(32), ns.SolverConfig(32, 0, 0, 0.01, ns.ForcingSpec(4, 1)), 1)


def test_unforced_energy_decays_monotonically():
    s = ns.random_state(64, 6, seed=4)
    solver = ns.Solver(ns.SolverConfig(64, 1e-3, 0.05, 0.01))
    e = [ns.energy(s)]
    for _ in range(100):
        s = solver.step(s)
        e.append(ns.energy(s))
    assert np.all(np.diff(e) < 0)


# --- spectrum -------------------------------------------------------------------------------

def test_spectrum_single_mode_in_bin_five():
    s = single_mode(32, 3, 4, 0.5)
    spec = ns.energy_spectrum(s)
    assert spec[spec[:, 1] > 0, 0].tolist() == [5]
    # |w_k|^2 / (2 |k|^2) for the mode and its conjugate
    assert spec[4, 1] == pytest.approx(2 * 0.25 / (2 * 25))


def test_spectrum_parseval():
    s = ns.random_state(64, 6, seed=9)
    u, v = ns.physical_velocity(s)
    ke = 0.5 * np.mean(u * u + v * v)
    assert ns.energy_spectrum(s)[:, 1].sum() == pytest.approx(ke, rel=1e-10)
    assert ns.energy(s) == pytest.approx(ke, rel=1e-10)


def test_enstrophy_parseval():
    s = ns.random_state(32, 4, seed=1)
    assert ns.enstrophy(s) == pytest.approx(0.5 * np.mean(s.physical() ** 2), rel=1e-12)


# --- mode series -------------------------------------------------------------------------------

def test_mode_outside_band():
    cfg = ns.SolverConfig(32, 0.01, 0.1, 0.01)
    with pytest.raises(DomainError):
        ns.run(cfg, n_steps=1, modes=[(11, 0)])
    with pytest.raises(DomainError):
        ns.run(cfg, n_steps=1, modes=[(0, 0)])


def test_zero_field_zero_series():
    res = ns.run(ns.SolverConfig(32, 0.01, 0.1, 0.01), n_steps=10, modes=[(3, 4)], sample_every=2)
    (m,) = ns.extract_mode_series(res, [(3, 4)])
    assert len(m.samples) == 6 and np.all(m.samples == 0)
    assert m.dt_sample == pytest.approx(0.02)
    with pytest.raises(DomainError):
        ns.extract_mode_series(res, [(1, 1)])


def test_series_records_real_part_and_negative_modes():
    s = single_mode(32, 2, 3, 0.3 + 0.4j)
    res = ns.run(ns.SolverConfig(32, 0.0, 0.0, 0.01), s, 0, modes=[(2, 3), (-2, -3)])
    assert res.series[0].samples[0] == pytest.approx(0.3)
    assert res.series[1].samples[0] == pytest.approx(0.3)


def test_spinup_and_callback():
    calls = []
    cfg = ns.SolverConfig(32, 0.01, 0.1, 0.01, ns.ForcingSpec(6, 1), seed=1)
    res = ns.run(cfg, n_steps=5, spinup_steps=3, callback=lambda sv, st_: calls.append(st_.t))
    assert res.steps == 8 and len(calls) == 5
    assert calls[0] == pytest.approx(0.04)


def test_stationarity_statistic():
    t = np.linspace(0, 10, 101)
    assert ns.stationarity_statistic(t, np.ones_like(t)) < 1e-12
    assert ns.stationarity_statistic(t, 1 + t) > 0.1


# --- velocity lookup --------------------------------------------------------------------------------

def test_velocity_single_mode_closed_form():
    # w = 2 cos(x + y): psi = cos(x + y), u = d_y psi = -sin(x + y), v = -d_x psi = sin(x + y)
    s = single_mode(32, 1, 1, 1.0)
    pts = np.random.default_rng(0).uniform(0, 2 * np.pi, (20, 2))
    uv = ns.velocity_at(s, pts)
    ph = pts.sum(axis=1)
    assert np.allclose(uv[:, 0], -np.sin(ph), atol=1e-13)
    assert np.allclose(uv[:, 1], np.sin(ph), atol=1e-13)


def test_velocity_zero_field():
    assert np.all(ns.velocity_at(ns.zeros(32), [[1.0, 2.0]]) == 0)


def test_velocity_wraps_periodically():
    s = ns.random_state(32, 3, seed=8)
    p = np.array([[0.3, 1.7]])
    assert np.allclose(ns.velocity_at(s, p), ns.velocity_at(s, p + [4 * np.pi, -2 * np.pi]), atol=1e-12)


def _field_with_modes(N, n_modes, seed):
    rng = np.random.default_rng(seed)
    g = ns.grid(N)
    idx = np.argwhere(g.dealias & (g.ky > 0) & (g.kmod < 12))
    pick = idx[rng.choice(len(idx), n_modes, replace=False)]
    c = np.zeros_like(g.k2, dtype=complex)
    c[pick[:, 0], pick[:, 1]] = rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)
    return ns.VorticityState(c, N)


def test_spline_vs_direct_128_modes():
    s = _field_with_modes(64, 128, 2)
    assert np.count_nonzero(s.coeffs) == 128
    pts = np.random.default_rng(3).uniform(0, 2 * np.pi, (100, 2))
    direct = ns.velocity_at(s, pts, "direct")
    spline = ns.velocity_at(s, pts, "auto")
    rms = math.sqrt(2 * ns.energy(s))
    assert np.max(np.abs(direct - spline)) < 1e-4 * rms


def test_direct_matches_grid_values():
    s = ns.random_state(32, 4, seed=6)
    u, v = ns.physical_velocity(s)
    h = 2 * np.pi / 32
    idx = np.array([[0, 0], [5, 9], [31, 17]])
    uv = ns.velocity_at(s, idx * h, "direct")
    assert np.allclose(uv[:, 0], u[idx[:, 0], idx[:, 1]], atol=1e-13)
    assert np.allclose(uv[:, 1], v[idx[:, 0], idx[:, 1]], atol=1e-13)


def test_velocity_divergence_free():
    s = ns.random_state(32, 5, seed=1)
    uh, vh = ns.velocity_coefficients(s)
    g = ns.grid(32)
    div = 1j * g.kx * uh + 1j * g.ky * vh
    assert np.max(np.abs(div)) < 1e-10 * np.max(np.abs(uh))


def test_bad_method():
    with pytest.raises(DomainError):
        ns.velocity_at(ns.zeros(32), [[0, 0]], method="nearest")


@given(st.integers(-9, 9), st.integers(-9, 9), st.floats(0.1, 3), st.floats(0, 6.2), st.floats(0, 6.2))
def test_single_mode_velocity_property(kx, ky, amp, x, y):
    if (kx, ky) == (0, 0):
        return
    s = single_mode(32, kx, ky, amp)
    k2 = kx * kx + ky * ky
    ph = kx * x + ky * y
    # w = 2 amp cos(k.x) -> psi = 2 amp cos(k.x) / |k|^2
    u = -2 * amp * ky * math.sin(ph) / k2
    v = 2 * amp * kx * math.sin(ph) / k2
    assert np.allclose(ns.velocity_at(s, [[x, y]])[0], [u, v], atol=1e-12)
