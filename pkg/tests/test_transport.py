import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from filtnoise import kernels as kn
from filtnoise import nse2d as ns
from filtnoise import synthfield as sf
from filtnoise import transport as tr
from filtnoise.errors import BlowUpError, DomainError

G = kn.gaussian_kernel()


# --- closed-form prediction ---------------------------------------------------------

def test_prediction_zero():
    assert tr.predict_variance(tr.VariancePrediction(G.covariance, 0.5, 2.0), 0.0) == 0.0


def test_prediction_short_time():
    tau, E = 0.7, 1.3
    p = tr.VariancePrediction(G.covariance, tau, E)
    for t in (tau / 100, tau / 1000):
        assert p(t) == pytest.approx(E / 2 * t * t, rel=0.01)


def test_prediction_long_time():
    tau, E = 0.7, 1.3
    p = tr.VariancePrediction(G.covariance, tau, E)
    for t in (100 * tau, 1000 * tau):
        assert p(t) / t == pytest.approx(tau * E / 2, rel=0.02)


def test_prediction_against_nested_quadrature():
    c = kn.matern_kernel(1).covariance
    tau, E, t = 0.5, 2.0, 1.3
    inner = lambda r: integrate.quad(lambda s: float(c(s)), 0, r, epsabs=1e-13)[0]  # noqa: E731
    nested = tau**2 * E * integrate.quad(inner, 0, t / tau, epsabs=1e-13)[0]
    assert tr.predict_variance(tr.VariancePrediction(c, tau, E), t) == pytest.approx(nested, rel=1e-6)


@given(st.floats(0, 5), st.floats(0, 5))
def test_prediction_nondecreasing(a, b):
    p = tr.VariancePrediction(G.covariance, 0.3, 1.0)
    lo, hi = sorted((a, b))
    assert p(lo) <= p(hi) + 1e-15


def test_prediction_rejects_negative_time():
    with pytest.raises(DomainError):
        tr.predict_variance(tr.VariancePrediction(G.covariance, 1.0, 1.0), -1.0)


def test_prediction_vectorized():
    p = tr.VariancePrediction(G.covariance, 1.0, 1.0)
    t = np.array([0.1, 1.0, 10.0])
    assert np.allclose(p(t), [p(v) for v in t])


# --- regime check -----------------------------------------------------------------------

def test_regime_on_prediction():
    tau = 0.4
    p = tr.VariancePrediction(G.covariance, tau, 1.0)
    t = np.geomspace(tau / 100, 100 * tau, 300)
    s1, s2, trans = tr.regime_check((t, p(t)), tau)
    assert 1.9 <= s1 <= 2.0
    assert 1.0 <= s2 <= 1.1
    assert tau / 3 <= trans <= 3 * tau


def test_regime_ballistic():
    t = np.geomspace(0.01, 100, 200)
    rep = tr.regime_check((t, t * t), 1.0)
    assert rep.slope_short == pytest.approx(2.0) and rep.slope_long == pytest.approx(2.0)
    assert math.isinf(rep.transition_estimate)


def test_regime_span_too_short():
    t = np.linspace(0.1, 10, 50)
    with pytest.raises(DomainError):
        tr.regime_check((t, t), 1.0)


def test_effective_diffusivity():
    assert tr.effective_diffusivity(2, 3) == {"diffusivity": 1.5, "variance_slope": 3.0}
    d = tr.effective_diffusivity(4, 3)
    assert d["diffusivity"] == 3.0 and d["variance_slope"] == 6.0
    with pytest.raises(DomainError):
        tr.effective_diffusivity(0, 1)


# --- advection -------------------------------------------------------------------------------

def test_constant_field_ballistic():
    c = tr.advect(tr.ConstantField((1.0, 0.0)), 10, 0.1, 2.0, 0)
    assert np.allclose(c.variance, c.times**2, rtol=1e-12, atol=1e-14)
    assert np.allclose(c.var_total, c.times**2, rtol=1e-12, atol=1e-14)


def test_zero_field():
    c = tr.advect(tr.ConstantField((0.0, 0.0)), 5, 0.1, 1.0, 0)
    assert np.all(c.variance == 0)


def test_origin_start_zero_variance_at_t0():
    f = sf.build_umax(1.0, sf.ShellSpec(4, 1), "gaussian", 0.5, 2)
    c = tr.advect(f, 20, 0.05, 0.5, 1, n_realizations=20, initial="origin")
    assert c.variance[0] == 0.0
    assert np.all(c.variance >= 0)


def test_advect_deterministic():
    f = sf.build_umax(1.0, sf.ShellSpec(4, 1), "gaussian", 0.5, 2)
    a = tr.advect(f, 40, 0.05, 1.0, 7, n_realizations=4)
    b = tr.advect(f, 40, 0.05, 1.0, 7, n_realizations=4)
    assert np.array_equal(a.variance, b.variance)


def test_advect_argument_checks():
    with pytest.raises(DomainError):
        tr.advect(tr.ConstantField((1, 0)), 10, 0.1, 1.0, 0, n_realizations=3)
    with pytest.raises(DomainError):
        tr.advect(tr.ConstantField((1, 0)), 10, 0.0, 1.0, 0)
    with pytest.raises(DomainError):
        tr.advect(object(), 10, 0.1, 1.0, 0)


def test_nan_position_blows_up():
    with pytest.raises(BlowUpError):
        tr.advect(tr.ConstantField((math.nan, 0.0)), 2, 0.1, 0.3, 0)


def test_ab2_exact_for_linear_in_time_velocity():
    # AB2 integrates u(t) = t exactly after the Euler start: error only from the first step
    ens = tr.TracerEnsemble(np.zeros((1, 2)), 0.01)
    acc = tr._Accumulator(101, 1)
    acc.count[:] = 1
    tr._ab2(ens, lambda p, t: np.array([[t, 0.0]]), 100, 1, acc, 0)
    assert ens.positions[0, 0] == pytest.approx(0.5, abs=1e-3)


def test_white_noise_slope():
    tau, E = 0.05, 0.6
    f = sf.build_umax(E, sf.ShellSpec(8, 1), "gaussian", tau, 3)
    w = sf.white_noise_field(f)
    c = tr.advect(w, 2000, tau / 10, 100 * tau, 5, n_realizations=100)
    rate = tr.diffusive_rate(c, 10 * tau, 100 * tau)
    assert rate == pytest.approx(tr.effective_diffusivity(tau, sf.field_variance(f))["variance_slope"], rel=0.1)


def test_isotropy_of_components():
    f = sf.build_umax(1.0, sf.ShellSpec(10, 1), "gaussian", 0.1, 3)
    c = tr.advect(f, 2000, 0.005, 1.0, 9, n_realizations=40)
    se = np.hypot(c.stderr, c.stderr_y)
    assert np.mean(np.abs(c.variance - c.var_y) <= 3 * se + 1e-15) > 0.9


def test_filtered_and_white_agree_at_long_times():
    tau, E = 0.05, 0.6
    f = sf.build_umax(E, sf.ShellSpec(8, 1), "gaussian", tau, 3)
    a = tr.advect(f, 2000, tau / 10, 40 * tau, 5, n_realizations=100)
    b = tr.advect(sf.white_noise_field(f), 2000, tau / 10, 40 * tau, 6, n_realizations=100)
    sel = a.times >= 10 * tau
    assert np.max(np.abs(a.variance[sel] / b.variance[sel] - 1)) < 0.15


def test_curve_nondecreasing_after_smoothing():
    f = sf.build_umax(1.0, sf.ShellSpec(6, 1), "gaussian", 0.1, 3)
    c = tr.advect(f, 1000, 0.01, 2.0, 2, n_realizations=50)
    sm = np.convolve(c.variance, np.ones(5) / 5, mode="valid")
    se = np.convolve(c.stderr, np.ones(5) / 5, mode="valid")
    assert np.all(np.diff(sm) >= -2 * se[1:])


# --- DNS tracers -------------------------------------------------------------------------------

def test_dns_tracers_in_frozen_single_mode():
    # inviscid, unforced single mode is steady: tracers follow the exact velocity
    st_ = ns.zeros(32)
    c = st_.coeffs.copy()
    c[0, 1] = 0.5  # w = cos(y), psi = cos(y), u = (-sin(y), 0)
    st_ = ns.VorticityState(c, 32)
    tracers = tr.DNSTracers(50, 1, 0.5, 0.01, releases=1, seed=3)
    for _ in range(tracers.n_track + 1):
        tracers.tick(st_)
    curve = tracers.curve()
    pos0 = tr.initial_positions(50, int(tracers.seeds[0]))
    u = ns.velocity_at(st_, pos0, "direct")
    assert np.allclose(u[:, 1], 0)
    assert curve.variance[-1] == pytest.approx(np.mean((u[:, 0] * curve.times[-1]) ** 2), rel=1e-5)
    assert tracers.done


def test_dns_tracer_releases():
    tracers = tr.DNSTracers(4, 2, 0.1, 0.01, releases=3, release_spacing=0.12, seed=1)
    z = ns.zeros(32)
    solver = type("S", (), {})()
    for _ in range(2 * (tracers.total_tracer_steps + 1)):
        tracers(solver, z)
    assert tracers.done
    assert np.all(tracers.acc.count == 4)
