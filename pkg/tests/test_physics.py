import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from nvtomo import physics
from nvtomo.physics import CONSTANTS, GAUSS, GradientSetting, TipModel

from conftest import random_molecule


def dipole_variance_oracle(spin, nv, axis):
    """Spin-averaged <(B . a)^2> of a proton, built from the dipole tensor.

    B = k gamma hbar D I / r^3 with D = 3 rr^T - 1; for an unpolarized
    spin-1/2 <I_a I_b> = delta_ab / 4, so <(a . B)^2> = k^2 (gamma hbar)^2 |D a|^2 / (4 r^6).
    """
    r = (np.asarray(spin, float) - np.asarray(nv, float)) * 1e-9
    d = math.sqrt(r @ r)
    rhat = r / d
    a = np.asarray(axis, float) / np.linalg.norm(axis)
    D = 3 * np.outer(rhat, rhat) - np.eye(3)
    k = CONSTANTS.mu0_over_4pi * CONSTANTS.gamma_h * CONSTANTS.hbar
    return k * k * float((D @ a) @ (D @ a)) / (4 * d ** 6)


# --- constants and Larmor ---------------------------------------------------------------------

def test_larmor_500_gauss():
    assert physics.larmor_frequency(500 * GAUSS) == pytest.approx(2128.5e3, rel=1e-3)


def test_larmor_zero_and_one_tesla():
    assert physics.larmor_frequency(0.0) == 0.0
    # 20 times the 500 G value
    assert physics.larmor_frequency(1.0) == pytest.approx(42.577e6, rel=1e-3)
    assert physics.larmor_frequency(1.0) == pytest.approx(20 * physics.larmor_frequency(0.05), rel=1e-12)


def test_gamma_khz_per_gauss():
    assert CONSTANTS.gamma_h_khz_per_gauss == pytest.approx(4.2577, rel=1e-4)


@given(st.floats(0, 20), st.floats(0, 20), st.floats(0, 5))
def test_larmor_linear_homogeneous(a, b, c):
    f = physics.larmor_frequency
    assert f(a + b) == pytest.approx(f(a) + f(b), rel=1e-12, abs=1e-9)
    assert f(c * a) == pytest.approx(c * f(a), rel=1e-12, abs=1e-9)


# --- Boltzmann and spin noise -------------------------------------------------------------

def test_boltzmann_zero_cases():
    assert physics.boltzmann_excess(0, 0.05, 300).exact == 0
    e = physics.boltzmann_excess(1e6, 0.0, 300)
    assert e.exact == 0 and e.approx == 0


def test_boltzmann_two_expressions_agree():
    N, B, T = 1e6, 0.05, 300.0
    e = physics.boltzmann_excess(N, B, T)
    # independent evaluation from the tabulated constants
    from scipy import constants as sc
    gamma = sc.physical_constants["proton gyromag. ratio"][0]
    x = sc.h * gamma * B / (2 * math.pi * sc.k * T)
    assert e.approx == pytest.approx(N * x, rel=1e-12)
    assert e.exact == pytest.approx(N * (math.exp(x) - 1), rel=1e-9)
    assert abs(e.exact - e.approx) / e.exact < 1e-4


def test_boltzmann_rejects_bad_temperature():
    with pytest.raises(ValueError):
        physics.boltzmann_excess(10, 1.0, 0.0)


@given(st.floats(1e-6, 0.1))
def test_boltzmann_approximation_error_below_energy_ratio(x):
    # choose B so that Delta E / kT = x at 1 K
    b = x * 2 * math.pi * CONSTANTS.k_boltzmann / (CONSTANTS.h_planck * CONSTANTS.gamma_h)
    e = physics.boltzmann_excess(1000, b, 1.0)
    assert e.energy_ratio == pytest.approx(x, rel=1e-9)
    assert abs(e.exact - e.approx) / e.exact < x
    if x < 0.02:
        assert abs(e.exact - e.approx) / e.exact < 0.01


def test_spin_noise_sigma_values():
    assert physics.spin_noise_sigma(0) == 0
    assert physics.spin_noise_sigma(1) == 1
    assert physics.spin_noise_sigma(1e4) == 100


def test_spin_noise_sigma_monte_carlo():
    rng = np.random.default_rng(7)
    n = 10_000
    # sum of n fair +-1 draws = 2 Binomial(n, 1/2) - n
    excess = 2 * rng.binomial(n, 0.5, size=1_000_000) - n
    assert excess.std() == pytest.approx(physics.spin_noise_sigma(n), rel=0.01)


# --- dipolar B_rms --------------------------------------------------------------------------

def test_brms_empty_is_zero():
    assert physics.dipolar_brms(np.zeros((0, 3)), (0, 0, -5), (0, 0, 1)) == 0.0


def test_brms_two_identical_spins():
    one = physics.dipolar_brms([[0.3, 0.1, 0.2]], (0, 0, -5), (0, 0, 1))
    two = physics.dipolar_brms([[0.3, 0.1, 0.2]] * 2, (0, 0, -5), (0, 0, 1))
    assert two == pytest.approx(math.sqrt(2) * one, rel=1e-15)


def test_brms_rejects_close_spin():
    with pytest.raises(ValueError):
        physics.dipolar_brms([[0, 0, -4.95]], (0, 0, -5), (0, 0, 1))


def test_variance_matches_tensor_oracle(rng):
    nv = np.array([0.1, -0.2, -5.0])
    for _ in range(50):
        spin = rng.uniform(-2, 2, 3)
        axis = rng.normal(size=3)
        got = physics.dipolar_variance([spin], nv, axis)[0]
        assert got == pytest.approx(dipole_variance_oracle(spin, nv, axis), rel=1e-12)


def test_batched_variance_equals_single_spin_bitwise(rng):
    pts = rng.uniform(-1, 1, (20, 3))
    batch = physics.dipolar_variance(pts, (0, 0, -5), (1, 1, 1))
    single = [physics.dipolar_variance([p], (0, 0, -5), (1, 1, 1))[0] for p in pts]
    np.testing.assert_array_equal(batch, single)


def test_dense_block_order_of_magnitude():
    # 10^4 protons filling a (5 nm)^3 cube on the surface, NV 7 nm deep
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 5, (10_000, 3))
    pts[:, :2] -= 2.5
    b = physics.dipolar_brms(pts, (0, 0, -7), (0, 0, 1)) * 1e9
    assert 400 / 3 < b < 400 * 3


nv_axes = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1)


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1), nv_axes)
def test_brms_rotation_invariant(seed, axis):
    rng = np.random.default_rng(seed)
    m = random_molecule(rng)
    nv = np.array([0.0, 0.0, -5.0])
    R = Rotation.random(random_state=seed).as_matrix()
    a = physics.dipolar_brms(m.positions, nv, axis)
    b = physics.dipolar_brms(m.positions @ R.T, R @ nv, R @ np.asarray(axis))
    assert b == pytest.approx(a, rel=1e-12)


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.2, 5.0))
def test_brms_inverse_cube_scaling(seed, alpha):
    m = random_molecule(np.random.default_rng(seed))
    nv = np.array([0.0, 0.0, -5.0])
    a = physics.dipolar_brms(m.positions, nv, (0, 0, 1))
    b = physics.dipolar_brms(alpha * m.positions, alpha * nv, (0, 0, 1))
    assert b == pytest.approx(a * alpha ** -3, rel=1e-9)


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 19))
def test_brms_quadrature_additive(seed, split):
    m = random_molecule(np.random.default_rng(seed), n=20)
    p = m.positions
    nv, ax = (0.0, 0.0, -5.0), (1, 1, 1)
    whole = physics.dipolar_brms(p, nv, ax) ** 2
    parts = physics.dipolar_brms(p[:split], nv, ax) ** 2 + physics.dipolar_brms(p[split:], nv, ax) ** 2
    assert whole == pytest.approx(parts, rel=1e-12)


# --- gradient settings --------------------------------------------------------------------------

@given(st.floats(0, math.pi), st.floats(-10, 10))
def test_gradient_direction_unit(theta, phi):
    u = GradientSetting(theta, phi, 1.0).direction
    assert abs(np.linalg.norm(u) - 1) < 1e-12


def test_gradient_setting_validation():
    with pytest.raises(ValueError):
        GradientSetting(-0.1, 0, 1)
    with pytest.raises(ValueError):
        GradientSetting(0.1, 0, 0)
    g = GradientSetting.from_g_per_nm(0.3, 0.2, 3.0)
    assert g.magnitude == pytest.approx(3e5)
    assert g.g_per_nm == pytest.approx(3.0)
    assert g.in_hemisphere
    assert not GradientSetting(0.3, math.pi + 0.1, 1.0).in_hemisphere


def test_gradient_from_vector_round_trip():
    g = GradientSetting(1.1, 0.7, 2.5e5)
    back = GradientSetting.from_vector(g.direction * g.magnitude)
    assert back.theta == pytest.approx(g.theta, abs=1e-12)
    assert back.phi == pytest.approx(g.phi, abs=1e-12)
    assert back.magnitude == pytest.approx(g.magnitude, rel=1e-12)


# --- magnetic tip ---------------------------------------------------------------------------

K = CONSTANTS.mu0_over_4pi


def test_tip_field_axial_and_equatorial():
    m, d = 1e-15, 50.0
    tip = TipModel((0, 0, 0), (0, 0, m))
    axial = physics.tip_field(tip, (0, 0, d))
    np.testing.assert_allclose(axial, [0, 0, K * 2 * m / (d * 1e-9) ** 3], rtol=1e-12, atol=0)
    eq = physics.tip_field(tip, (d, 0, 0))
    np.testing.assert_allclose(eq, [0, 0, -K * m / (d * 1e-9) ** 3], rtol=1e-12, atol=1e-30)
    assert eq[2] == pytest.approx(-axial[2] / 2, rel=1e-12)


def test_tip_field_inverse_cube():
    tip = TipModel((1, 2, 3), (1e-15, -2e-15, 0.5e-15))
    d = np.array([10.0, -20.0, 15.0])
    np.testing.assert_allclose(physics.tip_field(tip, np.add(tip.position, 2 * d)),
                               physics.tip_field(tip, np.add(tip.position, d)) / 8, rtol=1e-12)


def test_tip_field_refuses_dipole_location():
    with pytest.raises(ValueError):
        physics.tip_field(TipModel((0, 0, 0), (0, 0, 1e-15)), (0, 0, 0.5))


@settings(max_examples=30)
@given(st.tuples(*[st.floats(-80, 80)] * 3).filter(lambda p: np.linalg.norm(p) > 20))
def test_tip_field_divergence_free(p):
    tip = TipModel((0, 0, 0), (0.3e-15, -1e-15, 2e-15))
    h = 0.01
    p = np.asarray(p)
    div = 0.0
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        div += (physics.tip_field(tip, p + e)[k] - physics.tip_field(tip, p - e)[k]) / (2 * h)
    assert abs(div) < 1e-6 * np.linalg.norm(physics.tip_field(tip, p))


def test_axial_tip_gradient_along_axis():
    tip = TipModel((0, 0, 100), (0, 0, 1e-15))
    g, report = physics.gradient_at_sample(tip, (0, 0, 0), 1.5)
    assert math.sin(g.theta) < 1e-6
    assert not report.non_uniform


def test_calibrated_tip_gives_three_g_per_nm():
    for theta, phi in [(0.0, 0.0), (0.7, 0.3), (2.0, 1.2)]:
        tip = physics.calibrated_tip(theta, phi)
        g, _ = physics.gradient_at_sample(tip, (0, 0, 0), 1.5)
        assert g.g_per_nm == pytest.approx(3.0, rel=1e-4)
        np.testing.assert_allclose(g.direction, GradientSetting(theta, phi, 1).direction, atol=1e-6)


def test_gradient_inverse_fourth_power():
    tip = TipModel((0, 0, 0), (0.2e-15, 0.1e-15, 1e-15))
    u = np.array([0.3, -0.4, 0.866])
    g1, _ = physics.gradient_at_sample(tip, 100 * u, 1.0)
    g2, _ = physics.gradient_at_sample(tip, 200 * u, 1.0)
    assert g2.magnitude / g1.magnitude == pytest.approx(1 / 16, rel=1e-6)


def test_gradient_guard_and_curvature_flag():
    tip = TipModel((0, 0, 12), (0, 0, 1e-15))
    with pytest.raises(ValueError):
        physics.gradient_at_sample(tip, (0, 0, 5), 1.0)
    _, report = physics.gradient_at_sample(tip, (0, 0, 0), 5.0)
    assert report.non_uniform


def test_moment_for_gradient_laws():
    m = physics.moment_for_gradient(3.0, 100.0)
    assert physics.moment_for_gradient(6.0, 100.0) == pytest.approx(2 * m, rel=1e-15)
    assert physics.moment_for_gradient(3.0, 200.0) == pytest.approx(16 * m, rel=1e-15)
    tip = TipModel((0, 0, 100), (0, 0, m))
    g, _ = physics.gradient_at_sample(tip, (0, 0, 0), 1.0)
    assert g.g_per_nm == pytest.approx(3.0, rel=1e-4)
