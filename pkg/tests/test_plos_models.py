import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from a2g import plos_models as pm
from a2g.env_grid import ENV_IDS, Environment, LinkGeometry, get_environment

URBAN = get_environment("urban")


# ITU / Fresnel


def test_n_obstructing_uses_kilometres():
    # sqrt(0.3 * 500) = 12.247 buildings per km
    assert pm.n_obstructing(URBAN, 1000.0) == 11
    assert pm.n_obstructing(URBAN, 50.0) == -1


def test_itu_is_one_when_no_building_is_in_between():
    assert pm.plos_itu(URBAN, 10.0, 100.0) == 1.0


def test_itu_single_building_matches_rayleigh_cdf():
    # m = 0: one building at the midpoint
    r = 1.5 / math.sqrt(URBAN.alpha * URBAN.beta) * 1000.0
    assert pm.n_obstructing(URBAN, r) == 0
    h_mid = 0.5 * (100.0 + 1.5)
    assert_allclose(pm.plos_itu(URBAN, r, 100.0, 1.5), 1 - math.exp(-(h_mid**2) / (2 * 15.0**2)))


@settings(max_examples=50)
@given(st.floats(1, 5000), st.floats(20, 500))
def test_itu_monotone_in_distance_and_height(r, h):
    p = pm.plos_itu(URBAN, r, h)
    assert 0.0 <= p <= 1.0
    assert pm.plos_itu(URBAN, 2 * r, h) <= p + 1e-12
    assert pm.plos_itu(URBAN, r, 2 * h) >= p - 1e-12


def test_itu_height_order_is_enforced():
    with pytest.raises(ValueError):
        pm.plos_itu(URBAN, 100.0, 1.0, 1.5)


def test_fresnel_clearance_lowers_itu():
    for r in (200.0, 800.0, 2000.0):
        itu = pm.plos_itu(URBAN, r, 100.0, 1.5)
        fr = pm.plos_fresnel(URBAN, r, 100.0, 1.5, wavelength=0.15)
        assert fr <= itu + 1e-12
        assert_allclose(pm.plos_fresnel(URBAN, r, 100.0, 1.5, wavelength=1e-12), itu, atol=1e-6)


# Sigmoid


def test_sigmoid_fit_recovers_its_own_parameters():
    theta = np.arange(10.0, 86.0, 1.0)
    a, b = 9.61, 0.16
    fit = pm.fit_sigmoid(theta, pm.plos_sigmoid(a, b, theta))
    assert_allclose([fit.a, fit.b], [a, b], rtol=1e-6)
    assert fit.rmse < 1e-9


def test_sigmoid_fit_rejects_degenerate_input():
    theta = np.arange(10.0, 86.0, 5.0)
    with pytest.raises(pm.SigmoidFitError):
        pm.fit_sigmoid(theta, np.ones_like(theta))
    with pytest.raises(ValueError):
        pm.fit_sigmoid(theta[:4], np.linspace(0.1, 0.9, 4))


def test_fitted_sigmoid_is_cached():
    assert pm.fitted_sigmoid(URBAN, 300.0, 1.5) is pm.fitted_sigmoid(URBAN, 300.0, 1.5)


# S-curve


def test_scurve3_matches_tabulated_polynomial():
    a, b, c, d = -2.397e-5, 0.0034, -0.1985, 3.7876
    t = 40.0
    assert_allclose(pm.plos_scurve3("urban", t), 1 / (1 + math.exp(a * t**3 + b * t**2 + c * t + d)))


@pytest.mark.parametrize("env_id", ENV_IDS)
def test_scurve3_increases_with_elevation(env_id):
    v = pm.plos_scurve3(env_id, np.arange(10.0, 86.0, 1.0))
    assert np.all(np.diff(v) > 0)


def test_scurve3_unknown_environment():
    with pytest.raises(KeyError):
        pm.plos_scurve3("custom", 30.0)


# First building


def _first_building_by_quadrature(env, r, h):
    lam = pm.first_building_rate(env)
    rho = h**2 / (2 * env.gamma**2 * r**2)
    val, _ = integrate.quad(lambda x: lam * math.exp(-lam * x - rho * x * x), 0.0, r, epsabs=1e-13)
    return 1.0 - val


@pytest.mark.parametrize("env_id", ENV_IDS)
@pytest.mark.parametrize("r,h", [(50.0, 100.0), (300.0, 100.0), (1000.0, 50.0), (2000.0, 300.0)])
def test_first_building_closed_form_matches_quadrature(env_id, r, h):
    env = get_environment(env_id)
    assert_allclose(pm.plos_first_building(env, r, h), _first_building_by_quadrature(env, r, h), atol=1e-9)


def test_first_building_is_stable_when_the_prefactor_would_overflow():
    env = Environment(0.3, 500, 0.5)
    value = pm.plos_first_building(env, 5.0, 300.0)
    assert math.isfinite(value) and 0.0 <= value <= 1.0
    assert_allclose(value, _first_building_by_quadrature(env, 5.0, 300.0), atol=1e-9)


# Region model


@pytest.mark.parametrize("h_min,h_max,gamma", [(0.0, 30.0, 15.0), (5.0, 40.0, 20.0), (10.0, 11.0, 8.0)])
def test_single_building_normalizations_against_quadrature(h_min, h_max, gamma):
    tail, _ = integrate.quad(lambda h: math.exp(-h * h / (2 * gamma**2)), h_min, h_max)
    assert_allclose(pm.single_building_plos(h_min, h_max, gamma, normalization="printed"), 1 - tail / h_max)
    assert_allclose(
        pm.single_building_plos(h_min, h_max, gamma, normalization="interval"), 1 - tail / (h_max - h_min)
    )


def test_normalizations_agree_from_ground_level():
    h = np.linspace(1, 100, 20)
    assert_allclose(
        pm.single_building_plos(0.0, h, 15.0, normalization="printed"),
        pm.single_building_plos(0.0, h, 15.0, normalization="interval"),
    )


def test_region_weights_sum_to_one():
    for env_id in ENV_IDS:
        assert_allclose(sum(pm.region_weights(get_environment(env_id))), 1.0)


def test_region_model_overhead_is_one():
    assert pm.plos_region3d(URBAN, 90.0, 17.0) == 1.0


@settings(max_examples=15, deadline=None)
@given(st.floats(5, 85), st.floats(0.5, 44.5))
def test_region_model_mirror_symmetry(theta, phi):
    assert_allclose(pm.plos_region3d(URBAN, theta, phi), pm.plos_region3d(URBAN, theta, 90.0 - phi), atol=1e-9)


@pytest.mark.parametrize("env_id", ENV_IDS)
def test_region_model_handles_street_aligned_azimuth(env_id):
    env = get_environment(env_id)
    v = pm.plos_region3d(env, 5.0, 0.0)
    assert 0.0 < v <= 1.0
    # users in the street running along the ray see no building at all
    assert pm.region_plos(env, 5.0, 0.0, "R1") == 1.0


def test_region_model_quarter_turn_periodicity():
    assert pm.plos_region3d(URBAN, 30.0, 20.0) == pm.plos_region3d(URBAN, 30.0, 110.0)


@pytest.mark.parametrize("env_id", ENV_IDS)
def test_region_average_increases_with_elevation(env_id):
    env = get_environment(env_id)
    v = [pm.plos_region3d_avg(env, t, n_phi=8) for t in (10, 25, 40, 55, 70, 85)]
    assert np.all(np.diff(v) > 0)
    assert all(0 <= x <= 1 for x in v)


def test_region_model_variants_are_selectable():
    base = pm.plos_region3d(URBAN, 30.0, 10.0)
    assert pm.plos_region3d(URBAN, 30.0, 10.0, kappa_rule="local_gap") != base
    with pytest.raises(ValueError):
        pm.plos_region3d(URBAN, 30.0, 10.0, kappa_rule="nope")
    with pytest.raises(ValueError):
        pm.plos_region3d(URBAN, 0.0, 10.0)


# 3GPP


def test_3gpp_parameters_uma_at_100m():
    p1, d1 = pm.gpp_parameters("UMa", 100.0)
    assert_allclose([p1, d1], [4300 * 2 - 3800, 460 * 2 - 700])


def test_3gpp_floor_on_d1():
    _, d1 = pm.gpp_parameters("UMi", 1.5)
    assert d1 == 18.0


@pytest.mark.parametrize("scenario", pm.GPP_SCENARIOS)
def test_3gpp_is_one_inside_breakpoint_and_continuous_at_it(scenario):
    h = 100.0
    _, d1 = pm.gpp_parameters(scenario, h)
    assert pm.plos_3gpp(scenario, 0.5 * d1, h) == 1.0
    assert_allclose(pm.plos_3gpp(scenario, d1 * (1 + 1e-9), h), 1.0, atol=1e-6)
    assert pm.plos_3gpp(scenario, 10 * d1, h) < 1.0


def test_3gpp_height_range():
    with pytest.raises(ValueError):
        pm.plos_3gpp("UMa", 100.0, 400.0)
    with pytest.raises(ValueError):
        pm.plos_3gpp("XYZ", 100.0, 100.0)


# Cylinders


def test_adaptive_simpson_is_exact_on_cubics_and_accurate_on_smooth_functions():
    assert_allclose(pm.adaptive_simpson(lambda x: x**3 - 2 * x, 0.0, 2.0), 0.0, atol=1e-12)
    assert_allclose(pm.adaptive_simpson(math.sin, 0.0, math.pi), 2.0, rtol=1e-9)


def test_cylinder_equal_heights_closed_form():
    params = pm.CylinderParams(r_o=10.0, lambda_o=1e-4, mu_o=math.log(20.0), sigma_o=0.5)
    r, h = 500.0, 25.0
    g = pm.lognormal_tail(h, params.mu_o, params.sigma_o)
    expected = math.exp(-2 * params.r_o * params.lambda_o * (r - 0.5 * math.pi * params.r_o) * g)
    assert_allclose(pm.plos_cylinder(params, r, h, h), expected, rtol=1e-10)


def test_cylinder_sloped_ray_matches_scipy_quad():
    params = pm.CylinderParams(r_o=8.0, lambda_o=2e-4, mu_o=math.log(15.0), sigma_o=0.6)
    r, h1, h2 = 700.0, 1.5, 120.0
    upper = r - 0.5 * math.pi * params.r_o
    integral, _ = integrate.quad(
        lambda x: pm.lognormal_tail(x / r * (h2 - h1) + h1, params.mu_o, params.sigma_o), 0.0, upper,
        epsabs=1e-12,
    )
    assert_allclose(
        pm.plos_cylinder(params, r, h1, h2), math.exp(-2 * params.r_o * params.lambda_o * integral), rtol=1e-8
    )


def test_cylinder_short_links_are_clear():
    params = pm.CylinderParams(r_o=10.0, lambda_o=1e-3, mu_o=3.0, sigma_o=0.5)
    assert pm.plos_cylinder(params, 10.0, 1.5, 50.0) == 1.0


# Dispatch


def test_model_id_parsing():
    assert pm.PlosModelId.parse(" First-Building ") is pm.PlosModelId.FIRST_BUILDING
    with pytest.raises(ValueError):
        pm.PlosModelId.parse("nosuch")


def test_dispatcher_requires_model_specific_inputs():
    link = LinkGeometry.from_angles((0.0, 0.0, 1.5), 100.0, 30.0)
    with pytest.raises(ValueError):
        pm.plos("fresnel", URBAN, link)
    with pytest.raises(ValueError):
        pm.plos("gpp3", URBAN, link)
    with pytest.raises(ValueError):
        pm.plos("cylinder", URBAN, link)
    with pytest.raises(ValueError):
        pm.plos("scurve3", Environment(0.2, 400, 10), link)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(ENV_IDS), st.floats(5, 89), st.floats(0, 360), st.floats(30, 300))
def test_every_model_returns_a_probability(env_id, theta, phi, h):
    env = get_environment(env_id)
    link = LinkGeometry.from_angles((0.0, 0.0, 1.5), h, theta, phi)
    cyl = pm.CylinderParams(10.0, 1e-4, math.log(20.0), 0.5)
    for model in pm.PlosModelId:
        p = pm.plos(model, env, link, wavelength=0.1, scenario="UMa", cylinder=cyl)
        assert 0.0 <= p <= 1.0


def test_theta_curve_placements():
    grid = [20.0, 45.0, 70.0]
    fh = pm.plos_theta_curve("itu", URBAN, grid, h_tx=100.0)
    fr = pm.plos_theta_curve("itu", URBAN, grid, placement="fixed_range", r_fixed=300.0, h_tx=100.0)
    assert fh.shape == fr.shape == (3,)
    with pytest.raises(ValueError):
        pm.plos_theta_curve("itu", URBAN, [90.0], placement="fixed_range", r_fixed=300.0)
    with pytest.raises(ValueError):
        pm.plos_theta_curve("itu", URBAN, grid, placement="fixed_range")
