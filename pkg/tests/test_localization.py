import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from a2g import localization as loc

MODEL = loc.RssiModel(p_ref=-30.0, d_ref=1.0, n_p=3.0)
POSES = [(-40.0, -40.0, 30.0), (40.0, -35.0, 30.0), (0.0, 45.0, 30.0), (35.0, 30.0, 25.0)]
REGION = loc.SearchRegion(-50, 50, -50, 50)


@pytest.mark.parametrize("n_p,expected", [(2.0, -20.0), (4.0, -40.0)])
def test_forward_decade_rule(n_p, expected):
    m = loc.RssiModel(0.0, 2.0, n_p)
    assert loc.rssi_forward(m, (0.0, 0.0), (0.0, 2.0, 0.0)) == 0.0
    assert_allclose(loc.rssi_forward(m, (0.0, 0.0, 0.0), (20.0, 0.0, 0.0)), expected)


def test_forward_clamps_inside_reference_distance(caplog):
    with caplog.at_level(logging.WARNING, logger="a2g.localization"):
        assert loc.rssi_forward(loc.RssiModel(-10.0, 5.0), (0, 0, 0), (1, 0, 0)) == -10.0
    assert "clamped" in caplog.text


def test_validation():
    with pytest.raises(ValueError):
        loc.RssiModel(0.0, 0.0)
    with pytest.raises(ValueError):
        loc.RssiMeasurement((0, 0, 0), -50.0, 0.0)
    with pytest.raises(ValueError):
        loc.mle_localize(MODEL, [], REGION, 1.0)
    with pytest.raises(ValueError):
        loc.SearchRegion(1, 0, 0, 1)
    with pytest.raises(ValueError):
        loc.mle_localize(MODEL, loc.synthesize_measurements(MODEL, (0, 0, 0), POSES, 1.0), REGION, 0.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(-45, 45), st.floats(-45, 45))
def test_noiseless_recovery_within_one_cell(x, y):
    ms = loc.synthesize_measurements(MODEL, (x, y, 0.0), POSES, 2.0)
    res = loc.mle_localize(MODEL, ms, REGION, 0.5)
    assert abs(res.position[0] - x) <= 0.5 and abs(res.position[1] - y) <= 0.5


def test_single_measurement_gives_a_ring_of_maxima():
    ms = loc.synthesize_measurements(MODEL, (20.0, 0.0, 0.0), [(0.0, 0.0, 30.0)], 2.0)
    res = loc.mle_localize(MODEL, ms, REGION, 1.0)
    gx, gy = np.meshgrid(res.xs, res.ys, indexing="ij")
    near_max = res.likelihood_map > res.loglik - 1e-3
    ranges = np.sqrt(gx[near_max] ** 2 + gy[near_max] ** 2 + 30.0**2)
    assert near_max.sum() > 20
    assert_allclose(ranges, math.hypot(20.0, 30.0), atol=0.3)


def test_ties_go_to_the_smallest_grid_index():
    # two symmetric poses: mirror images about x = 0 score identically
    ms = loc.synthesize_measurements(MODEL, (10.0, 0.0, 0.0), [(0.0, -30.0, 20.0), (0.0, 30.0, 20.0)], 2.0)
    res = loc.mle_localize(MODEL, ms, REGION, 1.0)
    assert res.position[0] == -10.0


def test_result_does_not_depend_on_chunking():
    rng = np.random.default_rng(0)
    ms = loc.synthesize_measurements(MODEL, (3.0, -7.0, 0.0), POSES, 6.0, rng)
    a = loc.mle_localize(MODEL, ms, REGION, 1.0)
    b = loc.mle_localize(MODEL, ms, REGION, 1.0, chunk_rows=7)
    assert a.position == b.position
    assert np.array_equal(a.likelihood_map, b.likelihood_map)


def test_constant_offset_and_sigma_scaling_properties():
    rng = np.random.default_rng(4)
    ms = loc.synthesize_measurements(MODEL, (12.0, 8.0, 0.0), POSES, 6.0, rng)
    base = loc.mle_localize(MODEL, ms, REGION, 1.0)

    shifted_model = loc.RssiModel(MODEL.p_ref + 7.5, MODEL.d_ref, MODEL.n_p)
    shifted = [loc.RssiMeasurement(m.uav_position, m.rho + 7.5, m.sigma) for m in ms]
    assert loc.mle_localize(shifted_model, shifted, REGION, 1.0).position == base.position

    doubled = [loc.RssiMeasurement(m.uav_position, m.rho, 2 * m.sigma) for m in ms]
    res = loc.mle_localize(MODEL, doubled, REGION, 1.0)
    assert res.position == base.position
    assert_allclose(res.likelihood_map, base.likelihood_map / 4)


def test_refining_resolution_never_worsens_noiseless_error():
    truth = (13.3, -21.7, 0.0)
    ms = loc.synthesize_measurements(MODEL, truth, POSES, 2.0)
    errors = []
    for res in (4.0, 2.0, 1.0, 0.5, 0.25):
        p = loc.mle_localize(MODEL, ms, REGION, res).position
        errors.append(math.hypot(p[0] - truth[0], p[1] - truth[1]))
    assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))


def test_survey_trajectory_covers_the_square():
    poses = loc.survey_trajectory(50, half_width=60.0, altitude=30.0)
    assert poses.shape == (50, 3)
    assert_allclose(poses[:, 0].min(), -60.0)
    assert_allclose(poses[:, 0].max(), 60.0)
    assert_allclose([poses[:, 1].min(), poses[:, 1].max()], [-60.0, 60.0])
    assert np.all(poses[:, 2] == 30.0)


def test_measurement_csv_round_trip_and_errors():
    text = "x,y,z,rssi_dbm,sigma_db\n1,2,30,-70.5,6\n-3,4,30,-72,6\n"
    ms = loc.read_measurements_csv(text)
    assert ms[0] == loc.RssiMeasurement((1.0, 2.0, 30.0), -70.5, 6.0)
    with pytest.raises(ValueError, match="columns"):
        loc.read_measurements_csv("x,y,rssi\n1,2,3\n")
    with pytest.raises(ValueError, match="line 3"):
        loc.read_measurements_csv("x,y,z,rssi_dbm,sigma_db\n1,2,3,4,5\n1,2,3,oops,5\n")


def test_map_csv_has_one_row_per_cell():
    ms = loc.synthesize_measurements(MODEL, (0.0, 0.0, 0.0), POSES, 2.0)
    res = loc.mle_localize(MODEL, ms, loc.SearchRegion(0, 2, 0, 1), 1.0)
    lines = res.map_to_csv().splitlines()
    assert lines[0] == "x,y,loglik"
    assert len(lines) == 1 + 3 * 2
