import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexisac import scenario as sc
from flexisac.errors import DegenerateGeometryError, InvalidArgumentError


def test_geometry_row_of_two():
    geo = sc.build_geometry(2, 1, 0.05, 0.05, 12.5)
    np.testing.assert_allclose(geo.positions, [[0, 12.5, 0], [0.05, 12.5, 0]])


def test_geometry_column_of_two():
    geo = sc.build_geometry(1, 2, 0.05, 0.05, 12.5)
    np.testing.assert_allclose(geo.positions, [[0, 12.5, 0], [0, 12.55, 0]])


def test_geometry_row_wrap():
    geo = sc.build_geometry(3, 2, 0.05, 0.05, 12.5)
    assert geo.N == 6
    # fourth antenna (index 3) starts the second row
    np.testing.assert_allclose(geo.positions[3], [0.0, 12.55, 0.0])


@pytest.mark.parametrize("args", [(0, 1, 0.1, 0.1), (2, -1, 0.1, 0.1), (2, 2, 0.0, 0.1), (2, 2, 0.1, -0.5)])
def test_geometry_rejects_bad_arguments(args):
    with pytest.raises(InvalidArgumentError):
        sc.build_geometry(*args, 12.5)


@given(st.integers(1, 7), st.integers(1, 7), st.data())
def test_index_of_inverts_lattice(nx, ny, data):
    geo = sc.build_geometry(nx, ny, 0.07, 0.03, 10.0)
    n = data.draw(st.integers(0, geo.N - 1))
    assert geo.index_of(geo.positions[n]) == n


def test_index_of_rejects_off_lattice_point():
    geo = sc.build_geometry(3, 3, 0.1, 0.1, 10.0)
    with pytest.raises(InvalidArgumentError):
        geo.index_of([0.05, 10.0, 0.0])


def test_comm_channel_single_antenna_value():
    geo = sc.build_geometry(1, 1, 0.05, 0.05, 0.0)
    h = sc.comm_channel(geo, [100.0, 0.0, 0.0], 0.1)
    assert h[0].imag == 0.0
    assert h[0].real == pytest.approx(7.9577e-5, rel=1e-4)


def test_comm_channel_collinear_phase_difference():
    lam = 0.1
    geo = sc.build_geometry(2, 1, 0.03, 0.03, 0.0)
    # UE on the array axis: antenna 2 is closer by exactly dx
    h = sc.comm_channel(geo, [50.0, 0.0, 0.0], lam)
    delta = -0.03
    expected = -2 * math.pi * delta / lam
    got = np.angle(h[1] / h[0])
    assert np.isclose(np.exp(1j * got), np.exp(1j * expected), atol=1e-9)


def test_sensing_channel_gain_value():
    geo = sc.build_geometry(1, 1, 0.05, 0.05, 0.0)
    g0 = sc.sensing_channel(geo, [0.0, 0.0, 100.0], 0.1)
    beta0 = math.sqrt(0.01 / ((4 * math.pi) ** 3 * 100.0 ** 4))
    # frozen from an independent evaluation of the gain formula
    assert beta0 == pytest.approx(2.244839e-7, rel=1e-6)
    assert abs(g0[0]) == pytest.approx(4.737973e-4, rel=1e-6)


def test_sensing_channel_symmetric_target():
    geo = sc.build_geometry(2, 1, 0.05, 0.05, 0.0)
    g0 = sc.sensing_channel(geo, [0.025, 0.0, 40.0], 0.1)
    assert g0[0] == pytest.approx(g0[1], abs=1e-15)


def test_channel_rejects_coincident_point():
    geo = sc.build_geometry(2, 1, 0.05, 0.05, 0.0)
    with pytest.raises(DegenerateGeometryError):
        sc.comm_channel(geo, [0.05, 0.0, 0.0], 0.1)


def test_si_channel_magnitude_from_minus_110_db():
    alpha = float(sc.db_to_linear(-110.0))
    H = sc.si_channel(np.random.default_rng(3), 5, alpha)
    np.testing.assert_allclose(np.abs(H), 3.1623e-6, rtol=1e-4)


def test_si_channel_zero_power_and_reproducible():
    assert np.all(sc.si_channel(np.random.default_rng(0), 3, 0.0) == 0)
    a = sc.si_channel(np.random.default_rng(9), 4, 1e-11)
    b = sc.si_channel(np.random.default_rng(9), 4, 1e-11)
    assert np.array_equal(a, b)


def _desk(K=3, **kw):
    p = sc.SystemParams(K=K, N_act=8, **kw)
    geo = sc.build_geometry(4, 3, p.wavelength / 2, p.wavelength / 2, 12.5)
    return geo, p


def test_sample_drop_deterministic():
    geo, p = _desk()
    a, b = sc.sample_drop(11, geo, p), sc.sample_drop(11, geo, p)
    assert np.array_equal(a.ue_positions, b.ue_positions)
    assert np.array_equal(a.H_SI, b.H_SI)
    assert np.array_equal(a.h, b.h)


def test_sample_drop_inside_coverage_square():
    geo, p = _desk(K=10)
    for seed in range(20):
        s = sc.sample_drop(seed, geo, p)
        pts = np.vstack([s.ue_positions, s.target_position])
        assert np.all(np.abs(pts[:, [0, 2]]) <= 100.0)
        assert np.all(s.ue_positions[:, 1] == p.ue_height)


def test_sample_drop_without_users():
    geo, p = _desk(K=0)
    s = sc.sample_drop(1, geo, p)
    assert s.h.shape == (0, geo.N)
    assert s.g0.shape == (geo.N,) and np.all(np.isfinite(s.g0))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_channel_magnitudes_are_common(seed):
    geo, p = _desk()
    s = sc.sample_drop(seed, geo, p)
    for row in s.h:
        np.testing.assert_allclose(np.abs(row), np.abs(row[0]), rtol=1e-12)
    np.testing.assert_allclose(np.abs(s.g0), np.abs(s.g0[0]), rtol=1e-12)
    # reference antenna carries zero phase
    assert abs(np.angle(s.g0[0])) < 1e-12


def test_scenario_json_round_trip():
    geo, p = _desk()
    s = sc.sample_drop(5, geo, p)
    t = sc.Scenario.from_json(s.to_json())
    assert np.array_equal(t.h, s.h) and np.array_equal(t.H_SI, s.H_SI)
    assert t.params == s.params and t.geometry == s.geometry


def test_subset_keeps_pool_channels():
    geo, p = _desk()
    s = sc.sample_drop(2, geo, p)
    sub_geo = sc.ArrayGeometry(2, 2, geo.dx, geo.dy, geo.bs_height + geo.dy, x_offset=geo.dx)
    idx = [geo.index_of(x) for x in sub_geo.positions]
    sub = s.subset(idx, sub_geo)
    assert np.array_equal(sub.g0, s.g0[idx])
    assert np.array_equal(sub.H_SI, s.H_SI[np.ix_(idx, idx)])
    with pytest.raises(InvalidArgumentError):
        s.subset(idx[::-1], sub_geo)


def test_params_validation():
    with pytest.raises(InvalidArgumentError):
        sc.SystemParams(P_max=0.0)
    with pytest.raises(InvalidArgumentError):
        sc.SystemParams(B=0)
    geo = sc.build_geometry(2, 2, 0.05, 0.05, 12.5)
    with pytest.raises(InvalidArgumentError):
        sc.sample_drop(0, geo, sc.SystemParams(N_act=5))


def test_derive_seed_stable_and_distinct():
    assert sc.derive_seed(0, 1) == sc.derive_seed(0, 1)
    assert len({sc.derive_seed(0, t) for t in range(100)}) == 100
    assert sc.derive_seed(0, 1, 2) != sc.derive_seed(0, 2, 1)
