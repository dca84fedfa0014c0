import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from flexisac import signal_model as sm
from flexisac.errors import DegenerateCombinerError, NoReceiveAntennasError
from flexisac.scenario import ArrayGeometry, Scenario, SystemParams

from instances import instance
from oracles import direct_comm_sinr, direct_covariances, direct_mse, direct_sensing_terms


def manual(h, g0, H_SI=None, **params):
    h = np.atleast_2d(np.asarray(h, complex)) if len(h) else np.zeros((0, len(g0)), complex)
    N = len(g0)
    p = SystemParams(K=h.shape[0], N_act=N, **params)
    geo = ArrayGeometry(N, 1, 0.05, 0.05, 12.5)
    H = np.zeros((N, N), complex) if H_SI is None else np.asarray(H_SI, complex)
    return Scenario(geo, p, np.zeros((h.shape[0], 3)), np.zeros(3), h, np.asarray(g0, complex), H)


def test_covariances_zero_beams():
    cov = sm.covariances(np.ones(3), sm.BeamformerSet.zeros(2, 3))
    assert not np.any(cov.R_x) and not np.any(cov.R_c) and not np.any(cov.R_0)


def test_covariances_identity_case():
    beams = sm.BeamformerSet(np.array([[1.0, 0, 0]], complex), np.zeros(3, complex), np.zeros(3, complex))
    cov = sm.covariances(np.ones(3), beams)
    np.testing.assert_array_equal(cov.R_x, np.diag([1.0, 0, 0]))
    assert np.trace(cov.R_x).real == 1.0


def test_covariances_match_dense_oracle():
    rng = np.random.default_rng(0)
    for fractional in (False, True):
        sc, a_T, _, b = instance(rng, fractional=fractional)
        cov = sm.covariances(a_T, b)
        R_x, R_c = direct_covariances(a_T, b.v, b.v0)
        np.testing.assert_allclose(cov.R_x, R_x, atol=1e-14)
        np.testing.assert_allclose(cov.R_c, R_c, atol=1e-14)
        norms = sum(np.linalg.norm(a_T * vk) ** 2 for vk in b.v) + np.linalg.norm(a_T * b.v0) ** 2
        assert np.trace(cov.R_x).real == pytest.approx(norms, rel=1e-12)


def test_comm_sinr_unit_case():
    sc = manual([[1.0, 0.0]], [1.0, 1.0], sigma_k2=1.0)
    beams = sm.BeamformerSet(np.array([[1.0, 0.0]], complex), np.zeros(2, complex), np.zeros(2, complex))
    assert sm.comm_sinr(0, sc, np.ones(2), beams) == pytest.approx(1.0)
    assert sm.sum_rate(sc, np.ones(2), beams) == pytest.approx(1.0)
    beams.v[:] = 0
    assert sm.comm_sinr(0, sc, np.ones(2), beams) == 0.0


def test_sum_rate_exact_logs():
    # two orthogonal users with SINRs 1 and 3
    sc = manual([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0], sigma_k2=1.0)
    v = np.array([[1.0, 0.0], [0.0, np.sqrt(3.0)]], complex)
    beams = sm.BeamformerSet(v, np.zeros(2, complex), np.zeros(2, complex))
    np.testing.assert_allclose(sm.comm_sinrs(sc, np.ones(2), beams), [1.0, 3.0])
    assert sm.sum_rate(sc, np.ones(2), beams) == pytest.approx(3.0)
    beams.v[:] = 0
    assert sm.sum_rate(sc, np.ones(2), beams) == 0.0


def test_comm_sinr_matches_scalar_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        sc, a_T, _, b = instance(rng, fractional=bool(rng.integers(2)))
        for k in range(sc.K):
            assert sm.comm_sinr(k, sc, a_T, b) == pytest.approx(direct_comm_sinr(sc, a_T, b.v, b.v0, k), rel=1e-10)
        assert sm.sum_rate(sc, a_T, b) >= max(sm.rates(sc, a_T, b), default=0.0)


def test_sensing_sinr_two_antenna_case():
    B, s0, sr = 100, 1.0, 1e-11
    sc = manual([], [1.0, 1.0], B=B, sigma_02=s0, sigma_r2=sr)
    beams = sm.BeamformerSet(np.zeros((0, 2), complex), np.array([1.0, 0], complex), np.array([0, 1.0], complex))
    got = sm.sensing_sinr(sc, [1.0, 0.0], [0.0, 1.0], beams)
    assert got == pytest.approx(B * s0 / sr, rel=1e-12)
    beams.v0[:] = 0
    assert sm.sensing_sinr(sc, [1.0, 0.0], [0.0, 1.0], beams) == 0.0


def test_sensing_uses_plain_transpose():
    # with a complex g0 the echo is u^H A_R g0 g0^T A_T v0, not g0 g0^H
    g0 = np.exp(1j * np.array([0.3, 1.1]))
    sc = manual([], g0, sigma_r2=1.0, B=1)
    beams = sm.BeamformerSet(np.zeros((0, 2), complex), np.array([1.0, 0], complex), np.array([0, 1.0], complex))
    num, _ = sm.sensing_terms(sc, [1.0, 0.0], [0.0, 1.0], beams)
    assert num == pytest.approx(abs(g0[1] * g0[0]) ** 2)


def test_sensing_sinr_matches_dense_oracle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        sc, a_T, a_R, b = instance(rng, fractional=bool(rng.integers(2)))
        num, den = sm.sensing_terms(sc, a_T, a_R, b)
        dnum, dden = direct_sensing_terms(sc, a_T, a_R, b.v, b.v0, b.u)
        assert num == pytest.approx(dnum, rel=1e-10)
        assert den == pytest.approx(dden, rel=1e-10)


def test_sensing_sinr_zero_denominator():
    sc = manual([], [1.0, 1.0])
    beams = sm.BeamformerSet(np.zeros((0, 2), complex), np.array([1.0, 0], complex), np.zeros(2, complex))
    with pytest.raises(DegenerateCombinerError):
        sm.sensing_sinr(sc, [1.0, 0.0], [0.0, 1.0], beams)


def test_combiner_is_matched_filter_in_white_noise():
    g0 = np.exp(1j * np.array([0.1, 0.7, 2.0, -1.0]))
    sc = manual([], g0)
    a_R = np.array([0.0, 1.0, 1.0, 1.0])
    beams = sm.BeamformerSet(np.zeros((0, 4), complex), np.array([1.0, 0, 0, 0], complex), np.zeros(4, complex))
    u = sm.optimal_combiner(sc, [1.0, 0, 0, 0], a_R, beams)
    ref = a_R * g0
    assert abs(np.vdot(u, ref)) == pytest.approx(np.linalg.norm(u) * np.linalg.norm(ref), rel=1e-12)


def test_combiner_requires_receive_antennas():
    rng = np.random.default_rng(3)
    sc, a_T, _, b = instance(rng)
    with pytest.raises(NoReceiveAntennasError):
        sm.optimal_combiner(sc, a_T, np.zeros(sc.N), b)


def test_combiner_beats_random_and_matches_eigensolve():
    rng = np.random.default_rng(4)
    for _ in range(5):
        sc, a_T, a_R, b = instance(rng)
        u = sm.optimal_combiner(sc, a_T, a_R, b)
        best = sm.sensing_sinr(sc, a_T, a_R, b.replace(u=u))
        S = sm.receive_support(a_R)
        M = sm.interference_matrix(sc, a_T, b)[np.ix_(S, S)]
        p = sc.params
        scale = p.B * p.sigma_02 * abs(sc.g0 @ (a_T * b.v0)) ** 2
        lam = scipy.linalg.eigh(scale * np.outer(sc.g0[S], sc.g0[S].conj()), M, eigvals_only=True)[-1]
        assert best == pytest.approx(lam, rel=1e-8)
        U = rng.standard_normal((200, sc.N)) + 1j * rng.standard_normal((200, sc.N))
        assert all(sm.sensing_sinr(sc, a_T, a_R, b.replace(u=x)) <= best * (1 + 1e-12) for x in U)


def test_mmse_identity_at_unit_sinr():
    sc = manual([[1.0, 0.0]], [1.0, 1.0], sigma_k2=1.0)
    beams = sm.BeamformerSet(np.array([[1.0, 0.0]], complex), np.zeros(2, complex), np.zeros(2, complex))
    c, e, w = sm.mse_and_weight(0, sc, np.ones(2), beams)
    assert (e, w) == pytest.approx((0.5, 2.0))
    beams.v[:] = 0
    assert sm.mse_and_weight(0, sc, np.ones(2), beams) == (0.0, 1.0, 1.0)


def test_wmmse_update_values():
    sc = manual([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0], sigma_k2=1.0)
    v = np.sqrt(3.0) * np.eye(2, dtype=complex)
    st_ = sm.update_wmmse(sc, np.ones(2), sm.BeamformerSet(v, np.zeros(2, complex), np.zeros(2, complex)))
    np.testing.assert_allclose(st_.w, [4.0, 4.0])
    zero = sm.update_wmmse(sc, np.ones(2), sm.BeamformerSet.zeros(2, 2))
    np.testing.assert_array_equal(zero.c, 0)
    np.testing.assert_array_equal(zero.e, 1)
    np.testing.assert_array_equal(zero.w, 1)


def test_weighted_objective_identity_and_mse_oracle():
    rng = np.random.default_rng(5)
    for _ in range(10):
        sc, a_T, _, b = instance(rng, fractional=True)
        if sc.K == 0:
            continue
        st_ = sm.update_wmmse(sc, a_T, b)
        got = sm.weighted_mse_objective(sc, a_T, b, st_)
        assert got == pytest.approx(float(np.sum(1 + np.log(st_.e))), rel=1e-10, abs=1e-12)
        c = rng.standard_normal(sc.K) + 1j * rng.standard_normal(sc.K)
        e = sm.mse(sc, a_T, b, c)
        for k in range(sc.K):
            assert e[k] == pytest.approx(direct_mse(sc, a_T, b.v, b.v0, c[k], k), rel=1e-10)
        # the stored coefficient minimizes each MSE
        assert np.all(sm.mse(sc, a_T, b, st_.c) <= e + 1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_rate_mse_duality_property(seed):
    rng = np.random.default_rng(seed)
    sc, a_T, _, b = instance(rng, fractional=bool(seed % 2))
    st_ = sm.update_wmmse(sc, a_T, b)
    np.testing.assert_allclose(np.log2(1 / st_.e), sm.rates(sc, a_T, b), rtol=1e-10, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e-3, 1e3))
def test_sensing_sinr_scale_invariant_in_combiner(seed, scale):
    rng = np.random.default_rng(seed)
    sc, a_T, a_R, b = instance(rng)
    s1 = sm.sensing_sinr(sc, a_T, a_R, b)
    s2 = sm.sensing_sinr(sc, a_T, a_R, b.replace(u=b.u * scale * np.exp(1j * seed)))
    assert s2 == pytest.approx(s1, rel=1e-9)
