import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexisac import precoding as pc
from flexisac import qcqp
from flexisac import signal_model as sm
from flexisac.errors import InfeasibleSubproblemError

from instances import drop, random_roles
from oracles import dual_pg_qcqp


def feasible_point(seed, Nx=2, Ny=2, K=2, slack=0.5, **params):
    """Random binary roles and initial beams, gamma_0 set below the achieved SINR."""
    rng = np.random.default_rng(seed)
    sc = drop(seed, Nx, Ny, K, **params)
    a_T, a_R = random_roles(rng, sc.N)
    beams = pc.initial_beamformers(sc, a_T, a_R)
    sinr = sm.sensing_sinr(sc, a_T, a_R, beams)
    sc = sc.with_params(gamma_0=slack * sinr)
    return sc, a_T, a_R, beams


def test_vk_unconstrained_minimizer():
    sc, a_T, a_R, beams = feasible_point(1, Nx=3, K=2)
    # budget and entry bound far from binding
    sc = sc.with_params(gamma_0=1e-300, P_max=1e12)
    wm = sm.update_wmmse(sc, a_T, beams)
    ctx = pc.build_context(sc, a_T, a_R, beams.u, wm)
    v = pc.assemble_and_solve_vk(sc, a_T, a_R, beams.u, beams.v0, wm, ctx=ctx)
    Ups = ctx.Upsilon

    def obj(vv):
        return sum(np.real(vk.conj() @ Ups @ vk) - 2 * np.real(np.vdot(bk, vk)) for vk, bk in zip(vv, ctx.b))

    ref = np.array([np.linalg.pinv(Ups) @ bk for bk in ctx.b])
    assert np.abs(ref).max() < 1e-3 * pc.entry_bound(sc)
    assert obj(v) == pytest.approx(obj(ref), rel=1e-7)


def test_vk_zero_power_budget():
    sc, a_T, a_R, beams = feasible_point(2)
    budget = float(np.sum(np.abs(a_T * beams.v0) ** 2))
    sc = sc.with_params(P_max=budget)
    wm = sm.update_wmmse(sc, a_T, beams)
    v = pc.assemble_and_solve_vk(sc, a_T, a_R, beams.u, beams.v0, wm)
    assert not np.any(v)
    assert sm.sum_rate(sc, a_T, beams.replace(v=v)) == 0.0


def test_vk_reports_infeasible_sensing_precoder():
    sc, a_T, a_R, beams = feasible_point(3)
    wm = sm.update_wmmse(sc, a_T, beams)
    with pytest.raises(InfeasibleSubproblemError):
        pc.assemble_and_solve_vk(sc, a_T, a_R, beams.u, 1e-6 * beams.v0, wm)


@pytest.mark.parametrize("seed", range(4))
def test_vk_matches_dual_oracle(seed):
    sc, a_T, a_R, beams = feasible_point(seed, K=2)
    wm = sm.update_wmmse(sc, a_T, beams)
    ctx = pc.build_context(sc, a_T, a_R, beams.u, wm)
    prob, _, _ = pc.assemble_vk_problem(sc, a_T, ctx, beams.v0)
    sol = qcqp.solve(prob)
    ref, _ = dual_pg_qcqp(prob)
    assert sol.objective_value == pytest.approx(ref, rel=1e-6, abs=1e-9 * abs(ref))


def test_v0_expansion_point_is_feasible_for_linearization():
    for seed in range(5):
        sc, a_T, a_R, beams = feasible_point(seed)
        wm = sm.update_wmmse(sc, a_T, beams)
        ctx = pc.build_context(sc, a_T, a_R, beams.u, wm)
        prob = pc.assemble_v0_problem(sc, a_T, ctx, beams.v, beams.v0)
        x = qcqp.to_real(beams.v0[ctx.support])
        vals = prob.constraint_values(x)
        scale = sc.params.gamma_0 * max(sc.params.sigma_r2 * ctx.rx_noise, 1e-300)
        assert vals[0] <= 1e-9 * scale * 1e6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.05, 0.95))
def test_v0_update_keeps_original_constraint(seed, slack):
    sc, a_T, a_R, beams = feasible_point(seed % 10_000, Nx=3, K=1 + seed % 3, slack=slack)
    wm = sm.update_wmmse(sc, a_T, beams)
    v0 = pc.assemble_and_solve_v0(sc, a_T, a_R, beams.u, beams.v, wm, beams.v0)
    new = beams.replace(v0=v0)
    g = sc.params.gamma_0
    assert sm.sensing_sinr(sc, a_T, a_R, new) >= g * (1 - 1e-6)
    power = np.trace(sm.covariances(a_T, new).R_x).real
    assert power <= sc.params.P_max * (1 + 1e-9)


def test_v0_without_users():
    sc, a_T, a_R, beams = feasible_point(4, K=0)
    wm = sm.update_wmmse(sc, a_T, beams)
    v0 = pc.assemble_and_solve_v0(sc, a_T, a_R, beams.u, beams.v, wm, beams.v0)
    assert sm.sensing_sinr(sc, a_T, a_R, beams.replace(v0=v0)) >= sc.params.gamma_0 * (1 - 1e-6)


def test_block_descent_of_weighted_mse():
    for seed in range(6):
        sc, a_T, a_R, beams = feasible_point(seed, Nx=3, K=2)
        values = []
        for _ in range(4):
            beams.u = sm.optimal_combiner(sc, a_T, a_R, beams)
            wm = sm.update_wmmse(sc, a_T, beams)
            values.append(sm.weighted_mse_objective(sc, a_T, beams, wm))
            beams.v = pc.assemble_and_solve_vk(sc, a_T, a_R, beams.u, beams.v0, wm, v_hint=beams.v)
            values.append(sm.weighted_mse_objective(sc, a_T, beams, wm))
            beams.v0 = pc.assemble_and_solve_v0(sc, a_T, a_R, beams.u, beams.v, wm, beams.v0)
            values.append(sm.weighted_mse_objective(sc, a_T, beams, wm))
        steps = np.diff(values)
        assert np.all(steps <= 1e-6 * np.abs(values[:-1]) + 1e-12)


def test_closed_form_design_is_certified_and_consistent():
    for seed in range(5):
        sc, a_T, a_R, _ = feasible_point(seed, Nx=3, K=2, slack=0.2)
        beams = pc.closed_form_design(sc, a_T, a_R)
        tx, rx = list(np.flatnonzero(a_T)), list(np.flatnonzero(a_R))
        _, _, p0, rate = pc.design_parameters(sc, tx, rx)
        if beams is None:
            assert p0 is None
            continue
        # strictly feasible, so a polish started from it never triggers restoration
        assert sm.sensing_sinr(sc, a_T, a_R, beams) >= sc.params.gamma_0
        assert np.trace(sm.covariances(a_T, beams).R_x).real == pytest.approx(sc.params.P_max, rel=1e-12)
        assert sm.sum_rate(sc, a_T, beams) == pytest.approx(rate, rel=1e-9)


def test_design_comm_rate_bounds_design_rate():
    sc, a_T, a_R, _ = feasible_point(2, Nx=3, K=2, slack=0.2)
    tx, rx = list(np.flatnonzero(a_T)), list(np.flatnonzero(a_R))
    rate = pc.design_parameters(sc, tx, rx)[3]
    # all power on the users and no sensing leakage can only help them
    assert pc.design_comm_rate(sc, tx) >= rate
    assert pc.design_comm_rate(sc, []) == 0.0


def test_design_reports_unreachable_threshold():
    sc, a_T, a_R, _ = feasible_point(0)
    sc = sc.with_params(gamma_0=1e30)
    assert pc.closed_form_design(sc, a_T, a_R) is None
    with pytest.raises(InfeasibleSubproblemError):
        pc.restore_sensing(sc, a_T, a_R, pc.initial_beamformers(sc, a_T, a_R))


def test_initial_beamformers_respect_power():
    for seed in range(5):
        sc, a_T, a_R, beams = feasible_point(seed, Nx=3, K=3)
        assert np.trace(sm.covariances(a_T, beams).R_x).real <= sc.params.P_max * (1 + 1e-12)
        assert np.all(beams.v[:, a_T == 0] == 0) and np.all(beams.v0[a_T == 0] == 0)


def test_restore_sensing_meets_threshold():
    sc, a_T, a_R, beams = feasible_point(7, slack=1.5)
    v0, u = pc.restore_sensing(sc, a_T, a_R, beams)
    silent = sm.BeamformerSet(np.zeros_like(beams.v), v0, u)
    assert sm.sensing_sinr(sc, a_T, a_R, silent) >= sc.params.gamma_0


def test_entry_bound_is_sqrt_power():
    sc = drop(0, K=1, P_max=9.0)
    assert pc.entry_bound(sc) == 3.0
