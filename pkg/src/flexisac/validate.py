"""Self-contained invariant checks behind ``flexisac validate``.

These are cheap randomized cross-checks against independent computations
(dense eigensolves, scipy's SLSQP, brute force). The full pytest suite goes
further; this module exists so an installed package can check itself.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.optimize

from . import ao
from . import qcqp
from . import signal_model as sm
from .scenario import ArrayGeometry, SystemParams, sample_drop


def _random_instance(rng, N=8, K=2):
    p = SystemParams(K=K, N_act=N, gamma_0=1.0)
    geo = ArrayGeometry(4, N // 4, p.wavelength / 2, p.wavelength / 2, 12.5)
    sc = sample_drop(int(rng.integers(2**31)), geo, p)
    roles = rng.permutation(np.r_[np.ones(N // 2), 2 * np.ones(N - N // 2)])
    a_T = (roles == 1).astype(float)
    a_R = (roles == 2).astype(float)
    cn = lambda *s: rng.standard_normal(s) + 1j * rng.standard_normal(s)
    beams = sm.BeamformerSet(cn(K, N) * 0.3, cn(N) * 0.3, cn(N))
    return sc, a_T, a_R, beams


def check_combiner(rng, count):
    worst = 0.0
    for _ in range(count):
        sc, a_T, a_R, beams = _random_instance(rng)
        u = sm.optimal_combiner(sc, a_T, a_R, beams)
        got = sm.sensing_sinr(sc, a_T, a_R, beams.replace(u=u))
        S = sm.receive_support(a_R)
        M = sm.interference_matrix(sc, a_T, beams)[np.ix_(S, S)]
        num, _ = sm.sensing_terms(sc, a_T, a_R, beams.replace(u=u))
        scale = sc.params.B * sc.params.sigma_02 * abs(sc.g0 @ (a_T * beams.v0)) ** 2
        g = sc.g0[S]
        A = scale * np.outer(g, g.conj())
        best = float(scipy.linalg.eigh(A, M, eigvals_only=True)[-1])
        worst = max(worst, abs(got - best) / best)
    return worst < 1e-8, f"max relative gap to generalized eigenvalue {worst:.2e}"


def check_duality(rng, count):
    worst = 0.0
    for _ in range(count):
        sc, a_T, _, beams = _random_instance(rng)
        st = sm.update_wmmse(sc, a_T, beams)
        worst = max(worst, float(np.max(np.abs(np.log2(1 / st.e) - sm.rates(sc, a_T, beams)))))
    return worst < 1e-10, f"max |log2(1/e) - rate| {worst:.2e}"


def check_qcqp(rng, count):
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(2, 6))
        L = rng.standard_normal((n, n))
        P0 = L @ L.T + 0.1 * np.eye(n)
        q0 = rng.standard_normal(n)
        ineqs = []
        for _ in range(2):
            B = rng.standard_normal((n, n))
            ineqs.append((B @ B.T / n, 0.3 * rng.standard_normal(n), -1.0))
        prob = qcqp.QcqpProblem(n=n, P0=P0, q0=q0, ineqs=ineqs)
        sol = qcqp.solve(prob)
        cons = [{"type": "ineq", "fun": (lambda x, P=P, q=q, r=r: -(x @ P @ x + 2 * q @ x + r))}
                for P, q, r in ineqs]
        ref = scipy.optimize.minimize(prob.objective, np.zeros(n), constraints=cons, method="SLSQP",
                                      options={"ftol": 1e-12, "maxiter": 500})
        gap = (sol.objective_value - ref.fun) / max(1.0, abs(ref.fun))
        worst = max(worst, gap)
    return worst < 1e-6, f"worst objective excess over SLSQP {worst:.2e}"


def check_trial(rng):
    p = SystemParams(K=2, N_act=4, gamma_0=10 ** 0.5)
    geo = ArrayGeometry(3, 2, p.wavelength / 2, p.wavelength / 2, 12.5)
    sc = sample_drop(int(rng.integers(2**31)), geo, p)
    res = ao.run_ao(sc, ao.AoConfig(T_max=15))
    bad = res.certify()
    return not bad, f"status {res.status.value}, rate {res.sum_rate:.3f}" + (f", {bad}" if bad else "")


def run_checks(seed: int = 0, quick: bool = True):
    rng = np.random.default_rng(seed)
    n = 10 if quick else 50
    return [
        ("combiner optimality", *check_combiner(rng, n)),
        ("rate/MSE duality", *check_duality(rng, 2 * n)),
        ("convex QCQP vs SLSQP", *check_qcqp(rng, n)),
        ("end-to-end certification", *check_trial(rng)),
    ]
