"""Independent reference computations used by the test suite.

Nothing here calls into the package's solvers or quadratic-form builders:
the QCQP oracle is projected gradient ascent on the Lagrange dual, and the
link-level evaluators are written with explicit diagonal matrices and loops.
"""

from __future__ import annotations

import itertools

import numpy as np


# ---------------------------------------------------------------------------
# convex QCQP reference

def _all_rows(problem):
    """Every constraint as (P, q, r) with x^T P x + 2 q^T x + r <= 0."""
    n = problem.n
    rows = [(np.asarray(P, float), np.asarray(q, float), float(r)) for P, q, r in problem.ineqs]
    zero = np.zeros((n, n))
    for a, b in problem.linear_ineqs:
        rows.append((zero, 0.5 * np.asarray(a, float), -float(b)))
    if problem.box is not None:
        lo, hi = (np.broadcast_to(np.asarray(v, float), (n,)) for v in problem.box)
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            if np.isfinite(lo[i]):
                rows.append((zero, -0.5 * e, float(lo[i])))
            if np.isfinite(hi[i]):
                rows.append((zero, 0.5 * e, -float(hi[i])))
    return rows


def _dual_point(problem, rows, lam):
    P = problem.P0 + sum(l * R[0] for l, R in zip(lam, rows))
    q = problem.q0 + sum(l * R[1] for l, R in zip(lam, rows))
    r = problem.r0 + sum(l * R[2] for l, R in zip(lam, rows))
    try:
        x = -np.linalg.solve(P, q)
    except np.linalg.LinAlgError:
        return -np.inf, None, None
    g = float(r + q @ x)
    grad = np.array([x @ Pi @ x + 2 * qi @ x + ri for Pi, qi, ri in rows])
    return g, grad, x


def dual_pg_qcqp(problem, restarts: int = 10, iters: int = 4000, seed: int = 0):
    """Projected-gradient ascent on the dual of a convex QCQP.

    Each restart starts from a random nonnegative multiplier vector and uses
    Barzilai-Borwein steps with a backtracking safeguard, projecting onto
    lambda >= 0. By strong duality (Slater) the best dual value equals the
    primal optimum. Multipliers where the Lagrangian Hessian is singular
    count as -inf. Returns (value, x) for the best restart.
    """
    rows = _all_rows(problem)
    rng = np.random.default_rng(seed)
    best = (-np.inf, None)
    for _ in range(restarts):
        lam = rng.exponential(1.0, len(rows))
        g, grad, x = _dual_point(problem, rows, lam)
        if grad is None:
            continue
        step = 1.0 / (1.0 + np.linalg.norm(grad))
        prev = None
        for _ in range(iters):
            if prev is not None:
                s, y = lam - prev[0], grad - prev[1]
                sy = float(s @ y)
                if sy < 0:
                    step = float(s @ s) / -sy
            prev = (lam, grad)
            while True:
                cand = np.maximum(lam + step * grad, 0.0)
                g_new, grad_new, x_new = _dual_point(problem, rows, cand)
                if g_new >= g + 1e-4 * float(grad @ (cand - lam)) or step < 1e-18:
                    break
                step *= 0.5
            moved = np.linalg.norm(cand - lam)
            lam, g, grad, x = cand, g_new, grad_new, x_new
            if moved <= 1e-14 * (1.0 + np.linalg.norm(lam)):
                break
        if g > best[0]:
            best = (g, x)
    return best


# ---------------------------------------------------------------------------
# brute-force assignment enumeration

def enumerate_patterns(N: int, n_act: int, n_t_min: int = 1, n_r_min: int = 1):
    """Every (a_T, a_R) with disjoint supports, role minimums and the budget."""
    for size in range(n_t_min + n_r_min, n_act + 1):
        for active in itertools.combinations(range(N), size):
            for k in range(n_t_min, size - n_r_min + 1):
                for tx in itertools.combinations(active, k):
                    a_T = np.zeros(N)
                    a_R = np.zeros(N)
                    a_T[list(tx)] = 1.0
                    a_R[[n for n in active if n not in tx]] = 1.0
                    yield a_T, a_R


# ---------------------------------------------------------------------------
# link-level quantities written out term by term

def direct_covariances(a_T, v, v0):
    A = np.diag(np.asarray(a_T, float))
    R_c = sum(A @ np.outer(vk, vk.conj()) @ A for vk in v) if len(v) else np.zeros_like(A, complex)
    R_0 = A @ np.outer(v0, v0.conj()) @ A
    return R_c + R_0, R_c


def direct_comm_sinr(scenario, a_T, v, v0, k):
    A = np.diag(np.asarray(a_T, float))
    hk = scenario.h[k]
    sig = abs(hk.conj() @ A @ v[k]) ** 2
    intf = sum(abs(hk.conj() @ A @ v[l]) ** 2 for l in range(len(v)) if l != k)
    intf += abs(hk.conj() @ A @ v0) ** 2
    return sig / (intf + scenario.params.sigma_k2)


def direct_mse(scenario, a_T, v, v0, c, k):
    """E|c^* y_k - s_k|^2 for the linear receiver c."""
    A = np.diag(np.asarray(a_T, float))
    hk = scenario.h[k]
    gains = [hk.conj() @ A @ v[l] for l in range(len(v))] + [hk.conj() @ A @ v0]
    err = 0.0
    for l, gl in enumerate(gains):
        target = 1.0 if l == k else 0.0
        err += abs(np.conj(c) * gl - target) ** 2
    return float(err + abs(c) ** 2 * scenario.params.sigma_k2)


def direct_sensing_operators(scenario, a_T, a_R, v, v0):
    """(e, D) with numerator |u^H e|^2 and denominator u^H D u, from dense matrices."""
    p = scenario.params
    N = scenario.N
    A_T = np.diag(np.asarray(a_T, float))
    A_R = np.diag(np.asarray(a_R, float))
    G0 = scenario.g0[:, None] @ scenario.g0[None, :]
    R_x, R_c = direct_covariances(a_T, v, v0)
    e = np.sqrt(p.B * p.sigma_02) * (A_R @ G0 @ A_T @ v0)
    inner = (p.sigma_02 * G0 @ R_c @ G0.conj().T + scenario.H_SI @ R_x @ scenario.H_SI.conj().T
             + p.sigma_r2 * np.eye(N))
    return e, A_R @ inner @ A_R


def direct_sensing_terms(scenario, a_T, a_R, v, v0, u):
    """(numerator, denominator) of the sensing SINR from dense matrices."""
    e, D = direct_sensing_operators(scenario, a_T, a_R, v, v0)
    return float(abs(u.conj() @ e) ** 2), float(np.real(u.conj() @ D @ u))
