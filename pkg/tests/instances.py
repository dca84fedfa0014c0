"""Random problem instances shared by the tests."""

import numpy as np

from flexisac import qcqp
from flexisac import signal_model as sm
from flexisac.scenario import ArrayGeometry, SystemParams, sample_drop


def drop(seed, Nx=4, Ny=2, K=2, **params):
    p = SystemParams(K=K, N_act=Nx * Ny, **params)
    geo = ArrayGeometry(Nx, Ny, p.wavelength / 2, p.wavelength / 2, 12.5)
    return sample_drop(seed, geo, p)


def cnormal(rng, *shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def random_beams(rng, K, N, scale=0.3):
    return sm.BeamformerSet(cnormal(rng, K, N, scale=scale), cnormal(rng, N, scale=scale), cnormal(rng, N))


def random_roles(rng, N):
    """Binary disjoint (a_T, a_R) with at least one antenna in each role."""
    roles = rng.integers(0, 3, N)
    roles[0], roles[1] = 1, 2
    roles = rng.permutation(roles)
    return (roles == 1).astype(float), (roles == 2).astype(float)


def random_fractional(rng, N):
    """Relaxed (a_T, a_R) in the box with a_T + a_R <= 1."""
    a = rng.uniform(0, 1, (2, N))
    a /= np.maximum(1.0, a.sum(axis=0))
    return a[0], a[1]


def instance(rng, N_max=16, K_max=3, fractional=False):
    Nx = int(rng.integers(2, 5))
    Ny = int(rng.integers(1, N_max // Nx + 1))
    K = int(rng.integers(0, K_max + 1))
    sc = drop(int(rng.integers(2**31)), Nx, Ny, K)
    a_T, a_R = random_fractional(rng, sc.N) if fractional else random_roles(rng, sc.N)
    return sc, a_T, a_R, random_beams(rng, K, sc.N)


def random_problem(rng, n=None):
    n = int(rng.integers(1, 7)) if n is None else n
    L = rng.standard_normal((n, n))
    P0 = L @ L.T + 0.3 * np.eye(n)
    ineqs = []
    for _ in range(int(rng.integers(0, 3))):
        B = rng.standard_normal((n, n))
        ineqs.append((B @ B.T / n, 0.3 * rng.standard_normal(n), -1.0))
    lin = [(rng.standard_normal(n), 0.5)] if rng.random() < 0.5 else []
    box = (-0.8 * np.ones(n), 0.8 * np.ones(n)) if rng.random() < 0.5 else None
    return qcqp.QcqpProblem(n=n, P0=P0, q0=2 * rng.standard_normal(n), ineqs=ineqs, linear_ineqs=lin, box=box)


def infeasible_problems():
    out = []
    # x^2 + 1 <= 0
    out.append(qcqp.QcqpProblem(n=1, P0=np.eye(1), q0=np.zeros(1), ineqs=[(np.eye(1), np.zeros(1), 1.0)]))
    for n in range(1, 4):
        # unit ball and a half-space beyond it
        a = np.ones(n) / np.sqrt(n)
        out.append(qcqp.QcqpProblem(n=n, P0=np.eye(n), q0=np.zeros(n), ineqs=[(np.eye(n), np.zeros(n), -1.0)],
                                    linear_ineqs=[(-a, -1.5)]))
        # two disjoint balls of radius 1 centered at +-2 e_1
        c = np.zeros(n)
        c[0] = 2.0
        balls = [(np.eye(n), -s * c, s * s * 4.0 - 1.0) for s in (1.0, -1.0)]
        out.append(qcqp.QcqpProblem(n=n, P0=np.eye(n), q0=np.zeros(n), ineqs=balls))
    # box incompatible with a linear row
    out.append(qcqp.QcqpProblem(n=2, P0=np.eye(2), q0=np.zeros(2), linear_ineqs=[(np.ones(2), -3.0)],
                                box=(-np.ones(2), np.ones(2))))
    # ball incompatible with a box
    out.append(qcqp.QcqpProblem(n=2, P0=np.eye(2), q0=np.zeros(2), ineqs=[(np.eye(2), np.zeros(2), -0.25)],
                                box=(np.array([1.0, -1.0]), np.array([2.0, 1.0]))))
    # ellipsoid with a nearby but unreachable point
    out.append(qcqp.QcqpProblem(n=2, P0=np.eye(2), q0=np.zeros(2),
                                ineqs=[(np.diag([1.0, 4.0]), np.zeros(2), -1.0)],
                                linear_ineqs=[(np.array([0.0, -1.0]), -0.51)]))
    return out
