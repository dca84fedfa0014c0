"""Closed-form link quantities: covariances, SINRs, combiner and MMSE identities.

Assignment matrices are passed as their diagonals ``a_T`` / ``a_R`` (length-N
real vectors). Every evaluator accepts relaxed entries in [0, 1] as well as
binary ones.

The target response matrix is ``G0 = g0 g0^T``, with a plain transpose
rather than a Hermitian one. The monostatic round trip applies the same steering vector on
the way out and on the way back; writing ``g0 g0^H`` here is a classic bug.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import DegenerateCombinerError, NoReceiveAntennasError

# Entries of a_R / a_T at or below this value are treated as inactive when a
# support is needed (combiner, precoder variables).
SUPPORT_TOL = 1e-12


@dataclasses.dataclass
class BeamformerSet:
    """Precoders ``v`` (K, N), sensing precoder ``v0`` (N,), combiner ``u`` (N,)."""

    v: np.ndarray
    v0: np.ndarray
    u: np.ndarray

    @classmethod
    def zeros(cls, K: int, N: int) -> "BeamformerSet":
        return cls(np.zeros((K, N), complex), np.zeros(N, complex), np.zeros(N, complex))

    def copy(self) -> "BeamformerSet":
        return BeamformerSet(self.v.copy(), self.v0.copy(), self.u.copy())

    def replace(self, **changes) -> "BeamformerSet":
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass
class WmmseState:
    c: np.ndarray
    e: np.ndarray
    w: np.ndarray


@dataclasses.dataclass
class CovarianceBundle:
    R_x: np.ndarray
    R_c: np.ndarray
    R_0: np.ndarray


def target_matrix(g0: np.ndarray) -> np.ndarray:
    return np.outer(g0, g0)


def covariances(a_T, beams: BeamformerSet) -> CovarianceBundle:
    a = np.asarray(a_T, float)
    V = beams.v * a                      # rows: A_T v_k
    x0 = a * beams.v0
    R_c = V.T @ V.conj()
    R_0 = np.outer(x0, x0.conj())
    return CovarianceBundle(R_x=R_c + R_0, R_c=R_c, R_0=R_0)


def _gains(scenario, a_T, beams):
    """Matrix of h_k^H A_T v_l (K x K) and vector of h_k^H A_T v0 (K,)."""
    a = np.asarray(a_T, float)
    hA = scenario.h.conj() * a
    return hA @ beams.v.T, hA @ beams.v0


def comm_sinrs(scenario, a_T, beams) -> np.ndarray:
    G, g0 = _gains(scenario, a_T, beams)
    p = np.abs(G) ** 2
    signal = np.diag(p).copy()
    interference = p.sum(axis=1) - signal + np.abs(g0) ** 2
    return signal / (interference + scenario.params.sigma_k2)


def comm_sinr(k: int, scenario, a_T, beams) -> float:
    return float(comm_sinrs(scenario, a_T, beams)[k])


def rates(scenario, a_T, beams) -> np.ndarray:
    return np.log2(1.0 + comm_sinrs(scenario, a_T, beams))


def sum_rate(scenario, a_T, beams) -> float:
    return float(rates(scenario, a_T, beams).sum())


def interference_matrix(scenario, a_T, beams) -> np.ndarray:
    """sigma_0^2 G0 R_c G0^H + H_SI R_x H_SI^H + sigma_r^2 I (before the A_R sandwich)."""
    p = scenario.params
    cov = covariances(a_T, beams)
    G0 = target_matrix(scenario.g0)
    H = scenario.H_SI
    M = p.sigma_02 * (G0 @ cov.R_c @ G0.conj().T) + H @ cov.R_x @ H.conj().T
    M[np.diag_indices_from(M)] += p.sigma_r2
    return 0.5 * (M + M.conj().T)


def sensing_terms(scenario, a_T, a_R, beams):
    """Numerator and denominator of the sensing SINR."""
    p = scenario.params
    a_T = np.asarray(a_T, float)
    a_R = np.asarray(a_R, float)
    z = a_R * beams.u                      # A_R u
    echo = (z.conj() @ scenario.g0) * (scenario.g0 @ (a_T * beams.v0))
    num = p.B * p.sigma_02 * abs(echo) ** 2
    den = float(np.real(z.conj() @ interference_matrix(scenario, a_T, beams) @ z))
    return num, den


def sensing_sinr(scenario, a_T, a_R, beams) -> float:
    num, den = sensing_terms(scenario, a_T, a_R, beams)
    if not den > 0.0:
        raise DegenerateCombinerError("sensing SINR denominator is zero for this combiner")
    return float(num / den)


def receive_support(a_R) -> np.ndarray:
    return np.flatnonzero(np.asarray(a_R, float) > SUPPORT_TOL)


def optimal_combiner(scenario, a_T, a_R, beams, normalize: bool = True) -> np.ndarray:
    """Maximizer of the sensing SINR over ``u`` (MVDR-type solution).

    Solved on the receive support S: with D = diag(a_R[S]) the quotient is a
    generalized Rayleigh quotient in z = D u_S, maximized by
    z = M_SS^{-1} g0_S, hence u_S = D^{-1} M_SS^{-1} g0_S. Entries off the
    support are zero. The result is scaled to unit norm when ``normalize``
    (the SINR is invariant to the scale of u).
    """
    a_R = np.asarray(a_R, float)
    S = receive_support(a_R)
    if S.size == 0:
        raise NoReceiveAntennasError("no receive antennas in the assignment")
    M = interference_matrix(scenario, a_T, beams)
    z = np.linalg.solve(M[np.ix_(S, S)], scenario.g0[S])
    u = np.zeros(scenario.N, complex)
    u[S] = z / a_R[S]
    if normalize:
        nrm = np.linalg.norm(u)
        if nrm > 0:
            u /= nrm
    return u


def mse_and_weight(k: int, scenario, a_T, beams):
    """Optimal decoding coefficient, the resulting MSE and its weight for UE k."""
    st = update_wmmse(scenario, a_T, beams)
    return complex(st.c[k]), float(st.e[k]), float(st.w[k])


def mse(scenario, a_T, beams, c) -> np.ndarray:
    """Decoding MSE e_k for arbitrary decoding coefficients ``c``."""
    G, g0 = _gains(scenario, a_T, beams)
    total = np.sum(np.abs(G) ** 2, axis=1) + np.abs(g0) ** 2 + scenario.params.sigma_k2
    c = np.asarray(c)
    return np.abs(c) ** 2 * total - 2.0 * np.real(np.conj(c) * np.diag(G)) + 1.0


def update_wmmse(scenario, a_T, beams) -> WmmseState:
    K = scenario.K
    if K == 0:
        return WmmseState(np.zeros(0, complex), np.zeros(0), np.zeros(0))
    G, g0 = _gains(scenario, a_T, beams)
    total = np.sum(np.abs(G) ** 2, axis=1) + np.abs(g0) ** 2 + scenario.params.sigma_k2
    d = np.diag(G)
    c = d / total
    # at the optimal c the MSE collapses to (interference + noise) / total
    rest = np.sum(np.abs(G) ** 2 * (1.0 - np.eye(K)), axis=1) + np.abs(g0) ** 2 + scenario.params.sigma_k2
    e = rest / total
    return WmmseState(c=c, e=e, w=1.0 / e)


def weighted_mse_objective(scenario, a_T, beams, state: WmmseState) -> float:
    """sum_k (w_k e_k - log w_k) with e_k evaluated at the stored coefficients."""
    e = mse(scenario, a_T, beams, state.c)
    return float(np.sum(state.w * e - np.log(state.w)))
