"""WMMSE-based precoder updates under the sensing and power constraints.

With the receive side fixed (combiner u, assignment a_R) the sensing
constraint SINR_0 >= gamma_0 reads

    B s0 v0^H Q_G v0 - g v0^H Q_SI v0 - g sr ||A_R u||^2
        >= g s0 sum_k v_k^H Q_G v_k + g sum_k v_k^H Q_SI v_k

(s0 = sigma_0^2, sr = sigma_r^2, g = gamma_0) with the rank-one matrices
Q_G = q_G q_G^H, q_G = A_T G0^H A_R u and Q_SI = q_SI q_SI^H,
q_SI = A_T H_SI^H A_R u. For fixed v0 it is a convex quadratic constraint
on the communication precoders. For the sensing precoder the convex term
v0^H Q_G v0 sits on the wrong side and is replaced by its tangent at the
previous iterate, which under-estimates it, so every point accepted by the
linearized problem also satisfies the exact constraint.

Both subproblems are assembled over the real embedding of the precoder
entries on the transmit support and handed to :mod:`flexisac.qcqp`.

Conjugation convention: the linear objective term is -2 Re{b_k^H v_k} with
b_k = w_k c_k A_T h_k, so that b_k^H v_k = w_k conj(c_k) h_k^H A_T v_k
matches the cross term of the decoding MSE exactly.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg as sla
import scipy.optimize

from . import qcqp
from .errors import InfeasibleSubproblemError
from .signal_model import (
    SUPPORT_TOL,
    BeamformerSet,
    WmmseState,
    optimal_combiner,
    sensing_sinr,
    update_wmmse,
)

__all__ = [
    "PrecodingContext",
    "build_context",
    "update_wmmse",
    "assemble_vk_problem",
    "assemble_and_solve_vk",
    "assemble_v0_problem",
    "assemble_and_solve_v0",
    "initial_beamformers",
    "closed_form_design",
    "design_parameters",
    "design_comm_rate",
    "design_sensing_ceiling",
    "max_ratio_direction",
    "restore_sensing",
    "sensing_slack_terms",
    "extend_inactive",
]

# relative headroom over gamma_0 for the closed-form design
DESIGN_SINR_MARGIN = 1e-9


@dataclasses.dataclass
class PrecodingContext:
    Upsilon: np.ndarray        # (N, N)
    b: np.ndarray              # (K, N)
    q_G: np.ndarray            # (N,)   Q_G = q_G q_G^H
    q_SI: np.ndarray           # (N,)   Q_SI = q_SI q_SI^H
    rx_noise: float            # ||A_R u||^2
    support: np.ndarray        # transmit support indices

    @property
    def Q_G(self):
        return np.outer(self.q_G, self.q_G.conj())

    @property
    def Q_SI(self):
        return np.outer(self.q_SI, self.q_SI.conj())


def build_context(scenario, a_T, a_R, u, wmmse: WmmseState) -> PrecodingContext:
    a_T = np.asarray(a_T, float)
    z = np.asarray(a_R, float) * u
    g0 = scenario.g0
    q_G = a_T * np.conj(g0) * (np.conj(g0) @ z)
    q_SI = a_T * (scenario.H_SI.conj().T @ z)
    Ah = scenario.h * a_T                               # rows A_T h_k
    if scenario.K:
        weights = wmmse.w * np.abs(wmmse.c) ** 2
        Upsilon = (Ah.T * weights) @ Ah.conj()
        b = (wmmse.w * wmmse.c)[:, None] * Ah
    else:
        Upsilon = np.zeros((scenario.N, scenario.N), complex)
        b = np.zeros((0, scenario.N), complex)
    return PrecodingContext(
        Upsilon=0.5 * (Upsilon + Upsilon.conj().T), b=b, q_G=q_G, q_SI=q_SI,
        rx_noise=float(np.sum(np.abs(z) ** 2)), support=np.flatnonzero(a_T > SUPPORT_TOL),
    )


def sensing_slack_terms(scenario, ctx: PrecodingContext, v, v0):
    """(available, used): sensing constraint holds iff available >= used."""
    p = scenario.params
    g = p.gamma_0
    available = (p.B * p.sigma_02 * abs(np.vdot(ctx.q_G, v0)) ** 2
                 - g * abs(np.vdot(ctx.q_SI, v0)) ** 2 - g * p.sigma_r2 * ctx.rx_noise)
    v = np.asarray(v).reshape(-1, scenario.N)
    used = g * (p.sigma_02 * np.sum(np.abs(v.conj() @ ctx.q_G) ** 2)
                + np.sum(np.abs(v.conj() @ ctx.q_SI) ** 2))
    return float(available), float(used)


def entry_bound(scenario) -> float:
    """Bound on |Re| and |Im| of every precoder entry.

    Only the products a_T[n] v[n] enter the objective and constraints, so
    without a bound the entries of nearly switched-off antennas can grow
    like 1/a_T[n] and wreck the conditioning of the assignment step. The
    bound sqrt(P_max) is implied by the power budget at every binary
    assignment.
    """
    return float(np.sqrt(scenario.params.P_max))


def _block_diag(M, K):
    return np.kron(np.eye(K), M)


def _effective_power(a_T, x):
    return float(np.sum(np.abs(np.asarray(a_T) * x) ** 2))


def assemble_vk_problem(scenario, a_T, ctx: PrecodingContext, v0):
    """Stacked real QCQP over all K precoders (restricted to the transmit support).

    Returns (problem, sensing_rhs, power_rhs); raises if v_k = 0 already
    violates the sensing constraint for this v0.
    """
    p = scenario.params
    a_T = np.asarray(a_T, float)
    S = ctx.support
    K = scenario.K
    available, _ = sensing_slack_terms(scenario, ctx, np.zeros((K, scenario.N)), v0)
    power_left = p.P_max - _effective_power(a_T, v0)
    if available <= 0.0:
        raise InfeasibleSubproblemError(
            "sensing constraint fails even with silent communication precoders",
            {"available": available},
        )
    if power_left < 0.0:
        raise InfeasibleSubproblemError("sensing precoder exceeds the power budget", {"power_left": power_left})
    Ups = qcqp.embed_hermitian(ctx.Upsilon[np.ix_(S, S)])
    qG, qSI = ctx.q_G[S], ctx.q_SI[S]
    Sens = qcqp.embed_hermitian(p.gamma_0 * (p.sigma_02 * np.outer(qG, qG.conj()) + np.outer(qSI, qSI.conj())))
    Pow = np.diag(np.tile(a_T[S] ** 2, 2))
    q0 = -np.concatenate([qcqp.embed_linear(ctx.b[k, S]) for k in range(K)]) if K else np.zeros(0)
    bound = entry_bound(scenario)
    problem = qcqp.QcqpProblem(
        n=2 * S.size * K,
        P0=_block_diag(Ups, K),
        q0=q0,
        ineqs=[
            (_block_diag(Sens, K), np.zeros(2 * S.size * K), -available),
            (_block_diag(Pow, K), np.zeros(2 * S.size * K), -power_left),
        ],
        box=(np.full(2 * S.size * K, -bound), np.full(2 * S.size * K, bound)),
    )
    return problem, available, power_left


def _stack(v, S):
    return np.concatenate([qcqp.to_real(row[S]) for row in np.asarray(v)]) if len(v) else np.zeros(0)


def _unstack(x, S, K, N):
    v = np.zeros((K, N), complex)
    m = 2 * S.size
    for k in range(K):
        v[k, S] = qcqp.to_complex(x[k * m:(k + 1) * m])
    return v


def assemble_and_solve_vk(scenario, a_T, a_R, u, v0, wmmse: WmmseState, v_hint=None,
                          ctx: PrecodingContext | None = None, **solver_opts) -> np.ndarray:
    """Minimize the weighted sum-MSE over {v_k} with v0 fixed."""
    if ctx is None:
        ctx = build_context(scenario, a_T, a_R, u, wmmse)
    K, N = scenario.K, scenario.N
    S = ctx.support
    if K == 0:
        return np.zeros((0, N), complex)
    problem, available, power_left = assemble_vk_problem(scenario, a_T, ctx, v0)
    if power_left <= 0.0 or S.size == 0:
        return np.zeros((K, N), complex)
    x0 = None if v_hint is None else _stack(v_hint, S)
    sol = qcqp.solve(problem, x0=x0, **solver_opts)
    if sol.status is qcqp.Status.INFEASIBLE:
        raise InfeasibleSubproblemError("communication precoder subproblem infeasible",
                                        {"phase1": sol.phase1_value})
    return _unstack(sol.x, S, K, N)


def assemble_v0_problem(scenario, a_T, ctx: PrecodingContext, v, v0_prev):
    """Real QCQP for v0 with the sensing constraint linearized at ``v0_prev``."""
    p = scenario.params
    a_T = np.asarray(a_T, float)
    S = ctx.support
    g = p.gamma_0
    v = np.asarray(v).reshape(-1, scenario.N)
    used = g * (p.sigma_02 * np.sum(np.abs(v.conj() @ ctx.q_G) ** 2) + np.sum(np.abs(v.conj() @ ctx.q_SI) ** 2))
    rhs = used + g * p.sigma_r2 * ctx.rx_noise
    qG, qSI = ctx.q_G[S], ctx.q_SI[S]
    anchor = np.vdot(qG, v0_prev[S])                      # q_G^H v0_prev
    tangent = p.B * p.sigma_02 * qG * anchor               # B s0 Q_G v0_prev on the support
    power_left = p.P_max - float(np.sum(np.abs(a_T * v) ** 2))
    problem = qcqp.QcqpProblem(
        n=2 * S.size,
        P0=qcqp.embed_hermitian(ctx.Upsilon[np.ix_(S, S)]),
        q0=np.zeros(2 * S.size),
        ineqs=[
            (qcqp.embed_hermitian(g * np.outer(qSI, qSI.conj())), -qcqp.embed_linear(tangent),
             p.B * p.sigma_02 * abs(anchor) ** 2 + rhs),
            (np.diag(np.tile(a_T[S] ** 2, 2)), np.zeros(2 * S.size), -power_left),
        ],
        box=(np.full(2 * S.size, -entry_bound(scenario)), np.full(2 * S.size, entry_bound(scenario))),
    )
    return problem


def assemble_and_solve_v0(scenario, a_T, a_R, u, v, wmmse: WmmseState, v0_prev,
                          ctx: PrecodingContext | None = None, **solver_opts) -> np.ndarray:
    """Minimize v0^H Upsilon v0 under the linearized sensing constraint and the power budget."""
    if ctx is None:
        ctx = build_context(scenario, a_T, a_R, u, wmmse)
    S = ctx.support
    problem = assemble_v0_problem(scenario, a_T, ctx, v, v0_prev)
    sol = qcqp.solve(problem, x0=qcqp.to_real(np.asarray(v0_prev)[S]), **solver_opts)
    if sol.status is qcqp.Status.INFEASIBLE:
        raise InfeasibleSubproblemError("sensing precoder subproblem infeasible", {"phase1": sol.phase1_value})
    v0 = np.zeros(scenario.N, complex)
    v0[S] = qcqp.to_complex(sol.x)
    return v0


def max_ratio_direction(scenario, a_T) -> np.ndarray:
    """Unit-norm maximum-ratio sensing precoder on the transmit support."""
    a_T = np.asarray(a_T, float)
    S = np.flatnonzero(a_T > SUPPORT_TOL)
    d = np.zeros(scenario.N, complex)
    if S.size == 0:
        return d
    d[S] = np.conj(scenario.g0[S]) * a_T[S]
    d /= np.linalg.norm(d)
    return d


def _mmse_directions(scenario, a_T):
    a_T = np.asarray(a_T, float)
    S = np.flatnonzero(a_T > SUPPORT_TOL)
    K, N = scenario.K, scenario.N
    v = np.zeros((K, N), complex)
    if K == 0 or S.size == 0:
        return v
    p = scenario.params
    H = scenario.h[:, S] * a_T[S]                         # effective channel rows
    reg = K * p.sigma_k2 / p.P_max
    W = H.conj().T @ np.linalg.inv(H @ H.conj().T + reg * np.eye(K))   # (|S|, K)
    for k in range(K):
        w = W[:, k]
        nrm = np.linalg.norm(w)
        if nrm > 0:
            v[k, S] = w / nrm
    return v


def _design_directions(scenario, tx):
    """Unit-norm user beams (columns of W) and sensing beam d over ``tx``."""
    K = scenario.K
    nT = len(tx)
    Ht = scenario.h[:, tx].conj()                  # rows h_k^H restricted to tx
    d = scenario.g0[tx].conj().copy()
    if K > 0:
        if nT >= K:
            W = np.linalg.pinv(Ht)
        else:
            W = Ht.conj().T.copy()
        W /= np.maximum(np.linalg.norm(W, axis=0), 1e-300)
        if nT > K:
            Q, _ = np.linalg.qr(Ht.conj().T)
            d_null = d - Q @ (Q.conj().T @ d)
            if np.linalg.norm(d_null) > 1e-6 * np.linalg.norm(d):
                d = d_null
    else:
        W = np.zeros((nT, 0), complex)
    d /= max(np.linalg.norm(d), 1e-300)
    return W, d, Ht


def _design_sinr(scenario, tx, rx, Wf, d):
    """Sensing SINR (optimal combiner) as a function of p0 for power-weighted user beams ``Wf``.

    The receive covariance is A + p0 B with A = sigma_r^2 I + P_max C and
    B = s s^H - C. One Cholesky factor of A and one Hermitian eigensolve of
    L^-1 B L^-H make every later evaluation O(|rx|), which keeps the
    root search on p0 cheap.
    """
    p = scenario.params
    gT = scenario.g0[tx]
    gR = scenario.g0[rx]
    Hs = scenario.H_SI[np.ix_(rx, tx)]
    # receive covariance per unit of communication power, and the sensing-beam leak
    clutter = np.outer(gR, gT) @ Wf                # G0[rx, tx] Wf
    C = p.sigma_02 * clutter @ clutter.conj().T + (Hs @ Wf) @ (Hs @ Wf).conj().T
    s = Hs @ d
    tx_gain = p.B * p.sigma_02 * abs(gT @ d) ** 2
    A = p.P_max * C
    A[np.diag_indices_from(A)] += p.sigma_r2
    L = np.linalg.cholesky(0.5 * (A + A.conj().T))
    Li_B = sla.solve_triangular(L, np.outer(s, s.conj()) - C, lower=True)
    T = sla.solve_triangular(L, Li_B.conj().T, lower=True)
    lam, U = np.linalg.eigh(0.5 * (T + T.conj().T))
    coef = np.abs(U.conj().T @ sla.solve_triangular(L, gR, lower=True)) ** 2

    def sinr(p0):
        return p0 * tx_gain * float((coef / (1.0 + p0 * lam)).sum())

    return sinr


def _smallest_p0(sinr, P_max, gamma_0):
    """Smallest p0 in (0, P_max] with sinr(p0) >= gamma_0, or None."""
    if not sinr(P_max) >= gamma_0:
        return None
    root = scipy.optimize.brentq(lambda x: sinr(x) - gamma_0, 0.0, P_max, xtol=1e-13 * P_max, rtol=1e-13)
    # step onto the feasible side of the root
    step = 1e-13 * P_max
    while root < P_max and not sinr(root) >= gamma_0:
        root = min(P_max, root + step)
        step *= 2.0
    return root


def _design_rate(scenario, Ht, Wf, d, p0):
    p = scenario.params
    G = np.abs(Ht @ Wf) ** 2 * (p.P_max - p0)
    leak = p0 * np.abs(Ht @ d) ** 2
    sig = np.diag(G)
    return float(np.sum(np.log2(1.0 + sig / (G.sum(axis=1) - sig + leak + p.sigma_k2))))


def design_parameters(scenario, tx, rx):
    """Closed-form design on a binary pattern: (W, d, p0, sum rate).

    The users are served by zero-forcing beams (maximum-ratio when there
    are fewer transmit antennas than users). The sensing beam is the
    maximum-ratio direction toward the target, projected off the user
    channels when the array has spare dimensions. The receiver uses the
    optimal combiner against noise, the self-interference of all beams and
    the target-reflected user beams. The sensing power p0 is the smallest
    value in (0, P_max] meeting gamma_0 (bracketed root search) and the rest
    is shared equally by the users. ``W`` holds the user beams as columns
    whose squared norms are the users' shares of P_max - p0, ``d`` is the
    unit-norm sensing beam. The rate is -inf (and p0 None) if
    gamma_0 is not met even with p0 = P_max.
    """
    if not tx or not rx:
        return None, None, None, -np.inf
    p = scenario.params
    K = scenario.K
    W, d, Ht = _design_directions(scenario, tx)
    Wf = W / np.sqrt(max(K, 1))
    sinr = _design_sinr(scenario, tx, rx, Wf, d)
    # aim a hair above gamma_0 so the design is not rejected for rounding
    p0 = _smallest_p0(sinr, p.P_max, p.gamma_0 * (1.0 + DESIGN_SINR_MARGIN))
    if p0 is None:
        p0 = _smallest_p0(sinr, p.P_max, p.gamma_0)
    if p0 is None:
        return Wf, d, None, -np.inf
    if K == 0:
        return Wf, d, p0, 0.0
    return Wf, d, p0, _design_rate(scenario, Ht, Wf, d, p0)


def design_sensing_ceiling(scenario, tx, rx) -> float:
    """Sensing SINR of the closed-form design with the whole budget on the sensing beam."""
    if not tx or not rx:
        return 0.0
    tx, rx = list(tx), list(rx)
    K = max(scenario.K, 1)
    W, d, _ = _design_directions(scenario, tx)
    return _design_sinr(scenario, tx, rx, W / np.sqrt(K), d)(scenario.params.P_max)


def design_comm_rate(scenario, tx) -> float:
    """Sum rate of the closed-form user beams over ``tx`` with the whole budget on the users."""
    if not tx or scenario.K == 0:
        return 0.0
    W, d, Ht = _design_directions(scenario, list(tx))
    return _design_rate(scenario, Ht, W / np.sqrt(scenario.K), d, 0.0)


def closed_form_design(scenario, a_T, a_R) -> BeamformerSet | None:
    """Beamformers of :func:`design_parameters` for a binary assignment.

    Zero-forcing user beams, a user-nulled sensing beam at the smallest
    sufficient power and the optimal combiner. Returns None when the design
    cannot reach gamma_0.
    """
    tx = [int(n) for n in np.flatnonzero(np.asarray(a_T, float) > 0.5)]
    rx = [int(n) for n in np.flatnonzero(np.asarray(a_R, float) > 0.5)]
    W, d, p0, rate = design_parameters(scenario, tx, rx)
    if p0 is None:
        return None
    p = scenario.params
    K, N = scenario.K, scenario.N
    v = np.zeros((K, N), complex)
    if K:
        v[:, tx] = W.T * np.sqrt(p.P_max - p0)
    v0 = np.zeros(N, complex)
    v0[tx] = d * np.sqrt(p0)
    beams = BeamformerSet(v=v, v0=v0, u=np.zeros(N, complex))
    beams.u = optimal_combiner(scenario, a_T, a_R, beams)
    return beams


def initial_beamformers(scenario, a_T, a_R, power_split: float = 0.5) -> BeamformerSet:
    """MMSE communication precoders and a maximum-ratio sensing precoder.

    A fraction ``power_split`` of P_max goes to sensing, the rest is shared
    equally by the K users. Powers refer to the precoders before the
    assignment weights, so the radiated power is at most P_max.
    """
    p = scenario.params
    K = scenario.K
    v = _mmse_directions(scenario, a_T)
    if K:
        v *= np.sqrt((1.0 - power_split) * p.P_max / K)
    v0 = max_ratio_direction(scenario, a_T) * np.sqrt(power_split * p.P_max)
    beams = BeamformerSet(v=v, v0=v0, u=np.zeros(scenario.N, complex))
    beams.u = optimal_combiner(scenario, a_T, a_R, beams)
    return beams


def restore_sensing(scenario, a_T, a_R, beams: BeamformerSet, margin: float = 2.0, iters: int = 40):
    """Find a maximum-ratio sensing precoder that meets gamma_0 with silent UEs.

    Bisects the sensing power fraction rho in [0, 1] for the smallest rho whose
    sensing SINR (with the optimal combiner) reaches gamma_0, then returns
    v0 at min(1, margin * rho) together with the combiner for that v0.
    """
    p = scenario.params
    d = max_ratio_direction(scenario, a_T)
    silent = np.zeros_like(beams.v)

    def trial(rho):
        b = BeamformerSet(v=silent, v0=d * np.sqrt(rho * p.P_max), u=beams.u)
        b.u = optimal_combiner(scenario, a_T, a_R, b)
        return b, sensing_sinr(scenario, a_T, a_R, b)

    full, sinr_full = trial(1.0)
    if not sinr_full >= p.gamma_0:
        raise InfeasibleSubproblemError("sensing threshold unreachable at full power",
                                        {"max_sensing_sinr": sinr_full})
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if trial(mid)[1] >= p.gamma_0:
            hi = mid
        else:
            lo = mid
    b, _ = trial(min(1.0, margin * hi))
    return b.v0, b.u


def extend_inactive(scenario, a_T, a_R, beams: BeamformerSet, wmmse: WmmseState, candidates) -> BeamformerSet:
    """Fill beamformer entries of switched-off candidate antennas.

    The objective does not depend on v_k[n], v0[n] or u[n] while antenna n is
    inactive, so those entries are free. Left at zero they also zero the
    gradient of every assignment quadratic at a_n = 0, and an inactive
    antenna could never be switched on. Each entry listed in ``candidates``
    that lies outside the corresponding support is set to the rms
    magnitude of the active effective entries, with the phase that adds
    coherently to the current useful term: the desired signal of UE k for
    v_k, the target echo for v0 and the combined echo for u.
    """
    a_T = np.asarray(a_T, float)
    a_R = np.asarray(a_R, float)
    cand = np.asarray(sorted(candidates), dtype=int)
    out = beams.copy()
    if cand.size == 0:
        return out
    g0 = scenario.g0
    tx_off = cand[a_T[cand] <= SUPPORT_TOL]
    S_T = np.flatnonzero(a_T > SUPPORT_TOL)
    if tx_off.size and S_T.size:
        for k in range(scenario.K):
            eff = a_T[S_T] * beams.v[k, S_T]
            rms = float(np.sqrt(np.mean(np.abs(eff) ** 2)))
            phase = np.angle(wmmse.c[k] * scenario.h[k, tx_off]) if wmmse.c.size else np.angle(scenario.h[k, tx_off])
            out.v[k, tx_off] = rms * np.exp(1j * phase)
        eff0 = a_T[S_T] * beams.v0[S_T]
        rms0 = float(np.sqrt(np.mean(np.abs(eff0) ** 2)))
        theta = np.angle(g0[S_T] @ eff0)
        out.v0[tx_off] = rms0 * np.exp(1j * (theta - np.angle(g0[tx_off])))
    rx_off = cand[a_R[cand] <= SUPPORT_TOL]
    S_R = np.flatnonzero(a_R > SUPPORT_TOL)
    if rx_off.size and S_R.size:
        z = a_R[S_R] * beams.u[S_R]
        rms_u = float(np.sqrt(np.mean(np.abs(z) ** 2)))
        phi = np.angle(np.vdot(z, g0[S_R]))
        out.u[rx_off] = rms_u * np.exp(1j * (np.angle(g0[rx_off]) - phi))
    return out
