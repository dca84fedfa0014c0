"""Relaxed transmit/receive/off antenna assignment.

The binary mode vectors are relaxed to the box [0, 1] and pushed back
towards binary values by the concave penalty

    Phi(a_T, a_R) = sum_n (a_T,n - a_T,n^2) + sum_n (a_R,n - a_R,n^2),

whose linearization at the previous iterate gives the convex surrogate
sum_n (1 - 2 a_n^(t)) a_n + (a_n^(t))^2. The communication MSE, transmit
power and sensing terms are rewritten as real quadratic forms in a_T (and
the sensing terms in a_R) through the Hadamard identity
a^T (X o M^T) a = tr(diag(a) X diag(a) M).

Matrices without the A_T sandwich are written R_bar:
R_bar_c = sum_k v_k v_k^H and R_bar_x = R_bar_c + v0 v0^H. For the receive
side, N_0 = (G0 A_T v0)(G0 A_T v0)^H, N_c = G0 R_c G0^H and
N_SI = H_SI R_x H_SI^H (with the A_T sandwich). The sensing forms carry the
block-length factor B on the echo term so that they reproduce the sensing
SINR exactly.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import precoding as pc
from . import qcqp
from .errors import InfeasibleSubproblemError, InvalidArgumentError
from .signal_model import BeamformerSet, WmmseState, covariances, target_matrix

# Interior-point solutions never hit the bound a = 0 exactly; entries below
# this are treated as switched off.
SNAP_TOL = 1e-5


@dataclasses.dataclass
class AssignmentState:
    a_T: np.ndarray
    a_R: np.ndarray
    frozen_Tx: set = dataclasses.field(default_factory=set)
    frozen_Rx: set = dataclasses.field(default_factory=set)
    frozen_Off: set = dataclasses.field(default_factory=set)
    mu: float = 1.0
    tau_T: float = 0.9
    tau_R: float = 0.9
    tau_0: float = 0.1
    tau_d: float = 0.4
    hardening_active: bool = False

    @property
    def N(self) -> int:
        return self.a_T.size

    @property
    def frozen(self) -> set:
        return self.frozen_Tx | self.frozen_Rx | self.frozen_Off

    def copy(self) -> "AssignmentState":
        return dataclasses.replace(
            self, a_T=self.a_T.copy(), a_R=self.a_R.copy(), frozen_Tx=set(self.frozen_Tx),
            frozen_Rx=set(self.frozen_Rx), frozen_Off=set(self.frozen_Off),
        )

    def is_binary(self) -> bool:
        a = np.concatenate([self.a_T, self.a_R])
        return bool(np.all((a == 0.0) | (a == 1.0)))


@dataclasses.dataclass
class AssignmentQuadratics:
    # a_T part
    Q: np.ndarray | None = None
    q_bar: np.ndarray | None = None
    mse_const: float = 0.0
    P_pow: np.ndarray | None = None
    B_0: np.ndarray | None = None
    B_c: np.ndarray | None = None
    B_SI: np.ndarray | None = None
    rx_noise: float = 0.0            # ||A_R u||^2
    # a_R part
    C_0: np.ndarray | None = None
    C_cSI: np.ndarray | None = None
    D_u: np.ndarray | None = None


def penalty(a_T, a_R) -> float:
    a_T = np.asarray(a_T, float)
    a_R = np.asarray(a_R, float)
    return float(np.sum(a_T - a_T ** 2) + np.sum(a_R - a_R ** 2))


def _sym(M):
    M = np.real(M)
    return 0.5 * (M + M.T)


def build_aT_quadratics(scenario, beams: BeamformerSet, wmmse: WmmseState, a_R, u=None) -> AssignmentQuadratics:
    """Quadratic forms in a_T for fixed beamformers, WMMSE state and receive side."""
    p = scenario.params
    u = beams.u if u is None else u
    v, v0 = beams.v, beams.v0
    h = scenario.h
    R_bar_c = v.T @ v.conj()
    R_bar_x = R_bar_c + np.outer(v0, v0.conj())
    if scenario.K:
        # sum_k w_k |c_k|^2 sum_{l,0} Re{q_kl q_kl^H},  q_kl = conj(h_k) o v_l
        coeff = wmmse.w * np.abs(wmmse.c) ** 2
        Hk = (h.conj().T * coeff) @ h                 # sum_k coeff_k conj(h_k) h_k^T
        Q = _sym(R_bar_x * Hk)
        q_bar = np.real(np.sum((wmmse.w * np.conj(wmmse.c))[:, None] * h.conj() * v, axis=0))
        mse_const = float(np.sum(wmmse.w * (np.abs(wmmse.c) ** 2 * p.sigma_k2 + 1.0)))
    else:
        Q = np.zeros((scenario.N, scenario.N))
        q_bar = np.zeros(scenario.N)
        mse_const = 0.0
    P_pow = np.diag(np.sum(np.abs(v) ** 2, axis=0) + np.abs(v0) ** 2)
    z = np.asarray(a_R, float) * u                     # A_R u
    g0 = scenario.g0
    # M_G = G0^H U_R G0 = |g0^H z|^2 conj(g0) g0^T ; M_SI = (H^H z)(H^H z)^H
    M_G = abs(np.conj(g0) @ z) ** 2 * np.outer(np.conj(g0), g0)
    s = scenario.H_SI.conj().T @ z
    M_SI = np.outer(s, s.conj())
    return AssignmentQuadratics(
        Q=Q, q_bar=q_bar, mse_const=mse_const, P_pow=P_pow,
        B_0=_sym(np.outer(v0, v0.conj()) * M_G.T),
        B_c=_sym(R_bar_c * M_G.T),
        B_SI=_sym(R_bar_x * M_SI.T),
        rx_noise=float(np.sum(np.abs(z) ** 2)),
    )


def build_aR_quadratics(scenario, beams: BeamformerSet, a_T, u=None) -> AssignmentQuadratics:
    p = scenario.params
    u = beams.u if u is None else u
    a_T = np.asarray(a_T, float)
    G0 = target_matrix(scenario.g0)
    cov = covariances(a_T, beams)
    y = G0 @ (a_T * beams.v0)
    H = scenario.H_SI
    N_mix = p.sigma_02 * (G0 @ cov.R_c @ G0.conj().T) + H @ cov.R_x @ H.conj().T
    cy = np.conj(u) * y
    return AssignmentQuadratics(
        C_0=_sym(np.outer(cy, cy.conj())),
        C_cSI=_sym(N_mix * np.outer(np.conj(u), u)),
        D_u=np.diag(np.abs(u) ** 2),
    )


def mse_form(quad: AssignmentQuadratics, a_T) -> float:
    """sum_k w_k e_k as a quadratic in a_T."""
    a = np.asarray(a_T, float)
    return float(a @ quad.Q @ a - 2.0 * quad.q_bar @ a + quad.mse_const)


def aT_sensing_margin(scenario, quad: AssignmentQuadratics, a_T) -> float:
    """B s0 a^T B_0 a - g s0 a^T B_c a - g a^T B_SI a - g sr ||A_R u||^2 (>= 0 iff SINR_0 >= g)."""
    p = scenario.params
    a = np.asarray(a_T, float)
    return float(p.B * p.sigma_02 * a @ quad.B_0 @ a - p.gamma_0 * p.sigma_02 * a @ quad.B_c @ a
                 - p.gamma_0 * a @ quad.B_SI @ a - p.gamma_0 * p.sigma_r2 * quad.rx_noise)


def aR_sensing_margin(scenario, quad: AssignmentQuadratics, a_R) -> float:
    p = scenario.params
    a = np.asarray(a_R, float)
    return float(p.B * p.sigma_02 * a @ quad.C_0 @ a - p.gamma_0 * a @ quad.C_cSI @ a
                 - p.gamma_0 * p.sigma_r2 * a @ quad.D_u @ a)


def aT_sca_margin(scenario, quad, a_T, a_T_prev) -> float:
    """Sensing margin with the echo term replaced by its tangent at ``a_T_prev``."""
    p = scenario.params
    a, at = np.asarray(a_T, float), np.asarray(a_T_prev, float)
    echo = at @ quad.B_0 @ at + 2.0 * (quad.B_0 @ at) @ (a - at)
    return float(p.B * p.sigma_02 * echo - p.gamma_0 * p.sigma_02 * a @ quad.B_c @ a
                 - p.gamma_0 * a @ quad.B_SI @ a - p.gamma_0 * p.sigma_r2 * quad.rx_noise)


def aR_sca_margin(scenario, quad, a_R, a_R_prev) -> float:
    p = scenario.params
    a, at = np.asarray(a_R, float), np.asarray(a_R_prev, float)
    echo = at @ quad.C_0 @ at + 2.0 * (quad.C_0 @ at) @ (a - at)
    return float(p.B * p.sigma_02 * echo - p.gamma_0 * a @ quad.C_cSI @ a
                 - p.gamma_0 * p.sigma_r2 * a @ quad.D_u @ a)


def _frozen_bounds(state: AssignmentState, other, role: str):
    """Box for one role: [0, 1 - other] with frozen entries pinned."""
    N = state.N
    lo = np.zeros(N)
    hi = np.clip(1.0 - np.asarray(other, float), 0.0, 1.0)
    on = state.frozen_Tx if role == "T" else state.frozen_Rx
    off = (state.frozen_Rx if role == "T" else state.frozen_Tx) | state.frozen_Off
    for n in on:
        lo[n] = hi[n] = 1.0
    for n in off:
        lo[n] = hi[n] = 0.0
    return lo, hi


def _penalty_linear(mu, a_prev):
    """Coefficients (q0, r0) of mu * sum[(1 - 2 a_prev) a + a_prev^2] in the 2 q0^T a + r0 form."""
    return 0.5 * mu * (1.0 - 2.0 * a_prev), mu * float(np.sum(a_prev ** 2))


def assemble_aT_problem(scenario, state: AssignmentState, quad, a_T_prev, n_t_min: int = 1):
    p = scenario.params
    N = state.N
    at = np.asarray(a_T_prev, float)
    q_pen, r_pen = _penalty_linear(state.mu, at)
    lo, hi = _frozen_bounds(state, state.a_R, "T")
    ones = np.ones(N)
    P_sens = p.gamma_0 * (p.sigma_02 * quad.B_c + quad.B_SI)
    q_sens = -p.B * p.sigma_02 * (quad.B_0 @ at)
    r_sens = p.B * p.sigma_02 * at @ quad.B_0 @ at + p.gamma_0 * p.sigma_r2 * quad.rx_noise
    return qcqp.QcqpProblem(
        n=N,
        P0=quad.Q,
        q0=-quad.q_bar + q_pen,
        r0=quad.mse_const + r_pen,
        ineqs=[(quad.P_pow, np.zeros(N), -p.P_max), (P_sens, q_sens, r_sens)],
        linear_ineqs=[(ones, p.N_act - float(np.sum(state.a_R))), (-ones, -float(n_t_min))],
        box=(lo, hi),
    )


def solve_aT(scenario, state: AssignmentState, quad, a_T_prev, n_t_min: int = 1, **solver_opts) -> np.ndarray:
    """Penalized SCA step for the transmit assignment (a_R held at ``state.a_R``)."""
    problem = assemble_aT_problem(scenario, state, quad, a_T_prev, n_t_min)
    sol = qcqp.solve(problem, x0=np.asarray(a_T_prev, float), **solver_opts)
    if sol.status is qcqp.Status.INFEASIBLE:
        raise InfeasibleSubproblemError("transmit assignment subproblem infeasible", {"phase1": sol.phase1_value})
    return np.clip(sol.x, 0.0, 1.0)


def assemble_aR_problem(scenario, state: AssignmentState, quad, a_R_prev, a_T, n_r_min: int = 1):
    p = scenario.params
    N = state.N
    at = np.asarray(a_R_prev, float)
    q_pen, r_pen = _penalty_linear(state.mu, at)
    lo, hi = _frozen_bounds(state, a_T, "R")
    ones = np.ones(N)
    P_sens = p.gamma_0 * (quad.C_cSI + p.sigma_r2 * quad.D_u)
    q_sens = -p.B * p.sigma_02 * (quad.C_0 @ at)
    r_sens = p.B * p.sigma_02 * at @ quad.C_0 @ at
    return qcqp.QcqpProblem(
        n=N,
        P0=np.zeros((N, N)),
        q0=q_pen,
        r0=r_pen,
        ineqs=[(P_sens, q_sens, r_sens)],
        linear_ineqs=[(ones, p.N_act - float(np.sum(a_T))), (-ones, -float(n_r_min))],
        box=(lo, hi),
    )


def solve_aR(scenario, state: AssignmentState, quad, a_R_prev, a_T, n_r_min: int = 1, **solver_opts) -> np.ndarray:
    problem = assemble_aR_problem(scenario, state, quad, a_R_prev, a_T, n_r_min)
    sol = qcqp.solve(problem, x0=np.asarray(a_R_prev, float), **solver_opts)
    if sol.status is qcqp.Status.INFEASIBLE:
        raise InfeasibleSubproblemError("receive assignment subproblem infeasible", {"phase1": sol.phase1_value})
    return np.clip(sol.x, 0.0, 1.0)


def harden(state: AssignmentState, a_T, a_R, n_act: int | None = None, n_t_min: int = 1,
           n_r_min: int = 1) -> AssignmentState:
    """One pass of the progressive hardening procedure.

    Flags are raised per antenna with the (tau_T, tau_R, tau_0, tau_d)
    thresholds, the cumulative sets are updated with precedence
    Tx > Rx > Off, frozen antennas receive hard values and both vectors are
    clipped to [0, 1]. When ``n_act`` is given, new freezes that would push
    the number of frozen active antennas above the budget are skipped
    (lowest confidence first) and the remaining fractional entries are
    scaled down if the total still exceeds it. Off-freezes that would leave
    fewer than ``n_t_min`` / ``n_r_min`` candidates for a role are skipped.
    """
    new = state.copy()
    aT = np.asarray(a_T, float).copy()
    aR = np.asarray(a_R, float).copy()
    if state.hardening_active:
        tT, tR, t0, td = state.tau_T, state.tau_R, state.tau_0, state.tau_d
        f_tx = ((aT >= tT) & (aR <= 1.0 - tT)) | ((aT - aR >= td) & (aT >= 0.5))
        f_rx = ((aR >= tR) & (aT <= 1.0 - tR)) | ((aR - aT >= td) & (aR >= 0.5))
        f_off = (aT + aR <= t0) & ~(f_tx | f_rx)
        frozen = state.frozen

        tx_new = [n for n in np.flatnonzero(f_tx) if n not in frozen]
        rx_new = [n for n in np.flatnonzero(f_rx) if n not in frozen and n not in tx_new]
        if n_act is not None:
            room = n_act - len(state.frozen_Tx) - len(state.frozen_Rx)
            cand = sorted([(aT[n], n, "T") for n in tx_new] + [(aR[n], n, "R") for n in rx_new],
                          key=lambda c: (-c[0], c[1]))
            keep = cand[:max(room, 0)]
            tx_new = [n for _, n, r in keep if r == "T"]
            rx_new = [n for _, n, r in keep if r == "R"]
        F_tx = set(state.frozen_Tx) | set(tx_new)
        F_rx = (set(state.frozen_Rx) | set(rx_new)) - F_tx
        off_new = [n for n in np.flatnonzero(f_off) if n not in frozen]
        off_new = _guard_off(off_new, aT, aR, F_tx, F_rx, set(state.frozen_Off), n_t_min, n_r_min)
        F_off = (set(state.frozen_Off) | set(off_new)) - (F_tx | F_rx)
        for n in F_tx:
            aT[n], aR[n] = 1.0, 0.0
        for n in F_rx:
            aT[n], aR[n] = 0.0, 1.0
        for n in F_off:
            aT[n], aR[n] = 0.0, 0.0
        new.frozen_Tx, new.frozen_Rx, new.frozen_Off = F_tx, F_rx, F_off
    aT = np.clip(aT, 0.0, 1.0)
    aR = np.clip(aR, 0.0, 1.0)
    if n_act is not None:
        aT, aR = _enforce_budget(aT, aR, new.frozen, n_act)
    new.a_T, new.a_R = aT, aR
    return new


def _guard_off(off_new, aT, aR, F_tx, F_rx, F_off, n_t_min, n_r_min):
    off = list(off_new)
    N = aT.size
    for role_set, need, score in ((F_tx, n_t_min, aT), (F_rx, n_r_min, aR)):
        while True:
            blocked = F_off | set(off) | (F_rx if role_set is F_tx else F_tx)
            avail = len(role_set) + sum(1 for n in range(N) if n not in blocked and n not in role_set)
            if avail >= need or not off:
                break
            best = max(off, key=lambda n: (score[n], -n))
            off.remove(best)
    return off


def _enforce_budget(aT, aR, frozen, n_act):
    total = float(np.sum(aT) + np.sum(aR))
    if total <= n_act:
        return aT, aR
    free = np.array([n not in frozen for n in range(aT.size)])
    fixed_total = float(np.sum(aT[~free]) + np.sum(aR[~free]))
    free_total = total - fixed_total
    if free_total > 0:
        scale = max(0.0, (n_act - fixed_total) / free_total)
        aT = np.where(free, aT * scale, aT)
        aR = np.where(free, aR * scale, aR)
    return aT, aR


def tighten_thresholds(state: AssignmentState, step: float = 0.02, tau_max: float = 0.98,
                       step_0: float = 0.01, tau0_min: float = 0.02) -> None:
    state.tau_T = min(tau_max, state.tau_T + step)
    state.tau_R = min(tau_max, state.tau_R + step)
    state.tau_0 = max(tau0_min, state.tau_0 - step_0)


def force_binary(state: AssignmentState, n_act: int, n_t_min: int = 1, n_r_min: int = 1):
    """Round the remaining fractional antennas.

    Frozen antennas keep their roles. The others are visited in decreasing
    order of max(a_T, a_R) and take the larger role when it is >= 0.5 and the
    activation budget allows, otherwise they are switched off. If a role ends
    up empty, the unfrozen antenna with the largest value for that role takes
    it; when the budget is spent, the weakest unfrozen antenna of the other
    role is released first.
    """
    aT = np.where(np.isin(np.arange(state.N), list(state.frozen_Tx)), 1.0, 0.0)
    aR = np.where(np.isin(np.arange(state.N), list(state.frozen_Rx)), 1.0, 0.0)
    used = int(aT.sum() + aR.sum())
    free = [n for n in range(state.N) if n not in state.frozen]
    order = sorted(free, key=lambda n: (-max(state.a_T[n], state.a_R[n]), n))
    for n in order:
        if used >= n_act:
            break
        if state.a_T[n] >= state.a_R[n] and state.a_T[n] >= 0.5:
            aT[n] = 1.0
            used += 1
        elif state.a_R[n] > state.a_T[n] and state.a_R[n] >= 0.5:
            aR[n] = 1.0
            used += 1
    for vec, other, need, score in ((aT, aR, n_t_min, state.a_T), (aR, aT, n_r_min, state.a_R)):
        while vec.sum() < need:
            cands = [n for n in free if vec[n] == 0.0 and other[n] == 0.0]
            if used >= n_act or not cands:
                # take an antenna from the other role, which must keep at least one
                donors = [n for n in free if other[n] == 1.0] if other.sum() > 1 else []
                if not donors:
                    break
                weakest = min(donors, key=lambda n: (max(state.a_T[n], state.a_R[n]), n))
                other[weakest] = 0.0
                used -= 1
                cands.append(weakest)
            if not cands:
                break
            pick = max(cands, key=lambda n: (score[n], -n))
            vec[pick] = 1.0
            used += 1
    return aT, aR


# ---------------------------------------------------------------------------
# initialization

def proxy_rate(scenario, tx, rx) -> float:
    """Rate of :func:`flexisac.precoding.closed_form_design` on a pattern (-inf if infeasible).

    Used only to rank candidate patterns when seeding the AO.
    """
    return pc.design_parameters(scenario, list(tx), list(rx))[3]


def proxy_score(scenario, tx, rx) -> tuple:
    """Ranking key: feasible patterns by proxy rate, the rest by their sensing ceiling."""
    rate = proxy_rate(scenario, tx, rx)
    if rate > -np.inf:
        return (1, rate)
    return (0, pc.design_sensing_ceiling(scenario, tx, rx))


def _better(a, b, tol):
    return a[0] > b[0] or (a[0] == b[0] and a[1] > b[1] + tol)


def greedy_pattern(scenario, n_act: int, max_sweeps: int = 10):
    """Transmit/receive sets of total size ``n_act`` chosen by :func:`proxy_score`.

    Two constructions feed a local search, and the better result wins:

    * sensing first: start from the best (transmit, receive) antenna pair
      and repeatedly add the (antenna, role) pair with the best score;
    * rate first: grow the transmit set by the users' sum rate alone up to
      ``n_act - 1`` antennas, then add the best receive antenna.

    The local search runs up to ``max_sweeps`` sweeps of moves (flip a role,
    exchange a transmit and a receive antenna, or replace an active antenna
    by an idle one in either role), taking the best improving move of each
    sweep. While no pattern meets gamma_0 the score favours the highest
    sensing SINR, so the search drifts towards feasibility. The two starts
    approach the feasible set from opposite sides, which keeps the search
    out of receive-heavy patterns that no single move can leave.
    Ties go to the lower index, transmit first, sensing-first start first.
    """
    best, best_val = None, None
    for build in (_sensing_first, _rate_first):
        tx, rx = _local_search(scenario, *build(scenario, n_act), max_sweeps)
        val = proxy_score(scenario, tx, rx)
        if best is None or _better(val, best_val, 1e-9):
            best, best_val = (sorted(tx), sorted(rx)), val
    return best


def _sensing_first(scenario, n_act):
    N = scenario.N
    floor = (-1, 0.0)
    best, best_val = None, floor
    for t in range(N):
        for r in range(N):
            if r == t:
                continue
            val = proxy_score(scenario, [t], [r])
            if _better(val, best_val, 1e-12):
                best, best_val = (t, r), val
    if best is None:
        best = (0, 1)
    tx, rx = [best[0]], [best[1]]
    while len(tx) + len(rx) < n_act:
        step, step_val = None, floor
        for n in range(N):
            if n in tx or n in rx:
                continue
            for role in ("T", "R"):
                val = proxy_score(scenario, tx + [n], rx) if role == "T" else proxy_score(scenario, tx, rx + [n])
                if _better(val, step_val, 1e-12):
                    step, step_val = (n, role), val
        if step is None:
            break
        (tx if step[1] == "T" else rx).append(step[0])
    return tx, rx


def _rate_first(scenario, n_act):
    N = scenario.N
    tx = []
    while len(tx) < n_act - 1:
        rates = [pc.design_comm_rate(scenario, tx + [n]) if n not in tx else -np.inf for n in range(N)]
        tx.append(int(np.argmax(rates)))
    scores = [proxy_score(scenario, tx, [n]) if n not in tx else (-1, 0.0) for n in range(N)]
    rx = [max(range(N), key=lambda n: (scores[n], -n))]
    return tx, rx


def _local_search(scenario, tx, rx, max_sweeps):
    current = proxy_score(scenario, tx, rx)
    for _ in range(max_sweeps):
        move = None
        for cand_tx, cand_rx in _neighbours(scenario.N, tx, rx):
            val = proxy_score(scenario, cand_tx, cand_rx)
            if _better(val, current, 1e-9):
                move, current = (cand_tx, cand_rx), val
        if move is None:
            break
        tx, rx = move
    return tx, rx


def _neighbours(N, tx, rx):
    idle = [n for n in range(N) if n not in tx and n not in rx]
    for n in tx:
        if len(tx) > 1:
            yield [m for m in tx if m != n], rx + [n]
    for n in rx:
        if len(rx) > 1:
            yield tx + [n], [m for m in rx if m != n]
    for n in tx:
        for m in rx:
            yield [m if k == n else k for k in tx], [n if k == m else k for k in rx]
    for n in tx + rx:
        for m in idle:
            for role in ("T", "R"):
                t = [k for k in tx if k != n]
                r = [k for k in rx if k != n]
                (t if role == "T" else r).append(m)
                if t and r:
                    yield t, r


def initialize_assignment(scenario, n_act: int, soft_tx=(0.6, 0.3), soft_rx=(0.3, 0.6)) -> AssignmentState:
    """Greedy, softened starting assignment.

    The binary pattern comes from :func:`greedy_pattern`; transmit seeds
    start at (0.6, 0.3), receive seeds at (0.3, 0.6), the rest at (0, 0).
    """
    if n_act < 2:
        raise InvalidArgumentError("need n_act >= 2 (at least one transmit and one receive antenna)")
    if n_act > scenario.N:
        raise InvalidArgumentError(f"n_act={n_act} exceeds N={scenario.N}")
    tx, rx = greedy_pattern(scenario, n_act)
    a_T = np.zeros(scenario.N)
    a_R = np.zeros(scenario.N)
    a_T[tx], a_R[tx] = soft_tx
    a_T[rx], a_R[rx] = soft_rx
    return AssignmentState(a_T=a_T, a_R=a_R)
