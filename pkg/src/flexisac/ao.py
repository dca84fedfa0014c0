"""Alternating optimization of beamformers and antenna modes, plus the array baselines.

One outer iteration updates, in order: the sensing combiner, the WMMSE
auxiliaries, the communication precoders, the sensing precoder, the
transmit assignment, the receive assignment, then (once triggered) applies
progressive hardening and records the sum rate.

Diagnostic log format, one line per iteration::

    t=<iter> R=<sum rate> Phi=<penalty> df=<rel. rate change> dT=<|da_T|> dR=<|da_R|> \
frozen=<Tx>/<Rx>/<Off> mu=<penalty weight> [flags]

where flags is a comma list drawn from ``harden``, ``restore``, ``revert``,
``round`` and ``stall:<block>``.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
import time

import numpy as np

from . import assignment as asg
from . import precoding as pc
from . import signal_model as sm
from .errors import (
    DegenerateCombinerError,
    InfeasibleSubproblemError,
    InvalidArgumentError,
    NoReceiveAntennasError,
)
from .scenario import ArrayGeometry, Scenario, derive_seed, synthesize

log = logging.getLogger(__name__)

# Relative slack used when certifying results.
SINR_CERT_RTOL = 1e-4
POWER_CERT_RTOL = 1e-9


class Scheme(str, enum.Enum):
    PROPOSED = "Proposed"
    UPA_OPT = "UpaOpt"
    UPA_FIXED = "UpaFixed"
    LARGE_APERTURE = "LargeAperture"


class TrialStatus(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    SENSING_INFEASIBLE = "SensingInfeasible"


@dataclasses.dataclass(frozen=True)
class AoConfig:
    T_max: int = 40
    eps_obj: float = 1e-4
    eps_T: float = 1e-3
    eps_R: float = 1e-3
    # penalty schedule: mu_0 = mu_scale * (weighted MSE at start), x mu_growth per iteration
    mu_scale: float = 0.01
    mu_growth: float = 1.5
    mu_cap_ratio: float = 1e4
    mu_boost: float = 3.0
    # hardening trigger and thresholds
    trigger_iter: int = 10
    trigger_delta: float = 0.05
    trigger_count: int = 3
    tau_T: float = 0.9
    tau_R: float = 0.9
    tau_0: float = 0.1
    tau_d: float = 0.4
    tau_step: float = 0.02
    tau_max: float = 0.98
    tau0_step: float = 0.01
    tau0_min: float = 0.02
    n_t_min: int = 1
    n_r_min: int = 1
    extend_inactive: bool = False
    polish_iters: int = 40
    restore_margin: float = 2.0
    scheme: Scheme = Scheme.PROPOSED

    def __post_init__(self):
        if int(self.T_max) != self.T_max or self.T_max < 1:
            raise InvalidArgumentError(f"T_max must be a positive integer, got {self.T_max}")
        for name in ("eps_obj", "eps_T", "eps_R", "mu_scale", "mu_growth", "mu_cap_ratio"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_t_min < 1 or self.n_r_min < 1:
            raise InvalidArgumentError("n_t_min and n_r_min must be at least 1")
        object.__setattr__(self, "scheme", Scheme(self.scheme))

    def replace(self, **changes) -> "AoConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["scheme"] = self.scheme.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AoConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - fields
        if unknown:
            raise InvalidArgumentError(f"unknown AoConfig fields: {sorted(unknown)}")
        return cls(**d)


@dataclasses.dataclass
class TrialResult:
    scheme: Scheme
    status: TrialStatus
    sum_rate: float
    per_ue_rates: np.ndarray
    achieved_sensing_sinr: float
    power: float
    a_T: np.ndarray
    a_R: np.ndarray
    n_act: int
    gamma_0: float
    P_max: float
    iterations_used: int
    objective_trace: list
    beams: sm.BeamformerSet | None = None
    trace: list = dataclasses.field(default_factory=list)
    log_lines: list = dataclasses.field(default_factory=list)
    antenna_indices: list | None = None
    geometry: dict | None = None
    runtime_s: float = 0.0
    diagnostics: dict = dataclasses.field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status is not TrialStatus.SENSING_INFEASIBLE

    def certify(self) -> list[str]:
        """Violated certification conditions (empty list when the result is clean)."""
        bad = []
        if not self.feasible:
            return bad
        if not self.achieved_sensing_sinr >= self.gamma_0 * (1.0 - SINR_CERT_RTOL):
            bad.append(f"sensing SINR {self.achieved_sensing_sinr:.6g} < gamma_0 {self.gamma_0:.6g}")
        if not self.power <= self.P_max * (1.0 + POWER_CERT_RTOL):
            bad.append(f"power {self.power:.12g} > P_max {self.P_max:.12g}")
        if asg.penalty(self.a_T, self.a_R) != 0.0:
            bad.append("assignment not binary")
        if np.any(self.a_T + self.a_R > 1.0):
            bad.append("antenna assigned to both roles")
        if float(np.sum(self.a_T + self.a_R)) > self.n_act:
            bad.append("activation budget exceeded")
        return bad

    def to_dict(self, include_trace: bool = True, include_runtime: bool = True) -> dict:
        d = {
            "scheme": self.scheme.value,
            "status": self.status.value,
            "sum_rate": float(self.sum_rate),
            "per_ue_rates": [float(r) for r in self.per_ue_rates],
            "achieved_sensing_sinr": float(self.achieved_sensing_sinr),
            "power": float(self.power),
            "a_T": [float(a) for a in self.a_T],
            "a_R": [float(a) for a in self.a_R],
            "n_act": int(self.n_act),
            "gamma_0": float(self.gamma_0),
            "P_max": float(self.P_max),
            "iterations_used": int(self.iterations_used),
            "objective_trace": [float(r) for r in self.objective_trace],
            "antenna_indices": None if self.antenna_indices is None else [int(i) for i in self.antenna_indices],
            "geometry": self.geometry,
            "diagnostics": _jsonable(self.diagnostics),
        }
        if include_trace:
            d["trace"] = _jsonable(self.trace)
            d["log_lines"] = list(self.log_lines)
        if include_runtime:
            d["runtime_s"] = float(self.runtime_s)
        return d


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


# ---------------------------------------------------------------------------
# helpers

def relative_change(new: float, old: float) -> float:
    """delta_f = |R_new - R_old| / |R_old| (inf when R_old is zero and R changed)."""
    if old == 0.0:
        return 0.0 if new == 0.0 else math.inf
    return abs(new - old) / abs(old)


def is_converged(delta_f: float, delta_T: float, delta_R: float, config: AoConfig) -> bool:
    return delta_f <= config.eps_obj and delta_T <= config.eps_T and delta_R <= config.eps_R


def _power(a_T, beams) -> float:
    return float(np.real(np.trace(sm.covariances(a_T, beams).R_x)))


def _sinr_or_zero(scenario, a_T, a_R, beams) -> float:
    try:
        return sm.sensing_sinr(scenario, a_T, a_R, beams)
    except DegenerateCombinerError:
        return 0.0


def ensure_feasible(scenario, a_T, a_R, beams: sm.BeamformerSet, margin: float = 2.0):
    """Make (a_T, a_R, beams) satisfy the power and sensing constraints.

    Power is scaled down if needed and the combiner re-optimized. If sensing
    still fails, the sensing precoder is replaced by a maximum-ratio one with
    some headroom and the communication precoders are scaled by the largest
    power of 1/2 that keeps both constraints. Returns (beams, restored) and
    raises InfeasibleSubproblemError when even full-power sensing with
    silent UEs misses gamma_0.
    """
    p = scenario.params
    b = beams.copy()
    P = _power(a_T, b)
    if P > p.P_max:
        s = math.sqrt(p.P_max / P) * (1.0 - 1e-12)
        b.v *= s
        b.v0 *= s
    b.u = sm.optimal_combiner(scenario, a_T, a_R, b)
    if _sinr_or_zero(scenario, a_T, a_R, b) >= p.gamma_0:
        return b, False
    v0, u = pc.restore_sensing(scenario, a_T, a_R, b, margin=margin)
    for j in range(0, 31):
        scale = 0.5 ** j if j < 30 else 0.0
        trial = sm.BeamformerSet(v=b.v * scale, v0=v0, u=u)
        if _power(a_T, trial) > p.P_max:
            continue
        trial.u = sm.optimal_combiner(scenario, a_T, a_R, trial)
        if _sinr_or_zero(scenario, a_T, a_R, trial) >= p.gamma_0:
            return trial, True
    raise InfeasibleSubproblemError("feasibility restoration failed")  # pragma: no cover


def _snap(scenario, a_T, a_R, beams, role):
    """Zero the entries of the just-updated role below SNAP_TOL if sensing still holds."""
    a = a_T if role == "T" else a_R
    small = (a > 0.0) & (a < asg.SNAP_TOL)
    if not np.any(small):
        return a
    snapped = np.where(small, 0.0, a)
    trial_T, trial_R = (snapped, a_R) if role == "T" else (a_T, snapped)
    if np.count_nonzero(trial_R) == 0 or np.count_nonzero(trial_T) == 0:
        return a
    if _sinr_or_zero(scenario, trial_T, trial_R, beams) >= scenario.params.gamma_0:
        return snapped
    return a


def _precoding_block(scenario, a_T, a_R, beams: sm.BeamformerSet, flags: list):
    """u -> WMMSE -> v_k -> v0. Returns (beams, wmmse, surrogate values)."""
    beams = beams.copy()
    beams.u = sm.optimal_combiner(scenario, a_T, a_R, beams)
    wm = sm.update_wmmse(scenario, a_T, beams)
    surrogate = [sm.weighted_mse_objective(scenario, a_T, beams, wm)]
    ctx = pc.build_context(scenario, a_T, a_R, beams.u, wm)
    try:
        beams.v = pc.assemble_and_solve_vk(scenario, a_T, a_R, beams.u, beams.v0, wm, v_hint=beams.v, ctx=ctx)
    except InfeasibleSubproblemError:
        flags.append("stall:v")
    surrogate.append(sm.weighted_mse_objective(scenario, a_T, beams, wm))
    try:
        beams.v0 = pc.assemble_and_solve_v0(scenario, a_T, a_R, beams.u, beams.v, wm, beams.v0, ctx=ctx)
    except InfeasibleSubproblemError:
        flags.append("stall:v0")
    surrogate.append(sm.weighted_mse_objective(scenario, a_T, beams, wm))
    return beams, wm, surrogate


def _freeze_all(state: asg.AssignmentState, a_T, a_R):
    state.a_T, state.a_R = a_T.copy(), a_R.copy()
    state.frozen_Tx = set(np.flatnonzero(a_T == 1.0).tolist())
    state.frozen_Rx = set(np.flatnonzero(a_R == 1.0).tolist())
    state.frozen_Off = set(range(state.N)) - state.frozen_Tx - state.frozen_Rx


def _infeasible_result(scenario, config, n_act, t0, reason, diagnostics=None, **extra) -> TrialResult:
    N = scenario.N
    return TrialResult(
        scheme=config.scheme, status=TrialStatus.SENSING_INFEASIBLE, sum_rate=0.0,
        per_ue_rates=np.zeros(scenario.K), achieved_sensing_sinr=0.0, power=0.0,
        a_T=np.zeros(N), a_R=np.zeros(N), n_act=n_act, gamma_0=scenario.params.gamma_0,
        P_max=scenario.params.P_max, iterations_used=0, objective_trace=[],
        runtime_s=time.perf_counter() - t0, diagnostics={"reason": reason, **(diagnostics or {})}, **extra,
    )


# ---------------------------------------------------------------------------
# beamforming-only optimization on a fixed assignment

def optimize_beamformers(scenario, a_T, a_R, config: AoConfig = AoConfig(), beams=None, max_iters=None):
    """WMMSE/SCA precoder iterations for a fixed (binary or relaxed) assignment.

    Returns (beams, objective trace, iterations, converged); raises
    InfeasibleSubproblemError if the sensing threshold cannot be met.
    """
    a_T = np.asarray(a_T, float)
    a_R = np.asarray(a_R, float)
    max_iters = config.T_max if max_iters is None else max_iters
    if beams is None:
        beams = pc.initial_beamformers(scenario, a_T, a_R)
    beams, _ = ensure_feasible(scenario, a_T, a_R, beams, margin=config.restore_margin)
    R = sm.sum_rate(scenario, a_T, beams)
    trace = [R]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        flags: list = []
        beams, _, _ = _precoding_block(scenario, a_T, a_R, beams, flags)
        R_new = sm.sum_rate(scenario, a_T, beams)
        trace.append(R_new)
        df = relative_change(R_new, R)
        R = R_new
        if df <= config.eps_obj:
            converged = True
            break
    beams.u = sm.optimal_combiner(scenario, a_T, a_R, beams)
    return beams, trace, it, converged


# ---------------------------------------------------------------------------
# main loop

def run_ao(scenario: Scenario, config: AoConfig = AoConfig(), n_act: int | None = None,
           initial_state: asg.AssignmentState | None = None) -> TrialResult:
    """Joint beamforming and antenna assignment for one drop."""
    t_start = time.perf_counter()
    p = scenario.params
    n_act = p.N_act if n_act is None else int(n_act)
    if n_act > scenario.N:
        raise InvalidArgumentError(f"n_act={n_act} exceeds N={scenario.N}")
    state = initial_state.copy() if initial_state is not None else asg.initialize_assignment(scenario, n_act)
    seed_pattern = binary_pattern(state.a_T, state.a_R)
    state.tau_T, state.tau_R, state.tau_0, state.tau_d = config.tau_T, config.tau_R, config.tau_0, config.tau_d
    nt, nr = config.n_t_min, config.n_r_min

    try:
        beams = pc.initial_beamformers(scenario, state.a_T, state.a_R)
        beams, restored = ensure_feasible(scenario, state.a_T, state.a_R, beams, margin=config.restore_margin)
    except (InfeasibleSubproblemError, NoReceiveAntennasError) as exc:
        return _infeasible_result(scenario, config, n_act, t_start, f"initialization: {exc}")

    wm0 = sm.update_wmmse(scenario, state.a_T, beams)
    mu0 = config.mu_scale * max(float(np.sum(wm0.w * wm0.e)), 1e-12)
    state.mu = mu0
    mu_cap = mu0 * config.mu_cap_ratio

    R = sm.sum_rate(scenario, state.a_T, beams)
    objective_trace = [R]
    trace: list = []
    log_lines: list = []
    small_moves = 0
    status = TrialStatus.MAX_ITER
    rounded = False
    best_soft = None
    t = 0
    for t in range(config.T_max):
        flags: list = ["restore"] if (t == 0 and restored) else []
        rec: dict = {"t": t + 1}
        aT_old, aR_old = state.a_T.copy(), state.a_R.copy()

        # precoding block
        beams, wm, surrogate = _precoding_block(scenario, state.a_T, state.a_R, beams, flags)
        rec["surrogate"] = surrogate
        stage_sinr = {"precoding": _sinr_or_zero(scenario, state.a_T, state.a_R, beams)}

        # transmit assignment
        if config.extend_inactive:
            cand = [n for n in range(scenario.N) if n not in state.frozen]
            ext = pc.extend_inactive(scenario, state.a_T, state.a_R, beams, wm, cand)
        else:
            ext = beams
        quad_T = asg.build_aT_quadratics(scenario, ext, wm, state.a_R, u=beams.u)
        try:
            a_T_new = asg.solve_aT(scenario, state, quad_T, state.a_T, n_t_min=nt)
        except InfeasibleSubproblemError:
            a_T_new = state.a_T.copy()
            flags.append("stall:aT")
        a_T_new = _snap(scenario, a_T_new, state.a_R, beams, "T")
        # entries that switch on pick up the extended precoder values
        newly_on = (a_T_new > sm.SUPPORT_TOL) & ~(state.a_T > sm.SUPPORT_TOL)
        beams.v[:, newly_on] = ext.v[:, newly_on]
        beams.v0[newly_on] = ext.v0[newly_on]
        state.a_T = a_T_new
        stage_sinr["a_T"] = _sinr_or_zero(scenario, state.a_T, state.a_R, beams)

        # receive assignment
        u_ext = ext.u if config.extend_inactive else beams.u
        quad_R = asg.build_aR_quadratics(scenario, beams, state.a_T, u=u_ext)
        try:
            a_R_new = asg.solve_aR(scenario, state, quad_R, state.a_R, state.a_T, n_r_min=nr)
        except InfeasibleSubproblemError:
            a_R_new = state.a_R.copy()
            flags.append("stall:aR")
        a_R_new = _snap(scenario, state.a_T, a_R_new, beams, "R")
        newly_on = (a_R_new > sm.SUPPORT_TOL) & ~(state.a_R > sm.SUPPORT_TOL)
        beams.u[newly_on] = u_ext[newly_on]
        state.a_R = a_R_new
        stage_sinr["a_R"] = _sinr_or_zero(scenario, state.a_T, state.a_R, beams)
        if not state.is_binary():
            R_soft = sm.sum_rate(scenario, state.a_T, beams)
            if best_soft is None or R_soft > best_soft[0]:
                best_soft = (R_soft, state.a_T.copy(), state.a_R.copy())

        dT_soft = float(np.linalg.norm(state.a_T - aT_old))
        dR_soft = float(np.linalg.norm(state.a_R - aR_old))
        small_moves = small_moves + 1 if (dT_soft <= config.trigger_delta and dR_soft <= config.trigger_delta) else 0
        if not state.hardening_active and (t + 1 > config.trigger_iter or small_moves >= config.trigger_count):
            state.hardening_active = True

        # hardening, forced rounding at T_max - 2
        before = state.copy()
        if state.hardening_active:
            state = asg.harden(state, state.a_T, state.a_R, n_act=n_act, n_t_min=nt, n_r_min=nr)
            asg.tighten_thresholds(state, config.tau_step, config.tau_max, config.tau0_step, config.tau0_min)
            flags.append("harden")
        if not state.is_binary() and t + 1 >= config.T_max - 2:
            aT_b, aR_b = asg.force_binary(state, n_act, nt, nr)
            _freeze_all(state, aT_b, aR_b)
            rounded = True
            flags.append("round")
        if not np.array_equal(state.a_T, before.a_T) or not np.array_equal(state.a_R, before.a_R):
            try:
                beams, did = ensure_feasible(scenario, state.a_T, state.a_R, beams, margin=config.restore_margin)
                if did:
                    flags.append("restore")
            except (InfeasibleSubproblemError, NoReceiveAntennasError):
                # the new pattern cannot meet gamma_0: undo this pass
                state = before
                flags.append("revert")
        stage_sinr["harden"] = _sinr_or_zero(scenario, state.a_T, state.a_R, beams)

        R_new = sm.sum_rate(scenario, state.a_T, beams)
        df = relative_change(R_new, R)
        dT = float(np.linalg.norm(state.a_T - aT_old))
        dR = float(np.linalg.norm(state.a_R - aR_old))
        R = R_new
        objective_trace.append(R)
        phi = asg.penalty(state.a_T, state.a_R)
        rec.update({
            "rate": R, "penalty": phi, "delta_f": df, "delta_T": dT, "delta_R": dR, "mu": state.mu,
            "stage_sinr": stage_sinr, "power": _power(state.a_T, beams), "flags": list(flags),
            "frozen": [len(state.frozen_Tx), len(state.frozen_Rx), len(state.frozen_Off)],
        })
        trace.append(rec)
        line = (f"t={t + 1} R={R:.6f} Phi={phi:.3e} df={df:.3e} dT={dT:.3e} dR={dR:.3e} "
                f"frozen={len(state.frozen_Tx)}/{len(state.frozen_Rx)}/{len(state.frozen_Off)} "
                f"mu={state.mu:.3e}" + (f" [{','.join(flags)}]" if flags else ""))
        log_lines.append(line)
        log.debug(line)

        signal = is_converged(df, dT, dR, config)
        if state.hardening_active and signal and state.is_binary():
            status = TrialStatus.CONVERGED
            break
        state.mu = min(state.mu * config.mu_growth, mu_cap)
        if signal and not state.is_binary():
            state.mu = min(state.mu * config.mu_boost, mu_cap)

    iterations = t + 1
    if not state.is_binary():
        aT_b, aR_b = asg.force_binary(state, n_act, nt, nr)
        _freeze_all(state, aT_b, aR_b)
        rounded = True
    a_T, a_R = state.a_T, state.a_R
    candidates = [("final", a_T, a_R, beams)]
    if seed_pattern is not None and not (np.array_equal(seed_pattern[0], a_T) and np.array_equal(seed_pattern[1], a_R)):
        candidates.append(("seed", seed_pattern[0], seed_pattern[1], None))
    if best_soft is not None:
        aT_s, aR_s = asg.force_binary(asg.AssignmentState(best_soft[1], best_soft[2]), n_act, nt, nr)
        if not any(np.array_equal(aT_s, c[1]) and np.array_equal(aR_s, c[2]) for c in candidates):
            candidates.append(("relaxed", aT_s, aR_s, None))
    best, polish = _polish_candidates(scenario, config, candidates)
    diagnostics = {"forced_rounding": rounded, "polish": polish}
    if best is None:
        return _infeasible_result(scenario, config, n_act, t_start, "final assignment cannot meet gamma_0",
                                  {"a_T": a_T.tolist(), "a_R": a_R.tolist(), "polish": polish},
                                  trace=trace, log_lines=log_lines)
    label, a_T, a_R, beams, polish_trace = best
    diagnostics["selected"] = label
    diagnostics["polish_trace"] = polish_trace
    return _finalize(scenario, config, n_act, status, a_T, a_R, beams, iterations, objective_trace,
                     t_start, trace=trace, log_lines=log_lines, diagnostics=diagnostics)


def binary_pattern(a_T, a_R):
    """Hard pattern implied by a soft state: each live antenna takes its larger role."""
    a_T = np.asarray(a_T, float)
    a_R = np.asarray(a_R, float)
    live = (a_T + a_R) > sm.SUPPORT_TOL
    tx = (live & (a_T > a_R)).astype(float)
    rx = (live & (a_R >= a_T)).astype(float)
    if tx.sum() < 1 or rx.sum() < 1:
        return None
    return tx, rx


def _certified(scenario, a_T, a_R, beams) -> bool:
    p = scenario.params
    return (_sinr_or_zero(scenario, a_T, a_R, beams) >= p.gamma_0 * (1.0 - SINR_CERT_RTOL)
            and _power(a_T, beams) <= p.P_max * (1.0 + POWER_CERT_RTOL))


def polish_multistart(scenario, a_T, a_R, config: AoConfig = AoConfig(), warm=None, max_iters=None):
    """Beamformer optimization on a fixed binary pattern from several starts.

    Starts: the default MMSE / maximum-ratio initialization, the closed-form
    zero-forcing design (when it meets gamma_0) and ``warm`` if given. The
    best certified outcome wins. Returns (beams, trace, start, summary) with
    beams None when no start produced a certified point.
    """
    max_iters = config.polish_iters if max_iters is None else max_iters
    starts = [("fresh", None)]
    design = pc.closed_form_design(scenario, a_T, a_R)
    if design is not None:
        starts.append(("design", design))
    if warm is not None:
        starts.append(("warm", warm.copy()))
    best, best_rate, summary = (None, None, None), -np.inf, []
    for start, beams0 in starts:
        try:
            beams, trace, _, _ = optimize_beamformers(scenario, a_T, a_R, config, beams=beams0,
                                                      max_iters=max_iters)
        except (InfeasibleSubproblemError, NoReceiveAntennasError) as exc:
            summary.append({"start": start, "error": str(exc)})
            continue
        rate = sm.sum_rate(scenario, a_T, beams)
        ok = _certified(scenario, a_T, a_R, beams)
        summary.append({"start": start, "rate": rate, "certified": bool(ok)})
        if ok and rate > best_rate:
            best, best_rate = (beams, trace, start), rate
    return (*best, summary)


def _polish_candidates(scenario, config: AoConfig, candidates):
    """Multi-start precoder re-solve on each binary candidate; keep the best.

    Returns (best, summary) with best = (label, a_T, a_R, beams, trace) or None.
    """
    best, best_rate, summary = None, -np.inf, []
    for label, a_T, a_R, warm in candidates:
        beams, trace, start, runs = polish_multistart(scenario, a_T, a_R, config, warm=warm)
        summary += [{"candidate": label, **r} for r in runs]
        if beams is None:
            continue
        rate = sm.sum_rate(scenario, a_T, beams)
        if rate > best_rate:
            best, best_rate = (f"{label}/{start}", np.asarray(a_T, float), np.asarray(a_R, float),
                               beams, trace), rate
    return best, summary


def _finalize(scenario, config, n_act, status, a_T, a_R, beams, iterations, objective_trace, t_start,
              trace=None, log_lines=None, diagnostics=None, **extra) -> TrialResult:
    sinr = _sinr_or_zero(scenario, a_T, a_R, beams)
    if sinr < scenario.params.gamma_0 * (1.0 - SINR_CERT_RTOL):
        status = TrialStatus.SENSING_INFEASIBLE
    rates = sm.rates(scenario, a_T, beams)
    return TrialResult(
        scheme=config.scheme, status=status, sum_rate=float(rates.sum()), per_ue_rates=rates,
        achieved_sensing_sinr=sinr, power=_power(a_T, beams), a_T=np.asarray(a_T, float).copy(),
        a_R=np.asarray(a_R, float).copy(), n_act=n_act, gamma_0=scenario.params.gamma_0,
        P_max=scenario.params.P_max, iterations_used=iterations, objective_trace=list(objective_trace),
        beams=beams, trace=trace or [], log_lines=log_lines or [], runtime_s=time.perf_counter() - t_start,
        diagnostics=diagnostics or {}, geometry=scenario.geometry.to_dict(), **extra,
    )


# ---------------------------------------------------------------------------
# baseline arrays

def closest_factorization(n: int, aspect: float = 1.0) -> tuple[int, int]:
    """(n_x, n_y) with n_x * n_y = n, n_x >= n_y, ratio closest to ``aspect`` (in log scale).

    With the default aspect of 1 this minimizes |n_x - n_y|.
    """
    if n < 1:
        raise InvalidArgumentError(f"cannot factor {n}")
    aspect = max(aspect, 1.0 / aspect)
    best = None
    for ny in range(1, int(math.isqrt(n)) + 1):
        if n % ny:
            continue
        nx = n // ny
        key = (abs(math.log(nx / ny) - math.log(aspect)), nx - ny)
        if best is None or key < best[0]:
            best = (key, (nx, ny))
    return best[1]


def _lattice_indices(pool: ArrayGeometry, geometry: ArrayGeometry):
    try:
        return [pool.index_of(pos) for pos in geometry.positions]
    except InvalidArgumentError:
        return None


def upa_subarray(pool: ArrayGeometry, n_act: int, wavelength: float):
    """Compact half-wavelength UPA with ``n_act`` elements, centered on the pool.

    Returns (geometry, indices) where ``indices`` lists the pool antennas it
    occupies, or None when it does not coincide with pool positions (then
    the caller synthesizes its channels). When the centered offset is not a
    whole number of pool steps the sub-array is shifted down/left by half a
    step so it stays on the lattice.
    """
    nx, ny = closest_factorization(n_act)
    half = wavelength / 2.0
    on_grid = math.isclose(pool.dx, half, rel_tol=1e-9) and math.isclose(pool.dy, half, rel_tol=1e-9)
    if on_grid:
        for cx, cy in ((nx, ny), (ny, nx)):
            if cx <= pool.Nx and cy <= pool.Ny:
                i0, j0 = (pool.Nx - cx) // 2, (pool.Ny - cy) // 2
                geom = ArrayGeometry(cx, cy, pool.dx, pool.dy, pool.bs_height + j0 * pool.dy,
                                     x_offset=pool.x_offset + i0 * pool.dx)
                return geom, _lattice_indices(pool, geom)
    c = pool.center
    geom = ArrayGeometry(nx, ny, half, half, c[1] - 0.5 * (ny - 1) * half, x_offset=c[0] - 0.5 * (nx - 1) * half)
    return geom, _lattice_indices(pool, geom)


def large_aperture_array(pool: ArrayGeometry, n_act: int):
    """Rectangular ``n_act``-element array spanning the pool's aperture."""
    nx, ny = closest_factorization(n_act, aspect=pool.Nx / pool.Ny)
    if (pool.Nx >= pool.Ny) != (nx >= ny):
        nx, ny = ny, nx
    if pool.Nx < pool.Ny and nx > ny:
        nx, ny = ny, nx
    width = (pool.Nx - 1) * pool.dx
    height = (pool.Ny - 1) * pool.dy
    c = pool.center
    dx = width / (nx - 1) if nx > 1 and width > 0 else pool.dx
    dy = height / (ny - 1) if ny > 1 and height > 0 else pool.dy
    x0 = pool.x_offset if nx > 1 else c[0]
    y0 = pool.bs_height if ny > 1 else c[1]
    geom = ArrayGeometry(nx, ny, dx, dy, y0, x_offset=x0)
    return geom, _lattice_indices(pool, geom)


def _baseline_scenario(scenario: Scenario, geometry: ArrayGeometry, indices, tag: int) -> Scenario:
    if indices is not None:
        if list(indices) == list(range(scenario.N)):
            # the sub-array is the whole pool; reuse it so both runs see identical arrays
            return scenario
        return scenario.subset(indices, geometry)
    si_seed = derive_seed(scenario.seed if scenario.seed is not None else 0, 7919, tag)
    return synthesize(geometry, scenario.params, scenario.ue_positions, scenario.target_position,
                      si_seed=si_seed, seed=scenario.seed)


def left_right_split(geometry: ArrayGeometry):
    """Left columns transmit, right columns receive (transmit gets the extra column)."""
    n_tx_cols = (geometry.Nx + 1) // 2
    cols = np.arange(geometry.N) % geometry.Nx
    a_T = (cols < n_tx_cols).astype(float)
    return a_T, 1.0 - a_T


def run_baseline(scenario: Scenario, config: AoConfig, n_act: int | None = None) -> TrialResult:
    """UPA-opt, UPA-fixed or large-aperture baseline for the pool ``scenario``."""
    scheme = Scheme(config.scheme)
    if scheme is Scheme.PROPOSED:
        raise InvalidArgumentError("run_baseline expects a baseline scheme")
    n_act = scenario.params.N_act if n_act is None else int(n_act)
    if n_act < 2:
        raise InvalidArgumentError("baselines need at least two antennas")
    if scheme is Scheme.LARGE_APERTURE:
        geom, idx = large_aperture_array(scenario.geometry, n_act)
        tag = 2
    else:
        geom, idx = upa_subarray(scenario.geometry, n_act, scenario.params.wavelength)
        tag = 1
    sub = _baseline_scenario(scenario, geom, idx, tag)
    if scheme is Scheme.UPA_FIXED:
        t0 = time.perf_counter()
        a_T, a_R = left_right_split(geom)
        beams, trace, start, runs = polish_multistart(sub, a_T, a_R, config, max_iters=config.T_max)
        if beams is None:
            return _infeasible_result(sub, config, n_act, t0, "fixed split cannot meet gamma_0",
                                      {"polish": runs}, antenna_indices=idx, geometry=geom.to_dict())
        status = TrialStatus.CONVERGED if len(trace) - 1 < config.T_max else TrialStatus.MAX_ITER
        return _finalize(sub, config, n_act, status, a_T, a_R, beams, len(trace) - 1, trace, t0,
                         antenna_indices=idx, diagnostics={"polish": runs, "selected": f"fixed/{start}"})
    res = run_ao(sub, config, n_act=n_act)
    res.antenna_indices = idx
    res.geometry = geom.to_dict()
    return res


def run_scheme(scenario: Scenario, config: AoConfig, n_act: int | None = None) -> TrialResult:
    if Scheme(config.scheme) is Scheme.PROPOSED:
        return run_ao(scenario, config, n_act=n_act)
    return run_baseline(scenario, config, n_act=n_act)
