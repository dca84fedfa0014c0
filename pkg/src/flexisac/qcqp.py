"""Dense convex QCQP solver and the complex-to-real embedding helpers.

Problem form (all matrices real symmetric PSD)::

    minimize    x^T P0 x + 2 q0^T x + r0
    subject to  x^T Pi x + 2 qi^T x + ri <= 0      (quadratic)
                ai^T x <= bi                        (linear)
                lo <= x <= hi                       (box, optional)

The solver follows the log-barrier central path from a strictly feasible
point (damped Newton steps with an Armijo backtracking line search that
never leaves the interior). When the start is not strictly feasible a
phase-I problem minimizes the maximum constraint value; a positive optimum
certifies infeasibility.

Coordinates with ``lo == hi`` are eliminated before solving. Each quadratic
row is normalized by the magnitude of its terms at the starting hint (or of
its coefficients when no hint is given) and each linear row by its
coefficients, so reported ``max_violation`` values are relative to that
scale.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import InvalidArgumentError, InvalidProblemError

log = logging.getLogger(__name__)

PSD_RTOL = 1e-10


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITER = "MaxIter"


@dataclasses.dataclass
class QcqpProblem:
    n: int
    P0: np.ndarray
    q0: np.ndarray
    r0: float = 0.0
    ineqs: list = dataclasses.field(default_factory=list)          # (P, q, r)
    linear_ineqs: list = dataclasses.field(default_factory=list)   # (a, b)
    box: tuple | None = None                                       # (lo, hi)

    def objective(self, x) -> float:
        x = np.asarray(x, float)
        return float(x @ self.P0 @ x + 2.0 * self.q0 @ x + self.r0)

    def constraint_values(self, x) -> np.ndarray:
        """Raw (unnormalized) values of every inequality, box rows last."""
        x = np.asarray(x, float)
        vals = [x @ P @ x + 2.0 * q @ x + r for P, q, r in self.ineqs]
        vals += [a @ x - b for a, b in self.linear_ineqs]
        if self.box is not None:
            lo, hi = (np.broadcast_to(np.asarray(v, float), (self.n,)) for v in self.box)
            vals += list(np.where(np.isfinite(lo), lo - x, -np.inf))
            vals += list(np.where(np.isfinite(hi), x - hi, -np.inf))
        return np.asarray(vals, float)

    def to_dict(self) -> dict:
        d = {
            "n": self.n,
            "P0": np.asarray(self.P0).tolist(),
            "q0": np.asarray(self.q0).tolist(),
            "r0": float(self.r0),
            "ineqs": [[np.asarray(P).tolist(), np.asarray(q).tolist(), float(r)] for P, q, r in self.ineqs],
            "linear_ineqs": [[np.asarray(a).tolist(), float(b)] for a, b in self.linear_ineqs],
            "box": None,
        }
        if self.box is not None:
            lo, hi = (np.broadcast_to(np.asarray(v, float), (self.n,)) for v in self.box)
            d["box"] = [[float(v) for v in lo], [float(v) for v in hi]]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QcqpProblem":
        box = None
        if d.get("box") is not None:
            box = (np.asarray(d["box"][0], float), np.asarray(d["box"][1], float))
        return cls(
            n=int(d["n"]),
            P0=np.asarray(d["P0"], float).reshape(d["n"], d["n"]),
            q0=np.asarray(d["q0"], float),
            r0=float(d["r0"]),
            ineqs=[(np.asarray(P, float), np.asarray(q, float), float(r)) for P, q, r in d["ineqs"]],
            linear_ineqs=[(np.asarray(a, float), float(b)) for a, b in d["linear_ineqs"]],
            box=box,
        )


@dataclasses.dataclass
class QcqpSolution:
    x: np.ndarray
    status: Status
    objective_value: float
    max_violation: float
    kkt_residual: float
    iterations: int = 0
    history: list = dataclasses.field(default_factory=list)
    phase1_value: float | None = None

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


def dump_problem(problem: QcqpProblem, path) -> None:
    with open(path, "w") as fh:
        json.dump(problem.to_dict(), fh)


def load_problem(path) -> QcqpProblem:
    with open(path) as fh:
        return QcqpProblem.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# complex <-> real embedding

def embed_hermitian(Q, atol: float = 1e-9) -> np.ndarray:
    """Real 2N x 2N form of a Hermitian matrix for x = [Re v; Im v]."""
    Q = np.asarray(Q, complex)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise InvalidArgumentError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(Q)))) if Q.size else 1.0
    if Q.size and np.max(np.abs(Q - Q.conj().T)) > atol * scale:
        raise InvalidArgumentError("matrix is not Hermitian")
    Q = 0.5 * (Q + Q.conj().T)
    return np.block([[Q.real, -Q.imag], [Q.imag, Q.real]])


def embed_linear(b) -> np.ndarray:
    """Real vector with b_tilde^T x = Re{b^H v}."""
    b = np.asarray(b, complex)
    return np.concatenate([b.real, b.imag])


def to_real(v) -> np.ndarray:
    v = np.asarray(v, complex)
    return np.concatenate([v.real, v.imag])


def to_complex(x) -> np.ndarray:
    x = np.asarray(x, float)
    n = x.size // 2
    return x[:n] + 1j * x[n:]


# ---------------------------------------------------------------------------
# solver

def _repair_psd(P: np.ndarray, name: str) -> np.ndarray:
    P = 0.5 * (P + P.T)
    n = P.shape[0]
    if n == 0:
        return P
    diag = np.diag(P)
    tr = float(np.sum(np.abs(diag)))
    if tr == 0.0 and not np.any(P):
        return P
    if not np.any(P - np.diag(diag)):
        if diag.min() >= -PSD_RTOL * tr:
            return np.diag(np.maximum(diag, 0.0))
        raise InvalidProblemError(f"{name} is not PSD (min eigenvalue {diag.min():.3e})")
    try:
        np.linalg.cholesky(P + (PSD_RTOL * tr + 1e-300) * np.eye(n))
        return P
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(P)
    if w.min() < -PSD_RTOL * max(tr, 1e-300):
        raise InvalidProblemError(f"{name} is not PSD (min eigenvalue {w.min():.3e}, trace {tr:.3e})")
    w = np.maximum(w, 0.0)
    return (V * w) @ V.T


@dataclasses.dataclass
class _Internal:
    """Reduced, row-normalized problem over the free coordinates."""

    P0: np.ndarray
    q0: np.ndarray
    r0: float
    Pq: np.ndarray     # (mq, n, n)
    qq: np.ndarray     # (mq, n)
    rq: np.ndarray     # (mq,)
    A: np.ndarray      # (ml, n)
    b: np.ndarray      # (ml,)

    @property
    def n(self):
        return self.P0.shape[0]

    @property
    def m(self):
        return self.rq.size + self.b.size

    def f0(self, x):
        return float(x @ self.P0 @ x + 2.0 * self.q0 @ x + self.r0)

    def grad0(self, x):
        return 2.0 * (self.P0 @ x + self.q0)

    def cons(self, x):
        """Constraint values (m,) and gradients (m, n)."""
        if self.rq.size:
            Px = self.Pq @ x
            fq = np.einsum("ij,j->i", Px, x) + 2.0 * self.qq @ x + self.rq
            Jq = 2.0 * (Px + self.qq)
        else:
            fq = np.zeros(0)
            Jq = np.zeros((0, self.n))
        fl = self.A @ x - self.b
        return np.concatenate([fq, fl]), np.vstack([Jq, self.A])

    def cons_values(self, x):
        if self.rq.size:
            fq = np.einsum("ij,j->i", self.Pq @ x, x) + 2.0 * self.qq @ x + self.rq
        else:
            fq = np.zeros(0)
        return np.concatenate([fq, self.A @ x - self.b])


def _reduce(problem: QcqpProblem, x_ref=None):
    n = problem.n
    P0 = np.asarray(problem.P0, float).reshape(n, n)
    q0 = np.asarray(problem.q0, float).reshape(n)
    P0 = _repair_psd(P0, "objective matrix")
    quads = []
    for i, (P, q, r) in enumerate(problem.ineqs):
        P = np.asarray(P, float).reshape(n, n)
        quads.append((_repair_psd(P, f"constraint matrix {i}"), np.asarray(q, float).reshape(n), float(r)))
    lins = [(np.asarray(a, float).reshape(n), float(b)) for a, b in problem.linear_ineqs]

    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    if problem.box is not None:
        lo = np.broadcast_to(np.asarray(problem.box[0], float), (n,)).copy()
        hi = np.broadcast_to(np.asarray(problem.box[1], float), (n,)).copy()
    if np.any(lo > hi):
        return None
    fixed = np.isfinite(lo) & (hi - lo <= 0.0)
    free = np.flatnonzero(~fixed)
    fix_idx = np.flatnonzero(fixed)
    c = lo[fix_idx]

    def reduce_quad(P, q, r):
        Pff = P[np.ix_(free, free)]
        qf = q[free] + P[np.ix_(free, fix_idx)] @ c
        rr = r + c @ P[np.ix_(fix_idx, fix_idx)] @ c + 2.0 * q[fix_idx] @ c
        return Pff, qf, rr

    P0r, q0r, r0r = reduce_quad(P0, q0, float(problem.r0))
    Pq, qq, rq = [], [], []
    xr = None if x_ref is None else np.asarray(x_ref, float).reshape(n)[free]
    for P, q, r in quads:
        Pf, qf, rf = reduce_quad(P, q, r)
        # scale by the size of the row's terms at the reference point when
        # available: coefficient magnitudes can be dominated by directions
        # the solution never uses
        s = 0.0
        if xr is not None:
            s = max(abs(float(xr @ Pf @ xr)), abs(2.0 * float(qf @ xr)), abs(rf))
        if not s > 0:
            s = max(np.max(np.abs(Pf)) if Pf.size else 0.0, np.max(np.abs(qf)) if qf.size else 0.0, abs(rf))
        s = s if s > 0 else 1.0
        Pq.append(Pf / s)
        qq.append(qf / s)
        rq.append(rf / s)
    A, b = [], []
    for a, bb in lins:
        af = a[free]
        bf = bb - a[fix_idx] @ c
        s = max(np.max(np.abs(af)) if af.size else 0.0, abs(bf))
        s = s if s > 0 else 1.0
        A.append(af / s)
        b.append(bf / s)
    nf = free.size
    for j, idx in enumerate(free):
        if np.isfinite(lo[idx]):
            row = np.zeros(nf)
            row[j] = -1.0
            s = max(1.0, abs(lo[idx]))
            A.append(row / s)
            b.append(-lo[idx] / s)
        if np.isfinite(hi[idx]):
            row = np.zeros(nf)
            row[j] = 1.0
            s = max(1.0, abs(hi[idx]))
            A.append(row / s)
            b.append(hi[idx] / s)
    internal = _Internal(
        P0=P0r, q0=q0r, r0=r0r,
        Pq=np.array(Pq).reshape(len(Pq), nf, nf), qq=np.array(qq).reshape(len(qq), nf),
        rq=np.array(rq, float),
        A=np.array(A).reshape(len(A), nf), b=np.array(b, float),
    )
    return internal, free, fix_idx, c, lo, hi


def _newton_solve(H, rhs):
    n = H.shape[0]
    ridge = 1e-13 * (1.0 + float(np.max(np.abs(np.diag(H))))) if n else 0.0
    try:
        cf = sla.cho_factor(H + ridge * np.eye(n), check_finite=False)
        return sla.cho_solve(cf, rhs, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        return np.linalg.lstsq(H, rhs, rcond=None)[0]


def _barrier(prob: _Internal, x, tol, max_iter, stop: Callable | None = None, history=None,
             growth: float = 20.0, centering_tol: float = 1e-10):
    """Log-barrier path following from a strictly feasible ``x``.

    Each stage minimizes t f0(x) - sum log(-f_i(x)) by damped Newton steps
    with a backtracking (Armijo) line search that keeps every iterate
    strictly feasible; t then grows by ``growth`` until the duality gap
    m / t is below ``tol``. ``max_iter`` counts Newton steps.

    Returns (x, lam, converged, newton_steps, stopped_early).
    """
    m = prob.m
    if m == 0:
        # unconstrained: single Newton step on the quadratic
        x = x + _newton_solve(2.0 * prob.P0, -prob.grad0(x))
        return x, np.zeros(0), True, 1, False
    mq = prob.rq.size
    t = m / (1.0 + abs(prob.f0(x)))
    it = 0
    converged = False

    def merit(xx, tt):
        fx = prob.cons_values(xx)
        if not np.all(fx < 0):
            return np.inf
        return tt * prob.f0(xx) - float(np.sum(np.log(-fx)))

    while True:
        while it < max_iter:
            if stop is not None and stop(x):
                f = prob.cons_values(x)
                return x, 1.0 / (t * -f), False, it, True
            f, J = prob.cons(x)
            d = 1.0 / -f
            g = t * prob.grad0(x) + J.T @ d
            H = 2.0 * t * prob.P0 + (J.T * d ** 2) @ J
            if mq:
                H += 2.0 * np.tensordot(d[:mq], prob.Pq, axes=1)
            dx = _newton_solve(H, -g)
            dec2 = float(-g @ dx)
            if not dec2 > 2.0 * centering_tol:
                break
            phi0 = merit(x, t)
            s = 1.0
            phi1 = merit(x + dx, t)
            while phi1 > phi0 - 0.01 * s * dec2 and s > 1e-14:
                s *= 0.5
                phi1 = merit(x + s * dx, t)
            if not phi1 < phi0:
                log.debug("barrier line search stalled (t=%.3e, decrement %.3e)", t, dec2)
                break
            it += 1
            if history is not None:
                history.append({"iter": it, "t": t, "gap": m / t, "merit_before": phi0,
                                "merit_after": phi1, "step": s})
            x = x + s * dx
        if m / t <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        t *= growth
    f = prob.cons_values(x)
    return x, 1.0 / (t * -f), converged, it, False


def _kkt_residual(prob: _Internal, x, lam):
    if prob.m == 0:
        return float(np.linalg.norm(prob.grad0(x)))
    f, J = prob.cons(x)
    return max(float(np.linalg.norm(prob.grad0(x) + J.T @ lam)), float(-f @ lam))


def _phase1(prob: _Internal, x0, tol, max_iter, history):
    """Minimize s subject to f_i(x) <= s (and s >= -1)."""
    n = prob.n
    mq = prob.rq.size
    ml = prob.b.size
    Pq = np.zeros((mq, n + 1, n + 1))
    Pq[:, :n, :n] = prob.Pq
    qq = np.zeros((mq, n + 1))
    qq[:, :n] = prob.qq
    qq[:, n] = -0.5
    A = np.zeros((ml + 1, n + 1))
    A[:ml, :n] = prob.A
    A[:ml, n] = -1.0
    A[ml, n] = -1.0
    b = np.concatenate([prob.b, [1.0]])
    P0 = np.zeros((n + 1, n + 1))
    q0 = np.zeros(n + 1)
    q0[n] = 0.5
    ph = _Internal(P0=P0, q0=q0, r0=0.0, Pq=Pq, qq=qq, rq=prob.rq.copy(), A=A, b=b)
    s0 = max(float(np.max(prob.cons_values(x0))), -0.5) + 1.0
    y = np.concatenate([x0, [s0]])

    def stop(yy):
        # strictly feasible for the original rows; the slack itself may lag behind
        return yy[n] < -1e-7 or float(np.max(prob.cons_values(yy[:n]))) < -1e-7

    y, lam, converged, iters, stopped = _barrier(ph, y, tol, max_iter, stop=stop, history=history)
    x = y[:n]
    return x, float(np.max(prob.cons_values(x))) if prob.m else -np.inf, converged or stopped, iters


def solve(problem: QcqpProblem, x0=None, feas_tol: float = 1e-9, kkt_tol: float = 1e-8,
          max_iter: int = 400) -> QcqpSolution:
    """Solve a convex QCQP. ``x0`` is an optional (not necessarily feasible) starting hint."""
    n = int(problem.n)
    reduced = _reduce(problem, x0)
    if reduced is None:
        return QcqpSolution(np.zeros(n), Status.INFEASIBLE, np.nan, np.inf, np.nan)
    prob, free, fix_idx, c, lo, hi = reduced

    def full(xf):
        x = np.zeros(n)
        x[free] = xf
        x[fix_idx] = c
        return x

    if x0 is None:
        xf = np.zeros(free.size)
    else:
        xf = np.asarray(x0, float).reshape(n)[free].copy()
    lo_f, hi_f = lo[free], hi[free]
    both = np.isfinite(lo_f) & np.isfinite(hi_f)
    # pull the hint strictly inside finite boxes
    width = np.where(both, hi_f - lo_f, 1.0)
    margin = 1e-3 * width
    xf = np.clip(xf, np.where(np.isfinite(lo_f), lo_f + margin, -np.inf),
                 np.where(np.isfinite(hi_f), hi_f - margin, np.inf))

    scale = 1.0 + abs(prob.f0(xf))
    tol = kkt_tol * scale
    history: list = []

    if prob.n == 0:
        x = full(xf)
        viol = float(max(0.0, np.max(prob.cons_values(xf)))) if prob.m else 0.0
        status = Status.OPTIMAL if viol <= feas_tol else Status.INFEASIBLE
        return QcqpSolution(x, status, problem.objective(x), viol, 0.0)

    phase1_value = None
    if prob.m and np.max(prob.cons_values(xf)) >= 0.0:
        xf, phase1_value, ok, _ = _phase1(prob, xf, tol=min(tol, feas_tol) * 1e-2, max_iter=max_iter,
                                          history=None)
        if phase1_value >= 0.0:
            if not ok:
                return QcqpSolution(full(xf), Status.MAX_ITER, problem.objective(full(xf)),
                                    phase1_value, np.nan, phase1_value=phase1_value)
            if phase1_value > 0.5 * feas_tol:
                return QcqpSolution(full(xf), Status.INFEASIBLE, problem.objective(full(xf)),
                                    phase1_value, np.nan, phase1_value=phase1_value)
            # no strict interior at this tolerance: relax every row slightly
            relax = phase1_value + 0.5 * feas_tol
            prob = dataclasses.replace(prob, rq=prob.rq - relax, b=prob.b + relax)

    xf, lam, converged, iters, _ = _barrier(prob, xf, tol, max_iter, history=history)
    x = full(xf)
    viol = float(max(0.0, np.max(_Internal.cons_values(prob, xf)))) if prob.m else 0.0
    if phase1_value is not None and phase1_value >= 0.0:
        viol = max(viol, phase1_value + 0.5 * feas_tol)
    kkt = _kkt_residual(prob, xf, lam) / scale
    status = Status.OPTIMAL if converged and viol <= feas_tol else Status.MAX_ITER
    return QcqpSolution(x, status, problem.objective(x), viol, kkt, iters, history, phase1_value)
