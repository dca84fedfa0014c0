"""Monte Carlo sweeps over N_act, antenna spacing or the sensing threshold.

Every trial index maps to one drop (UE and target positions plus the SI
phases), derived from the master seed and the trial index alone. All
schemes and all sweep values at a trial index therefore see the same
drop, which makes the comparisons paired.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import ao
from .errors import InvalidArgumentError
from .scenario import ArrayGeometry, SystemParams, db_to_linear, derive_seed, sample_drop

log = logging.getLogger(__name__)

CSV_HEADER = ("scheme", "sweep_param", "sweep_value", "mean_sum_rate", "stderr", "feasible_frac",
              "mean_iters", "mean_runtime_s")


class Sweep(str, enum.Enum):
    N_ACT = "NactSweep"
    SPACING = "SpacingSweep"
    GAMMA0 = "Gamma0Sweep"

    @property
    def param(self) -> str:
        return {"NactSweep": "N_act", "SpacingSweep": "spacing_wavelengths",
                "Gamma0Sweep": "gamma0_db"}[self.value]

    @classmethod
    def parse(cls, text) -> "Sweep":
        if isinstance(text, Sweep):
            return text
        aliases = {"n_act": cls.N_ACT, "nact": cls.N_ACT, "spacing": cls.SPACING,
                   "gamma0": cls.GAMMA0, "gamma0_db": cls.GAMMA0, "gamma_0": cls.GAMMA0}
        key = str(text).strip()
        for member in cls:
            if key == member.value:
                return member
        try:
            return aliases[key.lower()]
        except KeyError:
            raise InvalidArgumentError(f"unknown sweep {text!r}") from None


@dataclasses.dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: values x schemes x trials over a rectangular antenna pool.

    ``spacing`` is the pool pitch in wavelengths; ``gamma0_db`` the sensing
    threshold and ``n_act`` the activation budget whenever they are not the
    swept quantity. ``params`` and ``ao`` hold overrides of SystemParams and
    AoConfig fields.
    """

    sweep: Sweep
    values: tuple
    schemes: tuple = tuple(ao.Scheme)
    trials: int = 20
    master_seed: int = 0
    Nx: int = 6
    Ny: int = 4
    spacing: float = 0.5
    bs_height: float = 12.5
    n_act: int = 12
    gamma0_db: float = 10.0
    params: dict = dataclasses.field(default_factory=dict)
    ao: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sweep", Sweep.parse(self.sweep))
        values = tuple(float(v) for v in self.values)
        if not values:
            raise InvalidArgumentError("at least one sweep value is required")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise InvalidArgumentError(f"sweep values must be strictly increasing, got {values}")
        if self.sweep is Sweep.N_ACT:
            if any(v != int(v) or v < 2 for v in values):
                raise InvalidArgumentError("N_act values must be integers >= 2")
            values = tuple(int(v) for v in values)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "schemes", tuple(ao.Scheme(s) for s in self.schemes))
        if not self.schemes:
            raise InvalidArgumentError("at least one scheme is required")
        if int(self.trials) != self.trials or self.trials < 1:
            raise InvalidArgumentError(f"trials must be a positive integer, got {self.trials}")
        if self.Nx < 1 or self.Ny < 1 or not self.spacing > 0:
            raise InvalidArgumentError("pool dimensions and spacing must be positive")
        unknown = set(self.params) - {f.name for f in dataclasses.fields(SystemParams)}
        if unknown:
            raise InvalidArgumentError(f"unknown SystemParams fields: {sorted(unknown)}")
        unknown = set(self.ao) - {f.name for f in dataclasses.fields(ao.AoConfig)}
        if unknown:
            raise InvalidArgumentError(f"unknown AoConfig fields: {sorted(unknown)}")
        # fail early on bad values
        self.system_params(values[0])
        self.ao_config(self.schemes[0])

    # per-point inputs
    def system_params(self, value) -> SystemParams:
        p = SystemParams(**self.params)
        n_act = int(value) if self.sweep is Sweep.N_ACT else int(self.n_act)
        g_db = float(value) if self.sweep is Sweep.GAMMA0 else float(self.gamma0_db)
        return p.replace(N_act=n_act, gamma_0=float(db_to_linear(g_db)))

    def geometry(self, value) -> ArrayGeometry:
        pitch = float(value) if self.sweep is Sweep.SPACING else float(self.spacing)
        d = pitch * SystemParams(**self.params).wavelength
        return ArrayGeometry(self.Nx, self.Ny, d, d, self.bs_height)

    def ao_config(self, scheme) -> ao.AoConfig:
        return ao.AoConfig(**{**self.ao, "scheme": ao.Scheme(scheme)})

    def trial_seed(self, trial: int) -> int:
        return derive_seed(self.master_seed, trial)

    def to_dict(self) -> dict:
        return {
            "sweep": self.sweep.value, "values": list(self.values),
            "schemes": [s.value for s in self.schemes], "trials": self.trials,
            "master_seed": self.master_seed, "Nx": self.Nx, "Ny": self.Ny, "spacing": self.spacing,
            "bs_height": self.bs_height, "n_act": self.n_act, "gamma0_db": self.gamma0_db,
            "params": dict(self.params), "ao": {k: _plain(v) for k, v in self.ao.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        d["values"] = tuple(d["values"])
        d["schemes"] = tuple(d.get("schemes", tuple(ao.Scheme)))
        return cls(**d)

    def replace(self, **changes) -> "ExperimentSpec":
        return dataclasses.replace(self, **changes)


def _plain(v):
    return v.value if isinstance(v, enum.Enum) else v


def preset(name: str, sweep="NactSweep", **overrides) -> ExperimentSpec:
    """Named setups. ``desk`` is a 6x4 pool with 4 users; ``full`` the full-size deployment."""
    sweep = Sweep.parse(sweep)
    if name == "desk":
        base = dict(Nx=6, Ny=4, trials=20, n_act=12, gamma0_db=10.0, params={"K": 4})
        values = {Sweep.N_ACT: (8, 16, 24), Sweep.SPACING: (0.5, 0.75, 1.0),
                  Sweep.GAMMA0: (5.0, 10.0, 15.0)}[sweep]
    elif name == "full":
        if sweep is Sweep.SPACING:
            base = dict(Nx=12, Ny=4, trials=100, n_act=36, gamma0_db=15.0, params={"K": 10})
        else:
            base = dict(Nx=20, Ny=6, trials=100, n_act=36, gamma0_db=15.0, params={"K": 10})
        values = {Sweep.N_ACT: (16, 25, 36, 49, 64, 81, 100), Sweep.SPACING: (0.5, 0.75, 1.0),
                  Sweep.GAMMA0: (5.0, 10.0, 15.0, 20.0)}[sweep]
    else:
        raise InvalidArgumentError(f"unknown preset {name!r} (expected 'desk' or 'full')")
    spec = dict(base, sweep=sweep, values=values)
    params = {**spec["params"], **overrides.pop("params", {})}
    spec.update(overrides)
    spec["params"] = params
    return ExperimentSpec(**spec)


# ---------------------------------------------------------------------------
# results

@dataclasses.dataclass
class TrialRecord:
    scheme: str
    sweep_value: float
    trial: int
    seed: int
    status: str
    feasible: bool
    sum_rate: float
    sensing_sinr: float
    power: float
    tx: list
    rx: list
    iterations: int
    runtime_s: float
    selected: str | None = None
    violations: list = dataclasses.field(default_factory=list)

    @classmethod
    def from_result(cls, res: ao.TrialResult, value, trial: int, seed: int) -> "TrialRecord":
        # a result that fails certification counts as infeasible; the reasons are kept
        violations = res.certify()
        return cls(scheme=ao.Scheme(res.scheme).value, sweep_value=value, trial=trial, seed=seed,
                   status=res.status.value, feasible=bool(res.feasible and not violations),
                   sum_rate=float(res.sum_rate), sensing_sinr=float(res.achieved_sensing_sinr),
                   power=float(res.power), tx=[int(n) for n in np.flatnonzero(res.a_T)],
                   rx=[int(n) for n in np.flatnonzero(res.a_R)], iterations=int(res.iterations_used),
                   runtime_s=float(res.runtime_s), selected=res.diagnostics.get("selected"),
                   violations=violations)


@dataclasses.dataclass
class AggregateRow:
    scheme: str
    sweep_param: str
    sweep_value: float
    mean_sum_rate: float | None
    stderr: float | None
    feasible_frac: float
    mean_iters: float
    mean_runtime_s: float


@dataclasses.dataclass
class AggregateResult:
    spec: ExperimentSpec
    rows: list
    trials: list

    def row(self, scheme, value) -> AggregateRow:
        scheme = ao.Scheme(scheme).value
        for r in self.rows:
            if r.scheme == scheme and r.sweep_value == value:
                return r
        raise KeyError((scheme, value))

    def means(self, scheme) -> list:
        scheme = ao.Scheme(scheme).value
        return [r.mean_sum_rate for r in self.rows if r.scheme == scheme]

    def to_dict(self, include_runtime: bool = True) -> dict:
        rows = [dataclasses.asdict(r) for r in self.rows]
        trials = [dataclasses.asdict(t) for t in self.trials]
        if not include_runtime:
            for r in rows:
                r.pop("mean_runtime_s")
            for t in trials:
                t.pop("runtime_s")
        return {"spec": self.spec.to_dict(), "aggregates": rows, "trials": trials}

    @classmethod
    def from_dict(cls, d: dict) -> "AggregateResult":
        rows = [AggregateRow(**{"mean_runtime_s": float("nan"), **r}) for r in d["aggregates"]]
        trials = [TrialRecord(**{"runtime_s": float("nan"), **t}) for t in d["trials"]]
        return cls(spec=ExperimentSpec.from_dict(d["spec"]), rows=rows, trials=trials)


def aggregate(spec: ExperimentSpec, records: list) -> list:
    """Per (scheme, value) statistics; rate statistics use feasible trials only."""
    rows = []
    for scheme in spec.schemes:
        for value in spec.values:
            recs = [r for r in records if r.scheme == scheme.value and r.sweep_value == value]
            if not recs:
                continue
            ok = [r.sum_rate for r in recs if r.feasible]
            mean = float(np.mean(ok)) if ok else None
            se = float(np.std(ok, ddof=1) / math.sqrt(len(ok))) if len(ok) > 1 else (0.0 if ok else None)
            rows.append(AggregateRow(
                scheme=scheme.value, sweep_param=spec.sweep.param, sweep_value=value,
                mean_sum_rate=mean, stderr=se, feasible_frac=len(ok) / len(recs),
                mean_iters=float(np.mean([r.iterations for r in recs])),
                mean_runtime_s=float(np.mean([r.runtime_s for r in recs])),
            ))
    return rows


# ---------------------------------------------------------------------------
# running

def trial_inputs(spec: ExperimentSpec, value, scheme, trial: int):
    """(scenario, config, n_act) for one cell of the experiment grid."""
    params = spec.system_params(value)
    scenario = sample_drop(spec.trial_seed(trial), spec.geometry(value), params)
    return scenario, spec.ao_config(scheme), params.N_act


def run_trial(spec: ExperimentSpec, value, scheme, trial: int) -> TrialRecord:
    scenario, config, n_act = trial_inputs(spec, value, scheme, trial)
    res = ao.run_scheme(scenario, config, n_act=n_act)
    return TrialRecord.from_result(res, value, trial, spec.trial_seed(trial))


def _run_cell(args):
    return run_trial(*args)


def run_experiment(spec: ExperimentSpec, workers: int = 1, progress=None) -> AggregateResult:
    """Run every (scheme, value, trial) cell and aggregate.

    Cells are independent; with ``workers > 1`` they run in a process pool.
    Results are always reduced in (scheme, value, trial) order so the output
    does not depend on completion order.
    """
    cells = [(spec, value, scheme, trial) for scheme in spec.schemes for value in spec.values
             for trial in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell, cells, chunksize=1))
    else:
        records = []
        for i, cell in enumerate(cells):
            records.append(_run_cell(cell))
            if progress is not None:
                progress(i + 1, len(cells), records[-1])
    for rec in records:
        if not rec.feasible:
            log.info("infeasible trial: scheme=%s value=%s trial=%d status=%s",
                     rec.scheme, rec.sweep_value, rec.trial, rec.status)
    return AggregateResult(spec=spec, rows=aggregate(spec, records), trials=records)


# ---------------------------------------------------------------------------
# output

def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def results_csv(agg: AggregateResult, include_runtime: bool = True) -> str:
    header = CSV_HEADER if include_runtime else CSV_HEADER[:-1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in agg.rows:
        d = dataclasses.asdict(r)
        w.writerow([d["scheme"], d["sweep_param"]] + [_fmt(d[k]) for k in header[2:]])
    return buf.getvalue()


def emit_results(agg: AggregateResult, path, include_runtime: bool = True, stem: str = "results"):
    """Write ``<stem>.csv`` and ``<stem>.json`` into directory ``path``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}.json"
    csv_path.write_text(results_csv(agg, include_runtime))
    json_path.write_text(json.dumps(agg.to_dict(include_runtime), indent=1, sort_keys=True,
                                    allow_nan=False, default=_json_default) + "\n")
    return csv_path, json_path


def _json_default(obj):
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def load_results(json_path) -> AggregateResult:
    return AggregateResult.from_dict(json.loads(Path(json_path).read_text()))


def trial_payload(spec: ExperimentSpec, value, scheme, trial: int) -> dict:
    """Self-contained inputs of one cell, for ``flexisac replay``."""
    scenario, config, n_act = trial_inputs(spec, value, scheme, trial)
    return {"scenario": scenario.to_dict(), "config": config.to_dict(), "n_act": int(n_act),
            "sweep_value": value, "trial": trial}


def replay_payload(payload: dict) -> ao.TrialResult:
    from .scenario import Scenario
    scenario = Scenario.from_dict(payload["scenario"])
    config = ao.AoConfig.from_dict(payload["config"])
    return ao.run_scheme(scenario, config, n_act=payload.get("n_act"))
