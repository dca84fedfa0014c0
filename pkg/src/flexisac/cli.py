"""Command-line entry point: ``flexisac run | replay | validate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import ao
from . import experiment as ex
from .errors import InvalidArgumentError

log = logging.getLogger("flexisac")


def _csv_list(text: str, cast=str) -> list:
    return [cast(t.strip()) for t in text.split(",") if t.strip()]


def load_config(path) -> dict:
    """Read a YAML or JSON config file into a dict.

    Top-level keys are ExperimentSpec fields; ``params`` and ``ao`` hold
    SystemParams and AoConfig overrides. SystemParams / AoConfig field names
    given at the top level are routed into those sections.
    """
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        data = json.loads(text)
    else:
        import yaml
        data = yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise InvalidArgumentError(f"config file {path} must contain a mapping")
    from dataclasses import fields
    from .scenario import SystemParams
    spec_fields = {f.name for f in fields(ex.ExperimentSpec)}
    param_fields = {f.name for f in fields(SystemParams)}
    ao_fields = {f.name for f in fields(ao.AoConfig)}
    out = {"params": dict(data.pop("params", None) or {}), "ao": dict(data.pop("ao", None) or {})}
    for key, value in data.items():
        if key in spec_fields:
            out[key] = value
        elif key in param_fields:
            out["params"][key] = value
        elif key in ao_fields:
            out["ao"][key] = value
        else:
            raise InvalidArgumentError(f"unknown config key {key!r}")
    return out


def build_spec(args) -> ex.ExperimentSpec:
    overrides = load_config(args.config) if args.config else {}
    sweep = args.sweep or overrides.pop("sweep", "NactSweep")
    overrides.pop("sweep", None)
    spec = ex.preset(args.preset, sweep=sweep, **overrides)
    changes = {}
    if args.values:
        changes["values"] = tuple(_csv_list(args.values, float))
    if args.schemes:
        changes["schemes"] = tuple(ao.Scheme(s) for s in _csv_list(args.schemes))
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.seed is not None:
        changes["master_seed"] = args.seed
    return spec.replace(**changes) if changes else spec


def cmd_run(args) -> int:
    spec = build_spec(args)
    out = Path(args.out)

    def progress(i, n, rec):
        log.info("[%d/%d] %s %s=%s trial=%d rate=%.4f %s", i, n, rec.scheme, spec.sweep.param,
                 rec.sweep_value, rec.trial, rec.sum_rate, rec.status)

    agg = ex.run_experiment(spec, workers=args.workers, progress=progress)
    csv_path, json_path = ex.emit_results(agg, out, include_runtime=not args.no_runtime_cols)
    if args.save_trials:
        tdir = out / "trials"
        tdir.mkdir(parents=True, exist_ok=True)
        for scheme in spec.schemes:
            for value in spec.values:
                for trial in range(spec.trials):
                    payload = ex.trial_payload(spec, value, scheme, trial)
                    name = f"{scheme.value}_{spec.sweep.param}={value}_trial{trial}.json"
                    (tdir / name).write_text(json.dumps(payload))
    sys.stdout.write(ex.results_csv(agg, include_runtime=not args.no_runtime_cols))
    log.info("wrote %s and %s", csv_path, json_path)
    return 0


def cmd_replay(args) -> int:
    payload = json.loads(Path(args.trial_json).read_text())
    res = ex.replay_payload(payload)
    for line in res.log_lines:
        print(line)
    summary = res.to_dict(include_trace=False, include_runtime=False)
    print(json.dumps({k: summary[k] for k in ("scheme", "status", "sum_rate", "achieved_sensing_sinr",
                                              "power", "iterations_used")}, indent=1))
    if args.out:
        Path(args.out).write_text(json.dumps(res.to_dict(), indent=1))
    violations = res.certify()
    for v in violations:
        print(f"certification failed: {v}")
    return 1 if violations else 0


def cmd_validate(args) -> int:
    from .validate import run_checks
    results = run_checks(seed=args.seed if args.seed is not None else 0, quick=not args.full)
    failed = 0
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failed += not ok
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flexisac", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo sweep and write CSV/JSON results")
    run.add_argument("--preset", choices=("desk", "full"), default="desk")
    run.add_argument("--sweep", help="NactSweep | SpacingSweep | Gamma0Sweep (or n_act, spacing, gamma0)")
    run.add_argument("--values", help="comma-separated sweep values (N_act, spacing in wavelengths, or dB)")
    run.add_argument("--schemes", help="comma-separated subset of " + ",".join(s.value for s in ao.Scheme))
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--config", help="YAML or JSON file with spec, SystemParams and AoConfig overrides")
    run.add_argument("--out", default="results")
    run.add_argument("--no-runtime-cols", action="store_true", help="omit runtime columns (diff-friendly)")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--save-trials", action="store_true", help="also write replayable per-trial inputs")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("replay", help="rerun one saved trial and print its iteration log")
    rep.add_argument("--trial-json", required=True)
    rep.add_argument("--out", help="write the full TrialResult JSON here")
    rep.set_defaults(func=cmd_replay)

    val = sub.add_parser("validate", help="run the built-in invariant and oracle checks")
    val.add_argument("--seed", type=int)
    val.add_argument("--full", action="store_true", help="more random instances")
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
