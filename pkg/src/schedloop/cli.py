"""Command-line entry point.

Exit codes: 0 ok, 2 bad input/config, 3 policy error, 4 provider failure.
"""

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

from .discovery import DiscoveryConfig, IterationRecord, run_discovery, select_best
from .discovery.evaluate import better, median_score, metric_value
from .discovery.loop import improvement_pct, improvement_ratio
from .errors import FormatError, InvalidConfig, InvalidParams, InvalidTrace, PolicyRuntimeError
from .lang import InterpError, InterpretedPolicy, NativeFifo, load_program
from .lang.interp import DEFAULT_MAX_STEPS
from .llm import GenerationParams, ProviderConfig, ProviderError, make_provider
from .model import SimConfig
from .sim import run
from .workload import (
    CANONICAL_SIM_CONFIG,
    PRESET_SEEDS,
    PRESETS,
    WorkloadParams,
    canonical_suite,
    export_trace,
    generate_trace,
    import_trace,
    preset_suite,
)

EXIT_OK, EXIT_INPUT, EXIT_POLICY, EXIT_PROVIDER = 0, 2, 3, 4
log = logging.getLogger("schedloop")


class InputError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def trace_filename(index: int, label: str) -> str:
    return f"{index:02d}_{label}.trace.jsonl"


def load_traces(spec: str, base: Path | None = None) -> list:
    if spec == "canonical":
        return canonical_suite()
    if spec in PRESETS:
        return preset_suite(spec)
    path = Path(spec)
    if base is not None and not path.is_absolute():
        path = base / path
    if not path.is_dir():
        raise InputError(f"traces directory {path} does not exist")
    files = sorted(path.glob("*.trace.jsonl"))
    if not files:
        raise InputError(f"no *.trace.jsonl files in {path}")
    out = []
    for f in files:
        try:
            out.append(import_trace(f))
        except (FormatError, InvalidTrace) as exc:
            raise InputError(f"{f}: {exc}") from exc
    return out


def load_sim_config(path: str | None) -> SimConfig:
    if path is None:
        return CANONICAL_SIM_CONFIG
    try:
        return SimConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError, InvalidConfig) as exc:
        raise InputError(f"sim config {path}: {exc}") from exc


# ---------------------------------------------------------------------------


def cmd_gen_traces(args) -> int:
    if args.params:
        if args.seed is None:
            _err("--params requires --seed")
            return EXIT_INPUT
        try:
            params = WorkloadParams.from_dict(json.loads(Path(args.params).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError, InvalidParams) as exc:
            _err(f"invalid params: {exc}")
            return EXIT_INPUT
        traces = [generate_trace(params, args.seed, label=Path(args.params).stem + f"-{args.seed}")]
    else:
        preset = args.preset or "canonical"
        if preset == "canonical":
            traces = canonical_suite()
        elif preset in PRESETS:
            seeds = [args.seed] if args.seed is not None else PRESET_SEEDS[preset]
            traces = [generate_trace(PRESETS[preset], s, label=f"{preset}-{s}") for s in seeds]
        else:
            _err(f"unknown preset {preset!r}; choose one of: canonical, {', '.join(PRESETS)}")
            return EXIT_INPUT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, t in enumerate(traces):
        written.append(str(export_trace(t, out / trace_filename(i, t.label))))
    print(_dump({"written": written}))
    return EXIT_OK


def _render_policy_error(exc) -> str:
    if isinstance(exc, PolicyRuntimeError):
        return str(exc)
    msg = str(exc)
    if getattr(exc, "hint", ""):
        msg += f"\nhint: {exc.hint}"
    return msg


def cmd_simulate(args) -> int:
    try:
        traces = load_traces(args.traces)
        sim_config = load_sim_config(args.config)
    except InputError as exc:
        _err(str(exc))
        return EXIT_INPUT
    if args.policy:
        try:
            source = Path(args.policy).read_text(encoding="utf-8")
        except OSError as exc:
            _err(f"cannot read policy: {exc}")
            return EXIT_INPUT
        try:
            load_program(source)
        except InterpError as exc:
            _err(_render_policy_error(exc))
            return EXIT_POLICY
        make_policy = lambda: InterpretedPolicy(load_program(source), args.max_steps)  # noqa: E731
        name = args.policy
    else:
        make_policy = NativeFifo
        name = "baseline:fifo"

    rows = []
    values = []
    for i, trace in enumerate(traces):
        try:
            res = run(trace, make_policy(), sim_config)
        except PolicyRuntimeError as exc:
            exc.trace_index = i
            _err(_render_policy_error(exc))
            return EXIT_POLICY
        rows.append({"index": i, "label": trace.label, "seed": trace.seed, "metrics": res.metrics.to_dict()})
        values.append(metric_value(res.metrics, args.target_metric, sim_config))
        if args.assignment_log:
            d = Path(args.assignment_log)
            d.mkdir(parents=True, exist_ok=True)
            (d / f"{i:02d}_{trace.label}.assign.jsonl").write_text(res.assignment_log_jsonl(), encoding="utf-8")
    print(_dump({"policy": name, "target_metric": args.target_metric, "traces": rows,
                 "median_score": median_score(values)}))
    return EXIT_OK


REQUIRED_EXPERIMENT_FIELDS = ("iterations", "target_metric", "token_budget", "provider")


def load_experiment(path: Path) -> tuple[DiscoveryConfig, dict]:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read experiment config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputError("experiment config must be a JSON object")
    for key in REQUIRED_EXPERIMENT_FIELDS:
        if key not in raw:
            raise InputError(f"experiment config is missing required field '{key}'")
    base = path.parent
    prov = dict(raw["provider"])
    if prov.get("script_dir") and not Path(prov["script_dir"]).is_absolute():
        prov["script_dir"] = str(base / prov["script_dir"])
    try:
        provider = ProviderConfig.from_dict(prov)
    except (TypeError, ValueError) as exc:
        raise InputError(f"provider: {exc}") from exc
    if "api_key" in prov:
        raise InputError("provider: put the key in an environment variable and name it in api_key_env_var")
    if not isinstance(raw["iterations"], int) or raw["iterations"] < 1:
        raise InputError("iterations must be an integer >= 1")
    if not isinstance(raw["token_budget"], int):
        raise InputError("token_budget must be an integer")
    sim_config = CANONICAL_SIM_CONFIG
    if raw.get("sim_config") is not None:
        try:
            sim_config = SimConfig.from_dict(raw["sim_config"])
        except InvalidConfig as exc:
            raise InputError(f"sim_config: {exc}") from exc
    trace_spec = raw.get("traces", "canonical")
    traces = load_traces(trace_spec, base)
    gen = raw.get("generation") or {}
    config = DiscoveryConfig(
        iterations=raw["iterations"],
        target_metric=raw["target_metric"],
        token_budget=raw["token_budget"],
        traces=traces,
        sim_config=sim_config,
        provider=provider,
        generation=GenerationParams(gen.get("temperature"), gen.get("reasoning_effort")),
        max_steps=int(raw.get("max_steps", DEFAULT_MAX_STEPS)),
        trace_source=trace_spec,
    )
    try:
        config.validate()
    except InvalidConfig as exc:
        raise InputError(str(exc)) from exc
    return config, raw


def cmd_discover(args) -> int:
    path = Path(args.config)
    try:
        config, raw = load_experiment(path)
    except InputError as exc:
        _err(str(exc))
        return EXIT_INPUT
    config.jobs = args.jobs
    digest = hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()[:10]
    run_id = raw.get("run_id") or f"run-{digest}"
    runs_dir = Path(args.runs_dir or raw.get("runs_dir") or "runs")
    if not runs_dir.is_absolute() and args.runs_dir is None and raw.get("runs_dir"):
        runs_dir = path.parent / runs_dir
    run_dir = runs_dir / run_id
    provider = make_provider(config.provider)
    try:
        result = run_discovery(config, provider, run_dir=run_dir, run_id=run_id)
    except ProviderError as exc:
        _err(f"provider failed: {exc}; partial run kept in {run_dir}")
        return EXIT_PROVIDER
    except InvalidConfig as exc:
        _err(str(exc))
        return EXIT_INPUT
    best = result.best
    print(_dump({
        "run_dir": str(run_dir),
        "baseline_score": result.baseline_score,
        "best": best.to_dict() if best else None,
        "valid_iterations": sum(r.valid for r in result.records),
        "iterations": len(result.records),
        "total_cost_usd": result.ledger.total_cost_usd,
        "total_time_seconds": result.ledger.total_time_seconds,
    }))
    return EXIT_OK


def load_records(path: Path) -> list[IterationRecord]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    records = []
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(IterationRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f"{path}: corrupt record on line {n}: {exc}") from exc
    return records


def build_report(run_dir: Path) -> dict:
    try:
        manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
        target = manifest["config"]["target_metric"]
        baseline = manifest["baseline_score"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"missing or corrupt manifest in {run_dir}: {exc}") from exc
    records = load_records(run_dir / "records.jsonl")
    best = select_best(records, target)
    trajectory = []
    running_best = None
    for r in records:
        if r.valid and (running_best is None or better(r.score, running_best.score, target)):
            running_best = r
        trajectory.append({"iteration": r.iteration, "valid": r.valid, "score": r.score,
                           "best_so_far": running_best.score if running_best else None})
    ratio = improvement_ratio(best.score, baseline, target) if best else None
    ledger = manifest.get("ledger", {})
    return {
        "run_id": manifest.get("run_id"),
        "target_metric": target,
        "baseline_score": baseline,
        "best_score": best.score if best else None,
        "best_iteration": best.iteration if best else None,
        "improvement_pct": improvement_pct(ratio) if best else None,
        "total_cost_usd": ledger.get("total_cost_usd"),
        "total_time_seconds": ledger.get("total_time_seconds"),
        "iterations": len(records),
        "trajectory": trajectory,
    }


def cmd_report(args) -> int:
    try:
        report = build_report(Path(args.run))
    except InputError as exc:
        _err(str(exc))
        return EXIT_INPUT
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "valid", "score", "best_so_far"])
            for row in report["trajectory"]:
                w.writerow([row["iteration"], row["valid"], row["score"], row["best_so_far"]])
    print(_dump(report))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="schedloop", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-traces", help="generate .trace.jsonl files")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--preset", help=f"canonical (all six) or one of: {', '.join(PRESETS)}")
    src.add_argument("--params", help="WorkloadParams JSON file")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_traces)

    s = sub.add_parser("simulate", help="run one policy over a trace suite")
    pol = s.add_mutually_exclusive_group(required=True)
    pol.add_argument("--policy", help=".pol file")
    pol.add_argument("--baseline", choices=["fifo"])
    s.add_argument("--traces", default="canonical", help="directory of .trace.jsonl files, a preset, or canonical")
    s.add_argument("--config", help="SimConfig JSON (default: canonical cluster)")
    s.add_argument("--target-metric", default="throughput", choices=["throughput", "p99_latency"])
    s.add_argument("--assignment-log", help="directory for per-trace assignment logs")
    s.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("discover", help="run the policy discovery loop")
    d.add_argument("--config", required=True, help="experiment JSON")
    d.add_argument("--runs-dir", help="parent directory for run directories (default: runs)")
    d.add_argument("--jobs", type=int, default=1, help="parallel per-trace simulations")
    d.set_defaults(func=cmd_discover)

    r = sub.add_parser("report", help="summarize a run directory")
    r.add_argument("--run", required=True)
    r.add_argument("--csv", help="also write the score trajectory as CSV")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
