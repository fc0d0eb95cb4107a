"""Seeded DAG workload generator, canonical trace suite and `.trace.jsonl` I/O.

Draw order for one trace (all from a single xoshiro256++ stream):

1. arrival gaps, until the running sum passes ``horizon``;
2. then, per pipeline in arrival order: class, op count, layer widths and
   dependency edges, durations (one lognormal per op), resources (cpu then
   mem per op).
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import FormatError, InvalidParams, InvalidTrace
from .model import BATCH, INTERACTIVE, OpSpec, PipelineSpec, SimConfig, critical_path, validate_trace
from .rng import Xoshiro256pp

TRACE_FORMAT = "schedloop-trace"
TRACE_VERSION = 1
# probability that a non-first-layer op also depends on each extra op of the previous layer
EXTRA_EDGE_PROB = 0.3


@dataclass(frozen=True)
class ClassProfile:
    duration_mu: float
    duration_sigma: float
    cpu_range: tuple[int, int]
    mem_range: tuple[int, int]


@dataclass(frozen=True)
class WorkloadParams:
    arrival_rate: float
    horizon: int
    interactive_fraction: float
    ops_range: tuple[int, int]
    layer_width_range: tuple[int, int]
    interactive: ClassProfile
    batch: ClassProfile
    timeout_factor: float

    def profile(self, workload_class: str) -> ClassProfile:
        return self.interactive if workload_class == INTERACTIVE else self.batch

    def validate(self) -> None:
        if not (self.arrival_rate > 0 and math.isfinite(self.arrival_rate)):
            raise InvalidParams("arrival_rate must be a finite positive number")
        if self.horizon < 0:
            raise InvalidParams("horizon must be >= 0")
        if not 0.0 <= self.interactive_fraction <= 1.0:
            raise InvalidParams("interactive_fraction must lie in [0, 1]")
        if self.timeout_factor < 1:
            raise InvalidParams("timeout_factor must be >= 1")
        ranges = {"ops_range": self.ops_range, "layer_width_range": self.layer_width_range}
        for name, prof in (("interactive", self.interactive), ("batch", self.batch)):
            if prof.duration_sigma < 0:
                raise InvalidParams(f"{name}.duration_sigma must be >= 0")
            ranges[f"{name}.cpu_range"] = prof.cpu_range
            ranges[f"{name}.mem_range"] = prof.mem_range
        for name, (lo, hi) in ranges.items():
            if lo < 1 or lo > hi:
                raise InvalidParams(f"{name} must satisfy 1 <= min <= max, got ({lo}, {hi})")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "WorkloadParams":
        try:
            profiles = {}
            for name in ("interactive", "batch"):
                p = d[name]
                profiles[name] = ClassProfile(
                    float(p["duration_mu"]),
                    float(p["duration_sigma"]),
                    (int(p["cpu_range"][0]), int(p["cpu_range"][1])),
                    (int(p["mem_range"][0]), int(p["mem_range"][1])),
                )
            params = cls(
                arrival_rate=float(d["arrival_rate"]),
                horizon=int(d["horizon"]),
                interactive_fraction=float(d["interactive_fraction"]),
                ops_range=(int(d["ops_range"][0]), int(d["ops_range"][1])),
                layer_width_range=(int(d["layer_width_range"][0]), int(d["layer_width_range"][1])),
                timeout_factor=float(d["timeout_factor"]),
                **profiles,
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise InvalidParams(f"malformed workload params: {exc!r}") from exc
        params.validate()
        return params

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Trace:
    params_fingerprint: str
    seed: int
    pipelines: tuple[PipelineSpec, ...]
    label: str = ""

    @property
    def num_ops(self) -> int:
        return sum(len(p.ops) for p in self.pipelines)


def generate_trace(params: WorkloadParams, seed: int, label: str = "") -> Trace:
    params.validate()
    rng = Xoshiro256pp(seed)

    arrivals = []
    t = 0
    while True:
        t += rng.exponential_ticks(params.arrival_rate)
        if t > params.horizon:
            break
        arrivals.append(t)

    pipelines = []
    for i, arrival in enumerate(arrivals):
        pid = f"p{i:04d}"
        cls = INTERACTIVE if rng.uniform() < params.interactive_fraction else BATCH
        prof = params.profile(cls)
        n_ops = rng.randint(*params.ops_range)

        layers: list[list[int]] = []
        placed = 0
        while placed < n_ops:
            width = min(rng.randint(*params.layer_width_range), n_ops - placed)
            layers.append(list(range(placed, placed + width)))
            placed += width
        deps: list[list[int]] = [[] for _ in range(n_ops)]
        for prev, layer in zip(layers, layers[1:]):
            for k in layer:
                parent = prev[rng.randint(0, len(prev) - 1)]
                chosen = {parent}
                for q in prev:
                    if q != parent and rng.uniform() < EXTRA_EDGE_PROB:
                        chosen.add(q)
                deps[k] = sorted(chosen)

        durations = [
            max(1, math.ceil(rng.lognormal(prof.duration_mu, prof.duration_sigma))) for _ in range(n_ops)
        ]
        resources = []
        for _ in range(n_ops):
            cpu = rng.randint(*prof.cpu_range)
            mem = rng.randint(*prof.mem_range)
            resources.append((cpu, mem))

        op_ids = [f"{pid}.{k}" for k in range(n_ops)]
        ops = tuple(
            OpSpec(
                op_id=op_ids[k],
                pipeline_id=pid,
                cpu_req=resources[k][0],
                mem_req=resources[k][1],
                duration=durations[k],
                deps=tuple(op_ids[d] for d in deps[k]),
            )
            for k in range(n_ops)
        )
        draft = PipelineSpec(pid, arrival, cls, ops, timeout=0)
        timeout = math.ceil(params.timeout_factor * critical_path(draft))
        pipelines.append(PipelineSpec(pid, arrival, cls, ops, timeout))

    return Trace(params.fingerprint(), seed, tuple(pipelines), label)


# ---------------------------------------------------------------------------
# Canonical suite. Tick ~ one second of wall time; memory in MB.
# These constants are artifact choices (see README "Workload presets").

PRESETS: dict[str, WorkloadParams] = {
    "interactive-heavy": WorkloadParams(
        arrival_rate=0.5,
        horizon=1000,
        interactive_fraction=0.8,
        ops_range=(1, 6),
        layer_width_range=(1, 3),
        interactive=ClassProfile(1.0, 0.5, (1, 4), (256, 2048)),
        batch=ClassProfile(3.0, 0.8, (2, 8), (1024, 8192)),
        timeout_factor=4.0,
    ),
    "batch-heavy": WorkloadParams(
        arrival_rate=0.1,
        horizon=1000,
        interactive_fraction=0.2,
        ops_range=(2, 10),
        layer_width_range=(1, 4),
        interactive=ClassProfile(1.0, 0.5, (1, 4), (256, 2048)),
        batch=ClassProfile(3.0, 0.8, (2, 8), (1024, 8192)),
        timeout_factor=4.0,
    ),
    "mixed-heavy-tail": WorkloadParams(
        arrival_rate=0.3,
        horizon=1000,
        interactive_fraction=0.5,
        ops_range=(1, 8),
        layer_width_range=(1, 3),
        interactive=ClassProfile(1.0, 0.5, (1, 4), (256, 2048)),
        batch=ClassProfile(2.5, 1.4, (2, 8), (1024, 8192)),
        timeout_factor=3.0,
    ),
}
PRESET_SEEDS: dict[str, tuple[int, int]] = {
    "interactive-heavy": (42, 43),
    "batch-heavy": (1042, 1043),
    "mixed-heavy-tail": (2042, 2043),
}
CANONICAL_SIM_CONFIG = SimConfig.uniform(num_pools=4, cpu=16, mem=32768, max_ticks=4000, waiting_bound=100)


def canonical_suite() -> list[Trace]:
    suite = []
    for name, params in PRESETS.items():
        for seed in PRESET_SEEDS[name]:
            suite.append(generate_trace(params, seed, label=f"{name}-{seed}"))
    return suite


def preset_suite(name: str) -> list[Trace]:
    params = PRESETS[name]
    return [generate_trace(params, seed, label=f"{name}-{seed}") for seed in PRESET_SEEDS[name]]


# ---------------------------------------------------------------------------
# Trace files


def _pipeline_record(p: PipelineSpec) -> dict:
    return {
        "pipeline_id": p.pipeline_id,
        "arrival_tick": p.arrival_tick,
        "workload_class": p.workload_class,
        "timeout": p.timeout,
        "ops": [
            {
                "op_id": op.op_id,
                "cpu_req": op.cpu_req,
                "mem_req": op.mem_req,
                "duration": op.duration,
                "deps": list(op.deps),
            }
            for op in p.ops
        ],
    }


def dumps_trace(trace: Trace) -> str:
    header = {
        "format": TRACE_FORMAT,
        "version": TRACE_VERSION,
        "params_fingerprint": trace.params_fingerprint,
        "seed": trace.seed,
        "label": trace.label,
        "num_pipelines": len(trace.pipelines),
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    lines += [json.dumps(_pipeline_record(p), separators=(",", ":")) for p in trace.pipelines]
    return "\n".join(lines) + "\n"


def export_trace(trace: Trace, destination) -> Path:
    path = Path(destination)
    path.write_text(dumps_trace(trace), encoding="utf-8")
    return path


def _require(rec: dict, key: str, typ, line: int):
    if key not in rec:
        raise FormatError(f"missing field", line=line, field=key)
    val = rec[key]
    if typ is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise FormatError(f"expected integer, got {val!r}", line=line, field=key)
    if typ is not int and not isinstance(val, typ):
        raise FormatError(f"expected {typ.__name__}, got {val!r}", line=line, field=key)
    return val


def loads_trace(text: str) -> Trace:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty trace file", line=1)
    records = []
    for n, raw in enumerate(lines, start=1):
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON ({exc.msg})", line=n) from exc
        if not isinstance(rec, dict):
            raise FormatError("expected a JSON object", line=n)
        records.append(rec)

    header = records[0]
    if header.get("format") != TRACE_FORMAT:
        raise FormatError(f"not a {TRACE_FORMAT} file", line=1, field="format")
    if header.get("version") != TRACE_VERSION:
        raise FormatError(f"unsupported version {header.get('version')!r}", line=1, field="version")
    fingerprint = _require(header, "params_fingerprint", str, 1)
    seed = _require(header, "seed", int, 1)
    label = header.get("label", "")
    expected = _require(header, "num_pipelines", int, 1)

    pipelines = []
    for n, rec in enumerate(records[1:], start=2):
        pid = _require(rec, "pipeline_id", str, n)
        ops = []
        for j, o in enumerate(_require(rec, "ops", list, n)):
            if not isinstance(o, dict):
                raise FormatError(f"op {j} is not an object", line=n, field="ops")
            deps = _require(o, "deps", list, n)
            if not all(isinstance(d, str) for d in deps):
                raise FormatError("deps must be strings", line=n, field="deps")
            ops.append(
                OpSpec(
                    op_id=_require(o, "op_id", str, n),
                    pipeline_id=pid,
                    cpu_req=_require(o, "cpu_req", int, n),
                    mem_req=_require(o, "mem_req", int, n),
                    duration=_require(o, "duration", int, n),
                    deps=tuple(deps),
                )
            )
        pipelines.append(
            PipelineSpec(
                pipeline_id=pid,
                arrival_tick=_require(rec, "arrival_tick", int, n),
                workload_class=_require(rec, "workload_class", str, n),
                ops=tuple(ops),
                timeout=_require(rec, "timeout", int, n),
            )
        )
    if len(pipelines) != expected:
        raise FormatError(
            f"header declares {expected} pipelines but file holds {len(pipelines)} (truncated?)",
            line=len(lines) + 1,
        )
    for prev, cur in zip(pipelines, pipelines[1:]):
        if cur.arrival_tick < prev.arrival_tick:
            raise InvalidTrace(f"pipeline {cur.pipeline_id} arrives before {prev.pipeline_id}")
    validate_trace(pipelines)
    return Trace(fingerprint, seed, tuple(pipelines), label)


def import_trace(source) -> Trace:
    path = Path(source)
    return loads_trace(path.read_text(encoding="utf-8"))
