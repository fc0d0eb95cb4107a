"""Workload and cluster description types shared by the generator and simulator."""

from dataclasses import dataclass

from .errors import InvalidConfig, InvalidTrace

INTERACTIVE = "interactive"
BATCH = "batch"
WORKLOAD_CLASSES = (INTERACTIVE, BATCH)


@dataclass(frozen=True)
class OpSpec:
    op_id: str
    pipeline_id: str
    cpu_req: int
    mem_req: int
    duration: int
    deps: tuple[str, ...] = ()


@dataclass(frozen=True)
class PipelineSpec:
    pipeline_id: str
    arrival_tick: int
    workload_class: str
    ops: tuple[OpSpec, ...]
    timeout: int


@dataclass(frozen=True)
class PoolConfig:
    pool_id: int
    cpu_capacity: int
    mem_capacity: int


@dataclass(frozen=True)
class SimConfig:
    pools: tuple[PoolConfig, ...]
    max_ticks: int
    waiting_bound: int

    @property
    def max_cpu(self) -> int:
        return max((p.cpu_capacity for p in self.pools), default=0)

    @property
    def max_mem(self) -> int:
        return max((p.mem_capacity for p in self.pools), default=0)

    @classmethod
    def uniform(cls, num_pools: int, cpu: int, mem: int, max_ticks: int, waiting_bound: int) -> "SimConfig":
        pools = tuple(PoolConfig(i, cpu, mem) for i in range(num_pools))
        return cls(pools, max_ticks, waiting_bound)

    def to_dict(self) -> dict:
        return {
            "pools": [
                {"pool_id": p.pool_id, "cpu_capacity": p.cpu_capacity, "mem_capacity": p.mem_capacity}
                for p in self.pools
            ],
            "max_ticks": self.max_ticks,
            "waiting_bound": self.waiting_bound,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        try:
            pools = tuple(
                PoolConfig(int(p["pool_id"]), int(p["cpu_capacity"]), int(p["mem_capacity"]))
                for p in d["pools"]
            )
            cfg = cls(pools, int(d["max_ticks"]), int(d["waiting_bound"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidConfig(f"malformed sim config: {exc!r}") from exc
        validate_config(cfg)
        return cfg


def validate_config(config: SimConfig) -> None:
    if not config.pools:
        raise InvalidConfig("at least one pool is required")
    for i, p in enumerate(config.pools):
        if p.pool_id != i:
            raise InvalidConfig(f"pool ids must be contiguous from 0; position {i} has id {p.pool_id}")
        if p.cpu_capacity < 1 or p.mem_capacity < 1:
            raise InvalidConfig(f"pool {i}: capacities must be >= 1")
    if config.max_ticks < 1:
        raise InvalidConfig("max_ticks must be >= 1")
    if config.waiting_bound < 1:
        raise InvalidConfig("waiting_bound must be >= 1")


def critical_path(pipeline: PipelineSpec) -> int:
    """Longest duration-weighted path through the op DAG.

    Raises InvalidTrace on unknown deps or cycles.
    """
    ops = {op.op_id: op for op in pipeline.ops}
    finish: dict[str, int] = {}
    visiting: set[str] = set()

    def visit(op_id: str) -> int:
        if op_id in finish:
            return finish[op_id]
        if op_id in visiting:
            raise InvalidTrace(f"pipeline {pipeline.pipeline_id}: dependency cycle through {op_id}")
        visiting.add(op_id)
        op = ops[op_id]
        start = 0
        for d in op.deps:
            if d not in ops:
                raise InvalidTrace(f"op {op_id}: unknown dependency {d!r}")
            start = max(start, visit(d))
        visiting.discard(op_id)
        finish[op_id] = start + op.duration
        return finish[op_id]

    return max((visit(op_id) for op_id in ops), default=0)


def validate_pipeline(p: PipelineSpec, config: SimConfig | None = None) -> None:
    if p.arrival_tick < 0:
        raise InvalidTrace(f"pipeline {p.pipeline_id}: negative arrival_tick")
    if p.workload_class not in WORKLOAD_CLASSES:
        raise InvalidTrace(f"pipeline {p.pipeline_id}: unknown workload_class {p.workload_class!r}")
    if not p.ops:
        raise InvalidTrace(f"pipeline {p.pipeline_id}: no ops")
    seen = set()
    for op in p.ops:
        if op.op_id in seen:
            raise InvalidTrace(f"duplicate op id {op.op_id!r}")
        seen.add(op.op_id)
        if op.pipeline_id != p.pipeline_id:
            raise InvalidTrace(f"op {op.op_id} claims pipeline {op.pipeline_id!r}, owned by {p.pipeline_id!r}")
        if op.cpu_req < 1 or op.mem_req < 1 or op.duration < 1:
            raise InvalidTrace(f"op {op.op_id}: cpu_req, mem_req and duration must be >= 1")
        if config is not None and (op.cpu_req > config.max_cpu or op.mem_req > config.max_mem):
            raise InvalidTrace(f"op {op.op_id}: demand exceeds the largest pool")
    cp = critical_path(p)
    if p.timeout < cp:
        raise InvalidTrace(f"pipeline {p.pipeline_id}: timeout {p.timeout} below critical path {cp}")


def validate_trace(pipelines, config: SimConfig | None = None) -> None:
    seen_pipelines = set()
    seen_ops = set()
    for p in pipelines:
        if p.pipeline_id in seen_pipelines:
            raise InvalidTrace(f"duplicate pipeline id {p.pipeline_id!r}")
        seen_pipelines.add(p.pipeline_id)
        for op in p.ops:
            if op.op_id in seen_ops:
                raise InvalidTrace(f"op id {op.op_id!r} is not unique across the trace")
            seen_ops.add(op.op_id)
        validate_pipeline(p, config)
