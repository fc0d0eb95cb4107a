"""Native FIFO reference policy and the bundled policy-language sources."""

from importlib import resources

from ..events import Assignment, ScheduleResult


def bundled_source(name: str) -> str:
    """Text of ``policies/<name>.pol`` shipped with the package."""
    return resources.files("schedloop").joinpath("policies", f"{name}.pol").read_text(encoding="utf-8")


FIFO_SOURCE = bundled_source("fifo")


def native_fifo(state: dict, failures, new_pipelines, view) -> ScheduleResult:
    """Greedy FIFO over a queue of op ids.

    Ops are queued in pipeline arrival order. Each pool, in id order, takes
    the earliest-queued ready ops that still fit; a blocked op does not stop
    later ready ops from being placed. Never suspends.
    """
    queue = state.setdefault("waiting_queue", [])
    known = state.setdefault("ops", {})
    for p in new_pipelines:
        for op in p.ops:
            queue.append(op.op_id)
            known[op.op_id] = op
    queue[:] = [
        op_id for op_id in queue
        if view.op_status(op_id) != "done" and view.pipeline_status(known[op_id].pipeline_id) == "in_flight"
    ]

    result = ScheduleResult()
    taken = set()
    for pool_id in range(view.num_pools):
        free = view.pool(pool_id)
        cpu, mem = free["cpu_free"], free["mem_free"]
        for op_id in queue:
            if op_id in taken or view.op_status(op_id) != "ready":
                continue
            op = known[op_id]
            if op.cpu_req <= cpu and op.mem_req <= mem:
                result.assignments.append(Assignment(op_id, pool_id))
                taken.add(op_id)
                cpu -= op.cpu_req
                mem -= op.mem_req
    return result


class NativeFifo:
    name = "fifo"

    def __init__(self):
        self.state: dict = {}

    def start(self) -> None:
        self.state = {}

    def schedule(self, failures, pipelines, view) -> ScheduleResult:
        return native_fifo(self.state, failures, pipelines, view)
