"""Small policies used across the test suite."""

from schedloop.events import Assignment, ScheduleResult, Suspension
from schedloop.model import OpSpec, PipelineSpec, SimConfig


class Idle:
    name = "idle"

    def start(self):
        pass

    def schedule(self, failures, pipelines, view):
        return ScheduleResult()


class Scripted:
    """Emits fixed decisions on given ticks; records what it was handed."""

    name = "scripted"

    def __init__(self, plan=None):
        self.plan = plan or {}
        self.calls = []

    def start(self):
        self.calls = []

    def schedule(self, failures, pipelines, view):
        self.calls.append((view.clock, list(failures), [p.pipeline_id for p in pipelines]))
        sus, asg = self.plan.get(view.clock, ([], []))
        return ScheduleResult([Suspension(s) for s in sus], [Assignment(o, p) for o, p in asg])


def op(pid, k, cpu=1, mem=1, duration=1, deps=()):
    return OpSpec(f"{pid}.{k}", pid, cpu, mem, duration, tuple(f"{pid}.{d}" for d in deps))


def pipeline(pid, arrival=0, ops=None, timeout=100, cls="batch"):
    ops = ops if ops is not None else [op(pid, 0)]
    return PipelineSpec(pid, arrival, cls, tuple(ops), timeout)


def one_pool(cpu=4, mem=1024, max_ticks=100, waiting_bound=50, pools=1):
    return SimConfig.uniform(pools, cpu, mem, max_ticks, waiting_bound)
