import dataclasses
import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import Idle, Scripted, one_pool, op, pipeline
from schedloop.errors import InvalidConfig, InvalidTrace, PolicyRuntimeError
from schedloop.events import Assignment, ScheduleResult, Suspension
from schedloop.lang import NativeFifo
from schedloop.lang.errors import InterpError
from schedloop.sim import DECISION_VIOLATIONS, init_sim, run, step, validate_assignment
from schedloop.workload import PRESETS, generate_trace


def kinds(result):
    return [v.kind for v in result.violation_log]


class TestHandTraced:
    def test_single_op(self):
        res = run([pipeline("a", ops=[op("a", 0, cpu=2, duration=3)])], NativeFifo(), one_pool())
        assert res.assignment_log == [(0, "a.0", 0)]
        rec = res.completion_log[0]
        assert (rec.outcome, rec.terminal_tick, rec.latency) == ("completed", 3, 3)
        assert res.metrics.elapsed_ticks == 3
        assert res.metrics.throughput == pytest.approx(1000 / 3)
        assert res.metrics.p99_latency == 3 and res.metrics.median_latency == 3

    def test_chain_waits_for_parent(self):
        p = pipeline("a", ops=[op("a", 0, duration=2), op("a", 1, deps=[0])])
        res = run([p], NativeFifo(), one_pool())
        assert res.assignment_log == [(0, "a.0", 0), (2, "a.1", 0)]
        assert res.completion_log[0].terminal_tick == 3

    def test_late_arrival_delivered_on_its_tick(self):
        pol = Scripted()
        run([pipeline("a", arrival=5, timeout=3)], pol, one_pool(max_ticks=20))
        assert [(t, ps) for t, _, ps in pol.calls if ps] == [(5, ["a"])]
        assert pol.calls[0][0] == 0

    def test_timeout_fails_pipeline_and_notifies(self):
        pol = Scripted()
        res = run([pipeline("a", timeout=2)], pol, one_pool())
        rec = res.completion_log[0]
        assert (rec.outcome, rec.terminal_tick) == ("failed", 2)
        notices = [(t, f) for t, f, _ in pol.calls if f]
        assert len(notices) == 1
        t, [f] = notices[0]
        assert (t, f.pipeline_id, f.reason, f.tick) == (2, "a", "timeout", 2)
        assert res.metrics.failed == 1 and res.metrics.p99_latency is None

    def test_timeout_kills_running_ops(self):
        p = pipeline("a", ops=[op("a", 0, cpu=4, duration=5)], timeout=5)
        q = pipeline("b", arrival=3, ops=[op("b", 0, cpu=4)], timeout=10)
        # started one tick late, a.0 would end at tick 6; the timeout fires at tick 5
        pol = Scripted({1: ([], [("a.0", 0)]), 5: ([], [("b.0", 0)])})
        res = run([p, q], pol, one_pool())
        assert [(r.pipeline_id, r.outcome, r.terminal_tick) for r in res.completion_log] == [
            ("a", "failed", 5), ("b", "completed", 6)]
        assert res.assignment_log[-1] == (5, "b.0", 0)
        assert kinds(res) == []

    def test_suspend_restarts_from_zero(self):
        p = pipeline("a", ops=[op("a", 0, duration=3)])
        pol = Scripted({0: ([], [("a.0", 0)]), 1: (["a.0"], [("a.0", 0)])})
        res = run([p], pol, one_pool())
        assert res.assignment_log == [(0, "a.0", 0), (1, "a.0", 0)]
        assert res.completion_log[0].terminal_tick == 4
        assert kinds(res) == []

    def test_suspend_frees_capacity_same_tick(self):
        p = pipeline("a", ops=[op("a", 0, cpu=4, duration=5)])
        q = pipeline("b", ops=[op("b", 0, cpu=4)])
        pol = Scripted({0: ([], [("a.0", 0)]), 1: (["a.0"], [("b.0", 0)])})
        res = run([p, q], pol, one_pool(max_ticks=3))
        assert res.assignment_log == [(0, "a.0", 0), (1, "b.0", 0)]
        assert kinds(res) == []

    def test_waiting_bound_flags_once(self):
        res = run([pipeline("a")], Idle(), one_pool(max_ticks=10, waiting_bound=3))
        assert [(v.tick, v.kind, v.op_id) for v in res.violation_log] == [(3, "waiting_bound_exceeded", "a.0")]

    def test_cutoff_marks_unfinished(self):
        res = run([pipeline("a"), pipeline("b", arrival=50)], Idle(), one_pool(max_ticks=10))
        assert [r.outcome for r in res.completion_log] == ["unfinished", "unfinished"]
        assert [r.terminal_tick for r in res.completion_log] == [10, 50]
        assert res.metrics.unfinished == 2 and res.metrics.throughput == 0.0

    def test_empty_trace(self):
        res = run([], Idle(), one_pool())
        assert res.metrics.elapsed_ticks == 0 and res.metrics.completed == 0
        assert res.metrics.throughput == 0.0 and res.metrics.p99_latency is None


class TestViolations:
    def setup_method(self):
        self.trace = [
            pipeline("a", ops=[op("a", 0, cpu=3, duration=4), op("a", 1, deps=[0])]),
            pipeline("b", ops=[op("b", 0, cpu=3, duration=4)]),
        ]

    def run_tick0(self, sus=(), asg=()):
        return run(self.trace, Scripted({0: (list(sus), list(asg))}), one_pool(max_ticks=1))

    @pytest.mark.parametrize("asg,kind", [
        ([("zz.0", 0)], "unknown_op"),
        ([("a.0", 5)], "unknown_pool"),
        ([("a.0", -1)], "unknown_pool"),
        ([("a.0", 0), ("a.0", 0)], "duplicate_assignment"),
        ([("a.1", 0)], "not_ready"),
        ([("a.0", 0), ("b.0", 0)], "oversubscription"),
    ])
    def test_rejections(self, asg, kind):
        res = self.run_tick0(asg=asg)
        assert kinds(res) == [kind]
        assert len(res.assignment_log) == len(asg) - 1

    def test_suspend_not_running(self):
        assert kinds(self.run_tick0(sus=["a.0"])) == ["suspend_not_running"]

    def test_suspend_unknown(self):
        assert kinds(self.run_tick0(sus=["nope"])) == ["unknown_op"]

    def test_oversubscription_message_names_numbers(self):
        res = self.run_tick0(asg=[("a.0", 0), ("b.0", 0)])
        msg = res.violation_log[0].message
        assert "cpu=3" in msg and "cpu=1" in msg

    def test_validate_assignment_is_pure(self):
        state = init_sim(self.trace, one_pool())
        assert validate_assignment(state, Assignment("a.0", 0)).kind == "not_ready"  # not yet arrived
        state.clock = 0
        step(state, Idle())
        assert validate_assignment(state, Assignment("a.0", 0)) is None
        assert state.cpu_used == [0]


def test_rejects_bad_inputs():
    with pytest.raises(InvalidTrace):
        init_sim([pipeline("a", ops=[op("a", 0, cpu=99)])], one_pool())
    with pytest.raises(InvalidTrace):
        init_sim([pipeline("a", arrival=5), pipeline("b", arrival=1)], one_pool())
    with pytest.raises(InvalidTrace):
        init_sim([pipeline("a", ops=[op("a", 0, deps=[0])])], one_pool())
    with pytest.raises(InvalidConfig):
        init_sim([], one_pool(max_ticks=0))


def test_interp_error_wrapped_with_tick():
    class Boom(Idle):
        def schedule(self, failures, pipelines, view):
            if view.clock == 2:
                raise InterpError("runtime", "bad", 1, 1)
            return ScheduleResult()

    with pytest.raises(PolicyRuntimeError) as ei:
        run([pipeline("a", timeout=50)], Boom(), one_pool())
    assert ei.value.tick == 2 and ei.value.cause.kind == "runtime"


def test_run_is_deterministic(suite, sim_config):
    a = run(suite[4], NativeFifo(), sim_config)
    b = run(suite[4], NativeFifo(), sim_config)
    assert a.assignment_log == b.assignment_log and a.metrics == b.metrics
    assert a.assignment_log_jsonl() == b.assignment_log_jsonl()


class RandomPolicy:
    """Mostly-valid random decisions driven by an explicit seed."""

    name = "random"

    def __init__(self, seed):
        self.seed = seed

    def start(self):
        self.rng = random.Random(self.seed)
        self.known = []

    def schedule(self, failures, pipelines, view):
        for p in pipelines:
            self.known.extend(o.op_id for o in p.ops)
        sus, asg = [], []
        for pid in range(view.num_pools):
            for h in view.running(pid):
                if self.rng.random() < 0.05:
                    sus.append(Suspension(h["op_id"]))
        for _ in range(self.rng.randint(0, 6)):
            if self.known:
                asg.append(Assignment(self.rng.choice(self.known), self.rng.randrange(view.num_pools)))
        return ScheduleResult(sus, asg)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), pseed=st.integers(0, 10_000))
def test_invariants_under_random_policy(seed, pseed):
    params = dataclasses.replace(PRESETS["mixed-heavy-tail"], horizon=120, arrival_rate=0.4)
    trace = generate_trace(params, seed)
    config = one_pool(cpu=16, mem=32768, max_ticks=400, waiting_bound=40, pools=2)
    state = init_sim(trace, config)
    policy = RandomPolicy(pseed)
    policy.start()
    arrived_total = 0
    while state.clock < config.max_ticks and not state.all_terminal():
        before = {o: e for o, (_, e) in state.running.items()}
        step(state, policy)
        arrived_total = state.next_arrival
        for i, pool in enumerate(config.pools):
            ops_here = [state.ops[o] for o, (p, _) in state.running.items() if p == i]
            assert state.cpu_used[i] == sum(o.cpu_req for o in ops_here) <= pool.cpu_capacity
            assert state.mem_used[i] == sum(o.mem_req for o in ops_here) <= pool.mem_capacity
        outcomes = [r.outcome for r in state.completion_log]
        assert len(state.in_flight) + outcomes.count("completed") + outcomes.count("failed") == arrived_total
        # progress is monotone unless the op restarted this tick
        for o, (_, e) in state.running.items():
            assert e == before.get(o, 0) + 1 or e == 1
        for o, st_ in state.op_status.items():
            if st_ == "done":
                assert all(state.op_status[d] == "done" for d in state.ops[o].deps)
    assert set(v.kind for v in state.violation_log) <= set(DECISION_VIOLATIONS) | {"waiting_bound_exceeded"}


def test_canonical_states_start_at_zero(suite, sim_config):
    states = [init_sim(t, sim_config) for t in suite]
    assert len(states) == 6 and all(s.clock == 0 and s.cpu_used == [0] * 4 for s in states)
