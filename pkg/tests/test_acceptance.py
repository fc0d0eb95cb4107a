"""Acceptance criteria 1-10. Each test prints one PASS/FAIL line."""

import contextlib
import json
import math
import random
import shutil
import time
from fractions import Fraction

import pytest

from conftest import ACCEPTANCE_LINES, FIXTURES
from schedloop.cli import main
from schedloop.discovery import BudgetImpossible, ContextEntry, compress_context, context_tokens, median_score
from schedloop.discovery.context import KEEP_RECENT
from schedloop.errors import FormatError
from schedloop.events import Assignment, ScheduleResult, Suspension
from schedloop.lang import FIFO_SOURCE, InterpretedPolicy, NativeFifo, bundled_source
from schedloop.llm import estimate_cost
from schedloop.metrics import CompletionRecord, compute_metrics
from schedloop.model import SimConfig
from schedloop.sim import DECISION_VIOLATIONS, init_sim, run, step
from schedloop.workload import (
    CANONICAL_SIM_CONFIG,
    PRESETS,
    ClassProfile,
    WorkloadParams,
    canonical_suite,
    dumps_trace,
    export_trace,
    generate_trace,
    import_trace,
    loads_trace,
    preset_suite,
)

# frozen after the first verified simulation; compared exactly
GOLDEN_HEAVY_TAIL_FIFO = 75.72652757078987
GOLDEN_HEAVY_TAIL_SJF = 103.39320931720057


@contextlib.contextmanager
def criterion(n, text):
    start = time.perf_counter()
    detail = {}
    try:
        yield detail
    except BaseException as exc:
        line = f"FAIL criterion {n}: {text} ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
        print(line)
        ACCEPTANCE_LINES.append(line)
        raise
    extra = ", ".join(f"{k}={v}" for k, v in detail.items())
    line = f"PASS criterion {n}: {text} [{time.perf_counter() - start:.1f}s{', ' + extra if extra else ''}]"
    print(line)
    ACCEPTANCE_LINES.append(line)


def test_c01_determinism_golden(tmp_path, capsys):
    with criterion(1, "simulate --baseline fifo twice gives byte-identical metrics and assignment logs") as d:
        start = time.perf_counter()
        outputs = []
        for name in ("a", "b"):
            assert main(["simulate", "--baseline", "fifo", "--assignment-log", str(tmp_path / name)]) == 0
            outputs.append(capsys.readouterr().out)
        elapsed = time.perf_counter() - start
        assert outputs[0] == outputs[1]
        files = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert len(files) == 6
        for f in files:
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        assert elapsed < 10
        d["runtime_s"] = f"{elapsed:.2f}"


def fuzz_traces(n):
    rng = random.Random(2024)
    out = []
    for i in range(n):
        name = rng.choice(sorted(PRESETS))
        base = PRESETS[name]
        lo = rng.randint(1, 4)
        params = WorkloadParams(
            arrival_rate=rng.uniform(0.05, 0.8),
            horizon=rng.randint(0, 200),
            interactive_fraction=rng.random(),
            ops_range=(lo, lo + rng.randint(0, 6)),
            layer_width_range=(1, rng.randint(1, 4)),
            interactive=base.interactive,
            batch=ClassProfile(rng.uniform(1, 3), rng.uniform(0, 1.5), (2, 8), (1024, 8192)),
            timeout_factor=rng.uniform(1.0, 5.0),
        )
        out.append(generate_trace(params, rng.getrandbits(64), label=f"fuzz-{i}"))
    return out


def test_c02_conservation(suite):
    with criterion(2, "in_flight + completed + failed == arrivals at every tick (canonical + 100 fuzz)") as d:
        start = time.perf_counter()
        ticks = breaches = rejected = 0
        for trace in list(suite) + fuzz_traces(100):
            state = init_sim(trace, CANONICAL_SIM_CONFIG)
            policy = NativeFifo()
            policy.start()
            while state.clock < CANONICAL_SIM_CONFIG.max_ticks and not state.all_terminal():
                step(state, policy)
                ticks += 1
                done = sum(r.outcome == "completed" for r in state.completion_log)
                failed = sum(r.outcome == "failed" for r in state.completion_log)
                if len(state.in_flight) + done + failed != state.next_arrival:
                    breaches += 1
            rejected += sum(v.kind in DECISION_VIOLATIONS for v in state.violation_log)
        elapsed = time.perf_counter() - start
        assert breaches == 0
        assert rejected == 0
        assert elapsed < 60
        d.update(ticks=ticks, breaches=breaches, runtime_s=f"{elapsed:.1f}")


class FuzzPolicy:
    """Random mix of valid and invalid decisions."""

    name = "fuzz"

    def __init__(self, seed, op_ids):
        self.seed = seed
        self.op_ids = op_ids

    def start(self):
        self.rng = random.Random(self.seed)
        self.arrived = []
        self.last = ([], [])

    def schedule(self, failures, pipelines, view):
        rng = self.rng
        self.arrived.extend(p.pipeline_id for p in pipelines)
        self.arrived = [p for p in self.arrived if view.pipeline_status(p) == "in_flight"]
        running = [h["op_id"] for i in range(view.num_pools) for h in view.running(i)]
        ready = [o.op_id for p in self.arrived for o in view.ready_ops(p)]
        sus, asg = [], []
        for _ in range(rng.randint(0, 3)):
            r = rng.random()
            if r < 0.5 and running:
                sus.append(rng.choice(running))
            elif r < 0.8:
                sus.append(rng.choice(self.op_ids))
            else:
                sus.append(f"ghost-{rng.randint(0, 9)}")
        odd_pools = [4, -1, "x", 1.5, None]
        for _ in range(rng.randint(0, 8)):
            r = rng.random()
            if r < 0.6 and ready:
                op_id = rng.choice(ready)
            elif r < 0.75 and running:
                op_id = rng.choice(running)
            elif r < 0.85:
                op_id = f"ghost-{rng.randint(0, 9)}"
            else:
                op_id = rng.choice(self.op_ids)
            pool = rng.choice(odd_pools) if rng.random() < 0.15 else rng.randrange(view.num_pools)
            asg.append((op_id, pool))
            if rng.random() < 0.1:
                asg.append((op_id, pool))
        self.last = (sus, asg)
        return ScheduleResult([Suspension(s) for s in sus], [Assignment(o, p) for o, p in asg])


def test_c03_safety_monitor():
    with criterion(3, "fuzz policy over 10,000 ticks: no oversubscription, one ViolationEvent per rejection") as d:
        start = time.perf_counter()
        params = WorkloadParams(0.08, 9900, 0.5, (1, 6), (1, 3), PRESETS["mixed-heavy-tail"].interactive,
                                PRESETS["mixed-heavy-tail"].batch, 3.0)
        trace = generate_trace(params, 99)
        config = SimConfig.uniform(4, 16, 32768, max_ticks=10_000, waiting_bound=50)
        state = init_sim(trace, config)
        policy = FuzzPolicy(7, [o.op_id for p in trace.pipelines for o in p.ops])
        policy.start()
        emitted = rejected_total = accepted_total = 0
        while state.clock < config.max_ticks:
            t = state.clock
            before = set(state.running)
            n_assign = len(state.assignment_log)
            n_viol = len(state.violation_log)
            step(state, policy)
            for i, pool in enumerate(config.pools):
                assert state.cpu_used[i] <= pool.cpu_capacity and state.mem_used[i] <= pool.mem_capacity
                held = [state.ops[o] for o, (p, _) in state.running.items() if p == i]
                assert state.cpu_used[i] == sum(o.cpu_req for o in held)
                assert state.mem_used[i] == sum(o.mem_req for o in held)
            sus, asg = policy.last
            accepted_asg = len(state.assignment_log) - n_assign
            accepted_sus = sum(
                1 for o in before
                if state.op_status[o] == "ready" or (o in state.running and state.running[o][1] == 1)
            )
            new = [v for v in state.violation_log[n_viol:] if v.kind in DECISION_VIOLATIONS]
            assert all(v.tick == t for v in new)
            assert len(new) == len(sus) + len(asg) - accepted_asg - accepted_sus, f"tick {t}"
            emitted += len(sus) + len(asg)
            rejected_total += len(new)
            accepted_total += accepted_asg + accepted_sus
        elapsed = time.perf_counter() - start
        assert state.clock == 10_000
        assert accepted_total > 1000 and rejected_total > 1000
        assert elapsed < 30
        d.update(decisions=emitted, accepted=accepted_total, rejected=rejected_total, runtime_s=f"{elapsed:.1f}")


def test_c04_dsl_native_equivalence(suite):
    with criterion(4, "fifo.pol and native FIFO produce identical assignment logs on all 6 canonical traces") as d:
        for trace in suite:
            dsl = run(trace, InterpretedPolicy.from_source(FIFO_SOURCE), CANONICAL_SIM_CONFIG)
            native = run(trace, NativeFifo(), CANONICAL_SIM_CONFIG)
            assert dsl.assignment_log_jsonl() == native.assignment_log_jsonl()
        d["traces"] = len(suite)


def test_c05_percentile_oracle():
    with criterion(5, "p99/median equal a sort-and-index oracle on 1,000 random multisets") as d:
        rng = random.Random(5)
        for _ in range(1000):
            lat = [rng.randint(0, rng.choice([5, 100, 10_000])) for _ in range(rng.randint(1, 500))]
            log = [CompletionRecord(f"p{i}", 0, x, "completed") for i, x in enumerate(lat)]
            m = compute_metrics(log, [], 1000)
            xs = sorted(lat)
            for q, got in ((99, m.p99_latency), (50, m.median_latency)):
                assert got == xs[max(1, math.ceil(Fraction(q, 100) * len(xs))) - 1]
        d["multisets"] = 1000


@pytest.fixture(scope="module")
def scripted_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept")
    shutil.copytree(FIXTURES / "scripted_5", root / "scripted_5")
    shutil.copy(FIXTURES / "experiment_scripted.json", root / "exp.json")
    start = time.perf_counter()
    code = main(["discover", "--config", str(root / "exp.json"), "--runs-dir", str(root / "runs")])
    return code, root / "runs" / "scripted-5", time.perf_counter() - start


def test_c06_discovery_end_to_end(scripted_run):
    with criterion(6, "scripted 5-response discover run: best = improved policy, 2 invalid records, 5 .pol files") as d:
        code, run_dir, elapsed = scripted_run
        assert code == 0
        records = [json.loads(x) for x in (run_dir / "records.jsonl").read_text().splitlines()]
        assert len(records) == 5
        assert [r["valid"] for r in records] == [False, False, True, True, True]
        for r in records[:2]:
            assert r["error"]["line"] is not None
            assert f"line {r['error']['line']}" in r["feedback"]
        assert len(list(run_dir.glob("policy_*.pol"))) == 5
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["best"]["iteration"] == 4
        assert (run_dir / "best.pol").read_text() == records[3]["policy_source"]
        assert records[3]["score"] > records[2]["score"] > records[4]["score"]
        assert elapsed < 60
        d.update(best_iteration=4, improvement_pct=f"{manifest['best']['improvement_pct']:.2f}",
                 runtime_s=f"{elapsed:.1f}")


def test_c07_improvement_property():
    with criterion(7, "shortest-duration-first with preemption beats FIFO on the heavy-tail preset") as d:
        traces = preset_suite("mixed-heavy-tail")
        fifo = median_score([run(t, NativeFifo(), CANONICAL_SIM_CONFIG).metrics.throughput for t in traces])
        sjf_src = bundled_source("sjf_preempt")
        sjf = median_score([run(t, InterpretedPolicy.from_source(sjf_src), CANONICAL_SIM_CONFIG).metrics.throughput
                            for t in traces])
        assert sjf > fifo
        assert fifo == GOLDEN_HEAVY_TAIL_FIFO
        assert sjf == GOLDEN_HEAVY_TAIL_SJF
        d.update(fifo=f"{fifo:.3f}", sjf=f"{sjf:.3f}", margin_pct=f"{(sjf / fifo - 1) * 100:.2f}")


def test_c08_context_compression():
    with criterion(8, "60-iteration context compresses under 20k tokens keeping prompts, best, last 3") as d:
        rng = random.Random(8)
        ctx = [ContextEntry("system", "S" * 19000), ContextEntry("user", "U" * 1000)]
        for i in range(1, 61):
            for role in ("assistant", "feedback"):
                body = f"{role} {i}: " + "".join(rng.choice("abc ") for _ in range(rng.randint(800, 2400)))
                ctx.append(ContextEntry(role, body, i, summary=f"(iteration {i}: valid, score {i}.000)"))
        budget = 20_000
        assert context_tokens(ctx) > budget
        best = 17
        out = compress_context(ctx, budget, best_iteration=best)
        assert context_tokens(out) <= budget
        assert out[0] == ctx[0] and out[1] == ctx[1]
        mandatory = [e for e in ctx if e.iteration in {best, 58, 59, 60}]
        assert all(e in out for e in mandatory)
        assert [e for e in out if not e.compressed][2:] == mandatory
        assert KEEP_RECENT == 3
        floor = context_tokens(ctx[:2] + mandatory)
        with pytest.raises(BudgetImpossible):
            compress_context(ctx, floor - 1, best_iteration=best)
        d.update(before=context_tokens(ctx), after=context_tokens(out), summaries=sum(e.compressed for e in out))


def test_c09_trace_round_trip(suite, tmp_path):
    with criterion(9, "export/import round-trip of canonical traces; corrupted file -> FormatError with line") as d:
        for i, t in enumerate(suite):
            assert import_trace(export_trace(t, tmp_path / f"{i}.trace.jsonl")) == t
        lines = dumps_trace(suite[0]).splitlines()
        lines[7] = lines[7][: len(lines[7]) // 2]
        with pytest.raises(FormatError) as ei:
            loads_trace("\n".join(lines) + "\n")
        assert ei.value.line == 8
        d["corrupt_line"] = ei.value.line


def test_c10_ledger_arithmetic(scripted_run):
    with criterion(10, "estimate_cost examples and ledger additivity over the scripted run") as d:
        assert estimate_cost(1_000_000, 0, (3.0, 15.0)) == 3.0
        assert estimate_cost(0, 0, (3.0, 15.0)) == 0.0
        assert estimate_cost(500_000, 200_000, (3.0, 15.0)) == pytest.approx(4.5, abs=1e-12)
        _, run_dir, _ = scripted_run
        manifest = json.loads((run_dir / "manifest.json").read_text())
        ledger = manifest["ledger"]
        calls = ledger["per_iteration"]
        assert len(calls) == 5
        for c in calls:
            assert c["cost_usd"] == estimate_cost(c["tokens_in"], c["tokens_out"], (3.0, 15.0))
        assert ledger["total_cost_usd"] == pytest.approx(sum(c["cost_usd"] for c in calls), abs=1e-12)
        assert ledger["total_tokens_in"] == sum(c["tokens_in"] for c in calls)
        assert ledger["total_time_seconds"] == sum(c["latency_seconds"] for c in calls) == 0.0
        d["total_cost_usd"] = f"{ledger['total_cost_usd']:.6f}"
