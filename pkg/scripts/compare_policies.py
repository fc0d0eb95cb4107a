"""Score one or more policies against native FIFO on a trace suite.

    python scripts/compare_policies.py --traces mixed-heavy-tail sjf_preempt my_policy.pol
"""

import argparse
import json
from pathlib import Path

from schedloop.cli import load_traces
from schedloop.discovery import evaluate_baseline, evaluate_policy, improvement_ratio
from schedloop.lang import bundled_source
from schedloop.workload import CANONICAL_SIM_CONFIG


def policy_source(name: str) -> str:
    path = Path(name)
    return path.read_text(encoding="utf-8") if path.exists() else bundled_source(name)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("policies", nargs="+", help=".pol files or bundled policy names (fifo, sjf_preempt)")
    ap.add_argument("--traces", default="canonical")
    ap.add_argument("--target-metric", default="throughput", choices=["throughput", "p99_latency"])
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    traces = load_traces(args.traces)
    base = evaluate_baseline(traces, CANONICAL_SIM_CONFIG, args.target_metric, args.jobs)
    rows = [{"policy": "native-fifo", "score": base.score, "ratio": 1.0}]
    for name in args.policies:
        ev = evaluate_policy(policy_source(name), traces, CANONICAL_SIM_CONFIG, args.target_metric, jobs=args.jobs)
        rows.append({"policy": name, "score": ev.score,
                     "ratio": improvement_ratio(ev.score, base.score, args.target_metric),
                     "violations": ev.violation_counts})
    print(json.dumps({"traces": [t.label for t in traces], "target_metric": args.target_metric, "results": rows},
                     indent=2))


if __name__ == "__main__":
    main()
