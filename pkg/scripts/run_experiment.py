"""Run a discovery experiment, then print its report.

    python scripts/run_experiment.py tests/fixtures/experiment_scripted.json --runs-dir runs
"""

import argparse
import contextlib
import io
import json
import sys
from pathlib import Path

from schedloop.cli import build_report, main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("config")
    ap.add_argument("--runs-dir", default="runs")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli_main(["discover", "--config", args.config, "--runs-dir", args.runs_dir, "--jobs", str(args.jobs)])
    if code != 0:
        return code
    report = build_report(Path(json.loads(buf.getvalue())["run_dir"]))
    for row in report.pop("trajectory"):
        print(f"iter {row['iteration']:>3}  valid={row['valid']!s:<5}  score={row['score']}  best={row['best_so_far']}")
    print(json.dumps(report, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
