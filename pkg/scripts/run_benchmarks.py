"""Train both gap-trend benchmarks (5 seeds each) and plot them.

Equivalent to ``neural-ac train --config configs/<name>.json`` followed by
``neural-ac plot``; prints the windowed-median summary per seed.
"""

import argparse
import json
import sys
from pathlib import Path

from neural_ac import cli
from neural_ac.experiments import benchmark_text


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="runs/benchmarks")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--only", choices=["two_state", "linear_gaussian"])
    args = p.parse_args()
    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    for name in ("two_state", "linear_gaussian"):
        if args.only and name != args.only:
            continue
        cfg = root / f"{name}.json"
        cfg.write_text(benchmark_text(name))
        code = cli.main(["train", "--config", str(cfg), "--out", str(root / name), "--jobs", str(args.jobs)])
        if code:
            return code
        code = cli.main(["plot", str(root / name)])
        if code:
            return code
        print(name, json.dumps(json.loads((root / name / "gap_summary.json").read_text()), indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
