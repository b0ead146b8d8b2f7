"""Exact TV mixing diagnostic on the two-state chain, plus its figure."""

import argparse
import sys
from pathlib import Path

from neural_ac import cli
from neural_ac.experiments import benchmark_text


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="runs/mixing")
    args = p.parse_args()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    cfg = out.parent / "mixing.json"
    cfg.write_text(benchmark_text("mixing"))
    code = cli.main(["mixing", "--config", str(cfg), "--out", str(out)])
    return code or cli.main(["plot", str(out)])


if __name__ == "__main__":
    sys.exit(main())
