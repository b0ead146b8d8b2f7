"""Run the critic error sweeps (eps3 over n, eps4 over L) and the stage decompositions."""

import argparse
import sys
from pathlib import Path

from neural_ac import cli
from neural_ac.experiments import benchmark_text


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="runs/sweeps")
    p.add_argument("targets", nargs="*", default=["eps3", "eps4", "stages"])
    args = p.parse_args()
    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    for name in args.targets:
        cfg = root / f"{name}.json"
        cfg.write_text(benchmark_text(name))
        code = cli.main(["decompose", "--config", str(cfg), "--out", str(root / name)])
        if code:
            return code
        if name != "stages":
            cli.main(["plot", str(root / name)])
    return 0


if __name__ == "__main__":
    sys.exit(main())
