"""Write every built-in benchmark config to configs/<name>.json."""

import argparse
from pathlib import Path

from neural_ac.experiments import BENCHMARKS, benchmark_text


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--dir", default=str(Path(__file__).resolve().parents[1] / "configs"))
    args = p.parse_args()
    out = Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in BENCHMARKS:
        (out / f"{name}.json").write_text(benchmark_text(name))
        print(out / f"{name}.json")


if __name__ == "__main__":
    main()
