"""Command line: ``neural-ac {train,decompose,mixing,plot}``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
``NEURAL_AC_DETERMINISTIC=1`` forces one job and single-threaded BLAS.
"""

from __future__ import annotations

import os

if os.environ.get("NEURAL_AC_DETERMINISTIC") == "1":
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, "1")

import argparse  # noqa: E402
import dataclasses  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402
from concurrent.futures import ProcessPoolExecutor  # noqa: E402
from datetime import datetime, timezone  # noqa: E402
from pathlib import Path  # noqa: E402

from . import experiments  # noqa: E402
from .config import ConfigError, config_hash, load_config  # noqa: E402
from .error_lab import InsufficientPointsError  # noqa: E402

log = logging.getLogger("neural_ac")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def deterministic() -> bool:
    return os.environ.get("NEURAL_AC_DETERMINISTIC") == "1"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _prepare_out(args, command: str, digest: str) -> Path:
    if args.out:
        out = Path(args.out)
        if out.exists() and any(out.iterdir()):
            raise UsageError(f"output directory {out} exists and is not empty")
    else:
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
        out = Path("runs") / f"{command}-{digest[:8]}-{stamp}"
        if out.exists():
            raise UsageError(f"output directory {out} already exists")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args, command: str, required):
    if not args.config:
        raise UsageError("--config is required")
    cfg, text = load_config(args.config, required)
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("--seed must be nonnegative")
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, seeds=[args.seed]),
                                  sweep=dataclasses.replace(cfg.sweep, seeds=[args.seed]))
    digest = config_hash(text)
    out = _prepare_out(args, command, digest)
    # exact input echo: the manifest hash re-hashes this file
    (out / "config.json").write_text(text)
    return cfg, text, digest, out


def _manifest(out: Path, command: str, args, digest: str, seeds, started: str, extra=None) -> None:
    m = {
        "command": command,
        "config_path": str(args.config) if getattr(args, "config", None) else None,
        "config_sha256": digest,
        "seeds": list(seeds),
        "output_dir": str(out),
        "jobs": _jobs(args),
        "deterministic": deterministic(),
        "started": started,
        "finished": _now(),
    }
    if extra:
        m.update(extra)
    experiments.write_json(out / "manifest.json", m)


def _jobs(args) -> int:
    if deterministic():
        return 1
    return max(1, int(getattr(args, "jobs", 1) or 1))


def _train_job(payload):
    cfg, seed, out = payload
    return experiments.run_train_job(cfg, seed, out)


def cmd_train(args) -> int:
    started = _now()
    cfg, _, digest, out = _load(args, "train", ("train",))
    seeds = cfg.train.seeds
    payloads = [(cfg, s, out / f"seed_{s}") for s in seeds]
    jobs = min(_jobs(args), len(payloads))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_train_job, payloads))
    else:
        results = [_train_job(p) for p in payloads]
    for r in results:
        log.info("seed %d: %d records, final gap %.6g", r["seed"], r["records"], r["final_gap"])
    experiments.write_rows(out / "jobs.csv", results)
    _manifest(out, "train", args, digest, seeds, started)
    return EXIT_OK


def cmd_decompose(args) -> int:
    started = _now()
    cfg, _, digest, out = _load(args, "decompose", ("sweep",))
    summary = experiments.run_sweep(cfg, out)
    _manifest(out, "decompose", args, digest, cfg.sweep.seeds, started, {"target": cfg.sweep.target})
    print(json.dumps({k: v for k, v in summary.items() if k not in ("x", "y")}, sort_keys=True))
    if cfg.sweep.target == "stages" and not summary["recursion_holds"]:
        print("error: critic-error recursion violated", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_mixing(args) -> int:
    started = _now()
    cfg, _, digest, out = _load(args, "mixing", ("problem",))
    report = experiments.run_mixing(cfg, out)
    _manifest(out, "mixing", args, digest, [], started)
    print(json.dumps({k: report[k] for k in ("p", "rho", "r_squared", "fitted", "monotone")}, sort_keys=True))
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plots import plot_run

    run = Path(args.run_dir)
    if not run.is_dir():
        raise UsageError(f"run directory {run} does not exist")
    try:
        made = plot_run(run, args.out)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    print(" ".join(made))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="neural-ac", description="Neural actor-critic experiments on grid-verified MDPs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, hlp in (("train", cmd_train, "run the actor-critic loop"),
                          ("decompose", cmd_decompose, "critic error sweeps and decompositions"),
                          ("mixing", cmd_mixing, "exact TV mixing diagnostic")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config", required=False)
        s.add_argument("--out")
        s.add_argument("--seed", type=int)
        s.add_argument("--jobs", type=int, default=1)
        s.set_defaults(fn=fn)
    s = sub.add_parser("plot", help="SVG figures plus their data CSVs for a run directory")
    s.add_argument("run_dir")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ConfigError, UsageError, InsufficientPointsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
