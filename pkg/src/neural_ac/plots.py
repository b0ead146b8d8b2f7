"""SVG figures, each written next to the CSV of exactly the plotted points."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .actor import is_nonincreasing, read_records_csv, windowed_medians  # noqa: E402
from .experiments import read_rows, write_json, write_rows  # noqa: E402

SVG_META = {"Date": None}


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata=SVG_META)
    plt.close(fig)


def record_files(run_dir) -> list[Path]:
    run = Path(run_dir)
    direct = run / "records.csv"
    if direct.is_file():
        return [direct]
    return sorted(run.glob("seed_*/records.csv"))


def plot_gap(run_dir, out_dir=None, window: int = 20) -> dict:
    """Gap against k per seed, plus the windowed-median statistic used for acceptance."""
    files = record_files(run_dir)
    if not files:
        raise FileNotFoundError(f"no records.csv under {run_dir}")
    out = Path(out_dir or run_dir)
    out.mkdir(parents=True, exist_ok=True)
    points, windows, summary = [], [], {}
    fig, ax = plt.subplots(figsize=(6, 4))
    for f in files:
        label = f.parent.name if f.parent != Path(run_dir) else "run"
        recs = read_records_csv(f)
        ks = [r.k for r in recs]
        gaps = [r.gap for r in recs]
        points += [{"run": label, "k": k, "gap": g} for k, g in zip(ks, gaps)]
        med = windowed_medians(gaps, window)
        windows += [{"run": label, "window": i, "median_gap": float(m)} for i, m in enumerate(med)]
        summary[label] = {"nonincreasing": is_nonincreasing(med), "initial_gap": gaps[0], "final_gap": gaps[-1]}
        ax.plot(ks, gaps, marker="o" if len(ks) == 1 else None, lw=1, label=label)
    ax.set_xlabel("k")
    ax.set_ylabel("J* - J(lambda_k)")
    ax.legend(fontsize=7)
    _save(fig, out / "gap.svg")
    write_rows(out / "gap_curve.csv", points)
    write_rows(out / "gap_windows.csv", windows)
    write_json(out / "gap_summary.json", summary)
    return summary


def plot_sweep(run_dir, out_dir=None) -> dict:
    """Median error against the swept variable on log-log axes."""
    run = Path(run_dir)
    rows = read_rows(run / "sweep.csv")
    if not rows:
        raise FileNotFoundError(f"empty sweep.csv under {run_dir}")
    out = Path(out_dir or run_dir)
    out.mkdir(parents=True, exist_ok=True)
    xkey = next(k for k in ("n", "L", "x") if k in rows[0])
    ykey = next(k for k in ("eps3", "eps4", "error") if k in rows[0])
    xs = sorted({r[xkey] for r in rows})
    med = [float(np.median([r[ykey] for r in rows if r[xkey] == x])) for x in xs]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog([r[xkey] for r in rows], [r[ykey] for r in rows], ".", alpha=0.3, color="0.5")
    ax.loglog(xs, med, "o-")
    ax.set_xlabel(xkey)
    ax.set_ylabel(ykey)
    _save(fig, out / "sweep.svg")
    write_rows(out / "sweep_points.csv", [{xkey: x, f"median_{ykey}": m} for x, m in zip(xs, med)])
    return {"x": xs, "median": med}


def plot_mixing(run_dir, out_dir=None) -> dict:
    run = Path(run_dir)
    rows = read_rows(run / "tv.csv")
    out = Path(out_dir or run_dir)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.semilogy([r["lag"] for r in rows], [max(r["tv"], 1e-300) for r in rows], "o-")
    ax.set_xlabel("lag")
    ax.set_ylabel("max TV to stationary")
    _save(fig, out / "tv.svg")
    write_rows(out / "tv_points.csv", [{"lag": int(r["lag"]), "tv": r["tv"]} for r in rows])
    return {"points": len(rows)}


def plot_run(run_dir, out_dir=None) -> list[str]:
    """Emit every figure the run directory has data for; returns the figure names."""
    run = Path(run_dir)
    made = []
    if record_files(run):
        plot_gap(run, out_dir)
        made.append("gap.svg")
    if (run / "sweep.csv").is_file():
        plot_sweep(run, out_dir)
        made.append("sweep.svg")
    if (run / "tv.csv").is_file():
        plot_mixing(run, out_dir)
        made.append("tv.svg")
    if not made:
        raise FileNotFoundError(f"nothing to plot in {run_dir}")
    return made
