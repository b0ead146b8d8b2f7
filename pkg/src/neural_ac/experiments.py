"""Benchmark problems and the job runners behind the command line.

Every runner takes a parsed :class:`RunConfig` plus a seed and writes only
inside its own output directory, so seed jobs can run in parallel.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import error_lab as lab
from . import mdp as mdp_core
from .actor import ActorConfig, Problem, TrainConfig, alpha_from_mu, make_actor, train, write_records_csv
from .config import RunConfig, parse_config
from .critic import CriticConfig, write_trace_csv
from .net import NetConfig
from .policy import estimate_assumption1, save_policy
from .sampling import mixing_diagnostic

# ---------------------------------------------------------------------------
# benchmark configs: reward scale keeps Q^pi inside what the radius-1/(1-gamma) critic can represent

BENCHMARK_CRITIC = {"J": 5, "L": 512, "depth": 2, "width": 64, "activation": "relu",
                    "linear_output": True, "beta_scale": 256.0}

BENCHMARKS = {
    "two_state": {
        "schema_version": 1,
        "problem": {"kind": "two_state", "gamma": 0.8, "reward_scale": 0.2},
        "critic": BENCHMARK_CRITIC,
        "actor": {"depth": 2, "width": 8, "activation": "tanh", "sigma2_min": 1e-3},
        "train": {"K": 200, "n": 512, "alpha": 1.5, "eval_every": 1, "seeds": [0, 1, 2, 3, 4]},
    },
    "linear_gaussian": {
        "schema_version": 1,
        "problem": {"kind": "linear_gaussian", "gamma": 0.8, "reward_scale": 0.2,
                    "n_states": 40, "n_actions": 16, "bias_coordinate": True},
        # warm-started stages: fresh-init stages leave Q_J about gamma^J short on this problem
        "critic": dict(BENCHMARK_CRITIC, J=15, warm_start_stages=True),
        "actor": {"depth": 2, "width": 8, "activation": "tanh", "sigma2_min": 1e-3},
        "train": {"K": 200, "n": 2048, "alpha": 1.5, "eval_every": 1, "seeds": [0, 1, 2, 3, 4]},
    },
    "eps3": {
        "schema_version": 1,
        "problem": {"kind": "linear_gaussian", "gamma": 0.8, "reward_scale": 0.2,
                    "n_states": 20, "n_actions": 8, "bias_coordinate": True},
        "class": {"kind": "relu_features", "width": 16, "seed": 1},
        "sweep": {"target": "eps3", "values": [64, 256, 1024, 4096], "seeds": list(range(20)), "policy_seed": 0},
    },
    "eps4": {
        "schema_version": 1,
        "problem": {"kind": "two_state", "gamma": 0.8, "reward_scale": 0.2},
        "critic": dict(BENCHMARK_CRITIC, width=256),
        "sweep": {"target": "eps4", "values": [2**k for k in range(6, 13)], "seeds": list(range(10)),
                  "n": 256, "policy_seed": 0},
    },
    "stages": {
        "schema_version": 1,
        "problem": {"kind": "two_state", "gamma": 0.8, "reward_scale": 0.2},
        "critic": BENCHMARK_CRITIC,
        "class": {"kind": "gridnet", "width": 1},
        "sweep": {"target": "stages", "values": [1], "seeds": list(range(5)), "n": 512, "policy_seed": 0},
    },
    "mixing": {
        "schema_version": 1,
        "problem": {"kind": "chain", "gamma": 0.9, "kernel": [[0.9, 0.1], [0.2, 0.8]]},
        "mixing": {"max_lag": 30, "policy": "uniform"},
    },
}


def benchmark_config(name: str, **overrides) -> RunConfig:
    """Parsed benchmark config; ``overrides`` maps section -> dict of replacements."""
    raw = json.loads(json.dumps(BENCHMARKS[name]))
    for section, values in overrides.items():
        raw.setdefault(section, {}).update(values)
    return parse_config(json.dumps(raw))


def benchmark_text(name: str) -> str:
    return json.dumps(BENCHMARKS[name], indent=2) + "\n"


# ---------------------------------------------------------------------------
# builders


def build_oracle(cfg: RunConfig) -> mdp_core.DiscretizedMdp:
    p = cfg.problem
    if p.kind == "two_state":
        return mdp_core.two_state_fixture(p.gamma, p.reward_scale)
    if p.kind == "linear_gaussian":
        return linear_gaussian(cfg).discretize(p.n_states, p.n_actions)
    if p.kind == "fixture":
        return mdp_core.load_mdp(p.path)
    kernel = np.asarray(p.kernel, dtype=float)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise mdp_core.DimensionError("chain kernel must be square")
    return mdp_core.markov_chain_mdp(kernel, p.gamma)


def linear_gaussian(cfg: RunConfig) -> mdp_core.LinearGaussianMdp:
    p = cfg.problem
    return mdp_core.LinearGaussianMdp(gamma=p.gamma, reward_scale=p.reward_scale, bias_coordinate=p.bias_coordinate)


def build_problem(cfg: RunConfig) -> Problem:
    oracle = build_oracle(cfg)
    nu = np.full(oracle.n_states, 1.0 / oracle.n_states)
    if cfg.problem.kind == "linear_gaussian":
        env = linear_gaussian(cfg).as_mdp()
    else:
        env = mdp_core.tabular_env(oracle, nu)
    return Problem(env, oracle, nu, cfg.problem.kind)


def critic_config(cfg: RunConfig, input_dim: int) -> CriticConfig:
    c = cfg.critic
    net = NetConfig(c.depth, c.width, input_dim, c.activation, linear_output=c.linear_output)
    return CriticConfig(c.J, c.L, net, c.beta_prime, c.beta_scale, c.radius, c.project_output_layer,
                        c.warm_start_stages, c.trace)


def train_config(cfg: RunConfig, problem: Problem, seed: int) -> TrainConfig:
    t, a = cfg.train, cfg.actor
    critic = critic_config(cfg, problem.env.state_dim + problem.env.action_dim)
    actor = ActorConfig(a.depth, a.width, a.activation, a.sigma2_min)
    alpha = t.alpha
    if alpha is None:
        # data-driven alpha from the smallest Fisher eigenvalue at the initial actor
        probe = TrainConfig(1, 1, critic, 1.0, seed, 1, actor)
        est = estimate_assumption1(make_actor(problem, probe), problem.oracle, 1000,
                                   np.random.default_rng(seed), problem.nu)
        alpha = alpha_from_mu(est["mu_f_hat"] ** 2 / (2 * est["M_g_hat"] ** 2), 1.0)
    return TrainConfig(t.K, t.n, critic, alpha, seed, t.eval_every, actor)


def grid_setup(cfg: RunConfig, q_prev: str = "q_pi") -> lab.GridSetup:
    """Tabular behaviour policy: half uniform, half a seeded Dirichlet draw (ergodic by construction)."""
    mdp = build_oracle(cfg)
    rng = np.random.default_rng(cfg.sweep.policy_seed)
    pi = 0.5 * mdp_core.random_policy(rng, mdp) + 0.5 * mdp_core.uniform_policy(mdp)
    q = mdp_core.exact_q_policy(pi, mdp) if q_prev == "q_pi" else np.zeros_like(pi)
    return lab.GridSetup(mdp, pi, q, np.full(mdp.n_states, 1.0 / mdp.n_states))


def function_class(cfg: RunConfig, mdp: mdp_core.DiscretizedMdp):
    c = cfg.cls
    if c.kind == "constant":
        return lab.ConstantClass()
    if c.kind == "one_hot":
        return lab.FeatureClass.one_hot(mdp)
    if c.kind == "relu_features":
        return lab.FeatureClass.random_relu(mdp, c.width, c.seed)
    return lab.GridNetClass(mdp.grid_inputs(), width=min(c.width, 2))


# ---------------------------------------------------------------------------
# output helpers


def write_rows(path, rows: list[dict]) -> None:
    if not rows:
        Path(path).write_text("")
        return
    keys = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([f"{r[k]:.17g}" if isinstance(r[k], float) else r[k] for k in keys])


def _cell(v: str):
    try:
        return float(v)
    except ValueError:
        return v


def read_rows(path) -> list[dict]:
    """Rows of a CSV written by :func:`write_rows`; numeric cells become floats."""
    with open(path, newline="") as fh:
        return [{k: _cell(v) for k, v in r.items()} for r in csv.DictReader(fh)]


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# jobs


def run_train_job(cfg: RunConfig, seed: int, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(cfg)
    tcfg = train_config(cfg, problem, seed)
    schedule = set(tcfg.schedule())
    if tcfg.critic.trace:
        (out / "traces").mkdir(exist_ok=True)

    def on_iterate(k, pp, critic, buf):
        if k in schedule and tcfg.critic.trace:
            write_trace_csv(critic, out / "traces" / f"critic_k{k:04d}.csv")

    t0 = time.perf_counter()
    records, final = train(tcfg, problem, on_iterate)
    write_records_csv(records, out / "records.csv")
    write_rows(out / "timings.csv", [{"k": r.k, "wall_time": r.wall_time} for r in records])
    save_policy(out / "checkpoints" / f"policy_k{tcfg.K + 1:04d}", final)
    return {"seed": seed, "alpha": tcfg.alpha, "records": len(records),
            "final_gap": records[-1].gap, "seconds": time.perf_counter() - t0}


def run_sweep(cfg: RunConfig, out_dir) -> dict:
    """Run the configured error sweep; returns the fit summary (or stage summary)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    s = cfg.sweep
    if s.target == "synthetic":
        x = np.asarray(s.values, dtype=float)
        rows = [{"x": float(v), "seed": 0, "error": float(s.constant * v**s.exponent)} for v in x]
        write_rows(out / "sweep.csv", rows)
        fit = lab.scaling_fit(x, np.array([r["error"] for r in rows]))
        write_json(out / "fit.json", fit.to_dict())
        return fit.to_dict()
    if s.target in ("eps3", "eps4"):
        values = sorted(int(v) for v in s.values)
        if len(values) < 4:
            raise lab.InsufficientPointsError(f"insufficient points: {len(values)} sweep value(s), need 4")
        if s.target == "eps3":
            setup = grid_setup(cfg)
            rows = lab.eps3_sweep(setup, function_class(cfg, setup.mdp), values, s.seeds)
            key, val = "n", "eps3"
        else:
            setup = grid_setup(cfg)
            net = critic_config(cfg, setup.mdp.state_dim + setup.mdp.action_dim).net
            radius = cfg.critic.radius
            rows = lab.eps4_sweep(setup, net, s.n, values, s.seeds, cfg.critic.beta_scale, radius)
            key, val = "L", "eps4"
        write_rows(out / "sweep.csv", rows)
        x, y = lab.median_by(rows, key, val)
        fit = lab.scaling_fit(x, y)
        summary = dict(fit.to_dict(), sweep_var=key, statistic="median",
                       strictly_decreasing=bool(np.all(np.diff(y) < 0)))
        write_json(out / "fit.json", summary)
        return summary
    # stages: full decomposition plus recursion check per seed
    setup = grid_setup(cfg, q_prev="zero")
    cls = function_class(cfg, setup.mdp)
    critic = critic_config(cfg, setup.mdp.state_dim + setup.mdp.action_dim)
    rows, recs = [], []
    for seed in s.seeds:
        run = lab.decomposition_run(setup, critic, s.n, cls, seed)
        rows += [dict(seed=seed, **d.to_dict()) for d in run.decompositions]
        recs.append(dict(seed=seed, **{k: v for k, v in run.recursion.to_dict().items() if k != "terms"}))
    write_rows(out / "decomposition.csv", rows)
    write_rows(out / "recursion.csv", recs)
    summary = {"runs": len(recs), "recursion_holds": all(r["holds"] for r in recs),
               "printed_form_holds": all(r["holds_printed"] for r in recs),
               "max_triangle_violation": float(max(-r["residual"] for r in rows))}
    write_json(out / "fit.json", summary)
    return summary


def run_mixing(cfg: RunConfig, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mdp = build_oracle(cfg)
    if cfg.mixing.policy == "uniform":
        pi = mdp_core.uniform_policy(mdp)
    else:
        pi = mdp_core.random_policy(np.random.default_rng(cfg.mixing.policy_seed), mdp)
    report = mixing_diagnostic(pi, mdp, cfg.mixing.max_lag)
    write_json(out / "mixing.json", report.to_dict())
    write_rows(out / "tv.csv", [{"lag": t, "tv": v} for t, v in report.tv_by_lag])
    return report.to_dict()
