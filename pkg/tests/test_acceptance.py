"""Acceptance criteria, one test each; every test records a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (about 20 minutes on one
core) or as a script with ``python3 tests/test_acceptance.py``.
"""

import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, central_difference, random_fixture
from neural_ac import actor, error_lab as lab, experiments as ex, mdp as mdp_core, net, policy as pol
from neural_ac.sampling import mixing_diagnostic

ROOT = Path(__file__).resolve().parents[1]


def verdict(n: int, ok: bool, detail: str, seconds: float) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail} [{seconds:.1f}s]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_operator_suite():
    t0 = time.perf_counter()
    worst_ratio = worst_fp = worst_id = 0.0
    for seed in range(100):
        mdp, pi, rng = random_fixture(seed, n_states=5, n_actions=3, gamma=0.9)
        S, A = mdp.n_states, mdp.n_actions
        q1, q2 = rng.normal(size=(2, S, A)) * 5
        d = np.max(np.abs(q1 - q2))
        for op in (lambda q: mdp_core.bellman_policy_op(q, pi, mdp), lambda q: mdp_core.bellman_optimality_op(q, mdp)):
            worst_ratio = max(worst_ratio, np.max(np.abs(op(q1) - op(q2))) / d)
        qp = mdp_core.exact_q_policy(pi, mdp)
        qs = mdp_core.optimal_q(mdp)
        worst_fp = max(worst_fp, np.max(np.abs(mdp_core.bellman_policy_op(qp, pi, mdp) - qp)),
                       np.max(np.abs(mdp_core.bellman_optimality_op(qs, mdp) - qs)))
        explicit = np.empty((S, A))
        for s in range(S):
            for a in range(A):
                explicit[s, a] = mdp.rewards[s, a] + mdp.gamma * sum(
                    mdp.transitions[s, a, t] * sum(pi[t, b] * q1[t, b] for b in range(A)) for t in range(S))
        worst_id = max(worst_id, np.max(np.abs(mdp_core.bellman_policy_op(q1, pi, mdp) - explicit)))
    dt = time.perf_counter() - t0
    ok = worst_ratio <= 0.9 + 1e-12 and worst_fp <= 1e-10 and worst_id <= 1e-12 and dt < 5
    verdict(1, ok, f"contraction ratio {worst_ratio:.6f} <= 0.9, fixed point {worst_fp:.1e}, "
                   f"identity {worst_id:.1e} on 100 fixtures", dt)


def test_criterion_02_gradients():
    t0 = time.perf_counter()
    worst_net = worst_score = 0.0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        cfg = net.NetConfig(int(rng.integers(2, 5)), int(rng.integers(2, 9)), int(rng.integers(1, 5)), "tanh", seed)
        p = net.init_params(cfg)
        x = rng.normal(size=cfg.input_dim)
        g = net.grad_params(cfg, p, x).flat()
        fd = central_difference(lambda v: net.forward(cfg, p.unflat(v), x), p.flat())
        worst_net = max(worst_net, np.linalg.norm(g - fd) / np.linalg.norm(fd))
        pp = pol.init_policy(2, width=int(rng.integers(2, 6)), seed=seed)
        s, a = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 1)
        sc = pol.score(pp, s, a)
        fd = central_difference(lambda v: pol.log_density(pp.with_flat(v), s, a), pp.flat())
        worst_score = max(worst_score, np.linalg.norm(sc - fd) / np.linalg.norm(fd))
    dt = time.perf_counter() - t0
    ok = worst_net <= 1e-4 and worst_score <= 1e-5 and dt < 30
    verdict(2, ok, f"backprop rel err {worst_net:.1e} <= 1e-4, score rel err {worst_score:.1e} <= 1e-5", dt)


def test_criterion_03_projection_and_update():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst_ball = worst_len = worst_scale = 0.0
    for i in range(200):
        cfg = net.NetConfig(3, 6, 3, "relu", seed=i)
        c = net.init_params(cfg)
        radius = float(rng.uniform(1e-3, 5.0))
        ball = net.ParamBall(c, radius)
        q = net.project(c.map(lambda a: a + rng.normal(scale=rng.uniform(0, 20), size=a.shape)), ball)
        worst_ball = max(worst_ball, max(ball.distances(q)) - radius)
        pp = pol.init_policy(2, width=4, seed=i % 10)
        d = rng.normal(size=pp.n_params)
        alpha, k = float(rng.uniform(0.01, 10)), int(rng.integers(1, 500))
        new = actor.actor_update(pp, d, alpha, k)
        worst_len = max(worst_len, abs(np.linalg.norm(new.flat() - pp.flat()) - alpha / k))
        scaled = actor.actor_update(pp, float(rng.uniform(1e-3, 1e3)) * d, alpha, k)
        worst_scale = max(worst_scale, np.max(np.abs(scaled.flat() - new.flat())))
    dt = time.perf_counter() - t0
    ok = worst_ball <= 1e-12 and worst_len <= 1e-10 and worst_scale <= 1e-12 and dt < 5
    verdict(3, ok, f"ball excess {worst_ball:.1e}, step length err {worst_len:.1e}, "
                   f"scaling diff {worst_scale:.1e}", dt)


def test_criterion_04_population_targets():
    t0 = time.perf_counter()
    rows = []
    for seed in range(20):
        if seed < 4:
            mdp = mdp_core.two_state_fixture(0.8, 0.2 + 0.2 * seed)
            rng = np.random.default_rng(seed)
            pi = mdp_core.random_policy(rng, mdp)
        else:
            mdp, pi, rng = random_fixture(seed, n_states=3, n_actions=2, gamma=0.8)
        q_prev = rng.uniform(0, 2, size=(mdp.n_states, mdp.n_actions))
        cls = lab.GridNetClass(mdp.grid_inputs(), width=1)
        w = lab.default_weights(pi, mdp)
        r1 = lab.q1_reference(mdp, pi, q_prev, cls)
        r2 = lab.q2_reference(mdp, pi, q_prev, cls)
        eps2 = float(np.sum(w * np.abs(r1.values - r2.values)))
        tol = cls.resolution * cls.lipschitz()
        rows.append((seed, eps2, tol))
    table_ok = []
    rng = np.random.default_rng(44)
    for _ in range(100):
        nx, ny = rng.integers(1, 6, size=2)
        p = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
        table_ok.append(lab.conditional_minimizer_check(p, rng.normal(size=(nx, ny)),
                                                        rng.normal(size=(int(rng.integers(1, 10)), nx)))["coincide"])
    dt = time.perf_counter() - t0
    for seed, e, tol in rows:
        print(f"  fixture {seed:2d}: E|Q1-Q2| = {e:.3e} (tolerance {tol:.3f})")
    ok = all(e <= tol for _, e, tol in rows) and all(table_ok) and dt < 120
    verdict(4, ok, f"max E|Q1-Q2| {max(e for _, e, _ in rows):.1e} over 20 fixtures, "
                   f"conditional check {sum(table_ok)}/100", dt)


def _sweep(name, tmp_path):
    return ex.run_sweep(ex.benchmark_config(name), tmp_path / name)


def test_criterion_05_sampling_error_scaling(tmp_path):
    t0 = time.perf_counter()
    fit = _sweep("eps3", tmp_path)
    dt = time.perf_counter() - t0
    ok = -0.75 <= fit["slope"] <= -0.30 and fit["r_squared"] >= 0.8 and dt < 900
    verdict(5, ok, f"eps3 slope {fit['slope']:.3f} in [-0.75, -0.30], r2 {fit['r_squared']:.3f} >= 0.8", dt)


def test_criterion_06_optimization_error_scaling(tmp_path):
    t0 = time.perf_counter()
    fit = _sweep("eps4", tmp_path)
    dt = time.perf_counter() - t0
    ok = fit["strictly_decreasing"] and fit["slope"] <= -0.15 and dt < 1200
    med = ", ".join(f"{v:.4f}" for v in fit["y"])
    verdict(6, ok, f"eps4 medians [{med}] strictly decreasing {fit['strictly_decreasing']}, "
                   f"slope {fit['slope']:.3f} <= -0.15", dt)


def _gap_trend(name, out):
    cfg = ex.benchmark_config(name)
    ratios, mono = [], []
    for seed in cfg.train.seeds:
        ex.run_train_job(cfg, seed, out / f"seed_{seed}")
        gaps = [r.gap for r in actor.read_records_csv(out / f"seed_{seed}" / "records.csv")]
        ratios.append(gaps[-1] / gaps[0])
        mono.append(actor.is_nonincreasing(actor.windowed_medians(gaps, 20)))
    return float(np.median(ratios)), sum(mono), len(mono)


def test_criterion_07_gap_trend(tmp_path):
    t0 = time.perf_counter()
    parts, ok = [], True
    for name in ("two_state", "linear_gaussian"):
        ratio, mono, n = _gap_trend(name, tmp_path / name)
        ok &= ratio <= 0.5 and mono >= 4
        parts.append(f"{name} median final/initial {ratio:.3f}, monotone {mono}/{n}")
    dt = time.perf_counter() - t0
    verdict(7, ok and dt < 1800, "; ".join(parts), dt)


def test_criterion_08_recursion(tmp_path):
    t0 = time.perf_counter()
    summary = _sweep("stages", tmp_path)
    recs = ex.read_rows(tmp_path / "stages" / "recursion.csv")
    extra = []
    for name in ("eps3", "eps4"):
        setup = ex.grid_setup(ex.benchmark_config(name), q_prev="zero")
        cfg = ex.benchmark_config(name, critic=ex.BENCHMARK_CRITIC)
        critic = ex.critic_config(cfg, setup.mdp.state_dim + setup.mdp.action_dim)
        run = lab.decomposition_run(setup, critic, 256, lab.FeatureClass.one_hot(setup.mdp))
        extra.append(run.recursion.holds)
    dt = time.perf_counter() - t0
    slack = min(r["rhs"] - r["lhs"] for r in recs)
    ok = summary["recursion_holds"] and all(extra) and summary["max_triangle_violation"] <= 1e-9
    verdict(8, ok, f"recursion holds on {summary['runs']} stage runs (min slack {slack:.3e}) "
                   f"and {sum(extra)}/{len(extra)} sweep setups", dt)


def test_criterion_09_mixing():
    t0 = time.perf_counter()
    K = np.array([[0.9, 0.1], [0.2, 0.8]])
    second = sorted(np.abs(np.linalg.eigvals(K)))[0]
    rep = mixing_diagnostic(np.ones((2, 1)), mdp_core.markov_chain_mdp(K), 30)
    dt = time.perf_counter() - t0
    ok = abs(second - 0.7) <= 1e-12 and abs(rep.rho - 0.7) <= 0.05 and rep.r_squared >= 0.99 and dt < 5
    verdict(9, ok, f"rho {rep.rho:.4f} vs 0.7, r2 {rep.r_squared:.5f}", dt)


def test_criterion_10_rademacher():
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    single = max(abs(lab.rademacher_estimate([rng.normal(size=n)], mode="exact")) for n in (1, 5, 12))
    cube = max(abs(lab.rademacher_estimate(np.array(np.meshgrid(*[[-1.0, 1.0]] * n)).reshape(n, -1).T,
                                           mode="exact") - 1.0) for n in (1, 4, 10))
    sets = [rng.normal(size=(k, n)) for k, n in ((1, 6), (3, 10), (8, 14), (20, 16))]
    sets.append(np.vstack([sets[1][0], -sets[1][0]]))
    n_mc, worst = 2000, 0.0
    for i, Z in enumerate(sets):
        exact = lab.rademacher_estimate(Z, mode="exact")
        mc = lab.rademacher_estimate(Z, n_mc=n_mc, rng=np.random.default_rng(i))
        worst = max(worst, abs(mc - exact) / (4 / np.sqrt(n_mc) * np.max(np.linalg.norm(Z, axis=1))))
    dt = time.perf_counter() - t0
    ok = single <= 1e-12 and cube <= 1e-12 and worst <= 1.0 and dt < 10
    verdict(10, ok, f"singleton {single:.1e}, hypercube {cube:.1e}, MC error {worst:.2f} of allowance", dt)


def _cli_run(cfg_path, out):
    env = dict(os.environ, NEURAL_AC_DETERMINISTIC="1")
    res = subprocess.run([sys.executable, "-m", "neural_ac.cli", "train", "--config", str(cfg_path),
                          "--out", str(out), "--seed", "0"], env=env, capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    return (out / "seed_0" / "records.csv").read_bytes()


def test_criterion_11_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg_path = tmp_path / "two_state.json"
    cfg_path.write_text(ex.benchmark_text("two_state"))
    a = _cli_run(cfg_path, tmp_path / "a")
    b = _cli_run(cfg_path, tmp_path / "b")
    dt = time.perf_counter() - t0
    rows = a.count(b"\n") - 1
    verdict(11, a == b and rows == 200, f"two K=200 runs, {rows} records each, byte-identical {a == b}", dt)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
