import itertools

import hypothesis
import numpy as np
import pytest
from hypothesis import strategies as st

from conftest import random_fixture
from neural_ac import error_lab as lab
from neural_ac import mdp as mdp_core
from neural_ac import net
from neural_ac.critic import CriticConfig


def small_gridnet(mdp, width=1):
    return lab.GridNetClass(mdp.grid_inputs(), width=width, w_levels=(-1.0, 0.0, 1.5), b_levels=(-0.5, 1.0, 3.0))


def test_constant_class_is_weighted_mean(rng):
    y = rng.normal(size=7)
    w = rng.random(7)
    fit = lab.ConstantClass().fit(np.arange(7), y, w, 7)
    c = np.sum(w * y) / np.sum(w)
    np.testing.assert_allclose(fit.values, c, atol=1e-14)
    assert fit.objective == pytest.approx(np.sum(w * (y - c) ** 2), abs=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_realizable_class_has_zero_approximation_error(seed):
    mdp, pi, rng = random_fixture(seed)
    q_prev = rng.random((4, 3))
    r1 = lab.q1_reference(mdp, pi, q_prev, lab.FeatureClass.one_hot(mdp))
    np.testing.assert_allclose(r1.values, mdp_core.bellman_policy_op(q_prev, pi, mdp), atol=1e-12)
    d = lab.decompose(mdp, pi, q_prev, r1.values, r1, r1, r1)
    assert d.eps1 <= 1e-12 and d.total <= 1e-12


def test_gridnet_objectives_match_enumeration(rng):
    mdp = mdp_core.two_state_fixture(0.8, 0.5)
    cls = small_gridnet(mdp)
    cells = rng.integers(0, 4, size=9)
    y = rng.normal(size=9)
    w = rng.random(9)
    cfg = net.NetConfig(2, 1, 3, "tanh", linear_output=True)
    G = mdp.grid_inputs()
    want = []
    for wv in itertools.product(cls.w_levels, repeat=3):
        for b in cls.b_levels:
            p = net.NetParams((np.array(wv).reshape(3, 1),), np.array([b]))
            f = net.forward(cfg, p, G)
            want.append(sum(wi * (f[c] - yi) ** 2 for c, yi, wi in zip(cells, y, w)))
    assert cls.n_combos == len(want) == 81
    np.testing.assert_allclose(cls.objectives(cells, y, w, chunk=4), want, atol=1e-13)
    fit = cls.fit(cells, y, w, 4)
    assert fit.index == int(np.argmin(want)) and fit.objective == pytest.approx(min(want), abs=1e-13)


def test_grid_mismatch_is_reported():
    mdp = mdp_core.two_state_fixture()
    with pytest.raises(lab.GridMismatchError):
        small_gridnet(mdp).fit([0], [0.0], [1.0], 6)
    with pytest.raises(lab.GridMismatchError):
        lab.decompose(mdp, mdp_core.uniform_policy(mdp), np.zeros((2, 2)), np.zeros((3, 2)),
                      *[lab.Reference(np.zeros((2, 2)), 0.0)] * 3)


@pytest.mark.parametrize("seed", range(4))
def test_population_targets_share_the_minimiser(seed):
    # E(f - y)^2 = E(f - E[y|s,a])^2 + const, so Q1 and Q2 coincide for any class
    mdp, pi, rng = random_fixture(seed, n_states=3, n_actions=2, gamma=0.8)
    q_prev = 2 * rng.random((3, 2))
    for cls in (lab.ConstantClass(), lab.FeatureClass.random_relu(mdp, 3, seed), small_gridnet(mdp)):
        r1 = lab.q1_reference(mdp, pi, q_prev, cls)
        r2 = lab.q2_reference(mdp, pi, q_prev, cls)
        np.testing.assert_allclose(r1.values, r2.values, atol=1e-10)


def test_deterministic_dynamics_give_equal_objectives():
    P = np.zeros((2, 2, 2))
    P[0, :, 1] = P[1, :, 0] = 1.0
    mdp = mdp_core.DiscretizedMdp(P, np.array([[0.1, 0.4], [0.7, 0.2]]), 0.5, state_coords=np.eye(2))
    pi = np.array([[1.0, 0.0], [0.0, 1.0]])
    cls = small_gridnet(mdp)
    w = np.full((2, 2), 0.25)
    r1 = lab.q1_reference(mdp, pi, np.ones((2, 2)), cls, weights=w)
    r2 = lab.q2_reference(mdp, pi, np.ones((2, 2)), cls, weights=w)
    assert r1.index == r2.index and r1.objective == pytest.approx(r2.objective, abs=1e-14)


def test_q3_single_tuple_interpolates():
    mdp = mdp_core.two_state_fixture()
    pi = mdp_core.uniform_policy(mdp)
    bc = lab.BufferCells(np.array([1]), np.array([0]), np.array([0.3]), np.array([0]))
    q_prev = np.array([[1.0, 3.0], [0.0, 0.0]])
    y = 0.3 + 0.8 * 2.0
    assert lab.q3_reference(mdp, bc, pi, q_prev, lab.ConstantClass()).values[0, 0] == pytest.approx(y)
    tab = lab.q3_reference(mdp, bc, pi, q_prev, lab.FeatureClass.one_hot(mdp))
    assert tab.values[1, 0] == pytest.approx(y) and tab.objective == pytest.approx(0.0, abs=1e-20)
    sampled = lab.q3_reference(mdp, bc, pi, q_prev, lab.ConstantClass(), next_actions=[1])
    assert sampled.values[0, 0] == pytest.approx(0.3 + 0.8 * 3.0)


def test_q3_with_many_iid_samples_approaches_q2():
    mdp, pi, rng = random_fixture(7, n_states=3, n_actions=2)
    q_prev = rng.random((3, 2))
    w = lab.default_weights(pi, mdp)
    n = 2**14
    sa = rng.choice(6, size=n, p=w.ravel())
    s, a = np.divmod(sa, 2)
    s2 = np.array([rng.choice(3, p=mdp.transitions[i, j]) for i, j in zip(s, a)])
    bc = lab.BufferCells(s, a, mdp.rewards[s, a], s2)
    cls = lab.FeatureClass.one_hot(mdp)
    q2 = lab.q2_reference(mdp, pi, q_prev, cls).values
    q3 = lab.q3_reference(mdp, bc, pi, q_prev, cls).values
    assert np.sum(w * np.abs(q3 - q2)) <= 0.02


@hypothesis.given(seed=st.integers(0, 2**32 - 1))
@hypothesis.settings(max_examples=40, deadline=None)
def test_decomposition_triangle_inequality(seed):
    mdp, pi, rng = random_fixture(seed % 1000, n_states=3, n_actions=2)
    rng = np.random.default_rng(seed)
    tabs = [lab.Reference(rng.normal(size=(3, 2)), 0.0) for _ in range(3)]
    d = lab.decompose(mdp, pi, rng.normal(size=(3, 2)), rng.normal(size=(3, 2)), *tabs)
    assert d.residual >= -1e-12
    assert min(d.eps1, d.eps2, d.eps3, d.eps4) >= 0.0


def test_recursion_single_stage():
    mdp, pi, rng = random_fixture(3)
    q1 = rng.random((4, 3))
    rep = lab.recursion_check(mdp, pi, [q1])
    w = mdp_core.visitation_distribution(pi, mdp, np.full(4, 0.25)).ravel()
    M = mdp_core.sa_transition_matrix(pi, mdp)
    qp = mdp_core.exact_q_policy(pi, mdp)
    assert rep.terms == [pytest.approx(w @ np.abs(mdp.rewards - q1).ravel(), abs=1e-14)]
    assert rep.tail == pytest.approx(0.9 * w @ (M @ qp.ravel()), abs=1e-14)
    assert rep.lhs == pytest.approx(w @ np.abs(qp - q1).ravel(), abs=1e-14)
    assert rep.holds
    with pytest.raises(ValueError):
        lab.recursion_check(mdp, pi, [])


def test_recursion_with_exact_stages_is_tight():
    mdp, pi, _ = random_fixture(4)
    stages, q = [], np.zeros((4, 3))
    for _ in range(5):
        q = mdp_core.bellman_policy_op(q, pi, mdp)
        stages.append(q)
    rep = lab.recursion_check(mdp, pi, stages)
    assert max(rep.terms) <= 1e-13
    assert rep.lhs == pytest.approx(rep.tail, rel=1e-10)
    assert rep.holds


@hypothesis.given(seed=st.integers(0, 2**32 - 1), J=st.integers(1, 6))
@hypothesis.settings(max_examples=40, deadline=None)
def test_recursion_holds_for_arbitrary_stages(seed, J):
    mdp, pi, _ = random_fixture(seed % 500)
    rng = np.random.default_rng(seed)
    stages = [rng.uniform(0, 10, size=(4, 3)) for _ in range(J)]
    rep = lab.recursion_check(mdp, pi, stages, q0=rng.uniform(0, 1, size=(4, 3)))
    assert rep.holds
    assert rep.rhs_qmax >= rep.rhs_printed


def test_rademacher_exact_cases():
    z = np.arange(1.0, 9.0)
    assert lab.rademacher_estimate([z], mode="exact") == pytest.approx(0.0, abs=1e-15)
    cube = np.array(list(itertools.product([-1.0, 1.0], repeat=8)))
    assert lab.rademacher_estimate(cube, mode="exact") == pytest.approx(1.0, abs=1e-15)
    want = np.mean([abs(np.dot(s, z)) for s in itertools.product([-1, 1], repeat=8)]) / 8
    assert lab.rademacher_estimate([z, -z], mode="exact") == pytest.approx(want, abs=1e-14)


def test_rademacher_monte_carlo_tolerance(rng):
    Z = rng.normal(size=(5, 12))
    exact = lab.rademacher_estimate(Z, mode="exact")
    n_mc = 4000
    mc = lab.rademacher_estimate(Z, n_mc=n_mc, rng=np.random.default_rng(1))
    assert abs(mc - exact) <= 4 / np.sqrt(n_mc) * np.max(np.linalg.norm(Z, axis=1))


def test_rademacher_validation():
    with pytest.raises(ValueError):
        lab.rademacher_estimate([[1.0, 2.0], [1.0]])
    with pytest.raises(ValueError):
        lab.rademacher_estimate(np.ones((1, 21)), mode="exact")
    with pytest.raises(ValueError):
        lab.rademacher_estimate(np.ones((1, 2)), n_mc=0)


def test_conditional_minimiser_hand_case():
    joint = np.full((2, 2), 0.25)
    g = np.array([[0.0, 2.0], [1.0, 3.0]])
    F = np.array([[1.0, 2.0], [0.0, 0.0], [2.0, 1.0]])
    rep = lab.conditional_minimizer_check(joint, g, F)
    assert rep["argmin_joint"] == rep["argmin_conditional"] == [0]
    assert rep["coincide"] and rep["offset_spread"] <= 1e-14


def test_conditional_minimiser_random_tables():
    rng = np.random.default_rng(0)
    for _ in range(100):
        nx, ny = rng.integers(1, 5, size=2)
        p = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
        g = rng.normal(size=(nx, ny))
        F = rng.normal(size=(int(rng.integers(1, 8)), nx))
        rep = lab.conditional_minimizer_check(p, g, F)
        assert rep["coincide"] and rep["offset_spread"] <= 1e-12


def test_conditional_mean_in_class_wins(rng):
    p = rng.dirichlet(np.ones(12)).reshape(4, 3)
    g = rng.normal(size=(4, 3))
    cond = (p * g).sum(axis=1) / p.sum(axis=1)
    F = np.vstack([rng.normal(size=(5, 4)), cond])
    assert lab.conditional_minimizer_check(p, g, F)["argmin_joint"] == [5]
    with pytest.raises(mdp_core.ValidationError):
        lab.conditional_minimizer_check(2 * p, g, F)


@pytest.mark.parametrize("slope", [-0.5, -0.25])
def test_scaling_fit_recovers_slope(slope):
    x = 2.0 ** np.arange(4, 12)
    fit = lab.scaling_fit(x, 3.0 * x**slope)
    assert fit.slope == pytest.approx(slope, abs=1e-10)
    assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_scaling_fit_rejects_thin_sweeps():
    with pytest.raises(lab.InsufficientPointsError):
        lab.scaling_fit([1, 2, 3], [1, 1, 1])
    with pytest.raises(lab.InsufficientPointsError):
        lab.scaling_fit([1, 2, 4, 8], [1, 2, 3, 4])
    with pytest.raises(ValueError):
        lab.scaling_fit([1, 4, 16, 64], [1, -1, 1, 1])


def test_ball_minimizer_stays_in_ball_and_descends(rng):
    cfg = net.NetConfig(2, 16, 3, "relu", linear_output=True)
    theta0 = net.init_params(cfg, rng)
    X = rng.normal(size=(20, 3))
    y = rng.random(20)
    theta = lab.ball_minimizer(cfg, theta0, X, y, 0.5)
    assert max(net.ParamBall(theta0, 0.5).distances(theta)) <= 0.5 + 1e-12
    loss = lambda p: np.mean((net.forward(cfg, p, X) - y) ** 2)
    assert loss(theta) < loss(theta0)


def test_eps3_sweep_and_decomposition_run():
    mdp = mdp_core.two_state_fixture(0.8, 0.2)
    setup = lab.GridSetup(mdp, mdp_core.uniform_policy(mdp), np.zeros((2, 2)), np.full(2, 0.5))
    rows = lab.eps3_sweep(setup, lab.FeatureClass.one_hot(mdp), [16, 64], [0, 1])
    assert [(r["n"], r["seed"]) for r in rows] == [(16, 0), (16, 1), (64, 0), (64, 1)]
    assert all(r["eps3"] >= 0 for r in rows)
    xs, med = lab.median_by(rows, "n", "eps3")
    assert xs.tolist() == [16.0, 64.0] and med.shape == (2,)
    cfg = CriticConfig(3, 64, net.NetConfig(2, 16, 3, "relu", linear_output=True), beta_scale=16.0)
    run = lab.decomposition_run(setup, cfg, 64, lab.FeatureClass.one_hot(mdp))
    assert [d.j for d in run.decompositions] == [1, 2, 3]
    assert all(d.residual >= -1e-12 for d in run.decompositions)
    assert run.recursion.holds
