"""Critic error analysis on grid MDPs.

Reference fits Q1 (exact Bellman image), Q2 (stochastic target, population)
and Q3 (stochastic target, sample) over small searchable function classes,
the four-way decomposition of a stage error, the unrolled critic-error
recursion, Rademacher complexity, and log-log scaling fits.

All grid functions are ``(n_states, n_actions)`` tables; expectations over
state-action pairs use an explicit weight table (by default the stationary
distribution of the state-action chain).
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from . import mdp as mdp_core
from .critic import CriticConfig, fit_critic, run_stage, stage_data
from .net import NetConfig, NetParams, forward, init_params, project, ParamBall, value_and_grad, vjp
from .policy import GridPolicy
from .sampling import ReplayBuffer, collect_rollout


class InsufficientPointsError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


# ---------------------------------------------------------------------------
# function classes: each fits sum_i w_i (f(cell_i) - y_i)^2 over grid cells


@dataclass(frozen=True)
class Fit:
    values: np.ndarray  # flat, one entry per grid cell
    objective: float
    index: int | None = None  # winning combo for enumerated classes


class ConstantClass:
    """f = c for a scalar c."""

    name = "constant"

    def fit(self, cells, y, w, n_cells: int) -> Fit:
        w = np.asarray(w, dtype=float)
        c = float(np.dot(w, y) / w.sum())
        return Fit(np.full(n_cells, c), float(np.dot(w, (c - y) ** 2)))


@dataclass(frozen=True, eq=False)
class FeatureClass:
    """Linear span of fixed features, one row per grid cell (weighted least squares)."""

    features: np.ndarray
    name: str = "features"

    @classmethod
    def one_hot(cls, mdp: mdp_core.DiscretizedMdp) -> "FeatureClass":
        return cls(np.eye(mdp.n_states * mdp.n_actions), "tabular")

    @classmethod
    def random_relu(cls, mdp: mdp_core.DiscretizedMdp, width: int, seed: int = 0) -> "FeatureClass":
        """Frozen hidden layer of a D=2 relu network; only the output vector is fitted."""
        X = mdp.grid_inputs()
        W = np.random.default_rng(seed).standard_normal((X.shape[1], width))
        return cls(np.maximum(X @ W, 0.0) / np.sqrt(width), f"relu{width}")

    def fit(self, cells, y, w, n_cells: int) -> Fit:
        cells = np.asarray(cells)
        if self.features.shape[0] != n_cells:
            raise GridMismatchError("feature rows do not match the grid")
        sw = np.sqrt(np.asarray(w, dtype=float))
        A = self.features[cells] * sw[:, None]
        coef = np.linalg.lstsq(A, sw * y, rcond=None)[0]
        vals = self.features @ coef
        return Fit(vals, float(np.dot(w, (vals[cells] - y) ** 2)))


@dataclass(frozen=True, eq=False)
class GridNetClass:
    """A D=2 network of width 1 or 2 with every parameter on a finite grid of levels.

    ``w_levels`` feeds the hidden matrix and ``b_levels`` the output vector.
    Outputs on all grid cells are tabulated once, so every objective is
    minimised by exhaustive enumeration.
    """

    inputs: np.ndarray
    width: int = 1
    w_levels: tuple = tuple(np.linspace(-2.0, 2.0, 5))
    b_levels: tuple = tuple(np.linspace(-1.0, 4.0, 6))
    activation: str = "tanh"
    name: str = "gridnet"
    table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.width not in (1, 2):
            raise ValueError("enumerated classes use width 1 or 2")
        table = np.array([forward(self.net, p, self.inputs) for p in self.combos()])
        object.__setattr__(self, "table", table)

    @property
    def net(self) -> NetConfig:
        return NetConfig(2, self.width, self.inputs.shape[1], self.activation, linear_output=True)

    @property
    def n_combos(self) -> int:
        d = self.inputs.shape[1]
        return len(self.w_levels) ** (d * self.width) * len(self.b_levels) ** self.width

    def combos(self):
        d, m = self.inputs.shape[1], self.width
        for w in itertools.product(self.w_levels, repeat=d * m):
            for b in itertools.product(self.b_levels, repeat=m):
                yield NetParams((np.array(w).reshape(d, m),), np.array(b))

    @property
    def resolution(self) -> float:
        return float(max(np.max(np.diff(self.w_levels)), np.max(np.diff(self.b_levels))))

    def lipschitz(self) -> float:
        """max over combos and cells of ||grad_theta f||_1 (first-order sensitivity)."""
        best = 0.0
        for p in self.combos():
            for x in self.inputs:
                g = value_and_grad(self.net, p, x)[1]
                best = max(best, float(sum(np.abs(a).sum() for a in g.arrays())))
        return best

    def objectives(self, cells, y, w, chunk: int = 4096) -> np.ndarray:
        cells = np.asarray(cells)
        y = np.asarray(y, dtype=float)
        w = np.asarray(w, dtype=float)
        out = np.zeros(self.table.shape[0])
        for i in range(0, len(cells), chunk):
            sl = slice(i, i + chunk)
            r = self.table[:, cells[sl]] - y[sl]
            out += (r * r) @ w[sl]
        return out

    def fit(self, cells, y, w, n_cells: int) -> Fit:
        if self.table.shape[1] != n_cells:
            raise GridMismatchError("class inputs do not match the grid")
        obj = self.objectives(cells, y, w)
        k = int(np.argmin(obj))
        return Fit(self.table[k].copy(), float(obj[k]), k)


# ---------------------------------------------------------------------------
# reference solutions


@dataclass(frozen=True, eq=False)
class Reference:
    values: np.ndarray  # (n_states, n_actions)
    objective: float
    index: int | None = None


def _as_table(f: Fit, mdp) -> Reference:
    return Reference(f.values.reshape(mdp.n_states, mdp.n_actions), f.objective, f.index)


def default_weights(pi, mdp: mdp_core.DiscretizedMdp) -> np.ndarray:
    return mdp_core.stationary_distribution(pi, mdp)


def _weights(pi, mdp, weights):
    w = default_weights(pi, mdp) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (mdp.n_states, mdp.n_actions):
        raise GridMismatchError("weights must be a state-action table")
    return w


def q1_reference(mdp: mdp_core.DiscretizedMdp, pi, q_prev, cls, weights=None) -> Reference:
    """argmin_f E_w (f - T^pi q_prev)^2; ``objective`` is the achieved MSE."""
    w = _weights(pi, mdp, weights).ravel()
    target = mdp_core.bellman_policy_op(q_prev, pi, mdp).ravel()
    cells = np.arange(target.size)
    return _as_table(cls.fit(cells, target, w, target.size), mdp)


def expanded_rows(mdp: mdp_core.DiscretizedMdp, pi, q_prev, weights=None):
    """One row per (s, a, s', a') with weight w(s,a) P(s'|s,a) pi(a'|s') and target r + gamma q_prev(s', a')."""
    w = _weights(pi, mdp, weights)
    pi = mdp_core.validate_policy(pi, mdp)
    S, A = mdp.n_states, mdp.n_actions
    W4 = w[:, :, None, None] * mdp.transitions[:, :, :, None] * pi[None, None, :, :]
    Y4 = mdp.rewards[:, :, None, None] + mdp.gamma * np.asarray(q_prev, dtype=float)[None, None, :, :]
    cells = np.broadcast_to(np.arange(S * A).reshape(S, A, 1, 1), W4.shape)
    keep = W4.ravel() > 0
    return cells.ravel()[keep], np.broadcast_to(Y4, W4.shape).ravel()[keep], W4.ravel()[keep]


def q2_reference(mdp: mdp_core.DiscretizedMdp, pi, q_prev, cls, weights=None) -> Reference:
    """argmin_f E (f(s,a) - r - gamma q_prev(s',a'))^2 with exact expectations over s', a'."""
    cells, y, w = expanded_rows(mdp, pi, q_prev, weights)
    return _as_table(cls.fit(cells, y, w, mdp.n_states * mdp.n_actions), mdp)


@dataclass(frozen=True, eq=False)
class BufferCells:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray


def buffer_cells(buf: ReplayBuffer, mdp: mdp_core.DiscretizedMdp) -> BufferCells:
    """Map stored continuous tuples onto grid indices."""
    if len(buf) == 0:
        raise ValueError("empty buffer")
    s = np.array([mdp.state_index(x) for x in buf.states])
    a = np.array([mdp.action_index(x) for x in buf.actions])
    s2 = np.array([mdp.state_index(x) for x in buf.next_states])
    return BufferCells(s, a, buf.rewards.copy(), s2)


def empirical_targets(bc: BufferCells, pi, q_prev, gamma: float, next_actions=None) -> np.ndarray:
    """r_i + gamma E_{a'~pi} q_prev(s'_i, a'); with ``next_actions`` the sampled a'_i is used instead."""
    q_prev = np.asarray(q_prev, dtype=float)
    if next_actions is None:
        cont = np.sum(np.asarray(pi)[bc.s_next] * q_prev[bc.s_next], axis=1)
    else:
        cont = q_prev[bc.s_next, np.asarray(next_actions)]
    return bc.r + gamma * cont


def q3_reference(mdp: mdp_core.DiscretizedMdp, bc: BufferCells, pi, q_prev, cls, next_actions=None) -> Reference:
    """argmin_f (1/n) sum_i (f(s_i, a_i) - y_i)^2 over the stored tuples."""
    if len(bc.r) == 0:
        raise ValueError("empty buffer")
    y = empirical_targets(bc, pi, q_prev, mdp.gamma, next_actions)
    cells = bc.s * mdp.n_actions + bc.a
    w = np.full(len(y), 1.0 / len(y))
    return _as_table(cls.fit(cells, y, w, mdp.n_states * mdp.n_actions), mdp)


def ball_minimizer(net: NetConfig, theta0: NetParams, X, y, radius: float, project_output_layer: bool = True,
                   max_iter: int = 20000, tol: float = 1e-13) -> NetParams:
    """Projected gradient descent with momentum on (1/2n) sum (f(x_i) - y_i)^2 over the ball around theta0.

    The step is 1 / mean ||grad f(x_i)||^2 at theta0, an upper bound on the
    Gauss-Newton curvature.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    ball = ParamBall(theta0, radius, project_output_layer)
    sq = np.mean([sum(np.sum(a * a) for a in value_and_grad(net, theta0, x)[1].arrays()) for x in X])
    eta = 1.0 / max(sq, 1e-300)
    theta, prev = theta0.copy(), theta0.copy()
    loss_prev = np.inf
    for it in range(1, max_iter + 1):
        look = theta + (theta - prev).scale((it - 1) / (it + 2))
        r = forward(net, look, X) - y
        g = vjp(net, look, X, r / n)
        prev, theta = theta, project(look - g.scale(eta), ball)
        if it % 50 == 0:
            loss = 0.5 * float(np.mean((forward(net, theta, X) - y) ** 2))
            if loss_prev - loss <= tol * max(loss, 1e-30):
                break
            loss_prev = loss
    return theta


# ---------------------------------------------------------------------------
# decomposition


@dataclass
class ErrorDecomposition:
    k: int
    j: int
    eps1: float
    eps2: float
    eps3: float
    eps4: float
    total: float
    residual: float  # eps1 + ... + eps4 - total, nonnegative up to rounding
    approx_mse: float  # achieved q1 objective

    def to_dict(self) -> dict:
        return asdict(self)


def _expect(w, f) -> float:
    return float(np.sum(w * np.abs(f)))


def decompose(mdp: mdp_core.DiscretizedMdp, pi, q_prev, q_stage, q1: Reference, q2: Reference,
              q3: Reference, weights=None, k: int = 0, j: int = 1) -> ErrorDecomposition:
    w = _weights(pi, mdp, weights)
    shape = (mdp.n_states, mdp.n_actions)
    for t in (q_prev, q_stage, q1.values, q2.values, q3.values):
        if np.shape(t) != shape:
            raise GridMismatchError(f"table shape {np.shape(t)} != {shape}")
    tq = mdp_core.bellman_policy_op(q_prev, pi, mdp)
    e1 = _expect(w, tq - q1.values)
    e2 = _expect(w, q1.values - q2.values)
    e3 = _expect(w, q3.values - q2.values)
    e4 = _expect(w, q3.values - q_stage)
    total = _expect(w, tq - q_stage)
    return ErrorDecomposition(k, j, e1, e2, e3, e4, total, e1 + e2 + e3 + e4 - total, q1.objective)


@dataclass
class RecursionReport:
    lhs: float
    rhs: float
    rhs_printed: float
    rhs_qmax: float
    terms: list[float]
    tail: float
    holds: bool
    holds_printed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def recursion_check(mdp: mdp_core.DiscretizedMdp, pi, stages, q0=None, weights=None,
                    q_pi=None, rel_tol: float = 1e-12) -> RecursionReport:
    """E_w|Q^pi - Q_J| against the unrolled stage errors.

    rhs     = sum_{j=1}^{J} gamma^{J-j} E_w[(P^pi)^{J-j} |eps_j|] + gamma^J E_w[(P^pi)^J |Q^pi - Q_0|]
    printed = the same sum over j = 1..J-1 plus gamma^J Q_max
    qmax    = the full sum plus gamma^J Q_max

    Only ``rhs`` is guaranteed; the other two are reported for comparison.
    ``weights`` defaults to the discounted visitation from a uniform start.
    """
    pi = mdp_core.validate_policy(pi, mdp)
    stages = [np.asarray(s, dtype=float) for s in stages]
    if not stages:
        raise ValueError("need at least one stage")
    J, g = len(stages), mdp.gamma
    q0 = np.zeros_like(stages[0]) if q0 is None else np.asarray(q0, dtype=float)
    if weights is None:
        weights = mdp_core.visitation_distribution(pi, mdp, np.full(mdp.n_states, 1.0 / mdp.n_states))
    w = np.asarray(weights, dtype=float).ravel()
    q_pi = mdp_core.exact_q_policy(pi, mdp) if q_pi is None else np.asarray(q_pi)
    M = mdp_core.sa_transition_matrix(pi, mdp)
    prev = [q0] + stages[:-1]
    terms = []
    for j in range(1, J + 1):
        eps = np.abs(mdp_core.bellman_policy_op(prev[j - 1], pi, mdp) - stages[j - 1]).ravel()
        terms.append(g ** (J - j) * float(w @ (np.linalg.matrix_power(M, J - j) @ eps)))
    tail = g**J * float(w @ (np.linalg.matrix_power(M, J) @ np.abs(q_pi - q0).ravel()))
    q_max = 1.0 / (1.0 - g) + float(np.max(np.abs(q0)))
    lhs = float(w @ np.abs(q_pi - stages[-1]).ravel())
    rhs = sum(terms) + tail
    printed = sum(terms[:-1]) + g**J * q_max
    slack = rel_tol * (1.0 + abs(rhs))
    return RecursionReport(lhs, rhs, printed, sum(terms) + g**J * q_max, terms, tail,
                           lhs <= rhs + slack, lhs <= printed + slack)


# ---------------------------------------------------------------------------
# Rademacher complexity and the conditional-mean identity


def _check_set(Z) -> np.ndarray:
    try:
        Z = np.array(Z, dtype=float)
    except ValueError as exc:
        raise ValueError("vectors in Z must share one length") from exc
    if Z.ndim == 1:
        Z = Z[None, :]
    if Z.ndim != 2 or Z.shape[1] == 0:
        raise ValueError("vectors in Z must share one nonzero length")
    return Z


def rademacher_estimate(Z, n_mc: int = 1000, rng: np.random.Generator | None = None,
                        mode: str = "mc") -> float:
    """E_Omega sup_{z in Z} (1/n) sum_i Omega_i z_i for a finite set Z of length-n vectors.

    ``mode="exact"`` enumerates all 2^n sign vectors (n <= 20).
    """
    Z = _check_set(Z)
    n = Z.shape[1]
    if mode == "exact":
        if n > 20:
            raise ValueError("exact mode supports n <= 20")
        total, count = 0.0, 0
        codes = np.arange(2**n)
        bits = np.arange(n)
        for i in range(0, len(codes), 1 << 16):
            signs = 1.0 - 2.0 * ((codes[i:i + (1 << 16), None] >> bits) & 1)
            total += float(np.sum(np.max(signs @ Z.T, axis=1)))
            count += len(signs)
        return total / (count * n)
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    signs = rng.choice([-1.0, 1.0], size=(n_mc, n))
    return float(np.mean(np.max(signs @ Z.T, axis=1)) / n)


def conditional_minimizer_check(joint, g, F, rel_tol: float = 1e-10) -> dict:
    """Compare argmin_f E_{x,y}(f(x) - g(x,y))^2 with argmin_f E_x(f(x) - E[g|x])^2 by enumeration.

    ``joint`` is p(x, y) of shape (nx, ny), ``g`` matches it, ``F`` is (n_f, nx).
    """
    p = np.asarray(joint, dtype=float)
    g = np.asarray(g, dtype=float)
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if p.ndim != 2 or g.shape != p.shape or F.shape[1] != p.shape[0]:
        raise mdp_core.DimensionError("joint, g and F disagree in shape")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
        raise mdp_core.ValidationError("joint table must be a probability distribution")
    px = p.sum(axis=1)
    cond = np.divide((p * g).sum(axis=1), px, out=np.zeros_like(px), where=px > 0)
    full = np.array([np.sum(p * (f[:, None] - g) ** 2) for f in F])
    reduced = np.array([np.sum(px * (f - cond) ** 2) for f in F])
    scale = 1.0 + np.max(np.abs(full))
    am_full = set(np.flatnonzero(full <= full.min() + rel_tol * scale).tolist())
    am_red = set(np.flatnonzero(reduced <= reduced.min() + rel_tol * scale).tolist())
    offset = full - reduced
    return {
        "argmin_joint": sorted(am_full),
        "argmin_conditional": sorted(am_red),
        "coincide": am_full == am_red,
        "offset_spread": float(offset.max() - offset.min()),
    }


# ---------------------------------------------------------------------------
# scaling fits


@dataclass
class ScalingFit:
    x: list[float]
    y: list[float]
    slope: float
    intercept: float
    r_squared: float

    def to_dict(self) -> dict:
        return asdict(self)


def scaling_fit(x, y, min_points: int = 4, min_span: float = 16.0) -> ScalingFit:
    """Least-squares fit of log y = intercept + slope * log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D and equally long")
    if len(x) < min_points:
        raise InsufficientPointsError(f"need at least {min_points} points, got {len(x)}")
    if np.any(np.diff(x) <= 0):
        raise ValueError("x must be strictly increasing")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive values")
    if x[-1] / x[0] < min_span:
        raise InsufficientPointsError(f"sweep spans {x[-1] / x[0]:.3g}x, need {min_span}x")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (intercept + slope * lx)
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid**2) / ss) if ss > 0 else 1.0
    return ScalingFit(x.tolist(), y.tolist(), float(slope), float(intercept), r2)


# ---------------------------------------------------------------------------
# sweeps


def _table_fn(mdp: mdp_core.DiscretizedMdp, table):
    """Critic-input function that looks up a grid table (inputs must sit on the grid)."""
    table = np.asarray(table, dtype=float)
    ds = mdp.state_dim

    def fn(X):
        X = np.atleast_2d(X)
        return np.array([table[mdp.state_index(x[:ds]), mdp.action_index(x[ds:])] for x in X])

    return fn


@dataclass(eq=False)
class GridSetup:
    """Grid MDP plus a tabular behaviour policy, start distribution and target network table."""

    mdp: mdp_core.DiscretizedMdp
    pi: np.ndarray
    q_prev: np.ndarray
    nu: np.ndarray

    def policy(self) -> GridPolicy:
        return GridPolicy(self.pi, self.mdp)

    def env(self) -> mdp_core.Mdp:
        return mdp_core.tabular_env(self.mdp, self.nu)

    def rollout(self, n: int, rng) -> ReplayBuffer:
        return collect_rollout(self.policy(), self.env(), n, rng)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def eps3_sweep(setup: GridSetup, cls, ns, seeds) -> list[dict]:
    """E_zeta|Q3 - Q2| for Markovian buffers of each length n; one row per (n, seed)."""
    q2 = q2_reference(setup.mdp, setup.pi, setup.q_prev, cls)
    w = default_weights(setup.pi, setup.mdp)
    rows = []
    for n in ns:
        for seed in seeds:
            bc = buffer_cells(setup.rollout(n, _rng(seed, n)), setup.mdp)
            q3 = q3_reference(setup.mdp, bc, setup.pi, setup.q_prev, cls)
            rows.append({"n": int(n), "seed": int(seed), "eps3": _expect(w, q3.values - q2.values)})
    return rows


def eps4_sweep(setup: GridSetup, net: NetConfig, n: int, Ls, seeds, beta_scale: float = 1.0,
               radius: float | None = None) -> list[dict]:
    """E_zeta|Q3 - Q_stage| for one critic stage of L projected SGD steps.

    Q3 is the ball-constrained minimiser of the empirical objective (targets
    averaged over a'), found by projected full-batch descent from the same
    theta0 the stage starts from.
    """
    mdp = setup.mdp
    radius = 1.0 / (1.0 - mdp.gamma) if radius is None else radius
    w = default_weights(setup.pi, mdp)
    grid = mdp.grid_inputs()
    prev_fn = _table_fn(mdp, setup.q_prev)
    rows = []
    for seed in seeds:
        rng = _rng(seed, n)
        buf = setup.rollout(n, rng)
        theta0 = init_params(net, rng)
        X = np.hstack([buf.states, buf.actions])
        ybar = empirical_targets(buffer_cells(buf, mdp), setup.pi, setup.q_prev, mdp.gamma)
        q3 = forward(net, ball_minimizer(net, theta0, X, ybar, radius), grid)
        for L in Ls:
            Xs, ys = stage_data(setup.policy(), buf, prev_fn, mdp.gamma, int(L), _rng(seed, n, int(L)))
            stage = run_stage(net, theta0, Xs, ys, beta_scale / np.sqrt(L), radius)
            qs = forward(net, stage.params, grid)
            rows.append({"L": int(L), "seed": int(seed),
                         "eps4": _expect(w.ravel(), q3 - qs)})
    return rows


@dataclass
class DecompositionRun:
    decompositions: list[ErrorDecomposition]
    recursion: RecursionReport
    stage_tables: list[np.ndarray]


def decomposition_run(setup: GridSetup, critic: CriticConfig, n: int, cls, seed: int = 0,
                      k: int = 0) -> DecompositionRun:
    """Fit a J-stage critic on a Markovian buffer and decompose every stage error.

    ``setup.q_prev`` is ignored; stage j uses Q_{j-1} (Q_0 = 0) as its target network.
    """
    mdp = setup.mdp
    rng = _rng(seed, n)
    buf = setup.rollout(n, rng)
    est = fit_critic(setup.policy(), buf, critic, mdp.gamma, rng)
    grid = mdp.grid_inputs()
    tables = [est.q(grid, stage=j).reshape(mdp.n_states, mdp.n_actions) for j in range(1, critic.J + 1)]
    bc = buffer_cells(buf, mdp)
    out = []
    prev = np.zeros((mdp.n_states, mdp.n_actions))
    for j, table in enumerate(tables, start=1):
        r1 = q1_reference(mdp, setup.pi, prev, cls)
        r2 = q2_reference(mdp, setup.pi, prev, cls)
        r3 = q3_reference(mdp, bc, setup.pi, prev, cls)
        out.append(decompose(mdp, setup.pi, prev, table, r1, r2, r3, k=k, j=j))
        prev = table
    return DecompositionRun(out, recursion_check(mdp, setup.pi, tables), tables)


def median_by(rows: list[dict], key: str, value: str) -> tuple[np.ndarray, np.ndarray]:
    xs = sorted({r[key] for r in rows})
    return np.array(xs, dtype=float), np.array([np.median([r[value] for r in rows if r[key] == x]) for x in xs])
