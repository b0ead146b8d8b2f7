"""MDP substrate: finite grid MDPs with exact dynamic-programming oracles.

Q tables are ``(n_states, n_actions)`` arrays and tabular policies are
row-stochastic ``(n_states, n_actions)`` arrays. State-action distributions
are returned in the same ``(n_states, n_actions)`` layout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import norm


class DimensionError(ValueError):
    pass


class ValidationError(ValueError):
    pass


class ErgodicityError(RuntimeError):
    pass


PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscretizedMdp:
    """Finite MDP with explicit ``P[s, a, s']`` and ``R[s, a]``.

    ``state_coords`` and ``action_coords`` are the points fed to neural
    networks; ``action_edges`` are the interior bin boundaries used to map a
    continuous action onto an action index (``len(action_edges) ==
    n_actions - 1``).
    """

    transitions: np.ndarray
    rewards: np.ndarray
    gamma: float
    state_coords: np.ndarray | None = None
    action_coords: np.ndarray | None = None
    action_edges: np.ndarray | None = None
    action_bounds: tuple[float, float] = (-1.0, 1.0)
    name: str = "mdp"

    def __post_init__(self):
        P = np.asarray(self.transitions, dtype=float)
        R = np.asarray(self.rewards, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2] or P.shape[:2] != R.shape:
            raise DimensionError(f"transitions {P.shape} and rewards {R.shape} disagree")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=2) - 1.0)) > PROB_TOL:
            raise ValidationError("each transition row must be a probability vector")
        if np.any(R < 0) or np.any(R > 1) or not np.all(np.isfinite(R)):
            raise ValidationError("rewards must lie in [0, 1]")
        # gamma == 0 is accepted as a degenerate configuration for tests
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError(f"gamma must lie in [0, 1), got {self.gamma}")
        n_s, n_a = R.shape
        sc = np.arange(n_s, dtype=float)[:, None] if self.state_coords is None else self.state_coords
        if self.action_coords is None:
            ac = np.linspace(-1.0, 1.0, 2 * n_a + 1)[1::2] if n_a > 1 else np.zeros(1)
            ac = ac[:, None]
        else:
            ac = self.action_coords
        sc = np.atleast_2d(np.asarray(sc, dtype=float))
        ac = np.asarray(ac, dtype=float).reshape(n_a, -1)
        if sc.shape[0] != n_s:
            raise DimensionError("state_coords must have one row per state")
        edges = self.action_edges
        if edges is None:
            edges = 0.5 * (ac[1:, 0] + ac[:-1, 0]) if n_a > 1 else np.zeros(0)
        edges = np.asarray(edges, dtype=float)
        if edges.shape != (n_a - 1,):
            raise DimensionError("action_edges must have n_actions - 1 entries")
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "rewards", R)
        object.__setattr__(self, "state_coords", sc)
        object.__setattr__(self, "action_coords", ac)
        object.__setattr__(self, "action_edges", edges)

    @property
    def n_states(self) -> int:
        return self.rewards.shape[0]

    @property
    def n_actions(self) -> int:
        return self.rewards.shape[1]

    @property
    def state_dim(self) -> int:
        return self.state_coords.shape[1]

    @property
    def action_dim(self) -> int:
        return self.action_coords.shape[1]

    def grid_inputs(self) -> np.ndarray:
        """Critic inputs ``concat(s, a)`` for every grid point, shape ``(S*A, ds+da)``."""
        s = np.repeat(self.state_coords, self.n_actions, axis=0)
        a = np.tile(self.action_coords, (self.n_states, 1))
        return np.hstack([s, a])

    def action_index(self, action) -> int:
        return int(np.searchsorted(self.action_edges, np.ravel(action)[0], side="right"))

    def state_index(self, state) -> int:
        d = np.sum((self.state_coords - np.ravel(state)) ** 2, axis=1)
        return int(np.argmin(d))


# ---------------------------------------------------------------------------
# validation helpers


def validate_policy(pi: np.ndarray, mdp: DiscretizedMdp) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (mdp.n_states, mdp.n_actions):
        raise DimensionError(f"policy shape {pi.shape} != {(mdp.n_states, mdp.n_actions)}")
    if np.any(pi < 0) or np.max(np.abs(pi.sum(axis=1) - 1.0)) > PROB_TOL:
        raise ValidationError("policy rows must be probability vectors")
    return pi


def _check_q(q: np.ndarray, mdp: DiscretizedMdp) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (mdp.n_states, mdp.n_actions):
        raise DimensionError(f"Q shape {q.shape} != {(mdp.n_states, mdp.n_actions)}")
    return q


def _check_state_dist(nu, mdp: DiscretizedMdp) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    if nu.shape not in ((mdp.n_states,), (mdp.n_states, mdp.n_actions)):
        raise DimensionError(f"initial distribution has shape {nu.shape}")
    if np.any(nu < 0) or abs(nu.sum() - 1.0) > 1e-10:
        raise ValidationError("initial distribution must be nonnegative and sum to 1")
    return nu


def uniform_policy(mdp: DiscretizedMdp) -> np.ndarray:
    return np.full((mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions)


def state_action_dist(nu, pi: np.ndarray, mdp: DiscretizedMdp) -> np.ndarray:
    """Lift a state distribution to ``(s0, a0)`` with ``a0 ~ pi``; pass through if already joint."""
    nu = _check_state_dist(nu, mdp)
    if nu.ndim == 2:
        return nu
    return nu[:, None] * pi


# ---------------------------------------------------------------------------
# operators


def next_value(q: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """V(s') = sum_a' pi(a'|s') Q(s', a')."""
    return np.sum(pi * q, axis=1)


def transition_op(q, pi, mdp: DiscretizedMdp) -> np.ndarray:
    """(P^pi Q)(s, a) = sum_s' P(s'|s,a) sum_a' pi(a'|s') Q(s', a')."""
    q = _check_q(q, mdp)
    pi = validate_policy(pi, mdp)
    return mdp.transitions @ next_value(q, pi)


def bellman_policy_op(q, pi, mdp: DiscretizedMdp) -> np.ndarray:
    return mdp.rewards + mdp.gamma * transition_op(q, pi, mdp)


def greedy_transition_op(q, mdp: DiscretizedMdp) -> np.ndarray:
    """(P* Q)(s, a) = sum_s' P(s'|s,a) max_a' Q(s', a')."""
    q = _check_q(q, mdp)
    return mdp.transitions @ q.max(axis=1)


def bellman_optimality_op(q, mdp: DiscretizedMdp) -> np.ndarray:
    return mdp.rewards + mdp.gamma * greedy_transition_op(q, mdp)


def sa_transition_matrix(pi, mdp: DiscretizedMdp) -> np.ndarray:
    """Kernel of the state-action chain, ``M[(s,a), (s',a')] = P(s'|s,a) pi(a'|s')``."""
    pi = validate_policy(pi, mdp)
    S, A = mdp.n_states, mdp.n_actions
    M = mdp.transitions[:, :, :, None] * pi[None, None, :, :]
    return M.reshape(S * A, S * A)


# ---------------------------------------------------------------------------
# exact solvers


def exact_q_policy(pi, mdp: DiscretizedMdp) -> np.ndarray:
    """Q^pi by direct linear solve of (I - gamma M^pi) q = r."""
    M = sa_transition_matrix(pi, mdp)
    n = M.shape[0]
    q = np.linalg.solve(np.eye(n) - mdp.gamma * M, mdp.rewards.ravel())
    return q.reshape(mdp.n_states, mdp.n_actions)


def optimal_q(mdp: DiscretizedMdp, tol: float = 1e-13, max_iter: int = 100_000) -> np.ndarray:
    """Q* via value iteration followed by exact evaluation of the greedy policy."""
    q = np.zeros_like(mdp.rewards)
    for _ in range(max_iter):
        q_new = bellman_optimality_op(q, mdp)
        if np.max(np.abs(q_new - q)) < tol:
            q = q_new
            break
        q = q_new
    greedy = np.zeros_like(q)
    greedy[np.arange(mdp.n_states), q.argmax(axis=1)] = 1.0
    return exact_q_policy(greedy, mdp)


def expected_return(pi, mdp: DiscretizedMdp, nu) -> float:
    """J = sum_s nu(s) sum_a pi(a|s) Q^pi(s, a) (or sum over a joint nu(s, a))."""
    pi = validate_policy(pi, mdp)
    rho = state_action_dist(nu, pi, mdp)
    return float(np.sum(rho * exact_q_policy(pi, mdp)))


def optimal_return(mdp: DiscretizedMdp, nu) -> float:
    q = optimal_q(mdp)
    nu = _check_state_dist(nu, mdp)
    if nu.ndim == 2:
        return float(np.sum(nu * q))
    return float(nu @ q.max(axis=1))


def visitation_distribution(pi, mdp: DiscretizedMdp, nu) -> np.ndarray:
    """d(s,a) = (1 - gamma) sum_t gamma^t Pr(s_t = s, a_t = a), rows (s0, a0) ~ nu."""
    M = sa_transition_matrix(pi, mdp)
    rho0 = state_action_dist(nu, pi, mdp).ravel()
    n = M.shape[0]
    d = (1.0 - mdp.gamma) * np.linalg.solve((np.eye(n) - mdp.gamma * M).T, rho0)
    d = np.clip(d, 0.0, None)
    return (d / d.sum()).reshape(mdp.n_states, mdp.n_actions)


def discounted_state_occupancy(pi, mdp: DiscretizedMdp, nu) -> np.ndarray:
    """Unnormalised sum_t gamma^t Pr(s_t = s); equals d_state / (1 - gamma)."""
    d = visitation_distribution(pi, mdp, nu)
    return d.sum(axis=1) / (1.0 - mdp.gamma)


def stationary_distribution(pi, mdp: DiscretizedMdp, tol: float = 1e-12, max_squarings: int = 64) -> np.ndarray:
    """Stationary law of the state-action chain by repeated squaring of M^pi.

    Raises ErgodicityError if the rows of M^(2^k) fail to coalesce, which is
    what happens for periodic or reducible chains.
    """
    M = sa_transition_matrix(pi, mdp)
    Mk = M.copy()
    for _ in range(max_squarings):
        nxt = Mk @ Mk
        spread = np.max(np.abs(nxt - nxt[0]))
        Mk = nxt
        if spread < tol:
            break
    else:
        raise ErgodicityError("state-action chain did not converge; not irreducible and aperiodic")
    z = Mk.mean(axis=0)
    for _ in range(5):
        z = z @ M
    z = np.clip(z, 0.0, None)
    z /= z.sum()
    if np.max(np.abs(z @ M - z)) > 1e-10:
        raise ErgodicityError("stationary distribution failed the invariance check")
    return z.reshape(mdp.n_states, mdp.n_actions)


# ---------------------------------------------------------------------------
# continuous MDPs and their discretisation


@dataclass
class Mdp:
    """A continuing MDP given by samplers; rewards in [0, 1]."""

    state_dim: int
    action_dim: int
    gamma: float
    reward: Callable[[np.ndarray, np.ndarray], float]
    step: Callable[[np.ndarray, np.ndarray, np.random.Generator], np.ndarray]
    initial: Callable[[np.random.Generator], np.ndarray]
    action_bounds: tuple[float, float] = (-1.0, 1.0)
    name: str = "mdp"


def tabular_env(mdp: DiscretizedMdp, nu=None) -> Mdp:
    """Sampling view of a grid MDP: states are coordinates, actions are binned."""
    nu = np.full(mdp.n_states, 1.0 / mdp.n_states) if nu is None else np.asarray(nu, dtype=float)
    _check_state_dist(nu, mdp)
    if nu.ndim != 1:
        raise ValidationError("tabular_env samples s0 from a state distribution")
    coords = mdp.state_coords
    cdf = np.cumsum(mdp.transitions, axis=2)

    def reward(s, a):
        return float(mdp.rewards[mdp.state_index(s), mdp.action_index(a)])

    def step(s, a, rng):
        row = cdf[mdp.state_index(s), mdp.action_index(a)]
        nxt = min(int(np.searchsorted(row, rng.random(), side="right")), mdp.n_states - 1)
        return coords[nxt].copy()

    def initial(rng):
        return coords[rng.choice(mdp.n_states, p=nu)].copy()

    return Mdp(mdp.state_dim, mdp.action_dim, mdp.gamma, reward, step, initial, mdp.action_bounds, mdp.name)


@dataclass
class LinearGaussianMdp:
    """1-D continuous control: s' = clip(a_s * s + a_u * u + noise * xi, lo, hi).

    r(s, u) = scale * exp(-(s - target)^2 / (2 width^2)) * (1 - effort * u^2),
    which lies in [0, 1] for |u| <= 1, effort <= 1 and scale <= 1.

    With ``bias_coordinate`` the observed state is ``(s, 1)``. Networks here
    have no bias terms, so without the constant an odd activation forces
    mu(0) = 0.
    """

    a_s: float = 0.6
    a_u: float = 0.5
    noise: float = 0.15
    target: float = 0.6
    width: float = 0.35
    effort: float = 0.1
    gamma: float = 0.8
    reward_scale: float = 1.0
    bias_coordinate: bool = False
    bounds: tuple[float, float] = (-1.0, 1.0)
    name: str = "linear_gaussian_1d"

    def __post_init__(self):
        if not 0.0 < self.reward_scale <= 1.0 or not 0.0 <= self.effort <= 1.0:
            raise ValidationError("reward_scale must lie in (0, 1] and effort in [0, 1]")

    @property
    def state_dim(self) -> int:
        return 2 if self.bias_coordinate else 1

    def _observe(self, s: float) -> np.ndarray:
        return np.array([s, 1.0]) if self.bias_coordinate else np.array([s])

    def reward(self, s, u) -> float:
        s = float(np.ravel(s)[0])
        u = float(np.clip(np.ravel(u)[0], *self.bounds))
        shape = np.exp(-((s - self.target) ** 2) / (2 * self.width**2))
        return float(self.reward_scale * shape * (1 - self.effort * u * u))

    def mean_next(self, s, u):
        return self.a_s * s + self.a_u * np.clip(u, *self.bounds)

    def step(self, s, u, rng) -> np.ndarray:
        lo, hi = self.bounds
        nxt = self.mean_next(float(np.ravel(s)[0]), float(np.ravel(u)[0])) + self.noise * rng.standard_normal()
        return self._observe(min(max(nxt, lo), hi))

    def initial(self, rng) -> np.ndarray:
        return self._observe(rng.uniform(*self.bounds))

    def as_mdp(self) -> Mdp:
        return Mdp(self.state_dim, 1, self.gamma, self.reward, self.step, self.initial, self.bounds, self.name)

    def discretize(self, n_states: int, n_actions: int) -> DiscretizedMdp:
        """Cell-centre discretisation with exact Gaussian cell probabilities.

        Clipping at the bounds puts the tails into the outermost cells.
        """
        lo, hi = self.bounds
        s_edges = np.linspace(lo, hi, n_states + 1)
        s_centres = 0.5 * (s_edges[1:] + s_edges[:-1])
        a_edges = np.linspace(lo, hi, n_actions + 1)
        a_centres = 0.5 * (a_edges[1:] + a_edges[:-1])
        mean = self.mean_next(s_centres[:, None], a_centres[None, :])
        cdf = norm.cdf((s_edges[None, None, 1:-1] - mean[:, :, None]) / self.noise)
        cdf = np.concatenate([np.zeros(mean.shape + (1,)), cdf, np.ones(mean.shape + (1,))], axis=2)
        P = np.diff(cdf, axis=2)
        P /= P.sum(axis=2, keepdims=True)
        R = np.array([[self.reward(s, u) for u in a_centres] for s in s_centres])
        return DiscretizedMdp(
            P, R, self.gamma,
            state_coords=np.array([self._observe(c) for c in s_centres]),
            action_coords=a_centres[:, None],
            action_edges=a_edges[1:-1], action_bounds=self.bounds,
            name=f"{self.name}_{n_states}x{n_actions}",
        )


# ---------------------------------------------------------------------------
# fixtures


def two_state_fixture(gamma: float = 0.8, reward_scale: float = 1.0) -> DiscretizedMdp:
    """Two one-hot coded states and two action bins (a < 0, a >= 0).

    One-hot coordinates matter: the networks carry no bias terms, so with
    symmetric scalar codes such as +-1 every odd activation ties the two
    states' outputs together.

    Action 1 pays more in state 0 but tends to move the chain to state 1 where
    action 0 is preferred, so the optimal policy is state dependent.
    ``reward_scale`` shrinks Q^pi into the range a ball-constrained critic can
    represent.
    """
    P = np.array([
        [[0.7, 0.3], [0.2, 0.8]],
        [[0.6, 0.4], [0.3, 0.7]],
    ])
    R = reward_scale * np.array([
        [0.1, 0.6],
        [0.9, 0.2],
    ])
    return DiscretizedMdp(
        P, R, gamma,
        state_coords=np.eye(2),
        action_coords=np.array([[-0.5], [0.5]]),
        action_edges=np.array([0.0]),
        name="two_state",
    )


def markov_chain_mdp(kernel, gamma: float = 0.9) -> DiscretizedMdp:
    """Single-action MDP whose state chain is ``kernel``; rewards zero."""
    kernel = np.asarray(kernel, dtype=float)
    n = kernel.shape[0]
    return DiscretizedMdp(kernel[:, None, :], np.zeros((n, 1)), gamma, name="chain")


def random_mdp(rng: np.random.Generator, n_states: int, n_actions: int, gamma: float = 0.9,
               concentration: float = 1.0) -> DiscretizedMdp:
    P = rng.dirichlet(np.full(n_states, concentration), size=(n_states, n_actions))
    R = rng.random((n_states, n_actions))
    return DiscretizedMdp(P, R, gamma, state_coords=np.linspace(-1, 1, n_states)[:, None], name="random")


def random_policy(rng: np.random.Generator, mdp: DiscretizedMdp) -> np.ndarray:
    return rng.dirichlet(np.ones(mdp.n_actions), size=mdp.n_states)


# ---------------------------------------------------------------------------
# JSON fixture format: {gamma, rewards, transitions} (+ optional coordinates)


def mdp_to_dict(mdp: DiscretizedMdp) -> dict:
    return {
        "gamma": mdp.gamma,
        "rewards": mdp.rewards.tolist(),
        "transitions": mdp.transitions.tolist(),
        "state_coords": mdp.state_coords.tolist(),
        "action_coords": mdp.action_coords.tolist(),
        "action_edges": mdp.action_edges.tolist(),
        "action_bounds": list(mdp.action_bounds),
        "name": mdp.name,
    }


def mdp_from_dict(d: dict) -> DiscretizedMdp:
    missing = {"gamma", "rewards", "transitions"} - set(d)
    if missing:
        raise ValidationError(f"MDP JSON missing keys: {sorted(missing)}")
    opt = lambda k: None if d.get(k) is None else np.asarray(d[k], dtype=float)  # noqa: E731
    return DiscretizedMdp(
        np.asarray(d["transitions"], dtype=float),
        np.asarray(d["rewards"], dtype=float),
        float(d["gamma"]),
        state_coords=opt("state_coords"),
        action_coords=opt("action_coords"),
        action_edges=opt("action_edges"),
        action_bounds=tuple(d.get("action_bounds", (-1.0, 1.0))),
        name=d.get("name", "mdp"),
    )


def save_mdp(mdp: DiscretizedMdp, path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(mdp_to_dict(mdp)))


def load_mdp(path) -> DiscretizedMdp:
    return mdp_from_dict(json.loads(Path(path).read_text()))
