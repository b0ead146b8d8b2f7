"""Critic fit: J target-network stages of L projected semi-gradient TD steps.

Within stage j the target network Q_{k,j-1} is frozen (Q_{k,0} is the zero
function), tuples are replayed uniformly, a' is redrawn from the policy at
every replay, and the stage output is the network at the mean of the L
post-projection iterates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .net import (NetConfig, NetParams, ParamBall, average_params, forward, init_params,
                  project, radial_shrink, value_and_grad)
from .sampling import ReplayBuffer, Transition


@dataclass(frozen=True)
class CriticConfig:
    J: int
    L: int
    net: NetConfig
    # step size beta' = beta_scale / sqrt(L) unless beta_prime is given
    beta_prime: float | None = None
    beta_scale: float = 1.0
    radius: float | None = None
    project_output_layer: bool = True
    warm_start_stages: bool = False
    trace: bool = False

    def __post_init__(self):
        if self.J < 1 or self.L < 1:
            raise ValueError("J and L must be >= 1")
        if self.step_size <= 0:
            raise ValueError("beta_prime must be positive")

    @property
    def step_size(self) -> float:
        return self.beta_prime if self.beta_prime is not None else self.beta_scale / np.sqrt(self.L)

    def ball_radius(self, gamma: float) -> float:
        return self.radius if self.radius is not None else 1.0 / (1.0 - gamma)


@dataclass(eq=False)
class CriticStage:
    params: NetParams
    ball: ParamBall
    loss_start: float
    loss_end: float


@dataclass(eq=False)
class CriticEstimate:
    net: NetConfig
    stages: list[CriticStage]
    trace: list[tuple[int, int, float, float]] = field(default_factory=list)

    @property
    def params(self) -> NetParams:
        return self.stages[-1].params

    def q(self, X, stage: int | None = None) -> np.ndarray:
        """Q_{k,j}(X) for stage j (1-based; default J). Stage 0 is the zero function."""
        j = len(self.stages) if stage is None else stage
        X = np.asarray(X, dtype=float)
        if j == 0:
            return np.zeros(X.shape[:-1]) if X.ndim > 1 else 0.0
        return forward(self.net, self.stages[j - 1].params, X)


def critic_input(s, a) -> np.ndarray:
    return np.concatenate([np.ravel(s), np.ravel(a)])


def td_target(net: NetConfig, q_prev: NetParams | None, t: Transition, a_next, gamma: float) -> float:
    """y = r + gamma * Q_prev(s', a'); ``q_prev=None`` is the zero function."""
    if q_prev is None:
        return float(t.r)
    return float(t.r + gamma * forward(net, q_prev, critic_input(t.s_next, a_next)))


def sgd_step(net: NetConfig, theta: NetParams, t: Transition, y: float, beta_prime: float,
             ball: ParamBall) -> NetParams:
    """theta + beta' (y - Q_theta(s,a)) grad Q_theta(s,a), projected onto the ball.

    The target y is a constant; no gradient flows through it.
    """
    q, g = value_and_grad(net, theta, critic_input(t.s, t.a))
    coef = beta_prime * (y - q)
    stepped = NetParams(tuple(w + coef * gw for w, gw in zip(theta.W, g.W)), theta.b + coef * g.b)
    return project(stepped, ball)


def _project_inplace(x: np.ndarray, x0: np.ndarray, radius: float) -> None:
    diff = x - x0
    n = np.linalg.norm(diff)
    if n > radius:
        x[...] = radial_shrink(x0, diff, radius, n)


def stage_data(policy, buf: ReplayBuffer, q_prev_fn, gamma: float, L: int,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Replay order, fresh a' draws and TD targets for one stage.

    ``q_prev_fn`` maps a batch of critic inputs to target-network values; None
    is the zero function. Draws replay indices first, then one a' per replay.
    """
    idx = rng.integers(0, len(buf), size=L)
    a_next = np.array([policy.sample(buf.next_states[i], rng) for i in idx], dtype=float)
    y = buf.rewards[idx].copy()
    if q_prev_fn is not None:
        y = y + gamma * np.asarray(q_prev_fn(np.hstack([buf.next_states[idx], a_next])), dtype=float)
    X = np.hstack([buf.states[idx], buf.actions[idx]])
    return X, y


def run_stage(net: NetConfig, theta0: NetParams, X: np.ndarray, y: np.ndarray, beta: float,
              radius: float, project_output_layer: bool = True, stage: int = 1,
              trace: list | None = None) -> CriticStage:
    """Projected semi-gradient steps over the rows of (X, y); returns the averaged iterate."""
    ball = ParamBall(theta0, radius, project_output_layer)
    L = len(y)
    W = [w.copy() for w in theta0.W]
    b = theta0.b.copy()
    sW = [np.zeros_like(w) for w in W]
    sb = np.zeros_like(b)
    for i in range(L):
        q, g = value_and_grad(net, NetParams(tuple(W), b), X[i])
        coef = beta * (y[i] - q)
        for h in range(len(W)):
            W[h] = W[h] + coef * g.W[h]
            _project_inplace(W[h], theta0.W[h], radius)
            sW[h] += W[h]
        b = b + coef * g.b
        if project_output_layer:
            _project_inplace(b, theta0.b, radius)
        sb += b
        if trace is not None:
            dist = max(ball.distances(NetParams(tuple(W), b)))
            trace.append((stage, i + 1, float(y[i] - q), dist))
    avg = NetParams(tuple(w / L for w in sW), sb / L)
    loss_start = float(np.median((y - forward(net, theta0, X)) ** 2))
    loss_end = float(np.median((y - forward(net, avg, X)) ** 2))
    return CriticStage(avg, ball, loss_start, loss_end)


def fit_critic(policy, buf: ReplayBuffer, cfg: CriticConfig, gamma: float,
               rng: np.random.Generator) -> CriticEstimate:
    if len(buf) == 0:
        raise ValueError("cannot fit a critic on an empty buffer")
    net = cfg.net
    radius = cfg.ball_radius(gamma)
    stages: list[CriticStage] = []
    trace = [] if cfg.trace else None
    q_prev = None
    for j in range(1, cfg.J + 1):
        if cfg.warm_start_stages and q_prev is not None:
            theta0 = q_prev.copy()
        else:
            theta0 = init_params(net, rng)
        prev_fn = None if q_prev is None else (lambda X, p=q_prev: forward(net, p, X))
        X, y = stage_data(policy, buf, prev_fn, gamma, cfg.L, rng)
        stage = run_stage(net, theta0, X, y, cfg.step_size, radius, cfg.project_output_layer, j, trace)
        stages.append(stage)
        q_prev = stage.params
    return CriticEstimate(net, stages, trace or [])


def reference_fit(policy, buf: ReplayBuffer, cfg: CriticConfig, gamma: float,
                  rng: np.random.Generator) -> CriticEstimate:
    """Literal loop over replay_sample / resample_next_action / td_target / sgd_step.

    Slow; consumes randomness in the same order as ``fit_critic`` so the two
    agree exactly. Used to pin the fast path in tests.
    """
    net = cfg.net
    beta, radius = cfg.step_size, cfg.ball_radius(gamma)
    stages, q_prev = [], None
    for _ in range(cfg.J):
        theta0 = q_prev.copy() if (cfg.warm_start_stages and q_prev is not None) else init_params(net, rng)
        ball = ParamBall(theta0, radius, cfg.project_output_layer)
        idx = rng.integers(0, len(buf), size=cfg.L)
        a_next = [policy.sample(buf.next_states[i], rng) for i in idx]
        theta, iterates = theta0, []
        for i, a2 in zip(idx, a_next):
            t = buf[int(i)]
            y = td_target(net, q_prev, t, a2, gamma)
            theta = sgd_step(net, theta, t, y, beta, ball)
            iterates.append(theta)
        avg = average_params(iterates)
        stages.append(CriticStage(avg, ball, float("nan"), float("nan")))
        q_prev = avg
    return CriticEstimate(net, stages)


def write_trace_csv(est: CriticEstimate, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "step", "td_error", "param_dist_from_center"])
        for j, i, e, d in est.trace:
            w.writerow([j, i, f"{e:.17g}", f"{d:.17g}"])
