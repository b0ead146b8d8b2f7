"""Outer actor-critic loop with normalised, 1/k-decaying actor steps."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import mdp as mdp_core
from .critic import CriticConfig, CriticEstimate, fit_critic
from .policy import (GaussianPolicy, gaussian_to_tabular, init_policy, policy_gradient_oracle, score)
from .sampling import ReplayBuffer, collect_rollout

log = logging.getLogger(__name__)

ZERO_GRAD = 1e-12


@dataclass
class Problem:
    """Sampling environment plus the grid MDP that serves as its exact oracle."""

    env: mdp_core.Mdp
    oracle: mdp_core.DiscretizedMdp
    nu: np.ndarray  # initial state distribution on the oracle grid
    name: str = "problem"


@dataclass(frozen=True)
class ActorConfig:
    depth: int = 2
    width: int = 8
    activation: str = "tanh"
    sigma2_min: float = 1e-3


@dataclass(frozen=True)
class TrainConfig:
    K: int
    n: int
    critic: CriticConfig
    alpha: float = 1.0
    seed: int = 0
    eval_every: int = 1
    actor: ActorConfig = field(default_factory=ActorConfig)

    def __post_init__(self):
        if self.K < 1 or self.n < 1 or self.eval_every < 1:
            raise ValueError("K, n and eval_every must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    def schedule(self) -> list[int]:
        ks = [k for k in range(1, self.K + 1) if (k - 1) % self.eval_every == 0]
        if ks[-1] != self.K:
            ks.append(self.K)
        return ks


def alpha_from_mu(mu_hat: float, default: float = 1.0) -> float:
    """alpha = 7 / (2 sqrt(mu)) when mu is available and positive."""
    return 7.0 / (2.0 * np.sqrt(mu_hat)) if mu_hat and mu_hat > 0 else default


@dataclass
class IterateRecord:
    k: int
    J: float
    gap: float
    d_norm: float
    grad_norm: float
    critic_sup_error: float
    wall_time: float = 0.0

    FIELDS = ("k", "J", "gap", "d_norm", "grad_norm", "critic_sup_error")


def gradient_estimate(pp: GaussianPolicy, q_fn, buf: ReplayBuffer) -> np.ndarray:
    """d_k = (1/n) sum_i score(s_i, a_i) Q(s_i, a_i) over the stored rollout.

    Q sees the clamped action the environment received; the score is taken
    at the raw Gaussian draw when the buffer has one, which keeps d_k
    unbiased for the clamped policy's gradient.
    """
    if len(buf) == 0:
        raise ValueError("empty rollout")
    q = np.asarray(q_fn(np.hstack([buf.states, buf.actions])), dtype=float).reshape(-1)
    raw = buf.actions if buf.raw_actions is None else buf.raw_actions
    d = np.zeros(pp.n_params)
    for i in range(len(buf)):
        if q[i] != 0.0:
            d += q[i] * score(pp, buf.states[i], raw[i])
    return d / len(buf)


def actor_update(pp: GaussianPolicy, d: np.ndarray, alpha: float, k: int) -> GaussianPolicy:
    """lambda + (alpha / k) d / ||d||; skipped when ||d|| <= 1e-12."""
    if k < 1:
        raise ValueError("iteration index starts at 1")
    nd = np.linalg.norm(d)
    if nd <= ZERO_GRAD:
        log.info("k=%d: zero gradient estimate, actor update skipped", k)
        return pp
    return pp.with_flat(pp.flat() + (alpha / k) * (d / nd))


def oracle_q_fn(pp: GaussianPolicy, oracle: mdp_core.DiscretizedMdp):
    """Exact Q^pi as a function of continuous (s, a): look up the grid cell."""
    q = mdp_core.exact_q_policy(gaussian_to_tabular(pp, oracle), oracle)
    ds = oracle.state_dim

    def fn(X):
        X = np.atleast_2d(X)
        return np.array([q[oracle.state_index(x[:ds]), oracle.action_index(x[ds:])] for x in X])

    return fn


def evaluate(pp: GaussianPolicy, problem: Problem, j_star: float, critic: CriticEstimate | None = None):
    oracle = problem.oracle
    pi = gaussian_to_tabular(pp, oracle)
    q = mdp_core.exact_q_policy(pi, oracle)
    J = float(np.sum(problem.nu[:, None] * pi * q))
    grad = policy_gradient_oracle(pp, oracle, problem.nu)
    sup = float("nan")
    if critic is not None:
        sup = float(np.max(np.abs(critic.q(oracle.grid_inputs()) - q.ravel())))
    return J, j_star - J, float(np.linalg.norm(grad)), sup


def make_actor(problem: Problem, cfg: TrainConfig) -> GaussianPolicy:
    ss = np.random.SeedSequence(cfg.seed)
    actor_seed = int(ss.spawn(1)[0].generate_state(1)[0])
    return init_policy(problem.env.state_dim, problem.env.action_dim, cfg.actor.depth, cfg.actor.width,
                       cfg.actor.activation, actor_seed, cfg.actor.sigma2_min, problem.env.action_bounds)


def train(cfg: TrainConfig, problem: Problem, on_iterate=None) -> tuple[list[IterateRecord], GaussianPolicy]:
    """Run Algorithm-style actor-critic for k = 1..K; returns records and lambda_{K+1}."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(2)[1])
    pp = make_actor(problem, cfg)
    j_star = mdp_core.optimal_return(problem.oracle, problem.nu)
    schedule = set(cfg.schedule())
    records = []
    t0 = time.perf_counter()
    for k in range(1, cfg.K + 1):
        buf = collect_rollout(pp, problem.env, cfg.n, rng)
        critic = fit_critic(pp, buf, cfg.critic, problem.env.gamma, rng)
        d = gradient_estimate(pp, critic.q, buf)
        if k in schedule:
            J, gap, gnorm, sup = evaluate(pp, problem, j_star, critic)
            rec = IterateRecord(k, J, gap, float(np.linalg.norm(d)), gnorm, sup, time.perf_counter() - t0)
            records.append(rec)
            log.info("k=%d J=%.6f gap=%.6f |d|=%.3g", k, J, gap, rec.d_norm)
        if on_iterate is not None:
            on_iterate(k, pp, critic, buf)
        pp = actor_update(pp, d, cfg.alpha, k)
    return records, pp


def write_records_csv(records: list[IterateRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(IterateRecord.FIELDS)
        for r in records:
            row = asdict(r)
            w.writerow([r.k] + [f"{row[f]:.17g}" for f in IterateRecord.FIELDS[1:]])


def read_records_csv(path) -> list[IterateRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [IterateRecord(int(r["k"]), *(float(r[f]) for f in IterateRecord.FIELDS[1:])) for r in rows]


def windowed_medians(values, window: int = 20) -> np.ndarray:
    """Medians over consecutive non-overlapping blocks of ``window`` values."""
    v = np.asarray(values, dtype=float)
    if len(v) < window:
        return np.array([np.median(v)])
    return np.array([np.median(v[i:i + window]) for i in range(0, len(v) - window + 1, window)])


def is_nonincreasing(values, tol: float = 0.0) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) <= tol))


def weak_gradient_check(records: list[IterateRecord], mu_hat: float, eps_prime_hat: float,
                        slack: float = 1e-9) -> dict:
    """Per-iterate test of sqrt(mu) * gap <= eps' + ||grad J||."""
    ok = [np.sqrt(max(mu_hat, 0.0)) * r.gap <= eps_prime_hat + r.grad_norm + slack for r in records]
    return {
        "holds": ok,
        "violation_fraction": float(1.0 - np.mean(ok)) if ok else 0.0,
        "mu_hat": mu_hat,
        "eps_prime_hat": eps_prime_hat,
    }
