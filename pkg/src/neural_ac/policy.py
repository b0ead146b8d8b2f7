"""Gaussian actor pi(.|s) = N(mu(s), diag kappa(s)) and a tabular grid policy.

Each action dimension has its own mean network and variance network; all
share one NetConfig with a smooth activation. The variance head is
kappa = sigma2_min + softplus(y).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.stats import norm

from . import mdp as mdp_core
from .net import NetConfig, NetParams, forward, init_params, load_params, save_params, value_and_grad

log = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


def softplus(y):
    return np.logaddexp(0.0, y)


def _sigmoid(y):
    return 0.5 * (1.0 + np.tanh(0.5 * y))


@dataclass(frozen=True, eq=False)
class GaussianPolicy:
    cfg: NetConfig
    mean: tuple[NetParams, ...]
    var: tuple[NetParams, ...]
    sigma2_min: float = 1e-3
    action_bounds: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        if self.cfg.activation not in ("tanh", "sigmoid"):
            raise ValueError("actor networks need a smooth activation (tanh or sigmoid)")
        if len(self.mean) != len(self.var) or not self.mean:
            raise ValueError("need one mean and one variance network per action dimension")

    @property
    def action_dim(self) -> int:
        return len(self.mean)

    @property
    def heads(self) -> tuple[NetParams, ...]:
        return (*self.mean, *self.var)

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.heads)

    def flat(self) -> np.ndarray:
        return np.concatenate([p.flat() for p in self.heads])

    def with_flat(self, vec: np.ndarray) -> "GaussianPolicy":
        heads, i = [], 0
        for p in self.heads:
            heads.append(p.unflat(vec[i:i + p.size]))
            i += p.size
        k = self.action_dim
        return replace(self, mean=tuple(heads[:k]), var=tuple(heads[k:]))

    def moments(self, s) -> tuple[np.ndarray, np.ndarray]:
        s = np.asarray(s, dtype=float)
        mu = np.array([forward(self.cfg, p, s) for p in self.mean], dtype=float)
        y = np.array([forward(self.cfg, p, s) for p in self.var], dtype=float)
        return mu, self.sigma2_min + softplus(y)

    def sample(self, s, rng: np.random.Generator) -> np.ndarray:
        return sample_action(self, s, rng)

    def sample_pair(self, s, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """(clamped action, raw Gaussian draw) from the same noise as ``sample``."""
        raw = sample_raw(self, s, rng)
        return np.clip(raw, *self.action_bounds), raw


def init_policy(state_dim: int, action_dim: int = 1, depth: int = 2, width: int = 16,
                activation: str = "tanh", seed: int = 0, sigma2_min: float = 1e-3,
                action_bounds=(-1.0, 1.0), linear_output: bool = True) -> GaussianPolicy:
    cfg = NetConfig(depth, width, state_dim, activation, seed, linear_output=linear_output)
    rng = np.random.default_rng(seed)
    mean = tuple(init_params(cfg, rng) for _ in range(action_dim))
    var = tuple(init_params(cfg, rng) for _ in range(action_dim))
    return GaussianPolicy(cfg, mean, var, sigma2_min, tuple(action_bounds))


def sample_raw(pp: GaussianPolicy, s, rng: np.random.Generator, noise=None) -> np.ndarray:
    """Unclamped draw mu(s) + sqrt(kappa(s)) z."""
    mu, kappa = pp.moments(s)
    z = rng.standard_normal(pp.action_dim) if noise is None else np.asarray(noise, dtype=float)
    return mu + np.sqrt(kappa) * z


def sample_action(pp: GaussianPolicy, s, rng: np.random.Generator, noise=None) -> np.ndarray:
    """a = mu(s) + sqrt(kappa(s)) z, clamped to the action box after sampling."""
    raw = sample_raw(pp, s, rng, noise)
    a = np.clip(raw, *pp.action_bounds)
    if not np.array_equal(a, raw):
        log.debug("action %s clamped to %s", raw, a)
    return a


def log_density(pp: GaussianPolicy, s, a) -> float:
    """Unclamped Gaussian log density, summed over action dimensions."""
    mu, kappa = pp.moments(s)
    a = np.asarray(a, dtype=float)
    return float(np.sum(-((a - mu) ** 2) / (2 * kappa) - 0.5 * (LOG_2PI + np.log(kappa))))


def _head_grads(pp: GaussianPolicy, s):
    s = np.asarray(s, dtype=float)
    mu, gmu, y, gy = [], [], [], []
    for p in pp.mean:
        v, g = value_and_grad(pp.cfg, p, s)
        mu.append(v)
        gmu.append(g.flat())
    for p in pp.var:
        v, g = value_and_grad(pp.cfg, p, s)
        y.append(v)
        gy.append(g.flat())
    y = np.array(y)
    kappa = pp.sigma2_min + softplus(y)
    # d kappa / d theta = sigmoid(y) * dy / d theta
    gkappa = [_sigmoid(yi) * g for yi, g in zip(y, gy)]
    return np.array(mu), gmu, kappa, gkappa


def score(pp: GaussianPolicy, s, a) -> np.ndarray:
    """grad_lambda log pi(a|s), flattened in the order of ``pp.flat()``."""
    mu, gmu, kappa, gkappa = _head_grads(pp, s)
    a = np.asarray(a, dtype=float)
    diff = a - mu
    c_mu = diff / kappa
    c_k = diff**2 / (2 * kappa**2) - 1.0 / (2 * kappa)
    return np.concatenate([c * g for c, g in zip(c_mu, gmu)] + [c * g for c, g in zip(c_k, gkappa)])


def save_policy(directory, pp: GaussianPolicy) -> None:
    """One parameter file per head plus ``policy.json`` with the variance floor and bounds."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, p in enumerate(pp.mean):
        save_params(d / f"mean_{i}.bin", pp.cfg, p)
    for i, p in enumerate(pp.var):
        save_params(d / f"var_{i}.bin", pp.cfg, p)
    meta = {"action_dim": pp.action_dim, "sigma2_min": pp.sigma2_min, "action_bounds": list(pp.action_bounds)}
    (d / "policy.json").write_text(json.dumps(meta, sort_keys=True) + "\n")


def load_policy(directory) -> GaussianPolicy:
    d = Path(directory)
    meta = json.loads((d / "policy.json").read_text())
    k = int(meta["action_dim"])
    heads = [load_params(d / f"{kind}_{i}.bin") for kind in ("mean", "var") for i in range(k)]
    cfg = heads[0][0]
    return GaussianPolicy(cfg, tuple(p for _, p in heads[:k]), tuple(p for _, p in heads[k:]),
                          float(meta["sigma2_min"]), tuple(meta["action_bounds"]))


# ---------------------------------------------------------------------------
# bridge to grid MDPs


def _edge_z(edges, mu, sigma):
    full = np.concatenate([[-np.inf], edges, [np.inf]])
    return (full - mu) / sigma


def gaussian_to_tabular(pp: GaussianPolicy, mdp: mdp_core.DiscretizedMdp) -> np.ndarray:
    """pi(b|s): Gaussian mass of action bin b; clamping sends both tails to the edge bins."""
    if pp.action_dim != 1 or mdp.action_dim != 1:
        raise ValueError("grid projection supports one action dimension")
    pi = np.empty((mdp.n_states, mdp.n_actions))
    for i, s in enumerate(mdp.state_coords):
        mu, kappa = pp.moments(s)
        z = _edge_z(mdp.action_edges, mu[0], np.sqrt(kappa[0]))
        pi[i] = np.diff(norm.cdf(z))
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum(axis=1, keepdims=True)


def policy_gradient_oracle(pp: GaussianPolicy, mdp: mdp_core.DiscretizedMdp, nu) -> np.ndarray:
    """Exact grad J on the grid: sum_s rho(s) sum_b Q^pi(s, b) grad pi(b|s).

    rho is the unnormalised discounted state occupancy from s0 ~ nu.
    """
    pi = gaussian_to_tabular(pp, mdp)
    q = mdp_core.exact_q_policy(pi, mdp)
    rho = mdp_core.discounted_state_occupancy(pi, mdp, nu)
    k = pp.n_params // 2
    grad = np.zeros(pp.n_params)
    for i, s in enumerate(mdp.state_coords):
        mu, gmu, kappa, gkappa = _head_grads(pp, s)
        sigma = np.sqrt(kappa[0])
        z = _edge_z(mdp.action_edges, mu[0], sigma)
        phi = norm.pdf(z)
        zphi = np.zeros_like(z)
        finite = np.isfinite(z)
        zphi[finite] = z[finite] * phi[finite]
        dpi_dmu = (phi[:-1] - phi[1:]) / sigma
        dpi_dsigma = (zphi[:-1] - zphi[1:]) / sigma
        dpi_dkappa = dpi_dsigma / (2 * sigma)
        w = rho[i] * q[i]
        grad[:k] += np.dot(w, dpi_dmu) * gmu[0]
        grad[k:] += np.dot(w, dpi_dkappa) * gkappa[0]
    return grad


def policy_return(pp: GaussianPolicy, mdp: mdp_core.DiscretizedMdp, nu) -> float:
    return mdp_core.expected_return(gaussian_to_tabular(pp, mdp), mdp, nu)


@dataclass(frozen=True, eq=False)
class GridPolicy:
    """Tabular policy on a grid MDP that emits action coordinates."""

    probs: np.ndarray
    mdp: mdp_core.DiscretizedMdp

    def __post_init__(self):
        object.__setattr__(self, "probs", mdp_core.validate_policy(self.probs, self.mdp))

    def sample(self, s, rng: np.random.Generator) -> np.ndarray:
        i = self.mdp.state_index(s)
        b = rng.choice(self.mdp.n_actions, p=self.probs[i])
        return self.mdp.action_coords[b].copy()


# ---------------------------------------------------------------------------
# Assumption-1 style constants, estimated


def estimate_assumption1(pp: GaussianPolicy, mdp: mdp_core.DiscretizedMdp, n_samples: int = 1000,
                         rng: np.random.Generator | None = None, nu=None, n_pairs: int = 20,
                         perturbation: float = 1e-2) -> dict:
    """Empirical max score norm, score Lipschitz ratio and smallest Fisher eigenvalue.

    (s, a) pairs are drawn with s from the exact visitation marginal and a
    from the raw Gaussian. Samples are generated from one uniform block so a
    longer run extends a shorter one with the same seed.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    rng = np.random.default_rng(0) if rng is None else rng
    nu = np.full(mdp.n_states, 1.0 / mdp.n_states) if nu is None else nu
    d_state = mdp_core.visitation_distribution(gaussian_to_tabular(pp, mdp), mdp, nu).sum(axis=1)
    u = rng.random((n_samples, 1 + pp.action_dim))
    idx = np.minimum(np.searchsorted(np.cumsum(d_state), u[:, 0], side="right"), mdp.n_states - 1)
    z = norm.ppf(np.clip(u[:, 1:], 1e-300, 1 - 1e-16))
    scores, pairs = [], []
    for i, zi in zip(idx, z):
        s = mdp.state_coords[i]
        mu, kappa = pp.moments(s)
        a = mu + np.sqrt(kappa) * zi
        scores.append(score(pp, s, a))
        pairs.append((s, a))
    G = np.array(scores)
    if not np.all(np.isfinite(G)):
        raise mdp_core.ValidationError("score samples are not finite")
    fisher = G.T @ G / n_samples
    norms = np.linalg.norm(G, axis=1)
    lam = pp.flat()
    ratios = []
    prng = np.random.default_rng(rng.integers(2**63))
    for _ in range(n_pairs):
        dv = prng.standard_normal(lam.size)
        dv *= perturbation / np.linalg.norm(dv)
        other = pp.with_flat(lam + dv)
        s, a = pairs[prng.integers(len(pairs))]
        ratios.append(np.linalg.norm(score(pp, s, a) - score(other, s, a)) / perturbation)
    eig = np.linalg.eigvalsh(0.5 * (fisher + fisher.T))
    return {
        "M_g_hat": float(norms.max()),
        "M_g_running": np.maximum.accumulate(norms),
        "beta_hat": float(max(ratios)),
        "mu_f_hat": float(max(eig[0], 0.0)),
        "fisher": fisher,
    }


def domination_constants(mu_f: float, M_g: float, eps_bias: float, gamma: float) -> tuple[float, float]:
    """(mu, eps') = (mu_f^2 / (2 M_g^2), mu_f sqrt(eps_bias) / (M_g (1 - gamma)))."""
    mu = mu_f**2 / (2 * M_g**2)
    eps = mu_f * np.sqrt(eps_bias) / (M_g * (1 - gamma))
    return mu, eps
