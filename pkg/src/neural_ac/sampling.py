"""Markovian rollouts, uniform experience replay and geometric-mixing diagnostics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import mdp as mdp_core


@dataclass(frozen=True, eq=False)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"reward {self.r} outside [0, 1]")


@dataclass(eq=False)
class ReplayBuffer:
    """Column storage for the n tuples of one outer iteration."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    n_clamped: int = 0
    meta: dict = field(default_factory=dict)
    # pre-clamp Gaussian draws; the score function needs these, not the clamped actions
    raw_actions: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.rewards)

    def __getitem__(self, i) -> Transition:
        return Transition(self.states[i], self.actions[i], float(self.rewards[i]), self.next_states[i])

    @property
    def transitions(self) -> list[Transition]:
        return [self[i] for i in range(len(self))]

    @classmethod
    def from_transitions(cls, items) -> "ReplayBuffer":
        items = list(items)
        return cls(
            np.array([t.s for t in items], dtype=float),
            np.array([t.a for t in items], dtype=float),
            np.array([t.r for t in items], dtype=float),
            np.array([t.s_next for t in items], dtype=float),
        )


def collect_rollout(policy, env: mdp_core.Mdp, n: int, rng: np.random.Generator, initial=None) -> ReplayBuffer:
    """One unbroken trajectory of n tuples: s0 ~ initial, a_t ~ pi(.|s_t), s_{t+1} ~ P(.|s_t, a_t).

    Policies with ``sample_pair`` also have their raw (pre-clamp) draws stored.
    """
    if n < 1:
        raise ValueError("rollout length must be >= 1")
    initial = env.initial if initial is None else initial
    s = np.asarray(initial(rng), dtype=float)
    S = np.empty((n, env.state_dim))
    A = np.empty((n, env.action_dim))
    R = np.empty(n)
    S2 = np.empty((n, env.state_dim))
    paired = hasattr(policy, "sample_pair")
    raw_all = np.empty((n, env.action_dim)) if paired else None
    clamped = 0
    for t in range(n):
        if paired:
            a, raw = policy.sample_pair(s, rng)
            raw_all[t] = raw
            clamped += int(not np.array_equal(a, raw))
        else:
            a = np.asarray(policy.sample(s, rng), dtype=float)
        r = env.reward(s, a)
        s2 = np.asarray(env.step(s, a, rng), dtype=float)
        S[t], A[t], R[t], S2[t] = s, a, r, s2
        s = s2
    return ReplayBuffer(S, A, R, S2, n_clamped=clamped, raw_actions=raw_all)


def replay_indices(buf: ReplayBuffer, rng: np.random.Generator, size: int) -> np.ndarray:
    if len(buf) == 0:
        raise ValueError("cannot replay from an empty buffer")
    return rng.integers(0, len(buf), size=size)


def replay_sample(buf: ReplayBuffer, rng: np.random.Generator) -> Transition:
    """A uniformly drawn stored tuple; draws are with replacement."""
    return buf[int(replay_indices(buf, rng, 1)[0])]


def resample_next_action(policy, t: Transition, rng: np.random.Generator) -> np.ndarray:
    """Fresh a' ~ pi(.|s'); never cached on the tuple."""
    return np.asarray(policy.sample(t.s_next, rng), dtype=float)


def write_rollout_csv(buf: ReplayBuffer, path) -> None:
    ds, da = buf.states.shape[1], buf.actions.shape[1]
    header = [f"s_{i}" for i in range(ds)] + [f"a_{i}" for i in range(da)] + ["r"] + [f"s_next_{i}" for i in range(ds)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(buf)):
            row = [*buf.states[i], *buf.actions[i], buf.rewards[i], *buf.next_states[i]]
            w.writerow([f"{v:.17g}" for v in row])


def read_rollout_csv(path) -> ReplayBuffer:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    ds = sum(h.startswith("s_") and not h.startswith("s_next") for h in header)
    da = sum(h.startswith("a_") for h in header)
    return ReplayBuffer(data[:, :ds], data[:, ds:ds + da], data[:, ds + da], data[:, ds + da + 1:])


# ---------------------------------------------------------------------------
# mixing


@dataclass
class MixingReport:
    tv_by_lag: list[tuple[int, float]]
    p: float
    rho: float
    r_squared: float
    fitted: bool
    monotone: bool
    note: str = "TV conditions on s0 only; the first action is drawn from pi"

    def to_dict(self) -> dict:
        return {
            "tv_by_lag": [[int(t), float(v)] for t, v in self.tv_by_lag],
            "p": self.p, "rho": self.rho, "r_squared": self.r_squared,
            "fitted": self.fitted, "monotone": self.monotone, "note": self.note,
        }


def tv_by_lag(pi, mdp: mdp_core.DiscretizedMdp, max_lag: int) -> np.ndarray:
    """max_s TV(Law((s_tau, a_tau) | s_0 = s), zeta) for tau = 1..max_lag."""
    zeta = mdp_core.stationary_distribution(pi, mdp).ravel()
    M = mdp_core.sa_transition_matrix(pi, mdp)
    S, A = mdp.n_states, mdp.n_actions
    start = np.zeros((S, S * A))
    for s in range(S):
        start[s, s * A:(s + 1) * A] = pi[s]
    out = np.empty(max_lag)
    cur = start
    for tau in range(max_lag):
        cur = cur @ M
        out[tau] = np.max(0.5 * np.abs(cur - zeta).sum(axis=1))
    return out


def mixing_diagnostic(pi, mdp: mdp_core.DiscretizedMdp, max_lag: int = 30, floor: float = 1e-12) -> MixingReport:
    """Exact TV decay plus a least-squares fit of log TV = log p + tau log rho."""
    pi = mdp_core.validate_policy(pi, mdp)
    tv = np.clip(tv_by_lag(pi, mdp, max_lag), 0.0, 1.0)
    lags = np.arange(1, max_lag + 1)
    keep = tv > floor
    monotone = bool(np.all(np.diff(tv) <= 1e-15))
    pairs = list(zip(lags.tolist(), tv.tolist()))
    if keep.sum() < 2:
        return MixingReport(pairs, 0.0, float("nan"), float("nan"), False, monotone)
    x, y = lags[keep], np.log(tv[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return MixingReport(pairs, float(np.exp(intercept)), float(np.exp(slope)), float(r2), True, monotone)
