"""Width-m, depth-D network with the 1/sqrt(m) factor after every activation.

    x_h = sigma(W_h^T x_{h-1}) / sqrt(m),   h = 1..D-1
    y   = sigma(b_D^T x_{D-1}) / sqrt(m)

Gradients are computed by hand; there is no autodiff dependency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

ACTIVATIONS = ("relu", "tanh", "sigmoid", "identity")


@dataclass(frozen=True)
class NetConfig:
    depth: int
    width: int
    input_dim: int
    activation: str = "relu"
    seed: int = 0
    # sigma on the output unit restricts the sign/range of y; this bypasses it
    linear_output: bool = False
    # test hook: drop every 1/sqrt(m) factor
    normalize: bool = True

    def __post_init__(self):
        if self.depth < 2:
            raise ValueError("depth must be >= 2 (one hidden layer plus the output vector)")
        if self.width < 1 or self.input_dim < 1:
            raise ValueError("width and input_dim must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True, eq=False)
class NetParams:
    W: tuple[np.ndarray, ...]
    b: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        return [*self.W, self.b]

    def map(self, fn) -> "NetParams":
        return NetParams(tuple(fn(w) for w in self.W), fn(self.b))

    def zip_map(self, other: "NetParams", fn) -> "NetParams":
        return NetParams(tuple(fn(a, c) for a, c in zip(self.W, other.W)), fn(self.b, other.b))

    def __add__(self, other):
        return self.zip_map(other, np.add)

    def __sub__(self, other):
        return self.zip_map(other, np.subtract)

    def scale(self, c: float) -> "NetParams":
        return self.map(lambda a: c * a)

    @property
    def size(self) -> int:
        return sum(a.size for a in self.arrays())

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflat(self, vec: np.ndarray) -> "NetParams":
        out, i = [], 0
        for a in self.arrays():
            out.append(np.asarray(vec[i:i + a.size], dtype=float).reshape(a.shape))
            i += a.size
        return NetParams(tuple(out[:-1]), out[-1])

    def copy(self) -> "NetParams":
        return self.map(np.array)

    def equal(self, other: "NetParams") -> bool:
        return all(np.array_equal(a, c) for a, c in zip(self.arrays(), other.arrays()))


def zeros_like(cfg: NetConfig) -> NetParams:
    shapes = _shapes(cfg)
    return NetParams(tuple(np.zeros(s) for s in shapes[:-1]), np.zeros(shapes[-1]))


def _shapes(cfg: NetConfig):
    dims = [cfg.input_dim] + [cfg.width] * (cfg.depth - 1)
    return [(dims[h], dims[h + 1]) for h in range(cfg.depth - 1)] + [(cfg.width,)]


def init_params(cfg: NetConfig, rng: np.random.Generator | None = None) -> NetParams:
    """W entries ~ N(0, 1), b_D entries ~ Unif(-1, 1)."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    shapes = _shapes(cfg)
    W = tuple(rng.standard_normal(s) for s in shapes[:-1])
    b = rng.uniform(-1.0, 1.0, size=shapes[-1])
    return NetParams(W, b)


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    return z


def _dact(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        # subgradient 0 at exactly 0
        return (z > 0).astype(float)
    if name == "tanh":
        return 1.0 - np.tanh(z) ** 2
    if name == "sigmoid":
        s = 0.5 * (1.0 + np.tanh(0.5 * z))
        return s * (1.0 - s)
    return np.ones_like(z)


def _scale(cfg: NetConfig) -> float:
    return 1.0 / np.sqrt(cfg.width) if cfg.normalize else 1.0


def _check_input(cfg: NetConfig, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != cfg.input_dim:
        raise ValueError(f"input has {X.shape[-1]} features, network expects {cfg.input_dim}")
    return X


def _forward_cache(cfg: NetConfig, params: NetParams, X: np.ndarray):
    c = _scale(cfg)
    xs, zs = [X], []
    for W in params.W:
        z = xs[-1] @ W
        zs.append(z)
        xs.append(_act(cfg.activation, z) * c)
    zD = xs[-1] @ params.b
    out_act = "identity" if cfg.linear_output else cfg.activation
    return xs, zs, zD, _act(out_act, zD) * c


def forward(cfg: NetConfig, params: NetParams, x) -> float | np.ndarray:
    """Network output for one input vector (scalar) or a batch ``(n, input_dim)``."""
    X = _check_input(cfg, x)
    return _forward_cache(cfg, params, X)[-1]


def vjp(cfg: NetConfig, params: NetParams, X, g) -> NetParams:
    """sum_i g_i * grad_theta y(x_i) for a batch ``X``; ``g`` has one weight per row."""
    X = np.atleast_2d(_check_input(cfg, X))
    g = np.broadcast_to(np.asarray(g, dtype=float), (X.shape[0],))
    xs, zs, zD, _ = _forward_cache(cfg, params, X)
    c = _scale(cfg)
    out_act = "identity" if cfg.linear_output else cfg.activation
    dz = g * _dact(out_act, zD) * c
    gb = xs[-1].T @ dz
    up = dz[:, None] * params.b[None, :]
    gW = [None] * len(params.W)
    for h in range(len(params.W) - 1, -1, -1):
        dzh = up * _dact(cfg.activation, zs[h]) * c
        gW[h] = xs[h].T @ dzh
        up = dzh @ params.W[h].T
    return NetParams(tuple(gW), gb)


def grad_params(cfg: NetConfig, params: NetParams, x) -> NetParams:
    x = _check_input(cfg, x)
    if x.ndim != 1:
        raise ValueError("grad_params takes a single input vector; use vjp for batches")
    return vjp(cfg, params, x[None, :], 1.0)


def value_and_grad(cfg: NetConfig, params: NetParams, x: np.ndarray) -> tuple[float, NetParams]:
    """Output and gradient for a single input; the hot path of the critic loop."""
    c = _scale(cfg)
    act = cfg.activation
    xs, zs = [x], []
    for W in params.W:
        z = xs[-1] @ W
        zs.append(z)
        xs.append(_act(act, z) * c)
    zD = float(xs[-1] @ params.b)
    out_act = "identity" if cfg.linear_output else act
    y = float(_act(out_act, np.array(zD))) * c
    dz = float(_dact(out_act, np.array(zD))) * c
    gb = xs[-1] * dz
    up = dz * params.b
    gW = [None] * len(params.W)
    for h in range(len(params.W) - 1, -1, -1):
        dzh = up * _dact(act, zs[h]) * c
        gW[h] = np.outer(xs[h], dzh)
        up = params.W[h] @ dzh
    return y, NetParams(tuple(gW), gb)


@dataclass(frozen=True, eq=False)
class ParamBall:
    """{theta : ||W_h - W0_h||_F <= radius for all h} (and b_D if enabled)."""

    center: NetParams
    radius: float
    project_output_layer: bool = True

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def distances(self, params: NetParams) -> list[float]:
        d = [float(np.linalg.norm(w - w0)) for w, w0 in zip(params.W, self.center.W)]
        if self.project_output_layer:
            d.append(float(np.linalg.norm(params.b - self.center.b)))
        return d

    def contains(self, params: NetParams, slack: float = 1e-12) -> bool:
        return max(self.distances(params)) <= self.radius + slack


def radial_shrink(x0: np.ndarray, diff: np.ndarray, radius: float, norm: float) -> np.ndarray:
    """x0 + c * diff with c <= radius / norm chosen so the rounded result lies in the ball.

    Rounding can leave ``x0 + diff * radius / norm`` slightly outside; the
    factor shrinks geometrically from one ulp until the point is inside,
    which makes projection idempotent.
    """
    c = radius / norm
    out = x0 + diff * c
    for i in range(52):
        if np.linalg.norm(out - x0) <= radius:
            break
        c *= 1.0 - 2.0 ** (i - 52)
        out = x0 + diff * c
    return out


def _radial(x: np.ndarray, x0: np.ndarray, radius: float) -> np.ndarray:
    diff = x - x0
    n = np.linalg.norm(diff)
    if n <= radius:
        return x
    return radial_shrink(x0, diff, radius, n)


def project(params: NetParams, ball: ParamBall) -> NetParams:
    """Layer-wise radial projection onto the ball; identity (same arrays) inside it."""
    W = tuple(_radial(w, w0, ball.radius) for w, w0 in zip(params.W, ball.center.W))
    b = _radial(params.b, ball.center.b, ball.radius) if ball.project_output_layer else params.b
    return NetParams(W, b)


def average_params(items: Sequence[NetParams]) -> NetParams:
    if len(items) == 0:
        raise ValueError("cannot average an empty list of parameters")
    n = len(items)
    W = tuple(sum(p.W[h] for p in items) / n for h in range(len(items[0].W)))
    return NetParams(W, sum(p.b for p in items) / n)


# ---------------------------------------------------------------------------
# checkpoint: one JSON header line, then little-endian float64 parameters


def save_params(path, cfg: NetConfig, params: NetParams) -> None:
    header = {
        "D": cfg.depth, "m": cfg.width, "input_dim": cfg.input_dim,
        "activation": cfg.activation, "seed": cfg.seed,
        "linear_output": cfg.linear_output, "normalize": cfg.normalize,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(params.flat().astype("<f8").tobytes())


def load_params(path) -> tuple[NetConfig, NetParams]:
    raw = Path(path).read_bytes()
    head, _, body = raw.partition(b"\n")
    h = json.loads(head)
    cfg = NetConfig(h["D"], h["m"], h["input_dim"], h["activation"], h["seed"],
                    h.get("linear_output", False), h.get("normalize", True))
    vec = np.frombuffer(body, dtype="<f8").astype(float)
    like = zeros_like(cfg)
    if vec.size != like.size:
        raise ValueError(f"checkpoint holds {vec.size} values, config needs {like.size}")
    return cfg, like.unflat(vec)


def with_seed(cfg: NetConfig, seed: int) -> NetConfig:
    return replace(cfg, seed=seed)
