"""Small dense networks for the actor and critic, with hand-written
reverse-mode gradients (including backpropagation through time).

Both networks share one topology::

    throughput history -> 2-layer LSTM (or 1-D conv) -> last hidden state
    [features, scalar inputs] -> FC-ReLU -> FC-ReLU -> linear head

Parameters live in a plain ``dict[str, np.ndarray]``. LSTM gate blocks are
stored concatenated in the order input, forget, output, candidate.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

ParameterSet = dict  # name -> np.ndarray
GradientSet = dict

CHECKPOINT_MAGIC = b"UAVABR-PARAMS"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetworkConfig:
    lstm_layers: int = 2
    lstm_hidden: int = 64
    throughput_window: int = 8
    fc_sizes: tuple[int, ...] = (30, 10)
    num_actions: int = 4
    dropout_rate: float = 0.1
    seed: int = 0
    num_scalars: int = 5
    encoder: str = "lstm"  # "lstm" | "conv"
    conv_kernel: int = 4
    conv_filters: int = 64
    sensor_mode: str = "quantized"  # "quantized" | "none" | "raw"

    def __post_init__(self):
        object.__setattr__(self, "fc_sizes", tuple(int(s) for s in self.fc_sizes))
        sizes = [self.lstm_layers, self.lstm_hidden, self.throughput_window, self.num_actions,
                 self.num_scalars, self.conv_kernel, self.conv_filters, *self.fc_sizes]
        if any(s < 1 for s in sizes) or not self.fc_sizes:
            raise ValueError("all network sizes must be positive")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.encoder not in ("lstm", "conv"):
            raise ValueError(f"unknown encoder {self.encoder!r}")
        if self.sensor_mode not in ("quantized", "none", "raw"):
            raise ValueError(f"unknown sensor_mode {self.sensor_mode!r}")

    @property
    def input_size(self) -> int:
        return self.num_scalars + self.throughput_window

    @property
    def feature_size(self) -> int:
        return self.lstm_hidden if self.encoder == "lstm" else self.conv_filters

    @property
    def kernel(self) -> int:
        return min(self.conv_kernel, self.throughput_window)


def param_shapes(cfg: NetworkConfig, outputs: int) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    H = cfg.lstm_hidden
    if cfg.encoder == "lstm":
        for l in range(cfg.lstm_layers):
            fan = 1 if l == 0 else H
            shapes[f"lstm{l}.Wx"] = (fan, 4 * H)
            shapes[f"lstm{l}.Wh"] = (H, 4 * H)
            shapes[f"lstm{l}.b"] = (4 * H,)
    else:
        shapes["conv.W"] = (cfg.kernel, cfg.conv_filters)
        shapes["conv.b"] = (cfg.conv_filters,)
    prev = cfg.feature_size + cfg.num_scalars
    for k, n in enumerate(cfg.fc_sizes):
        shapes[f"fc{k}.W"] = (prev, n)
        shapes[f"fc{k}.b"] = (n,)
        prev = n
    shapes["head.W"] = (prev, outputs)
    shapes["head.b"] = (outputs,)
    return shapes


def init_params(cfg: NetworkConfig, seed: int | None = None, outputs: int | None = None) -> ParameterSet:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, LSTM forget bias 1."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    outputs = cfg.num_actions if outputs is None else outputs
    params = {}
    for name, shape in param_shapes(cfg, outputs).items():
        if len(shape) == 1:
            arr = np.zeros(shape)
            if name.startswith("lstm"):
                H = shape[0] // 4
                arr[H : 2 * H] = 1.0
        else:
            bound = 1.0 / math.sqrt(shape[0])
            arr = rng.uniform(-bound, bound, size=shape)
        params[name] = arr
    return params


def zeros_like(params: ParameterSet) -> GradientSet:
    return {k: np.zeros_like(v) for k, v in params.items()}


def copy_params(params: ParameterSet) -> ParameterSet:
    return {k: v.copy() for k, v in params.items()}


# ----------------------------------------------------------------------------
# Forward / backward


class Cache(NamedTuple):
    states: np.ndarray
    encoder: list
    fc_in: list  # input of each FC layer (post-dropout of the previous one)
    fc_pre: list  # pre-activation of each FC layer
    masks: list  # dropout masks (or None)
    head_in: np.ndarray


def _lstm_forward(params, cfg: NetworkConfig, seq: np.ndarray):
    """seq: (N, W) scalar inputs. Returns top-layer final hidden and cache."""
    N, W = seq.shape
    H = cfg.lstm_hidden
    # sigmoid(x) = (1 + tanh(x / 2)) / 2, so one tanh call covers all four gates.
    scale = np.ones(4 * H)
    scale[: 3 * H] = 0.5
    layer_in = seq[:, :, None]
    layers = []
    for l in range(cfg.lstm_layers):
        Wx, Wh, b = params[f"lstm{l}.Wx"], params[f"lstm{l}.Wh"], params[f"lstm{l}.b"]
        xproj = (layer_in @ Wx + b) * scale
        Whs = Wh * scale
        acts = np.empty((N, W, 4 * H))  # i, f, o sigmoids then candidate tanh
        cs = np.empty((N, W, H))
        hs = np.empty((N, W, H))
        c = np.zeros((N, H))
        for t in range(W):
            a = acts[:, t]
            if t:
                np.tanh(xproj[:, t] + hs[:, t - 1] @ Whs, out=a)
            else:
                np.tanh(xproj[:, t], out=a)
            a[:, : 3 * H] += 1.0
            a[:, : 3 * H] *= 0.5
            c = a[:, H : 2 * H] * c + a[:, :H] * a[:, 3 * H :]
            cs[:, t] = c
            hs[:, t] = a[:, 2 * H : 3 * H] * np.tanh(c)
        layers.append((layer_in, acts, cs, hs))
        layer_in = hs
    return layer_in[:, -1], layers


def _lstm_backward(params, cfg: NetworkConfig, layers, dfeat: np.ndarray, grads: GradientSet) -> None:
    H = cfg.lstm_hidden
    N = dfeat.shape[0]
    dhs = None
    for l in reversed(range(cfg.lstm_layers)):
        layer_in, acts, cs, hs = layers[l]
        tcs = np.tanh(cs)
        W = hs.shape[1]
        Wx, Wh = params[f"lstm{l}.Wx"], params[f"lstm{l}.Wh"]
        dA = np.empty((N, W, 4 * H))
        dh_next = np.zeros((N, H))
        dc_next = np.zeros((N, H))
        dWh = np.zeros_like(Wh)
        for t in reversed(range(W)):
            dh = dh_next
            if dhs is not None:
                dh = dh + dhs[:, t]
            elif t == W - 1:
                dh = dh + dfeat
            s = acts[:, t]
            i, f, o, g = s[:, :H], s[:, H : 2 * H], s[:, 2 * H : 3 * H], s[:, 3 * H :]
            tc = tcs[:, t]
            c_prev = cs[:, t - 1] if t > 0 else 0.0
            dc = dc_next + dh * o * (1.0 - tc * tc)
            da = dA[:, t]
            da[:, :H] = dc * g * i * (1.0 - i)
            da[:, H : 2 * H] = dc * c_prev * f * (1.0 - f)
            da[:, 2 * H : 3 * H] = dh * tc * o * (1.0 - o)
            da[:, 3 * H :] = dc * i * (1.0 - g * g)
            dc_next = dc * f
            if t > 0:
                dWh += hs[:, t - 1].T @ da
            dh_next = da @ Wh.T
        flat_in = layer_in.reshape(N * W, -1)
        flat_dA = dA.reshape(N * W, 4 * H)
        grads[f"lstm{l}.Wx"] = flat_in.T @ flat_dA
        grads[f"lstm{l}.Wh"] = dWh
        grads[f"lstm{l}.b"] = flat_dA.sum(axis=0)
        if l > 0:
            dhs = dA @ Wx.T


def _conv_forward(params, cfg: NetworkConfig, seq: np.ndarray):
    K = cfg.kernel
    patches = np.lib.stride_tricks.sliding_window_view(seq, K, axis=1)  # (N, P, K)
    z = patches @ params["conv.W"] + params["conv.b"]
    return np.maximum(z, 0.0).mean(axis=1), (patches, z)


def _conv_backward(cfg: NetworkConfig, cache, dfeat: np.ndarray, grads: GradientSet) -> None:
    patches, z = cache
    N, P, K = patches.shape
    dz = np.broadcast_to(dfeat[:, None, :] / P, z.shape) * (z > 0)
    grads["conv.W"] = patches.reshape(N * P, K).T @ dz.reshape(N * P, -1)
    grads["conv.b"] = dz.sum(axis=(0, 1))


def encode_throughput(x, params: ParameterSet, cfg: NetworkConfig) -> np.ndarray:
    """Feature vector of one throughput history (oldest sample first)."""
    seq = np.asarray(x, dtype=float)
    if seq.shape != (cfg.throughput_window,):
        raise ValueError(f"expected a throughput window of {cfg.throughput_window}, got shape {seq.shape}")
    if cfg.encoder == "lstm":
        feat, _ = _lstm_forward(params, cfg, seq[None, :])
    else:
        feat, _ = _conv_forward(params, cfg, seq[None, :])
    return feat[0]


def forward(
    params: ParameterSet,
    cfg: NetworkConfig,
    states: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, Cache]:
    """Raw head outputs for a batch of states, shape (N, outputs)."""
    X = np.asarray(states, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != cfg.input_size:
        raise ValueError(f"expected states of width {cfg.input_size}, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite state")
    S = cfg.num_scalars
    seq = X[:, S:]
    if cfg.encoder == "lstm":
        feat, enc = _lstm_forward(params, cfg, seq)
    else:
        feat, enc = _conv_forward(params, cfg, seq)
    h = np.concatenate([feat, X[:, :S]], axis=1)
    fc_in, fc_pre, masks = [], [], []
    drop = train_mode and cfg.dropout_rate > 0
    if drop and rng is None:
        raise ValueError("train_mode dropout needs an rng")
    for k in range(len(cfg.fc_sizes)):
        fc_in.append(h)
        z = h @ params[f"fc{k}.W"] + params[f"fc{k}.b"]
        fc_pre.append(z)
        h = np.maximum(z, 0.0)
        if drop:
            keep = 1.0 - cfg.dropout_rate
            m = (rng.random(h.shape) < keep) / keep
            h = h * m
            masks.append(m)
        else:
            masks.append(None)
    out = h @ params["head.W"] + params["head.b"]
    return out, Cache(X, enc, fc_in, fc_pre, masks, h)


def backward_from_output(params: ParameterSet, cfg: NetworkConfig, cache: Cache, d_out: np.ndarray) -> GradientSet:
    grads: GradientSet = {}
    grads["head.W"] = cache.head_in.T @ d_out
    grads["head.b"] = d_out.sum(axis=0)
    dh = d_out @ params["head.W"].T
    for k in reversed(range(len(cfg.fc_sizes))):
        if cache.masks[k] is not None:
            dh = dh * cache.masks[k]
        dz = dh * (cache.fc_pre[k] > 0)
        grads[f"fc{k}.W"] = cache.fc_in[k].T @ dz
        grads[f"fc{k}.b"] = dz.sum(axis=0)
        dh = dz @ params[f"fc{k}.W"].T
    dfeat = dh[:, : cfg.feature_size]
    if cfg.encoder == "lstm":
        _lstm_backward(params, cfg, cache.encoder, dfeat, grads)
    else:
        _conv_backward(cfg, cache.encoder, dfeat, grads)
    return grads


def log_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    s = z - m
    return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))


def policy_forward(state, params: ParameterSet, cfg: NetworkConfig, train_mode: bool = False,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Action probabilities for one state (or a batch)."""
    logits, _ = forward(params, cfg, state, train_mode, rng)
    p = np.exp(log_softmax(logits))
    return p[0] if np.ndim(state) == 1 else p


def value_forward(state, params: ParameterSet, cfg: NetworkConfig, train_mode: bool = False,
                  rng: np.random.Generator | None = None):
    v, _ = forward(params, cfg, state, train_mode, rng)
    return float(v[0, 0]) if np.ndim(state) == 1 else v[:, 0]


def entropy(probs: np.ndarray) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return -terms.sum(axis=-1)


# ----------------------------------------------------------------------------
# Objectives


@dataclass
class ActorBatch:
    states: np.ndarray
    actions: np.ndarray
    advantages: np.ndarray  # treated as constants
    entropy_weight: float = 0.0


@dataclass
class CriticBatch:
    states: np.ndarray
    targets: np.ndarray  # treated as constants


@dataclass
class ObjectiveResult:
    value: float
    grads: GradientSet
    info: dict = field(default_factory=dict)


def backward(
    loss_kind: str,
    batch,
    params: ParameterSet,
    cfg: NetworkConfig,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> ObjectiveResult:
    """Exact gradients of a batch-summed objective.

    ``actor``: sum_t A_t log pi(a_t|s_t) + beta * H(pi(.|s_t)), to be ascended.
    ``critic``: sum_t (target_t - V(s_t))^2, to be descended.
    """
    if len(batch.states) == 0:
        raise ValueError("empty batch")
    out, cache = forward(params, cfg, batch.states, train_mode, rng)
    if loss_kind == "actor":
        logp = log_softmax(out)
        p = np.exp(logp)
        N = out.shape[0]
        a = np.asarray(batch.actions, dtype=int)
        A = np.asarray(batch.advantages, dtype=float)
        H = -(p * logp).sum(axis=1)
        beta = float(batch.entropy_weight)
        value = float((A * logp[np.arange(N), a]).sum() + beta * H.sum())
        onehot = np.zeros_like(p)
        onehot[np.arange(N), a] = 1.0
        d_out = A[:, None] * (onehot - p) - beta * p * (logp + H[:, None])
        info = {"entropy": float(H.mean()), "pg_term": float((A * logp[np.arange(N), a]).sum())}
    elif loss_kind == "critic":
        v = out[:, 0]
        y = np.asarray(batch.targets, dtype=float)
        err = y - v
        value = float((err * err).sum())
        d_out = (-2.0 * err)[:, None]
        info = {}
    else:
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    grads = backward_from_output(params, cfg, cache, d_out)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
    return ObjectiveResult(value, grads, info)


def objective_value(loss_kind: str, batch, params, cfg, train_mode=False, rng_seed: int | None = None) -> float:
    rng = None if rng_seed is None else np.random.default_rng(rng_seed)
    out, _ = forward(params, cfg, batch.states, train_mode, rng)
    if loss_kind == "actor":
        logp = log_softmax(out)
        N = out.shape[0]
        H = -(np.exp(logp) * logp).sum(axis=1)
        return float((np.asarray(batch.advantages) * logp[np.arange(N), np.asarray(batch.actions)]).sum()
                     + batch.entropy_weight * H.sum())
    err = np.asarray(batch.targets) - out[:, 0]
    return float((err * err).sum())


# ----------------------------------------------------------------------------
# Optimizers


def sgd_step(params: ParameterSet, grads: GradientSet, lr: float, direction: str = "descent") -> ParameterSet:
    if lr <= 0:
        raise ValueError("lr must be positive")
    sign = {"ascent": 1.0, "descent": -1.0}.get(direction)
    if sign is None:
        raise ValueError(f"direction must be 'ascent' or 'descent', got {direction!r}")
    if params.keys() != grads.keys():
        raise ValueError("parameter/gradient name mismatch")
    out = {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"shape mismatch for {k!r}: {p.shape} vs {g.shape}")
        out[k] = p + sign * lr * g
    return out


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params, grads, direction="descent"):
        return sgd_step(params, grads, self.lr, direction)


class RMSProp:
    """RMSProp on the (signed) update direction."""

    def __init__(self, lr: float, decay: float = 0.99, eps: float = 1e-6):
        self.lr, self.decay, self.eps = lr, decay, eps
        self.sq: dict | None = None

    def step(self, params, grads, direction="descent"):
        if self.sq is None:
            self.sq = zeros_like(params)
        scaled = {}
        for k, g in grads.items():
            self.sq[k] = self.decay * self.sq[k] + (1 - self.decay) * g * g
            scaled[k] = g / (np.sqrt(self.sq[k]) + self.eps)
        return sgd_step(params, scaled, self.lr, direction)


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict | None = None
        self.v: dict | None = None
        self.t = 0

    def step(self, params, grads, direction="descent"):
        if self.m is None:
            self.m, self.v = zeros_like(params), zeros_like(params)
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        scaled = {}
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            scaled[k] = (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
        return sgd_step(params, scaled, self.lr, direction)


def make_optimizer(name: str, lr: float):
    try:
        return {"sgd": SGD, "rmsprop": RMSProp, "adam": Adam}[name](lr)
    except KeyError:
        raise ValueError(f"unknown optimizer {name!r}") from None


# ----------------------------------------------------------------------------
# Gradient checking


def numerical_gradient(f: Callable[[ParameterSet], float], params: ParameterSet, eps: float = 1e-4) -> GradientSet:
    """Central finite differences of ``f`` with respect to every entry."""
    grads = {}
    work = copy_params(params)
    for name, arr in work.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            fp = f(work)
            flat[i] = old - eps
            fm = f(work)
            flat[i] = old
            gflat[i] = (fp - fm) / (2 * eps)
        grads[name] = g
    return grads


def max_relative_error(analytic: GradientSet, numeric: GradientSet, floor: float = 1e-6) -> tuple[float, str]:
    """Largest |a - n| / max(|a|, |n|, floor) over all entries, and where."""
    worst, where = 0.0, ""
    for name in analytic:
        a, n = analytic[name], numeric[name]
        rel = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        if rel.size and rel.max() > worst:
            worst, where = float(rel.max()), name
    return worst, where


# ----------------------------------------------------------------------------
# Checkpoint format


def dumps_params(params: ParameterSet) -> bytes:
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC + b" %d %d\n" % (CHECKPOINT_VERSION, len(params)))
    for name, arr in params.items():
        if any(c.isspace() for c in name):
            raise ValueError(f"parameter name {name!r} contains whitespace")
        a = np.ascontiguousarray(arr, dtype="<f8")
        buf.write(f"{name} {a.ndim} {' '.join(map(str, a.shape))}\n".encode("ascii"))
        buf.write(a.tobytes(order="C"))
    return buf.getvalue()


def loads_params(data: bytes) -> ParameterSet:
    stream = io.BytesIO(data)
    head = stream.readline().split()
    if len(head) != 3 or head[0] != CHECKPOINT_MAGIC:
        raise ValueError("not a parameter checkpoint")
    if int(head[1]) != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {int(head[1])}")
    params = {}
    for _ in range(int(head[2])):
        fields = stream.readline().decode("ascii").split()
        name, ndim = fields[0], int(fields[1])
        shape = tuple(int(s) for s in fields[2 : 2 + ndim])
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        raw = stream.read(nbytes)
        if len(raw) != nbytes:
            raise ValueError(f"truncated payload for {name!r}")
        params[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    if stream.read(1):
        raise ValueError("trailing bytes after checkpoint payload")
    return params


def save_params(path: str | os.PathLike, params: ParameterSet) -> None:
    from .traces import atomic_write_bytes

    atomic_write_bytes(path, dumps_params(params))


def load_params(path: str | os.PathLike) -> ParameterSet:
    with open(path, "rb") as fh:
        return loads_params(fh.read())
