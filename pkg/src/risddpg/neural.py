"""Dense networks with exact reverse-mode gradients, written against numpy.

A :class:`Network` is a chain of layers, each ``affine -> [layer norm] ->
activation``. All parameters live in one flat float64 vector (``net.params``)
and every layer's weight, bias, gain and offset are views into it. That makes
Adam steps, soft target updates and checkpoints single vector operations.

Inputs with more than one part (the critic takes a state and an action) are
concatenated. The first affine map is then the sum of one affine branch per
part, ``W_s s + W_a a + b``; the branch blocks are initialised with their own
fan-in and ``backward`` splits the input gradient back into the parts.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .complexlin import ShapeError
from .errors import StateError

RELU = "relu"
TANH = "tanh"
NONE = "none"
_ACTIVATIONS = (RELU, TANH, NONE)

FINAL_INIT = 3e-3


@dataclass(frozen=True)
class LayerSpec:
    input_dim: int
    output_dim: int
    activation: str = NONE
    normalize: bool = False

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("layer dimensions must be >= 1")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def param_count(self) -> int:
        n = self.input_dim * self.output_dim + self.output_dim
        return n + 2 * self.output_dim if self.normalize else n


class _LayerParams:
    __slots__ = ("W", "b", "gain", "offset")

    def __init__(self, flat: np.ndarray, spec: LayerSpec):
        i, o = spec.input_dim, spec.output_dim
        self.W = flat[: i * o].reshape(o, i)
        self.b = flat[i * o : i * o + o]
        if spec.normalize:
            self.gain = flat[i * o + o : i * o + 2 * o]
            self.offset = flat[i * o + 2 * o : i * o + 3 * o]
        else:
            self.gain = self.offset = None


def layer_norm(z: np.ndarray, eps: float):
    """Normalise the last axis to zero mean / unit variance; returns (xhat, 1/std)."""
    mu = z.mean(axis=-1, keepdims=True)
    centered = z - mu
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    return centered * inv_std, inv_std


class Cache:
    """Intermediate values of one forward pass, consumed by :meth:`Network.backward`."""

    __slots__ = ("net_id", "version", "squeeze", "layers")

    def __init__(self, net_id, version, squeeze):
        self.net_id = net_id
        self.version = version
        self.squeeze = squeeze
        self.layers = []


class Network:
    def __init__(self, layers, input_splits=None, ln_eps: float = 1e-5, params: np.ndarray | None = None):
        layers = tuple(layers)
        if not layers:
            raise ValueError("a network needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.output_dim != b.input_dim:
                raise ShapeError(f"layer chain mismatch: {a.output_dim} -> {b.input_dim}")
        self.layers = layers
        self.input_splits = tuple(input_splits) if input_splits else (layers[0].input_dim,)
        if sum(self.input_splits) != layers[0].input_dim:
            raise ShapeError("input splits do not add up to the first layer's input_dim")
        self.ln_eps = float(ln_eps)
        n = sum(s.param_count for s in layers)
        if params is None:
            params = np.zeros(n)
        elif params.shape != (n,):
            raise ShapeError(f"expected {n} parameters, got {params.shape}")
        self.params = np.array(params, dtype=np.float64)
        self.version = 0
        self._bind()

    def _bind(self):
        self._views = []
        off = 0
        for spec in self.layers:
            self._views.append(_LayerParams(self.params[off : off + spec.param_count], spec))
            off += spec.param_count

    # ------------------------------------------------------------------

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].output_dim

    @property
    def param_count(self) -> int:
        return self.params.size

    def layer_params(self, i: int) -> _LayerParams:
        return self._views[i]

    def grad_views(self, grads: np.ndarray) -> list[_LayerParams]:
        """Per-layer views into a flat gradient vector laid out like ``params``."""
        out, off = [], 0
        for spec in self.layers:
            out.append(_LayerParams(grads[off : off + spec.param_count], spec))
            off += spec.param_count
        return out

    def touch(self) -> None:
        """Mark the parameters as modified (invalidates outstanding caches)."""
        self.version += 1

    def set_params(self, flat: np.ndarray) -> None:
        if flat.shape != self.params.shape:
            raise ShapeError("parameter vector has the wrong shape")
        self.params[...] = flat
        self.touch()

    def copy(self) -> Network:
        return Network(self.layers, self.input_splits, self.ln_eps, self.params.copy())

    def init(self, rng: np.random.Generator, final_scale: float | None = FINAL_INIT) -> Network:
        """Uniform(+-1/sqrt(fan_in)) weights and biases; the last layer uses +-final_scale."""
        for idx, (spec, p) in enumerate(zip(self.layers, self._views)):
            last = idx == len(self.layers) - 1 and final_scale is not None
            if idx == 0 and len(self.input_splits) > 1:
                col = 0
                for width in self.input_splits:
                    lim = final_scale if last else 1.0 / np.sqrt(width)
                    p.W[:, col : col + width] = rng.uniform(-lim, lim, size=(spec.output_dim, width))
                    col += width
                lim = final_scale if last else 1.0 / np.sqrt(spec.input_dim)
            else:
                lim = final_scale if last else 1.0 / np.sqrt(spec.input_dim)
                p.W[...] = rng.uniform(-lim, lim, size=p.W.shape)
            p.b[...] = rng.uniform(-lim, lim, size=p.b.shape)
            if spec.normalize:
                p.gain[...] = 1.0
                p.offset[...] = 0.0
        self.touch()
        return self

    # ------------------------------------------------------------------

    def forward(self, x, *extra) -> tuple[np.ndarray, Cache]:
        """Evaluate on one sample (1-D) or a batch (2-D, samples along axis 0).

        Several input parts may be passed positionally; they are concatenated.
        """
        parts = [np.asarray(x, dtype=np.float64)] + [np.asarray(e, dtype=np.float64) for e in extra]
        squeeze = parts[0].ndim == 1
        parts = [p[None, :] if p.ndim == 1 else p for p in parts]
        h = parts[0] if len(parts) == 1 else np.concatenate(parts, axis=1)
        if h.ndim != 2 or h.shape[1] != self.input_dim:
            raise ShapeError(f"network expects inputs of width {self.input_dim}, got {h.shape}")
        cache = Cache(id(self), self.version, squeeze)
        for spec, p in zip(self.layers, self._views):
            z = h @ p.W.T + p.b
            xhat = inv_std = None
            if spec.normalize:
                xhat, inv_std = layer_norm(z, self.ln_eps)
                pre = xhat * p.gain + p.offset
            else:
                pre = z
            if spec.activation == RELU:
                out = np.maximum(pre, 0.0)
            elif spec.activation == TANH:
                out = np.tanh(pre)
            else:
                out = pre
            cache.layers.append((h, xhat, inv_std, pre, out))
            h = out
        return (h[0] if squeeze else h), cache

    def __call__(self, x, *extra) -> np.ndarray:
        return self.forward(x, *extra)[0]

    def backward(self, cache: Cache, grad_out, want_param_grads: bool = True):
        """Reverse-mode pass for a cache from :meth:`forward` on this network.

        Returns ``(grad_input, grad_params)``; ``grad_input`` is a tuple when the
        network has several input parts, ``grad_params`` is flat like
        ``params`` (or None when not wanted). Batch gradients are summed.
        """
        if cache.net_id != id(self) or cache.version != self.version:
            raise StateError("cache is stale: parameters changed since the forward pass")
        g = np.asarray(grad_out, dtype=np.float64)
        if cache.squeeze:
            g = g[None, :]
        grads = np.zeros_like(self.params) if want_param_grads else None
        gviews = self.grad_views(grads) if want_param_grads else None
        for idx in range(len(self.layers) - 1, -1, -1):
            spec, p = self.layers[idx], self._views[idx]
            h, xhat, inv_std, pre, out = cache.layers[idx]
            if spec.activation == RELU:
                g = g * (pre > 0.0)
            elif spec.activation == TANH:
                g = g * (1.0 - out * out)
            if spec.normalize:
                if want_param_grads:
                    gviews[idx].gain[...] = np.sum(g * xhat, axis=0)
                    gviews[idx].offset[...] = np.sum(g, axis=0)
                gx = g * p.gain
                g = inv_std * (
                    gx - gx.mean(axis=-1, keepdims=True) - xhat * np.mean(gx * xhat, axis=-1, keepdims=True)
                )
            if want_param_grads:
                gviews[idx].W[...] = g.T @ h
                gviews[idx].b[...] = g.sum(axis=0)
            g = g @ p.W
        if cache.squeeze:
            g = g[0]
        if len(self.input_splits) > 1:
            bounds = np.cumsum(self.input_splits)[:-1]
            g = tuple(np.split(g, bounds, axis=-1))
        return g, grads

    # ------------------------------------------------------------------

    def mac_count(self) -> int:
        """Multiply-accumulates of one single-sample forward pass (affine maps only)."""
        return sum(s.input_dim * s.output_dim for s in self.layers)

    def flop_count(self) -> int:
        """Approximate FLOPs of one single-sample forward pass.

        2 per multiply-accumulate (bias add included), 7 per normalised unit
        (centre, square, accumulate, scale, gain, offset, mean) and 1 per
        activated unit.
        """
        total = 0
        for s in self.layers:
            total += 2 * s.input_dim * s.output_dim
            if s.normalize:
                total += 7 * s.output_dim
            if s.activation != NONE:
                total += s.output_dim
        return total

    def describe(self) -> dict:
        return {
            "layers": [asdict(s) for s in self.layers],
            "input_splits": list(self.input_splits),
            "ln_eps": self.ln_eps,
            "param_count": self.param_count,
        }

    @classmethod
    def from_description(cls, desc: dict, params: np.ndarray | None = None) -> Network:
        layers = [LayerSpec(**d) for d in desc["layers"]]
        return cls(layers, desc["input_splits"], desc["ln_eps"], params)


def build_actor(state_dim: int, action_dim: int, hidden: int = 1024, rng: np.random.Generator | None = None) -> Network:
    """state -> hidden (norm, ReLU) -> hidden (norm, ReLU) -> action (norm, tanh)."""
    net = Network(
        [
            LayerSpec(state_dim, hidden, RELU, True),
            LayerSpec(hidden, hidden, RELU, True),
            LayerSpec(hidden, action_dim, TANH, True),
        ]
    )
    return net.init(rng if rng is not None else np.random.default_rng())


def build_critic(state_dim: int, action_dim: int, hidden: int = 1024, rng: np.random.Generator | None = None) -> Network:
    """(state branch + action branch) -> norm, ReLU -> hidden (norm, ReLU) -> scalar Q."""
    net = Network(
        [
            LayerSpec(state_dim + action_dim, hidden, RELU, True),
            LayerSpec(hidden, hidden, RELU, True),
            LayerSpec(hidden, 1, NONE, False),
        ],
        input_splits=(state_dim, action_dim),
    )
    return net.init(rng if rng is not None else np.random.default_rng())


# --------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    @classmethod
    def for_network(cls, net: Network, lr: float = 1e-4, **kw) -> AdamState:
        return cls(np.zeros_like(net.params), np.zeros_like(net.params), lr, **kw)


def adam_update(params: np.ndarray, grads: np.ndarray, state: AdamState) -> None:
    """Bias-corrected Adam step applied to ``params`` in place."""
    if grads.shape != params.shape or state.m.shape != params.shape:
        raise ShapeError("Adam moments, parameters and gradients must share a shape")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grads
    state.v *= b2
    state.v += (1.0 - b2) * grads * grads
    m_hat = state.m / (1.0 - b1**state.step)
    v_hat = state.v / (1.0 - b2**state.step)
    params -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def adam_step(net: Network, grads: np.ndarray, state: AdamState) -> None:
    adam_update(net.params, grads, state)
    net.touch()


# --------------------------------------------------------------------------
# checkpoints
#
# Layout (all integers little-endian):
#   8 bytes   magic b"RISDDPGW"
#   uint32    container version (1)
#   uint64    length n of the header
#   n bytes   UTF-8 JSON header: {"metadata": {...}, "networks": [{"name", "layers",
#             "input_splits", "ln_eps", "param_count"}, ...]} (sorted keys)
#   then, per network in header order, param_count float64 values ('<f8')

MAGIC = b"RISDDPGW"
CONTAINER_VERSION = 1


def checkpoint_bytes(networks: dict[str, Network], metadata: dict | None = None) -> bytes:
    header = {
        "metadata": metadata or {},
        "networks": [dict(name=name, **net.describe()) for name, net in networks.items()],
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(net.params.astype("<f8").tobytes() for net in networks.values())
    return MAGIC + struct.pack("<IQ", CONTAINER_VERSION, len(hb)) + hb + body


def save_checkpoint(path, networks: dict[str, Network], metadata: dict | None = None) -> None:
    from ._io import atomic_write_bytes

    atomic_write_bytes(Path(path), checkpoint_bytes(networks, metadata))


def load_checkpoint(path) -> tuple[dict[str, Network], dict]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path} is not a weight checkpoint")
    version, hlen = struct.unpack("<IQ", data[8:20])
    if version != CONTAINER_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    header = json.loads(data[20 : 20 + hlen].decode("utf-8"))
    off = 20 + hlen
    nets = {}
    for desc in header["networks"]:
        n = desc["param_count"]
        params = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(np.float64)
        off += 8 * n
        nets[desc["name"]] = Network.from_description(desc, params)
    return nets, header["metadata"]
