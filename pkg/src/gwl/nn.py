"""A tiny convolutional network over one-hot encoded discrete images.

Activations are kept channel-last, ``(N, H, W, C)``.  Convolutions are 3x3,
stride 1, zero padding 1, implemented with a fixed gather (im2col) so that the
backward pass is a scatter-add of the same indices.  Everything runs in double
precision; gradients with respect to the one-hot input are exact reverse-mode
derivatives (ReLU subgradient 0 at 0).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT = "tinynn-v1"
KINDS = ("embed_conv3x3", "conv3x3", "relu", "global_avg_pool", "dense")
CONV_KINDS = ("embed_conv3x3", "conv3x3")


class WeightFileError(ValueError):
    pass


@dataclass
class Layer:
    kind: str
    n_in: int | None = None
    n_out: int | None = None
    w: np.ndarray | None = None  # conv: (out, in, 3, 3); dense: (out, in)
    b: np.ndarray | None = None

    @property
    def has_params(self) -> bool:
        return self.kind in CONV_KINDS or self.kind == "dense"


@dataclass
class Network:
    h: int
    w: int
    v: int
    layers: list[Layer]
    _gather: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._check()

    @property
    def dims(self) -> int:
        return self.h * self.w

    def _check(self):
        shape = ("map", self.v)
        for i, layer in enumerate(self.layers):
            kind = layer.kind
            if kind not in KINDS:
                raise ValueError(f"layer {i}: unknown kind {kind!r}")
            if kind in CONV_KINDS:
                if shape[0] != "map" or layer.n_in != shape[1]:
                    raise ValueError(f"layer {i} ({kind}): expects {layer.n_in} input channels, got {shape}")
                want = (layer.n_out, layer.n_in, 3, 3)
                shape = ("map", layer.n_out)
            elif kind == "dense":
                size = shape[1] * (self.dims if shape[0] == "map" else 1)
                if layer.n_in != size:
                    raise ValueError(f"layer {i} (dense): expects {layer.n_in} inputs, got {size}")
                want = (layer.n_out, layer.n_in)
                shape = ("vec", layer.n_out)
            elif kind == "global_avg_pool":
                if shape[0] != "map":
                    raise ValueError(f"layer {i}: pooling needs a feature map")
                shape = ("vec", shape[1])
                continue
            else:
                continue
            if layer.w is None or layer.w.shape != want:
                raise ValueError(f"layer {i} ({kind}): weight shape must be {want}")
            if layer.b is None or layer.b.shape != (layer.n_out,):
                raise ValueError(f"layer {i} ({kind}): bias shape must be ({layer.n_out},)")
        if shape != ("vec", 1):
            raise ValueError("network must end in a scalar output")

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            if layer.has_params:
                out += [layer.w, layer.b]
        return out

    def copy(self) -> "Network":
        layers = [
            Layer(l.kind, l.n_in, l.n_out,
                  None if l.w is None else l.w.copy(),
                  None if l.b is None else l.b.copy())
            for l in self.layers
        ]
        return Network(self.h, self.w, self.v, layers)

    def gather_index(self, c: int) -> np.ndarray:
        """Flat indices into the padded ``(H+2, W+2, c)`` map, shape ``(H*W, c*9)``.

        Columns are ordered ``(channel, ky, kx)`` to match the weight layout.
        """
        idx = self._gather.get(c)
        if idx is None:
            H, W = self.h, self.w
            hh, ww = np.meshgrid(np.arange(H), np.arange(W), indexing="ij")
            ch, ky, kx = np.meshgrid(np.arange(c), np.arange(3), np.arange(3), indexing="ij")
            rows = (hh.reshape(-1, 1) + ky.reshape(1, -1))
            cols = (ww.reshape(-1, 1) + kx.reshape(1, -1))
            idx = (rows * (W + 2) + cols) * c + ch.reshape(1, -1)
            self._gather[c] = idx
        return idx


def onehot(configs, v: int) -> np.ndarray:
    """``(..., D)`` integer configs to ``(..., D, v)`` float indicators."""
    x = np.asarray(configs)
    return (x[..., None] == np.arange(v)).astype(np.float64)


def glorot(rng, shape, fan_in, fan_out):
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


def tiny_cnn(h: int, w: int, v: int = 2, channels=(3, 8), seed: int = 0) -> Network:
    """embed_conv3x3(v->c1), relu, conv3x3(c1->c2), relu, avg pool, dense(c2->1)."""
    rng = np.random.default_rng(seed)
    c1, c2 = channels
    layers = [
        Layer("embed_conv3x3", v, c1, glorot(rng, (c1, v, 3, 3), v * 9, c1 * 9), np.zeros(c1)),
        Layer("relu"),
        Layer("conv3x3", c1, c2, glorot(rng, (c2, c1, 3, 3), c1 * 9, c2 * 9), np.zeros(c2)),
        Layer("relu"),
        Layer("global_avg_pool"),
        Layer("dense", c2, 1, glorot(rng, (1, c2), c2, 1), np.zeros(1)),
    ]
    return Network(h, w, v, layers)


def zero_network(h: int, w: int, v: int = 2, channels=(3, 8)) -> Network:
    net = tiny_cnn(h, w, v, channels)
    for p in net.params():
        p[...] = 0.0
    return net


@dataclass
class Tape:
    """Activations retained by ``forward`` for the reverse pass."""

    inputs: list  # per layer: the tensor fed into it (conv: its gathered patches)
    batch: int


def forward(net: Network, x_onehot: np.ndarray) -> tuple[np.ndarray, Tape]:
    """Logits for one-hot input of shape ``(H, W, V)`` or ``(N, H, W, V)``.

    Returns a scalar for a single input, a length-N vector for a batch.
    """
    x = np.asarray(x_onehot, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.ndim != 4 or x.shape[1:] != (net.h, net.w, net.v):
        raise ValueError(
            f"input shape {np.shape(x_onehot)} does not match network space "
            f"({net.h}, {net.w}, {net.v})"
        )
    n = x.shape[0]
    H, W = net.h, net.w
    saved = []
    for layer in net.layers:
        kind = layer.kind
        if kind in CONV_KINDS:
            c = x.shape[-1]
            xp = np.zeros((n, H + 2, W + 2, c))
            xp[:, 1:-1, 1:-1, :] = x
            patches = xp.reshape(n, -1)[:, net.gather_index(c)]
            saved.append(patches)
            x = (patches @ layer.w.reshape(layer.n_out, -1).T + layer.b).reshape(n, H, W, layer.n_out)
        elif kind == "relu":
            saved.append(x > 0)
            x = np.where(x > 0, x, 0.0)
        elif kind == "global_avg_pool":
            saved.append(x.shape)
            x = x.mean(axis=(1, 2))
        else:
            flat = x.reshape(n, -1)
            saved.append((x.shape, flat))
            x = flat @ layer.w.T + layer.b
    logits = x[:, 0]
    tape = Tape(saved, n)
    return (float(logits[0]) if single else logits), tape


def _backward(net: Network, tape: Tape, gout: np.ndarray, want_params: bool):
    """Propagate d(loss)/d(logit) of shape (N,) back through the network."""
    n = tape.batch
    H, W = net.h, net.w
    g = np.asarray(gout, dtype=np.float64).reshape(n, 1)
    grads = {}
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        saved = tape.inputs[i]
        kind = layer.kind
        if kind == "dense":
            shape, xin = saved
            if want_params:
                grads[i] = (g.T @ xin, g.sum(axis=0))
            g = (g @ layer.w).reshape(shape)
        elif kind == "global_avg_pool":
            g = np.broadcast_to(g[:, None, None, :] / (H * W), saved)
        elif kind == "relu":
            g = np.where(saved, g, 0.0)
        else:
            patches = saved
            c_out, c_in = layer.n_out, layer.n_in
            g2 = g.reshape(n, H * W, c_out)
            if want_params:
                dw = g2.reshape(-1, c_out).T @ patches.reshape(-1, c_in * 9)
                grads[i] = (dw.reshape(layer.w.shape), g2.sum(axis=(0, 1)))
            if i > 0 or not want_params:
                dpatch = g2 @ layer.w.reshape(c_out, -1)
                size = (H + 2) * (W + 2) * c_in
                idx = net.gather_index(c_in)
                flat = (idx[None] + (np.arange(n) * size)[:, None, None]).ravel()
                dxp = np.bincount(flat, weights=dpatch.ravel(), minlength=n * size)
                g = dxp.reshape(n, H + 2, W + 2, c_in)[:, 1:-1, 1:-1, :]
    return g, grads


def backward_input(net: Network, tape: Tape | None) -> np.ndarray:
    """d(logit)/d(one-hot input), shape ``(D, V)`` (or ``(N, D, V)`` for a batch)."""
    if tape is None:
        raise RuntimeError("backward_input called without a forward pass")
    g, _ = _backward(net, tape, np.ones(tape.batch), want_params=False)
    g = np.ascontiguousarray(g).reshape(tape.batch, net.dims, net.v)
    return g[0] if tape.batch == 1 else g


def logits(net: Network, configs: np.ndarray) -> np.ndarray:
    """Batched logits for integer configs of shape ``(N, D)``."""
    x = onehot(configs, net.v).reshape(-1, net.h, net.w, net.v)
    out, _ = forward(net, x)
    return out


def _softplus(x):
    return np.logaddexp(0.0, x)


def sgd_train_step(net: Network, batch, lr: float):
    """One SGD step on the mean logistic loss; returns ``(net, loss before update)``."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    configs = np.array([np.asarray(c).ravel() for c, _ in batch])
    t = 2.0 * np.array([lab for _, lab in batch], dtype=np.float64) - 1.0
    x = onehot(configs, net.v).reshape(-1, net.h, net.w, net.v)
    out, tape = forward(net, x)
    loss = float(np.mean(_softplus(-t * out)))
    # d softplus(-t z)/dz = -t sigmoid(-t z)
    dz = -t * np.exp(-_softplus(t * out)) / len(batch)
    _, grads = _backward(net, tape, dz, want_params=True)
    for i, (dw, db) in grads.items():
        layer = net.layers[i]
        layer.w -= lr * dw
        layer.b -= lr * db
    return net, loss


def accuracy(net: Network, data) -> float:
    if not data:
        return float("nan")
    configs = np.array([np.asarray(c).ravel() for c, _ in data])
    labels = np.array([lab for _, lab in data])
    pred = (logits(net, configs) > 0).astype(int)
    return float(np.mean(pred == labels))


def train(net: Network, data, epochs: int, lr: float, batch_size: int = 32, seed: int = 0):
    """Shuffled mini-batch SGD.  Returns the per-epoch mean losses."""
    rng = np.random.default_rng(seed)
    history = []
    for _ in range(epochs):
        order = rng.permutation(len(data))
        losses = []
        for start in range(0, len(data), batch_size):
            chunk = [data[j] for j in order[start:start + batch_size]]
            _, loss = sgd_train_step(net, chunk, lr)
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return history


# -- weight files ---------------------------------------------------------


def _reals(a: np.ndarray) -> str:
    vals = np.asarray(a, dtype=np.float64).ravel()
    if not np.all(np.isfinite(vals)):
        raise WeightFileError("weights must be finite")
    return "[" + ",".join(f"{v:.17g}" for v in vals) + "]"


def dumps(net: Network) -> str:
    lines = [
        f'{{"format":"{FORMAT}","space":{{"h":{net.h},"w":{net.w},"v":{net.v}}},"layers":['
    ]
    parts = []
    for layer in net.layers:
        if layer.has_params:
            parts.append(
                f'{{"kind":"{layer.kind}","in":{layer.n_in},"out":{layer.n_out},'
                f'"w":{_reals(layer.w)},"b":{_reals(layer.b)}}}'
            )
        else:
            parts.append(f'{{"kind":"{layer.kind}"}}')
    lines.append(",\n".join(parts))
    lines.append("]}\n")
    return "\n".join(lines)


def loads(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WeightFileError(f"not a {FORMAT} file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise WeightFileError(f"bad magic: expected format {FORMAT!r}")
    try:
        space = doc["space"]
        h, w, v = int(space["h"]), int(space["w"]), int(space["v"])
        specs = doc["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise WeightFileError(f"malformed header: {exc}") from None
    layers = []
    for i, spec in enumerate(specs):
        kind = spec.get("kind")
        if kind not in KINDS:
            raise WeightFileError(f"layer {i}: unknown kind {kind!r}")
        if kind not in CONV_KINDS and kind != "dense":
            layers.append(Layer(kind))
            continue
        n_in, n_out = int(spec["in"]), int(spec["out"])
        shape = (n_out, n_in, 3, 3) if kind in CONV_KINDS else (n_out, n_in)
        wv = np.asarray(spec.get("w", []), dtype=np.float64)
        bv = np.asarray(spec.get("b", []), dtype=np.float64)
        if wv.size != int(np.prod(shape)):
            raise WeightFileError(
                f"layer {i} ({kind}): weight length {wv.size}, expected {int(np.prod(shape))}"
            )
        if bv.size != n_out:
            raise WeightFileError(f"layer {i} ({kind}): bias length {bv.size}, expected {n_out}")
        layers.append(Layer(kind, n_in, n_out, wv.reshape(shape), bv))
    try:
        return Network(h, w, v, layers)
    except ValueError as exc:
        raise WeightFileError(str(exc)) from None


def save(net: Network, path) -> None:
    Path(path).write_text(dumps(net), encoding="utf-8")


def load(path) -> Network:
    return loads(Path(path).read_text(encoding="utf-8"))


def roundtrip_weights(net: Network, path) -> Network:
    save(net, path)
    return load(path)
