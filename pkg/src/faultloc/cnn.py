"""Small 1-D CNN and fully connected classifiers written directly in numpy.

Both network kinds share one calling convention: a spec object knows its
parameter shapes and implements ``forward(params, X, cache)`` and
``backward(params, cache, dlogits)`` on batches ``X`` of shape (B, n).
Parameters are a tuple of float64 arrays in ``spec.param_names`` order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractError

# (kernels, kernel_length) per conv layer of the published architectures
PRESET_LAYERS = {
    39: ((4, 3), (8, 3), (8, 2), (8, 2)),
    68: ((4, 5), (8, 5), (8, 3), (8, 3)),
}
PRESET_CLASSES = {39: 47, 68: 87}


@dataclass(frozen=True)
class ConvLayer:
    channels: int
    kernel: int
    pool: int = 2
    pool_stride: int = 2

    def __post_init__(self):
        if min(self.channels, self.kernel, self.pool, self.pool_stride) < 1:
            raise ContractError(f"conv layer sizes must be positive: {self}")


def conv_length(length: int, kernel: int) -> int:
    return length - kernel + 1


def pool_length(length: int, pool: int, stride: int) -> int:
    """Ceil-mode pooled length: the last window may be shorter than ``pool``."""
    return max(0, math.ceil((length - pool) / stride)) + 1


def _pool_index(length: int, pool: int, stride: int) -> np.ndarray:
    # clipping repeats the last element, so a short final window is a plain
    # max over the elements it actually covers
    out = pool_length(length, pool, stride)
    idx = np.arange(out)[:, None] * stride + np.arange(pool)[None, :]
    return np.minimum(idx, length - 1)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _as_batch(X, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n:
        raise ContractError(f"expected inputs of length {n}, got shape {X.shape}")
    return X


def _he_uniform(rng, shape, fan_in):
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass(frozen=True)
class ArchitectureSpec:
    """Conv -> ReLU -> max-pool stack, flatten, affine output, softmax."""
    input_length: int
    conv_layers: tuple[ConvLayer, ...]
    num_classes: int
    fc_width: int | None = None  # flattened length; derived when None
    kind = "cnn"

    def __post_init__(self):
        layers = tuple(c if isinstance(c, ConvLayer) else ConvLayer(*c) for c in self.conv_layers)
        object.__setattr__(self, "conv_layers", layers)
        if self.num_classes < 2:
            raise ContractError("need at least 2 classes")
        length = self.input_length
        for k, layer in enumerate(layers):
            length = conv_length(length, layer.kernel)
            if length < 1:
                raise ContractError(f"layer {k + 1}: kernel {layer.kernel} longer than its input")
            length = pool_length(length, layer.pool, layer.pool_stride)
        flat = self.flat_length
        if self.fc_width is None:
            object.__setattr__(self, "fc_width", flat)
        elif self.fc_width != flat:
            raise ContractError(f"declared fc_width {self.fc_width} != flattened length {flat}")

    @classmethod
    def preset(cls, system, num_classes: int | None = None) -> "ArchitectureSpec":
        system = int(str(system).removeprefix("ieee"))
        if system not in PRESET_LAYERS:
            raise LookupError(f"no preset architecture for system {system}")
        classes = PRESET_CLASSES[system] if num_classes is None else num_classes
        return cls(system, tuple(ConvLayer(c, k) for c, k in PRESET_LAYERS[system]), classes)

    def stages(self) -> list[tuple[str, int, int]]:
        """(name, channels, length) after every conv and pool stage."""
        out = [("input", 1, self.input_length)]
        length = self.input_length
        for k, layer in enumerate(self.conv_layers, start=1):
            length = conv_length(length, layer.kernel)
            out.append((f"conv{k}", layer.channels, length))
            length = pool_length(length, layer.pool, layer.pool_stride)
            out.append((f"pool{k}", layer.channels, length))
        return out

    def shape_chain(self) -> list[int]:
        """Lengths input -> conv/pool stages -> flatten -> classes."""
        return [s[2] for s in self.stages()] + [self.flat_length, self.num_classes]

    @property
    def flat_length(self) -> int:
        _, ch, length = self.stages()[-1]
        return ch * length

    @property
    def param_names(self) -> tuple[str, ...]:
        names = []
        for k in range(1, len(self.conv_layers) + 1):
            names += [f"W{k}", f"b{k}"]
        return tuple(names + ["W_o", "B_o"])

    def param_shapes(self) -> list[tuple[int, ...]]:
        shapes = []
        c_in = 1
        for layer in self.conv_layers:
            shapes += [(layer.channels, c_in, layer.kernel), (layer.channels,)]
            c_in = layer.channels
        return shapes + [(self.flat_length, self.num_classes), (self.num_classes,)]

    def init(self, seed) -> tuple[np.ndarray, ...]:
        rng = np.random.default_rng(seed)
        params = []
        for shape in self.param_shapes():
            if len(shape) == 1:
                params.append(np.zeros(shape))
            else:
                fan_in = int(np.prod(shape[1:])) if len(shape) == 3 else shape[0]
                params.append(_he_uniform(rng, shape, fan_in))
        return tuple(params)

    def forward(self, params, X, cache: bool = False):
        X = _as_batch(X, self.input_length)
        h = X[:, None, :]
        caches = []
        for k, layer in enumerate(self.conv_layers):
            W, b = params[2 * k], params[2 * k + 1]
            B, c_in, _ = h.shape
            win = sliding_window_view(h, layer.kernel, axis=2)  # (B, Cin, L', k)
            Lc = win.shape[2]
            cols = win.transpose(0, 2, 1, 3).reshape(B * Lc, c_in * layer.kernel)
            z = (cols @ W.reshape(W.shape[0], -1).T).reshape(B, Lc, -1).transpose(0, 2, 1)
            z = z + b[None, :, None]
            mask = z > 0
            r = z * mask
            idx = _pool_index(r.shape[2], layer.pool, layer.pool_stride)
            windows = r[:, :, idx]  # (B, C, Lp, pool)
            arg = windows.argmax(axis=3)
            p = np.take_along_axis(windows, arg[..., None], axis=3)[..., 0]
            if cache:
                caches.append((h.shape, cols, mask, idx[np.arange(idx.shape[0])[None, None, :], arg]))
            h = p
        flat = h.reshape(h.shape[0], -1)
        logits = flat @ params[-2] + params[-1]
        if cache:
            return logits, (caches, flat, h.shape)
        return logits

    def backward(self, params, cache, dlogits):
        caches, flat, pshape = cache
        grads = [None] * len(params)
        grads[-2] = flat.T @ dlogits
        grads[-1] = dlogits.sum(axis=0)
        dh = (dlogits @ params[-2].T).reshape(pshape)
        for k in range(len(self.conv_layers) - 1, -1, -1):
            layer = self.conv_layers[k]
            in_shape, cols, mask, src = caches[k]
            B, C, Lr = mask.shape
            # route pooled gradients back to the argmax positions
            offs = (np.arange(B * C) * Lr).reshape(B, C, 1)
            dr = np.bincount((src + offs).ravel(), weights=dh.ravel(), minlength=B * C * Lr)
            dz = dr.reshape(B, C, Lr) * mask
            W = params[2 * k]
            dz2 = dz.transpose(0, 2, 1).reshape(B * Lr, C)
            grads[2 * k] = (dz2.T @ cols).reshape(W.shape)
            grads[2 * k + 1] = dz.sum(axis=(0, 2))
            if k > 0:
                dcols = (dz2 @ W.reshape(C, -1)).reshape(B, Lr, in_shape[1], layer.kernel)
                dh = np.zeros(in_shape)
                for t in range(layer.kernel):
                    dh[:, :, t:t + Lr] += dcols[:, :, :, t].transpose(0, 2, 1)
        return tuple(grads)


@dataclass(frozen=True)
class MLPSpec:
    """Fully connected baseline: n -> hidden... -> classes with ReLU."""
    input_length: int
    num_classes: int
    hidden: tuple[int, ...] = (32, 16)
    kind = "nn"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.num_classes < 2 or min(self.hidden, default=1) < 1:
            raise ContractError("bad fully connected sizes")

    def shape_chain(self) -> list[int]:
        return [self.input_length, *self.hidden, self.num_classes]

    @property
    def param_names(self) -> tuple[str, ...]:
        names = []
        for k in range(1, len(self.hidden) + 2):
            names += [f"W{k}", f"b{k}"]
        return tuple(names)

    def param_shapes(self) -> list[tuple[int, ...]]:
        dims = self.shape_chain()
        shapes = []
        for a, b in zip(dims[:-1], dims[1:]):
            shapes += [(a, b), (b,)]
        return shapes

    def init(self, seed) -> tuple[np.ndarray, ...]:
        rng = np.random.default_rng(seed)
        return tuple(np.zeros(s) if len(s) == 1 else _he_uniform(rng, s, s[0])
                     for s in self.param_shapes())

    def forward(self, params, X, cache: bool = False):
        h = _as_batch(X, self.input_length)
        acts = []
        nlayers = len(params) // 2
        for k in range(nlayers):
            acts.append(h)
            z = h @ params[2 * k] + params[2 * k + 1]
            h = np.maximum(z, 0.0) if k < nlayers - 1 else z
        return (h, acts) if cache else h

    def backward(self, params, cache, dlogits):
        acts = cache
        grads = [None] * len(params)
        d = dlogits
        for k in range(len(params) // 2 - 1, -1, -1):
            h = acts[k]
            grads[2 * k] = h.T @ d
            grads[2 * k + 1] = d.sum(axis=0)
            if k > 0:
                d = (d @ params[2 * k].T) * (h > 0)
        return tuple(grads)


def check_params(spec, params) -> tuple[np.ndarray, ...]:
    params = tuple(np.asarray(p, dtype=float) for p in params)
    shapes = spec.param_shapes()
    if len(params) != len(shapes):
        raise ContractError(f"expected {len(shapes)} parameter arrays, got {len(params)}")
    for name, p, s in zip(spec.param_names, params, shapes):
        if p.shape != tuple(s):
            raise ContractError(f"{name}: shape {p.shape} != {tuple(s)}")
    return params


def zero_params(spec) -> tuple[np.ndarray, ...]:
    return tuple(np.zeros(s) for s in spec.param_shapes())


def sq_norm(params) -> float:
    return float(sum(np.vdot(p, p) for p in params))


def loss(spec, params, X, y, lam: float = 0.0) -> float:
    """Mean negative log-likelihood plus ``lam`` times the squared parameter norm."""
    y = np.asarray(y, dtype=int)
    if y.size == 0:
        raise ContractError("empty batch")
    logp = _log_softmax(spec.forward(params, X))
    return float(-logp[np.arange(y.size), y].mean() + lam * sq_norm(params))


def loss_and_grad(spec, params, X, y, lam: float = 0.0):
    y = np.asarray(y, dtype=int)
    if y.size == 0:
        raise ContractError("empty batch")
    logits, cache = spec.forward(params, X, cache=True)
    logp = _log_softmax(logits)
    rows = np.arange(y.size)
    value = -logp[rows, y].mean() + lam * sq_norm(params)
    dlogits = np.exp(logp)
    dlogits[rows, y] -= 1.0
    dlogits /= y.size
    grads = spec.backward(params, cache, dlogits)
    grads = tuple(g + 2.0 * lam * p for g, p in zip(grads, params))
    return float(value), grads


@dataclass(frozen=True)
class Prediction:
    probabilities: np.ndarray = field(repr=False)
    ranking: np.ndarray = field(repr=False)

    @property
    def top(self) -> int:
        return int(self.ranking[0])


def rank_classes(probabilities) -> np.ndarray:
    """Descending-probability order; ties go to the lower class index."""
    p = np.asarray(probabilities, dtype=float)
    return np.argsort(-p, axis=-1, kind="stable")


def predict_proba(spec, params, X) -> np.ndarray:
    return _softmax(spec.forward(params, X))


def predict(spec, params, x) -> Prediction:
    p = predict_proba(spec, params, x)[0]
    return Prediction(p, rank_classes(p))


@dataclass(frozen=True)
class Model:
    """A classifier spec together with its trained parameters."""
    spec: object
    params: tuple = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "params", check_params(self.spec, self.params))

    def predict_proba(self, X) -> np.ndarray:
        return predict_proba(self.spec, self.params, X)

    def predict(self, x) -> Prediction:
        return predict(self.spec, self.params, x)

    def rankings(self, X) -> np.ndarray:
        return rank_classes(self.predict_proba(X))
