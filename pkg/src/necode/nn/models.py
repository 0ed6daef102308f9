"""Three tiny model families with explicit forward passes.

dense-front: flatten -> linear -> activation -> linear head.
conv-front: single conv -> activation -> 2x2 average pool -> linear head.
attention-front: patch embedding + positional bias -> one self-attention
block (QKV, softmax mixing) -> linear head over flattened tokens.

Parameters live in one flat float64 vector; param_views() exposes named
views into it.  All forwards are deterministic and vectorized over batches.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

FAMILIES = ("dense-front", "conv-front", "attention-front")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description for one of the three families."""

    family: str
    input_layout: tuple
    n_classes: int
    activation: str = "relu"
    hidden: int = 64          # dense-front
    channels: int = 1         # conv-front output channels
    kernel: int = 3           # conv-front kernel size (stride fixed at 1)
    embed_dim: int = 8        # attention-front token width
    patch: int = 4            # attention-front patch size
    init_gain: float = 1.0    # first-operator init scale multiplier

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.init_gain > 0.0:
            raise ValueError("init_gain must be positive")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if any(d < 1 for d in self.input_layout):
            raise ValueError("input dims must be >= 1")
        if self.family == "dense-front":
            if self.hidden < 1:
                raise ValueError("hidden must be >= 1")
        else:
            if len(self.input_layout) != 3:
                raise ValueError(f"{self.family} needs a (c, h, w) layout")
            c, h, w = self.input_layout
            if self.family == "conv-front":
                if self.kernel > h or self.kernel > w:
                    raise ValueError("kernel exceeds input extent")
            if self.family == "attention-front":
                if h % self.patch or w % self.patch:
                    raise ValueError("patch must tile the input exactly")

    @property
    def input_dim(self):
        return int(np.prod(self.input_layout))

    def conv_dims(self):
        """(oh, ow, pooled_h, pooled_w) of the conv stage."""
        _, h, w = self.input_layout
        oh, ow = h - self.kernel + 1, w - self.kernel + 1
        return oh, ow, oh // 2, ow // 2

    def attn_dims(self):
        """(tokens, patch_dim) of the attention stage."""
        c, h, w = self.input_layout
        return (h // self.patch) * (w // self.patch), c * self.patch ** 2

    def param_shapes(self):
        """Ordered (name, shape) pairs defining the flat parameter layout."""
        n_in, n_out = self.input_dim, self.n_classes
        if self.family == "dense-front":
            return [("W1", (self.hidden, n_in)), ("b1", (self.hidden,)),
                    ("W2", (n_out, self.hidden)), ("b2", (n_out,))]
        if self.family == "conv-front":
            c = self.input_layout[0]
            _, _, ph, pw = self.conv_dims()
            return [("K", (self.channels, c, self.kernel, self.kernel)),
                    ("b1", (self.channels,)),
                    ("W2", (n_out, self.channels * ph * pw)),
                    ("b2", (n_out,))]
        T, pdim = self.attn_dims()
        d = self.embed_dim
        return [("E", (d, pdim)), ("bE", (d,)), ("Pos", (T, d)),
                ("Wq", (d, d)), ("Wk", (d, d)), ("Wv", (d, d)),
                ("W2", (n_out, T * d)), ("b2", (n_out,))]

    @property
    def param_count(self):
        return sum(int(np.prod(s)) for _, s in self.param_shapes())


@dataclass(frozen=True)
class TrainedModel:
    """A ModelSpec plus its flat parameter vector and provenance."""

    spec: ModelSpec
    params: np.ndarray
    seed: int = 0
    dataset_fingerprint: str = ""
    name: str = field(default="model")

    def __post_init__(self):
        if self.params.shape != (self.spec.param_count,):
            raise ValueError(
                f"parameter count {self.params.shape} does not match spec "
                f"({self.spec.param_count},)"
            )
        if not np.isfinite(self.params).all():
            raise ValueError("parameters contain non-finite values")


def param_views(spec, flat):
    """Named views into a flat parameter vector (shared memory)."""
    views, offset = {}, 0
    for name, shape in spec.param_shapes():
        size = int(np.prod(shape))
        views[name] = flat[offset:offset + size].reshape(shape)
        offset += size
    return views


_FIRST_OPERATOR_PARAMS = frozenset({"W1", "K", "E"})


def init_params(spec, seed):
    """He-style seeded initialization, biases zero.

    Tensors feeding the first linear operator are scaled by
    ``spec.init_gain``; a gain above 1 slows their relative drift under
    SGD, keeping the operator close to its seed-specific draw.
    """
    rng = np.random.default_rng(seed)
    flat = np.zeros(spec.param_count)
    views = param_views(spec, flat)
    for name, shape in spec.param_shapes():
        if name.startswith(("b", "Pos")):
            continue
        fan_in = int(np.prod(shape[1:]))
        scale = np.sqrt(2.0 / fan_in)
        if name in _FIRST_OPERATOR_PARAMS:
            scale *= spec.init_gain
        views[name][...] = rng.normal(scale=scale, size=shape)
    return flat


def _activate(spec, Z):
    return np.maximum(Z, 0.0) if spec.activation == "relu" else np.tanh(Z)


def _activate_grad(spec, Z, A):
    return (Z > 0.0).astype(np.float64) if spec.activation == "relu" \
        else 1.0 - A * A


def check_batch(spec, X):
    """Validate native batch layout and return a float64 view."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1:] != tuple(spec.input_layout):
        raise ValueError(
            f"batch layout {X.shape[1:]} does not match spec "
            f"{tuple(spec.input_layout)}"
        )
    return X


def conv_windows(spec, X):
    """(N, c, oh, ow, k, k) sliding windows of a conv-front batch."""
    k = spec.kernel
    return sliding_window_view(X, (k, k), axis=(2, 3))


def attn_patches(spec, X):
    """(N, tokens, patch_dim) non-overlapping patches, channel-major rows."""
    n = X.shape[0]
    c, h, w = spec.input_layout
    p = spec.patch
    P = X.reshape(n, c, h // p, p, w // p, p)
    P = P.transpose(0, 2, 4, 1, 3, 5)
    return P.reshape(n, (h // p) * (w // p), c * p * p)


def forward(spec, params, X, want_cache=False):
    """Logits for a native batch; optionally the cache for backprop."""
    X = check_batch(spec, X)
    v = param_views(spec, params)
    n = X.shape[0]
    cache = {}
    if spec.family == "dense-front":
        flat = X.reshape(n, -1)
        Z1 = flat @ v["W1"].T + v["b1"]
        A1 = _activate(spec, Z1)
        logits = A1 @ v["W2"].T + v["b2"]
        cache = {"flat": flat, "Z1": Z1, "A1": A1}
    elif spec.family == "conv-front":
        win = conv_windows(spec, X)
        Z1 = np.einsum("ncijkl,ockl->noij", win, v["K"],
                       optimize=True) + v["b1"][None, :, None, None]
        A1 = _activate(spec, Z1)
        oh, ow, ph, pw = spec.conv_dims()
        blocks = A1[:, :, : 2 * ph, : 2 * pw].reshape(
            n, spec.channels, ph, 2, pw, 2)
        pooled = blocks.max(axis=(3, 5))
        flat = pooled.reshape(n, -1)
        logits = flat @ v["W2"].T + v["b2"]
        cache = {"win": win, "Z1": Z1, "A1": A1, "blocks": blocks,
                 "pooled": pooled, "flat": flat}
    else:
        P = attn_patches(spec, X)
        Tok = P @ v["E"].T + v["bE"] + v["Pos"][None]
        Q = Tok @ v["Wq"].T
        K = Tok @ v["Wk"].T
        Vv = Tok @ v["Wv"].T
        scale = 1.0 / np.sqrt(spec.embed_dim)
        S = (Q @ K.transpose(0, 2, 1)) * scale
        S = S - S.max(axis=-1, keepdims=True)
        expS = np.exp(S)
        A = expS / expS.sum(axis=-1, keepdims=True)
        O = A @ Vv
        flat = O.reshape(n, -1)
        logits = flat @ v["W2"].T + v["b2"]
        cache = {"P": P, "Tok": Tok, "Q": Q, "K": K, "Vv": Vv, "A": A,
                 "flat": flat, "scale": scale}
    if not np.isfinite(logits).all():
        raise FloatingPointError("non-finite logits")
    return (logits, cache) if want_cache else logits


def first_layer_output(spec, params, X):
    """Pre-activation output of the first linear transformation.

    dense-front: (N, hidden).  conv-front: (N, channels, oh, ow).
    attention-front: (N, tokens, 3 * embed_dim), the concatenated QKV rows.
    """
    X = check_batch(spec, X)
    v = param_views(spec, params)
    if spec.family == "dense-front":
        return X.reshape(X.shape[0], -1) @ v["W1"].T + v["b1"]
    if spec.family == "conv-front":
        win = conv_windows(spec, X)
        return np.einsum("ncijkl,ockl->noij", win, v["K"],
                         optimize=True) + v["b1"][None, :, None, None]
    P = attn_patches(spec, X)
    Tok = P @ v["E"].T + v["bE"] + v["Pos"][None]
    return np.concatenate(
        [Tok @ v["Wq"].T, Tok @ v["Wk"].T, Tok @ v["Wv"].T], axis=2)


def backward(spec, params, X, cache, dlogits):
    """Gradient of the summed-logit loss term w.r.t. the flat parameters."""
    v = param_views(spec, params)
    grad = np.zeros_like(params)
    g = param_views(spec, grad)
    n = X.shape[0]
    if spec.family == "dense-front":
        flat, Z1, A1 = cache["flat"], cache["Z1"], cache["A1"]
        g["W2"][...] = dlogits.T @ A1
        g["b2"][...] = dlogits.sum(axis=0)
        dA1 = dlogits @ v["W2"]
        dZ1 = dA1 * _activate_grad(spec, Z1, A1)
        g["W1"][...] = dZ1.T @ flat
        g["b1"][...] = dZ1.sum(axis=0)
    elif spec.family == "conv-front":
        win, Z1, A1, blocks, pooled = (cache["win"], cache["Z1"],
                                       cache["A1"], cache["blocks"],
                                       cache["pooled"])
        oh, ow, ph, pw = spec.conv_dims()
        g["W2"][...] = dlogits.T @ cache["flat"]
        g["b2"][...] = dlogits.sum(axis=0)
        dpool = (dlogits @ v["W2"]).reshape(n, spec.channels, ph, pw)
        # max-pool subgradient: route to the max entry, split ties evenly
        mask = blocks == pooled[:, :, :, None, :, None]
        mask = mask / mask.sum(axis=(3, 5), keepdims=True)
        dblocks = mask * dpool[:, :, :, None, :, None]
        dA1 = np.zeros_like(A1)
        dA1[:, :, : 2 * ph, : 2 * pw] = dblocks.reshape(
            n, spec.channels, 2 * ph, 2 * pw)
        dZ1 = dA1 * _activate_grad(spec, Z1, A1)
        g["K"][...] = np.einsum("ncijkl,noij->ockl", win, dZ1, optimize=True)
        g["b1"][...] = dZ1.sum(axis=(0, 2, 3))
    else:
        P, Tok, Q, K, Vv, A, flat, scale = (
            cache["P"], cache["Tok"], cache["Q"], cache["K"], cache["Vv"],
            cache["A"], cache["flat"], cache["scale"])
        g["W2"][...] = dlogits.T @ flat
        g["b2"][...] = dlogits.sum(axis=0)
        dO = (dlogits @ v["W2"]).reshape(Tok.shape)
        dA = dO @ Vv.transpose(0, 2, 1)
        dVv = A.transpose(0, 2, 1) @ dO
        dS = (dA - (dA * A).sum(axis=-1, keepdims=True)) * A
        dQ = (dS @ K) * scale
        dK = (dS.transpose(0, 2, 1) @ Q) * scale
        dTok = dQ @ v["Wq"] + dK @ v["Wk"] + dVv @ v["Wv"]
        g["Wq"][...] = np.einsum("ntd,nte->de", dQ, Tok, optimize=True)
        g["Wk"][...] = np.einsum("ntd,nte->de", dK, Tok, optimize=True)
        g["Wv"][...] = np.einsum("ntd,nte->de", dVv, Tok, optimize=True)
        g["E"][...] = np.einsum("ntd,ntp->dp", dTok, P, optimize=True)
        g["bE"][...] = dTok.sum(axis=(0, 1))
        g["Pos"][...] = dTok.sum(axis=0)
    return grad


def predict(model, X):
    """(predicted class indices, logits) for a native batch."""
    logits = forward(model.spec, model.params, X)
    return logits.argmax(axis=1), logits


def accuracy(model, data, split="eval"):
    """Mean correct-prediction fraction over one split; rejects empty."""
    X, y = data.split_arrays(split)
    if X.shape[0] == 0:
        raise ValueError(f"split {split!r} is empty")
    pred, _ = predict(model, X)
    return float(np.mean(pred == y))
