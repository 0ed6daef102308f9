"""Extract the linearized first operator W from a trained model.

Each family's first transformation is expressed two ways: W acts on lifted
vectors (dense rows, conv patches, embedded patches), and W_eff is the
composed operator W o lift on the flattened native input.  W_eff is always
materialized: perturbations are synthesized in input space, which avoids
inconsistent per-patch values when patches overlap; the per-patch form
remains available (and exact) when the patches partition the input.

Biases are recorded but excluded from W; an alternative extraction mode
folds the bias into an augmented last column of W_eff (acting on [x; 1]).
"""

from dataclasses import dataclass

import numpy as np

from necode import _kernels
from necode.nn.models import param_views

LIFT_IDENTITY = "identity"
LIFT_PATCH = "patch-unfold"
LIFT_AUGMENTED = "identity-augmented"


@dataclass(frozen=True)
class FirstLayerOperator:
    """Linearized first transformation plus fold/unfold metadata.

    W: operator on lifted vectors (dense: hidden x n; conv: channels x
    c*k*k; attention: 3*embed x patch_dim).  W_eff: composed operator on the
    flattened native input.  bias_flat: recorded bias in flattened output
    order.  out_shape: native first-layer output shape.
    """

    family: str
    layout: tuple
    lift: str
    W: np.ndarray
    W_eff: np.ndarray
    bias_flat: np.ndarray
    out_shape: tuple
    kernel: tuple = None
    stride: tuple = None
    padding: tuple = None

    @property
    def input_dim(self):
        return self.W_eff.shape[1] - (1 if self.lift == LIFT_AUGMENTED else 0)

    @property
    def is_partition(self):
        """True when the lift splits the input into non-overlapping tiles."""
        if self.lift != LIFT_PATCH:
            return self.lift == LIFT_IDENTITY
        _, h, w = self.layout
        return (self.kernel == self.stride and self.padding == (0, 0)
                and h % self.kernel[0] == 0 and w % self.kernel[1] == 0)

    def apply_flat(self, X_flat):
        """First-layer output (flattened) for flattened native inputs."""
        if self.lift == LIFT_AUGMENTED:
            ones = np.ones((X_flat.shape[0], 1))
            X_flat = np.concatenate([X_flat, ones], axis=1)
        return X_flat @ self.W_eff.T + self.bias_flat

    def apply_native(self, X):
        """First-layer output in native shape for a native batch."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1:] != tuple(self.layout):
            raise ValueError(
                f"batch layout {X.shape[1:]} does not match operator "
                f"{tuple(self.layout)}"
            )
        out = self.apply_flat(X.reshape(X.shape[0], -1))
        return out.reshape(X.shape[0], *self.out_shape)


def unfold(x, kernel, stride, padding):
    """Column matrix of receptive fields of a native (c, h, w) tensor.

    Column p is output position p (row-major); rows are channel-major then
    kernel-row-major.  Zero padding.  Rejects kernels larger than the padded
    input.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"expected (c, h, w) input, got shape {x.shape}")
    return _kernels.unfold(x, tuple(kernel), tuple(stride), tuple(padding))


def fold_delta(cols, layout, kernel, stride, padding):
    """Least-squares preimage of patch columns under unfold.

    Scatter-add with overlap-count normalization: the exact inverse
    rearrangement when stride = kernel, the minimum-norm least-squares
    preimage otherwise.  Rejects inconsistent geometry.
    """
    return _kernels.fold_delta(np.asarray(cols, dtype=np.float64),
                               tuple(layout), tuple(kernel), tuple(stride),
                               tuple(padding))


def patch_index_map(layout, kernel, stride, padding):
    """(c*kh*kw, positions) map of flattened input indices, -1 for padding."""
    c, h, w = layout
    marker = np.arange(1, c * h * w + 1, dtype=np.float64).reshape(layout)
    cols = _kernels.unfold(marker, tuple(kernel), tuple(stride),
                           tuple(padding))
    return np.round(cols).astype(np.int64) - 1


def _compose_patch_operator(W_patch, layout, kernel, stride, padding):
    """Materialize W o unfold as a dense (rows * positions, n) matrix.

    Output row ordering is channel-major then position-row-major, matching
    the flattened native first-layer output.
    """
    idx = patch_index_map(layout, kernel, stride, padding)
    n = int(np.prod(layout))
    rows, P = W_patch.shape[0], idx.shape[1]
    W_eff = np.zeros((rows * P, n))
    for p in range(P):
        valid = idx[:, p] >= 0
        cols = idx[valid, p]
        for r in range(rows):
            W_eff[r * P + p, cols] = W_patch[r, valid]
    return W_eff


def _compose_token_operator(W_patch, layout, patch):
    """Block-diagonal composed operator for non-overlapping patch tokens.

    Output row ordering is token-major (token t's rows are contiguous),
    matching the flattened (tokens, features) first-layer output.
    """
    idx = patch_index_map(layout, (patch, patch), (patch, patch), (0, 0))
    n = int(np.prod(layout))
    rows, T = W_patch.shape[0], idx.shape[1]
    W_eff = np.zeros((rows * T, n))
    for t in range(T):
        for r in range(rows):
            W_eff[t * rows + r, idx[:, t]] = W_patch[r]
    return W_eff


def extract(model, fold_bias=False, attention_target="qkv"):
    """FirstLayerOperator of a TrainedModel.

    dense-front: W is the raw first weight matrix.  conv-front: W is the
    kernel reshaped to (channels x c*k*k) acting on unfolded patches.
    attention-front: W is the concatenated QKV projection composed with the
    patch embedding (attention_target="token-embedding" extracts the
    embedding alone).  fold_bias=True returns the composed operator
    augmented with the bias column, acting on [x; 1].
    """
    spec = model.spec
    v = param_views(spec, model.params)
    layout = tuple(spec.input_layout)
    if spec.family == "dense-front":
        W = v["W1"].copy()
        W_eff = W.copy()
        bias = v["b1"].copy()
        out_shape = (spec.hidden,)
        lift = LIFT_IDENTITY
        kernel = stride = padding = None
    elif spec.family == "conv-front":
        c = layout[0]
        k = spec.kernel
        W = v["K"].reshape(spec.channels, c * k * k).copy()
        kernel = (k, k)
        stride = (1, 1)
        padding = (0, 0)
        W_eff = _compose_patch_operator(W, layout, kernel, stride, padding)
        oh, ow, _, _ = spec.conv_dims()
        bias = np.repeat(v["b1"], oh * ow)
        out_shape = (spec.channels, oh, ow)
        lift = LIFT_PATCH
    elif spec.family == "attention-front":
        T, pdim = spec.attn_dims()
        d = spec.embed_dim
        Wqkv = np.concatenate([v["Wq"], v["Wk"], v["Wv"]], axis=0)
        tok_bias = v["bE"][None, :] + v["Pos"]  # (T, d)
        if attention_target == "qkv":
            W = Wqkv @ v["E"]
            per_token_bias = tok_bias @ Wqkv.T  # (T, 3d)
            out_feat = 3 * d
        elif attention_target == "token-embedding":
            W = v["E"].copy()
            per_token_bias = tok_bias
            out_feat = d
        else:
            raise ValueError(
                f"unknown attention target {attention_target!r}"
            )
        kernel = stride = (spec.patch, spec.patch)
        padding = (0, 0)
        W_eff = _compose_token_operator(W, layout, spec.patch)
        bias = per_token_bias.reshape(-1)
        out_shape = (T, out_feat)
        lift = LIFT_PATCH
    else:
        raise ValueError(f"unsupported family {spec.family!r}")

    if fold_bias:
        W_eff = np.concatenate([W_eff, bias[:, None]], axis=1)
        bias = np.zeros(W_eff.shape[0])
        lift = LIFT_AUGMENTED
    return FirstLayerOperator(family=spec.family, layout=layout, lift=lift,
                              W=W, W_eff=W_eff, bias_flat=bias,
                              out_shape=out_shape, kernel=kernel,
                              stride=stride, padding=padding)
