"""Input-side preprocessing operators for robustness evaluation.

All operators keep the native layout: crops are followed by a bilinear
resize back to the original dimensions, and resize is a down-up round
trip.  Every operator is deterministic given its parameters (random-crop
draws its offsets from a recorded seed).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.fft import dctn, idctn

PREPROCESS_KINDS = (
    "resize",
    "center-crop",
    "random-crop",
    "jpeg-like-quantize",
    "gaussian-blur",
    "projection-back",
    "denoiser",
)

# the preprocessing kinds apply_preprocess handles itself; the attack
# kinds are listed above for provenance labels but run through the
# dedicated attack entry points
_PURE_KINDS = PREPROCESS_KINDS[:5]

# default strengths for the robustness protocol, one op per pure kind.
# quantize and blur use the strongest settings that keep every stock
# model's authorized accuracy within tolerance (8-bit rounding and
# sigma 0.3; finer DCT tables and wider kernels already cost 4+
# points).  resize and the crops have no strength that preserves the
# task at all on a 16x16 raster (any non-identity resampling displaces
# more energy than the low-contrast strokes carry, clean accuracy
# included), so they keep the conventional strengths and their
# authorized-retention gate records that instrument limit
DEFAULT_STRENGTHS = {
    "resize": {"scale": 0.75},
    "center-crop": {"size": 14},
    "random-crop": {"size": 14, "seed": 0},
    "jpeg-like-quantize": {"quality": 100},
    "gaussian-blur": {"sigma": 0.3},
}


def default_ops():
    """The five pure preprocessing ops at their default strengths."""
    return tuple(PreprocessOp(kind, dict(params))
                 for kind, params in DEFAULT_STRENGTHS.items())

_REQUIRED = {
    "resize": {"scale"},
    "center-crop": {"size"},
    "random-crop": {"size"},
    "jpeg-like-quantize": {"quality"},
    "gaussian-blur": {"sigma"},
    "projection-back": set(),
    "denoiser": set(),
}
_OPTIONAL = {
    "random-crop": {"seed"},
    "projection-back": {"basis", "rank"},
    "denoiser": {"mode"},
}

# standard JPEG luminance quantization table (quality 50 reference)
_Q_LUM = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.float64)


@dataclass(frozen=True)
class PreprocessOp:
    """One input-side operator: a kind plus its parameters.

    Parameters
    ----------
    kind : str
        One of PREPROCESS_KINDS.
    params : dict
        Kind-specific parameters: resize needs ``scale``, crops need
        ``size`` (random-crop also accepts ``seed``, default 0),
        jpeg-like-quantize needs ``quality`` in [1, 100], gaussian-blur
        needs ``sigma`` > 0.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PREPROCESS_KINDS:
            raise ValueError(f"unknown preprocess kind {self.kind!r}")
        required = _REQUIRED[self.kind]
        allowed = required | _OPTIONAL.get(self.kind, set())
        missing = required - set(self.params)
        extra = set(self.params) - allowed
        if missing:
            raise ValueError(
                f"{self.kind} requires parameters {sorted(missing)}")
        if extra:
            raise ValueError(
                f"{self.kind} got unexpected parameters {sorted(extra)}")
        p = self.params
        if self.kind == "resize" and not 0.0 < p["scale"] <= 4.0:
            raise ValueError("scale must be in (0, 4]")
        if self.kind in ("center-crop", "random-crop"):
            if int(p["size"]) != p["size"] or p["size"] < 1:
                raise ValueError("size must be a positive integer")
        if self.kind == "jpeg-like-quantize":
            if int(p["quality"]) != p["quality"] or not 1 <= p["quality"] <= 100:
                raise ValueError("quality must be an integer in [1, 100]")
        if self.kind == "gaussian-blur" and not p["sigma"] > 0:
            raise ValueError("sigma must be positive")

    @property
    def label(self):
        """Deterministic provenance string, e.g. ``resize(scale=0.75)``."""
        if not self.params:
            return self.kind
        inner = ",".join(f"{k}={self.params[k]!r}"
                         for k in sorted(self.params))
        return f"{self.kind}({inner})"


def _as_nchw(batch):
    """(batch as (N, C, H, W) float64 view, restore function)."""
    X = np.asarray(batch, dtype=np.float64)
    if X.ndim == 3:
        return X[:, None], lambda out: out[:, 0]
    if X.ndim == 4:
        return X, lambda out: out
    raise ValueError(
        f"batch must have a 2-d spatial layout, got shape {X.shape}")


def bilinear_resize(images, out_h, out_w):
    """Center-aligned bilinear resampling of an (N, C, H, W) batch.

    When the output dimensions equal the input dimensions the sample
    positions land exactly on the source pixels and the result is
    bit-equal to the input.
    """
    n, c, h, w = images.shape

    def axis_weights(size, out_size):
        src = (np.arange(out_size) + 0.5) * (size / out_size) - 0.5
        lo = np.floor(src)
        frac = src - lo
        i0 = np.clip(lo, 0, size - 1).astype(np.intp)
        i1 = np.clip(lo + 1, 0, size - 1).astype(np.intp)
        return i0, i1, frac

    r0, r1, fr = axis_weights(h, out_h)
    c0, c1, fc = axis_weights(w, out_w)
    top = images[:, :, r0][:, :, :, c0]
    rows = top + fr[None, None, :, None] * (images[:, :, r1][:, :, :, c0]
                                            - top)
    right = images[:, :, r0][:, :, :, c1]
    rows_r = right + fr[None, None, :, None] * (
        images[:, :, r1][:, :, :, c1] - right)
    return rows + fc[None, None, None, :] * (rows_r - rows)


def crop_offsets(op, n, h, w):
    """Per-sample (row, col) crop origins an op will use on an N-batch."""
    size = int(op.params["size"])
    if op.kind == "center-crop":
        return np.broadcast_to(
            np.array([(h - size) // 2, (w - size) // 2]), (n, 2)).copy()
    if op.kind == "random-crop":
        rng = np.random.default_rng(op.params.get("seed", 0))
        rows = rng.integers(0, h - size + 1, size=n)
        cols = rng.integers(0, w - size + 1, size=n)
        return np.stack([rows, cols], axis=1)
    raise ValueError(f"{op.kind} takes no crop offsets")


def _crop(X, op):
    n, c, h, w = X.shape
    size = int(op.params["size"])
    if size > h or size > w:
        raise ValueError(f"crop size {size} exceeds input {h}x{w}")
    offsets = crop_offsets(op, n, h, w)
    if size == h and size == w:
        return X.copy()
    rows = offsets[:, 0, None] + np.arange(size)
    cols = offsets[:, 1, None] + np.arange(size)
    patch = X[np.arange(n)[:, None, None, None],
              np.arange(c)[None, :, None, None],
              rows[:, None, :, None], cols[:, None, None, :]]
    return bilinear_resize(patch, h, w)


def _resize(X, op):
    n, c, h, w = X.shape
    scale = float(op.params["scale"])
    mid_h = max(1, int(round(h * scale)))
    mid_w = max(1, int(round(w * scale)))
    if mid_h == h and mid_w == w:
        return X.copy()
    return bilinear_resize(bilinear_resize(X, mid_h, mid_w), h, w)


def _jpeg_quantize(X, op):
    quality = int(op.params["quality"])
    if quality == 100:
        # quantization ceiling: plain 8-bit rounding, no transform error
        return np.round(X * 255.0) / 255.0
    if quality < 50:
        scale = 5000.0 / quality
    else:
        scale = 200.0 - 2.0 * quality
    qtable = np.clip(np.floor((_Q_LUM * scale + 50.0) / 100.0), 1, 255)
    n, c, h, w = X.shape
    ph, pw = (-h) % 8, (-w) % 8
    P = np.pad(X, ((0, 0), (0, 0), (0, ph), (0, pw)), mode="edge")
    H, W = h + ph, w + pw
    levels = P * 255.0 - 128.0
    blocks = levels.reshape(n, c, H // 8, 8, W // 8, 8).transpose(
        0, 1, 2, 4, 3, 5)
    coeff = dctn(blocks, type=2, norm="ortho", axes=(-2, -1))
    coeff = np.round(coeff / qtable) * qtable
    back = idctn(coeff, type=2, norm="ortho", axes=(-2, -1))
    out = back.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, H, W)
    return np.clip((out[:, :, :h, :w] + 128.0) / 255.0, 0.0, 1.0)


def _blur(X, op):
    sigma = float(op.params["sigma"])
    return ndimage.gaussian_filter(X, sigma=(0, 0, sigma, sigma),
                                   mode="reflect")


def apply_preprocess(batch, op):
    """Apply one preprocessing operator to a native-layout batch.

    Parameters
    ----------
    batch : ndarray
        Samples shaped (N, H, W) or (N, C, H, W); values in [0, 1].
    op : PreprocessOp
        One of the five pure preprocessing kinds.  The attack kinds
        (projection-back, denoiser) run through attack_projection_back
        and attack_denoiser instead.

    Returns
    -------
    ndarray
        Same shape and dtype float64.
    """
    if op.kind not in _PURE_KINDS:
        raise ValueError(
            f"{op.kind} is an attack; use the attack_* entry points")
    X, restore = _as_nchw(batch)
    if X.shape[0] == 0:
        return np.asarray(batch, dtype=np.float64).copy()
    fn = {"resize": _resize, "center-crop": _crop, "random-crop": _crop,
          "jpeg-like-quantize": _jpeg_quantize, "gaussian-blur": _blur}
    return restore(fn[op.kind](X, op))
