"""Regenerate the bundled mini-digits corpus (necode/data/mini_digits.npz).

16x16 grayscale digits 0-9: seven-segment-style strokes rendered as
1 px binary pixels at low contrast over a per-sample smooth random
texture, with +-1 px position jitter.  Thin low-contrast strokes keep
class margins small (the point of the corpus: a PSNR-bounded recoding
budget must be able to flip unauthorized models) while the smooth texture
gives recodings natural camouflage against learned denoisers.

Deterministic for a fixed seed.  Run from the repo root:

    python3 scripts/make_mini_digits.py

then update MINI_DIGITS_CHECKSUM in necode/nn/datasets.py if parameters
changed.
"""

import hashlib
import os

import numpy as np
from scipy.ndimage import gaussian_filter

SIZE = 16
SEED = 20240811
SIZES = {"train": 12000, "eval": 1000, "probe": 512}
LABEL_NOISE = 0.0

BACKGROUND = 0.45
CONTRAST = 0.055
CONTRAST_JITTER_FRAC = 0.1
TEXTURE_RMS = 0.15
TEXTURE_SMOOTH = 2.0
STROKE_WIDTH = 1.0
GLYPH_BLUR = 0.0
HARD_STROKES = True
JITTER = 1

# segment endpoints on a 2x3 node grid, (col, row) in pixel coordinates;
# the grid spans nearly the full canvas so strokes carry class information
# out to the border pixels
_TL, _TR = (2.0, 1.5), (14.0, 1.5)
_ML, _MR = (2.0, 8.0), (14.0, 8.0)
_BL, _BR = (2.0, 14.5), (14.0, 14.5)

SEGMENTS = {
    "A": (_TL, _TR),
    "B": (_TR, _MR),
    "C": (_MR, _BR),
    "D": (_BL, _BR),
    "E": (_ML, _BL),
    "F": (_TL, _ML),
    "G": (_ML, _MR),
}

DIGIT_SEGMENTS = {
    0: "ABCDEF",
    1: "BC",
    2: "ABGED",
    3: "ABGCD",
    4: "FGBC",
    5: "AFGCD",
    6: "AFGEDC",
    7: "ABC",
    8: "ABCDEFG",
    9: "ABFGCD",
}


def _segment_distance(px, py, a, b):
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / seg2, 0.0, 1.0)
    cx, cy = ax + t * dx, ay + t * dy
    return np.hypot(px - cx, py - cy)


def render_glyph(digit, dx=0.0, dy=0.0, width=STROKE_WIDTH, hard=False):
    """Stroke mask in [0, 1] for one digit, shifted by (dx, dy).

    Anti-aliased by default; hard=True renders binary pixel strokes, which
    concentrates class information at high spatial frequencies.
    """
    ys, xs = np.mgrid[0:SIZE, 0:SIZE]
    px = xs + 0.5 - dx
    py = ys + 0.5 - dy
    mask = np.zeros((SIZE, SIZE))
    for name in DIGIT_SEGMENTS[digit]:
        d = _segment_distance(px, py, *SEGMENTS[name])
        if hard:
            hit = (d <= width / 2.0 + 0.25).astype(float)
        else:
            hit = np.clip(width / 2.0 + 0.5 - d, 0.0, 1.0)
        mask = np.maximum(mask, hit)
    return mask


def render_sample(digit, rng, contrast=CONTRAST, texture_rms=TEXTURE_RMS,
                  texture_smooth=TEXTURE_SMOOTH, width=STROKE_WIDTH,
                  glyph_blur=GLYPH_BLUR, hard=HARD_STROKES, jitter=JITTER):
    noise = rng.normal(size=(SIZE, SIZE))
    texture = gaussian_filter(noise, texture_smooth, mode="nearest")
    texture *= texture_rms / max(texture.std(), 1e-12)
    dx = rng.integers(-jitter, jitter + 1)
    dy = rng.integers(-jitter, jitter + 1)
    c = contrast * (1.0 + rng.normal() * CONTRAST_JITTER_FRAC)
    glyph = render_glyph(digit, dx=dx, dy=dy, width=width, hard=hard)
    if glyph_blur > 0:
        glyph = gaussian_filter(glyph, glyph_blur, mode="nearest")
        glyph /= max(glyph.max(), 1e-12)
    img = BACKGROUND + texture + c * glyph
    return np.clip(img, 0.0, 1.0)


def build_arrays(contrast=CONTRAST, texture_rms=TEXTURE_RMS,
                 texture_smooth=TEXTURE_SMOOTH, width=STROKE_WIDTH,
                 glyph_blur=GLYPH_BLUR, hard=HARD_STROKES,
                 label_noise=LABEL_NOISE, jitter=JITTER):
    rng = np.random.default_rng(SEED)
    images, labels, split = [], [], []
    for name, count in SIZES.items():
        digits = rng.integers(0, 10, size=count)
        digits[:10] = np.arange(10)
        for d in digits:
            images.append(render_sample(int(d), rng, contrast=contrast,
                                        texture_rms=texture_rms,
                                        texture_smooth=texture_smooth,
                                        width=width, glyph_blur=glyph_blur,
                                        hard=hard, jitter=jitter))
            labels.append(int(d))
            split.append(name)
    images = np.round(np.stack(images) * 255.0).astype(np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    split = np.asarray(split)
    if label_noise > 0:
        # flip a fraction of train labels: a margin-control knob that pulls
        # decision boundaries close to the data without changing pixels
        train_idx = np.where(split == "train")[0]
        n_flip = int(round(label_noise * train_idx.size))
        flip = rng.choice(train_idx, size=n_flip, replace=False)
        labels = labels.copy()
        labels[flip] = (labels[flip] + rng.integers(1, 10, n_flip)) % 10
    return images, labels, split


def main():
    images, labels, split = build_arrays()
    out = os.path.join(os.path.dirname(__file__), os.pardir, "src", "necode",
                       "data", "mini_digits.npz")
    out = os.path.abspath(out)
    os.makedirs(os.path.dirname(out), exist_ok=True)
    np.savez_compressed(out, images=images, labels=labels, split=split)

    h = hashlib.blake2b(digest_size=8)
    for chunk in (images.tobytes(), labels.tobytes(),
                  "|".join(split.tolist()).encode()):
        h.update(chunk)
    checksum = h.hexdigest()
    size_kb = os.path.getsize(out) / 1024.0
    print(f"wrote {out} ({size_kb:.0f} KiB)")
    print(f"array checksum: {checksum}")


if __name__ == "__main__":
    main()
