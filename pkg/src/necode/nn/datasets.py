"""Toy datasets: seeded gaussian blobs and the bundled mini-digits corpus.

mini-digits is a 16x16 grayscale 10-class corpus committed in-repo
(necode/data/mini_digits.npz, regenerated by scripts/make_mini_digits.py).
Its array bytes are checksum-pinned so tests stay hermetic.
"""

import hashlib
import importlib.resources
from dataclasses import dataclass, field

import numpy as np

SPLITS = ("train", "eval", "probe")

MINI_DIGITS_RESOURCE = "data/mini_digits.npz"
# blake2b-64 over the raw image/label/split bytes of the bundled corpus.
MINI_DIGITS_CHECKSUM = "fdadc723ed6bf615"


def fingerprint_bytes(*chunks):
    """64-bit blake2b over byte chunks, as 16 hex chars."""
    h = hashlib.blake2b(digest_size=8)
    for c in chunks:
        h.update(c)
    return h.hexdigest()


@dataclass(frozen=True)
class LabeledDataset:
    """Inputs in [0, 1] with class labels and {train, eval, probe} tags."""

    inputs: np.ndarray
    labels: np.ndarray
    split: np.ndarray
    n_classes: int
    name: str = field(default="dataset")

    def __post_init__(self):
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError("inputs/labels length mismatch")
        if self.inputs.size and (self.inputs.min() < 0.0
                                 or self.inputs.max() > 1.0):
            raise ValueError("input values must lie in [0, 1]")
        if self.labels.size and self.labels.max() >= self.n_classes:
            raise ValueError("label exceeds class count")
        for s in SPLITS:
            if not np.any(self.split == s):
                raise ValueError(f"split {s!r} is empty")

    @property
    def layout(self):
        """Native per-sample shape."""
        return tuple(self.inputs.shape[1:])

    def split_arrays(self, name):
        """(inputs, labels) for one split tag."""
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        mask = self.split == name
        return self.inputs[mask], self.labels[mask]

    def fingerprint(self):
        """64-bit hash of the raw input/label/split bytes."""
        return fingerprint_bytes(
            np.ascontiguousarray(self.inputs).tobytes(),
            np.ascontiguousarray(self.labels).tobytes(),
            "|".join(self.split.tolist()).encode(),
        )


def _split_tags(sizes):
    tags = []
    for s in SPLITS:
        if sizes[s] < 1:
            raise ValueError(f"split {s!r} needs at least 1 sample")
        tags.extend([s] * sizes[s])
    return np.array(tags)


def _gaussian_blobs(seed, sizes, n_classes, n_features, mean_scale, noise):
    """Class-conditional gaussians squashed into [0, 1] by a fixed affine map.

    Two classes sit at +-mean_scale * e1; more classes occupy successive
    axes.  The affine map is data-independent, so separability is preserved.
    """
    if n_classes > n_features:
        raise ValueError("need n_features >= n_classes")
    rng = np.random.default_rng(seed)
    means = np.zeros((n_classes, n_features))
    if n_classes == 2:
        means[0, 0] = mean_scale
        means[1, 0] = -mean_scale
    else:
        for c in range(n_classes):
            means[c, c] = mean_scale
    total = sum(sizes[s] for s in SPLITS)
    labels = rng.integers(0, n_classes, size=total)
    # the training prefix always covers every class
    labels[:n_classes] = np.arange(n_classes)
    X = means[labels] + rng.normal(scale=noise, size=(total, n_features))
    half = mean_scale + 6.0 * noise
    X = np.clip((X + half) / (2.0 * half), 0.0, 1.0)
    return X, labels.astype(np.int64)


def _load_mini_digits():
    ref = importlib.resources.files("necode").joinpath(MINI_DIGITS_RESOURCE)
    with ref.open("rb") as fh:
        archive = np.load(fh)
        images = archive["images"]
        labels = archive["labels"]
        split = archive["split"]
    got = fingerprint_bytes(images.tobytes(), labels.tobytes(),
                            "|".join(split.tolist()).encode())
    if got != MINI_DIGITS_CHECKSUM:
        raise ValueError(
            f"mini-digits corpus checksum mismatch: {got} != "
            f"{MINI_DIGITS_CHECKSUM}"
        )
    return images, labels, split


def make_dataset(kind, seed=0, sizes=None, n_classes=2, n_features=64,
                 mean_scale=3.0, noise=0.5):
    """Build a LabeledDataset.

    kind="gaussian-blobs": seeded class-conditional gaussians (flat layout).
    kind="mini-digits": the bundled 16x16 corpus with its fixed split; sizes
    may shrink each split (taking a deterministic prefix), seed is unused.
    """
    if kind == "gaussian-blobs":
        sizes = dict(sizes or {"train": 256, "eval": 128, "probe": 64})
        X, labels = _gaussian_blobs(seed, sizes, n_classes, n_features,
                                    mean_scale, noise)
        return LabeledDataset(inputs=X, labels=labels,
                              split=_split_tags(sizes), n_classes=n_classes,
                              name="gaussian-blobs")
    if kind == "mini-digits":
        images, labels, split = _load_mini_digits()
        X = images.astype(np.float64) / 255.0
        X = X[:, None, :, :]  # single channel
        if sizes is not None:
            keep = np.zeros(len(labels), dtype=bool)
            for s in SPLITS:
                idx = np.flatnonzero(split == s)
                want = sizes.get(s, idx.size)
                if want > idx.size:
                    raise ValueError(
                        f"split {s!r} has only {idx.size} bundled samples"
                    )
                keep[idx[:want]] = True
            X, labels, split = X[keep], labels[keep], split[keep]
        return LabeledDataset(inputs=X, labels=labels.astype(np.int64),
                              split=split.astype(str), n_classes=10,
                              name="mini-digits")
    raise ValueError(f"unknown dataset kind {kind!r}")
