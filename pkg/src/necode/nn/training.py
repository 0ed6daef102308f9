"""Deterministic minibatch SGD with momentum for the tiny model families."""

import numpy as np

from necode.nn.models import (TrainedModel, backward, forward, init_params,
                              param_views)

MOMENTUM = 0.9


def softmax_xent(logits, labels):
    """(mean loss, dlogits) for softmax cross-entropy."""
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    expl = np.exp(shifted)
    probs = expl / expl.sum(axis=1, keepdims=True)
    nll = -np.log(np.maximum(probs[np.arange(n), labels], 1e-300))
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return float(nll.mean()), dlogits / n


def train(spec, data, seed=0, epochs=20, lr=0.05, batch_size=64,
          split="train", name=None):
    """Train a model deterministically; returns a TrainedModel.

    Plain SGD, momentum 0.9, constant learning rate, seeded shuffling.
    epochs=0 returns the seeded initialization unchanged.  Aborts on
    non-finite loss.
    """
    X, y = data.split_arrays(split)
    if X.shape[1:] != tuple(spec.input_layout):
        raise ValueError(
            f"dataset layout {X.shape[1:]} does not match spec "
            f"{tuple(spec.input_layout)}"
        )
    params = init_params(spec, seed)
    velocity = np.zeros_like(params)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    n = X.shape[0]
    for epoch in range(epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            logits, cache = forward(spec, params, X[idx], want_cache=True)
            loss, dlogits = softmax_xent(logits, y[idx])
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch}"
                )
            grad = backward(spec, params, X[idx], cache, dlogits)
            velocity = MOMENTUM * velocity - lr * grad
            params = params + velocity
    return TrainedModel(spec=spec, params=params, seed=seed,
                        dataset_fingerprint=data.fingerprint(),
                        name=name or f"{spec.family}-s{seed}")
