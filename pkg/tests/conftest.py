"""Shared helpers: finite-difference gradients and tiny dataset builders."""

import numpy as np
import pytest

from samediff import FullyLabeledDataset, TwoPartClassifier, substream


def rel_err(a, b):
    """Symmetric relative error between two gradient tensors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.linalg.norm(a - b) / (np.linalg.norm(a) + np.linalg.norm(b) + 1e-12)


def numeric_grad(f, x, h=1e-5):
    """Central-difference gradient of scalar f() with respect to array x,
    mutating x in place entry by entry."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2.0 * h)
    return g


def far_from_kinks(model, x, margin=1e-3, min_raw_norm=1e-2):
    """True when no relu preactivation sits within margin of zero (so a
    finite-difference step cannot cross a kink) and every raw representation
    has a safely nonzero norm (so the normalization stays smooth)."""
    v, cache = model.hidden.forward_cached(np.asarray(x, dtype=np.float64))
    if np.any(np.linalg.norm(v, axis=1) < min_raw_norm):
        return False
    for layer, (_, z) in zip(model.hidden.layers, cache):
        if layer.activation == "relu" and np.any(np.abs(z) < margin):
            return False
    return True


def tiny_model(rng, in_dim=3, hidden=(4,), rep_dim=2, class_count=2, radius=1.0,
               binary_head=None):
    seed = int(rng.integers(2**31))
    return TwoPartClassifier.build(
        in_dim, list(hidden), rep_dim, class_count, radius=radius,
        binary_head=binary_head, rng=substream(seed, "init"),
    )


def labeled_grid(n_classes=3, per_class=4, dim=3, seed=0):
    """Small deterministic labeled dataset with well-spread features."""
    rng = substream(seed, "tests", "grid")
    xs, ys = [], []
    for c in range(n_classes):
        xs.append(rng.normal(loc=3.0 * c, scale=1.0, size=(per_class, dim)))
        ys.append(np.full(per_class, c, dtype=np.int64))
    return FullyLabeledDataset.from_arrays(np.vstack(xs), np.concatenate(ys), n_classes)


@pytest.fixture
def rng42():
    return np.random.default_rng(42)
