"""Input normalization helpers shared by the estimator layer.

Estimators accept skeleton data in three forms: a list of SkeletonSequence,
a list of ClipTensors, or an already-stacked clip batch [N, 2, P, 3, T, K].
These helpers classify and validate the input once so every estimator fits
and predicts through the same two code paths (sequences vs encoded batch).
"""

from __future__ import annotations

import numpy as np

from .data import ClipTensors, SkeletonSequence, stack_clips


def split_input(X) -> tuple[str, object]:
    """Classify estimator input: ("sequences", list) or ("batch", ndarray)."""
    if isinstance(X, SkeletonSequence):
        return "sequences", [X]
    if isinstance(X, ClipTensors):
        return "batch", stack_clips([X])
    if isinstance(X, (list, tuple)):
        if len(X) == 0:
            raise ValueError("X is empty")
        if all(isinstance(s, SkeletonSequence) for s in X):
            return "sequences", list(X)
        if all(isinstance(c, ClipTensors) for c in X):
            return "batch", stack_clips(list(X))
        raise TypeError(
            "X must be a homogeneous list of SkeletonSequence or ClipTensors"
        )
    batch = np.asarray(X, dtype=np.float64)
    if batch.ndim == 5:
        batch = batch[None]
    if batch.ndim != 6 or batch.shape[1] != 2 or batch.shape[3] != 3:
        raise ValueError(
            "array X must be a clip batch [N, 2, P, 3, T, K], "
            f"got shape {batch.shape}"
        )
    if batch.shape[0] == 0:
        raise ValueError("X is empty")
    if not np.isfinite(batch).all():
        raise ValueError("X contains non-finite values")
    return "batch", batch


def check_features(X, expected_dim: int | None = None) -> np.ndarray:
    """Validate a 2D float feature matrix."""
    x = np.asarray(X, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"X must be a non-empty [N, D] matrix, got shape {x.shape}")
    if expected_dim is not None and x.shape[1] != expected_dim:
        raise ValueError(f"X must have {expected_dim} columns, got {x.shape[1]}")
    if not np.isfinite(x).all():
        raise ValueError("X contains non-finite values")
    return x


def encode_labels(y, n_samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Map arbitrary labels to dense indices; returns (classes, indices)."""
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n_samples:
        raise ValueError(
            f"y must be a length-{n_samples} vector, got shape {y.shape}"
        )
    classes, indices = np.unique(y, return_inverse=True)
    if classes.size < 2:
        raise ValueError("y must contain at least 2 classes")
    return classes, indices.astype(np.intp)


def labels_from(X, y) -> np.ndarray:
    """Resolve labels: explicit ``y`` wins, else read from sequences."""
    if y is not None:
        return np.asarray(y)
    kind, data = split_input(X)
    if kind != "sequences":
        raise ValueError("y is required when X is not a list of sequences")
    return np.array([s.label for s in data])


def relabel_sequences(seqs: list[SkeletonSequence],
                      indices: np.ndarray) -> list[SkeletonSequence]:
    """Copy sequences with labels replaced by their dense class indices."""
    out = []
    for s, idx in zip(seqs, indices):
        if s.label == int(idx):
            out.append(s)
        else:
            out.append(SkeletonSequence(s.id, int(idx), s.coords, group=s.group))
    return out
