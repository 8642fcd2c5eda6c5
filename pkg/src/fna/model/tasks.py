"""Synthetic sequence-classification tasks with deterministic labels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# three-mode planar mixture, covariance I/4
MIXTURE_MODES = np.array([[3.0, 0.0], [-3.0, 0.0], [0.0, math.sqrt(3.0)]])
MIXTURE_STD = 0.5

TASK_KINDS = ("cluster_label", "long_range_pair")


@dataclass
class SyntheticTask:
    kind: str
    inputs: np.ndarray  # (N, n, d_in)
    labels: np.ndarray  # (N,)
    n_classes: int
    seed: int
    train_idx: np.ndarray
    test_idx: np.ndarray

    @property
    def n(self) -> int:
        return self.inputs.shape[1]

    @property
    def d_in(self) -> int:
        return self.inputs.shape[2]

    def split(self, name):
        idx = self.train_idx if name == "train" else self.test_idx
        return self.inputs[idx], self.labels[idx]


def sample_mixture(n, seed=None, rng=None, modes=MIXTURE_MODES, std=MIXTURE_STD):
    """``n`` points from the equal-weight Gaussian mixture; returns (X, mode)."""
    rng = np.random.default_rng(seed) if rng is None else rng
    comp = rng.integers(0, len(modes), size=n)
    X = modes[comp] + std * rng.standard_normal((n, modes.shape[1]))
    return X, comp


def nearest_mode(X, modes=MIXTURE_MODES):
    d2 = ((np.asarray(X)[..., None, :] - modes) ** 2).sum(-1)
    return d2.argmin(-1)


def _balanced_labels(N, k, rng):
    return rng.permutation(np.arange(N) % k)


def _split(N, rng, train_frac=0.8):
    perm = rng.permutation(N)
    cut = int(round(train_frac * N))
    return np.sort(perm[:cut]), np.sort(perm[cut:])


def _cluster_label(n, d, N, rng, modes):
    # each sequence is drawn around one mode; label = mode nearest the mean
    if d < modes.shape[1]:
        raise ValueError(f"cluster task needs d >= {modes.shape[1]}")
    cls = _balanced_labels(N, len(modes), rng)
    pts = modes[cls][:, None, :] + MIXTURE_STD * rng.standard_normal((N, n, modes.shape[1]))
    labels = nearest_mode(pts.mean(1), modes)
    inputs = np.zeros((N, n, d))
    inputs[..., : modes.shape[1]] = pts
    return inputs, labels, len(modes)


def _long_range_pair(n, d, N, rng):
    # one-hot tokens over d symbols; symbols 0..g-1 are "anchors", the rest
    # fillers. Label is 1 when the first and last anchors share a group.
    if d < 4:
        raise ValueError("long_range_pair needs at least 4 symbols")
    n_anchor = max(2, d // 2)
    labels = _balanced_labels(N, 2, rng)
    first = rng.integers(0, n_anchor, size=N)
    offset = rng.integers(1, n_anchor, size=N)
    last = np.where(labels == 1, first, (first + offset) % n_anchor)
    tokens = rng.integers(n_anchor, d, size=(N, n))
    tokens[:, 0] = first
    tokens[:, -1] = last
    inputs = np.eye(d)[tokens]
    labels = (tokens[:, 0] == tokens[:, -1]).astype(int)
    return inputs, labels, 2


def make_synthetic_task(kind, n, d, seed=0, n_samples=2000, modes=None) -> SyntheticTask:
    """Deterministic synthetic dataset with an 80/20 train/test split.

    ``cluster_label`` places each sequence around one mixture mode (pass two
    modes for a binary task); ``long_range_pair`` labels a sequence by
    whether its first and last anchor tokens agree.
    """
    if kind not in TASK_KINDS:
        raise ValueError(f"unknown task kind {kind!r}; expected one of {TASK_KINDS}")
    if n < 2:
        raise ValueError("sequences need at least two tokens")
    rng = np.random.default_rng(seed)
    if kind == "cluster_label":
        modes = MIXTURE_MODES if modes is None else np.asarray(modes, dtype=float)
        inputs, labels, k = _cluster_label(n, d, n_samples, rng, modes)
    else:
        inputs, labels, k = _long_range_pair(n, d, n_samples, rng)
    train_idx, test_idx = _split(n_samples, rng)
    return SyntheticTask(kind, inputs, labels, k, seed, train_idx, test_idx)
