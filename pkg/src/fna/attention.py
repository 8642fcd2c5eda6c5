"""Fractional neural attention and the dot-product baseline.

Embeddings are stored token-major: ``X`` has shape ``(n, d)`` with one token
per row, i.e. the transpose of the column-per-token convention. Helpers
that act on score matrices broadcast over any leading batch axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import FractionalOrder, KernelSpec, kappa_convention, phi

PROJECTION_MODES = ("general", "orthogonal", "weight_tied_identity")
MANIFOLDS = ("euclidean", "spherical")
VARIANTS = ("fna", "dot_product")
ORTHO_TOL = 1e-10


class DegenerateRowError(ValueError):
    """A score row has no unmasked positive entry left to normalize."""


@dataclass(frozen=True)
class AttentionConfig:
    alpha: float
    d: int
    heads: int = 1
    kappa: float | None = None
    kappa_task: str = "text"
    manifold: str = "euclidean"
    variant: str = "fna"
    d_m: int | None = None
    epsilon: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", FractionalOrder(self.alpha))
        if self.d < 1 or self.heads < 1 or self.d % self.heads:
            raise ValueError(f"d={self.d} must be a positive multiple of heads={self.heads}")
        if self.manifold not in MANIFOLDS:
            raise ValueError(f"manifold must be one of {MANIFOLDS}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.kappa is not None and not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    @property
    def d_h(self) -> int:
        return self.d // self.heads

    @property
    def manifold_dim(self) -> int:
        if self.d_m is not None:
            return int(self.d_m)
        if self.manifold == "spherical" and self.heads == 1:
            return max(self.d - 1, 1)
        return self.d_h

    @property
    def kernel(self) -> KernelSpec:
        return KernelSpec(self.alpha, self.manifold_dim, self.resolved_kappa)

    @property
    def resolved_kappa(self) -> float:
        if self.kappa is not None:
            return float(self.kappa)
        task = self.kappa_task
        if self.manifold == "spherical" and task == "text":
            task = "spherical"
        if self.variant == "dot_product":
            # softmax temperature follows the usual sqrt(d_H)
            return math.sqrt(self.d_h)
        return kappa_convention(
            task, self.alpha, d_h=self.d_h, d_m=self.manifold_dim, epsilon=self.epsilon
        )

    def metadata(self) -> dict:
        return {
            "alpha": float(self.alpha),
            "kappa": self.resolved_kappa,
            "kappa_source": "override" if self.kappa is not None else self.kappa_task,
            "d_m": self.manifold_dim,
            "heads": self.heads,
            "manifold": self.manifold,
            "variant": self.variant,
        }


def _is_orthogonal(w, tol=ORTHO_TOL) -> bool:
    w = np.asarray(w)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        return False
    return bool(np.max(np.abs(w.T @ w - np.eye(w.shape[0]))) <= tol)


@dataclass(frozen=True)
class ProjectionSet:
    """Query, key and value maps acting as ``q = W_Q x``."""

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    mode: str = "general"

    def __post_init__(self):
        if self.mode not in PROJECTION_MODES:
            raise ValueError(f"mode must be one of {PROJECTION_MODES}")
        for name in ("w_q", "w_k", "w_v"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.w_q.shape != self.w_k.shape:
            raise ValueError("W_Q and W_K must share a shape")
        if self.mode == "orthogonal":
            if not (_is_orthogonal(self.w_q) and _is_orthogonal(self.w_k)):
                raise ValueError("orthogonal mode requires W_Q, W_K in O(d)")
        elif self.mode == "weight_tied_identity":
            eye = np.eye(self.w_q.shape[0])
            if self.w_q.shape != eye.shape or not (
                np.array_equal(self.w_q, eye) and np.array_equal(self.w_k, eye)
            ):
                raise ValueError("weight_tied_identity mode requires W_Q = W_K = I")

    @property
    def d(self) -> int:
        return self.w_q.shape[1]

    @classmethod
    def identity(cls, d, w_v=None):
        eye = np.eye(d)
        return cls(eye, eye.copy(), eye.copy() if w_v is None else w_v, "weight_tied_identity")

    @classmethod
    def random(cls, d, mode="general", rng=None, seed=None):
        rng = np.random.default_rng(seed) if rng is None else rng
        w_v = rng.standard_normal((d, d)) / math.sqrt(d)
        if mode == "weight_tied_identity":
            return cls.identity(d, w_v)
        if mode == "orthogonal":
            return cls(random_orthogonal(d, rng), random_orthogonal(d, rng), w_v, mode)
        return cls(
            rng.standard_normal((d, d)) / math.sqrt(d),
            rng.standard_normal((d, d)) / math.sqrt(d),
            w_v,
            mode,
        )


@dataclass
class StochasticMatrix:
    """Row-stochastic attention weights with the scores they came from."""

    weights: np.ndarray
    score: np.ndarray | None = None
    mask: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.weights.shape[-1]


def random_orthogonal(d, rng):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def is_isometric(P: ProjectionSet, cfg: AttentionConfig) -> bool:
    """True only when per-head projections preserve pairwise distances."""
    return cfg.heads == 1 and P.mode in ("orthogonal", "weight_tied_identity")


def orthogonal_parametrization(S):
    """Cayley map (I - S)^-1 (I + S) of a skew-symmetric matrix."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("Cayley seed must be square")
    if np.max(np.abs(S + S.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(S), initial=0.0)):
        raise ValueError("Cayley seed must be skew-symmetric")
    eye = np.eye(S.shape[0])
    try:
        return np.linalg.solve(eye - S, eye + S)
    except np.linalg.LinAlgError:
        # I - S is invertible for exact skew S; only reachable through round-off
        S = S + 1e-12 * np.eye(S.shape[0])
        return np.linalg.solve(eye - S, eye + S)


def reduce_projections(P: ProjectionSet) -> ProjectionSet:
    """Equivalent pair (I, W_Q^T W_K) for a single orthogonal head."""
    if P.mode == "weight_tied_identity":
        return P
    if not (_is_orthogonal(P.w_q) and _is_orthogonal(P.w_k)):
        raise ValueError("projection reduction requires orthogonal W_Q and W_K")
    return ProjectionSet(np.eye(P.d), P.w_q.T @ P.w_k, P.w_v, "orthogonal")


def _check_embeddings(X, d=None):
    X = np.asarray(X, dtype=float)
    if X.ndim < 2:
        raise ValueError(f"embeddings must be (n, d), got shape {X.shape}")
    if X.shape[-2] < 1 or X.shape[-1] < 1:
        raise ValueError("embedding matrix must be non-empty")
    if d is not None and X.shape[-1] != d:
        raise ValueError(f"embedding dim {X.shape[-1]} does not match config d={d}")
    if not np.all(np.isfinite(X)):
        raise ValueError("embeddings contain non-finite entries")
    return X


def split_heads(Y, heads):
    """(..., n, d) -> (..., heads, n, d_H) using contiguous slices."""
    *lead, n, d = Y.shape
    return np.moveaxis(Y.reshape(*lead, n, heads, d // heads), -2, -3)


def merge_heads(Y):
    """Inverse of :func:`split_heads`."""
    *lead, h, n, dh = Y.shape
    return np.moveaxis(Y, -3, -2).reshape(*lead, n, h * dh)


def pairwise_distance(Q, K):
    """Euclidean distances between query and key rows, exact zero on ties."""
    diff = Q[..., :, None, :] - K[..., None, :, :]
    return np.sqrt(np.einsum("...k,...k->...", diff, diff))


def _unit_rows(Y):
    norm = np.linalg.norm(Y, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("cannot project a zero vector onto the sphere")
    return Y / norm


def geodesic_distance(Q, K):
    """Great-circle distance with the inner product clamped to [-1, 1]."""
    cos = np.clip(Q @ np.swapaxes(K, -1, -2), -1.0, 1.0)
    return np.arccos(cos)


def project(X, P: ProjectionSet, cfg: AttentionConfig):
    """Per-head queries and keys, (..., H, n, d_H) each."""
    X = _check_embeddings(X, cfg.d)
    if P.d != cfg.d:
        raise ValueError(f"projection dim {P.d} does not match config d={cfg.d}")
    if cfg.manifold == "spherical":
        X = _unit_rows(X)
    Q = split_heads(X @ P.w_q.T, cfg.heads)
    K = split_heads(X @ P.w_k.T, cfg.heads)
    if cfg.manifold == "spherical" and not is_isometric(P, cfg):
        Q, K = _unit_rows(Q), _unit_rows(K)
    return Q, K


def _squeeze_heads(a, cfg):
    return a[..., 0, :, :] if cfg.heads == 1 else a


def _key_mask(mask, n):
    if mask is None:
        return None
    mask = np.asarray(mask, dtype=bool)
    if mask.shape[-1] != n:
        raise ValueError(f"key mask length {mask.shape[-1]} does not match n={n}")
    return mask


def fna_score(X, P: ProjectionSet, cfg: AttentionConfig, mask=None):
    """Kernel scores Phi_alpha(dist(q_i, k_j) / kappa).

    Returns ``(n, n)`` for one head, ``(H, n, n)`` otherwise. ``mask`` marks
    valid keys with True. On the sphere, padded keys are assigned the
    maximal scaled distance pi / kappa.
    """
    Q, K = project(X, P, cfg)
    kern = cfg.kernel
    if cfg.manifold == "spherical":
        dist = geodesic_distance(Q, K)
    else:
        dist = pairwise_distance(Q, K)
    mask = _key_mask(mask, dist.shape[-1])
    if mask is not None and cfg.manifold == "spherical":
        dist = np.where(_broadcast_mask(mask, dist), dist, math.pi)
    return _squeeze_heads(phi(dist / kern.kappa, kern), cfg)


def row_normalize(C, mask=None, degenerate="raise") -> StochasticMatrix:
    """Divide each row by its sum after zeroing masked key columns.

    ``degenerate="zero"`` leaves rows with nothing left to normalize as all
    zeros instead of raising.
    """
    C = np.asarray(C, dtype=float)
    if np.any(C < 0):
        raise ValueError("scores must be nonnegative")
    mask = _key_mask(mask, C.shape[-1])
    S = C if mask is None else np.where(_broadcast_mask(mask, C), C, 0.0)
    total = S.sum(axis=-1, keepdims=True)
    bad = total <= 0
    if np.any(bad):
        if degenerate == "raise":
            raise DegenerateRowError(f"{int(bad.sum())} score row(s) sum to zero after masking")
        total = np.where(bad, 1.0, total)
    W = S / total
    return StochasticMatrix(W, C, mask)


def _broadcast_mask(mask, C):
    # mask (..., n) over keys broadcast against (..., [H,] n, n)
    m = mask[..., None, :]
    while m.ndim < C.ndim:
        m = m[..., None, :, :]
    return m


def softmax_rows(C, mask=None):
    """Row softmax with max subtraction; fully masked rows become zero."""
    C = np.asarray(C, dtype=float)
    valid = None if mask is None else np.broadcast_to(_broadcast_mask(mask, C), C.shape)
    Z = C if valid is None else np.where(valid, C, -np.inf)
    top = np.max(Z, axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    E = np.exp(Z - top)
    total = E.sum(axis=-1, keepdims=True)
    return E / np.where(total > 0, total, 1.0)


def dot_product_scores(X, P: ProjectionSet, cfg: AttentionConfig):
    X = _check_embeddings(X, cfg.d)
    Q = split_heads(X @ P.w_q.T, cfg.heads)
    K = split_heads(X @ P.w_k.T, cfg.heads)
    return _squeeze_heads(Q @ np.swapaxes(K, -1, -2) / cfg.resolved_kappa, cfg)


def dot_product_attention(X, P: ProjectionSet, cfg: AttentionConfig, mask=None):
    """softmax(q_i . k_j / kappa) row-wise."""
    C = dot_product_scores(X, P, cfg)
    mask = _key_mask(mask, C.shape[-1])
    return StochasticMatrix(softmax_rows(C, mask), C, mask, cfg.metadata())


def attention_weights(X, P: ProjectionSet, cfg: AttentionConfig, mask=None):
    """Row-stochastic weights for whichever variant ``cfg`` selects."""
    if cfg.variant == "dot_product":
        return dot_product_attention(X, P, cfg, mask)
    A = row_normalize(fna_score(X, P, cfg, mask), mask)
    A.metadata.update(cfg.metadata())
    return A


def apply_attention(X, weights, P: ProjectionSet, heads):
    """Residual update X + A (X W_V^T), one weight matrix per head."""
    V = split_heads(X @ P.w_v.T, heads)
    W = weights if heads > 1 else weights[..., None, :, :]
    return X + merge_heads(W @ V)


def fna_block(X, P: ProjectionSet, cfg: AttentionConfig, mask=None, weights=None):
    """One residual attention block; ``weights`` overrides the computed ones."""
    X = _check_embeddings(X, cfg.d)
    if weights is None:
        weights = attention_weights(X, P, cfg, mask)
    if isinstance(weights, StochasticMatrix):
        weights = weights.weights
    return apply_attention(X, weights, P, cfg.heads)


ABLATION_MODES = ("edges", "nodes")


def ablation_keep(shape, p, mode, rng):
    """Boolean keep-mask for Bernoulli(p) removal of edges or key nodes.

    ``shape`` is the (..., n, n) weight shape. Node removal drops whole key
    columns, drawn once per leading index.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"ablation probability must be in [0, 1], got {p}")
    if mode not in ABLATION_MODES:
        raise ValueError(f"ablation mode must be one of {ABLATION_MODES}")
    if mode == "edges":
        return rng.random(shape) >= p
    *lead, _, n = shape
    keep = rng.random((*lead, n)) >= p
    return np.broadcast_to(keep[..., None, :], shape)


def ablate(A, p, mode="edges", seed=None, rng=None) -> StochasticMatrix:
    """Randomly remove attention and renormalize surviving weights.

    Rows that lose every entry become all-zero, so the block reduces to its
    residual path for those queries.
    """
    rng = np.random.default_rng(seed) if rng is None else rng
    if isinstance(A, StochasticMatrix):
        base, score, mask = A.weights, A.score, A.mask
    else:
        base = np.asarray(A, dtype=float)
        score, mask = base, None
    keep = ablation_keep(base.shape, p, mode, rng)
    if p == 0:
        # nothing removed; skip renormalization so weights stay bit-identical
        out = StochasticMatrix(base.copy())
    else:
        out = row_normalize(np.where(keep, base, 0.0), degenerate="zero")
    out.score, out.mask = score, mask
    out.metadata = {"ablation_p": p, "ablation_mode": mode, "kept": int(keep.sum())}
    return out
