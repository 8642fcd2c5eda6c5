"""Minimal attention encoder with hand-written reverse-mode gradients.

Per layer: ``H = X + Attn(X)``, then ``X' = H + W2 gelu(W1 H + b1) + b2``.
The classifier mean-pools valid tokens and applies one linear layer.
Tensors are ``(batch, n, d)``; heads use contiguous slices of the model
dimension.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..attention import merge_heads, split_heads
from ..kernels import KernelSpec, kappa_convention

PROJECTIONS = ("general", "orthogonal", "tied")


@dataclass(frozen=True)
class EncoderSpec:
    d: int = 8
    depth: int = 1
    heads: int = 1
    hidden: int = 64
    vocab_size: int = 16
    max_len: int = 16
    n_classes: int = 2
    variant: str = "fna"
    alpha: float = 1.2
    kappa: float | None = None
    projection: str = "tied"

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.d % self.heads:
            raise ValueError(f"d={self.d} is not divisible by heads={self.heads}")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"projection must be one of {PROJECTIONS}")
        if self.variant not in ("fna", "dot_product"):
            raise ValueError("variant must be 'fna' or 'dot_product'")

    @property
    def d_h(self) -> int:
        return self.d // self.heads

    @property
    def resolved_kappa(self) -> float:
        if self.kappa is not None:
            return float(self.kappa)
        if self.variant == "dot_product":
            return math.sqrt(self.d_h)
        return kappa_convention("text", self.alpha, d_h=self.d_h)

    @property
    def kernel(self) -> KernelSpec:
        return KernelSpec(self.alpha, self.d_h, self.resolved_kappa)

    @property
    def label(self) -> str:
        if self.variant == "dot_product":
            return "dp"
        return f"fna{self.alpha:g}"

    def to_dict(self) -> dict:
        return asdict(self)


def init_params(spec: EncoderSpec, seed=0, dtype=np.float64) -> dict:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero Cayley seeds."""
    rng = np.random.default_rng(seed)
    d, h = spec.d, spec.hidden

    def unif(fan_in, shape):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    p = {
        "embed": unif(spec.vocab_size, (spec.vocab_size, d)),
        "pos": unif(d, (spec.max_len, d)),
    }
    for layer in range(spec.depth):
        pre = f"l{layer}."
        if spec.projection == "general":
            p[pre + "w_q"] = unif(d, (d, d))
            p[pre + "w_k"] = unif(d, (d, d))
        elif spec.projection == "orthogonal":
            p[pre + "s_q"] = np.zeros((d, d))
            p[pre + "s_k"] = np.zeros((d, d))
        else:
            p[pre + "s_qk"] = np.zeros((d, d))
        p[pre + "w_v"] = unif(d, (d, d))
        p[pre + "w1"] = unif(d, (d, h))
        p[pre + "b1"] = np.zeros(h)
        p[pre + "w2"] = unif(h, (h, d))
        p[pre + "b2"] = np.zeros(d)
    p["w_out"] = unif(d, (d, spec.n_classes))
    p["b_out"] = np.zeros(spec.n_classes)
    return {k: v.astype(dtype) for k, v in p.items()}


def _cayley(A):
    # S = A - A^T; W = (I - S)^-1 (I + S)
    eye = np.eye(A.shape[0], dtype=A.dtype)
    S = A - A.T
    B = np.linalg.inv(eye - S)
    return B @ (eye + S), B


def _cayley_backward(gW, W, B):
    eye = np.eye(W.shape[0], dtype=W.dtype)
    gS = B.T @ gW @ (W + eye).T
    return gS - gS.T


def projections(spec: EncoderSpec, params: dict, layer: int):
    """(W_Q, W_K, W_V, cache) for one layer."""
    pre = f"l{layer}."
    if spec.projection == "general":
        wq, wk, cache = params[pre + "w_q"], params[pre + "w_k"], None
    elif spec.projection == "orthogonal":
        wq, bq = _cayley(params[pre + "s_q"])
        wk, bk = _cayley(params[pre + "s_k"])
        cache = (bq, bk)
    else:
        wq, b = _cayley(params[pre + "s_qk"])
        wk, cache = wq, (b,)
    return wq, wk, params[pre + "w_v"], cache


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(u):
    return 0.5 * u * (1.0 + np.tanh(_GELU_C * (u + 0.044715 * u**3)))


def gelu_grad(u):
    inner = _GELU_C * (u + 0.044715 * u**3)
    t = np.tanh(inner)
    return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * u * u)


def _attention_forward(spec, Q, K, keep):
    """Row-stochastic weights (B, H, n, n) and the cache for backward."""
    kappa = spec.resolved_kappa
    if spec.variant == "fna":
        diff = Q[..., :, None, :] - K[..., None, :, :]
        r = np.sqrt(np.einsum("...k,...k->...", diff, diff))
        z = r / kappa
        kern = spec.kernel
        if kern.is_local:
            C = np.exp(-z * z)
        else:
            C = (1.0 + z) ** (-kern.exponent)
        Cm = C * keep
        den = Cm.sum(-1, keepdims=True)
        safe = np.where(den > 0, den, 1.0)
        A = Cm / safe
        return A, (diff, r, z, C, safe, den > 0)
    S = Q @ np.swapaxes(K, -1, -2) / kappa
    S = np.where(keep, S, -np.inf)
    top = S.max(-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    E = np.exp(S - top)
    den = E.sum(-1, keepdims=True)
    A = E / np.where(den > 0, den, 1.0)
    return A, None


def _attention_backward(spec, Q, K, A, cache, gA, keep):
    kappa = spec.resolved_kappa
    if spec.variant == "fna":
        diff, r, z, C, den, live = cache
        # A = keep * C / den
        gC = keep * (gA - np.sum(gA * A, -1, keepdims=True)) / den * live
        kern = spec.kernel
        if kern.is_local:
            dphi = -2.0 * z * C
        else:
            dphi = -kern.exponent * C / (1.0 + z)
        gr = gC * dphi / kappa
        # zero-distance pairs contribute nothing (two-sided limit)
        ratio = np.divide(gr, r, out=np.zeros_like(r), where=r > 0)
        gdiff = ratio[..., None] * diff
        return gdiff.sum(-2), -gdiff.sum(-3)
    gS = A * (gA - np.sum(gA * A, -1, keepdims=True)) / kappa
    return gS @ K, np.swapaxes(gS, -1, -2) @ Q


def _valid(inputs, mask):
    B, n = inputs.shape[:2]
    if mask is None:
        return np.ones((B, n), dtype=bool)
    return np.asarray(mask, dtype=bool)


def forward(spec: EncoderSpec, params: dict, inputs, mask=None, keep=None, return_cache=False):
    """Class logits for a batch.

    ``inputs`` is (B, n, vocab_size) (one-hot rows are token ids), ``mask``
    marks valid tokens and ``keep`` is an optional (B, n, n) ablation mask
    applied to every layer and head.
    """
    inputs = np.asarray(inputs, dtype=params["embed"].dtype)
    B, n, _ = inputs.shape
    if n > spec.max_len:
        raise ValueError(f"sequence length {n} exceeds max_len={spec.max_len}")
    valid = _valid(inputs, mask)
    key_keep = np.broadcast_to(valid[:, None, :], (B, n, n))
    if keep is not None:
        key_keep = key_keep & np.asarray(keep, dtype=bool)
    keep4 = key_keep[:, None, :, :]

    X = inputs @ params["embed"] + params["pos"][:n]
    caches = []
    for layer in range(spec.depth):
        pre = f"l{layer}."
        wq, wk, wv, pc = projections(spec, params, layer)
        Q = split_heads(X @ wq.T, spec.heads)
        K = split_heads(X @ wk.T, spec.heads)
        V = split_heads(X @ wv.T, spec.heads)
        A, ac = _attention_forward(spec, Q, K, keep4)
        H = X + merge_heads(A @ V)
        U = H @ params[pre + "w1"] + params[pre + "b1"]
        G = gelu(U)
        Xn = H + G @ params[pre + "w2"] + params[pre + "b2"]
        caches.append((X, wq, wk, wv, pc, Q, K, V, A, ac, H, U, G))
        X = Xn
    w = valid.astype(X.dtype)
    count = w.sum(1, keepdims=True)
    pooled = np.einsum("bn,bnd->bd", w, X) / count
    logits = pooled @ params["w_out"] + params["b_out"]
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("non-finite logits in forward pass")
    if return_cache:
        return logits, (inputs, valid, keep4, caches, X, w, count, pooled)
    return logits


def cross_entropy(logits, labels):
    """Mean loss and d(loss)/d(logits)."""
    labels = np.asarray(labels)
    z = logits - logits.max(1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(1, keepdims=True))
    B = len(labels)
    loss = -logp[np.arange(B), labels].mean()
    g = np.exp(logp)
    g[np.arange(B), labels] -= 1.0
    return float(loss), g / B


def loss_and_grads(spec: EncoderSpec, params: dict, inputs, labels, mask=None, keep=None):
    """Mean cross-entropy and its gradient for every parameter tensor."""
    logits, cache = forward(spec, params, inputs, mask, keep, return_cache=True)
    loss, g_logits = cross_entropy(logits, labels)
    inputs, valid, keep4, caches, X, w, count, pooled = cache
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    grads["w_out"] = pooled.T @ g_logits
    grads["b_out"] = g_logits.sum(0)
    g_pooled = g_logits @ params["w_out"].T
    gX = (w / count)[:, :, None] * g_pooled[:, None, :]

    for layer in reversed(range(spec.depth)):
        pre = f"l{layer}."
        X, wq, wk, wv, pc, Q, K, V, A, ac, H, U, G = caches[layer]
        # X' = H + G W2 + b2
        grads[pre + "w2"] = np.einsum("bnh,bnd->hd", G, gX)
        grads[pre + "b2"] = gX.sum((0, 1))
        gU = (gX @ params[pre + "w2"].T) * gelu_grad(U)
        grads[pre + "w1"] = np.einsum("bnd,bnh->dh", H, gU)
        grads[pre + "b1"] = gU.sum((0, 1))
        gH = gX + gU @ params[pre + "w1"].T
        # H = X + merge(A V)
        gO = split_heads(gH, spec.heads)
        gA = gO @ np.swapaxes(V, -1, -2)
        gV = np.swapaxes(A, -1, -2) @ gO
        gQ, gK = _attention_backward(spec, Q, K, A, ac, gA, keep4)
        gQm, gKm, gVm = merge_heads(gQ), merge_heads(gK), merge_heads(gV)
        # Q = X wq^T etc.
        g_wq = np.einsum("bnd,bne->de", gQm, X)
        g_wk = np.einsum("bnd,bne->de", gKm, X)
        grads[pre + "w_v"] = np.einsum("bnd,bne->de", gVm, X)
        gX = gH + gQm @ wq + gKm @ wk + gVm @ wv
        if spec.projection == "general":
            grads[pre + "w_q"], grads[pre + "w_k"] = g_wq, g_wk
        elif spec.projection == "orthogonal":
            bq, bk = pc
            grads[pre + "s_q"] = _cayley_backward(g_wq, wq, bq)
            grads[pre + "s_k"] = _cayley_backward(g_wk, wk, bk)
        else:
            (b,) = pc
            grads[pre + "s_qk"] = _cayley_backward(g_wq + g_wk, wq, b)

    grads["pos"][: X.shape[1]] = gX.sum(0)
    grads["embed"] = np.einsum("bnv,bnd->vd", inputs, gX)
    return loss, grads


def attention_maps(spec: EncoderSpec, params: dict, inputs, mask=None):
    """Per-layer attention weights, each (B, H, n, n)."""
    _, cache = forward(spec, params, inputs, mask, return_cache=True)
    return [c[8] for c in cache[3]]
