"""Desk-scale experiment runners shared by the CLI and the acceptance suite."""

from __future__ import annotations

import math

import numpy as np

from .attention import AttentionConfig, ProjectionSet, attention_weights
from .graph import build_graph, shortest_hops
from .kernels import kappa_convention
from .spectral import (
    circle_points,
    diagonalize,
    diffusion_map,
    fractional_spectrum,
    spectral_gap,
    weyl_fit,
)
from .model.tasks import MIXTURE_MODES, sample_mixture

# threshold used for the sparse attention graphs
GRAPH_THRESHOLD = 3.12e-5
# bandwidth of the mixture connectivity experiment; kappa = sqrt(epsilon)
MIXTURE_EPSILON = 0.1


def circle_spectrum(n=500, alpha=1.2, epsilon=1e-4, index_range=(5, 50)):
    """Spectrum of the FNA chain on n uniform points of the unit circle.

    Returns ``(spectrum, slope, r2)``; the manifold dimension is 1.
    """
    spec = fractional_spectrum(circle_points(n), alpha, epsilon, d_m=1)
    slope, r2 = weyl_fit(spec, index_range)
    return spec, slope, r2


def mixture_attention(alpha, n=18, seed=0, kappa=None, modes=MIXTURE_MODES):
    """Weight-tied identity attention over a mixture sample.

    Returns ``(X, component, StochasticMatrix)``.
    """
    X, comp = sample_mixture(n, seed=seed, modes=modes)
    if kappa is None:
        kappa = math.sqrt(MIXTURE_EPSILON)
    cfg = AttentionConfig(alpha, d=X.shape[1], kappa=kappa)
    return X, comp, attention_weights(X, ProjectionSet.identity(X.shape[1]), cfg)


def cluster_connectivity(alpha, n=18, seed=0, theta=GRAPH_THRESHOLD, kappa=None):
    """Inter-cluster edge count, inter-cluster mass and spectral gap."""
    _, comp, A = mixture_attention(alpha, n, seed, kappa)
    G = build_graph(A, theta)
    cross = comp[:, None] != comp[None, :]
    return {
        "alpha": float(alpha),
        "seed": seed,
        "edges": G.n_edges,
        "inter_edges": int((G.adjacency & cross).sum()),
        "inter_mass": float((A.weights * cross).sum() / n),
        "spectral_gap": spectral_gap(A),
    }


def mixture_diffusion_map(alpha, n=18, seed=0, tau=1, m=2, kappa=None):
    """Diffusion coordinates of the mixture chain plus mixture component.

    ``kappa`` defaults to the diffusion-map convention at epsilon = 0.1.
    """
    if kappa is None:
        kappa = kappa_convention("diffmap", alpha, d_h=MIXTURE_MODES.shape[1],
                                 epsilon=MIXTURE_EPSILON)
    _, comp, A = mixture_attention(alpha, n, seed, kappa)
    emb = diffusion_map(diagonalize(A.score), tau, m)
    return emb, comp


def embedding_diameter(coords):
    """Largest pairwise Euclidean distance between rows."""
    diff = coords[:, None, :] - coords[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


PATH_VARIANTS = (("fna", 1.2), ("fna", 2.0), ("dot_product", 2.0))


def path_lengths(n, seed=0, d=8, sigma=2.0, theta=GRAPH_THRESHOLD, variants=PATH_VARIANTS):
    """Mean shortest-hop count of each variant's attention graph.

    Embeddings are N(0, sigma^2 I) in R^d and shared by all variants; the
    projections are the weight-tied identity. Unreachable pairs are excluded
    from the mean and reported separately.
    """
    X = sigma * np.random.default_rng(seed).standard_normal((n, d))
    P = ProjectionSet.identity(d)
    rows = []
    for variant, alpha in variants:
        cfg = AttentionConfig(alpha, d=d, variant=variant)
        stats = shortest_hops(build_graph(attention_weights(X, P, cfg), theta))
        rows.append({
            "n": n,
            "seed": seed,
            "variant": "dp" if variant == "dot_product" else f"fna{alpha:g}",
            "mean_hops": stats.mean_hops,
            "max_hops": stats.max_hops,
            "unreachable": stats.unreachable_pairs,
        })
    return rows


def mean_path_vs_length(sequence_lengths, seeds=range(5), **kwargs):
    """Seed-averaged mean hop count per (n, variant); keyword arguments go to
    :func:`path_lengths`."""
    per_seed = [r for n in sequence_lengths for s in seeds for r in path_lengths(n, s, **kwargs)]
    table = []
    for n in sequence_lengths:
        for label in dict.fromkeys(r["variant"] for r in per_seed):
            hops = [r["mean_hops"] for r in per_seed if r["n"] == n and r["variant"] == label]
            table.append({"n": n, "variant": label, "mean_hops": float(np.mean(hops)),
                          "std_hops": float(np.std(hops)), "seeds": len(hops)})
    return table, per_seed
