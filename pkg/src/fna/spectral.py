"""Spectral analysis of attention Markov chains.

A symmetric score matrix C with degrees D defines the chain A = D^-1 C,
which is similar to the symmetric S = D^-1/2 C D^-1/2. Everything here is
computed from an eigendecomposition of S.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .attention import StochasticMatrix, row_normalize
from .kernels import KernelSpec, kappa_convention, phi

log = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10


class DisconnectedKernelError(ValueError):
    """The kernel graph splits into several components."""


@dataclass
class SpectralDecomposition:
    """Eigenpairs of a reversible attention chain, descending.

    Left vectors ``phi[:, k]`` and right vectors ``psi[:, k]`` are scaled so
    that phi_0 is the stationary distribution and psi_0 is all ones; the two
    families stay bi-orthonormal.
    """

    eigenvalues: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    degree: np.ndarray
    weights: np.ndarray
    symmetrized: bool = False

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def transition(self, tau=1) -> np.ndarray:
        """A^tau rebuilt from the eigenpairs."""
        return (self.psi * np.power(self.eigenvalues, tau)) @ self.phi.T


@dataclass
class FractionalSpectrum:
    lambdas: np.ndarray
    epsilon: float
    alpha: float
    t: float
    dropped: int = 0
    eigenvalues: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass
class DiffusionEmbedding:
    coordinates: np.ndarray
    tau: float
    m: int
    metadata: dict = field(default_factory=lambda: {"trivial_pair_excluded": True})


def _sign_fix(V, scale):
    # first clearly nonzero entry of each column made positive
    for k in range(V.shape[1]):
        col = V[:, k] * scale
        idx = np.flatnonzero(np.abs(col) > 1e-12 * np.max(np.abs(col)))
        if idx.size and col[idx[0]] < 0:
            V[:, k] = -V[:, k]
    return V


def diagonalize(C, force_symmetric=False) -> SpectralDecomposition:
    """Diagonalize N_R(C) through its symmetric conjugate.

    ``C`` must be symmetric within 1e-10 (relative to its largest entry)
    unless ``force_symmetric`` is set, in which case (C + C^T)/2 is used.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("score matrix must be square")
    if np.any(C < 0):
        raise ValueError("score matrix must be nonnegative")
    scale = max(float(np.max(np.abs(C))), 1e-300)
    asym = float(np.max(np.abs(C - C.T))) / scale
    symmetrized = False
    if asym > SYMMETRY_TOL:
        if not force_symmetric:
            raise ValueError(f"score matrix is not symmetric (relative asymmetry {asym:.3g})")
        C = 0.5 * (C + C.T)
        symmetrized = True
    deg = C.sum(axis=1)
    if np.any(deg <= 0):
        raise ValueError("score matrix has a zero row sum")

    root = np.sqrt(deg)
    S = C / np.outer(root, root)
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    order = np.argsort(-w, kind="stable")
    w, V = w[order], V[:, order]
    V = _sign_fix(V, 1.0 / root)

    vol = deg.sum()
    psi = math.sqrt(vol) * V / root[:, None]
    phi_ = V * root[:, None] / math.sqrt(vol)
    if psi[0, 0] < 0:
        psi[:, 0], phi_[:, 0] = -psi[:, 0], -phi_[:, 0]
    return SpectralDecomposition(w, psi, phi_, deg, C / deg[:, None], symmetrized)


def circle_points(n, radius=1.0):
    """``n`` uniformly spaced points on a circle in R^2."""
    theta = 2.0 * math.pi * np.arange(n) / n
    return radius * np.column_stack([np.cos(theta), np.sin(theta)])


def kernel_matrix(points, spec: KernelSpec):
    """Phi_alpha(|x_i - x_j| / kappa) for all pairs of rows."""
    points = np.asarray(points, dtype=float)
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return phi(dist / spec.kappa, spec)


def _check_connected(C):
    n_comp, _ = connected_components(C > 0, directed=False)
    if n_comp > 1:
        raise DisconnectedKernelError(f"kernel graph has {n_comp} connected components")


def fractional_spectrum(points, alpha, epsilon, d_m=None, allow_disconnected=False):
    """Fractional Laplacian eigenvalue estimates from the FNA kernel.

    Uses kappa = sqrt(epsilon) and diffusion time t = epsilon^(alpha/2);
    lambda_i = -log(eta_i) / t, ascending. Nonpositive eta are dropped and
    counted. ``d_m`` defaults to the ambient dimension minus one (the circle
    for planar points).
    """
    points = np.asarray(points, dtype=float)
    if not epsilon > 0:
        raise ValueError(f"bandwidth must be positive, got {epsilon}")
    if d_m is None:
        d_m = max(points.shape[1] - 1, 1)
    spec = KernelSpec(alpha, d_m, kappa_convention("spectral", alpha, epsilon=epsilon))
    C = kernel_matrix(points, spec)
    if not allow_disconnected:
        _check_connected(C)
    eta = diagonalize(C).eigenvalues
    t = epsilon ** (spec.alpha / 2.0)
    keep = eta > 0
    dropped = int((~keep).sum())
    if dropped:
        log.info("dropped %d nonpositive eigenvalues before taking logs", dropped)
    lam = np.sort(-np.log(np.minimum(eta[keep], 1.0)) / t)
    return FractionalSpectrum(lam, epsilon, float(spec.alpha), t, dropped, eta)


def weyl_fit(spectrum, index_range=None):
    """Least-squares slope of log(lambda_j) against log(j).

    ``index_range`` is an inclusive (lo, hi) pair; the default is
    [5, n // 10]. Returns ``(slope, r2)``.
    """
    lam = spectrum.lambdas if isinstance(spectrum, FractionalSpectrum) else np.asarray(spectrum)
    if index_range is None:
        index_range = (5, len(lam) // 10)
    lo, hi = int(index_range[0]), int(index_range[1])
    if lo < 1 or hi >= len(lam) or hi - lo + 1 < 3:
        raise ValueError(f"fit window [{lo}, {hi}] needs at least 3 valid indices")
    j = np.arange(lo, hi + 1)
    vals = lam[j]
    if np.any(vals <= 0):
        raise ValueError("eigenvalues in the fit window must be positive")
    x, y = np.log(j), np.log(vals)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)


def diffusion_map(decomp: SpectralDecomposition, tau, m) -> DiffusionEmbedding:
    """Coordinates eta_k^tau psi_k for k = 1..m; the trivial pair is skipped."""
    m = int(m)
    if not 1 <= m <= decomp.n - 1:
        raise ValueError(f"need 1 <= m <= n - 1 = {decomp.n - 1}, got {m}")
    if tau < 0:
        raise ValueError("diffusion time must be nonnegative")
    eta = decomp.eigenvalues[1 : m + 1]
    if int(tau) != tau and np.any(eta < 0):
        raise ValueError("fractional diffusion time needs nonnegative eigenvalues")
    coords = decomp.psi[:, 1 : m + 1] * np.power(eta, tau)
    return DiffusionEmbedding(coords, float(tau), m)


def _integer_tau(tau):
    if tau < 0 or int(tau) != tau:
        raise ValueError(f"direct diffusion distance needs an integer step count, got {tau}")
    return int(tau)


def diffusion_distance(decomp: SpectralDecomposition, tau, i, j):
    """sqrt(sum_y (p_tau(y|i) - p_tau(y|j))^2 / phi_0(y)) from powers of A."""
    phi0 = decomp.phi[:, 0]
    if np.any(phi0 <= 0):
        raise ValueError("stationary weights are not strictly positive")
    P = np.linalg.matrix_power(decomp.weights, _integer_tau(tau))
    diff = P[i] - P[j]
    return float(math.sqrt(np.sum(diff * diff / phi0)))


def diffusion_distance_from_chain(A, stationary, tau, i, j):
    """Same quantity computed straight from a row-stochastic matrix."""
    stationary = np.asarray(stationary, dtype=float)
    if np.any(stationary <= 0):
        raise ValueError("stationary weights are not strictly positive")
    P = np.linalg.matrix_power(np.asarray(A, dtype=float), _integer_tau(tau))
    diff = P[i] - P[j]
    return float(math.sqrt(np.sum(diff * diff / stationary)))


def spectral_gap(A) -> float:
    """1 minus the second-largest eigenvalue modulus of the chain.

    Moduli below a round-off floor of 10 n machine-epsilon count as zero.
    """
    W = A.weights if isinstance(A, StochasticMatrix) else np.asarray(A, dtype=float)
    n = W.shape[0]
    if n < 2:
        return 1.0
    if np.array_equal(W, W.T):
        mods = np.abs(np.linalg.eigvalsh(W))
    else:
        mods = np.abs(np.linalg.eigvals(W))
    mods = np.sort(mods)[::-1]
    second = mods[1]
    if second < 10 * n * np.finfo(float).eps:
        second = 0.0
    return float(min(max(1.0 - second, 0.0), 1.0))


def spectral_gap_reversible(C) -> float:
    """1 - eta_1 for a symmetric score matrix via the symmetric route."""
    eta = diagonalize(C).eigenvalues
    if len(eta) < 2:
        return 1.0
    second = float(np.max(np.abs(eta[1:])))
    if second < 10 * len(eta) * np.finfo(float).eps:
        second = 0.0
    return float(min(max(1.0 - second, 0.0), 1.0))


def anisotropic_normalize(C, a, mask=None) -> StochasticMatrix:
    """Row-normalize D^-a C D^-a; a = 0 is plain row normalization."""
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"normalization index must be in [0, 1], got {a}")
    if a == 0:
        return row_normalize(C, mask)
    C = np.asarray(C, dtype=float)
    deg = C.sum(axis=-1)
    if np.any(deg <= 0):
        raise ValueError("score matrix has a zero row sum")
    scale = deg ** (-a)
    out = row_normalize(scale[:, None] * C * scale[None, :], mask)
    out.score = C
    out.metadata["a"] = a
    return out
