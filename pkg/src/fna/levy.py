"""Symmetric alpha-stable laws: characteristic function and sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StableParams:
    """Stable law S_alpha(beta, sigma, mu)."""

    alpha: float
    beta: float = 0.0
    sigma: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"stability index must be in (0, 2], got {self.alpha}")
        if not -1.0 <= self.beta <= 1.0:
            raise ValueError(f"skewness must be in [-1, 1], got {self.beta}")
        if not self.sigma > 0:
            raise ValueError(f"scale must be positive, got {self.sigma}")

    @property
    def symmetric(self) -> bool:
        return self.beta == 0.0 and self.mu == 0.0


def characteristic_function(u, params: StableParams):
    """exp(-|sigma u|^alpha (1 - i beta sgn(u) zeta(u; alpha)) + i u mu).

    For alpha = 1 the log|u| term is multiplied by sgn(0) = 0 at u = 0, so
    the value there is exactly 1.
    """
    u = np.asarray(u, dtype=float)
    a, b, s, m = params.alpha, params.beta, params.sigma, params.mu
    sgn = np.sign(u)
    if a == 1.0:
        with np.errstate(divide="ignore"):
            log_u = np.where(u == 0.0, 0.0, np.log(np.abs(np.where(u == 0.0, 1.0, u))))
        zeta = -2.0 / math.pi * log_u
    else:
        zeta = math.tan(math.pi * a / 2.0)
    expo = -(np.abs(s * u) ** a) * (1.0 - 1j * b * sgn * zeta) + 1j * u * m
    out = np.exp(expo)
    return out if out.ndim else complex(out)


def sample_sas(alpha, sigma, n, seed=None, rng=None):
    """Draw ``n`` symmetric alpha-stable variates with scale ``sigma``.

    Chambers-Mallows-Stuck transform of one uniform angle and one unit
    exponential. At alpha = 2 the draws are N(0, 2 sigma^2); at alpha = 1
    they are Cauchy.
    """
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"stability index must be in (0, 2], got {alpha}")
    if not sigma > 0:
        raise ValueError(f"scale must be positive, got {sigma}")
    n = int(n)
    if n < 1:
        raise ValueError(f"need at least one draw, got n={n}")
    if rng is None:
        rng = np.random.default_rng(seed)

    v = math.pi * (rng.random(n) - 0.5)
    w = -np.log1p(-rng.random(n))
    if alpha == 1.0:
        x = np.tan(v)
    else:
        x = (
            np.sin(alpha * v)
            / np.cos(v) ** (1.0 / alpha)
            * (np.cos(v - alpha * v) / w) ** ((1.0 - alpha) / alpha)
        )
    return sigma * x


def empirical_cf(samples, u):
    """Mean of exp(i u X) over the samples, for each u."""
    samples = np.asarray(samples, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return np.exp(1j * np.outer(u, samples)).mean(axis=1)
