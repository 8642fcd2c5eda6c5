"""Heat-kernel decay profiles, normalization constants and distance scales."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class FractionalOrder(float):
    """A fractional order alpha restricted to [1, 2]."""

    def __new__(cls, alpha):
        alpha = float(alpha)
        if not (1.0 <= alpha <= 2.0) or math.isnan(alpha):
            raise ValueError(f"fractional order must lie in [1, 2], got {alpha}")
        return super().__new__(cls, alpha)


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of the decay profile Phi_alpha.

    ``d_m`` is the manifold dimension entering the power-law exponent and
    ``kappa`` the distance scale applied before evaluating the profile.
    """

    alpha: float
    d_m: int = 1
    kappa: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", FractionalOrder(self.alpha))
        if int(self.d_m) != self.d_m or self.d_m < 1:
            raise ValueError(f"d_m must be a positive integer, got {self.d_m}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    @property
    def is_local(self) -> bool:
        return self.alpha == 2.0

    @property
    def exponent(self) -> float:
        """Power-law tail exponent d_M + alpha."""
        return self.d_m + self.alpha


def _check_nonnegative(z):
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(np.isnan(z)):
        raise ValueError("kernel argument must be nonnegative")
    return z


def phi_local(z, alpha=2.0):
    """Exponential decay profile exp(-z**(alpha/(alpha-1))).

    Routing through :func:`phi` only uses this branch at alpha = 2, where it
    is exp(-z**2).
    """
    alpha = float(alpha)
    if not 1.0 < alpha <= 2.0:
        raise ValueError(f"local profile needs alpha in (1, 2], got {alpha}")
    z = _check_nonnegative(z)
    out = np.exp(-(z ** (alpha / (alpha - 1.0))))
    return out if out.ndim else float(out)


def phi_nonlocal(z, spec: KernelSpec):
    """Power-law decay profile (1 + z)**-(d_M + alpha), alpha < 2."""
    if spec.is_local:
        raise ValueError("the power-law profile is only defined for alpha < 2")
    z = _check_nonnegative(z)
    out = (1.0 + z) ** (-spec.exponent)
    return out if out.ndim else float(out)


def phi(z, spec: KernelSpec):
    """Evaluate the decay profile selected by ``spec.alpha``."""
    if spec.is_local:
        return phi_local(z, 2.0)
    return phi_nonlocal(z, spec)


def phi_derivative(z, spec: KernelSpec):
    """dPhi/dz, used by the training backward pass."""
    z = np.asarray(z, dtype=float)
    if spec.is_local:
        return -2.0 * z * np.exp(-z * z)
    p = spec.exponent
    return -p * (1.0 + z) ** (-p - 1.0)


def gaussian_heat_kernel(x, y, t, d=None):
    """(4 pi t)^(-d/2) exp(-|x - y|^2 / (4 t)) on R^d."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    if d is None:
        d = x.shape[-1]
    elif d != x.shape[-1]:
        raise ValueError(f"points live in R^{x.shape[-1]}, not R^{d}")
    if not t > 0:
        raise ValueError(f"diffusion time must be positive, got {t}")
    sq = np.sum((x - y) ** 2, axis=-1)
    out = (4.0 * math.pi * t) ** (-d / 2.0) * np.exp(-sq / (4.0 * t))
    return out if np.ndim(out) else float(out)


def c_d_alpha(d: int, alpha: float) -> float:
    """Normalization constant of the singular-integral fractional Laplacian."""
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"c_(d,alpha) needs 0 < alpha < 2, got {alpha}")
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    return (
        alpha
        * 2.0 ** (alpha - 1.0)
        * math.gamma((d + alpha) / 2.0)
        / (math.pi ** (d / 2.0) * math.gamma(1.0 - alpha / 2.0))
    )


KAPPA_TASKS = ("text", "vision_translation", "spherical", "spectral", "diffmap")


def _text_scale(alpha, d_h):
    if alpha < 2.0:
        return math.sqrt(d_h) / (2.0 ** (1.0 / d_h) - 1.0)
    return math.sqrt(d_h)


def kappa_convention(task, alpha, d_h=None, d_m=None, epsilon=None, override=None):
    """Distance scale kappa used by each experiment family.

    ``override`` short-circuits the lookup. For the spherical family, ``d_m``
    is the intrinsic sphere dimension (d - 1 for a single head, else d_H).
    """
    if override is not None:
        if not override > 0:
            raise ValueError(f"kappa override must be positive, got {override}")
        return float(override)
    alpha = FractionalOrder(alpha)
    if task not in KAPPA_TASKS:
        raise ValueError(f"unknown kappa task {task!r}; expected one of {KAPPA_TASKS}")

    def need(name, value):
        if value is None or not value > 0:
            raise ValueError(f"kappa task {task!r} requires a positive {name}")
        return value

    if task == "text":
        return _text_scale(alpha, need("d_h", d_h))
    if task == "vision_translation":
        d_h = need("d_h", d_h)
        return float(d_h) if alpha < 2.0 else math.sqrt(d_h)
    if task == "spherical":
        if alpha == 2.0:
            return 1.0
        d_m = need("d_m", d_m)
        return math.pi / (math.pi ** (1.0 / d_m) - 1.0)
    if task == "spectral":
        return math.sqrt(need("epsilon", epsilon))
    # diffmap
    return _text_scale(alpha, need("d_h", d_h)) * math.sqrt(need("epsilon", epsilon))
