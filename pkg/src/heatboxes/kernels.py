"""Separable bump kernels on the normalized box frame [-1, 1]^2.

The primary kernel is the tricube bump (1-|u|^3)^gamma * (1-|v|^3)^gamma:
peak 1 at the center, exactly 0 at the support edge, and rectangular level
sets that carry the orientation of the box it is stretched over. Three
alternatives are provided for comparison: a gaussian (circular level sets,
so it carries no angle for square boxes), a binary rectangle, and a shrunk
("effective") binary rectangle.

Thresholding the 1D profile y = (1-x^3)^gamma at level tau keeps
|x| <= x_tau with x_tau = (1 - tau^(1/gamma))^(1/3). ``scale_factor``
returns s = 1/x_tau, the factor that restores a tau-thresholded footprint
to the full box extent. Note that s is the analytic inverse of the profile:
plugging x = 1/s back into the profile returns exactly tau. A superficially
similar expression, 1/(1-(1-tau^3)^gamma), is *not* that inverse (it
diverges as tau -> 0 where no rescaling is needed) and is not used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FAMILIES = ("tricube", "gaussian", "binary_rect", "effective_rect")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus shape parameters.

    gamma: tricube sharpness exponent (>= 1).
    sigma_frac: gaussian std as a fraction of the half-extent.
    shrink: effective_rect shrink fraction in (0, 1); support is
        |u|, |v| <= 1 - shrink.
    """

    family: str = "tricube"
    gamma: float = 7.0
    sigma_frac: float = 1.0 / 3.0
    shrink: float = 0.4

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.gamma < 1.0:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.sigma_frac <= 0.0:
            raise ValueError(f"sigma_frac must be > 0, got {self.sigma_frac}")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError(f"shrink must be in (0, 1), got {self.shrink}")


def profile_level(x: float, gamma: float) -> float:
    """1D profile (1 - x^3)^gamma for x in [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    return (1.0 - x**3) ** gamma


def scale_factor(tau: float, gamma: float) -> float:
    """Footprint-restoring factor s = (1 - tau^(1/gamma))^(-1/3) for tau in (0, 1).

    Inverse of the 1D profile: profile_level(1/s, gamma) == tau.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    return (1.0 - tau ** (1.0 / gamma)) ** (-1.0 / 3.0)


def _tricube_1d(x: float, gamma: float) -> float:
    ax = abs(x)
    if ax >= 1.0:
        return 0.0
    return (1.0 - ax**3) ** gamma


def eval_tricube(u: float, v: float, gamma: float = 7.0) -> float:
    """Tricube bump at (u, v); 0 outside the unit square support."""
    return _tricube_1d(u, gamma) * _tricube_1d(v, gamma)


def eval_kernel(u: float, v: float, spec: KernelSpec) -> float:
    """Kernel value at a single normalized point for any family."""
    if spec.family == "tricube":
        return eval_tricube(u, v, spec.gamma)
    au, av = abs(u), abs(v)
    if spec.family == "gaussian":
        if au > 1.0 or av > 1.0:
            return 0.0
        return math.exp(-(u * u + v * v) / (2.0 * spec.sigma_frac**2))
    if spec.family == "binary_rect":
        return 1.0 if au <= 1.0 and av <= 1.0 else 0.0
    # effective_rect
    lim = 1.0 - spec.shrink
    return 1.0 if au <= lim and av <= lim else 0.0


def eval_kernel_grid(u: np.ndarray, v: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Vectorized ``eval_kernel`` over equal-shaped coordinate arrays."""
    au = np.abs(np.asarray(u, dtype=float))
    av = np.abs(np.asarray(v, dtype=float))
    if spec.family == "tricube":
        gu = np.where(au < 1.0, (1.0 - np.minimum(au, 1.0) ** 3) ** spec.gamma, 0.0)
        gv = np.where(av < 1.0, (1.0 - np.minimum(av, 1.0) ** 3) ** spec.gamma, 0.0)
        return gu * gv
    inside = (au <= 1.0) & (av <= 1.0)
    if spec.family == "gaussian":
        vals = np.exp(-(au * au + av * av) / (2.0 * spec.sigma_frac**2))
        return np.where(inside, vals, 0.0)
    if spec.family == "binary_rect":
        return inside.astype(float)
    lim = 1.0 - spec.shrink
    return ((au <= lim) & (av <= lim)).astype(float)
