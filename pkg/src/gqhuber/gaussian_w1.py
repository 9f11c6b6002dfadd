"""1-Wasserstein distance between univariate Gaussians.

``w1_closed`` is the exact value; ``w1_quadrature`` is an independent
oracle that integrates the quantile-function gap; ``w1_empirical``
compares two equal-size sorted value sets (the metric used to score a
learned quantile distribution against an oracle one).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .losses import SQRT_2_OVER_PI


@dataclass(frozen=True)
class Gaussian:
    """Normal distribution; ``std = 0`` denotes a Dirac delta at ``mean``."""

    mean: float
    std: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.std)):
            raise ValueError("Gaussian parameters must be finite")
        if self.std < 0:
            raise ValueError(f"std must be >= 0, got {self.std}")


def w1_closed(p: Gaussian, q: Gaussian) -> float:
    """Exact 1-Wasserstein distance between two univariate Gaussians.

    With ``dmu = p.mean - q.mean`` and ``dsig = p.std - q.std``:

        W1 = |dmu| * (1 - 2*Phi(-|dmu|/|dsig|))
             + |dsig| * sqrt(2/pi) * exp(-dmu^2 / (2*dsig^2))

    i.e. the mean of a folded normal with location ``dmu`` and scale
    ``|dsig|``.  Equal standard deviations reduce it to ``|dmu|``.
    """
    dmu = p.mean - q.mean
    dsig = p.std - q.std
    if dsig == 0.0:
        return abs(dmu)
    admu, adsig = abs(dmu), abs(dsig)
    z = admu / adsig
    tail = 0.5 * special.erfc(z / math.sqrt(2.0))
    return admu * (1.0 - 2.0 * tail) + adsig * SQRT_2_OVER_PI * math.exp(-0.5 * z * z)


@functools.lru_cache(maxsize=8)
def _standard_quantile_grid(points: int, eps: float) -> np.ndarray:
    """Standard normal quantiles on a uniform t-grid clipped to [eps, 1-eps]."""
    t = np.linspace(eps, 1.0 - eps, points)
    return special.ndtri(t)


def w1_quadrature(p: Gaussian, q: Gaussian, points: int = 100_000) -> float:
    """Oracle W1 via trapezoidal quadrature of ``|F_p^-1(t) - F_q^-1(t)|``.

    The t-grid is clipped to ``[1e-7, 1 - 1e-7]`` to avoid the infinite
    quantile tails; the truncation bias is far below the documented 1e-4
    agreement with :func:`w1_closed` at 1e6 points.
    """
    points = int(points)
    if points < 1000:
        raise ValueError(f"points must be >= 1000, got {points}")
    z = _standard_quantile_grid(points, 1e-7)
    gap = np.abs((p.mean - q.mean) + (p.std - q.std) * z)
    t_step = (1.0 - 2e-7) / (points - 1)
    return float(np.trapezoid(gap, dx=t_step))


def w1_empirical(xs, ys) -> float:
    """W1 between two equal-size sorted value sets: mean absolute gap.

    Both inputs must be sorted ascending; this is the 1-Wasserstein
    distance between the two uniform mixtures of N Diracs.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or ys.ndim != 1 or xs.size != ys.size or xs.size < 1:
        raise ValueError(f"inputs must be equal-length 1-d sequences, got {xs.shape} and {ys.shape}")
    if np.any(np.diff(xs) < 0) or np.any(np.diff(ys) < 0):
        raise ValueError("inputs must be sorted ascending")
    return float(np.mean(np.abs(xs - ys)))
