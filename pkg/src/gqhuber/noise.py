"""Running noise-scale estimates for predicted and target quantile values.

Each observed batch contributes one sample standard deviation per stream
(predicted and target); the per-stream estimate is the arithmetic mean of
those batch deviations, and ``b`` is the gap between the two streams.
``b`` is the data-driven replacement for a hand-tuned loss threshold.

Two centring conventions are supported:

* ``"batch"`` (default): deviation of each batch about its own mean,
  Bessel-corrected, averaged across batches.
* ``"running"``: pooled deviation of all values seen so far about the
  running global mean of the stream (Welford accumulation).

Both are scale-equivariant; they differ when batch means drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

_CENTERS = ("batch", "running")


@dataclass(frozen=True)
class _Welford:
    """Pooled count/mean/M2 accumulator for one value stream."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def merge(self, values: np.ndarray) -> "_Welford":
        n = values.size
        b_mean = float(values.mean())
        b_m2 = float(((values - b_mean) ** 2).sum())
        total = self.count + n
        delta = b_mean - self.mean
        mean = self.mean + delta * n / total
        m2 = self.m2 + b_m2 + delta * delta * self.count * n / total
        return _Welford(total, mean, m2)

    @property
    def std(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self.m2 / (self.count - 1))


@dataclass(frozen=True)
class NoiseStats:
    """Immutable snapshot of the noise estimates.

    ``sigma_pred`` and ``sigma_target`` are the per-stream estimates in
    the units of the quantile values; ``b = |sigma_pred - sigma_target|``
    whenever at least one batch has been seen.  ``fallback_b`` is what
    :func:`current_b` reports before any data arrives (default 1.0, the
    conventional fixed threshold).
    """

    sigma_pred: float = 0.0
    sigma_target: float = 0.0
    b: float = 0.0
    batches_seen: int = 0
    fallback_b: float = 1.0
    center: str = "batch"
    acc_pred: _Welford = field(default_factory=_Welford, repr=False)
    acc_target: _Welford = field(default_factory=_Welford, repr=False)

    def __post_init__(self):
        if self.center not in _CENTERS:
            raise ValueError(f"center must be one of {_CENTERS}, got {self.center!r}")
        if self.fallback_b < 0:
            raise ValueError(f"fallback_b must be >= 0, got {self.fallback_b}")


def _validated(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError(f"{name} must be a 1-d batch with >= 2 elements, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def observe_batch(stats: NoiseStats, predicted, target) -> NoiseStats:
    """Fold one batch of predicted and target quantile values into ``stats``.

    Returns a new snapshot; the input is unchanged.
    """
    pred = _validated(predicted, "predicted")
    targ = _validated(target, "target")
    n = stats.batches_seen
    acc_pred = stats.acc_pred.merge(pred)
    acc_target = stats.acc_target.merge(targ)
    if stats.center == "batch":
        sigma_pred = (stats.sigma_pred * n + float(pred.std(ddof=1))) / (n + 1)
        sigma_target = (stats.sigma_target * n + float(targ.std(ddof=1))) / (n + 1)
    else:
        sigma_pred = acc_pred.std
        sigma_target = acc_target.std
    return replace(
        stats,
        sigma_pred=sigma_pred,
        sigma_target=sigma_target,
        b=abs(sigma_pred - sigma_target),
        batches_seen=n + 1,
        acc_pred=acc_pred,
        acc_target=acc_target,
    )


def current_b(stats: NoiseStats) -> float:
    """The estimated noise gap, or the fallback before any batch arrives."""
    if stats.batches_seen == 0:
        return stats.fallback_b
    return stats.b
