"""Loss kernels for quantile learning.

All kernels are symmetric, nonnegative cost functions of a scalar error
``u``, vanishing only at ``u = 0``:

* ``huber(u, k)``   -- classical Huber: quadratic inside ``|u| < k``,
  linear outside.
* ``c_gl(u, b)``    -- Gaussian-gap kernel: the 1-Wasserstein distance
  between two Gaussians centred ``u`` apart whose standard deviations
  differ by ``b``, shifted down by ``b*sqrt(2/pi)`` so the minimum is 0.
* ``c_gla(u, b)``   -- two-branch approximation of ``c_gl``: quadratic
  ``u^2 / (b*sqrt(2*pi))`` inside ``|u| < b``, linear
  ``|u| - b*sqrt(2/pi)`` outside.  Note the branches do NOT meet at
  ``|u| = b``; the kernel has a downward jump there, as defined.

``cost``/``cost_grad`` dispatch over the loss family described by a
:class:`LossSpec`.  Everything here is a pure function; inputs may be
scalars or numpy arrays (the result matches).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
SQRT_2PI = math.sqrt(2.0 * math.pi)


class LossVariant(enum.Enum):
    QR = "qr"
    QUANTILE_HUBER = "quantile_huber"
    GL = "gl"
    GLA = "gla"


@dataclass(frozen=True)
class LossSpec:
    """Selects a member of the loss family.

    ``threshold`` is the Huber threshold ``k`` for QUANTILE_HUBER and the
    noise gap ``b`` for GL/GLA; it is ignored by QR.  With ``adaptive``
    set, a training loop overwrites ``threshold`` once per epoch from the
    noise estimator.
    """

    variant: LossVariant
    threshold: float = 1.0
    adaptive: bool = False

    def __post_init__(self):
        if not isinstance(self.variant, LossVariant):
            raise ValueError(f"variant must be a LossVariant, got {self.variant!r}")
        if not math.isfinite(self.threshold) or self.threshold < 0:
            raise ValueError(f"threshold must be finite and >= 0, got {self.threshold}")

    def with_threshold(self, value: float) -> "LossSpec":
        return LossSpec(self.variant, value, self.adaptive)


def _check_error(u, name: str = "u"):
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError(f"{name} must be finite")
    return u


def _check_positive(value: float, name: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be finite and > 0, got {value}")
    return value


def huber(u, k):
    """Huber kernel: ``u^2/2`` for ``|u| < k``, else ``k*(|u| - k/2)``.

    Continuous at ``|u| = k`` where both branches equal ``k^2/2``.
    """
    k = _check_positive(k, "k")
    u = _check_error(u)
    au = np.abs(u)
    out = np.where(au < k, 0.5 * u * u, k * (au - 0.5 * k))
    return out if out.ndim else float(out)


def c_gl(u, b):
    """Gaussian-gap kernel.

    ``c_gl(u, b) = |u|*(1 - 2*Phi(-|u|/b)) + b*sqrt(2/pi)*exp(-u^2/(2 b^2))
    - b*sqrt(2/pi)`` with ``Phi`` the standard normal CDF.  Equals the
    1-Wasserstein distance between ``N(x, s1)`` and ``N(y, s2)`` with
    ``u = x - y`` and ``b = |s1 - s2|``, minus its value at ``u = 0``.

    Tends to ``|u|`` pointwise as ``b -> 0``; the exact ``b = 0`` limit is
    served by :func:`cost`, not here.
    """
    b = _check_positive(b, "b")
    u = _check_error(u)
    au = np.abs(u)
    z = au / b
    # Phi(-z) via the complementary error function: erfc(z/sqrt(2))/2
    cdf_tail = 0.5 * special.erfc(z / math.sqrt(2.0))
    out = au * (1.0 - 2.0 * cdf_tail) + b * SQRT_2_OVER_PI * (np.exp(-0.5 * z * z) - 1.0)
    # the formula is a difference of nearly-equal terms near u = 0
    out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


def c_gl_grad(u, b):
    """Derivative of :func:`c_gl` in ``u``.

    The CDF and exponential terms cancel, leaving
    ``d/du c_gl(u, b) = erf(u / (b*sqrt(2)))``: odd, smooth and bounded
    by 1 in magnitude (the bounded-slope robustness property).
    """
    b = _check_positive(b, "b")
    u = _check_error(u)
    out = special.erf(u / (b * math.sqrt(2.0)))
    return out if out.ndim else float(out)


def c_gla(u, b):
    """Two-branch approximation of :func:`c_gl`.

    ``u^2 / (b*sqrt(2*pi))`` for ``|u| < b``, else ``|u| - b*sqrt(2/pi)``.
    The quadratic coefficient is ``1/sqrt(2*pi)``, not ``1/2``, so unlike
    the Huber kernel the two branches do not meet at ``|u| = b``.
    """
    b = _check_positive(b, "b")
    u = _check_error(u)
    au = np.abs(u)
    out = np.where(au < b, u * u / (b * SQRT_2PI), au - b * SQRT_2_OVER_PI)
    return out if out.ndim else float(out)


def _sign(u):
    # deterministic subgradient: 0 at u == 0
    return np.sign(u)


def cost(spec: LossSpec, u):
    """Kernel value for one member of the loss family.

    QR -> ``|u|``; QUANTILE_HUBER -> ``huber(u, k) / k``; GL -> ``c_gl``;
    GLA -> ``c_gla``.  For GL/GLA a zero threshold takes the analytic
    ``b -> 0`` limit, which is ``|u|``.
    """
    if spec.variant is LossVariant.QR:
        u = _check_error(u)
        out = np.abs(u)
        return out if out.ndim else float(out)
    if spec.variant is LossVariant.QUANTILE_HUBER:
        out = huber(u, spec.threshold)
        return out / spec.threshold
    if spec.threshold == 0.0:
        u = _check_error(u)
        out = np.abs(u)
        return out if out.ndim else float(out)
    if spec.variant is LossVariant.GL:
        return c_gl(u, spec.threshold)
    return c_gla(u, spec.threshold)


def cost_grad(spec: LossSpec, u):
    """Derivative of :func:`cost` in ``u``.

    Subgradient conventions: 0 at ``u = 0`` for the QR kink, and the
    quadratic-branch value at the exact GLA breakpoint ``|u| = b``.
    """
    if spec.variant is LossVariant.QR or (
        spec.variant in (LossVariant.GL, LossVariant.GLA) and spec.threshold == 0.0
    ):
        u = _check_error(u)
        out = _sign(u)
        return out if out.ndim else float(out)
    if spec.variant is LossVariant.QUANTILE_HUBER:
        k = _check_positive(spec.threshold, "k")
        u = _check_error(u)
        out = np.clip(u / k, -1.0, 1.0)
        return out if out.ndim else float(out)
    if spec.variant is LossVariant.GL:
        return c_gl_grad(u, spec.threshold)
    b = _check_positive(spec.threshold, "b")
    u = _check_error(u)
    out = np.where(np.abs(u) <= b, 2.0 * u / (b * SQRT_2PI), _sign(u))
    return out if out.ndim else float(out)
