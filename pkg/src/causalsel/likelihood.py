"""Gaussian quasi-log-likelihood computed from zero-past moments.

The additive constant ``-n/2 log(2 pi)`` is dropped throughout; criterion
differences between models do not depend on it.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import NumericalError
from .models import ModelSpec, ParamVector, hat_moments

__all__ = ["LikelihoodValue", "lhat_n", "qhat_t", "qhat_terms"]


class LikelihoodValue(NamedTuple):
    """``l_hat = -1/2 * sum(q_terms)``; ``q_terms`` is ``None`` unless requested."""

    l_hat: float
    q_terms: np.ndarray | None = None


def qhat_t(x_t: float, f_hat: float, h_hat: float) -> float:
    """Single contrast term ``(x - f)^2 / h + log h``."""
    if not h_hat > 0:
        raise ValueError(f"conditional variance must be positive, got {h_hat}")
    r = x_t - f_hat
    return r * r / h_hat + math.log(h_hat)


def qhat_terms(x: np.ndarray, f_hat: np.ndarray, h_hat: np.ndarray) -> np.ndarray:
    """Vectorised :func:`qhat_t`."""
    if np.any(h_hat <= 0):
        raise ValueError("conditional variances must be positive")
    r = x - f_hat
    return r * r / h_hat + np.log(h_hat)


def lhat_n(spec: ModelSpec, theta: ParamVector, x, keep_terms: bool = False) -> LikelihoodValue:
    """Approximated quasi-log-likelihood of ``x`` at ``theta``.

    The sum is exactly rounded (``math.fsum``), so the value does not depend
    on summation order even for very long series.
    """
    arr = np.asarray(getattr(x, "values", x), dtype=float).reshape(-1)
    f, h = hat_moments(spec, theta, arr)
    q = qhat_terms(arr, f, h)
    l_hat = -0.5 * math.fsum(q.tolist())
    if not math.isfinite(l_hat):
        raise NumericalError("quasi-likelihood is not finite")
    return LikelihoodValue(l_hat, q if keep_terms else None)
