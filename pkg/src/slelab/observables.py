"""Closed-form continuum quantities for the four-marked-point geometry.

Everything is expressed through the gaps X = V - U and Y = W - V of three
ordered real points (the fourth marked point sits at infinity).  Most
formulas are coded twice on purpose: once in (X, Y) form and once through
the cross-ratio z = X/(X+Y), so transcription slips in the heavy algebra
get caught by the identity tests rather than silently agreeing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ellipk

from .specfun import HYP_CROSSING, HYP_DRIFT, gamma_fn, hyp2f1, hyp2f1_log_derivative

__all__ = [
    "DegenerateStateError",
    "MarkedState",
    "KAPPA_FK",
    "KAPPA_PERC",
    "fk_observable",
    "hsle_drift",
    "conditioned_drift",
    "p_measure_drift",
    "m_diffusion_coeff",
    "girsanov_cross_term",
    "hyp_link_term",
    "cardy",
    "percolation_drift",
    "rectangle_cross_ratio",
]

KAPPA_FK = 16.0 / 3.0
KAPPA_PERC = 6.0

# formulas are only evaluated away from degeneration; callers must stop first
_DEGENERACY_GUARD = 1e-12

_SQRT3 = math.sqrt(3.0)


class DegenerateStateError(ValueError):
    """Raised when a marked-point configuration has collapsed (X <= 0 or Y <= 0)."""


@dataclass(frozen=True)
class MarkedState:
    """Driving point U and marked points V, W on the real line, U < V < W."""

    u: float
    v: float
    w: float

    def __post_init__(self):
        if not (self.u < self.v < self.w):
            raise DegenerateStateError(
                f"marked points must satisfy U < V < W, got {self.u}, {self.v}, {self.w}"
            )

    @property
    def x(self) -> float:
        return self.v - self.u

    @property
    def y(self) -> float:
        return self.w - self.v

    @property
    def s(self) -> float:
        return self.w - self.u

    @property
    def z(self) -> float:
        return self.x / self.s


def _check_xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise DegenerateStateError("gaps X and Y must be strictly positive")
    s = x + y
    if np.any(np.minimum(x, y) / s <= _DEGENERACY_GUARD):
        raise DegenerateStateError("state too close to degeneration for stable evaluation")
    if x.ndim == 0:
        return float(x), float(y)
    return x, y


def _fk_observable_xy(x, y):
    return np.sqrt(1.0 + y / x) - np.sqrt(y / x)


def fk_observable(st: MarkedState) -> float:
    """Conditional crossing-pattern probability sqrt(1 + Y/X) - sqrt(Y/X).

    Equals (1 - sqrt(1-z)) / sqrt(z) in the cross-ratio coordinate; lies in
    (0, 1), tends to 1 as Y -> 0 and to 0 as X -> 0.
    """
    x, y = _check_xy(st.x, st.y)
    return float(_fk_observable_xy(x, y))


def _bracket_sqrt_minus_one(r):
    # -1 + sqrt(1 + r), computed cancellation-free for small r
    return r / (1.0 + np.sqrt(1.0 + r))


def _hsle_drift_xy(x, y):
    s = x + y
    return -2.0 / x + 2.0 / s - (4.0 / 3.0) * y * _bracket_sqrt_minus_one(x / y) / (x * s)


def hsle_drift(st: MarkedState) -> float:
    """Drift of the driving process when the noise term is +sqrt(16/3) dB."""
    x, y = _check_xy(st.x, st.y)
    return float(_hsle_drift_xy(x, y))


def _conditioned_drift_xy(x, y):
    s = x + y
    return 2.0 / x - 2.0 / s - (4.0 / 3.0) * y * (2.0 + np.sqrt(1.0 + x / y)) / (x * s)


def conditioned_drift(st: MarkedState) -> float:
    """Drift of the reweighted driving process (noise -sqrt(16/3) dB-hat).

    Algebraically identical to :func:`hsle_drift`; the reduction amounts to
    4/X - 4/(X+Y) = 4Y/(X(X+Y)).  Kept as an independent coding.
    """
    x, y = _check_xy(st.x, st.y)
    return float(_conditioned_drift_xy(x, y))


def _p_measure_drift_xy(x, y):
    m2 = _fk_observable_xy(x, y) ** 2
    return 2.0 / x - (1.0 / 3.0) * (3.0 * m2 * m2 + 2.0 * m2 + 1.0) * (1.0 - m2) ** 2 / (
        y * m2 * (m2 + 1.0) ** 2
    )


def p_measure_drift(st: MarkedState) -> float:
    """Drift of the driving process under the unconditioned interface law."""
    x, y = _check_xy(st.x, st.y)
    return float(_p_measure_drift_xy(x, y))


def _m_diffusion_coeff_xy(x, y):
    m = _fk_observable_xy(x, y)
    m2 = m * m
    return (1.0 - m2) ** 3 / (2.0 * _SQRT3 * y * m * (m2 + 1.0))


def m_diffusion_coeff(st: MarkedState) -> float:
    """dB-coefficient of the observable along the unconditioned flow."""
    x, y = _check_xy(st.x, st.y)
    return float(_m_diffusion_coeff_xy(x, y))


def _girsanov_cross_term_xy(x, y):
    m = _fk_observable_xy(x, y)
    return _m_diffusion_coeff_xy(x, y) / m


def girsanov_cross_term(st: MarkedState) -> float:
    """d<B, N>/dt for the log-weight martingale N (= diffusion coeff of M over M).

    Satisfies p_measure_drift - sqrt(16/3) * girsanov_cross_term ==
    conditioned_drift, which is the change-of-measure bookkeeping in full.
    """
    x, y = _check_xy(st.x, st.y)
    return float(_girsanov_cross_term_xy(x, y))


def hyp_link_term(st: MarkedState) -> float:
    """-(16/3) * F'(z)/F(z) * (1-z)/s with F = 2F1(3/4, 1/4; 3/2; .).

    Equals the third bracket term of the hSLE(16/3) drift; tested against the
    explicit algebraic form on a grid.
    """
    x, y = _check_xy(st.x, st.y)
    s = x + y
    z = x / s
    return -(16.0 / 3.0) * hyp2f1_log_derivative(HYP_DRIFT, z) * (1.0 - z) / s


_CARDY_CONST = gamma_fn(2.0 / 3.0) / (gamma_fn(4.0 / 3.0) * gamma_fn(1.0 / 3.0))


def cardy(z) -> float:
    """Crossing probability C * z^(1/3) * 2F1(1/3, 2/3; 4/3; z).

    The constant is fixed by the normalization cardy(z) -> 1 as z -> 1-,
    which the crossing-probability interpretation forces.
    """
    arr = isinstance(z, np.ndarray)
    zz = np.asarray(z, dtype=float)
    if np.any(zz <= 0.0) or np.any(zz >= 1.0):
        raise ValueError("cardy requires 0 < z < 1")
    val = _CARDY_CONST * zz ** (1.0 / 3.0) * hyp2f1(HYP_CROSSING, zz if arr else float(zz))
    return val if arr else float(val)


def _percolation_drift_xy(x, y):
    s = x + y
    z = x / s
    return -2.0 * (y / s) ** (1.0 / 3.0) / (x * hyp2f1(HYP_CROSSING, z))


def percolation_drift(st: MarkedState) -> float:
    """Drift of the conditioned percolation-interface driving process (kappa = 6)."""
    x, y = _check_xy(st.x, st.y)
    return float(_percolation_drift_xy(x, y))


def _aspect_of_modulus(k: float) -> float:
    # width/height of the conformal rectangle with elliptic modulus k
    return 2.0 * ellipk(k * k) / ellipk(1.0 - k * k)


def rectangle_cross_ratio(aspect: float) -> float:
    """Cross-ratio coordinate z of the four corners of a rectangle.

    A width:height = aspect rectangle maps conformally onto the upper
    half-plane with its corners (taken counterclockwise from bottom-left)
    going to U < V < W < infinity; z = (V-U)/(W-U).  In terms of the
    elliptic modulus k solving 2K(k)/K(k') = aspect, z = 4k/(1+k)^2.
    """
    if not aspect > 0.0:
        raise ValueError(f"aspect must be positive, got {aspect}")
    # _aspect_of_modulus is strictly increasing from 0 (k->0) to inf (k->1)
    lo, hi = 1e-15, 1.0 - 1e-15
    if aspect <= _aspect_of_modulus(lo):
        raise ValueError(f"aspect {aspect} out of resolvable range")
    if aspect >= _aspect_of_modulus(hi):
        raise ValueError(f"aspect {aspect} out of resolvable range")
    k = brentq(lambda kk: _aspect_of_modulus(kk) - aspect, lo, hi, xtol=1e-15, rtol=8.9e-16)
    return 4.0 * k / (1.0 + k) ** 2
