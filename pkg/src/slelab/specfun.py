"""Gauss hypergeometric function and gamma, restricted to real arguments in [0, 1).

Two parameter triples are first-class citizens: (3/4, 1/4; 3/2), which enters
the interface drift identity, and (1/3, 2/3; 4/3), which enters the crossing
formula.  All uses in this package evaluate at a cross-ratio, so only real
z in [0, 1) is supported and branch cuts never arise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Hyp2F1Params",
    "HYP_DRIFT",
    "HYP_CROSSING",
    "hyp2f1",
    "hyp2f1_log_derivative",
    "gamma_fn",
]

_MAX_TERMS = 100_000
_TERM_TOL = 1e-16


@dataclass(frozen=True)
class Hyp2F1Params:
    """Parameter triple (a, b; c) of the Gauss series."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.c <= 0 and self.c == round(self.c):
            raise ValueError(f"c={self.c} is a nonpositive integer; 2F1 undefined")

    def shifted(self) -> "Hyp2F1Params":
        """Parameters of the derivative series (a+1, b+1; c+1)."""
        return Hyp2F1Params(self.a + 1.0, self.b + 1.0, self.c + 1.0)


#: instance appearing in the driving-process drift identity
HYP_DRIFT = Hyp2F1Params(0.75, 0.25, 1.5)
#: instance appearing in the crossing-probability formula
HYP_CROSSING = Hyp2F1Params(1.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0)


def gamma_fn(x: float) -> float:
    """Gamma function for positive real x.

    Thin wrapper over the C library implementation (Lanczos-class accuracy,
    relative error well below 1e-12 on the positive axis).
    """
    if x <= 0:
        raise ValueError(f"gamma_fn requires x > 0, got {x}")
    return math.gamma(x)


def _series(a: float, b: float, c: float, z: float) -> float:
    """Raw Gauss series at z; caller guarantees |z| small enough to converge."""
    term = 1.0
    total = 1.0
    for n in range(_MAX_TERMS):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z
        total += term
        if abs(term) < _TERM_TOL * abs(total):
            return total
    raise ArithmeticError(f"2F1 series did not converge at z={z}")


def _series_arr(a: float, b: float, c: float, z: np.ndarray) -> np.ndarray:
    term = np.ones_like(z)
    total = np.ones_like(z)
    for n in range(_MAX_TERMS):
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1.0))) * z
        total = total + term
        if np.max(np.abs(term)) < _TERM_TOL * max(np.min(np.abs(total)), 1e-300):
            return total
    raise ArithmeticError("2F1 series did not converge for array input")


def _connection_coeffs(p: Hyp2F1Params) -> tuple[float, float, float]:
    """Coefficients (d, A, B) of the z -> 1-z connection formula.

    F(z) = A * F(a, b; a+b-c+1; 1-z) + B * (1-z)^d * F(c-a, c-b; c-a-b+1; 1-z)
    with d = c - a - b, valid when d is not an integer.
    """
    a, b, c = p.a, p.b, p.c
    d = c - a - b
    if abs(d - round(d)) < 1e-9:
        raise ValueError(
            f"connection formula needs nonintegral c-a-b, got {d} for {p}"
        )
    coef_a = math.gamma(c) * math.gamma(d) / (math.gamma(c - a) * math.gamma(c - b))
    coef_b = math.gamma(c) * math.gamma(-d) / (math.gamma(a) * math.gamma(b))
    return d, coef_a, coef_b


def hyp2f1(p: Hyp2F1Params, z):
    """2F1(a, b; c; z) for real z in [0, 1), absolute accuracy ~1e-12.

    The Gauss series is summed directly for z <= 1/2; beyond the switchover
    the z -> 1-z connection formula keeps the series well conditioned.
    Accepts a scalar or an ndarray.
    """
    if isinstance(z, np.ndarray):
        return _hyp2f1_arr(p, z)
    z = float(z)
    if not 0.0 <= z < 1.0:
        raise ValueError(f"hyp2f1 requires 0 <= z < 1, got {z}")
    if z <= 0.5:
        return _series(p.a, p.b, p.c, z)
    d, coef_a, coef_b = _connection_coeffs(p)
    a, b, c = p.a, p.b, p.c
    w = 1.0 - z
    return coef_a * _series(a, b, a + b - c + 1.0, w) + coef_b * w**d * _series(
        c - a, c - b, d + 1.0, w
    )


def _hyp2f1_arr(p: Hyp2F1Params, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any((z < 0.0) | (z >= 1.0)):
        raise ValueError("hyp2f1 requires 0 <= z < 1 elementwise")
    out = np.empty_like(z)
    lo = z <= 0.5
    if np.any(lo):
        out[lo] = _series_arr(p.a, p.b, p.c, z[lo])
    if np.any(~lo):
        d, coef_a, coef_b = _connection_coeffs(p)
        a, b, c = p.a, p.b, p.c
        w = 1.0 - z[~lo]
        out[~lo] = coef_a * _series_arr(a, b, a + b - c + 1.0, w) + coef_b * w**d * _series_arr(
            c - a, c - b, d + 1.0, w
        )
    return out


def hyp2f1_deriv(p: Hyp2F1Params, z):
    """d/dz 2F1(a, b; c; z) via the contiguous relation F' = (ab/c) F(a+1,b+1;c+1;z)."""
    return p.a * p.b / p.c * hyp2f1(p.shifted(), z)


def hyp2f1_log_derivative(p: Hyp2F1Params, z) -> float:
    """F'(z)/F(z) for real z in [0, 1)."""
    return hyp2f1_deriv(p, z) / hyp2f1(p, z)
