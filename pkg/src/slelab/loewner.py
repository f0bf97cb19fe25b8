"""Forward Loewner maps and trace evaluation from a discretized driving path.

The driving function is treated as piecewise constant over each retained
step, for which the elementary map g(z) = U + sqrt((z - U)^2 + 4 dt) is the
exact solution of the Loewner equation.  Composing elementary maps gives the
forward map; composing inverses in reverse order evaluates the trace tip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .drivers import DrivingPath

__all__ = ["Trace", "MapResult", "forward_map", "trace", "invert_map", "trace_to_csv"]


@dataclass(eq=False)
class Trace:
    """Polyline approximation of a curve in the closed upper half-plane."""

    points: np.ndarray  # complex
    times: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


class MapResult(NamedTuple):
    value: complex
    absorbed: bool


def _steps_until(path: DrivingPath, t: float) -> int:
    dt = path.spec.dt
    k = int(round(t / dt))
    if abs(k * dt - t) > 1e-9 * max(1.0, abs(t)) or k < 0 or k > len(path.noise):
        raise ValueError(f"time {t} is not on the retained grid of the path")
    return k


def forward_map(path: DrivingPath, z: complex, t: float) -> MapResult:
    """Evaluate g_t(z) by composing the per-step elementary slit maps.

    Points that land inside a step's slit shadow are reported as absorbed
    rather than given a numeric value.
    """
    k_max = _steps_until(path, t)
    dt = path.spec.dt
    w = complex(z)
    if w.imag < 0:
        raise ValueError("forward_map is defined on the closed upper half-plane")
    for k in range(k_max):
        u = float(path.u_values[k])
        d = w - u
        if abs(d) < 1e-14:
            return MapResult(complex(u, 0.0), True)
        if abs(d.real) < 1e-14 and d.imag * d.imag < 4.0 * dt * (1.0 - 1e-12):
            # strictly inside this step's slit
            return MapResult(complex(u, 0.0), True)
        s = complex(np.sqrt(d * d + 4.0 * dt + 0j))
        if d.real < 0 or (d.real == 0 and s.imag < 0):
            s = -s
        w = u + s
    return MapResult(w, False)


def _invert_elementary(w: np.ndarray, u: float, dt: float) -> np.ndarray:
    """Inverse slit map z = u + sqrt((w-u)^2 - 4 dt), branch kept in the closure of H."""
    d = w - u
    s = np.sqrt(d * d - 4.0 * dt + 0j)
    # pick the root with nonnegative imaginary part; for real roots keep the side
    flip = (s.imag < 0) | ((np.abs(s.imag) < 1e-300) & ((d.real < 0) != (s.real < 0)))
    s = np.where(flip, -s, s)
    return u + s


def invert_map(path: DrivingPath, points: np.ndarray, t: float | None = None) -> np.ndarray:
    """Apply the inverse of g_t to an array of points (defaults to the full path)."""
    if t is None:
        k_max = len(path.noise)
    else:
        k_max = _steps_until(path, t)
    dt = path.spec.dt
    w = np.asarray(points, dtype=complex).copy()
    for k in range(k_max - 1, -1, -1):
        w = _invert_elementary(w, float(path.u_values[k]), dt)
    return w


def trace(path: DrivingPath, resolution: int = 1) -> Trace:
    """Curve points gamma(t_k) for every resolution-th retained step.

    The tip at capacity time t_k is the inverse image of U_k + i*sqrt(dt),
    computed by composing inverse elementary maps in reverse order.
    """
    if resolution < 1:
        raise ValueError("resolution must be a positive integer")
    n = len(path.noise)
    dt = path.spec.dt
    eps = math.sqrt(dt)
    ks = np.arange(1, n + 1, resolution)
    if len(ks) == 0 or ks[-1] != n:
        ks = np.append(ks, n) if n >= 1 else ks
    tips = path.u_values[ks] + 1j * eps
    w = np.array(tips, dtype=complex)
    for j in range(n - 1, -1, -1):
        mask = ks > j
        if not mask.any():
            break
        w[mask] = _invert_elementary(w[mask], float(path.u_values[j]), dt)
    points = np.concatenate([[complex(path.u_values[0], 0.0)], w])
    times = np.concatenate([[0.0], path.times[ks]])
    # clamp roundoff: tips must stay in the closed upper half-plane
    points = np.where(points.imag < 0, points.real + 0j, points)
    return Trace(points=points, times=times)


def trace_to_csv(tr: Trace, fileobj) -> None:
    fileobj.write("t,re,im\n")
    for t, p in zip(tr.times, tr.points):
        fileobj.write(f"{t:.10g},{p.real:.12g},{p.imag:.12g}\n")
