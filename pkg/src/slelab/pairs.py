"""Sampling the conditioned interface pair: one conditioned curve, then an
independent chordal curve in the slit domain it leaves behind.

The pair (curve from U0 toward infinity, curve from W0 to V0) is sampled in
either order.  The first curve is run as the conditioned kappa = 16/3 driver
(for order 2, after the reflection x -> -x which moves the start point W0
into the left-boundary role); the second is a chordal kappa = 16/3 curve
between the images of its endpoints in the uniformized complement, pulled
back through the first curve's inverse slit maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .drivers import DriverKind, DriverSpec, simulate
from .loewner import Trace, invert_map, trace
from .observables import KAPPA_FK, MarkedState

__all__ = ["PairSpec", "InterfacePair", "sample_pair", "crossing_height", "min_pair_distance"]


@dataclass(frozen=True)
class PairSpec:
    """Discretization and acceptance knobs for pair sampling."""

    dt: float = 2.5e-4
    t_max: float = 0.5
    seed: int = 0
    resolution: int = 4
    # chordal capacity of the second curve, in units of its endpoint gap squared
    chordal_capacity: float = 0.25
    # reject when a tracked image gap collapses below this fraction of W0 - U0
    collapse_fraction: float = 1e-3


@dataclass(eq=False)
class InterfacePair:
    initial: MarkedState
    first: Trace  # curve from U0
    second: Optional[Trace]  # curve from W0; None when rejected
    order: int  # which curve was sampled first (1 = the one from U0)
    accepted: bool
    note: str = ""


def _mirror_points(points: np.ndarray) -> np.ndarray:
    return -np.conjugate(points)


def _mobius_to_segment(points: np.ndarray, x: float, y: float) -> np.ndarray:
    """Image of a chordal run from 0 toward infinity under the map with
    0 -> x, infinity -> y (half-plane preserving since x > y)."""
    s = x - y
    return (y * points - x * s) / (points - s)


def sample_pair(initial: MarkedState, j: int, spec: PairSpec) -> InterfacePair:
    """Sample the interface pair, drawing curve j first (j = 1 or 2).

    Returns the pair with ``accepted=False`` (second curve omitted) when the
    first curve's uniformization leaves no usable gap between the tracked
    endpoint images of the second curve.
    """
    if j not in (1, 2):
        raise ValueError("j must be 1 or 2")
    scale = initial.w - initial.u
    min_gap = spec.collapse_fraction * scale
    seed_first = (spec.seed << 8) + 1
    seed_second = (spec.seed << 8) + 2

    if j == 1:
        hspec = DriverSpec(
            kind=DriverKind.HSLE_16_3, initial=initial, dt=spec.dt, t_max=spec.t_max,
            seed=seed_first,
        )
        path1 = simulate(hspec)
        first = trace(path1, spec.resolution)
        u_t = float(path1.u_values[-1])
        v_t = float(path1.v_values[-1])
        w_t = float(path1.w_values[-1])
        if min(v_t - u_t, w_t - v_t) < min_gap:
            return InterfacePair(initial, first, None, 1, False, "collapsed uniformization")
        gap = w_t - v_t
        cap = spec.chordal_capacity * gap * gap
        cspec = DriverSpec(
            kind=DriverKind.CHORDAL, kappa=KAPPA_FK,
            initial=_far_marked(0.0, scale), dt=cap / max(1, round(spec.t_max / spec.dt)),
            t_max=cap, seed=seed_second,
        )
        path2 = simulate(cspec)
        raw = trace(path2, spec.resolution)
        mapped = _mobius_to_segment(raw.points, x=w_t, y=v_t)
        mapped[0] = w_t  # the exact start point, before pullback
        second = Trace(points=invert_map(path1, mapped), times=raw.times)
        return InterfacePair(initial, first, second, 1, True)

    mirrored = MarkedState(-initial.w, -initial.v, -initial.u)
    hspec = DriverSpec(
        kind=DriverKind.HSLE_16_3, initial=mirrored, dt=spec.dt, t_max=spec.t_max,
        seed=seed_first,
    )
    path2m = simulate(hspec)
    tr2m = trace(path2m, spec.resolution)
    second = Trace(points=_mirror_points(tr2m.points), times=tr2m.times)
    u_t = float(path2m.u_values[-1])
    v_t = float(path2m.v_values[-1])
    w_t = float(path2m.w_values[-1])
    if min(v_t - u_t, w_t - v_t) < min_gap:
        return InterfacePair(initial, Trace(np.array([]), np.array([])), second, 2, False,
                             "collapsed uniformization")
    # in the mirrored frame the curve from U0 starts at the tracked image of
    # -U0 and targets infinity, so it is a plain chordal run
    cap = spec.chordal_capacity * scale * scale
    cspec = DriverSpec(
        kind=DriverKind.CHORDAL, kappa=KAPPA_FK,
        initial=_far_marked(w_t, scale), dt=cap / max(1, round(spec.t_max / spec.dt)),
        t_max=cap, seed=seed_second,
    )
    path1c = simulate(cspec)
    raw = trace(path1c, spec.resolution)
    pulled = invert_map(path2m, raw.points)
    first = Trace(points=_mirror_points(pulled), times=raw.times)
    return InterfacePair(initial, first, second, 2, True)


def _far_marked(u0: float, scale: float) -> MarkedState:
    # marked points parked far away so the stopping rule never fires for a
    # chordal run of desk-scale capacity
    return MarkedState(u0, u0 + 1e6 * scale, u0 + 2e6 * scale)


def crossing_height(pair: InterfacePair, ball_fraction: float = 0.4) -> float:
    """Max height of the curve from U0 before it first exits a reference ball.

    The ball radius is ball_fraction * (W0 - U0) around the start point; the
    functional is parametrization-free, so pairs sampled in either order are
    comparable.  Returns nan when the recorded curve never exits the ball.
    """
    pts = pair.first.points
    if len(pts) == 0:
        return float("nan")
    r = ball_fraction * (pair.initial.w - pair.initial.u)
    dist = np.abs(pts - pts[0])
    outside = np.flatnonzero(dist > r)
    if outside.size == 0:
        return float("nan")
    stop = outside[0]
    return float(np.max(pts[: stop + 1].imag))


def min_pair_distance(pair: InterfacePair) -> float:
    """Smallest distance between the two discrete traces (skipping boundary start points)."""
    if pair.second is None or len(pair.first) == 0 or len(pair.second) == 0:
        return float("nan")
    a = pair.first.points[1:]
    b = pair.second.points[1:]
    if len(a) == 0 or len(b) == 0:
        return float("nan")
    # pairwise distances in manageable blocks
    best = math.inf
    for lo in range(0, len(a), 512):
        blk = a[lo : lo + 512, None] - b[None, :]
        best = min(best, float(np.min(np.abs(blk))))
    return best
