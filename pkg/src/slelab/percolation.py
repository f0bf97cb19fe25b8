"""Critical site percolation on the triangular lattice in a four-marked quad.

Sites live at j + k * exp(i pi/3) for integer (j, k) inside a parallelogram;
the marked corners are a = (0, 0), b = (w, 0), c = (w, h), d = (0, h),
counterclockwise.  Crossing means an open-site path from the bottom arc [ab]
to the top arc [cd].  Crossing detection by cluster labeling is the primary
method; an exploration-path walker along the open/closed interface is kept
as an independent per-sample cross-check of the arc-pattern identification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage
from scipy.integrate import quad
from scipy.optimize import brentq

__all__ = [
    "TriDomain",
    "sample_percolation",
    "has_crossing",
    "estimate_crossing",
    "exploration_crossing",
    "parallelogram_cross_ratio",
    "aspect_for_cross_ratio",
]

#: open probability at the critical point of triangular-lattice site percolation
P_OPEN = 0.5

# neighbor offsets (dj, dk) of the triangular lattice in lattice coordinates
_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))

# label connectivity for arrays indexed [k, j]
_STRUCTURE = np.array([[0, 1, 1], [1, 1, 1], [1, 1, 0]], dtype=int)


@dataclass(frozen=True)
class TriDomain:
    """Parallelogram of (width+1) x (height+1) sites, marked at the corners."""

    width: int
    height: int
    mesh: float = 1.0

    def __post_init__(self):
        if self.width < 0 or self.height < 0:
            raise ValueError("domain extents must be nonnegative")
        if not self.mesh > 0:
            raise ValueError("mesh must be positive")

    @property
    def n_sites(self) -> int:
        return (self.width + 1) * (self.height + 1)

    @property
    def marked(self) -> Tuple[Tuple[int, int], ...]:
        w, h = self.width, self.height
        return ((0, 0), (w, 0), (w, h), (0, h))

    def site_position(self, j: int, k: int) -> complex:
        return self.mesh * (j + k * complex(0.5, math.sqrt(3.0) / 2.0))


def sample_percolation(dom: TriDomain, seed: int) -> np.ndarray:
    """Independent fair site states, indexed [k, j] (True = open)."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    return rng.random((dom.height + 1, dom.width + 1)) < P_OPEN


def has_crossing(config: np.ndarray, dom: TriDomain) -> bool:
    """True iff an open path joins the bottom arc [ab] to the top arc [cd]."""
    if config.shape != (dom.height + 1, dom.width + 1):
        raise ValueError("configuration shape does not match the domain")
    if dom.height == 0:
        return bool(config[0].any())
    labels, n = ndimage.label(config, structure=_STRUCTURE)
    if n == 0:
        return False
    bottom = labels[0][config[0]]
    top = labels[-1][config[-1]]
    if bottom.size == 0 or top.size == 0:
        return False
    return bool(np.isin(np.unique(bottom), np.unique(top)).any())


def estimate_crossing(dom: TriDomain, n: int, seed: int) -> Tuple[float, float]:
    """Monte Carlo crossing probability with its binomial standard error."""
    if n < 100:
        raise ValueError("n must be at least 100")
    hits = 0
    for i in range(n):
        cfg = sample_percolation(dom, seed=(seed << 24) + i)
        hits += has_crossing(cfg, dom)
    p = hits / n
    se = math.sqrt(max(p * (1.0 - p), 1.0 / n) / n)
    return p, se


# ---------------------------------------------------------------------------
# exploration-path cross-check


def _site_state(config: np.ndarray, dom: TriDomain, j: int, k: int) -> bool:
    """Site state with phantom boundary: open beyond [ab] and [cd], closed beyond [bc] and [da]."""
    w, h = dom.width, dom.height
    if 0 <= j <= w and 0 <= k <= h:
        return bool(config[k, j])
    if j < 0 or j > w:
        return False
    return True


def _common_neighbors(a: Tuple[int, int], b: Tuple[int, int]):
    out = []
    for dj, dk in _OFFSETS:
        c = (a[0] + dj, a[1] + dk)
        if (b[0] - c[0], b[1] - c[1]) in _OFFSETS:
            out.append(c)
    if len(out) != 2:
        raise AssertionError(f"sites {a}, {b} are not adjacent on the triangular lattice")
    return out


def exploration_crossing(config: np.ndarray, dom: TriDomain) -> bool:
    """Classify the arc pattern by walking the interface from corner a.

    The walker moves along the hexagonal dual edges keeping open sites on its
    left and closed sites on its right, with phantom-open boundary beyond the
    arcs [ab], [cd] and phantom-closed beyond [bc], [da].  It must exit at
    corner b or d; exiting at d is the crossing pattern.  Agreement with
    :func:`has_crossing` on every sample is an invariant of the model.
    """
    w, h = dom.width, dom.height
    left = (0, -1)  # phantom-open below the bottom arc
    right = (-1, 0)  # phantom-closed left of a
    third = (0, 0)
    max_steps = 16 * (w + 2) * (h + 2)
    for _ in range(max_steps):
        if _site_state(config, dom, *third):
            new_left, new_right, prev = third, right, left
        else:
            new_left, new_right, prev = left, third, right
        cands = _common_neighbors(new_left, new_right)
        third = cands[0] if cands[1] == prev else cands[1]
        left, right = new_left, new_right
        lj, lk = left
        rj, rk = right
        l_real = 0 <= lj <= w and 0 <= lk <= h
        r_real = 0 <= rj <= w and 0 <= rk <= h
        if not l_real and not r_real:
            # exited through a corner gap; classify by the nearest corner
            mid = ((lj + rj) / 2.0, (lk + rk) / 2.0)
            corners = {"a": (0, 0), "b": (w, 0), "c": (w, h), "d": (0, h)}
            name = min(
                corners,
                key=lambda nm: (mid[0] - corners[nm][0]) ** 2 + (mid[1] - corners[nm][1]) ** 2,
            )
            if name == "a":
                raise AssertionError("exploration path returned to its starting corner")
            if name == "c":
                raise AssertionError("exploration path ended at corner c")
            return name == "d"
    raise AssertionError("exploration path failed to terminate")


# ---------------------------------------------------------------------------
# conformal geometry of the 60-degree parallelogram


def _side_lengths(x: float) -> Tuple[float, float]:
    """|ab| and |bc| of the Schwarz-Christoffel image with prevertices (0, 1, x, inf)."""
    f1 = lambda t: (x - t) ** (-2.0 / 3.0)
    l1 = quad(f1, 0.0, 1.0, weight="alg", wvar=(-2.0 / 3.0, -1.0 / 3.0))[0]
    f2 = lambda t: t ** (-2.0 / 3.0)
    l2 = quad(f2, 1.0, x, weight="alg", wvar=(-1.0 / 3.0, -2.0 / 3.0))[0]
    return l1, l2


def parallelogram_cross_ratio(width: float, height: float) -> float:
    """Cross-ratio z of the four corners of a 60-degree parallelogram.

    The corners (counterclockwise from the 60-degree corner at the origin)
    map to U < V < W < infinity; z = (V-U)/(W-U) = 1/x where x is the finite
    prevertex solving side-ratio(x) = width/height.
    """
    if width <= 0 or height <= 0:
        raise ValueError("sides must be positive")
    ratio = width / height

    def objective(x):
        l1, l2 = _side_lengths(x)
        return l1 / l2 - ratio

    lo, hi = 1.0 + 1e-8, 1e8
    if objective(lo) < 0 or objective(hi) > 0:
        raise ValueError(f"side ratio {ratio} outside the resolvable range")
    x = brentq(objective, lo, hi, xtol=1e-12, rtol=1e-13)
    return 1.0 / x


def aspect_for_cross_ratio(z: float) -> float:
    """Side ratio width/height of the 60-degree parallelogram with corner cross-ratio z."""
    if not 0.0 < z < 1.0:
        raise ValueError("z must lie in (0, 1)")
    l1, l2 = _side_lengths(1.0 / z)
    return l1 / l2
