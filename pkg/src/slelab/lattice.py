"""Rectangular domains on the square-octagon lattice with 4 marked boundary points.

Geometry is handled in rotated coordinates (p, q) in which the white-octagon
centers sit on the integer lattice, black-octagon centers on the half-integer
lattice, and the small squares at mixed positions (one integer, one
half-integer coordinate).  The physical square-octagon picture is recovered
by x = p - q, y = p + q.

A domain of n_cols x n_rows white octagons carries:

* ``h`` squares at (p + 1/2, q), p < n_cols-1  -- one per horizontal bond,
* ``v`` squares at (p, q + 1/2), q < n_rows-1  -- one per vertical bond.

Each square has 4 corner ports (NE, NW, SW, SE); strands enter and leave
through ports.  The ``wiring`` array records the fixed strand connections:
link edges around interior black octagons, reflection arcs along the four
boundary arcs, and -1 at the four marked ports where the interfaces end.
The bottom/top arcs reflect around their white octagons (free sides), the
left/right arcs reflect around the flanking black octagons (wired sides),
and the mismatch of those two rules at the corners is what creates the four
dangling strand ends.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Tuple

import numpy as np

__all__ = [
    "NE",
    "NW",
    "SW",
    "SE",
    "DiscreteDomain",
    "build_rect_domain",
    "validate_domain",
    "domain_to_json",
    "domain_from_json",
]

NE, NW, SW, SE = 0, 1, 2, 3

KIND_H = 0  # square on a horizontal bond between white(p,q) and white(p+1,q)
KIND_V = 1  # square on a vertical bond between white(p,q) and white(p,q+1)

FACE_WHITE = 0
FACE_BLACK = 1
FACE_SQUARE = 2

ARC_NAMES = ("ab", "bc", "cd", "da")


@dataclass(frozen=True, eq=False)
class DiscreteDomain:
    """Immutable combinatorial + geometric description of one domain."""

    n_cols: int
    n_rows: int
    mesh: float
    sq_kind: np.ndarray  # uint8[n_squares]
    sq_p: np.ndarray  # int32[n_squares]
    sq_q: np.ndarray  # int32[n_squares]
    wiring: np.ndarray  # int32[4*n_squares], symmetric involution, -1 at marked
    marked: Tuple[int, int, int, int]  # port ids of (a, b, c, d), counterclockwise
    face_kind: np.ndarray  # uint8[n_faces]
    face_center: np.ndarray  # float64[n_faces, 2], lattice (x, y) units
    arc_octagons: Dict[str, np.ndarray]  # arc -> indices into the face table
    boundary_arcs: Dict[str, np.ndarray]  # arc -> vertex polyline, physical coords

    @property
    def n_squares(self) -> int:
        return len(self.sq_kind)

    @property
    def n_ports(self) -> int:
        return 4 * self.n_squares

    def face_counts(self) -> Dict[str, int]:
        kinds = self.face_kind
        return {
            "white": int(np.sum(kinds == FACE_WHITE)),
            "black": int(np.sum(kinds == FACE_BLACK)),
            "square": int(np.sum(kinds == FACE_SQUARE)),
        }

    def port_position(self, port: int) -> np.ndarray:
        """Representative physical coordinates of a corner vertex."""
        sq, corner = divmod(port, 4)
        center = _square_center_xy(self.sq_kind[sq], self.sq_p[sq], self.sq_q[sq])
        w, b = _corner_neighbors(self.sq_kind[sq], self.sq_p[sq], self.sq_q[sq], corner)
        pos = center / 2.0 + (_white_xy(*w) + _black_xy(*b)) / 4.0
        return pos * self.mesh / np.sqrt(2.0)


def _white_xy(p: int, q: int) -> np.ndarray:
    return np.array([p - q, p + q], dtype=float)


def _black_xy(p2: int, q2: int) -> np.ndarray:
    # black octagon at (p2/2, q2/2) in (p, q) with both coordinates half-integral
    return np.array([(p2 - q2) / 2.0, (p2 + q2) / 2.0], dtype=float)


def _square_center_xy(kind: int, p: int, q: int) -> np.ndarray:
    if kind == KIND_H:
        return np.array([p + 0.5 - q, p + 0.5 + q], dtype=float)
    return np.array([p - q - 0.5, p + q + 0.5], dtype=float)


def _corner_neighbors(kind: int, p: int, q: int, corner: int):
    """(white (p,q), black (2p, 2q) doubled) octagons meeting at a square corner."""
    if kind == KIND_H:
        white = {NE: (p + 1, q), NW: (p, q), SW: (p, q), SE: (p + 1, q)}[corner]
        black = {
            NE: (2 * p + 1, 2 * q + 1),
            NW: (2 * p + 1, 2 * q + 1),
            SW: (2 * p + 1, 2 * q - 1),
            SE: (2 * p + 1, 2 * q - 1),
        }[corner]
    else:
        white = {NE: (p, q + 1), NW: (p, q + 1), SW: (p, q), SE: (p, q)}[corner]
        black = {
            NE: (2 * p + 1, 2 * q + 1),
            NW: (2 * p - 1, 2 * q + 1),
            SW: (2 * p - 1, 2 * q + 1),
            SE: (2 * p + 1, 2 * q + 1),
        }[corner]
    return white, black


def build_rect_domain(n_cols: int, n_rows: int, mesh: float) -> DiscreteDomain:
    """Rectangular block of n_cols x n_rows white octagons, marked at the corners.

    Counterclockwise marked points: a bottom-left, b bottom-right, c top-right,
    d top-left.  The bottom/top arcs [ab], [cd] run along white octagons (free
    sides); the left/right arcs [da], [bc] along black octagons (wired sides).
    """
    if n_cols < 2 or n_rows < 2:
        raise ValueError(f"domain needs at least 2x2 octagons, got {n_cols}x{n_rows}")
    if not mesh > 0:
        raise ValueError(f"mesh must be positive, got {mesh}")
    na, nb = n_cols - 1, n_rows - 1  # bond counts per direction

    n_h = na * (nb + 1)
    n_v = (na + 1) * nb
    n_sq = n_h + n_v

    sq_kind = np.empty(n_sq, dtype=np.uint8)
    sq_p = np.empty(n_sq, dtype=np.int32)
    sq_q = np.empty(n_sq, dtype=np.int32)

    def h_idx(p, q):
        return q * na + p

    def v_idx(p, q):
        return n_h + q * (na + 1) + p

    for q in range(nb + 1):
        for p in range(na):
            i = h_idx(p, q)
            sq_kind[i], sq_p[i], sq_q[i] = KIND_H, p, q
    for q in range(nb):
        for p in range(na + 1):
            i = v_idx(p, q)
            sq_kind[i], sq_p[i], sq_q[i] = KIND_V, p, q

    wiring = np.full(4 * n_sq, -2, dtype=np.int32)

    def connect(u, v):
        if wiring[u] != -2 or wiring[v] != -2:
            raise AssertionError("port wired twice during construction")
        wiring[u] = v
        wiring[v] = u

    # link edges around every interior black octagon
    for q in range(nb):
        for p in range(na):
            connect(4 * h_idx(p, q) + NW, 4 * v_idx(p, q) + SE)
            connect(4 * h_idx(p, q) + NE, 4 * v_idx(p + 1, q) + SW)
            connect(4 * h_idx(p, q + 1) + SW, 4 * v_idx(p, q) + NE)
            connect(4 * h_idx(p, q + 1) + SE, 4 * v_idx(p + 1, q) + NW)

    # free arcs: reflection around each interior boundary white octagon
    for p in range(1, na):
        connect(4 * h_idx(p - 1, 0) + SE, 4 * h_idx(p, 0) + SW)
        connect(4 * h_idx(p - 1, nb) + NE, 4 * h_idx(p, nb) + NW)
    # wired arcs: reflection around each flanking black octagon
    for q in range(nb):
        connect(4 * v_idx(0, q) + SW, 4 * v_idx(0, q) + NW)
        connect(4 * v_idx(na, q) + SE, 4 * v_idx(na, q) + NE)

    marked = (
        4 * h_idx(0, 0) + SW,
        4 * h_idx(na - 1, 0) + SE,
        4 * h_idx(na - 1, nb) + NE,
        4 * h_idx(0, nb) + NW,
    )
    for m in marked:
        if wiring[m] != -2:
            raise AssertionError("marked port already wired")
        wiring[m] = -1
    if np.any(wiring == -2):
        raise AssertionError("unwired port left after construction")

    # face table: white octagons, interior + wired-chain black octagons, squares
    kinds: List[int] = []
    centers: List[np.ndarray] = []
    white_index = {}
    black_index = {}
    for q in range(nb + 1):
        for p in range(na + 1):
            white_index[(p, q)] = len(kinds)
            kinds.append(FACE_WHITE)
            centers.append(_white_xy(p, q))
    for q in range(nb):
        for p in range(na):
            black_index[(2 * p + 1, 2 * q + 1)] = len(kinds)
            kinds.append(FACE_BLACK)
            centers.append(_black_xy(2 * p + 1, 2 * q + 1))
    for q in range(nb):
        for p2 in (-1, 2 * na + 1):  # chain octagons just outside the wired arcs
            black_index[(p2, 2 * q + 1)] = len(kinds)
            kinds.append(FACE_BLACK)
            centers.append(_black_xy(p2, 2 * q + 1))
    for i in range(n_sq):
        kinds.append(FACE_SQUARE)
        centers.append(_square_center_xy(sq_kind[i], sq_p[i], sq_q[i]))

    arc_octagons = {
        "ab": np.array([white_index[(p, 0)] for p in range(na + 1)], dtype=np.int64),
        "bc": np.array([black_index[(2 * na + 1, 2 * q + 1)] for q in range(nb)], dtype=np.int64),
        "cd": np.array([white_index[(p, nb)] for p in range(na, -1, -1)], dtype=np.int64),
        "da": np.array([black_index[(-1, 2 * q + 1)] for q in range(nb - 1, -1, -1)], dtype=np.int64),
    }

    dom = DiscreteDomain(
        n_cols=n_cols,
        n_rows=n_rows,
        mesh=float(mesh),
        sq_kind=sq_kind,
        sq_p=sq_p,
        sq_q=sq_q,
        wiring=wiring,
        marked=marked,
        face_kind=np.array(kinds, dtype=np.uint8),
        face_center=np.array(centers, dtype=float),
        arc_octagons=arc_octagons,
        boundary_arcs={},
    )
    object.__setattr__(dom, "boundary_arcs", _boundary_arcs(dom, h_idx, v_idx, na, nb))
    return dom


def _boundary_arcs(dom: DiscreteDomain, h_idx, v_idx, na, nb) -> Dict[str, np.ndarray]:
    pos = dom.port_position

    def polyline(ports):
        return np.array([pos(p) for p in ports])

    a, b, c, d = dom.marked
    ab = [a]
    for p in range(1, na):
        ab += [4 * h_idx(p - 1, 0) + SE, 4 * h_idx(p, 0) + SW]
    ab.append(b)
    bc = [b]
    for q in range(nb):
        bc += [4 * v_idx(na, q) + SE, 4 * v_idx(na, q) + NE]
    bc.append(c)
    cd = [c]
    for p in range(na - 1, 0, -1):
        cd += [4 * h_idx(p, nb) + NW, 4 * h_idx(p - 1, nb) + NE]
    cd.append(d)
    da = [d]
    for q in range(nb - 1, -1, -1):
        da += [4 * v_idx(0, q) + NW, 4 * v_idx(0, q) + SW]
    da.append(a)
    return {"ab": polyline(ab), "bc": polyline(bc), "cd": polyline(cd), "da": polyline(da)}


def validate_domain(dom: DiscreteDomain) -> List[str]:
    """Check every structural invariant; returns a list of violations (empty = valid)."""
    bad: List[str] = []
    wiring = dom.wiring
    n_ports = dom.n_ports

    if len(dom.marked) != 4:
        bad.append(f"expected 4 marked points, got {len(dom.marked)}")
    marked = set(dom.marked)
    for port in range(n_ports):
        w = wiring[port]
        if port in marked:
            if w != -1:
                bad.append(f"marked port {port} is wired")
        elif w < 0 or w >= n_ports:
            bad.append(f"port {port} has no partner")
        elif wiring[w] != port:
            bad.append(f"wiring not symmetric at port {port}")
        elif w == port:
            bad.append(f"port {port} wired to itself")

    # counterclockwise order of the marked vertices
    pts = [dom.port_position(m) for m in dom.marked]
    area = 0.0
    for i in range(4):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % 4]
        area += x1 * y2 - x2 * y1
    if area <= 0.0:
        bad.append("marked points are not in counterclockwise order")

    # each marked point is a joint of one white and one black octagon and a square
    for name, m in zip("abcd", dom.marked):
        sq, corner = divmod(m, 4)
        w, blk = _corner_neighbors(dom.sq_kind[sq], dom.sq_p[sq], dom.sq_q[sq], corner)
        wx, wy = _white_xy(*w)
        bx, by = _black_xy(*blk)
        if int(round(wx + wy)) % 2 != 0:
            bad.append(f"marked point {name}: white-octagon neighbor has odd parity")
        if int(round(bx + by)) % 2 != 1:
            bad.append(f"marked point {name}: black-octagon neighbor has even parity")

    # octagon coloring must match lattice parity throughout the face table
    for idx in range(len(dom.face_kind)):
        kind = dom.face_kind[idx]
        if kind == FACE_SQUARE:
            continue
        x, y = dom.face_center[idx]
        parity = int(round(x + y)) % 2
        if kind == FACE_WHITE and parity != 0:
            bad.append(f"face {idx} marked white but sits on odd sublattice")
        if kind == FACE_BLACK and parity != 1:
            bad.append(f"face {idx} marked black but sits on even sublattice")

    # arcs [ab], [cd] must run along white octagons, [bc], [da] along black
    want = {"ab": FACE_WHITE, "cd": FACE_WHITE, "bc": FACE_BLACK, "da": FACE_BLACK}
    for arc in ARC_NAMES:
        if arc not in dom.arc_octagons:
            bad.append(f"missing arc {arc}")
            continue
        for idx in dom.arc_octagons[arc]:
            if dom.face_kind[idx] != want[arc]:
                got = "white" if dom.face_kind[idx] == FACE_WHITE else "black"
                need = "white" if want[arc] == FACE_WHITE else "black"
                bad.append(f"arc [{arc}] touches a {got} octagon where {need} is required")
                break

    # small-square count equals the number of primal bonds of the white grid
    na, nb = dom.n_cols - 1, dom.n_rows - 1
    if dom.n_squares != na * (nb + 1) + (na + 1) * nb:
        bad.append("small-square count does not match the bond count of the white grid")

    return bad


def domain_to_json(dom: DiscreteDomain) -> str:
    return json.dumps({"n_cols": dom.n_cols, "n_rows": dom.n_rows, "mesh": dom.mesh})


def domain_from_json(text: str) -> DiscreteDomain:
    spec = json.loads(text)
    return build_rect_domain(spec["n_cols"], spec["n_rows"], spec["mesh"])


def reordered_marked(dom: DiscreteDomain, order: Tuple[int, int, int, int]) -> DiscreteDomain:
    """Copy of the domain with marked points permuted (for validation tests)."""
    return replace(dom, marked=tuple(dom.marked[i] for i in order))
