"""Loop representation of the critical random-cluster interface model.

A configuration assigns one bit to every small square of a
:class:`~slelab.lattice.DiscreteDomain`.  Pairing bit 0 joins the square's
corners as {NE-NW, SW-SE} (its north and south sides carry strands), bit 1
joins {NE-SE, NW-SW} (east and west sides).  Together with the fixed wiring
of the domain this decomposes the strand system into closed loops plus
exactly two open interfaces: one from marked point a ending at b or d, one
from c ending at d or b.

Configurations are weighted by sqrt(2)^(number of loops), where the count
follows the enhanced convention: if the interface from a ends at b, the
interface pair closed up through the external arcs contributes one extra
loop.  On a symmetric domain this extra factor is exactly what pushes the
crossing-pattern probability from 1/2 toward sqrt(2) - 1 in the fine-mesh
limit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .lattice import DiscreteDomain

__all__ = [
    "ArcPattern",
    "FkParams",
    "LoopConfig",
    "analyze",
    "loop_count",
    "weight",
    "enumerate_exact",
    "mcmc_sample",
    "LoopChain",
    "extract_interfaces",
    "classify",
    "estimate_arc_probability",
]

SQRT2 = math.sqrt(2.0)

_ENUM_MAX_SQUARES = 25


class ArcPattern(enum.Enum):
    AD_CB = "AD_CB"  # interface from a ends at d (and c pairs with b)
    AB_CD = "AB_CD"  # interface from a ends at b (and c pairs with d)


@dataclass(frozen=True)
class FkParams:
    """Model constants; only the critical q = 2 point is supported."""

    q: float = 2.0
    p: float = SQRT2 / (1.0 + SQRT2)
    loop_weight_base: float = SQRT2


@dataclass(frozen=True, eq=False)
class LoopConfig:
    """One configuration with its derived strand decomposition."""

    square_states: np.ndarray  # uint8[n_squares]
    loops: Tuple[Tuple[int, ...], ...]  # closed port cycles
    interfaces: Tuple[Tuple[int, ...], Tuple[int, ...]]  # port paths from a and c
    closed_loops: int
    loop_count: int  # enhanced count entering the weight
    pattern: ArcPattern


def _partner(states: np.ndarray, port: int) -> int:
    sq, corner = divmod(port, 4)
    if states[sq] == 0:
        return 4 * sq + (corner ^ 1)
    return 4 * sq + (3 - corner)


def analyze(domain: DiscreteDomain, states: np.ndarray) -> LoopConfig:
    """Trace the full strand decomposition of one configuration."""
    states = np.ascontiguousarray(states, dtype=np.uint8)
    if len(states) != domain.n_squares:
        raise ValueError("state vector length does not match the domain")
    wiring = domain.wiring
    visited = np.zeros(domain.n_ports, dtype=bool)

    def walk_path(start: int) -> Tuple[int, ...]:
        path = [start]
        visited[start] = True
        port = start
        while True:
            nxt = _partner(states, port)
            if visited[nxt]:
                raise AssertionError("strand revisits a port; inconsistent configuration")
            path.append(nxt)
            visited[nxt] = True
            w = wiring[nxt]
            if w == -1:
                return tuple(path)
            if visited[w]:
                raise AssertionError("strand revisits a port; inconsistent configuration")
            path.append(w)
            visited[w] = True
            port = w

    a, b, c, d = domain.marked
    path_a = walk_path(a)
    path_c = walk_path(c)
    end_a, end_c = path_a[-1], path_c[-1]
    if end_a == b:
        pattern = ArcPattern.AB_CD
        expected_c = d
    elif end_a == d:
        pattern = ArcPattern.AD_CB
        expected_c = b
    else:
        raise AssertionError("interface from a must end at b or d")
    if end_c != expected_c:
        raise AssertionError("interface endpoints are not a consistent pairing")

    loops: List[Tuple[int, ...]] = []
    for p0 in range(domain.n_ports):
        if visited[p0]:
            continue
        cycle = []
        port = p0
        while True:
            cycle.append(port)
            visited[port] = True
            nxt = _partner(states, port)
            cycle.append(nxt)
            visited[nxt] = True
            port = wiring[nxt]
            if port == p0:
                break
        loops.append(tuple(cycle))

    closed = len(loops)
    enhanced = closed + (1 if pattern is ArcPattern.AB_CD else 0)
    return LoopConfig(
        square_states=states,
        loops=tuple(loops),
        interfaces=(path_a, path_c),
        closed_loops=closed,
        loop_count=enhanced,
        pattern=pattern,
    )


def _as_config(config, domain: DiscreteDomain) -> LoopConfig:
    if isinstance(config, LoopConfig):
        return config
    return analyze(domain, np.asarray(config, dtype=np.uint8))


def loop_count(config, domain: DiscreteDomain) -> int:
    """Enhanced loop count (closed loops, plus one for the a-b arc pattern)."""
    return _as_config(config, domain).loop_count


def weight(config, domain: Optional[DiscreteDomain] = None) -> float:
    """Configuration weight sqrt(2)^loop_count."""
    if not isinstance(config, LoopConfig):
        if domain is None:
            raise ValueError("weight of a raw state vector needs the domain")
        config = analyze(domain, np.asarray(config, dtype=np.uint8))
    return SQRT2**config.loop_count


def extract_interfaces(config, domain: DiscreteDomain):
    """The two open strands as port paths, starting at marked points a and c."""
    cfg = _as_config(config, domain)
    return cfg.interfaces


def classify(config, domain: DiscreteDomain) -> ArcPattern:
    """Internal arc pattern: AD_CB iff the interface from a ends at d."""
    return _as_config(config, domain).pattern


def interface_points(domain: DiscreteDomain, path) -> np.ndarray:
    """Physical coordinates along one interface port path."""
    return np.array([domain.port_position(p) for p in path])


# ---------------------------------------------------------------------------
# exact enumeration


def _enumerate_weights(domain: DiscreteDomain):
    n = domain.n_squares
    if n > _ENUM_MAX_SQUARES:
        raise ValueError(
            f"enumeration limited to {_ENUM_MAX_SQUARES} squares, domain has {n}"
        )
    bits = np.arange(n)
    codes = np.arange(2**n, dtype=np.int64)
    weights = np.empty(2**n)
    patterns = np.empty(2**n, dtype=np.uint8)
    for code in codes:
        states = ((code >> bits) & 1).astype(np.uint8)
        cfg = analyze(domain, states)
        weights[code] = SQRT2**cfg.loop_count
        patterns[code] = 1 if cfg.pattern is ArcPattern.AB_CD else 0
    return weights, patterns


def enumerate_exact(domain: DiscreteDomain) -> Dict[ArcPattern, float]:
    """Exact arc-pattern distribution by brute force over all configurations."""
    weights, patterns = _enumerate_weights(domain)
    total = weights.sum()
    p_ab = weights[patterns == 1].sum() / total
    return {ArcPattern.AD_CB: 1.0 - p_ab, ArcPattern.AB_CD: p_ab}


def enumerate_config_distribution(domain: DiscreteDomain) -> np.ndarray:
    """Exact probability of every configuration, indexed by its bit code."""
    weights, _ = _enumerate_weights(domain)
    return weights / weights.sum()


# ---------------------------------------------------------------------------
# Metropolis sampling


def _flip_delta(
    states: np.ndarray,
    wiring: np.ndarray,
    s: int,
    marked: Tuple[int, int, int, int],
    pattern_ab: bool,
) -> Tuple[int, bool]:
    """Change in enhanced loop count if square s were flipped, and new pattern.

    Only the strands through s are retraced; everything else is untouched by a
    single flip, so the walk cost is the total length of those strands.
    """
    base = 4 * s
    ports = (base, base + 1, base + 2, base + 3)

    # external connection of each port: another port of s, or a marked endpoint
    ext: Dict[int, Tuple[str, int]] = {}
    for u in ports:
        if u in ext:
            continue
        if wiring[u] == -1:
            ext[u] = ("end", u)
            continue
        x = wiring[u]
        if x // 4 == s:
            ext[u] = ("port", x)
            ext[x] = ("port", u)
            continue
        while True:
            xs, xc = divmod(x, 4)
            y = 4 * xs + ((xc ^ 1) if states[xs] == 0 else (3 - xc))
            w = wiring[y]
            if w == -1:
                ext[u] = ("end", y)
                break
            if w // 4 == s:
                ext[u] = ("port", w)
                ext[w] = ("port", u)
                break
            x = w

    def survey(state_bit: int) -> Tuple[int, Dict[int, int]]:
        if state_bit == 0:
            pairing = {base: base + 1, base + 1: base, base + 2: base + 3, base + 3: base + 2}
        else:
            pairing = {base: base + 3, base + 3: base, base + 1: base + 2, base + 2: base + 1}
        cycles = 0
        endmatch: Dict[int, int] = {}
        seen = set()
        # path components: walk from each dangling end to its partner end
        for u in ports:
            if u in seen or ext[u][0] != "end":
                continue
            end_here = ext[u][1]
            seen.add(u)
            cur = u
            while True:
                nxt = pairing[cur]
                seen.add(nxt)
                kind, tgt = ext[nxt]
                if kind == "end":
                    endmatch[end_here] = tgt
                    endmatch[tgt] = end_here
                    break
                cur = tgt
                seen.add(cur)
        # everything left alternates internal/external arcs in closed cycles
        for u in ports:
            if u in seen:
                continue
            cur = u
            while True:
                seen.add(cur)
                nxt = pairing[cur]
                seen.add(nxt)
                _, tgt = ext[nxt]
                cur = tgt
                if cur == u:
                    cycles += 1
                    break
        return cycles, endmatch

    cycles_old, _ = survey(states[s])
    cycles_new, ends_new = survey(states[s] ^ 1)

    a, b, c, d = marked
    if ends_new:
        if a in ends_new:
            new_ab = ends_new[a] == b
        elif c in ends_new:
            new_ab = ends_new[c] == d
        else:
            raise AssertionError("marked endpoints inconsistent in local retrace")
    else:
        new_ab = pattern_ab

    old_enh = 1 if pattern_ab else 0
    new_enh = 1 if new_ab else 0
    return (cycles_new - cycles_old) + (new_enh - old_enh), new_ab


class LoopChain:
    """Single-square-flip Metropolis chain targeting the sqrt(2)^loops weight.

    Acceptance is min(1, sqrt(2)^delta) with delta the enhanced-count change,
    computed by local strand retracing.  Any configuration is reachable by
    single flips and staying put has positive probability, so the chain is
    irreducible and aperiodic with the loop weight as stationary law.
    """

    def __init__(self, domain: DiscreteDomain, seed: int, states: Optional[np.ndarray] = None):
        self.domain = domain
        if states is None:
            self.states = np.zeros(domain.n_squares, dtype=np.uint8)
        else:
            self.states = np.array(states, dtype=np.uint8)
        self.rng = np.random.Generator(np.random.Philox(key=seed))
        self.pattern_ab = analyze(domain, self.states).pattern is ArcPattern.AB_CD
        self._accept = {-1: 1.0 / SQRT2, 0: 1.0, 1: SQRT2}

    @property
    def pattern(self) -> ArcPattern:
        return ArcPattern.AB_CD if self.pattern_ab else ArcPattern.AD_CB

    def sweep(self, n_sweeps: int = 1):
        n_sq = self.domain.n_squares
        wiring = self.domain.wiring
        marked = self.domain.marked
        n_prop = n_sweeps * n_sq
        squares = self.rng.integers(0, n_sq, size=n_prop)
        us = self.rng.random(n_prop)
        states = self.states
        for i in range(n_prop):
            s = int(squares[i])
            delta, new_ab = _flip_delta(states, wiring, s, marked, self.pattern_ab)
            if us[i] < self._accept.get(delta, SQRT2**delta):
                states[s] ^= 1
                self.pattern_ab = new_ab

    def config(self) -> LoopConfig:
        return analyze(self.domain, self.states)


def mcmc_sample(domain: DiscreteDomain, n_sweeps: int, seed: int) -> LoopConfig:
    """One configuration after n_sweeps Metropolis sweeps from the zero state."""
    if n_sweeps < 1:
        raise ValueError("n_sweeps must be at least 1")
    chain = LoopChain(domain, seed)
    chain.sweep(n_sweeps)
    return chain.config()


def estimate_arc_probability(
    domain: DiscreteDomain,
    n_samples: int,
    sweeps_between: Optional[int] = None,
    seed: int = 0,
) -> Tuple[float, float]:
    """Monte Carlo estimate of P(AD_CB) with a batch-means standard error.

    The chain discards half of the total sweep budget as burn-in; by default
    consecutive samples are separated by one sweep per small square.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    if sweeps_between is None:
        sweeps_between = domain.n_squares
    chain = LoopChain(domain, seed)
    chain.sweep(max(1, (n_samples * sweeps_between) // 2))
    hits = np.empty(n_samples)
    for i in range(n_samples):
        chain.sweep(sweeps_between)
        hits[i] = 0.0 if chain.pattern_ab else 1.0
    estimate = float(hits.mean())
    se = batch_means_se(hits)
    return estimate, se


def batch_means_se(values: np.ndarray, n_batches: int = 32) -> float:
    """Standard error of the mean via batch means (autocorrelation-robust)."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    n_batches = min(n_batches, n)
    if n_batches < 2:
        return float("nan")
    usable = (n // n_batches) * n_batches
    means = values[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))
