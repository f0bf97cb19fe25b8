"""Time-discretized driving processes and the marked-point Loewner flow.

Four driver kinds are supported: chordal (pure Brownian driving, any kappa),
the unconditioned interface law at kappa = 16/3, the conditioned
(hypergeometric) law at kappa = 16/3, and the conditioned percolation law at
kappa = 6.  The noise signs follow the defining displays: the unconditioned
law is driven by -sqrt(16/3) dB while the conditioned one carries
+sqrt(16/3) dB; equality in law under B -> -B is exercised by tests instead
of being normalized away here.

Per step the marked points are advanced by the exact vertical-slit map for a
driving function frozen at the step's start value.  That update solves the
Loewner equation exactly for piecewise-constant driving (local error O(dt^2)
against the true flow), and it makes the marked-point trajectories agree with
the composed slit maps of :mod:`slelab.loewner` to machine precision.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from . import harness
from .observables import (
    KAPPA_FK,
    KAPPA_PERC,
    MarkedState,
    _fk_observable_xy,
    _hsle_drift_xy,
    _m_diffusion_coeff_xy,
    _p_measure_drift_xy,
    _percolation_drift_xy,
)

__all__ = [
    "DriverKind",
    "DriverSpec",
    "GirsanovAccumulator",
    "DrivingPath",
    "EnsembleResult",
    "simulate",
    "simulate_ensemble",
    "girsanov_weight",
    "weighted_vs_direct",
    "ComparisonReport",
]

#: paths stop once min(X, Y) falls below this fraction of X0 + Y0
STOP_FRACTION = 1e-4

#: smallest allowed local step refinement: dt / 2**_MAX_REFINE
_MAX_REFINE = 12

#: a step is locally refined unless noise + drift move less than this fraction of X
_RESOLUTION = 0.2

_BATCH = 2048


class DriverKind(enum.Enum):
    CHORDAL = "chordal"
    FK_P_MEASURE = "fk_p_measure"
    HSLE_16_3 = "hsle_16_3"
    HSLE_6 = "hsle_6"


_KIND_KAPPA = {
    DriverKind.FK_P_MEASURE: KAPPA_FK,
    DriverKind.HSLE_16_3: KAPPA_FK,
    DriverKind.HSLE_6: KAPPA_PERC,
}


@dataclass(frozen=True)
class DriverSpec:
    kind: DriverKind
    initial: MarkedState
    dt: float
    t_max: float
    seed: int
    kappa: Optional[float] = None
    zero_noise: bool = False

    def __post_init__(self):
        if self.dt <= 0 or self.t_max < self.dt:
            raise ValueError("need 0 < dt <= t_max")
        want = _KIND_KAPPA.get(self.kind)
        if want is not None:
            if self.kappa is not None and abs(self.kappa - want) > 1e-12:
                raise ValueError(f"{self.kind.value} fixes kappa = {want}")
            object.__setattr__(self, "kappa", want)
        elif self.kappa is None:
            raise ValueError("chordal driver needs an explicit kappa")
        elif self.kappa <= 0:
            raise ValueError("kappa must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    @property
    def noise_coefficient(self) -> float:
        # sign convention of the defining stochastic equations
        root = math.sqrt(self.kappa)
        return -root if self.kind is DriverKind.FK_P_MEASURE else root


@dataclass
class GirsanovAccumulator:
    """Running log-weight bookkeeping: N and its quadratic variation."""

    n_value: float = 0.0
    qv: float = 0.0

    @property
    def log_weight(self) -> float:
        return self.n_value - 0.5 * self.qv


@dataclass(eq=False)
class DrivingPath:
    """One discretized driving function with its marked-point trajectories."""

    spec: DriverSpec
    times: np.ndarray  # retained grid, starts at 0
    u_values: np.ndarray
    v_values: np.ndarray
    w_values: np.ndarray
    noise: np.ndarray  # Brownian increments actually used, one per retained step
    stopped_at: Optional[float]
    girsanov: Optional[GirsanovAccumulator]

    @property
    def x_values(self) -> np.ndarray:
        return self.v_values - self.u_values

    @property
    def y_values(self) -> np.ndarray:
        return self.w_values - self.v_values

    @property
    def final_state(self) -> MarkedState:
        return MarkedState(float(self.u_values[-1]), float(self.v_values[-1]), float(self.w_values[-1]))


def _drift(kind: DriverKind, x, y):
    if kind is DriverKind.CHORDAL:
        return np.zeros_like(x)
    if kind is DriverKind.FK_P_MEASURE:
        return _p_measure_drift_xy(x, y)
    if kind is DriverKind.HSLE_16_3:
        return _hsle_drift_xy(x, y)
    return _percolation_drift_xy(x, y)


def _path_rng(seed: int, index: int) -> np.random.Generator:
    key = ((seed & 0xFFFFFFFFFFFFFFFF) << 64) | (index & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


def _slit_advance(u0, point, dt):
    return u0 + np.sqrt((point - u0) ** 2 + 4.0 * dt)


def _needs_refinement(coef: float, mu: float, dt: float, x: float) -> bool:
    return abs(coef) * math.sqrt(dt) + abs(mu) * dt > _RESOLUTION * x


def _refine_step(kind, coef, u, v, w, db, dt, rng, depth, track_weight):
    """Execute one step, recursively halving dt where the local scale demands.

    The Brownian increment is split by a bridge (first half ~ N(db/2, dt/4)
    given the total), so refinement does not change the path law.  Returns
    (u, v, w, d_n, d_qv) or None when the refinement floor is hit; the caller
    then marks the path stopped.
    """
    x, y = v - u, w - v
    mu = float(_drift(kind, np.float64(x), np.float64(y)))
    if not _needs_refinement(coef, mu, dt, x):
        u_new = u + coef * db + mu * dt
        v_new = _slit_advance(u, v, dt)
        w_new = _slit_advance(u, w, dt)
        if u_new < v_new:
            d_n = d_qv = 0.0
            if track_weight:
                sig = float(_m_diffusion_coeff_xy(np.float64(x), np.float64(y))) / float(
                    _fk_observable_xy(np.float64(x), np.float64(y))
                )
                d_n = sig * db
                d_qv = sig * sig * dt
            return u_new, v_new, w_new, d_n, d_qv
    if depth >= _MAX_REFINE:
        return None
    db1 = 0.5 * db + rng.standard_normal() * 0.5 * math.sqrt(dt)
    state = (u, v, w, 0.0, 0.0)
    for delta_b in (db1, db - db1):
        out = _refine_step(
            kind, coef, state[0], state[1], state[2], delta_b, 0.5 * dt, rng,
            depth + 1, track_weight,
        )
        if out is None:
            return None
        state = (out[0], out[1], out[2], state[3] + out[3], state[4] + out[4])
    return state


@dataclass(eq=False)
class EnsembleResult:
    spec: DriverSpec
    n_paths: int
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    stopped_at: np.ndarray  # nan where the path survived to t_max
    log_weight: Optional[np.ndarray]  # only for the reweighted kind
    snapshots: Dict[float, Dict[str, np.ndarray]]

    @property
    def x(self) -> np.ndarray:
        return self.v - self.u

    @property
    def y(self) -> np.ndarray:
        return self.w - self.v

    def cross_ratio(self) -> np.ndarray:
        x, y = self.x, self.y
        return x / (x + y)

    def observable(self) -> np.ndarray:
        return _fk_observable_xy(self.x, self.y)


def simulate_ensemble(
    spec: DriverSpec,
    n_paths: int,
    snapshot_times: Sequence[float] = (),
) -> EnsembleResult:
    """Simulate n_paths independent paths, keeping end states and snapshots.

    Each path owns a counter-based generator keyed by (seed, path index), so
    results do not depend on batching or traversal order.
    """
    n_steps = spec.n_steps
    dt = spec.dt
    coef = spec.noise_coefficient
    kind = spec.kind
    st0 = spec.initial
    threshold = STOP_FRACTION * (st0.x + st0.y)
    track_weight = kind is DriverKind.FK_P_MEASURE
    snap_steps = {}
    for t in snapshot_times:
        k = int(round(t / dt))
        if not 0 < k <= n_steps:
            raise ValueError(f"snapshot time {t} outside the grid")
        snap_steps.setdefault(k, t)

    noise_scale = abs(coef) * math.sqrt(dt)
    u = np.full(n_paths, st0.u)
    v = np.full(n_paths, st0.v)
    w = np.full(n_paths, st0.w)
    stopped_at = np.full(n_paths, np.nan)
    n_acc = np.zeros(n_paths)
    qv_acc = np.zeros(n_paths)
    m0 = float(_fk_observable_xy(st0.x, st0.y))
    snapshots: Dict[float, Dict[str, np.ndarray]] = {
        t: {"z": np.empty(n_paths), "m": np.empty(n_paths)} for t in snap_steps.values()
    }

    for lo in range(0, n_paths, _BATCH):
        hi = min(lo + _BATCH, n_paths)
        m = hi - lo
        rngs = [_path_rng(spec.seed, i) for i in range(lo, hi)]
        if spec.zero_noise:
            noise = np.zeros((m, n_steps))
        else:
            noise = np.stack([r.standard_normal(n_steps) for r in rngs]) * math.sqrt(dt)
        bu, bv, bw = u[lo:hi], v[lo:hi], w[lo:hi]
        bstop = stopped_at[lo:hi]
        bn, bqv = n_acc[lo:hi], qv_acc[lo:hi]
        active = np.ones(m, dtype=bool)
        for k in range(n_steps):
            if active.any():
                x = bv[active] - bu[active]
                y = bw[active] - bv[active]
                dying = np.minimum(x, y) < threshold
                if dying.any():
                    idx = np.flatnonzero(active)[dying]
                    bstop[idx] = k * dt
                    active[idx] = False
            if active.any():
                idx = np.flatnonzero(active)
                ua, va, wa = bu[idx], bv[idx], bw[idx]
                x, y = va - ua, wa - va
                db = noise[idx, k]
                mu = _drift(kind, x, y)
                u_new = ua + coef * db + mu * dt
                v_new = _slit_advance(ua, va, dt)
                w_new = _slit_advance(ua, wa, dt)
                fine = (noise_scale + np.abs(mu) * dt > _RESOLUTION * x) | ~(u_new < v_new)
                if track_weight:
                    coarse = ~fine
                    sig = _m_diffusion_coeff_xy(x[coarse], y[coarse]) / _fk_observable_xy(
                        x[coarse], y[coarse]
                    )
                    bn[idx[coarse]] += sig * db[coarse]
                    bqv[idx[coarse]] += sig * sig * dt
                for j in np.flatnonzero(fine):
                    g = idx[j]
                    out = _refine_step(
                        kind, coef, float(ua[j]), float(va[j]), float(wa[j]),
                        float(db[j]), dt, rngs[g], 0, track_weight,
                    )
                    if out is None:
                        bstop[g] = k * dt
                        active[g] = False
                        u_new[j], v_new[j], w_new[j] = ua[j], va[j], wa[j]
                    else:
                        u_new[j], v_new[j], w_new[j] = out[0], out[1], out[2]
                        bn[g] += out[3]
                        bqv[g] += out[4]
                bu[idx], bv[idx], bw[idx] = u_new, v_new, w_new
            step = k + 1
            if step in snap_steps:
                t = snap_steps[step]
                x, y = bv - bu, bw - bv
                snapshots[t]["z"][lo:hi] = x / (x + y)
                snapshots[t]["m"][lo:hi] = _fk_observable_xy(x, y)
        u[lo:hi], v[lo:hi], w[lo:hi] = bu, bv, bw
        stopped_at[lo:hi] = bstop
        n_acc[lo:hi], qv_acc[lo:hi] = bn, bqv

    log_weight = (n_acc - 0.5 * qv_acc) if track_weight else None
    return EnsembleResult(
        spec=spec,
        n_paths=n_paths,
        u=u,
        v=v,
        w=w,
        stopped_at=stopped_at,
        log_weight=log_weight,
        snapshots=snapshots,
    )


def simulate(spec: DriverSpec) -> DrivingPath:
    """Simulate one path, recording the full driving function and marked flow."""
    n_steps = spec.n_steps
    dt = spec.dt
    coef = spec.noise_coefficient
    kind = spec.kind
    st0 = spec.initial
    threshold = STOP_FRACTION * (st0.x + st0.y)
    track_weight = kind is DriverKind.FK_P_MEASURE

    rng = _path_rng(spec.seed, 0)
    if spec.zero_noise:
        noise = np.zeros(n_steps)
    else:
        noise = rng.standard_normal(n_steps) * math.sqrt(dt)

    us = [st0.u]
    vs = [st0.v]
    ws = [st0.w]
    used_noise = []
    acc = GirsanovAccumulator() if track_weight else None
    stopped_at = None

    u, v, w = st0.u, st0.v, st0.w
    for k in range(n_steps):
        x, y = v - u, w - v
        if min(x, y) < threshold:
            stopped_at = k * dt
            break
        db = float(noise[k])
        mu = float(_drift(kind, np.float64(x), np.float64(y)))
        if acc is not None:
            sig = float(_m_diffusion_coeff_xy(np.float64(x), np.float64(y))) / float(
                _fk_observable_xy(np.float64(x), np.float64(y))
            )
            acc.n_value += sig * db
            acc.qv += sig * sig * dt
        u_new = u + coef * db + mu * dt
        v_new = float(_slit_advance(u, v, dt))
        w_new = float(_slit_advance(u, w, dt))
        if not u_new < v_new:
            out = _refine_step(kind, coef, u, v, w, db, dt, rng, 0)
            if out is None:
                stopped_at = k * dt
                break
            u, v, w = out
        else:
            u, v, w = u_new, v_new, w_new
        used_noise.append(db)
        us.append(u)
        vs.append(v)
        ws.append(w)

    n_kept = len(used_noise)
    return DrivingPath(
        spec=spec,
        times=np.arange(n_kept + 1) * dt,
        u_values=np.array(us),
        v_values=np.array(vs),
        w_values=np.array(ws),
        noise=np.array(used_noise),
        stopped_at=stopped_at,
        girsanov=acc,
    )


def girsanov_weight(path: DrivingPath) -> float:
    """Reweighting factor M_(t and tau) / M_0 of one unconditioned path.

    Computed in closed form from the end state; the exponential of the
    accumulated log-weight must agree up to integration error, and the pair
    is checked here as a cheap integrity guard.
    """
    if path.spec.kind is not DriverKind.FK_P_MEASURE:
        raise ValueError("girsanov_weight applies to the unconditioned-interface kind only")
    st0 = path.spec.initial
    m0 = float(_fk_observable_xy(st0.x, st0.y))
    mt = float(_fk_observable_xy(path.x_values[-1], path.y_values[-1]))
    closed = mt / m0
    if len(path.noise) > 0:
        accumulated = math.exp(path.girsanov.log_weight)
        if not math.isfinite(accumulated) or abs(accumulated - closed) > 0.2 * closed + 1e-9:
            raise ArithmeticError(
                f"girsanov accumulator diverged from closed form: {accumulated} vs {closed}"
            )
    return closed


@dataclass
class ComparisonReport:
    """Weighted-vs-direct law comparison of the cross-ratio at a fixed time."""

    t: float
    n_paths: int
    weighted_mean: float
    weighted_se: float
    direct_mean: float
    direct_se: float
    cdf_distance: float
    effective_sample_size: float
    critical_value_1pct: float

    @property
    def passed(self) -> bool:
        return self.cdf_distance < self.critical_value_1pct

    def joint_se(self) -> float:
        return math.hypot(self.weighted_se, self.direct_se)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "n_paths": self.n_paths,
            "weighted_mean": self.weighted_mean,
            "weighted_se": self.weighted_se,
            "direct_mean": self.direct_mean,
            "direct_se": self.direct_se,
            "cdf_distance": self.cdf_distance,
            "effective_sample_size": self.effective_sample_size,
            "critical_value_1pct": self.critical_value_1pct,
            "passed": self.passed,
        }


def weighted_vs_direct(
    n_paths: int,
    t: float,
    spec_p: DriverSpec,
    spec_hsle: DriverSpec,
) -> ComparisonReport:
    """Compare the reweighted unconditioned ensemble against the conditioned one.

    Reweighting the unconditioned interface law by M/M_0 must reproduce the
    conditioned law exactly; the report carries the sup distance between the
    weighted and direct empirical distribution functions of the cross-ratio
    at time t (both processes stopped at degeneration), with the two-sample
    critical value deflated by the weighted effective sample size.
    """
    if spec_p.kind is not DriverKind.FK_P_MEASURE or spec_hsle.kind is not DriverKind.HSLE_16_3:
        raise ValueError("expected one unconditioned and one conditioned spec")
    if spec_p.initial != spec_hsle.initial or abs(spec_p.dt - spec_hsle.dt) > 1e-15:
        raise ValueError("ensembles must share the initial state and step size")
    if t > min(spec_p.t_max, spec_hsle.t_max):
        raise ValueError("comparison time beyond t_max")

    ens_p = simulate_ensemble(spec_p, n_paths, snapshot_times=[t])
    ens_h = simulate_ensemble(spec_hsle, n_paths, snapshot_times=[t])
    z_p = ens_p.snapshots[t]["z"]
    z_h = ens_h.snapshots[t]["z"]
    m0 = float(_fk_observable_xy(spec_p.initial.x, spec_p.initial.y))
    weights = ens_p.snapshots[t]["m"] / m0

    dist = harness.cdf_distance(z_p, weights, z_h)
    wsum = weights.sum()
    wmean = float(np.sum(weights * z_p) / wsum)
    wse = float(np.sqrt(np.sum((weights * (z_p - wmean)) ** 2)) / wsum)
    dmean = float(z_h.mean())
    dse = float(z_h.std(ddof=1) / math.sqrt(n_paths))
    crit = harness.ks_two_sample_critical(0.01, dist.effective_sample_size, len(z_h))
    return ComparisonReport(
        t=t,
        n_paths=n_paths,
        weighted_mean=wmean,
        weighted_se=wse,
        direct_mean=dmean,
        direct_se=dse,
        cdf_distance=dist.statistic,
        effective_sample_size=dist.effective_sample_size,
        critical_value_1pct=crit,
    )
