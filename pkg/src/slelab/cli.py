"""Command-line entry point wiring the experiments together.

Every subcommand accepts ``--seed``, ``--out`` and ``--config``; a JSON
config file may set any flag and explicit flags win.  Each run writes
machine-readable CSV/JSON next to a manifest recording the full
configuration, seeds, package version and wall time, and prints a short
human summary.  The exit code is 0 iff all in-run assertions passed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, fk, harness, loewner, pairs, percolation
from .drivers import DriverKind, DriverSpec, simulate, simulate_ensemble, weighted_vs_direct
from .lattice import build_rect_domain
from .observables import (
    MarkedState,
    cardy,
    conditioned_drift,
    fk_observable,
    hsle_drift,
    hyp_link_term,
    m_diffusion_coeff,
    p_measure_drift,
    percolation_drift,
    rectangle_cross_ratio,
)

_KIND_BY_NAME = {
    "chordal": DriverKind.CHORDAL,
    "fk-p": DriverKind.FK_P_MEASURE,
    "hsle16": DriverKind.HSLE_16_3,
    "hsle6": DriverKind.HSLE_6,
}


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, name: str, args, extra: dict, t0: float) -> None:
    manifest = {
        "command": name,
        "config": {k: v for k, v in vars(args).items() if k not in ("func", "config")},
        "version": __version__,
        "wall_time": time.perf_counter() - t0,
    }
    manifest.update(extra)
    (out / f"{name}_manifest.json").write_text(json.dumps(manifest, indent=2, default=str))


def _grid_logspace(lo, hi, n):
    return np.logspace(math.log10(lo), math.log10(hi), n)


def cmd_check_identities(args) -> int:
    """Drift identity, hypergeometric link, crossing-formula symmetry and
    generator-annihilation grids; nonzero exit on any tolerance breach."""
    t0 = time.perf_counter()
    out = _out_dir(args)
    failures = []
    grid = _grid_logspace(1e-3, 1e3, 40)

    worst_drift = 0.0
    worst_link = 0.0
    for x in grid:
        for y in grid:
            st = MarkedState(0.0, x, x + y)
            worst_drift = max(worst_drift, abs(conditioned_drift(st) - hsle_drift(st)))
            s = x + y
            third = -(4.0 / 3.0) * y * ((x / y) / (1.0 + math.sqrt(1.0 + x / y))) / (x * s)
            worst_link = max(worst_link, abs(hyp_link_term(st) - third))
    if worst_drift >= 1e-10:
        failures.append(f"drift identity max error {worst_drift:.3e} >= 1e-10")
    if worst_link >= 1e-8:
        failures.append(f"hypergeometric link max error {worst_link:.3e} >= 1e-8")

    worst_cardy = 0.0
    for z in np.arange(0.05, 0.951, 0.05):
        worst_cardy = max(worst_cardy, abs(cardy(z) + cardy(1.0 - z) - 1.0))
    if worst_cardy >= 1e-10:
        failures.append(f"crossing-formula symmetry max error {worst_cardy:.3e} >= 1e-10")

    worst_gen_fk = _generator_residual_fk()
    if worst_gen_fk >= 1e-6:
        failures.append(f"martingale generator residual {worst_gen_fk:.3e} >= 1e-6")
    worst_gen_perc = _generator_residual_percolation()
    if worst_gen_perc >= 1e-6:
        failures.append(f"percolation drift residual {worst_gen_perc:.3e} >= 1e-6")

    report = {
        "drift_identity_max_error": worst_drift,
        "hyp_link_max_error": worst_link,
        "cardy_symmetry_max_error": worst_cardy,
        "fk_generator_residual": worst_gen_fk,
        "percolation_drift_residual": worst_gen_perc,
        "failures": failures,
    }
    (out / "check_identities.json").write_text(json.dumps(report, indent=2))
    _write_manifest(out, "check_identities", args, {"failures": failures}, t0)
    for line in (
        f"drift identity        max |err| = {worst_drift:.3e}",
        f"hypergeometric link   max |err| = {worst_link:.3e}",
        f"crossing symmetry     max |err| = {worst_cardy:.3e}",
        f"martingale generator  max |err| = {worst_gen_fk:.3e}",
        f"kappa=6 drift         max |err| = {worst_gen_perc:.3e}",
    ):
        print(line)
    if failures:
        for f in failures:
            print("FAIL:", f)
        return 1
    print("all identity checks passed")
    return 0


def _generator_residual_fk() -> float:
    """|L M| under the unconditioned dynamics, by finite differences."""
    from .observables import _fk_observable_xy

    def m_of(u, v, w):
        return _fk_observable_xy(v - u, w - v)

    worst = 0.0
    for x in _grid_logspace(0.25, 4.0, 12):
        for y in _grid_logspace(0.25, 4.0, 12):
            u, v, w = 0.0, x, x + y
            h = 1e-4 * min(x, y, 1.0)
            st = MarkedState(u, v, w)
            mu = p_measure_drift(st)
            du = (m_of(u + h, v, w) - m_of(u - h, v, w)) / (2 * h)
            duu = (m_of(u + h, v, w) - 2 * m_of(u, v, w) + m_of(u - h, v, w)) / (h * h)
            dv = (m_of(u, v + h, w) - m_of(u, v - h, w)) / (2 * h)
            dw = (m_of(u, v, w + h) - m_of(u, v, w - h)) / (2 * h)
            resid = mu * du + (2.0 / x) * dv + (2.0 / (x + y)) * dw + (8.0 / 3.0) * duu
            worst = max(worst, abs(resid))
    return worst


def _generator_residual_percolation() -> float:
    """|percolation_drift - sqrt(6) d<B,N>/dt| via finite differences of the
    crossing martingale under pure kappa=6 driving."""
    from .specfun import HYP_CROSSING, hyp2f1

    def m_of(u, v, w):
        x, y = v - u, w - v
        z = x / (x + y)
        return z ** (1.0 / 3.0) * hyp2f1(HYP_CROSSING, z)

    worst = 0.0
    for x in _grid_logspace(0.25, 4.0, 12):
        for y in _grid_logspace(0.25, 4.0, 12):
            u, v, w = 0.0, x, x + y
            h = 1e-5 * min(x, y, 1.0)
            du = (m_of(u + h, v, w) - m_of(u - h, v, w)) / (2 * h)
            lhs = 6.0 * du / m_of(u, v, w)
            worst = max(worst, abs(lhs - percolation_drift(MarkedState(u, v, w))))
    return worst


def cmd_fk_crossing(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args)
    rows = []
    status = 0
    for step in range(args.mesh_steps):
        factor = 2**step
        cols, rows_n = args.cols * factor, args.rows * factor
        dom = build_rect_domain(cols, rows_n, args.mesh / factor)
        aspect = (cols - 1) / (rows_n - 1)
        z = rectangle_cross_ratio(aspect)
        target = fk_observable(MarkedState(0.0, z, 1.0))
        if args.samples == 0:
            probs = fk.enumerate_exact(dom)
            est, se = probs[fk.ArcPattern.AD_CB], 0.0
            mode = "exact"
        else:
            est, se = fk.estimate_arc_probability(
                dom, args.samples, sweeps_between=args.sweeps_between, seed=args.seed + step
            )
            mode = "mcmc"
        rows.append((cols, rows_n, dom.mesh, z, args.samples, est, se, target, mode))
        print(
            f"{cols}x{rows_n}  z={z:.6f}  estimate={est:.6f} +- {se:.6f}  "
            f"continuum={target:.6f}  ({mode})"
        )
    csv = out / "fk_crossing.csv"
    with csv.open("w") as f:
        f.write("cols,rows,mesh,z,samples,estimate,se,continuum,mode\n")
        for r in rows:
            f.write(",".join(str(v) for v in r) + "\n")
    _write_manifest(out, "fk_crossing", args, {"rows": len(rows)}, t0)
    return status


def _parse_kind(name: str) -> DriverKind:
    try:
        return _KIND_BY_NAME[name]
    except KeyError:
        raise SystemExit(f"unknown kind {name!r}; choose from {sorted(_KIND_BY_NAME)}")


def cmd_sle_simulate(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args)
    kind = _parse_kind(args.kind)
    st = MarkedState(0.0, args.x0, args.x0 + args.y0)
    kappa = args.kappa if kind is DriverKind.CHORDAL else None
    spec = DriverSpec(
        kind=kind, initial=st, dt=args.dt, t_max=args.tmax, seed=args.seed,
        kappa=kappa, zero_noise=args.zero_noise,
    )
    status = 0
    if args.paths == 0:
        spec = DriverSpec(
            kind=kind, initial=st, dt=args.dt, t_max=args.tmax, seed=args.seed,
            kappa=kappa, zero_noise=True,
        )
        path = simulate(spec)
        csvp = out / "sle_path.csv"
        with csvp.open("w") as f:
            f.write("t,u,v,w,x,y\n")
            for i in range(len(path.times)):
                f.write(
                    f"{path.times[i]:.10g},{path.u_values[i]:.12g},{path.v_values[i]:.12g},"
                    f"{path.w_values[i]:.12g},{path.x_values[i]:.12g},{path.y_values[i]:.12g}\n"
                )
        v_exact = st.u + math.sqrt(st.x**2 + 4.0 * path.times[-1]) if kind is DriverKind.CHORDAL else None
        summary = {"deterministic": True, "final_v": float(path.v_values[-1])}
        if v_exact is not None:
            err = abs(path.v_values[-1] - v_exact)
            summary["v_closed_form_error"] = err
            if err > 1e-6:
                status = 1
            print(f"deterministic run: V(t)={path.v_values[-1]:.8f}, closed form err {err:.2e}")
        _write_manifest(out, "sle_simulate", args, summary, t0)
        return status
    ens = simulate_ensemble(spec, args.paths)
    z = ens.cross_ratio()
    stopped = np.isfinite(ens.stopped_at)
    summary = {
        "mean_z": float(z.mean()),
        "se_z": float(z.std(ddof=1) / math.sqrt(len(z))),
        "stopped_fraction": float(stopped.mean()),
    }
    (out / "sle_summary.json").write_text(json.dumps(summary, indent=2))
    _write_manifest(out, "sle_simulate", args, summary, t0)
    print(
        f"{args.paths} paths of {spec.kind.value}: mean z = {summary['mean_z']:.5f} "
        f"+- {summary['se_z']:.5f}, stopped fraction {summary['stopped_fraction']:.3f}"
    )
    return status


def cmd_girsanov_test(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args)
    st = MarkedState(0.0, args.x0, args.x0 + args.y0)
    spec_p = DriverSpec(DriverKind.FK_P_MEASURE, st, args.dt, args.t, seed=args.seed)
    spec_h = DriverSpec(DriverKind.HSLE_16_3, st, args.dt, args.t, seed=args.seed + 1)
    report = weighted_vs_direct(args.paths, args.t, spec_p, spec_h)
    (out / "girsanov_report.json").write_text(json.dumps(report.to_dict(), indent=2))
    _write_manifest(out, "girsanov_test", args, report.to_dict(), t0)
    print(
        f"weighted mean z = {report.weighted_mean:.5f} +- {report.weighted_se:.5f}   "
        f"direct mean z = {report.direct_mean:.5f} +- {report.direct_se:.5f}"
    )
    print(
        f"sup CDF distance = {report.cdf_distance:.5f} "
        f"(1% critical {report.critical_value_1pct:.5f}, ESS {report.effective_sample_size:.0f})"
    )
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


def cmd_pair_sample(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args)
    st = MarkedState(0.0, args.x0, args.x0 + args.y0)
    spec = pairs.PairSpec(dt=args.dt, t_max=args.tmax, seed=args.seed)
    heights = []
    rejected = 0
    for i in range(args.n):
        pair = pairs.sample_pair(st, args.order, pairs.PairSpec(
            dt=spec.dt, t_max=spec.t_max, seed=spec.seed + i))
        if not pair.accepted:
            rejected += 1
            continue
        heights.append(pairs.crossing_height(pair))
    heights = np.array([h for h in heights if np.isfinite(h)])
    summary = {
        "n_requested": args.n,
        "n_accepted": args.n - rejected,
        "n_rejected": rejected,
        "mean_crossing_height": float(heights.mean()) if len(heights) else None,
        "se_crossing_height": float(heights.std(ddof=1) / math.sqrt(len(heights)))
        if len(heights) > 1
        else None,
    }
    (out / "pair_summary.json").write_text(json.dumps(summary, indent=2))
    _write_manifest(out, "pair_sample", args, summary, t0)
    print(
        f"order {args.order}: {summary['n_accepted']}/{args.n} accepted, "
        f"crossing height {summary['mean_crossing_height']} +- {summary['se_crossing_height']}"
    )
    return 0


def cmd_percolation(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args)
    height = args.side
    width = max(1, round(args.aspect * height))
    dom = percolation.TriDomain(width, height)
    z = percolation.parallelogram_cross_ratio(width, height)
    target = cardy(z)
    est, se = percolation.estimate_crossing(dom, args.samples, args.seed)
    with (out / "percolation.csv").open("w") as f:
        f.write("aspect,z,side,n,estimate,se,cardy_value\n")
        f.write(f"{args.aspect},{z},{args.side},{args.samples},{est},{se},{target}\n")
    _write_manifest(out, "percolation", args, {"z": z, "estimate": est, "target": target}, t0)
    print(
        f"{width}x{height} parallelogram (z={z:.5f}): crossing {est:.5f} +- {se:.5f}, "
        f"formula {target:.5f}"
    )
    return 0


def cmd_trace(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args)
    kind = _parse_kind(args.kind)
    st = MarkedState(0.0, args.x0, args.x0 + args.y0)
    kappa = args.kappa if kind is DriverKind.CHORDAL else None
    spec = DriverSpec(
        kind=kind, initial=st, dt=args.dt, t_max=args.tmax, seed=args.seed,
        kappa=kappa, zero_noise=args.zero_noise,
    )
    path = simulate(spec)
    tr = loewner.trace(path, resolution=args.resolution)
    csvp = out / "trace.csv"
    with csvp.open("w") as f:
        loewner.trace_to_csv(tr, f)
    _write_manifest(out, "trace", args, {"points": len(tr)}, t0)
    print(f"wrote {len(tr)} trace points to {csvp}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", type=str, default="out")
    p.add_argument("--config", type=str, default=None, help="JSON file of flag defaults")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slelab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-identities", help="run the closed-form identity grids")
    _add_common(p)
    p.set_defaults(func=cmd_check_identities)

    p = sub.add_parser("fk-crossing", help="interface arc-probability sweep over mesh sizes")
    _add_common(p)
    p.add_argument("--cols", type=int, default=2)
    p.add_argument("--rows", type=int, default=2)
    p.add_argument("--mesh", type=float, default=1.0)
    p.add_argument("--mesh-steps", type=int, default=1)
    p.add_argument("--samples", type=int, default=0, help="0 = exact enumeration")
    p.add_argument("--sweeps-between", type=int, default=None)
    p.set_defaults(func=cmd_fk_crossing)

    p = sub.add_parser("sle-simulate", help="ensemble simulation with summary statistics")
    _add_common(p)
    p.add_argument("--kind", type=str, default="chordal")
    p.add_argument("--kappa", type=float, default=16.0 / 3.0)
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--y0", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--tmax", type=float, default=0.5)
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--zero-noise", action="store_true")
    p.set_defaults(func=cmd_sle_simulate)

    p = sub.add_parser("girsanov-test", help="weighted-vs-direct law comparison")
    _add_common(p)
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--y0", type=float, default=1.0)
    p.add_argument("--t", type=float, default=0.3)
    p.add_argument("--paths", type=int, default=4000)
    p.add_argument("--dt", type=float, default=1e-4)
    p.set_defaults(func=cmd_girsanov_test)

    p = sub.add_parser("pair-sample", help="interface-pair ensembles with acceptance accounting")
    _add_common(p)
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--y0", type=float, default=1.0)
    p.add_argument("--order", type=int, default=1, choices=(1, 2))
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--dt", type=float, default=5e-4)
    p.add_argument("--tmax", type=float, default=0.3)
    p.set_defaults(func=cmd_pair_sample)

    p = sub.add_parser("percolation", help="triangular-lattice crossing estimates")
    _add_common(p)
    p.add_argument("--aspect", type=float, default=1.0)
    p.add_argument("--side", type=int, default=64)
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_percolation)

    p = sub.add_parser("trace", help="export a curve trace as CSV")
    _add_common(p)
    p.add_argument("--kind", type=str, default="chordal")
    p.add_argument("--kappa", type=float, default=16.0 / 3.0)
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--y0", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--tmax", type=float, default=0.5)
    p.add_argument("--resolution", type=int, default=1)
    p.add_argument("--zero-noise", action="store_true")
    p.set_defaults(func=cmd_trace)

    return ap


def _apply_config(args: argparse.Namespace, argv) -> argparse.Namespace:
    if not args.config:
        return args
    overrides = json.loads(Path(args.config).read_text())
    explicit = {a.lstrip("-").replace("-", "_").split("=")[0] for a in argv if a.startswith("--")}
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise SystemExit(f"config key {key!r} is not a flag of this command")
        if attr not in explicit:
            setattr(args, attr, value)
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    args = _apply_config(args, argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
