"""Command-line front end.

Subcommands: simulate, fit, certify, eval, dist, minimax, sweep. Every
command exits 0 only when the certifications or checks it runs all pass.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .io import (
    fmt,
    parse_truth,
    read_dataset,
    read_mixing,
    write_dataset,
    write_fitted,
    write_mixing,
    write_rows,
    write_summary,
)
from .metrics import distance, hellinger_vs_exp_truth, pointwise_error
from .minimax import (
    AssumptionError,
    PerturbationSpec,
    check_mml1,
    check_mml2,
    find_n1,
    hellinger_limit_sequence,
    lower_bound_constant,
    membership_scan,
    normalizer,
    optimized_risk_constant,
)
from .smu import SmuDensity, sample
from .solver import certify, fit, grenander_1d
from .sweep import SWEEP_HEADER, log_log_slope, run_sweep

log = logging.getLogger("smumle")

ORACLE_TOL = 1e-8


def _out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SystemExit(f"error: cannot create output directory {out}: {exc}")
    return out


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _report(items: dict) -> None:
    for k, v in items.items():
        print(f"{k}: {fmt(v)}")


def _cert_items(cert) -> dict:
    return {
        "max_ineq_gap": cert.max_ineq_gap,
        "argmax": cert.argmax,
        "worst_atom_gap": cert.worst_atom_gap,
        "offgrid_max_gap": cert.offgrid_max_gap,
        "uncovered_data": cert.uncovered,
        "tol": cert.tol,
        "certified": cert.passed,
    }


def cmd_simulate(args) -> int:
    truth = parse_truth(args.truth, args.dim)
    n = _ints(args.n)
    if len(n) != 1:
        raise SystemExit("error: simulate takes a single --n")
    data = sample(truth, n[0], args.seed)
    out = _out_dir(args.out)
    write_dataset(out / "data.csv", data)
    write_summary(
        out / "data.meta",
        {"seed": args.seed, "truth": truth.describe(), "truth_spec": args.truth, "n": n[0],
         "dim": truth.dim, "generator": "numpy Philox"},
    )
    print(out / "data.csv")
    return 0


def cmd_fit(args) -> int:
    data = read_dataset(args.data)
    res = fit(data, tol=args.tol, max_iter=args.max_iter, policy=args.policy)
    out = _out_dir(args.out)
    write_mixing(out / "mixing.csv", res.mixing)
    write_fitted(out / "fitted.csv", data, res.fitted)
    summary = {
        "n": data.shape[0],
        "dim": data.shape[1],
        "loglik": res.loglik,
        "iterations": res.iterations,
        "atoms": len(res.mixing),
        "policy": res.policy,
        "wall_ms": res.wall_ms,
    }
    summary.update(_cert_items(res.certificate))
    if data.shape[1] == 1:
        oracle = grenander_1d(data[:, 0])
        diff = float(np.max(np.abs(oracle - res.fitted)))
        summary["oracle_max_diff"] = diff
        summary["oracle-agree"] = diff <= ORACLE_TOL
    write_summary(out / "summary.txt", summary)
    _report(summary)
    ok = res.certified and summary.get("oracle-agree", True)
    return 0 if ok else 1


def cmd_certify(args) -> int:
    data = read_dataset(args.data)
    mixing = read_mixing(args.mixing)
    if mixing.dim != data.shape[1]:
        raise SystemExit("error: mixing and dataset dimensions differ")
    cert = certify(mixing, data, tol=args.tol)
    items = _cert_items(cert)
    if cert.uncovered:
        items["failure"] = f"mixing density is zero at {cert.uncovered} data point(s)"
    items["result"] = "pass" if cert.passed else "fail"
    _report(items)
    return 0 if cert.passed else 1


def cmd_eval(args) -> int:
    f = SmuDensity(read_mixing(args.mixing))
    if not args.probes:
        raise SystemExit("error: eval needs --probes")
    x = read_dataset(args.probes)
    if x.shape[1] != f.dim:
        raise SystemExit("error: probe and mixing dimensions differ")
    header = [f"x{j + 1}" for j in range(f.dim)] + ["density", "cdf"]
    rows = np.column_stack([x, f.pdf(x), f.cdf(x)])
    if args.out:
        out = _out_dir(args.out)
        write_rows(out / "eval.csv", header, rows)
    else:
        print(",".join(header))
        for r in rows:
            print(",".join(fmt(v) for v in r))
    return 0


def cmd_dist(args) -> int:
    f = SmuDensity(read_mixing(args.mixing))
    items: dict = {}
    if args.other:
        g = SmuDensity(read_mixing(args.other))
        for metric in ("l1", "hellinger"):
            val, se = distance(f, g, metric, n_mc=args.n_mc, seed=args.seed)
            items[metric] = val
            items[f"{metric}_se"] = se
    else:
        truth = parse_truth(args.truth, f.dim)
        if truth.kind == "exp":
            items["hellinger"] = hellinger_vs_exp_truth(f)
        else:
            g = SmuDensity(truth.mixing)
            for metric in ("l1", "hellinger"):
                val, se = distance(f, g, metric, n_mc=args.n_mc, seed=args.seed)
                items[metric] = val
                items[f"{metric}_se"] = se
        if args.probes:
            items["ptwise_err"] = pointwise_error(f, truth, read_dataset(args.probes))
    _report(items)
    return 0


def _spec_from_args(args) -> PerturbationSpec:
    d = args.dim or 1
    x0 = _floats(args.x0) if args.x0 else [1.0] * d
    h = _floats(args.h) if args.h else [0.5] * d
    if len(x0) == 1 and d > 1:
        x0 = x0 * d
    if len(h) == 1 and d > 1:
        h = h * d
    n = _ints(args.n)[0] if args.n else 4096
    return PerturbationSpec(tuple(x0), tuple(h), theta=args.theta, n=n, b=args.b, force_theta=args.force_theta)


def cmd_minimax(args) -> int:
    try:
        spec = _spec_from_args(args)
    except AssumptionError as exc:
        print(f"error: assumption violated: {exc}", file=sys.stderr)
        return 2
    if not spec.valid:
        print(f"error: n below n_0: I_n leaves the positive orthant at n={spec.n}", file=sys.stderr)
        return 2
    m1 = check_mml1(spec)
    m2 = check_mml2(spec)
    ns = [2.0**k for k in range(args.limit_from, args.limit_to + 1)]
    ns = [n for n in ns if spec.at(n).valid]
    lim = hellinger_limit_sequence(spec, ns)
    scan = membership_scan(spec, args.resolution)
    n1 = find_n1(spec, resolution=args.resolution)
    d, f0 = spec.d, spec.f_x0()
    items = {
        "dim": d,
        "x0": spec.x0,
        "h": spec.h,
        "theta": spec.theta,
        "n": spec.n,
        "b": spec.b,
        "normalizer_d_n": normalizer(spec),
        "mml1_quadrature": m1.quadrature,
        "mml1_formula": m1.formula,
        "mml1_rel_error": m1.rel_error,
        "mml1_pass": m1.passed,
        "mml2_quadrature": m2.quadrature,
        "mml2_printed_constant": m2.printed_constant,
        "mml2_printed_value": m2.printed_value,
        "mml2_derived_constant": m2.derived_constant,
        "mml2_derived_value": m2.derived_value,
        "mml2_verdict": m2.verdict,
        "limit_n": [int(n) for n in lim.ns],
        "limit_sequence": lim.values,
        "limit_apparent": lim.apparent_limit,
        "limit_last_rel_change": lim.last_rel_change,
        "limit_stabilized": lim.stabilized,
        "limit_printed_constant": lim.constants["printed"],
        "limit_derived_constant": lim.constants["derived"],
        "limit_verdict": lim.verdict,
        "membership_accepted": scan.accepted,
        "membership_min_difference": scan.min_difference,
        "membership_witness": None if scan.witness is None else scan.witness[0] + scan.witness[1],
        "membership_n1_hat": n1,
        "lower_bound_constant": lower_bound_constant(f0, spec.b, d),
        "lower_bound_constant_theta": lower_bound_constant(f0, spec.b, d, spec.theta),
        "optimized_risk_printed": optimized_risk_constant(f0, spec.b, d),
        "optimized_risk_derived": optimized_risk_constant(f0, spec.b, d, constant="derived"),
    }
    if args.out:
        write_summary(_out_dir(args.out) / "minimax.txt", items)
    _report(items)
    return 0 if (m1.passed and lim.stabilized and scan.accepted) else 1


def cmd_sweep(args) -> int:
    truth = parse_truth(args.truth, args.dim)
    ns = _ints(args.n) if args.n else [50, 100, 200, 400, 800]
    probes = read_dataset(args.probes) if args.probes else None
    records = run_sweep(truth, ns, args.reps, args.seed, args.tol, args.max_iter, probes)
    out = _out_dir(args.out)
    write_rows(out / "sweep.csv", SWEEP_HEADER, (r.row() for r in records))
    fitted = log_log_slope(records)
    meds = list(fitted.medians.values())
    summary = {
        "truth": truth.describe(),
        "seed": args.seed,
        "reps": args.reps,
        "n_list": ns,
        "median_hellinger": meds,
        "median_strictly_decreasing": all(b < a for a, b in zip(meds, meds[1:])),
        "slope": fitted.slope,
        "slope_stderr": fitted.stderr,
        "uncertified_rows": sum(not r.certified for r in records),
    }
    write_summary(out / "summary.txt", summary)
    _report(summary)
    return 0 if summary["uncertified_rows"] == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smumle", description="Maximum likelihood for scale mixtures of uniform densities.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, dim=True, truth=False, n=False, seed=False, solver=False, out=False, probes=False):
        if dim:
            sp.add_argument("--dim", type=int)
        if truth:
            sp.add_argument("--truth", default="exp", help="'exp' or 'file:PATH' (mixing CSV)")
        if n:
            sp.add_argument("--n", help="sample size or comma-separated list")
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        if solver:
            sp.add_argument("--tol", type=float, default=1e-8)
            sp.add_argument("--max-iter", type=int, default=100_000)
        if out:
            sp.add_argument("--out", default=".")
        if probes:
            sp.add_argument("--probes", help="CSV of probe points with header x1..xd")

    sp = sub.add_parser("simulate", help="draw a dataset from a truth")
    common(sp, truth=True, n=True, seed=True, out=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="fit the NPMLE and certify it")
    sp.add_argument("data")
    sp.add_argument("--policy", choices=("auto", "full", "grow"), default="auto")
    common(sp, dim=False, solver=True, out=True)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("certify", help="check the optimality conditions of a mixing measure")
    sp.add_argument("data")
    sp.add_argument("mixing")
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("eval", help="evaluate density and CDF at probe points")
    sp.add_argument("mixing")
    sp.add_argument("--out")
    common(sp, dim=False, probes=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("dist", help="distances to another mixing or to the truth")
    sp.add_argument("mixing")
    sp.add_argument("other", nargs="?")
    sp.add_argument("--n-mc", type=int, default=100_000)
    common(sp, dim=False, truth=True, seed=True, probes=True)
    sp.set_defaults(func=cmd_dist)

    sp = sub.add_parser("minimax", help="verify the local perturbation construction")
    common(sp, n=True, out=False)
    sp.add_argument("--out")
    sp.add_argument("--x0", help="center, comma-separated (default all ones)")
    sp.add_argument("--h", help="bandwidths, comma-separated (default all 0.5)")
    sp.add_argument("--theta", type=float, default=0.5)
    sp.add_argument("--b", type=float, help="mixed derivative at x0 (default from the exp base)")
    sp.add_argument("--force-theta", action="store_true", help="allow theta outside (0, 1)")
    sp.add_argument("--resolution", type=int, default=64)
    sp.add_argument("--limit-from", type=int, default=8, help="first log2 n of the limit sequence")
    sp.add_argument("--limit-to", type=int, default=16, help="last log2 n of the limit sequence")
    sp.set_defaults(func=cmd_minimax)

    sp = sub.add_parser("sweep", help="consistency sweep over sample sizes")
    sp.add_argument("--reps", type=int, default=20)
    common(sp, truth=True, n=True, seed=True, solver=True, out=True, probes=True)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
