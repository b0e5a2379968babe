"""Command-line front end.

    mvgoal frontier --target 1.08 --target 1.10
    mvgoal prob --beta 1
    mvgoal simulate --paths 100000 --steps 1000 --seed 1
    mvgoal bound
    mvgoal horizon --horizons 0.25,0.5,1,2,4 --extend --mc

Without ``--market`` every command uses the built-in reference market
(x0=1, r=0.06, mu=0.12, sigma=0.15, T=1).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import analytics
from .frontier import EfficientStrategy, InfeasibleTarget
from .market import AssumptionViolation, MarketModel, reference_market, validate
from .simulate import SimConfig, simulate

SEED_ENV = "MVGOAL_SEED"
GATE_SE = 4.0


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if v is None:
        return ""
    return str(v)


def _json_safe(v):
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return float(f"{v:.12g}") if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def render(rows, fmt, comments=(), payload=None) -> str:
    if fmt == "json":
        doc = payload if payload is not None else {"rows": rows}
        return json.dumps(_json_safe(doc), indent=2) + "\n"
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    if rows:
        fields = list(rows[0].keys())
        for r in rows[1:]:
            fields += [k for k in r if k not in fields]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(fields)
        for r in rows:
            writer.writerow([_fmt(r.get(k)) for k in fields])
    return buf.getvalue()


def emit(args, text):
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def load_market(args) -> MarketModel:
    if args.market:
        return MarketModel.from_json(args.market)
    return reference_market()


def sim_config(args) -> SimConfig:
    return SimConfig(
        n_paths=args.paths,
        n_steps=args.steps,
        seed=args.seed,
        scheme="exact_y" if args.scheme == "exact" else "euler",
        bridge_correction=args.bridge == "on",
        n_jobs=args.jobs,
    )


def cmd_frontier(args) -> int:
    market = load_market(args)
    rows = []
    for z in args.target:
        try:
            s = EfficientStrategy(market, args.x0, z)
            var = s.min_variance()
            rows.append({"z": z, "gamma": s.gamma, "variance": var,
                         "std_dev": math.sqrt(var), "error": ""})
        except (InfeasibleTarget, AssumptionViolation) as exc:
            rows.append({"z": z, "gamma": None, "variance": None, "std_dev": None,
                         "error": str(exc)})
    emit(args, render(rows, args.format))
    return 0 if any(not r["error"] for r in rows) else 1


def cmd_prob(args) -> int:
    bound = analytics.bound_constants().lower_bound
    betas = args.beta or [validate(load_market(args)).beta_T]
    rows, status = [], 0
    for b in betas:
        try:
            p = analytics.goal_prob(b)
            rows.append({"beta_T": b, "goal_prob": p, "lower_bound": bound,
                         "margin": p - bound, "error": ""})
        except AssumptionViolation as exc:
            status = 1
            rows.append({"beta_T": b, "goal_prob": None, "lower_bound": bound,
                         "margin": None, "error": str(exc)})
    emit(args, render(rows, args.format))
    return status


def _report_row(z, rep, se_floor=0.0):
    return {
        "z": z,
        "label": rep.label,
        "estimate": rep.estimate,
        "std_error": rep.std_error,
        "ci_low": rep.ci_low,
        "ci_high": rep.ci_high,
        "reference": rep.reference,
        "deviation_se": rep.deviation(se_floor),
        "n_paths": rep.n_paths,
        "seed": rep.seed,
        "scheme": rep.scheme,
    }


def cmd_simulate(args) -> int:
    market = load_market(args)
    config = sim_config(args)
    rows, reports = [], []
    for z in args.target:
        strategy = EfficientStrategy(market, args.x0, z)
        result = simulate(strategy, config)
        if args.dump_paths:
            path = args.dump_paths
            if len(args.target) > 1:
                root, ext = os.path.splitext(path)
                path = f"{root}_z{z:g}{ext or '.csv'}"
            result.to_csv(path)
        reps = [result.goal_report(), *result.moment_reports(), result.stopped_report(),
                *result.bankruptcy_reports()]
        for rep in reps:
            floor = 0.0
            if rep.reference is not None and rep.label not in ("terminal_mean", "terminal_variance"):
                # proportions: an estimate of 0 or 1 has zero sample SE
                floor = math.sqrt(rep.reference * (1 - rep.reference) / rep.n_paths)
            rows.append(_report_row(z, rep, floor))
            reports.append({"z": z, **rep.to_dict()})
    failed = [r for r in rows if r["deviation_se"] > GATE_SE]
    emit(args, render(rows, args.format, payload={"reports": reports}))
    for r in failed:
        print(f"gate: {r['label']} at z={r['z']:g} is {r['deviation_se']:.2f} SE from "
              f"its reference", file=sys.stderr)
    return 1 if failed else 0


def cmd_bound(args) -> int:
    bc = analytics.bound_constants()
    argmin, fmin = analytics.minimize_f(args.xmax_search, args.points)
    curve = analytics.f_curve(args.xmax, args.curve_points)
    summary = {
        "lower_bound": bc.lower_bound,
        "tail_bound": bc.tail_bound,
        "h_argmin": bc.h_argmin,
        "h_min": analytics.h(bc.h_argmin),
        "f_argmin": argmin,
        "f_min": fmin,
        "f_min_minus_bound": fmin - bc.lower_bound,
    }
    if args.format == "json":
        text = render(None, "json", payload={**summary, "curve": curve.points()})
    else:
        comments = [f"{k}: {_fmt(v)}" for k, v in summary.items()]
        rows = [{"abscissa": x, "value": v} for x, v in curve.points()]
        text = render(rows, "csv", comments=comments)
    emit(args, text)
    return 0 if fmin >= bc.lower_bound - 1e-9 else 1


def _parse_horizons(args):
    if args.horizons:
        return [float(v) for v in args.horizons.split(",") if v.strip()]
    return np.linspace(args.t_max / args.t_points, args.t_max, args.t_points).tolist()


def cmd_horizon(args) -> int:
    market = load_market(args)
    horizons = _parse_horizons(args)
    if not horizons:
        raise ValueError("empty horizon grid")
    curve = analytics.horizon_scan(market, horizons, extend=args.extend)
    bound = analytics.bound_constants().lower_bound
    rows = [
        {"T": t, "beta_T": b, "goal_prob": p, "lower_bound": bound, "margin": p - bound}
        for t, b, p in zip(curve.abscissa, curve.meta["beta"], curve.values)
    ]
    if args.mc:
        config = sim_config(args)
        wide = market.extended(max(horizons)) if args.extend else market
        for row in rows:
            sub = wide.truncated(row["T"])
            result = simulate(EfficientStrategy(sub, args.x0, args.target[0]), config)
            _, bank_first, goal_first, _ = result.bankruptcy_reports()
            row.update({
                "mc_goal_prob": result.goal_report().estimate,
                "mc_goal_prob_se": result.goal_report().std_error,
                "bankruptcy_first": bank_first.estimate,
                "bankruptcy_first_se": bank_first.std_error,
                "goal_first": goal_first.estimate,
                "goal_first_se": goal_first.std_error,
            })
        best = min(range(len(rows)), key=lambda i: rows[i]["bankruptcy_first"])
        for i, row in enumerate(rows):
            row["is_argmin"] = i == best
    emit(args, render(rows, args.format))
    return 0 if all(r["margin"] >= -1e-9 for r in rows) else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--market", help="market JSON file (default: built-in reference market)")
    common.add_argument("--x0", type=float, default=1.0, help="initial wealth")
    common.add_argument("--target", type=float, action="append",
                        help="expected terminal wealth z (repeatable; default 1.10)")
    common.add_argument("--paths", type=int, default=100_000)
    common.add_argument("--steps", type=int, default=1000, help="time steps per coefficient piece")
    common.add_argument("--seed", type=int, default=None,
                        help=f"RNG seed (default: ${SEED_ENV} or 0)")
    common.add_argument("--scheme", choices=["exact", "euler"], default="exact")
    common.add_argument("--bridge", choices=["on", "off"], default="on")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for simulation")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=["csv", "json"], default="csv")

    parser = argparse.ArgumentParser(prog="mvgoal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("frontier", parents=[common], help="gamma and minimum variance per target")
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("prob", parents=[common], help="analytic goal-achieving probability")
    p.add_argument("--beta", type=float, action="append",
                   help="beta(T) values to evaluate (default: the market's)")
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo reports with a 4-SE gate")
    p.add_argument("--dump-paths", help="per-path CSV output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bound", parents=[common], help="lower-bound constants and the f curve")
    p.add_argument("--xmax", type=float, default=3.0, help="right end of the f curve")
    p.add_argument("--curve-points", type=int, default=301)
    p.add_argument("--xmax-search", type=float, default=10.0)
    p.add_argument("--points", type=int, default=10_000, help="grid points for minimising f")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("horizon", parents=[common], help="goal probability against horizon")
    p.add_argument("--horizons", help="comma-separated horizons")
    p.add_argument("--t-max", type=float, default=4.0)
    p.add_argument("--t-points", type=int, default=16)
    p.add_argument("--extend", action="store_true",
                   help="hold final coefficients beyond the market horizon")
    p.add_argument("--mc", action="store_true",
                   help="add Monte Carlo bankruptcy-before-goal columns")
    p.set_defaults(func=cmd_horizon)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.target is None:
        args.target = [1.10]
    if args.seed is None:
        args.seed = int(os.environ.get(SEED_ENV, "0"))
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"mvgoal {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
