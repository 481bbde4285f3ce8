"""Command-line front end.

Subcommands: ingest, ml, drl, sweep, frontier, regret-sim, report. Every
command is a pure function of its input files, flags, and seed; output
files are written atomically and reruns are byte-identical. Exit codes:
0 success, 2 input error, 3 infeasible constraints, 4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from .evalharness import (
    FrontierPoint,
    SweepPoint,
    cost_frontier,
    generalization_gap,
    regret_simulation,
    sweep_rho,
)
from .lottery import bipartisan_set, lottery_to_json_dict, maximal_lottery
from .lpcore import SolverError
from .prefdata import (
    GroupMargins,
    MixtureWeights,
    VoteParseError,
    build_margins,
    empirical_weights,
    group_margins_from_json,
    group_margins_to_json,
    parse_votes,
    pooled_matrix,
    reversal_rate,
    split,
)
from .robust import (
    InfeasibleConstraintsError,
    LinearConstraint,
    TvBall,
    inner_min_value,
    report_to_json_dict,
    rho_from_data,
    robust_bipartisan_set,
    robust_lottery,
    worst_case_certificate,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4


def _atomic_write(path: str, data: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _write_json(path: str, payload) -> None:
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    _atomic_write(path, buf.getvalue())


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ValueError(f"expected comma-separated numbers, got {text!r}") from None


def _load_margins(path: str) -> GroupMargins:
    with open(path, "r", encoding="utf-8") as fh:
        return group_margins_from_json(fh.read())


def _load_costs(path: str) -> dict[str, float]:
    costs: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["model", "cost"]:
            raise ValueError("costs file needs header 'model,cost'")
        for row in reader:
            if not row or all(c.strip() == "" for c in row):
                continue
            costs[row[0].strip()] = float(row[1])
    return costs


def _mixture_for(gm: GroupMargins, args) -> MixtureWeights:
    if getattr(args, "weights", None):
        w = np.array(_parse_float_list(args.weights))
        if len(w) != gm.k:
            raise ValueError(f"expected {gm.k} weights, got {len(w)}")
        return MixtureWeights(w / w.sum())
    return MixtureWeights(np.array(gm.votes_per_group) / sum(gm.votes_per_group))


def cmd_ingest(args) -> int:
    with open(args.votes, "rb") as fh:
        table = parse_votes(fh, format=args.format, groups=args.groups.split(",") if args.groups else None)
    gm = build_margins(table, smoothing=args.eta, tie_policy=args.ties)
    _atomic_write(args.output, group_margins_to_json(gm) + "\n")
    print(f"models: {gm.m}")
    print(f"groups: {gm.k}")
    for g, v in zip(gm.groups, gm.votes_per_group):
        print(f"  {g}: {v:g} votes")
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_ml(args) -> int:
    gm = _load_margins(args.margins)
    if args.group is not None:
        if args.group not in gm.groups:
            raise ValueError(f"unknown group {args.group!r}; have {', '.join(gm.groups)}")
        matrix = gm.per_group[gm.groups.index(args.group)]
    else:
        matrix = pooled_matrix(gm, _mixture_for(gm, args))
    lottery = maximal_lottery(matrix)
    members = sorted(bipartisan_set(matrix))
    payload = lottery_to_json_dict(lottery)
    payload["bipartisan_set"] = [gm.roster[i] for i in members]
    if args.output:
        _write_json(args.output, payload)
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_drl(args) -> int:
    gm = _load_margins(args.margins)
    w0 = _mixture_for(gm, args)
    if args.rho_auto:
        n = int(sum(gm.votes_per_group))
        rho = rho_from_data(n, gm.k, args.delta)
    else:
        rho = args.rho
    ball = TvBall(gm, w0, rho)
    extra = ()
    if args.budget is not None:
        if args.costs is None:
            raise ValueError("--budget needs --costs")
        costs = _load_costs(args.costs)
        missing = [mid for mid in gm.roster if mid not in costs]
        if missing:
            raise ValueError(f"costs missing for models: {missing}")
        cost_vec = np.array([costs[mid] for mid in gm.roster])
        if args.budget < cost_vec.min():
            raise InfeasibleConstraintsError(
                f"budget {args.budget} is below the cheapest model ({cost_vec.min()})"
            )
        extra = (LinearConstraint(cost_vec, args.budget),)
    report = robust_lottery(ball, extra_constraints=extra)
    payload = report_to_json_dict(report, ball)
    per_group = {
        g: 0.5 + 0.5 * float((report.lottery.probs @ mat.margins).min())
        for g, mat in zip(gm.groups, gm.per_group)
    }
    worst_group = min(per_group, key=lambda g: (per_group[g], g))
    opponent, mixture = worst_case_certificate(report.lottery, ball)
    payload["diagnostics"] = {
        "per_group_win_rate": per_group,
        "worst_group": worst_group,
        "pooled_value": inner_min_value(report.lottery, ball),
        "binding_opponent": gm.roster[opponent],
        "worst_case_mixture": {g: float(w) for g, w in zip(gm.groups, mixture)},
    }
    if args.output:
        _write_json(args.output, payload)
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def _sweep_rows(points: list[SweepPoint]) -> list[list]:
    rows: list[list] = []
    for pt in points:
        rows.append([pt.rho, pt.split, "overall", pt.overall_mean, pt.overall_stderr])
        rows.append([pt.rho, pt.split, "worst_group", pt.worst_group_mean, pt.worst_group_stderr])
        for g in sorted(pt.per_group):
            mean, se = pt.per_group[g]
            rows.append([pt.rho, pt.split, f"group:{g}", mean, se])
    return rows


def _sweep_json(points: list[SweepPoint]) -> list[dict]:
    return [
        {
            "rho": pt.rho,
            "split": pt.split,
            "overall": {"mean": pt.overall_mean, "stderr": pt.overall_stderr},
            "worst_group": {"mean": pt.worst_group_mean, "stderr": pt.worst_group_stderr},
            "per_group": {g: {"mean": m, "stderr": s} for g, (m, s) in sorted(pt.per_group.items())},
        }
        for pt in points
    ]


def cmd_sweep(args) -> int:
    with open(args.votes, "rb") as fh:
        table = parse_votes(fh, format=args.format)
    train, test = split(table, args.train_frac, seed=args.seed)
    grid = _parse_float_list(args.grid)
    points = sweep_rho(
        train, test, grid, bootstrap_n=args.bootstrap, seed=args.seed,
        eta=args.eta, tie_policy=args.ties, opponent=args.opponent, stratified=args.stratified,
    )
    gaps = generalization_gap(points, points)
    _write_csv(args.out_prefix + "_sweep.csv",
               ["rho", "split", "series", "mean", "stderr"], _sweep_rows(points))
    _write_json(args.out_prefix + "_sweep.json", {
        "points": _sweep_json(points),
        "generalization_gap": [{"rho": r, "gap": g} for r, g in gaps],
    })
    if args.figures:
        from .figures import render_sweep

        render_sweep(points, args.out_prefix + "_sweep.png", split="test")
    print(f"wrote {args.out_prefix}_sweep.csv ({len(points)} points)")
    return EXIT_OK


def _frontier_rows(points: list[FrontierPoint], roster) -> tuple[list[str], list[list]]:
    header = ["budget", "feasible", "worst_case_win_rate", "expected_cost"] + [f"p:{mid}" for mid in roster]
    rows = []
    for pt in points:
        probs = list(pt.lottery.probs) if pt.lottery is not None else [float("nan")] * len(roster)
        rows.append([pt.budget, int(pt.feasible), pt.worst_case_win_rate, pt.expected_cost, *probs])
    return header, rows


def cmd_frontier(args) -> int:
    gm = _load_margins(args.margins)
    costs = _load_costs(args.costs)
    budgets = _parse_float_list(args.budgets)
    points = cost_frontier(gm, costs, budgets, rho=args.rho)
    header, rows = _frontier_rows(points, gm.roster)
    _write_csv(args.out_prefix + "_frontier.csv", header, rows)
    _write_json(args.out_prefix + "_frontier.json", [
        {
            "budget": pt.budget,
            "feasible": pt.feasible,
            "worst_case_win_rate": pt.worst_case_win_rate,
            "expected_cost": pt.expected_cost,
            "lottery": lottery_to_json_dict(pt.lottery) if pt.lottery is not None else None,
        }
        for pt in points
    ])
    if args.figures:
        from .figures import render_frontier

        render_frontier(points, args.out_prefix + "_frontier.png")
    print(f"wrote {args.out_prefix}_frontier.csv ({len(points)} budgets)")
    return EXIT_OK


def cmd_regret_sim(args) -> int:
    gm = _load_margins(args.margins)
    if args.w_star:
        w = np.array(_parse_float_list(args.w_star))
        if len(w) != gm.k:
            raise ValueError(f"expected {gm.k} weights, got {len(w)}")
        w_star = MixtureWeights(w / w.sum())
    else:
        w_star = MixtureWeights(np.array(gm.votes_per_group) / sum(gm.votes_per_group))
    samples = regret_simulation(gm, w_star, n=args.n, delta=args.delta, trials=args.trials, seed=args.seed)
    _write_csv(args.out_prefix + "_regret.csv",
               ["trial", "rho", "regret", "covered", "bound"],
               [[s.trial, s.rho_used, s.regret, int(s.covered), s.bound] for s in samples])
    coverage = sum(s.covered for s in samples) / len(samples)
    within = sum(s.regret <= s.bound for s in samples) / len(samples)
    _write_json(args.out_prefix + "_regret.json", {
        "n": args.n, "delta": args.delta, "trials": args.trials,
        "rho": samples[0].rho_used, "bound": samples[0].bound,
        "coverage_fraction": coverage, "bound_satisfaction_fraction": within,
    })
    print(f"coverage: {coverage:.4f}  regret<=bound: {within:.4f}")
    print(f"wrote {args.out_prefix}_regret.csv ({len(samples)} trials)")
    return EXIT_OK


def cmd_report(args) -> int:
    with open(args.votes, "rb") as fh:
        table = parse_votes(fh, format=args.format, groups=args.groups.split(",") if args.groups else None)
    if not table.records:
        raise ValueError("no vote records after filtering")
    gm = build_margins(table, smoothing=args.eta, tie_policy=args.ties)
    w_hat = empirical_weights(table)
    grid = _parse_float_list(args.grid)
    rho_max = max(grid)

    # reversal table over all pairs, most contested first
    reversal_rows: list[tuple[str, str, float]] = []
    if gm.k >= 2:
        for i in range(gm.m):
            for j in range(i + 1, gm.m):
                rate = reversal_rate(gm, w_hat, i, j)
                reversal_rows.append((gm.roster[i], gm.roster[j], rate))
        reversal_rows.sort(key=lambda row: (-row[2], row[0], row[1]))
    _write_csv(args.out_prefix + "_reversals.csv",
               ["model_a", "model_b", "reversal_rate"],
               [list(r) for r in reversal_rows])

    # lotteries across the radius grid on the full table
    lottery_rows: list[list] = []
    prob_rows: list[list[float]] = []
    for rho in grid:
        rep = robust_lottery(TvBall(gm, w_hat, rho))
        probs = [float(p) for p in rep.lottery.probs]
        prob_rows.append(probs)
        lottery_rows.append([rho, rep.robust_value, *probs])
    _write_csv(args.out_prefix + "_lotteries.csv",
               ["rho", "robust_value"] + [f"p:{mid}" for mid in gm.roster], lottery_rows)

    train, test = split(table, args.train_frac, seed=args.seed)
    points = sweep_rho(train, test, grid, bootstrap_n=args.bootstrap, seed=args.seed,
                       eta=args.eta, tie_policy=args.ties, opponent=args.opponent)
    gaps = generalization_gap(points, points)
    _write_csv(args.out_prefix + "_sweep.csv",
               ["rho", "split", "series", "mean", "stderr"], _sweep_rows(points))

    pooled = pooled_matrix(gm, w_hat)
    summary = {
        "models": gm.m,
        "groups": list(gm.groups),
        "votes_per_group": {g: v for g, v in zip(gm.groups, gm.votes_per_group)},
        "empirical_weights": [float(w) for w in w_hat.weights],
        "eta": gm.eta,
        "tie_policy": gm.tie_policy,
        "bipartisan_set": [gm.roster[i] for i in sorted(bipartisan_set(pooled))],
        "robust_bipartisan_set": [
            gm.roster[i] for i in sorted(robust_bipartisan_set(TvBall(gm, w_hat, rho_max)))
        ],
        "generalization_gap": [{"rho": r, "gap": g} for r, g in gaps],
        "top_reversals": [
            {"model_a": a, "model_b": b, "rate": r} for a, b, r in reversal_rows[:5]
        ],
    }
    _write_json(args.out_prefix + "_summary.json", summary)

    frontier_points = None
    if args.costs:
        costs = _load_costs(args.costs)
        budgets = _parse_float_list(args.budgets) if args.budgets else None
        if budgets is None:
            vals = sorted(costs[mid] for mid in gm.roster)
            budgets = [vals[0], float(np.mean(vals)), vals[-1]]
        frontier_points = cost_frontier(gm, costs, budgets, rho=rho_max)
        header, rows = _frontier_rows(frontier_points, gm.roster)
        _write_csv(args.out_prefix + "_frontier.csv", header, rows)

    from .figures import render_frontier, render_lottery_mass, render_reversals, render_sweep

    render_sweep(points, args.out_prefix + "_sweep.png", split="test")
    render_lottery_mass(grid, gm.roster, prob_rows, args.out_prefix + "_lotteries.png")
    if reversal_rows:
        render_reversals(reversal_rows, args.out_prefix + "_reversals.png")
    if frontier_points is not None:
        render_frontier(frontier_points, args.out_prefix + "_frontier.png")

    print(f"report written under prefix {args.out_prefix}")
    for a, b, r in reversal_rows[:5]:
        print(f"  reversal {a} vs {b}: {r:.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="votelot",
        description="Maximal lotteries and distributionally robust lotteries from pairwise votes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse votes and write per-group margin matrices as JSON")
    p.add_argument("votes", help="votes file (CSV: model_a,model_b,winner,group[,weight])")
    p.add_argument("-o", "--output", required=True, help="margins JSON path")
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    p.add_argument("--eta", type=float, default=1.0, help="additive smoothing per ordered pair (default 1)")
    p.add_argument("--ties", choices=["drop", "half_win"], default="drop")
    p.add_argument("--groups", help="comma-separated whitelist; other groups are dropped")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("ml", help="maximal lottery of one group or a pooled mixture")
    p.add_argument("margins", help="margins JSON from ingest")
    sel = p.add_mutually_exclusive_group()
    sel.add_argument("--group", help="solve this group's matrix")
    sel.add_argument("--weights", help="pool groups with these weights (comma-separated)")
    p.add_argument("-o", "--output", help="write lottery JSON here")
    p.set_defaults(func=cmd_ml)

    p = sub.add_parser("drl", help="distributionally robust lottery over a TV ball")
    p.add_argument("margins")
    radius = p.add_mutually_exclusive_group(required=True)
    radius.add_argument("--rho", type=float, help="TV radius in [0, 1]")
    radius.add_argument("--rho-auto", action="store_true", help="radius from the vote count and --delta")
    p.add_argument("--delta", type=float, default=0.1, help="confidence level for --rho-auto")
    p.add_argument("--weights", help="center mixture (default: empirical)")
    p.add_argument("--budget", type=float, help="expected-cost cap")
    p.add_argument("--costs", help="CSV model,cost (currency per 1M input tokens)")
    p.add_argument("-o", "--output", help="write report JSON here")
    p.set_defaults(func=cmd_drl)

    p = sub.add_parser(
        "sweep",
        help="radius sweep with bootstrap error bars on a train/test split",
        epilog="CSV columns: rho, split (train|test), series (overall | worst_group | "
               "group:<id>), mean, stderr. The JSON adds per-radius generalization gaps.",
    )
    p.add_argument("votes")
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--grid", default="0,0.25,0.5,0.75,1")
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--bootstrap", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--ties", choices=["drop", "half_win"], default="drop")
    p.add_argument("--opponent", choices=["worst", "uniform"], default="worst")
    p.add_argument("--stratified", action="store_true", help="bootstrap within each group")
    p.add_argument("--figures", action="store_true", help="also render PNG charts")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser(
        "frontier",
        help="cost-constrained robust lotteries across budgets",
        epilog="CSV columns: budget, feasible (0|1), worst_case_win_rate, expected_cost, "
               "then one p:<model> probability column per roster entry.",
    )
    p.add_argument("margins")
    p.add_argument("--costs", required=True)
    p.add_argument("--budgets", required=True, help="comma-separated budget caps")
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--figures", action="store_true")
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser(
        "regret-sim",
        help="Monte Carlo regret of the plug-in robust lottery",
        epilog="CSV columns: trial, rho, regret, covered (0|1), bound. The JSON adds "
               "coverage and bound-satisfaction fractions.",
    )
    p.add_argument("margins")
    p.add_argument("--n", type=int, required=True, help="group labels sampled per trial")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--w-star", help="true mixture (default: empirical from the margins file)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_regret_sim)

    p = sub.add_parser(
        "report",
        help="full pipeline: reversals, lotteries, sweep, figures",
        epilog="Writes <prefix>_reversals.csv (model_a, model_b, reversal_rate, sorted "
               "descending), <prefix>_lotteries.csv (rho, robust_value, p:<model>...), "
               "<prefix>_sweep.csv (as in the sweep command), <prefix>_summary.json, an "
               "optional <prefix>_frontier.csv, and a PNG chart per table.",
    )
    p.add_argument("votes")
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--grid", default="0,0.25,0.5,0.75,1")
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--bootstrap", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--ties", choices=["drop", "half_win"], default="drop")
    p.add_argument("--opponent", choices=["worst", "uniform"], default="worst")
    p.add_argument("--groups", help="comma-separated whitelist")
    p.add_argument("--costs", help="optional costs CSV for a frontier section")
    p.add_argument("--budgets", help="budgets for the frontier section")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (VoteParseError, ValueError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleConstraintsError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
