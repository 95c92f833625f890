"""Command-line entry point: ``adarhd {run,sweep,check,summarize}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import diagnostics
from .benchmarks import make_robust, make_shallow_hyperrep, make_simple_similarity, make_toy_quadratic
from .experiment import SpecError, format_table, load_spec, run_experiment, summarize, write_table
from .manifolds import SPD, Euclidean, Simplex, Stiefel


def _cmd_run(args) -> int:
    spec = load_spec(args.spec)
    if args.output:
        spec.output["dir"] = args.output
    if args.cmd == "run" and spec.sweep is not None:
        print("note: spec has a sweep block; running all of it", file=sys.stderr)
    results = run_experiment(spec, workers=args.workers)
    for r in results:
        best = r["final_ergodic_min_gradnorm"]
        best = "nan" if best is None else f"{best:.3e}"
        print(f"{r['key']:<60s} {r['status']:<9s} min|G|^2={best}  time={r['wall_time']:.2f}s")
    if spec.sweep is not None:
        print()
        print(format_table(summarize(spec.output_dir)))
    print(f"wrote {len(results)} trace(s) to {spec.output_dir}")
    return 0


def _check_targets(quick: bool):
    manifolds = [Euclidean(50), SPD(5), SPD(20), Stiefel(50, 10), Simplex(20)]
    problems = [
        ("toy_quadratic", make_toy_quadratic(4, 3, seed=0)),
        ("simple_similarity", make_simple_similarity(30, 8, 3, 0.01, seed=0)[0]),
        ("shallow_hyperrep", make_shallow_hyperrep(40, 12, 4, 0.1, seed=0)[0]),
        ("robust_karcher_mean", make_robust("karcher_mean", 6, 4, seed=0)[0]),
        ("robust_gaussian_mle", make_robust("gaussian_mle", 30, 5, seed=0)[0]),
    ]
    if quick:
        manifolds = manifolds[:2]
        problems = problems[:2]
    return manifolds, problems


def _cmd_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    manifolds, problems = _check_targets(args.quick)
    reports = []
    for m in manifolds:
        reports += [("manifold", repr(m), r) for r in diagnostics.check_manifold(m, args.samples, rng=rng)]
    for name, problem in problems:
        points = [(problem.upper.random_point(rng), problem.lower.random_point(rng)) for _ in range(args.points)]
        if name.startswith("robust"):
            # keep weights away from the simplex boundary
            points = [(0.5 * p + 0.5 / len(p), y) for p, y in points]
        reports += [("problem", name, r) for r in diagnostics.check_problem(problem, rng=rng, points=points)]
    for kind, target, rep in reports:
        print(f"{kind:<8s} {target:<22s} {rep}")
    failed = sum(not r.passed for _, _, r in reports)
    print(f"{len(reports) - failed}/{len(reports)} checks passed")
    if args.json:
        payload = [{"kind": k, "target": t, **r.to_dict()} for k, t, r in reports]
        Path(args.json).write_text(json.dumps(payload, indent=1))
    return 1 if failed else 0


def _cmd_summarize(args) -> int:
    rows = summarize(args.directory)
    print(format_table(rows))
    if args.output:
        write_table(rows, args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adarhd", description="Adaptive Riemannian bilevel experiments")
    sub = parser.add_subparsers(dest="cmd", required=True)
    for name, help_ in (("run", "run one experiment spec"), ("sweep", "run a spec with its sweep block")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("spec", help="YAML or JSON experiment spec")
        p.add_argument("-o", "--output", help="override output.dir")
        p.add_argument("-j", "--workers", type=int, default=None, help="parallel worker processes")
        p.set_defaults(func=_cmd_run)
    p = sub.add_parser("check", help="finite-difference and manifold property checks")
    p.add_argument("--samples", type=int, default=20, help="samples per manifold check")
    p.add_argument("--points", type=int, default=10, help="random points per problem")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true", help="only a small subset of targets")
    p.add_argument("--json", help="also write the reports to this JSON file")
    p.set_defaults(func=_cmd_check)
    p = sub.add_parser("summarize", help="time-to-threshold table for a directory of traces")
    p.add_argument("directory")
    p.add_argument("-o", "--output", help="write the table as CSV")
    p.set_defaults(func=_cmd_summarize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
