"""Batch command-line interface.

Subcommands: solve, classify, sweep, conditional, bp, sample, verify,
demo-denoise.  Outputs are JSON (or CSV for sweeps) and byte-identical for
identical arguments and seed.  Exit codes: 0 success, 1 failed mandatory
verify checks, 2 argument errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import inference, measure, model, solver, tree


def _load_param_doc(args) -> dict:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as handle:
            return json.load(handle)
    doc = {}
    for key in ("k", "theta", "a", "b", "c", "J", "beta"):
        val = getattr(args, key.lower(), None)
        if val is not None:
            doc[key] = val
    if "theta" in doc:
        doc.setdefault("a", 1.0)
        doc.setdefault("b", 1.0)
        doc.setdefault("c", 1.0)
    return doc


def _derived_from_args(args) -> model.DerivedParams:
    _, derived = model.parse_params(_load_param_doc(args))
    return derived


def _add_param_flags(sub):
    sub.add_argument("--config", help="JSON parameter document")
    sub.add_argument("--k", type=int)
    sub.add_argument("--theta", type=float)
    sub.add_argument("--a", type=float)
    sub.add_argument("--b", type=float)
    sub.add_argument("--c", type=float)


def _parse_point(text: str) -> solver.FixedPoint3:
    u, v, w = (float(tok) for tok in text.split(","))
    return solver.FixedPoint3(u, v, w)


def _parse_sigma_pair(text: str):
    sx, sy = (int(tok) for tok in text.replace("+", "").split(","))
    return (sx, sy)


def _parse_grid(text: str) -> List[float]:
    start, stop, step = (float(tok) for tok in text.split(":"))
    vals = []
    i = 0
    while True:
        val = start + i * step
        if val > stop + 1e-12:
            break
        vals.append(val)
        i += 1
    return vals


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _solution_set_doc(sols: solver.SolutionSet) -> dict:
    return {
        "count": sols.count,
        "points": [
            {
                "u": p.u,
                "v": p.v,
                "w": p.w,
                "residual": p.residual,
                "label": label,
            }
            for p, label in zip(sols.points, sols.labels)
        ],
    }


def cmd_solve(args) -> int:
    derived = _derived_from_args(args)
    cfg = solver.MultistartConfig()
    if args.grid:
        cfg = solver.MultistartConfig(grid=tuple(float(t) for t in args.grid.split(",")))
    sols = solver.solve_full_3d(derived, cfg)
    _emit(json.dumps(_solution_set_doc(sols), indent=2), args.output)
    return 0


def cmd_classify(args) -> int:
    record = solver.classify_tigm_count(args.k, args.theta)
    _emit(json.dumps(record, indent=2), args.output)
    return 0


def cmd_sweep(args) -> int:
    grid = _parse_grid(args.theta)
    rows = measure.curve_data(grid, args.k, a=args.a, family=args.family)
    header = list(rows[0].keys())
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join("" if row[key] is None else repr(row[key]) for key in header)
        )
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def cmd_conditional(args) -> int:
    derived = _derived_from_args(args)
    point = _parse_point(args.point)
    weights = measure.VertexWeight.from_point(point)
    table = measure.edge_conditional(_parse_sigma_pair(args.sigma), derived, weights)
    doc = {
        "%d,%d" % key: table[key]
        for key in ((1, 1), (-1, 1), (1, -1), (-1, -1))
    }
    _emit(json.dumps(doc, indent=2), args.output)
    return 0


def _problem_from_args(args, derived, sigma=None) -> inference.InferenceProblem:
    shape = tree.TreeShape(derived.k, args.depth, args.root_mode)
    point = _parse_point(args.point)
    law = measure.BoundaryLaw.from_fixed_point(point, derived)
    if sigma is None:
        with open(args.sigma_file, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
        sigma = {tree.parse_path(key): int(val) for key, val in raw.items()}
    return inference.InferenceProblem(shape=shape, derived=derived, law=law, sigma=sigma)


def cmd_bp(args) -> int:
    derived = _derived_from_args(args)
    problem = _problem_from_args(args, derived)
    marginals = inference.bp_marginals(problem)
    hidden = inference.map_estimate(problem)
    doc = {
        "marginals": {
            tree.path_str(x): {"-1": row[-1], "1": row[1]}
            for x, row in sorted(marginals.table.items(), key=lambda kv: (len(kv[0]), kv[0]))
        },
        "map": {
            tree.path_str(x): s
            for x, s in sorted(hidden.items(), key=lambda kv: (len(kv[0]), kv[0]))
        },
    }
    _emit(json.dumps(doc, indent=2), args.output)
    return 0


def cmd_sample(args) -> int:
    derived = _derived_from_args(args)
    shape = tree.TreeShape(derived.k, args.depth, args.root_mode)
    point = _parse_point(args.point)
    law = measure.BoundaryLaw.from_fixed_point(point, derived)
    kernel = measure.markov_kernel(derived, law, root_mode=args.root_mode)
    cfg = measure.sample(kernel, shape, args.seed)
    doc = {
        "s": {tree.path_str(x): v for x, v in sorted(cfg.s.items(), key=lambda kv: (len(kv[0]), kv[0]))},
        "sigma": {tree.path_str(x): v for x, v in sorted(cfg.sigma.items(), key=lambda kv: (len(kv[0]), kv[0]))},
    }
    _emit(json.dumps(doc, indent=2), args.output)
    return 0


def cmd_demo_denoise(args) -> int:
    derived = _derived_from_args(args)
    shape = tree.TreeShape(derived.k, args.depth, args.root_mode)
    if args.point:
        point = _parse_point(args.point)
    else:
        point = solver.solve_full_3d(derived).points[0]
    law = measure.BoundaryLaw.from_fixed_point(point, derived)
    kernel = measure.markov_kernel(derived, law, root_mode=args.root_mode)
    cfg = measure.sample(kernel, shape, args.seed)
    problem = inference.InferenceProblem(
        shape=shape, derived=derived, law=law, sigma=cfg.sigma
    )
    result = inference.denoise(problem)
    scores, total = inference.anomaly_scores(result["map"], cfg.sigma, shape)
    doc = {
        "flips_map_vs_observed": result["flips"],
        "mismatches_map_vs_hidden_truth": sum(
            1 for x in tree.ball(shape) if result["map"][x] != cfg.s[x]
        ),
        "energy_loss_map_vs_observed": total,
        "map": {tree.path_str(x): s for x, s in sorted(result["map"].items(), key=lambda kv: (len(kv[0]), kv[0]))},
    }
    _emit(json.dumps(doc, indent=2), args.output)
    return 0


# ---------------------------------------------------------------------------
# verify


def _verify_scalar_bifurcation() -> dict:
    counts_ok = True
    for gamma, expected in ((2.9, 1), (3.0, 1), (3.1, 3), (4.0, 3), (10.0, 3)):
        roots = solver.solve_scalar(solver.ScalarEqParams(k=2, gamma=gamma))
        counts_ok &= len(roots) == expected
    v1, v2 = solver.closed_form_k2(4.0)
    roots = solver.solve_scalar(solver.ScalarEqParams(k=2, gamma=4.0))
    closed_ok = abs(roots[0] - v1) < 1e-10 and abs(roots[2] - v2) < 1e-10
    prod_ok = True
    for theta in np.linspace(3.01, 20.0, 50):
        a, b = solver.closed_form_k2(float(theta))
        prod_ok &= abs(a * b - 1.0) < 1e-10
    passed = bool(counts_ok and closed_ok and prod_ok)
    return {"name": "scalar-bifurcation", "passed": passed}


def _verify_region_classification() -> dict:
    ok = True
    for theta, expected in ((0.2, 3), (0.5, 1), (2.0, 1), (4.0, 3)):
        record = solver.classify_tigm_count(2, theta)
        sols = solver.solve_invariant_sets(2, theta)
        ok &= record["count_lower_bound"] == expected == sols.count
    return {"name": "region-classification", "passed": bool(ok)}


def _verify_compatibility() -> dict:
    worst_good = 0.0
    settings = [
        (model.DerivedParams(k=2, theta=0.1, a=1.0, b=1.0, c=1.0), None),
        (model.DerivedParams(k=2, theta=4.0, a=1.0, b=1.0, c=1.0), None),
        (model.DerivedParams(k=1, theta=2.0, a=0.3, b=0.3, c=1.0), None),
    ]
    for derived, _ in settings:
        sols = solver.solve_full_3d(derived)
        for point in sols.points:
            law = measure.BoundaryLaw.from_fixed_point(point, derived)
            for depth in (1, 2):
                for mode in ("full", "reduced"):
                    shape = tree.TreeShape(derived.k, depth, mode)
                    worst_good = max(
                        worst_good, measure.check_compatibility(shape, derived, law)
                    )
    derived = model.DerivedParams(k=2, theta=4.0, a=1.0, b=1.0, c=1.0)
    good = solver.solve_full_3d(derived).points[0]
    bad_z = dict(measure.BoundaryLaw.from_fixed_point(good, derived).z)
    bad_z[(1, 1)] *= 2.0
    bad = measure.BoundaryLaw(z=bad_z)
    control = measure.check_compatibility(tree.TreeShape(2, 1, "full"), derived, bad)
    passed = worst_good < 1e-10 and control > 1e-3
    return {
        "name": "compatibility-oracle",
        "passed": bool(passed),
        "worst_fixed_point_defect": worst_good,
        "perturbed_control_defect": control,
    }


def _verify_edge_conditionals() -> dict:
    ok = True
    for theta in (0.5, 1.0, 4.0):
        derived = model.DerivedParams(k=2, theta=theta, a=1.0, b=1.0, c=1.0)
        for sig in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            table = measure.edge_conditional(sig, derived, measure.VertexWeight.uniform())
            for (sx, sy), prob in table.items():
                expected = theta ** ((1 + sx * sy) / 2) / (2.0 * (1.0 + theta))
                ok &= abs(prob - expected) < 1e-12
    derived = model.DerivedParams(k=2, theta=4.0, a=1.0, b=1.0, c=1.0)
    v1, _ = solver.closed_form_k2(4.0)
    weights = measure.VertexWeight.from_point(solver.FixedPoint3(1.0, v1, v1))
    table = measure.edge_conditional((1, 1), derived, weights)
    ok &= abs(table[(1, 1)] - 4 * v1 * v1 / (4 * v1 * v1 + 2 * v1 + 4)) < 1e-12
    derived = model.DerivedParams(k=2, theta=0.1, a=2.0, b=2.0, c=1.0)
    weights = measure.VertexWeight.from_point(
        solver.FixedPoint3(0.0402350, 1.5976066, 0.4316947)
    )
    table = measure.edge_conditional((1, 1), derived, weights)
    expected = (0.347, 0.324, 0.324, 0.005)
    got = (table[(1, 1)], table[(-1, 1)], table[(1, -1)], table[(-1, -1)])
    ok &= all(abs(g - e) < 0.01 for g, e in zip(got, expected))
    return {"name": "edge-conditionals", "passed": bool(ok), "mu3_pp_row": list(got)}


def _verify_bp() -> dict:
    rng = np.random.default_rng(20240817)
    worst = 0.0
    map_ok = True
    for k, theta, a in ((1, 2.0, 0.3), (2, 4.0, 1.0)):
        derived = model.DerivedParams(k=k, theta=theta, a=a, b=a, c=1.0)
        point = solver.solve_full_3d(derived).points[0]
        law = measure.BoundaryLaw.from_fixed_point(point, derived)
        shape = tree.TreeShape(k, 2, "full")
        verts = tree.ball(shape)
        for _ in range(5):
            sigma = {x: int(rng.choice((-1, 1))) for x in verts}
            problem = inference.InferenceProblem(
                shape=shape, derived=derived, law=law, sigma=sigma
            )
            oracle = inference.exact_posterior(problem)
            marg = inference.bp_marginals(problem)
            for x in verts:
                worst = max(
                    worst, abs(marg.table[x][1] - oracle.vertex_marginal(x)[1])
                )
            hidden = inference.map_estimate(problem)
            map_ok &= (
                oracle.prob_of(hidden)
                >= float(np.exp(np.max(oracle.log_probs))) - 1e-12
            )
    passed = worst < 1e-10 and map_ok
    return {"name": "bp-exactness", "passed": bool(passed), "worst_marginal_gap": worst}


def _verify_kernel() -> dict:
    derived = model.DerivedParams(k=2, theta=4.0, a=1.0, b=1.0, c=1.0)
    point = solver.solve_full_3d(derived).points[0]
    law = measure.BoundaryLaw.from_fixed_point(point, derived)
    kernel = measure.markov_kernel(derived, law, root_mode="full")
    mu = measure.finite_volume(tree.TreeShape(2, 2, "full"), derived, law)
    joint = mu.pair_marginal((), (0,))
    cond = joint / joint.sum(axis=1, keepdims=True)
    tv = 0.5 * np.max(np.abs(cond - kernel.K).sum(axis=1))
    return {"name": "kernel-consistency", "passed": bool(tv < 1e-10), "tv": float(tv)}


def _verify_residual_gate() -> dict:
    ok = True
    for derived in (
        model.DerivedParams(k=2, theta=0.1, a=1.0, b=1.0, c=1.0),
        model.DerivedParams(k=1, theta=2.0, a=0.3, b=0.3, c=1.0),
    ):
        for point in solver.solve_full_3d(derived).points:
            ok &= point.residual < 1e-9
    return {"name": "residual-gate", "passed": bool(ok)}


def run_verify() -> dict:
    checks = [
        _verify_scalar_bifurcation(),
        _verify_region_classification(),
        _verify_compatibility(),
        _verify_edge_conditionals(),
        _verify_bp(),
        _verify_kernel(),
        _verify_residual_gate(),
    ]
    derived = model.DerivedParams(k=2, theta=4.0, a=1.0, b=1.0, c=1.0)
    point = solver.solve_full_3d(derived).points[0]
    law = measure.BoundaryLaw.from_fixed_point(point, derived)
    pi_enum = measure.markov_kernel(derived, law, root_mode="full").pi0
    pi_closed = measure.closed_form_root_law(derived, law, root_mode="full")
    informational = {
        "reference_rows": solver.reference_row_report(),
        "root_law_closed_form_gap": float(np.max(np.abs(pi_enum - pi_closed))),
        "k1_conditional_variants": measure.k1_conditional_variants(2.0, 0.3),
    }
    return {
        "pass": all(check["passed"] for check in checks),
        "checks": checks,
        "informational": informational,
    }


def cmd_verify(args) -> int:
    report = run_verify()
    _emit(json.dumps(report, indent=2), args.output)
    return 0 if report["pass"] else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bilayer-ising")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("solve", help="find all TI fixed points")
    _add_param_flags(sub)
    sub.add_argument("--grid", help="comma-separated multistart grid values")
    sub.add_argument("--output")
    sub.set_defaults(func=cmd_solve)

    sub = subs.add_parser("classify", help="phase-region record")
    sub.add_argument("--k", type=int, required=True)
    sub.add_argument("--theta", type=float, required=True)
    sub.add_argument("--output")
    sub.set_defaults(func=cmd_classify)

    sub = subs.add_parser("sweep", help="edge-conditional curves over a theta grid")
    sub.add_argument("--k", type=int, required=True)
    sub.add_argument("--family", choices=("fig1", "fig2"), default="fig1")
    sub.add_argument("--theta", required=True, help="grid as start:stop:step")
    sub.add_argument("--a", type=float)
    sub.add_argument("--output")
    sub.set_defaults(func=cmd_sweep)

    sub = subs.add_parser("conditional", help="edge conditional table")
    _add_param_flags(sub)
    sub.add_argument("--point", required=True, help="fixed point as u,v,w")
    sub.add_argument("--sigma", required=True, help="observed pair, e.g. +1,+1")
    sub.add_argument("--output")
    sub.set_defaults(func=cmd_conditional)

    sub = subs.add_parser("bp", help="marginals and MAP for an observed layer")
    _add_param_flags(sub)
    sub.add_argument("--point", required=True)
    sub.add_argument("--depth", type=int, required=True)
    sub.add_argument("--root-mode", choices=("full", "reduced"), default="full")
    sub.add_argument("--sigma-file", required=True, help="JSON path->spin map")
    sub.add_argument("--output")
    sub.set_defaults(func=cmd_bp)

    sub = subs.add_parser("sample", help="forward-sample a bilayer configuration")
    _add_param_flags(sub)
    sub.add_argument("--point", required=True)
    sub.add_argument("--depth", type=int, required=True)
    sub.add_argument("--root-mode", choices=("full", "reduced"), default="full")
    sub.add_argument("--seed", type=int, required=True)
    sub.add_argument("--output")
    sub.set_defaults(func=cmd_sample)

    sub = subs.add_parser("verify", help="run the oracle suite and emit a report")
    sub.add_argument("--output")
    sub.set_defaults(func=cmd_verify)

    sub = subs.add_parser("demo-denoise", help="sample, denoise, report flips")
    _add_param_flags(sub)
    sub.add_argument("--point")
    sub.add_argument("--depth", type=int, default=2)
    sub.add_argument("--root-mode", choices=("full", "reduced"), default="full")
    sub.add_argument("--seed", type=int, required=True)
    sub.add_argument("--output")
    sub.set_defaults(func=cmd_demo_denoise)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        parser.exit(2, "error: %s\n" % exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
