"""Command-line interface.

Every subcommand prints one JSON document on stdout.  Exit codes: 0 success,
2 invalid input, 3 transport solver failure, 4 failed reproduction verdict.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import List, Optional

from . import __version__, errors

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_VERDICT = 0, 2, 3, 4


def _dump(obj) -> None:
    def default(o):
        if hasattr(o, "tolist"):
            return o.tolist()
        return str(o)

    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return str(o)
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return o

    print(json.dumps(clean(obj), indent=2, default=default))


def _cmd_dist(args):
    from .config import load_measure
    from .metric import space_from_spec
    from .transport import wasserstein_exact

    space = space_from_spec(args.space)
    P, Q = load_measure(args.measure_a, space), load_measure(args.measure_b, space)
    value, plan = wasserstein_exact(P, Q, args.r)
    out = {"r": args.r, "value": value, "cost_r": plan.cost_r, "marginal_residual": plan.marginal_residual()}
    if args.plan:
        out["plan"] = [[int(i), int(j), float(v)] for i, j, v in zip(plan.rows, plan.cols, plan.values)]
    _dump(out)


def _count_cmd(fn_name):
    def run(args):
        from . import partitions
        from .metric import space_from_spec

        space = space_from_spec(args.space)
        cb = getattr(partitions, fn_name)(space, args.eps, args.mode)
        out = {"eps": args.eps, "mode": args.mode, "lower": cb.lower, "upper": cb.upper, "exact": cb.exact}
        w = cb.witness
        if isinstance(w, partitions.Partition):
            out["witness_cells"] = [list(c) for c in w.cells]
        elif w is not None:
            out["witness_points"] = list(w)
        _dump(out)

    return run


def _cmd_bound(args):
    from . import bounds
    from .config import parse_float_list, parse_int_list, read_ini
    from .metric import space_from_spec
    from .partitions import covering_number, packing_radii

    cp = read_ini(args.params)
    sec_name = next((s for s in (f"bound.{args.which}", args.which, "bound") if cp.has_section(s)), None)
    if sec_name is None:
        raise errors.ConfigError(f"no [bound.{args.which}] section in {args.params}")
    sec = cp[sec_name]
    n, r = int(sec.get("n", "1")), float(sec.get("r", "1"))
    space = space_from_spec(sec["space"]) if "space" in sec else None
    if args.which == "thm1":
        eps = parse_float_list(sec["eps"])
        if "covering" in sec:
            counts = parse_int_list(sec["covering"])
        elif space is not None:
            mode = sec.get("mode", "exact" if space.size <= 12 else "greedy")
            counts = [space.size if e == 0 else covering_number(space, e, mode).upper for e in eps]
        else:
            raise errors.ConfigError("thm1 needs 'covering' counts or a 'space'")
        if "diameter" in sec:
            diam = float(sec["diameter"])
        elif space is not None:
            diam = space.diameter()
        else:
            raise errors.ConfigError("thm1 needs 'diameter' or a 'space'")
        rep = bounds.theorem1_bound(eps, counts, n, r, diam, sec.get("variant", "canonical"))
    elif args.which == "thm2":
        w = parse_float_list(sec["w"])
        eps = parse_float_list(sec["eps"]) if sec.get("eps", "").strip() else []
        covers = None
        if eps:
            rows = [parse_int_list(row) for row in sec["shell_covers"].split(";") if row.strip()]
            covers = rows
        rep = bounds.theorem2_bound(
            w, eps, covers, float(sec["moment"]), float(sec["ell"]), n, r,
            eps0=float(sec["eps0"]) if "eps0" in sec else None,
            tail=sec.get("tail", "bounded"), variant=sec.get("variant", "statement"),
        )
    else:
        if "radii" in sec:
            radii = {}
            for item in sec["radii"].split(","):
                k, v = item.split(":")
                radii[int(k)] = float(v)
        elif space is not None:
            mode = sec.get("mode", "exact" if space.size <= 20 else "greedy")
            radii = packing_radii(space, min(32 * n, space.size), mode)
        else:
            raise errors.ConfigError("thm3 needs 'radii' or a 'space'")
        rep = bounds.theorem3_lower_bound(radii, n, r)
    _dump(rep.to_dict())


def _cmd_project(args):
    from .config import load_measure, parse_index_list
    from .estimators import voronoi_project
    from .metric import space_from_spec

    space = space_from_spec(args.space)
    Q = load_measure(args.measure, space)
    Qp = voronoi_project(Q, parse_index_list(args.centers))
    _dump({"centers": parse_index_list(args.centers), "weights": {int(i): float(Qp.weights[i]) for i in Qp.support}})


def _cmd_experiment(args):
    from .config import load_config
    from .harness import run_convergence_experiment

    cfg = load_config(args.config)
    if args.output:
        cfg.output_path = args.output
    res = run_convergence_experiment(cfg)
    out = {"status": res.status, "rows": res.rows, "output": cfg.output_path}
    if len(res.rows) >= 2 and all(r["mean_wrr"] > 0 for r in res.rows):
        f = res.fit()
        out["fit"] = {"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared}
    _dump(out)


def _cmd_reproduce(args):
    from .config import overrides_from_pairs
    from .harness import reproduce_example

    ov = overrides_from_pairs(args.set or [])
    if args.output:
        ov["output"] = args.output
    rep = reproduce_example(args.which, ov)
    _dump(rep.summary())
    return EXIT_OK if rep.verdict else EXIT_VERDICT


def _cmd_multinomial(args):
    from .config import parse_int_list
    from .harness import multinomial_risk_experiment

    rows = multinomial_risk_experiment(args.k, parse_int_list(args.n_grid), args.trials, args.seed)
    _dump({"rows": rows, "all_ok": all(r["ok"] for r in rows)})


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wassrate", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dist", help="exact Wasserstein distance between two measure files")
    d.add_argument("measure_a")
    d.add_argument("measure_b")
    d.add_argument("--space", required=True, help="generator spec such as 'path(5)' or a distance file")
    d.add_argument("--r", type=float, default=1.0)
    d.add_argument("--plan", action="store_true", help="include the optimal plan")
    d.set_defaults(func=_cmd_dist)

    for name, fn, helptext in (("cover", "covering_number", "covering number"), ("pack", "packing_number", "packing number")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("space")
        c.add_argument("--eps", type=float, required=True)
        c.add_argument("--mode", choices=("exact", "greedy"), default="exact")
        c.set_defaults(func=_count_cmd(fn))

    b = sub.add_parser("bound", help="evaluate a closed-form bound from a parameter file")
    b.add_argument("which", choices=("thm1", "thm2", "thm3"))
    b.add_argument("--params", required=True)
    b.set_defaults(func=_cmd_bound)

    pr = sub.add_parser("project", help="Voronoi projection of a measure onto centers")
    pr.add_argument("measure")
    pr.add_argument("--centers", required=True, help="comma-separated point indices")
    pr.add_argument("--space", required=True)
    pr.set_defaults(func=_cmd_project)

    e = sub.add_parser("experiment", help="run a convergence experiment from a config file")
    e.add_argument("--config", required=True)
    e.add_argument("--output", help="CSV path (overrides the config)")
    e.set_defaults(func=_cmd_experiment)

    r = sub.add_parser("reproduce", help="run a canonical example and judge it")
    r.add_argument("which", choices=("finite", "cube", "grid"))
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a default (repeatable)")
    r.add_argument("--output", help="CSV path")
    r.set_defaults(func=_cmd_reproduce)

    m = sub.add_parser("multinomial", help="Monte Carlo L1 risk of multinomial frequencies")
    m.add_argument("--k", type=int, required=True)
    m.add_argument("--n-grid", default="64,1024")
    m.add_argument("--trials", type=int, default=2000)
    m.add_argument("--seed", type=int, default=0)
    m.set_defaults(func=_cmd_multinomial)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except errors.ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except errors.SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK if code is None else code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
