"""Command-line front end.

Subcommands::

    radcom make-scenario   build a scenario JSON (optionally randomized)
    radcom feasibility     per-cell SDR threshold bounds for a scenario
    radcom solve           run the joint design and report/export the result
    radcom baseline        run one of the reference designs
    radcom trace           per-iteration convergence rows for the joint design
    radcom sweep           Monte-Carlo grid -> records file + manifest

Exit codes: 0 success, 1 infeasible problem, 2 bad usage or invalid input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import baselines as _baselines
from .errors import DefinitenessError, InfeasibleError, ScenarioError
from .experiments import SweepSpec, run_sweep, write_records
from .metrics import max_feasible_rho, sdr_map
from .model import (_c2l, default_scenario, load_scenario, random_scenario,
                    restrict_cells, save_scenario)
from .solver import SolverOptions, alternating_maximization

__all__ = ["main", "build_parser"]

_BASELINES = ("non_interfering", "disjoint", "comm_first", "radar_first")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _cells_axis(text: str) -> tuple[int | None, ...]:
    out: list[int | None] = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok:
            out.append(None if tok.lower() == "all" else int(tok))
    return tuple(out)


def _load(args):
    if getattr(args, "scenario", None):
        return load_scenario(args.scenario)
    return default_scenario()


def _options(args) -> SolverOptions:
    opts = SolverOptions()
    if getattr(args, "method", None):
        opts.codebook_method = args.method
    if getattr(args, "tol_outer", None) is not None:
        opts.outer_rel_tol = args.tol_outer
    if getattr(args, "tol_inner", None) is not None:
        opts.inner_rel_tol = args.tol_inner
    if getattr(args, "max_iters", None) is not None:
        opts.outer_max_iters = args.max_iters
    if getattr(args, "max_inner", None) is not None:
        opts.inner_max_iters = args.max_inner
    return opts


def _cmd_make_scenario(args) -> int:
    s = default_scenario(args.rho_db)
    if args.cells is not None:
        s = restrict_cells(s, s.radar.cells[: args.cells])
    if args.delta is not None or args.sigma2 is not None:
        s = random_scenario(s, args.delta if args.delta is not None else 0.5,
                            args.sigma2 if args.sigma2 is not None else 1.2e-13,
                            args.seed)
    save_scenario(s, args.out)
    print(f"wrote scenario with {len(s.radar.cells)} protected cells to {args.out}")
    return 0


def _cmd_feasibility(args) -> int:
    s = _load(args)
    bounds = max_feasible_rho(s)
    worst_cell = min(bounds, key=bounds.get)
    worst = bounds[worst_cell]
    print(f"cells={len(bounds)}")
    print(f"worst_cell={worst_cell[0]},{worst_cell[1]}")
    print(f"max_feasible_rho_db={worst:.6f}")
    margin = worst - max(10.0 * math.log10(r) for r in s.radar.rho.values())
    print(f"margin_db={margin:.6f}")
    if args.out:
        payload = {f"{n},{j}": bounds[(n, j)] for (n, j) in sorted(bounds)}
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0 if margin >= 0 else 1


def _cmd_solve(args) -> int:
    s = _load(args)
    dv, trace = alternating_maximization(s, _options(args))
    sdrs = sdr_map(dv.C, dv.P_r, dv.filters, s)
    print(f"method={trace.method}")
    print(f"mi_bits={trace.mi_bits[-1]:.6f}")
    print(f"P_r={dv.P_r:.6f}")
    print(f"min_sdr_db={10.0 * math.log10(min(sdrs.values())):.6f}")
    print(f"outer_iters={trace.outer_iters}")
    print(f"converged={trace.converged}")
    if args.out:
        payload = {
            "method": trace.method,
            "mi_bits": trace.mi_bits[-1],
            "P_r": dv.P_r,
            "converged": trace.converged,
            "trace": trace.rows(),
            "C": _c2l(dv.C),
            "filters": {f"{n},{j}": _c2l(w) for (n, j), w in sorted(dv.filters.items())},
        }
        Path(args.out).write_text(json.dumps(payload) + "\n")
    return 0


def _cmd_baseline(args) -> int:
    s = _load(args)
    res = getattr(_baselines, args.kind)(s, _options(args))
    print(f"baseline={res.name}")
    print(f"mi_bits={res.mi_bits:.6f}")
    print(f"P_r={res.variables.P_r:.6f}")
    print(f"min_sdr_db={res.min_sdr_db:.6f}")
    for key, val in sorted(res.info.items()):
        print(f"{key}={val}")
    if args.out:
        payload = {"name": res.name, "mi_bits": res.mi_bits,
                   "P_r": res.variables.P_r, "min_sdr_db": res.min_sdr_db,
                   "info": res.info}
        Path(args.out).write_text(json.dumps(payload, sort_keys=True) + "\n")
    return 0


def _cmd_trace(args) -> int:
    s = _load(args)
    _dv, trace = alternating_maximization(s, _options(args))
    rows = trace.rows()
    if args.out:
        import csv as _csv

        with open(args.out, "w", newline="") as fh:
            writer = _csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    for row in rows:
        print(f"iter={row['iteration']} mi_bits={row['mi_bits']:.6f} "
              f"P_r={row['P_r']:.6f} inner={row['inner_iters']}")
    print(f"converged={trace.converged}")
    return 0


def _cmd_sweep(args) -> int:
    template = _load(args)
    kwargs = {}
    if args.spec:
        blob = json.loads(Path(args.spec).read_text())
        if "template" in blob and blob["template"]:
            template = load_scenario(blob["template"])
        for key in ("methods", "rho_db", "delta", "sigma2", "trials"):
            if key in blob:
                kwargs[key] = tuple(blob[key]) if key != "trials" else int(blob[key])
        if "cells" in blob:
            kwargs["n_cells"] = tuple(blob["cells"])
        if "seed" in blob:
            kwargs["base_seed"] = int(blob["seed"])
        if "options" in blob:
            kwargs["options"] = SolverOptions(**blob["options"])
    if args.methods:
        kwargs["methods"] = tuple(tok.strip() for tok in args.methods.split(","))
    if args.rho_db is not None:
        kwargs["rho_db"] = _floats(args.rho_db)
    if args.delta is not None:
        kwargs["delta"] = _floats(args.delta)
    if args.sigma2 is not None:
        kwargs["sigma2"] = _floats(args.sigma2)
    if args.cells is not None:
        kwargs["n_cells"] = _cells_axis(args.cells)
    if args.trials is not None:
        kwargs["trials"] = args.trials
    if args.seed is not None:
        kwargs["base_seed"] = args.seed
    if "options" not in kwargs:
        kwargs["options"] = _options(args)
    spec = SweepSpec(template=template, **kwargs)

    bad = [m for m in spec.methods
           if m not in _BASELINES and m not in ("gradient", "dual")]
    if bad:
        raise ScenarioError(f"unknown methods {bad}")
    records = run_sweep(spec, workers=args.workers)
    write_records(records, args.out, fmt=args.format, spec=spec)
    by_status: dict[str, int] = {}
    for rec in records:
        by_status[rec.status] = by_status.get(rec.status, 0) + 1
    print(f"records={len(records)}")
    for st in sorted(by_status):
        print(f"status[{st}]={by_status[st]}")
    print(f"out={args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="radcom",
        description="Joint radar/communication transceiver co-design tools.")
    sub = p.add_subparsers(dest="command", required=True)

    mk = sub.add_parser("make-scenario", help="build a scenario JSON file")
    mk.add_argument("--rho-db", type=float, default=0.0,
                    help="uniform SDR threshold in dB (default 0)")
    mk.add_argument("--cells", type=int, default=None,
                    help="keep only the first COUNT protected cells")
    mk.add_argument("--delta", type=float, default=None,
                    help="interference density in [0,1]; triggers a random draw")
    mk.add_argument("--sigma2", type=float, default=None,
                    help="interference strength; triggers a random draw")
    mk.add_argument("--seed", type=int, default=0)
    mk.add_argument("--out", required=True)
    mk.set_defaults(func=_cmd_make_scenario)

    fe = sub.add_parser("feasibility", help="per-cell SDR threshold bounds")
    fe.add_argument("--scenario", default=None, help="scenario JSON (default: built-in)")
    fe.add_argument("--out", default=None, help="write per-cell bounds as JSON")
    fe.set_defaults(func=_cmd_feasibility)

    def _solver_flags(sp, with_method=True):
        sp.add_argument("--scenario", default=None)
        if with_method:
            sp.add_argument("--method", choices=("gradient", "dual"), default=None)
        sp.add_argument("--tol-outer", type=float, default=None)
        sp.add_argument("--tol-inner", type=float, default=None)
        sp.add_argument("--max-iters", type=int, default=None)
        sp.add_argument("--max-inner", type=int, default=None)

    so = sub.add_parser("solve", help="run the joint design")
    _solver_flags(so)
    so.add_argument("--out", default=None, help="write design + trace as JSON")
    so.set_defaults(func=_cmd_solve)

    ba = sub.add_parser("baseline", help="run a reference design")
    ba.add_argument("--kind", choices=_BASELINES, required=True)
    _solver_flags(ba)
    ba.add_argument("--out", default=None)
    ba.set_defaults(func=_cmd_baseline)

    tr = sub.add_parser("trace", help="per-iteration convergence rows")
    _solver_flags(tr)
    tr.add_argument("--out", default=None, help="write rows as CSV")
    tr.set_defaults(func=_cmd_trace)

    sw = sub.add_parser("sweep", help="run a Monte-Carlo grid")
    sw.add_argument("--scenario", default=None, help="template scenario JSON")
    sw.add_argument("--spec", default=None, help="sweep grid as a JSON file")
    sw.add_argument("--methods", default=None, help="comma list of methods")
    sw.add_argument("--rho-db", default=None, help="comma list of thresholds (dB)")
    sw.add_argument("--delta", default=None, help="comma list of densities")
    sw.add_argument("--sigma2", default=None, help="comma list of strengths")
    sw.add_argument("--cells", default=None,
                    help="comma list of cell counts ('all' keeps every cell)")
    sw.add_argument("--trials", type=int, default=None)
    sw.add_argument("--seed", type=int, default=None)
    sw.add_argument("--workers", type=int, default=None)
    sw.add_argument("--method", choices=("gradient", "dual"), default=None,
                    help="codebook sub-solver for the joint methods")
    sw.add_argument("--tol-outer", type=float, default=None)
    sw.add_argument("--tol-inner", type=float, default=None)
    sw.add_argument("--max-iters", type=int, default=None)
    sw.add_argument("--max-inner", type=int, default=None)
    sw.add_argument("--out", required=True)
    sw.add_argument("--format", choices=("csv", "jsonl"), default=None)
    sw.set_defaults(func=_cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:  # covers PowerBudgetError too
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    except (ScenarioError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DefinitenessError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
