"""Command line entry point: ``biotuq {grid,run,validate,sense,convergence}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .campaign import (CampaignConfig, FieldEvaluator, convergence_sweep, export_artifacts,
                       run_campaign, validate)
from .quadrature import smolyak_grid

# node counts reported for the reference campaigns (N = 4)
REPORTED_COUNTS = {3: 209, 5: 2561}


def _alt_count(N: int, l: int) -> int:
    """Node count for nested growth 2^(i+1) - 1 with levels from 0."""
    from itertools import product
    new = [1] + [2 ** i for i in range(1, l + 1)]   # points added at each level
    return sum(int(np.prod([new[i] for i in idx]))
               for idx in product(range(l + 1), repeat=N) if sum(idx) <= l)


def cmd_grid(args) -> int:
    N = args.dimension
    print(f"sparse grid node counts, N = {N}, nested Clenshaw-Curtis (1, 3, 5, 9, 17, ... points)")
    print(f"{'level':>5} {'N_q':>8} {'modes':>8} {'reported':>9} {'2^(i+1)-1 growth':>17}")
    for l in range(args.min_level, args.max_level + 1):
        g = smolyak_grid(N, l)
        rep = REPORTED_COUNTS.get(l, "") if N == 4 else ""
        print(f"{l:>5} {g.n_nodes:>8} {len(g.indices):>8} {rep!s:>9} {_alt_count(N, l):>17}")
    if N == 4:
        print("note: the reported counts 209 (l=3) and 2561 (l=5) are not produced by the\n"
              "      Clenshaw-Curtis growth n(i) = 2^i + 1 used here. They are matched exactly\n"
              "      by a nested rule that adds 2^i points per level (1, 3, 7, 15, ... points),\n"
              "      shown in the last column. The level index and total-degree truncation are\n"
              "      otherwise the same; only the 1D growth convention differs.")
    if args.nodes is not None:
        g = smolyak_grid(N, args.nodes)
        if args.out:
            g.write_csv(args.out)
            print(f"wrote {g.n_nodes} nodes to {args.out}")
        else:
            for q, x in enumerate(g.nodes):
                print(q, " ".join(f"{v:+.17g}" for v in x))
    return 0


def _config(args) -> CampaignConfig:
    cfg = CampaignConfig.from_file(args.config)
    if args.level is not None:
        cfg.level = args.level
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.output is not None:
        cfg.output_dir = args.output
    return cfg


def cmd_run(args) -> int:
    cfg = _config(args)
    res = run_campaign(cfg)
    print(f"level {cfg.level}: {res.grid.n_nodes} nodes, {len(res.grid.indices)} modes, "
          f"payload {res.manifest['payload_size']} DOFs -> {cfg.output_dir}")
    for name in ("u1", "u2", "p"):
        m, v = res.statistics[f"mean_{name}"], res.statistics[f"var_{name}"]
        print(f"  {name:>2}: mean in [{m.min():.4g}, {m.max():.4g}], max variance {v.max():.4g}")
    return 0


def cmd_validate(args) -> int:
    cfg = _config(args)
    res = run_campaign(cfg, write=False)
    out = validate(res, cfg)
    export_artifacts(res, cfg.output_dir, cfg.deformation_scale)
    print(f"level {cfg.level}, N* = {out['n_points']} LHS points (seed {cfg.seed}), "
          f"{len(out['excluded'])} excluded")
    for k, v in out["norms"].items():
        print(f"  ||MSE({k})||_L2 = {v:.6e}")
    return 0


def cmd_sense(args) -> int:
    cfg = _config(args)
    if args.field:
        cfg.sensitivity_output = args.field
    res = run_campaign(cfg)
    s = res.sensitivity
    names = ("mu", "lambda", "alpha", "kappa")
    print(f"partial variances of {cfg.sensitivity_output} (domain max), level {cfg.level}")
    for i in range(len(s["first"])):
        label = names[i] if i < len(names) else f"xi{i + 1}"
        print(f"  {label:>7}: first {s['first'][i].max():.4e}  total {s['total'][i].max():.4e}")
    print(f"  sum first {s['sum_first'].max():.4e}  variance {s['variance'].max():.4e}  "
          f"sum total {s['sum_total'].max():.4e}")
    return 0


def cmd_convergence(args) -> int:
    cfg = _config(args)
    levels = args.levels or list(cfg.convergence_levels)
    model = cfg.uncertainty_model()
    ev = FieldEvaluator(cfg.template(), model, cfg.all_times)
    rows = convergence_sweep(levels, ev, model.dimension, cfg.validation_samples, cfg.seed,
                             cfg.workers, ev.layout(), ev.template)
    res = run_campaign(cfg, write=False) if args.with_fields else None
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    keys = list(rows[0])
    lines = [",".join(keys)] + [",".join(repr(r[k]) for k in keys) for r in rows]
    (out / "convergence.csv").write_text("\n".join(lines) + "\n")
    if res is not None:
        res.convergence = rows
        export_artifacts(res, out, cfg.deformation_scale)
    print(json.dumps(rows, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="biotuq", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grid", help="print sparse grid node counts (and nodes)")
    g.add_argument("--dimension", "-N", type=int, default=4)
    g.add_argument("--min-level", type=int, default=1)
    g.add_argument("--max-level", type=int, default=5)
    g.add_argument("--nodes", type=int, help="also list the nodes of this level")
    g.add_argument("--out", help="write the listed nodes to this CSV file")
    g.set_defaults(func=cmd_grid)

    for name, fn, text in (("run", cmd_run, "run a campaign and export artifacts"),
                           ("validate", cmd_validate, "LHS mean-squared-error validation"),
                           ("sense", cmd_sense, "Sobol partial-variance fields"),
                           ("convergence", cmd_convergence, "MSE norms over sparse-grid levels")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="campaign config (JSON)")
        p.add_argument("--level", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--output", help="output directory")
        if name == "sense":
            p.add_argument("--field", choices=("u1", "u2", "p"))
        if name == "convergence":
            p.add_argument("--levels", type=int, nargs="+")
            p.add_argument("--with-fields", action="store_true",
                           help="also export the campaign fields at the config level")
        p.set_defaults(func=fn)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"biotuq: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
