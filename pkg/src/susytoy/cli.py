"""Command-line entry point: ``susytoy <subcommand> [options]``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import clr, eigensolve, experiments, fiber, operators, weyl
from .config import load_config


def _floats(text: str) -> list[float]:
    """Comma list ``1,2,4`` or geometric range ``geom:a:b:n``."""
    if text.startswith("geom:"):
        _, a, b, n = text.split(":")
        return np.geomspace(float(a), float(b), int(n)).tolist()
    return [float(v) for v in text.split(",") if v]


def _box(args, cfg) -> operators.Box2D:
    g = cfg["grid"]
    return operators.Box2D.square(args.L if args.L is not None else g["half_width"],
                                  args.h if args.h is not None else g["spacing"])


def _grid_args(p):
    p.add_argument("--L", type=float, help="box half width (default from config)")
    p.add_argument("--h", type=float, help="grid spacing (default from config)")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--bosonic", action="store_true", help="scalar -Lap + x^2 y^2 instead of the spinor H")


def _operator(args, cfg):
    if getattr(args, "operator", None):
        return operators.load_operator(args.operator)
    box = _box(args, cfg)
    return operators.assemble_shifted(box, operators.WeightSpec(args.alpha, args.lam), not args.bosonic)


def cmd_assemble(args, cfg):
    box = _box(args, cfg)
    spec = operators.WeightSpec(args.alpha, args.lam)
    build = {
        "hamiltonian": lambda: operators.assemble_hamiltonian(box, not args.bosonic),
        "supercharge": lambda: operators.assemble_supercharge(box),
        "weight": lambda: operators.assemble_weight(box, spec, not args.bosonic),
        "shifted": lambda: operators.assemble_shifted(box, spec, not args.bosonic),
    }[args.kind]
    op = build()
    path, sidecar = operators.export_operator(op, args.output)
    print(f"wrote {path} and {sidecar} (dimension {op.dimension})")


def cmd_spectrum(args, cfg):
    op = _operator(args, cfg)
    if args.dense:
        res = eigensolve.dense_spectrum(op)
        res.eigenvalues = res.eigenvalues[: args.k]
        res.residual_norms = res.residual_norms[: args.k]
    else:
        res = eigensolve.lowest_eigenpairs(op, k=args.k, tol=args.tol, sigma=args.sigma)
    rec = res.to_record()
    print(json.dumps(rec))
    if args.out:
        eigensolve.append_jsonl(args.out, rec)


def cmd_count(args, cfg):
    op = _operator(args, cfg)
    res = eigensolve.count_negative_dense(op, args.shift) if args.dense else eigensolve.count_negative(op, args.shift)
    rec = res.to_record()
    print(json.dumps(rec))
    if args.out:
        eigensolve.append_jsonl(args.out, rec)


def cmd_weyl(args, cfg):
    rows = weyl.weyl_sweep(_floats(args.ts), _floats(args.alphas))
    weyl.write_weyl_csv(rows, args.output)
    print(f"wrote {len(rows)} rows to {args.output}")


def cmd_fiber(args, cfg):
    f = cfg["fiber"]
    rows = fiber.fiber_sweep(_floats(args.epsilons), f["margin"], f["c"])
    fiber.write_fiber_csv(rows, args.output)
    print(f"wrote {len(rows)} rows to {args.output}")


def cmd_clr(args, cfg):
    consts = cfg.constants
    rows = []
    for lam in _floats(args.lambdas):
        for alpha in _floats(args.alphas):
            comp = {}
            if alpha > 2:
                comp["cartesian"] = clr.cartesian_region_bound(lam, alpha, consts)
                comp["theorem1"] = clr.theorem1_bound(lam, alpha, consts, cfg.C_alpha)
            if args.region_a:
                comp["region_A"] = clr.region_A_bound(lam, alpha, consts.q, cfg.region(lam), consts)
            total = sum(comp.values()) if comp else float("nan")
            rows.append({"lambda": lam, "alpha": alpha, "q": consts.q, "bound_value": total,
                         "components": json.dumps(comp, sort_keys=True)})
    clr.write_bound_csv(rows, args.output)
    print(f"wrote {len(rows)} rows to {args.output}")


def cmd_sweep(args, cfg):
    plan = experiments.SweepPlan.from_dict(json.loads(Path(args.plan).read_text()))
    workers = args.workers if args.workers is not None else int(cfg["workers"])
    out = args.output or (cfg.output_dir / plan.output)
    s = experiments.run_plan(plan, cfg, workers, out)
    print(f"{s.path}: {s.executed} executed, {s.skipped} skipped, {s.failed} failed")
    return 1 if s.failed else 0


def _points_from(path: Path, x_key: str, y_key: str) -> list[tuple[float, float]]:
    if path.suffix == ".csv":
        with path.open() as fh:
            return [(float(r[x_key]), float(r[y_key])) for r in csv.DictReader(fh)]
    pts = []
    for r in eigensolve.read_jsonl(path):
        if r.get("status") == "ok" and "n_negative" in r.get("result", {}):
            pts.append((float(r["params"][x_key]), float(r["result"]["n_negative"])))
    return pts


def cmd_fit(args, cfg):
    pts = _points_from(Path(args.input), args.x, args.y)
    res = experiments.fit_growth(pts, args.model)
    print(json.dumps(res.to_record()))


def cmd_report(args, cfg):
    text = experiments.report(eigensolve.read_jsonl(args.input), cfg)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="susytoy", description="Spectral toolkit for the supersymmetric x^2 y^2 model.")
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assemble", help="assemble and export an operator")
    _grid_args(p)
    p.add_argument("--kind", choices=["hamiltonian", "supercharge", "weight", "shifted"], default="hamiltonian")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("spectrum", help="lowest eigenvalues")
    _grid_args(p)
    p.add_argument("--operator", help="load an exported operator instead of assembling")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--sigma", type=float)
    p.add_argument("--dense", action="store_true")
    p.add_argument("--out", help="append the record to this JSON-lines file")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("count", help="number of eigenvalues below a shift")
    _grid_args(p)
    p.add_argument("--operator")
    p.add_argument("--shift", type=float, default=0.0)
    p.add_argument("--dense", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("weyl", help="Weyl-state quotient sweep to CSV")
    p.add_argument("--ts", default="4,8,16,32,64")
    p.add_argument("--alphas", default="0,1,1.5,3")
    p.add_argument("-o", "--output", default="weyl.csv")
    p.set_defaults(func=cmd_weyl)

    p = sub.add_parser("fiber", help="fiber operator sweep to CSV")
    p.add_argument("--epsilons", default="geom:0.0078125:1:8")
    p.add_argument("-o", "--output", default="fiber.csv")
    p.set_defaults(func=cmd_fiber)

    p = sub.add_parser("clr", help="bound table to CSV")
    p.add_argument("--lambdas", default="geom:2:64:6")
    p.add_argument("--alphas", default="3,4")
    p.add_argument("--region-a", action="store_true", help="include the central-region 2-D bound")
    p.add_argument("-o", "--output", default="bounds.csv")
    p.set_defaults(func=cmd_clr)

    p = sub.add_parser("sweep", help="run a JSON sweep plan")
    p.add_argument("plan")
    p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="fit N ~ x^p from a results or CSV file")
    p.add_argument("input")
    p.add_argument("--model", choices=["power", "power_log"], default="power")
    p.add_argument("--x", default="lambda")
    p.add_argument("--y", default="N")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="Markdown summary of a results file")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    cfg = load_config(args.config)
    try:
        return int(args.func(args, cfg) or 0)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
