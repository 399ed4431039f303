"""Counting experiments, growth fits and the sweep runner.

Results are JSON-lines records, one per cell.  A cell is identified by the
SHA-256 of its kind, parameters and discretization, so re-running a plan
only executes cells that have no successful record yet.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .clr import cartesian_region_bound, theorem1_bound
from .config import Config
from .eigensolve import append_jsonl, count_negative, lowest_eigenpairs, read_jsonl
from .fiber import fiber_sweep
from .operators import Box2D, WeightSpec, assemble_hamiltonian, assemble_shifted
from .weyl import weyl_sweep

log = logging.getLogger(__name__)

__all__ = [
    "KINDS",
    "SweepPlan",
    "FitResult",
    "RunSummary",
    "fit_growth",
    "count_cell",
    "transition_experiment",
    "growth_experiment",
    "bosonic_experiment",
    "ground_state_mass",
    "plan_cells",
    "cell_hash",
    "run_plan",
    "report",
]

KINDS = ("transition", "growth", "bosonic", "weyl", "fiber", "clr")
SATURATION_SLACK = 1
UNDERPOWERED_N = 30
MASS_THRESHOLD = 0.999


# -- fitting -------------------------------------------------------------------

@dataclass
class FitResult:
    model: str
    exponent: float
    log_power: float
    r_squared: float
    window: tuple[float, float]
    coefficient: float = 1.0
    points: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def to_record(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def fit_growth(points: Sequence[tuple[float, float]], model: str = "power") -> FitResult:
    """Least squares in log space.

    ``power``: N = c x^p.  ``power_log``: N = c x^p ln x.
    Points with N = 0 carry no log information and are dropped; at least
    five positive points must remain.
    """
    if model not in ("power", "power_log"):
        raise ValueError(f"unknown model {model!r}")
    pts = sorted((float(x), float(n)) for x, n in points)
    if len(pts) < 5:
        raise ValueError(f"need at least 5 points, got {len(pts)}")
    x = np.array([p[0] for p in pts])
    N = np.array([p[1] for p in pts])
    if N[-1] <= N[0]:
        raise ValueError("counts are not increasing overall")
    keep = N > 0
    if model == "power_log":
        keep &= x > 1
    x, N = x[keep], N[keep]
    if len(x) < 5:
        raise ValueError(f"only {len(x)} usable points (need N > 0{' and x > 1' if model == 'power_log' else ''})")
    lx = np.log(x)
    ly = np.log(N) - (np.log(lx) if model == "power_log" else 0.0)
    design = np.column_stack([np.ones_like(lx), lx])
    if np.linalg.matrix_rank(design) < 2:
        raise ValueError("degenerate design matrix (all x equal)")
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - design @ coef
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(model, float(coef[1]), 1.0 if model == "power_log" else 0.0,
                     min(max(r2, 0.0), 1.0), (float(x[0]), float(x[-1])), float(math.exp(coef[0])),
                     [[float(a), float(b)] for a, b in pts])


# -- counting cells ------------------------------------------------------------

def count_cell(alpha: float, lam: float, half_width: float, spacing: float,
               supersymmetric: bool = True) -> dict:
    """N(H - lambda rho) (or N(H_B - lambda) with alpha = 0) on a square box."""
    box = Box2D.square(half_width, spacing)
    t0 = time.perf_counter()
    op = assemble_shifted(box, WeightSpec(alpha, lam), supersymmetric)
    res = count_negative(op)
    rec = res.to_record()
    rec["timing"] = {"seconds": time.perf_counter() - t0}
    return rec


def _pmap(fn: Callable, args: list[tuple], workers: int) -> list:
    if workers <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*args)))


def _strictly_increasing(seq) -> bool:
    return all(b > a for a, b in zip(seq, seq[1:]))


def transition_experiment(alphas: Iterable[float], lambda_fixed: float, boxes: Sequence[float],
                          spacing: float = 0.1, workers: int = 1, slack: int = SATURATION_SLACK) -> list[dict]:
    """N_L for every alpha and box; 'saturating' when the two largest boxes agree within ``slack``."""
    boxes = [float(L) for L in boxes]
    if len(boxes) < 2 or not _strictly_increasing(boxes):
        raise ValueError("boxes must be at least two strictly increasing half widths")
    alphas = [float(a) for a in alphas]
    args = [(a, lambda_fixed, L, spacing) for a in alphas for L in boxes]
    results = _pmap(_safe_count, args, workers)
    rows = []
    for i, a in enumerate(alphas):
        cells = results[i * len(boxes):(i + 1) * len(boxes)]
        counts = [c["n_negative"] if c["status"] == "ok" else None for c in cells]
        row = {"alpha": a, "lambda": float(lambda_fixed), "boxes": boxes, "counts": counts,
               "errors": [c.get("error") for c in cells if c["status"] != "ok"]}
        if counts[-1] is None or counts[-2] is None:
            row["classification"] = "incomplete"
        else:
            row["classification"] = "saturating" if abs(counts[-1] - counts[-2]) <= slack else "growing"
        known = [n for n in counts if n is not None]
        row["strictly_increasing"] = _strictly_increasing(known)
        row["box_monotone"] = all(b >= a for a, b in zip(known, known[1:]))
        rows.append(row)
    return rows


def _safe_count(alpha, lam, L, h, supersymmetric=True) -> dict:
    try:
        rec = count_cell(alpha, lam, L, h, supersymmetric)
        rec["status"] = "ok"
        return rec
    except Exception as exc:  # per-cell failures are data, not aborts
        return {"status": "error", "error": f"{type(exc).__name__}: {exc}",
                "cell": {"alpha": alpha, "lambda": lam, "half_width": L, "spacing": h}}


def _check_geometric(lambdas: Sequence[float]) -> None:
    lam = np.asarray(lambdas, dtype=float)
    if len(lam) < 2:
        raise ValueError("need at least two lambda values")
    if np.any(lam <= 0) or not _strictly_increasing(list(lam)):
        raise ValueError("lambda grid must be positive and strictly increasing")
    ratios = lam[1:] / lam[:-1]
    if not np.allclose(ratios, ratios[0], rtol=1e-6):
        raise ValueError("lambda grid must be geometric")


def growth_experiment(alpha: float, lambdas: Sequence[float], box: float = 14.0, spacing: float = 0.1,
                      workers: int = 1, bound_tol: float = 0.05) -> FitResult:
    """Fitted p in N(H_lambda) ~ lambda^p; flags 'underpowered' when max N < 30."""
    if alpha <= 2:
        raise ValueError("growth experiment is defined for alpha > 2")
    _check_geometric(lambdas)
    if len(lambdas) < 5:
        raise ValueError("fit window too small: need at least 5 lambda values")
    counts = _pmap(count_cell, [(alpha, float(l), box, spacing) for l in lambdas], workers)
    pts = [(float(l), c["n_negative"]) for l, c in zip(lambdas, counts)]
    fit = fit_growth(pts, "power")
    if max(n for _, n in pts) < UNDERPOWERED_N:
        fit.flags.append("underpowered")
    if fit.exponent > 1.5 + bound_tol:
        fit.flags.append("exponent_above_3/2")
    return fit


def ground_state_mass(box: Box2D, fraction: float = 0.5, supersymmetric: bool = False) -> float:
    """Share of the lowest eigenvector's L2 mass inside |x|, |y| <= fraction * L."""
    H = assemble_hamiltonian(box, supersymmetric)
    res = lowest_eigenpairs(H, k=1, tol=1e-6)
    v = np.abs(res.eigenvectors[:, 0]) ** 2
    X, Y = box.mesh()
    if supersymmetric:
        X, Y = np.repeat(X, 2), np.repeat(Y, 2)
    lim = fraction * box.half_width_x
    inside = (np.abs(X) <= lim) & (np.abs(Y) <= lim)
    return float(v[inside].sum() / v.sum())


def bosonic_experiment(lambdas: Sequence[float], box: float = 14.0, spacing: float = 0.1,
                       workers: int = 1) -> tuple[FitResult, FitResult]:
    """N(H_B - lambda) fitted to lambda^p and to lambda^p ln lambda.

    The box is accepted when the bosonic ground state keeps 99.9% of its
    mass inside half the box; otherwise the upper half of the lambda window
    is dropped and the fits carry a 'window_shrunk' flag.
    """
    lambdas = sorted(float(l) for l in lambdas)
    mass = ground_state_mass(Box2D.square(box, spacing))
    flags = [f"ground_state_mass={mass:.6f}"]
    if mass < MASS_THRESHOLD:
        lambdas = lambdas[: max(5, len(lambdas) // 2)]
        flags.append("window_shrunk")
    # alpha = 0 makes rho = 1, so H - lambda rho is H_B - lambda
    counts = _pmap(count_cell, [(0.0, l, box, spacing, False) for l in lambdas], workers)
    pts = [(l, c["n_negative"]) for l, c in zip(lambdas, counts)]
    fits = fit_growth(pts, "power"), fit_growth(pts, "power_log")
    for f in fits:
        f.flags.extend(flags)
    return fits


# -- plans and the runner ------------------------------------------------------

@dataclass(frozen=True)
class SweepPlan:
    kind: str
    alphas: tuple = ()
    lambdas: tuple = ()
    boxes: tuple = ()
    ts: tuple = ()
    epsilons: tuple = ()
    spacing: float = 0.1
    output: str = "results.jsonl"

    _NEEDS = {
        "transition": ("alphas", "lambdas", "boxes"),
        "growth": ("alphas", "lambdas", "boxes"),
        "bosonic": ("lambdas", "boxes"),
        "weyl": ("ts", "alphas"),
        "fiber": ("epsilons",),
        "clr": ("lambdas", "alphas"),
    }

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        for name in ("alphas", "lambdas", "boxes", "ts", "epsilons"):
            grid = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, grid)
            if grid and not _strictly_increasing(grid):
                raise ValueError(f"{name} must be strictly increasing")
        for name in self._NEEDS[self.kind]:
            if not getattr(self, name):
                raise ValueError(f"{self.kind} plan needs a nonempty {name} grid")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepPlan":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass
class RunSummary:
    path: Path
    executed: int
    skipped: int
    failed: int


def plan_cells(plan: SweepPlan, config: Config | None = None) -> list[dict]:
    """Cell identities: kind plus every parameter that determines the result."""
    config = config or Config()
    k = plan.kind
    if k in ("transition", "growth"):
        grid = itertools.product(plan.alphas, plan.lambdas, plan.boxes)
        return [{"kind": k, "alpha": a, "lambda": l, "half_width": L, "spacing": plan.spacing}
                for a, l, L in grid]
    if k == "bosonic":
        return [{"kind": k, "lambda": l, "half_width": L, "spacing": plan.spacing}
                for l, L in itertools.product(plan.lambdas, plan.boxes)]
    if k == "weyl":
        return [{"kind": k, "t": t, "alpha": a} for t, a in itertools.product(plan.ts, plan.alphas)]
    if k == "fiber":
        f = config["fiber"]
        return [{"kind": k, "epsilon": e, "margin": f["margin"], "c": f["c"]} for e in plan.epsilons]
    c = config["constants"]
    return [{"kind": k, "lambda": l, "alpha": a, "C3": c["C3"], "C_alpha": c["C_alpha"]}
            for l, a in itertools.product(plan.lambdas, plan.alphas)]


def cell_hash(cell: dict) -> str:
    return hashlib.sha256(json.dumps(cell, sort_keys=True).encode()).hexdigest()


def _run_cell(cell: dict) -> dict:
    """Execute one cell; never raises."""
    t0 = time.perf_counter()
    rec = {"cell": cell_hash(cell), "params": cell}
    try:
        k = cell["kind"]
        if k in ("transition", "growth", "bosonic"):
            res = count_cell(cell.get("alpha", 0.0), cell["lambda"], cell["half_width"], cell["spacing"],
                             supersymmetric=(k != "bosonic"))
            res.pop("timing")
            result = res
        elif k == "weyl":
            result = weyl_sweep([cell["t"]], [cell["alpha"]])[0]
        elif k == "fiber":
            result = fiber_sweep([cell["epsilon"]], cell["margin"], cell["c"])[0]
        else:
            from .clr import BoundConstants
            consts = BoundConstants(C3=cell["C3"])
            lam, a = cell["lambda"], cell["alpha"]
            if a > 2:
                result = {"cartesian": cartesian_region_bound(lam, a, consts),
                          "theorem1": theorem1_bound(lam, a, consts, cell["C_alpha"])}
            else:
                result = {"cartesian": None, "theorem1": None, "note": "bound diverges for alpha <= 2"}
        rec.update(status="ok", result=result)
    except Exception as exc:
        rec.update(status="error", error=f"{type(exc).__name__}: {exc}",
                   traceback=traceback.format_exc(limit=3))
    rec["timing"] = {"seconds": time.perf_counter() - t0}
    return rec


def run_plan(plan: SweepPlan, config: Config | None = None, workers: int = 1,
             output: str | Path | None = None) -> RunSummary:
    """Execute all cells not already recorded as successful.

    Workers compute; only this process writes, in cell order, so identical
    plans give identical files apart from the timing fields.
    """
    path = Path(output or plan.output)
    path.parent.mkdir(parents=True, exist_ok=True)
    done = {r["cell"] for r in read_jsonl(path) if r.get("status") == "ok"}
    cells = plan_cells(plan, config)
    todo = [c for c in cells if cell_hash(c) not in done]
    failed = 0

    def emit(rec):
        nonlocal failed
        failed += rec["status"] != "ok"
        append_jsonl(path, rec)

    if workers <= 1 or len(todo) <= 1:
        for c in todo:
            emit(_run_cell(c))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rec in pool.map(_run_cell, todo):
                emit(rec)
    log.info("run_plan %s: %d executed, %d skipped, %d failed", path, len(todo), len(cells) - len(todo), failed)
    return RunSummary(path, len(todo), len(cells) - len(todo), failed)


# -- report --------------------------------------------------------------------

def report(records: list[dict], config: Config | None = None) -> str:
    """Markdown summary: measured N against the Theorem-1 bound shape, plus fits."""
    config = config or Config()
    consts = config.constants
    lines: list[str] = []
    counts = [r for r in records if r.get("status") == "ok" and r["params"]["kind"] in ("transition", "growth")]
    if counts:
        lines += ["## Negative eigenvalue counts", "",
                  "| alpha | lambda | L | h | N | bound shape | N / bound |",
                  "|---:|---:|---:|---:|---:|---:|---:|"]
        counts.sort(key=lambda r: (r["params"]["alpha"], r["params"]["lambda"], r["params"]["half_width"]))
        for r in counts:
            p, n = r["params"], r["result"]["n_negative"]
            if p["alpha"] > 2:
                b = theorem1_bound(p["lambda"], p["alpha"], consts, config.C_alpha)
                bs, ratio = f"{b:.4g}", f"{n / b:.3g}"
            else:
                bs = ratio = "diverges"
            lines.append(f"| {p['alpha']:g} | {p['lambda']:g} | {p['half_width']:g} | {p['spacing']:g} "
                         f"| {n} | {bs} | {ratio} |")
        lines.append("")
        groups: dict = {}
        for r in counts:
            p = r["params"]
            groups.setdefault((p["alpha"], p["half_width"], p["spacing"]), []).append(
                (p["lambda"], r["result"]["n_negative"]))
        fit_lines = []
        for (a, L, h), pts in sorted(groups.items()):
            try:
                f = fit_growth(pts, "power")
            except ValueError:
                continue
            fit_lines.append(f"| {a:g} | {L:g} | {h:g} | {f.exponent:.3f} | {f.r_squared:.4f} "
                             f"| {max(n for _, n in pts)} |")
        if fit_lines:
            lines += ["## Growth fits (N ~ lambda^p)", "", "| alpha | L | h | p | r^2 | max N |",
                      "|---:|---:|---:|---:|---:|---:|", *fit_lines, ""]
    bos = [r for r in records if r.get("status") == "ok" and r["params"]["kind"] == "bosonic"]
    if bos:
        pts = sorted((r["params"]["lambda"], r["result"]["n_negative"]) for r in bos)
        lines += ["## Bosonic counts", "", "| lambda | N |", "|---:|---:|"]
        lines += [f"| {l:g} | {n} |" for l, n in pts]
        lines.append("")
        for model in ("power", "power_log"):
            try:
                f = fit_growth(pts, model)
                lines.append(f"- {model} fit: p = {f.exponent:.3f}, r^2 = {f.r_squared:.4f}")
            except ValueError as exc:
                lines.append(f"- {model} fit unavailable: {exc}")
        lines.append("")
    failures = [r for r in records if r.get("status") != "ok"]
    if failures:
        lines += ["## Failed cells", ""]
        lines += [f"- `{r['cell'][:12]}` {json.dumps(r['params'], sort_keys=True)}: {r.get('error')}" for r in failures]
        lines.append("")
    if not lines:
        return "No successful records.\n"
    return "\n".join(["# Run summary", "", *lines])
