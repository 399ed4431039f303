"""One-dimensional fiber operators.

The valley fiber ``H_u`` and its rescaled form ``Hhat(eps)``
(``H_u = u^{-1/2} Hhat(u^{-3/2})``, ``v = u^{1/4} t``), plus the shifted
harmonic oscillator fiber of the cartesian valley.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import integrate

from .eigensolve import count_negative
from .operators import SparseHermitianOperator

__all__ = [
    "FiberProblem",
    "GroundProjector",
    "fiber_potential",
    "default_half_width",
    "assemble_fiber",
    "ground_energy",
    "excitation_gap",
    "discretization_tolerance",
    "phi0",
    "ground_projector",
    "phi0_expectation",
    "projector_bound_check",
    "largest_admissible_c",
    "valley_potential",
    "valley_operator",
    "valley_threshold",
    "valley_fiber_counts",
    "shifted_oscillator_levels",
    "shifted_oscillator_operator",
    "fiber_sweep",
    "write_fiber_csv",
]

SQRT2 = math.sqrt(2.0)
DEFAULT_SPACING = 0.005


def fiber_potential(epsilon: float, t):
    """t^2 / (2 sqrt(1 + eps t^2)) - 1 / (sqrt 2 (1 + eps t^2)^(1/4))."""
    t = np.asarray(t, dtype=float)
    g = 1.0 + epsilon * t * t
    return t * t / (2.0 * np.sqrt(g)) - 1.0 / (SQRT2 * g**0.25)


def default_half_width(epsilon: float) -> float:
    if epsilon <= 0:
        return 12.0
    return max(12.0, 6.0 * epsilon**-0.25)


@dataclass(frozen=True)
class FiberProblem:
    """Hhat(eps) on the ``n`` interior nodes of [-T, T] (Dirichlet ends).

    With ``n`` odd every other node forms the 2h grid used for the
    Richardson error estimate.
    """

    epsilon: float
    half_width: float
    n: int

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.n < 3:
            raise ValueError("need at least 3 interior nodes")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / (self.n + 1)

    @cached_property
    def t(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.n + 2)[1:-1]

    @cached_property
    def potential(self) -> np.ndarray:
        return fiber_potential(self.epsilon, self.t)

    @cached_property
    def bands(self) -> tuple[np.ndarray, np.ndarray]:
        h2 = self.h**2
        return 2.0 / h2 + self.potential, np.full(self.n - 1, -1.0 / h2)

    @property
    def operator(self) -> SparseHermitianOperator:
        d, e = self.bands
        A = sp.diags([e, d, e], [-1, 0, 1], format="csr")
        return SparseHermitianOperator(A, "fiber", meta={"epsilon": self.epsilon, "cell": self.h,
                                                          "half_width": self.half_width})

    def coarse(self) -> "FiberProblem":
        if self.n % 2 == 0:
            raise ValueError("the 2h grid needs an odd node count")
        return FiberProblem(self.epsilon, self.half_width, (self.n - 1) // 2)

    def levels(self, k: int = 2) -> np.ndarray:
        d, e = self.bands
        return sla.eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, k - 1))


def assemble_fiber(epsilon: float, half_width: float | None = None, spacing: float = DEFAULT_SPACING) -> FiberProblem:
    T = default_half_width(epsilon) if half_width is None else half_width
    m = int(math.ceil(T / spacing))
    return FiberProblem(float(epsilon), float(T), 2 * m - 1)


def ground_energy(p: FiberProblem) -> float:
    return float(p.levels(1)[0])


def excitation_gap(p: FiberProblem) -> float:
    e0, e1 = p.levels(2)
    return float(e1 - e0)


def discretization_tolerance(p: FiberProblem, level: int = 0, limit: float = 1e-2) -> float:
    """max(1e-6, 3 * Richardson error) from the h / 2h pair.

    For a second-order scheme the error of the fine value is
    |E_h - E_2h| / 3, so the tolerance is |E_h - E_2h|.
    """
    fine = p.levels(level + 1)[level]
    coarse = p.coarse().levels(level + 1)[level]
    diff = abs(fine - coarse)
    if diff > limit:
        raise RuntimeError(f"refinement instability at eps={p.epsilon}: |E_h - E_2h| = {diff:.3e}")
    return max(1e-6, diff)


# -- ground projector of Hhat(0) ----------------------------------------------

def phi0(t):
    """(sqrt2 pi)^(-1/4) exp(-t^2 / (2 sqrt2)), the normalized ground state of Hhat(0)."""
    t = np.asarray(t, dtype=float)
    return (SQRT2 * math.pi) ** -0.25 * np.exp(-t * t / (2.0 * SQRT2))


@dataclass(frozen=True)
class GroundProjector:
    """P psi = phi0 <phi0, psi> with phi0 renormalized in the grid inner product."""

    values: np.ndarray
    h: float

    @property
    def unit(self) -> np.ndarray:
        """Euclidean unit vector u with P = u u^T as a matrix."""
        return self.values * math.sqrt(self.h)

    def norm(self) -> float:
        return float(math.sqrt(self.h * np.dot(self.values, self.values)))

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return self.values * (self.h * np.dot(self.values, psi))

    def matrix(self) -> np.ndarray:
        u = self.unit
        return np.outer(u, u)


def ground_projector(p: FiberProblem) -> GroundProjector:
    v = phi0(p.t)
    v = v / math.sqrt(p.h * np.dot(v, v))
    return GroundProjector(v, p.h)


def phi0_expectation(epsilon: float) -> float:
    """<phi0, Hhat(eps) phi0> from closed forms by adaptive quadrature."""
    def density(t):
        f = phi0(t)
        df = -t / SQRT2 * f
        return df * df + fiber_potential(epsilon, t) * f * f

    val, _ = integrate.quad(density, -np.inf, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def _tridiag_rank_one_count(d: np.ndarray, e: np.ndarray, u: np.ndarray, sigma: float) -> int:
    """Negative eigenvalues of tridiag(e, d, e) + sigma u u^T.

    Inertia of the tridiagonal part from its pivots, then the matrix
    determinant lemma: a rank-one term changes the count by at most one and
    flips the determinant sign exactly when 1 + sigma u^T T^-1 u < 0.
    """
    T = sp.diags([e, d, e], [-1, 0, 1], format="csc")
    base = count_negative(T).n_negative
    w = spla.spsolve(T, u)
    factor = 1.0 + sigma * float(np.dot(u, w))
    if factor < 0:
        return base - 1 if sigma > 0 else base + 1
    return base


def projector_bound_check(p: FiberProblem, a: float, c: float, tol: float | None = None) -> bool:
    """Whether Hhat(eps) - a P0 - c P0perp >= -tol on the grid.

    The operator equals (Hhat - c) + (c - a) P0; it is checked through the
    exact count of eigenvalues below ``-tol``.
    """
    if tol is None:
        tol = discretization_tolerance(p)
    d, e = p.bands
    proj = ground_projector(p)
    return _tridiag_rank_one_count(d - c + tol, e, proj.unit, c - a) == 0


def largest_admissible_c(p: FiberProblem, a: float, tol: float | None = None,
                         hi: float = 4.0, rtol: float = 1e-6) -> float:
    """Bisection for the largest c passing :func:`projector_bound_check`."""
    if tol is None:
        tol = discretization_tolerance(p)
    lo = 0.0
    if not projector_bound_check(p, a, lo, tol):
        return float("nan")
    while hi - lo > rtol * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        if projector_bound_check(p, a, mid, tol):
            lo = mid
        else:
            hi = mid
    return lo


# -- valley fiber H_u ---------------------------------------------------------

def valley_potential(u: float, v):
    """v^2 / (2 (u^2 + v^2)^(1/2)) - 1 / (sqrt 2 (u^2 + v^2)^(1/4))."""
    v = np.asarray(v, dtype=float)
    r2 = u * u + v * v
    return v * v / (2.0 * np.sqrt(r2)) - 1.0 / (SQRT2 * r2**0.25)


def valley_operator(u: float, half_width: float | None = None, spacing: float | None = None) -> SparseHermitianOperator:
    """H_u on a v-grid; the default grid is the image of the Hhat(u^-3/2) grid under v = u^{1/4} t."""
    if not u > 0:
        raise ValueError(f"u must be positive, got {u}")
    scale = u**0.25
    if half_width is None:
        half_width = scale * default_half_width(u**-1.5)
    if spacing is None:
        spacing = scale * DEFAULT_SPACING
    m = int(math.ceil(half_width / spacing))
    n = 2 * m - 1
    h = 2.0 * half_width / (n + 1)
    v = np.linspace(-half_width, half_width, n + 2)[1:-1]
    main = 2.0 / h**2 + valley_potential(u, v)
    off = np.full(n - 1, -1.0 / h**2)
    A = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    return SparseHermitianOperator(A, "valley_fiber", meta={"u": u, "cell": h, "half_width": half_width})


def valley_threshold(lam: float, c1: float, delta: float = 0.8) -> float:
    """M0 = (c1 + c2 + lambda)^(2/3) with c2 = (1 - delta)^-2."""
    return (c1 + (1.0 - delta) ** -2 + lam) ** (2.0 / 3.0)


def valley_fiber_counts(u: float, lam: float, alpha: float, delta: float = 0.8) -> int:
    """Negative eigenvalues of H_u - lambda u^(-1 - alpha/2) on the default grid.

    ``delta`` only enters through :func:`valley_threshold`; it is accepted
    here so sweeps can record the split used.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    op = valley_operator(u)
    return count_negative(op, lam * u ** (-1.0 - 0.5 * alpha)).n_negative


# -- cartesian (shifted oscillator) fiber -------------------------------------

def shifted_oscillator_levels(x: float, lam: float, alpha: float, k_max: int) -> np.ndarray:
    """Levels 2 k x - lambda x^-alpha, k = 0..k_max."""
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    k = np.arange(k_max + 1)
    return 2.0 * k * x - lam * x ** (-alpha)


def shifted_oscillator_operator(x: float, lam: float, alpha: float, half_width: float = 6.0,
                                spacing: float = 0.002) -> SparseHermitianOperator:
    """-d^2 + x^2 y^2 - x - lambda x^-alpha on a 1-D Dirichlet grid."""
    n = int(round(2.0 * half_width / spacing)) - 1
    h = 2.0 * half_width / (n + 1)
    y = np.linspace(-half_width, half_width, n + 2)[1:-1]
    main = 2.0 / h**2 + x * x * y * y - x - lam * x ** (-alpha)
    off = np.full(n - 1, -1.0 / h**2)
    A = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    return SparseHermitianOperator(A, "shifted_oscillator", meta={"x": x, "cell": h})


def fiber_sweep(epsilons, margin: float = 0.05, c: float = 0.5) -> list[dict]:
    rows = []
    for eps in epsilons:
        p = assemble_fiber(eps)
        tol = discretization_tolerance(p)
        e0, e1 = p.levels(2)
        a = -eps / 4.0 - margin * eps
        rows.append({"epsilon": float(eps), "ground": float(e0), "gap": float(e1 - e0),
                     "bound_ok": bool(projector_bound_check(p, a, c, tol)), "tol_disc": tol})
    return rows


def write_fiber_csv(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    cols = ["epsilon", "ground", "gap", "bound_ok"]
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow(row)
    return path
