"""CLR-type counting integrals for operator-valued potentials.

Besides the bound integrals this module carries two discrete counting
oracles for the reductions behind them: the radial lift psi = u(r) / r of a
half-line problem into three dimensions, and the logarithmic substitution
t = ln x that removes the critical Hardy term -1/(4 x^2).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy import integrate, optimize, special

from .eigensolve import count_negative
from .geometry import RegionSpec, partition

__all__ = [
    "DivergenceError",
    "BoundConstants",
    "FiberedPotential",
    "negative_trace_power",
    "log_moment",
    "clr_halfline",
    "clr_log_weighted",
    "cartesian_region_bound",
    "theorem1_bound",
    "radial_lift_check",
    "log_substitution_check",
    "region_A_potential",
    "region_A_bound",
    "region_A_scaling_envelope",
    "write_bound_csv",
]

_QUAD = dict(epsabs=1e-10, epsrel=1e-8, limit=500)
_TAIL_FRACTION = 1e-14


class DivergenceError(ValueError):
    """The bound integral does not converge (potential decays too slowly)."""


@dataclass(frozen=True)
class BoundConstants:
    """C3 (three-dimensional CLR), C_q and q (two-dimensional bound).

    Defaults are placeholders of order one; supply literature values through
    the config file.  Nothing here is asserted as the true constant.
    """

    C3: float = 1.0
    C_q: float = 1.0
    q: float = 1.2

    def __post_init__(self):
        if not (self.C3 > 0 and self.C_q > 0):
            raise ValueError("C3 and C_q must be positive")
        if not self.q > 1:
            raise ValueError(f"q must exceed 1, got {self.q}")


@dataclass(frozen=True)
class FiberedPotential:
    """x -> sorted truncated fiber spectrum of V(x) on ``domain``.

    ``rank`` is the number of fiber levels kept; the caller guarantees
    that discarded levels are nonnegative.
    """

    levels: Callable[[float], np.ndarray]
    domain: tuple[float, float] = (0.0, math.inf)
    rank: int = 1
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __call__(self, x: float) -> np.ndarray:
        return np.sort(np.atleast_1d(np.asarray(self.levels(x), dtype=float)))

    @classmethod
    def zero(cls, domain=(0.0, math.inf)) -> "FiberedPotential":
        return cls(lambda x: np.zeros(1), domain, 1, "zero")

    @classmethod
    def scalar(cls, f: Callable[[float], float], domain=(0.0, math.inf), label: str = "scalar") -> "FiberedPotential":
        return cls(lambda x: np.array([f(x)]), domain, 1, label)

    @classmethod
    def power(cls, lam: float, alpha: float, domain=(1.0, math.inf)) -> "FiberedPotential":
        """Single level -lambda x^-alpha."""
        return cls(lambda x: np.array([-lam * x ** (-alpha)]), domain, 1, "power",
                   {"lambda": lam, "alpha": alpha})

    @classmethod
    def shifted_oscillator(cls, lam: float, alpha: float, domain=(1.0, math.inf)) -> "FiberedPotential":
        """Levels 2 k x - lambda x^-alpha, truncated at the first nonnegative level."""
        a = domain[0]
        if not a > 0:
            raise ValueError("shifted oscillator fiber needs x > 0")
        # level k is negative iff k < lambda / (2 x^(1 + alpha)); largest at the left end
        k_max = int(math.floor(lam / (2.0 * a ** (1.0 + alpha)))) + 1

        def levels(x):
            k = np.arange(k_max + 1)
            return 2.0 * k * x - lam * x ** (-alpha)

        return cls(levels, domain, k_max + 1, "shifted_oscillator", {"lambda": lam, "alpha": alpha})

    def scalar_values(self, x: np.ndarray) -> np.ndarray:
        """Lowest level on an array of points (scalar potentials)."""
        return np.array([self(xi)[0] for xi in np.atleast_1d(x)])


def negative_trace_power(levels, p: float) -> float:
    """sum |min(level, 0)|^p."""
    if not p > 0:
        raise ValueError("p must be positive")
    lv = np.asarray(levels, dtype=float)
    return float(np.sum(np.abs(np.minimum(lv, 0.0)) ** p))


def _power_log_tail(f: Callable[[float], float], X: float) -> float:
    """int_X^inf f for f ~ C x^s (ln x)^k, fitted from log-slopes at X and e X.

    d ln f / d ln x = s + k / ln x; the tail is then
    C Gamma(k + 1, -(s + 1) ln X) / (-(s + 1))^(k + 1).
    """
    fX = f(X)
    if fX <= 0:
        return 0.0
    eps = 1e-4

    def dlog(x):
        return math.log(f(x * (1 + eps)) / f(x)) / math.log1p(eps)

    L1, L2 = math.log(X), math.log(X) + 1.0
    d1, d2 = dlog(X), dlog(X * math.e)
    k = (d1 - d2) / (1.0 / L1 - 1.0 / L2) if L1 > 0 else 0.0
    s = d1 - k / L1 if L1 > 0 else d1
    if s >= -1.0:
        raise DivergenceError(f"integrand decays like x^{s:.3f}; integral diverges")
    if L1 <= 0 or abs(k) < 1e-3 or k <= -1.0:
        return X * fX / (-d1 - 1.0)
    b = -(s + 1.0)
    # C = f(X) / (X^s L1^k); tail = C Gamma(k+1, b L1) / b^(k+1), assembled in logs
    log_tail = (math.log(fX) - s * L1 - k * math.log(L1) + special.gammaln(k + 1.0)
                + math.log(special.gammaincc(k + 1.0, b * L1)) - (k + 1.0) * math.log(b))
    return math.exp(log_tail)


def _tail_integral(f: Callable[[float], float], a: float) -> tuple[float, float]:
    """int_a^inf f for a nonnegative integrand with power-law(-log) tail.

    The range is cut where f < 1e-14 * peak; the remainder comes from a local
    power-log model fitted at the cut.  Power slopes >= -1 mean divergence.
    """
    xs = a * np.geomspace(1.0, 1e12, 241) if a > 0 else np.concatenate([[0.0], np.geomspace(1e-8, 1e12, 401)])
    vals = np.array([f(x) for x in xs])
    peak = vals.max()
    if peak == 0:
        return 0.0, 0.0
    below = np.nonzero((vals < _TAIL_FRACTION * peak) & (xs > xs[np.argmax(vals)]))[0]
    # slow decay may not reach the cut inside the scan; the tail model then starts at its end
    X = xs[below[0]] if len(below) else xs[-1]
    # integrate panel by panel on the geometric scan
    panel_edges = xs[xs <= X]
    if panel_edges[0] != a:
        panel_edges = np.concatenate([[a], panel_edges])
    total, err = 0.0, 0.0
    for lo, hi in zip(panel_edges[:-1], panel_edges[1:]):
        v, e = integrate.quad(f, lo, hi, **_QUAD)
        total += v
        err += e
    total += _power_log_tail(f, X)
    return total, err


def log_moment(a: float) -> float:
    """int_1^inf x^(-1-a) (ln x)^2 dx by quadrature (closed form 2 / a^3)."""
    if not a > 0:
        raise DivergenceError("need a > 0")
    val, _ = _tail_integral(lambda x: x ** (-1.0 - a) * math.log(x) ** 2 if x > 1 else 0.0, 1.0)
    return val


def clr_halfline(pot: FiberedPotential, consts: BoundConstants = BoundConstants()) -> float:
    """4 pi C3 int tr |V(x)_-|^{3/2} x^2 dx over the potential's domain."""
    a, b = pot.domain

    def f(x):
        if x < a or x > b:
            return 0.0
        return negative_trace_power(pot(x), 1.5) * x * x

    if math.isinf(b):
        val, _ = _tail_integral(f, a)
    else:
        val, _ = integrate.quad(f, a, b, **_QUAD)
    return 4.0 * math.pi * consts.C3 * val


def clr_log_weighted(pot: FiberedPotential, consts: BoundConstants = BoundConstants()) -> float:
    """4 pi C3 int_1^inf tr |V(x)_-|^{3/2} x^2 (ln x)^2 dx."""
    a, b = pot.domain
    if a < 1:
        raise ValueError("log-weighted bound needs a domain inside (1, inf)")

    def f(x):
        if x <= a or x > b:
            return 0.0
        return negative_trace_power(pot(x), 1.5) * x * x * math.log(x) ** 2

    if math.isinf(b):
        val, _ = _tail_integral(f, a)
    else:
        val, _ = integrate.quad(f, a, b, **_QUAD)
    return 4.0 * math.pi * consts.C3 * val


def cartesian_region_bound(lam: float, alpha: float, consts: BoundConstants = BoundConstants(),
                           rtol: float = 1e-8) -> float:
    """8 pi C3 int_1^inf (1 + lambda/2) (lambda x^-alpha)^{3/2} x^2 (ln x)^2 dx.

    Evaluated in closed form (the integral is 2 / a^3 with a = 3(alpha-2)/2)
    and by quadrature; the two must agree to ``rtol``.
    """
    if alpha <= 2:
        raise DivergenceError(f"bound is finite only for alpha > 2, got {alpha}")
    if lam == 0:
        return 0.0
    a = 1.5 * (alpha - 2.0)
    pref = 8.0 * math.pi * consts.C3 * (1.0 + 0.5 * lam) * lam**1.5
    closed = pref * 2.0 / a**3
    quad = pref * log_moment(a)
    if abs(quad - closed) > rtol * abs(closed):
        raise ArithmeticError(f"quadrature {quad!r} disagrees with closed form {closed!r}")
    return closed


def theorem1_bound(lam: float, alpha: float, consts: BoundConstants = BoundConstants(),
                   C_alpha: float = 0.0, eps_alpha: float | None = None) -> float:
    """C(alpha) + 2^12 pi C3 / (27 (alpha-2)^3) lambda^(3/2 - eps(alpha)).

    ``eps_alpha`` must lie in (0, (alpha-2)/2); default is the midpoint.
    """
    if alpha <= 2:
        raise DivergenceError("bound requires alpha > 2")
    top = 0.5 * (alpha - 2.0)
    if eps_alpha is None:
        eps_alpha = 0.5 * top
    if not 0 < eps_alpha < top:
        raise ValueError(f"eps(alpha) must lie in (0, {top}), got {eps_alpha}")
    return C_alpha + 2**12 * math.pi * consts.C3 / (27.0 * (alpha - 2.0) ** 3) * lam ** (1.5 - eps_alpha)


# -- reduction oracles ---------------------------------------------------------

def _tridiag(main: np.ndarray, off: np.ndarray) -> sp.csc_matrix:
    return sp.diags([off, main, off], [-1, 0, 1], format="csc")


def _halfline_count(V: Callable[[np.ndarray], np.ndarray], R: float, n: int) -> int:
    """-u'' + V u on (0, R), u(0) = u(R) = 0, n interior nodes."""
    h = R / (n + 1)
    r = h * np.arange(1, n + 1)
    return count_negative(_tridiag(2.0 / h**2 + V(r), np.full(n - 1, -1.0 / h**2))).n_negative


def _radial3d_count(V: Callable[[np.ndarray], np.ndarray], R: float, n: int) -> int:
    """Radial sector of -Lap + V(|x|) in 3-D by finite volumes in psi.

    Energy sum_i r_{i+1/2}^2 (psi_{i+1} - psi_i)^2 / h + sum_i r_i^2 h V_i psi_i^2,
    psi(R) = 0, natural condition at r = 0.  The mass matrix is positive
    diagonal, so the negative count of the stiffness-plus-potential matrix
    equals that of the generalized problem.
    """
    h = R / (n + 1)
    nodes = h * np.arange(0, n + 1)           # r_0 = 0 ... r_n, with psi(r_{n+1} = R) = 0
    faces = nodes + 0.5 * h
    stiff_w = faces**2 / h
    # control-volume measure of node i: int r^2 dr over its dual cell
    lo = np.maximum(nodes - 0.5 * h, 0.0)
    hi = nodes + 0.5 * h
    mass = (hi**3 - lo**3) / 3.0
    main = np.zeros(n + 1)
    main[:-1] += stiff_w[:-1]
    main[1:] += stiff_w[:-1]
    main[-1] += stiff_w[-1]
    off = -stiff_w[:-1]
    Vn = V(np.maximum(nodes, 0.5 * h * 1e-3))
    return count_negative(_tridiag(main + mass * Vn, off)).n_negative


def radial_lift_check(pot, n: int = 800, R: float | None = None) -> tuple[int, int]:
    """(count of -u'' + V on the half-line, count of the 3-D radial operator)."""
    V = _vectorize(pot)
    if R is None:
        R = _finite_end(pot, 10.0)
    return _halfline_count(V, R, n), _radial3d_count(V, R, n)


def _log_original_count(V, X: float, n: int) -> int:
    """-u'' - u / (4 x^2) + V u on (1, X), Dirichlet."""
    h = (X - 1.0) / (n + 1)
    x = 1.0 + h * np.arange(1, n + 1)
    return count_negative(_tridiag(2.0 / h**2 - 0.25 / x**2 + V(x), np.full(n - 1, -1.0 / h**2))).n_negative


def _log_transformed_count(V, X: float, n: int) -> int:
    """-w'' + e^{2t} V(e^t) w on (0, ln X), Dirichlet."""
    T = math.log(X)
    h = T / (n + 1)
    t = h * np.arange(1, n + 1)
    return count_negative(_tridiag(2.0 / h**2 + np.exp(2 * t) * V(np.exp(t)), np.full(n - 1, -1.0 / h**2))).n_negative


def log_substitution_check(pot, n: int = 2000, X: float | None = None) -> tuple[int, int]:
    """(count of the critical Hardy operator + V on (1, X), count after t = ln x)."""
    V = _vectorize(pot)
    if X is None:
        X = _finite_end(pot, 100.0)
    return _log_original_count(V, X, n), _log_transformed_count(V, X, n)


def _vectorize(pot) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(pot, FiberedPotential):
        return lambda x: pot.scalar_values(x)
    return lambda x: np.asarray(pot(np.asarray(x, dtype=float)), dtype=float) * np.ones_like(x, dtype=float)


def _finite_end(pot, default: float) -> float:
    if isinstance(pot, FiberedPotential) and math.isfinite(pot.domain[1]):
        return pot.domain[1]
    return default


# -- two-dimensional bound on the central region -------------------------------

def region_A_potential(lam: float, alpha: float, spec: RegionSpec, localization: bool = True):
    """V^A(x, y) = x^2 y^2 - |x| - lambda rho - V_chi (vectorized)."""
    P = partition(spec)

    def V(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r2 = x * x + y * y
        val = x * x * y * y - np.sqrt(r2) - lam * (1.0 + r2) ** (-0.5 * alpha)
        if localization:
            val = val - P.V_chi(x, y)
        return val

    return V


_GL16 = np.polynomial.legendre.leggauss(16)


def _radial_rule(rend: float) -> tuple[np.ndarray, np.ndarray]:
    """Composite 16-point Gauss-Legendre nodes on (0, rend).

    Geometric panels toward r = 0 (integrable r^(2q-1) log singularity), a
    break at r = 1 where |ln r| has a kink, uniform panels beyond.
    """
    a = min(1.0, rend)
    edges = [a * np.geomspace(1e-8, 1.0, 25)]
    if rend > 1.0:
        edges.append(np.linspace(1.0, rend, max(2, int(math.ceil(8 * (rend - 1.0)))) + 1)[1:])
    e = np.concatenate([[0.0], np.concatenate(edges)])
    lo, hi = e[:-1], e[1:]
    x, w = _GL16
    nodes = 0.5 * (hi - lo)[:, None] * (x + 1.0) + lo[:, None]
    weights = 0.5 * (hi - lo)[:, None] * w
    return nodes.ravel(), weights.ravel()


def region_A_bound(lam: float, alpha: float, q: float, spec: RegionSpec,
                   consts: BoundConstants | None = None, localization: bool = True,
                   full_output: bool = False):
    """2 + 2 C_q int_{kappa A} |V^A_-|^q (1 + |ln r|)^(2q-1) r^(2(q-1)) dx dy.

    Polar quadrature over one octant (the integrand is invariant under the
    reflections x -> -x, y -> -y, x <-> y), restricted to kappa A, i.e.
    r^2 |cos 2 phi| / 2 < kappa^2 M, and to the set where V^A < 0.
    """
    if not q > 1:
        raise ValueError(f"q must exceed 1 (the q = 1 case is open), got {q}")
    consts = consts or BoundConstants(q=q)
    V = region_A_potential(lam, alpha, spec, localization)
    outer = spec.outer

    def r_limit(phi):
        c = abs(math.cos(2.0 * phi))
        return math.sqrt(2.0 * outer / c) if c > 0 else math.inf

    def neg_end(phi, rmax):
        # largest r below rmax with V^A < 0 along the ray
        s, c = math.sin(phi), math.cos(phi)
        f = lambda r: float(V(r * c, r * s))
        if not math.isfinite(rmax):
            # only the diagonal ray never leaves kappa A; V^A > 0 far out on it
            rmax = 1.0
            while f(rmax) < 0:
                rmax *= 2.0
        grid = np.linspace(0.0, rmax, 401)[1:]
        vals = V(grid * c, grid * s)
        neg = np.nonzero(vals < 0)[0]
        if len(neg) == 0:
            return 0.0
        i = neg[-1]
        if i == len(grid) - 1:
            return rmax
        return optimize.brentq(f, grid[i], grid[i + 1], xtol=1e-13)

    def radial(phi):
        rend = neg_end(phi, r_limit(phi))
        if rend == 0.0:
            return 0.0
        r, w = _radial_rule(rend)
        v = V(r * math.cos(phi), r * math.sin(phi))
        neg = np.maximum(-v, 0.0)
        g = neg**q * (1.0 + np.abs(np.log(r))) ** (2 * q - 1) * r ** (2 * q - 1)
        return float(np.dot(w, g))

    octant, err = integrate.quad(radial, 0.0, math.pi / 4, epsabs=1e-9, epsrel=1e-7, limit=400)
    integral = 8.0 * octant
    value = 2.0 + 2.0 * consts.C_q * integral
    if full_output:
        return value, {"integral": integral, "quad_error": 8.0 * err}
    return value


def region_A_scaling_envelope(lam: float, alpha: float, q: float) -> float:
    """lambda^(q(6+alpha)/(4+alpha)) (ln lambda)^(2q-1) + lambda^(4q/3 - 1/3) (ln lambda)^(2q-1)."""
    L = math.log(lam) ** (2 * q - 1)
    return lam ** (q * (6 + alpha) / (4 + alpha)) * L + lam ** (4 * q / 3 - 1.0 / 3) * L


def write_bound_csv(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    cols = ["lambda", "alpha", "q", "bound_value", "components"]
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow(row)
    return path
