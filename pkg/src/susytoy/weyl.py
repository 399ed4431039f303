"""Explicit Weyl states Psi_t = chi_t(x) phi_x(y) xi and their quotients.

Everything here is evaluated from closed forms by nested adaptive
quadrature; no grid is involved except in :func:`discrete_rayleigh`, which
samples a state onto an operator grid for cross-checking.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from scipy import integrate

from .operators import PAULI, Box2D, SparseHermitianOperator, WeightSpec, assemble_hamiltonian

__all__ = [
    "QuadratureError",
    "CutoffProfile",
    "WeylState",
    "oscillator_ground",
    "weyl_state",
    "quadratic_form",
    "reduced_form",
    "weighted_norm",
    "weighted_quotient",
    "state_norm",
    "discrete_rayleigh",
    "weyl_sweep",
    "write_weyl_csv",
]

# y-extent of the transverse Gaussian in units of x^{-1/2}: exp(-64) is negligible
_Y_WIDTHS = 8.0
_QUAD = dict(epsabs=0.0, epsrel=1e-11, limit=200)
_FORM_QUAD = dict(epsabs=1e-13, epsrel=1e-10, limit=200)


class QuadratureError(RuntimeError):
    def __init__(self, message: str, value: float, error: float):
        super().__init__(message)
        self.value = value
        self.error = error


def _bump(z: float) -> float:
    if abs(z) >= 1.0:
        return 0.0
    return math.exp(-1.0 / (1.0 - z * z))


@dataclass(frozen=True)
class CutoffProfile:
    """Smooth bump supported in [1, 2] with unit L2 norm.

    chi(s) = b(2s - 3) / sqrt(N) with b(z) = exp(-1/(1 - z^2)).
    """

    @cached_property
    def norm_squared(self) -> float:
        # int_1^2 b(2s-3)^2 ds = (1/2) int_{-1}^{1} b(z)^2 dz
        val, _ = integrate.quad(lambda z: _bump(z) ** 2, -1.0, 1.0, epsabs=1e-15, epsrel=1e-13)
        return 0.5 * val

    @cached_property
    def _scale(self) -> float:
        return 1.0 / math.sqrt(self.norm_squared)

    def value(self, s: float) -> float:
        return self._scale * _bump(2.0 * s - 3.0)

    def derivative(self, s: float) -> float:
        z = 2.0 * s - 3.0
        if abs(z) >= 1.0:
            return 0.0
        w = 1.0 - z * z
        g1 = -2.0 * z / w**2
        return 2.0 * self._scale * g1 * _bump(z)

    def second_derivative(self, s: float) -> float:
        z = 2.0 * s - 3.0
        if abs(z) >= 1.0:
            return 0.0
        w = 1.0 - z * z
        g1 = -2.0 * z / w**2
        g2 = -2.0 / w**2 - 8.0 * z * z / w**3
        return 4.0 * self._scale * (g2 + g1 * g1) * _bump(z)

    def l2_norm_squared(self) -> float:
        val, _ = integrate.quad(lambda s: self.value(s) ** 2, 1.0, 2.0, **_QUAD)
        return val


def oscillator_ground(x: float) -> Callable[[float], float]:
    """Normalized ground state of -d_y^2 + x^2 y^2 (energy ``x``)."""
    if not x > 0:
        raise ValueError(f"oscillator frequency must be positive, got {x}")
    amp = (x / math.pi) ** 0.25

    def phi(y):
        return amp * np.exp(-0.5 * x * np.square(y))

    return phi


@dataclass(frozen=True)
class WeylState:
    t: float
    profile: CutoffProfile
    xi: np.ndarray

    @property
    def support(self) -> tuple[float, float]:
        return self.t, 2.0 * self.t

    def chi(self, x: float) -> float:
        return self.profile.value(x / self.t) / math.sqrt(self.t)

    def dchi(self, x: float) -> float:
        return self.profile.derivative(x / self.t) / self.t**1.5

    def amplitude(self, x, y):
        """Scalar factor chi_t(x) phi_x(y), vectorized; zero off the support."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        xb, yb = np.broadcast_arrays(x, y)
        inside = (xb > self.t) & (xb < 2.0 * self.t)
        if np.any(inside):
            xs, ys = xb[inside], yb[inside]
            chi = np.array([self.chi(v) for v in xs])
            out[inside] = chi * (xs / math.pi) ** 0.25 * np.exp(-0.5 * xs * ys**2)
        return out

    def spinor(self, x, y) -> np.ndarray:
        return self.amplitude(x, y)[..., None] * self.xi

    @property
    def fermionic_expectations(self) -> tuple[float, float]:
        g1, g2, _ = PAULI.as_tuple()
        return (float(np.vdot(self.xi, g1 @ self.xi).real), float(np.vdot(self.xi, g2 @ self.xi).real))


def weyl_state(t: float, profile: CutoffProfile | None = None) -> WeylState:
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    xi = np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0)
    return WeylState(float(t), profile or CutoffProfile(), xi)


def _integrate_xy(state: WeylState, inner: Callable[[float, float], float],
                  opts: dict = _QUAD) -> tuple[float, float]:
    """int_t^{2t} dx int_{|y| < Y(x)} inner(x, y) dy with its error estimate."""
    errs: list[float] = []

    def over_y(x: float) -> float:
        ymax = _Y_WIDTHS / math.sqrt(x)
        # integrand is even in y
        val, err = integrate.quad(lambda y: inner(x, y), 0.0, ymax, **opts)
        errs.append(err)
        return 2.0 * val

    a, b = state.support
    val, err = integrate.quad(over_y, a, b, **opts)
    return val, err + 2.0 * (b - a) * max(errs, default=0.0)


def _check(val: float, err: float, what: str, rtol: float = 1e-6) -> float:
    if not np.isfinite(val) or err > rtol * max(abs(val), 1e-300):
        raise QuadratureError(f"{what}: quadrature error {err:.2e} too large for value {val:.6e}", val, err)
    return val


def quadratic_form(state: WeylState, full_output: bool = False):
    """<Psi_t, H Psi_t> by 2-D quadrature of the full energy density."""
    e1, e2 = state.fermionic_expectations
    profile, t = state.profile, state.t
    st = math.sqrt(t)

    def density(x: float, y: float) -> float:
        s = x / t
        chi = profile.value(s) / st
        dchi = profile.derivative(s) / (t * st)
        phi = (x / math.pi) ** 0.25 * math.exp(-0.5 * x * y * y)
        dxphi = phi * (0.25 / x - 0.5 * y * y)
        dyphi = -x * y * phi
        psi = chi * phi
        dx = dchi * phi + chi * dxphi
        dy = chi * dyphi
        return dx * dx + dy * dy + (x * x * y * y + x * e1 - y * e2) * psi * psi

    # the transverse energy cancels the fermionic term, so tolerances are absolute
    val, err = _integrate_xy(state, density, _FORM_QUAD)
    _check(val, err, "quadratic_form", rtol=1e-4)
    return (val, err) if full_output else val


def reduced_form(state: WeylState) -> float:
    """Independent 1-D reduction: int chi_t'^2 + chi_t^2 / (8 x^2) dx.

    Valid for gamma1 xi = -xi, where the transverse oscillator energy
    cancels the fermionic term exactly.
    """
    a, b = state.support
    val, _ = integrate.quad(lambda x: state.dchi(x) ** 2 + state.chi(x) ** 2 / (8.0 * x * x), a, b, **_QUAD)
    return val


def state_norm(state: WeylState, full_output: bool = False):
    val, err = _integrate_xy(state, lambda x, y: state.chi(x) ** 2 * math.sqrt(x / math.pi) * math.exp(-x * y * y))
    val *= float(np.vdot(state.xi, state.xi).real)
    _check(val, err, "state_norm")
    return (val, err) if full_output else val


def weighted_norm(state: WeylState, spec: WeightSpec, full_output: bool = False):
    """<Psi_t, rho Psi_t>."""
    half_alpha = 0.5 * spec.alpha

    def density(x: float, y: float) -> float:
        return state.chi(x) ** 2 * math.sqrt(x / math.pi) * math.exp(-x * y * y) * (1.0 + x * x + y * y) ** -half_alpha

    val, err = _integrate_xy(state, density)
    _check(val, err, "weighted_norm")
    return (val, err) if full_output else val


def weighted_quotient(state: WeylState, spec: WeightSpec, full_output: bool = False):
    q, qerr = quadratic_form(state, full_output=True)
    w, werr = weighted_norm(state, spec, full_output=True)
    val = q / w
    err = abs(val) * (qerr / abs(q) + werr / w)
    return (val, err) if full_output else val


def discrete_rayleigh(state: WeylState, box: Box2D, hamiltonian: SparseHermitianOperator | None = None) -> float:
    """Rayleigh quotient of Psi_t sampled onto ``box`` under the grid H."""
    H = hamiltonian if hamiltonian is not None else assemble_hamiltonian(box)
    X, Y = box.mesh()
    psi = state.spinor(X, Y).reshape(-1)
    return H.form(psi) / H.inner(psi, psi).real


def weyl_sweep(ts: Iterable[float], alphas: Iterable[float]) -> list[dict]:
    rows = []
    profile = CutoffProfile()
    for t in ts:
        state = weyl_state(t, profile)
        form, ferr = quadratic_form(state, full_output=True)
        for alpha in alphas:
            w, werr = weighted_norm(state, WeightSpec(alpha), full_output=True)
            rows.append({
                "t": float(t), "alpha": float(alpha), "form": form, "weighted_norm": w,
                "quotient": form / w, "quadrature_error": ferr + werr,
            })
    return rows


def write_weyl_csv(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    cols = ["t", "alpha", "form", "weighted_norm", "quotient", "quadrature_error"]
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: repr(row[c]) for c in cols})
    return path
