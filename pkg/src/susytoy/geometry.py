"""Parabolic coordinates, valley regions and the partition of unity.

(u, v) = ((x^2 - y^2)/2, xy), i.e. u + iv = (x + iy)^2 / 2.  The regions are
A = {|u| <= M} (closed) and the four valley regions B1..B4 outside it.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "RegionSpec",
    "PartitionOfUnity",
    "to_parabolic",
    "from_parabolic",
    "scale_factor",
    "classify",
    "REFLECT_X0",
    "REFLECT_DIAG",
    "REFLECT_ORIGIN",
    "partition",
    "valley_geometry",
    "export_regions",
]


@dataclass(frozen=True)
class RegionSpec:
    M: float
    kappa: float = math.sqrt(2.0)
    delta: float = 0.8

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError(f"M must be positive, got {self.M}")
        if not self.kappa > 1:
            raise ValueError(f"kappa must exceed 1, got {self.kappa}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def outer(self) -> float:
        """|u| beyond which chi_B = 1 (kappa^2 M)."""
        return self.kappa**2 * self.M

    @property
    def c2(self) -> float:
        """Dirichlet-splitting constant of the valley fiber, (1 - delta)^-2."""
        return (1.0 - self.delta) ** -2

    @classmethod
    def for_lambda(cls, lam: float, c1: float, kappa: float = math.sqrt(2.0), delta: float = 0.8) -> "RegionSpec":
        """M = (c1 + c2 + lambda)^(2/3)."""
        c2 = (1.0 - delta) ** -2
        return cls((c1 + c2 + lam) ** (2.0 / 3.0), kappa, delta)


def to_parabolic(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 0.5 * (x * x - y * y), x * y


def from_parabolic(u, v):
    """Right-half-plane preimage; the slit {v = 0, u <= 0} is rejected."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any((v == 0) & (u <= 0)):
        raise ValueError("point on the excluded slit v = 0, u <= 0")
    z = np.sqrt(2.0 * (u + 1j * v))
    return z.real, z.imag


def scale_factor(u, v):
    """h = 2^(-1/2) (u^2 + v^2)^(-1/4) = (x^2 + y^2)^(-1/2)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    r2 = u * u + v * v
    if np.any(r2 == 0):
        raise ValueError("the parabolic map is not conformal at the origin")
    return r2 ** -0.25 / math.sqrt(2.0)


# Region tag permutations under the symmetries of the potential.
REFLECT_X0 = {"A": "A", "B1": "B2", "B2": "B1", "B3": "B3", "B4": "B4"}      # (x, y) -> (-x, y)
REFLECT_DIAG = {"A": "A", "B1": "B3", "B3": "B1", "B2": "B4", "B4": "B2"}    # (x, y) -> (y, x)
REFLECT_ORIGIN = {"A": "A", "B1": "B2", "B2": "B1", "B3": "B4", "B4": "B3"}  # (x, y) -> (-x, -y)


def classify(x: float, y: float, spec: RegionSpec) -> str:
    """A: |u| <= M.  B1: u > M, x > 0.  B2: u > M, x < 0.  B3: u < -M, y > 0.  B4: u < -M, y < 0."""
    u = 0.5 * (x * x - y * y)
    if abs(u) <= spec.M:
        return "A"
    if u > 0:
        return "B1" if x > 0 else "B2"
    return "B3" if y > 0 else "B4"


# -- partition of unity -------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)


def _bump(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1
    out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2))
    return out


_BUMP_MASS = integrate.quad(lambda z: math.exp(-1.0 / (1.0 - z * z)) if abs(z) < 1 else 0.0, -1, 1, epsabs=0.0, epsrel=1e-12)[0]


def smoothstep(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, built from the bump integral."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    zb = 2.0 * s - 1.0                       # upper limit in bump variable
    half = 0.5 * (zb + 1.0)                  # map GL nodes from [-1,1] to [-1, zb]
    nodes = -1.0 + half[..., None] * (_GL_X + 1.0)
    return (half[..., None] * _GL_W * _bump(nodes)).sum(axis=-1) / _BUMP_MASS


def smoothstep_derivative(s):
    s = np.asarray(s, dtype=float)
    return 2.0 * _bump(2.0 * s - 1.0) / _BUMP_MASS


@dataclass(frozen=True)
class PartitionOfUnity:
    """chi_A = cos(pi/2 S), chi_B = sin(pi/2 S), S a smoothstep in |u| over [M, kappa^2 M]."""

    spec: RegionSpec

    def _s(self, u):
        M = self.spec.M
        return (np.abs(np.asarray(u, dtype=float)) - M) / (self.spec.outer - M)

    def chi_A_u(self, u):
        return np.cos(0.5 * math.pi * smoothstep(self._s(u)))

    def chi_B_u(self, u):
        return np.sin(0.5 * math.pi * smoothstep(self._s(u)))

    def chi_A(self, x, y):
        return self.chi_A_u(to_parabolic(x, y)[0])

    def chi_B(self, x, y):
        return self.chi_B_u(to_parabolic(x, y)[0])

    def V_chi_uv(self, u):
        """|grad_uv chi_A|^2 + |grad_uv chi_B|^2, a function of u only."""
        s = self._s(u)
        width = self.spec.outer - self.spec.M
        dtheta = 0.5 * math.pi * smoothstep_derivative(s) / width
        inside = (s > 0) & (s < 1)
        return np.where(inside, dtheta**2, 0.0)

    def V_chi(self, x, y):
        """Localization potential in cartesian coordinates, (x^2 + y^2) V_chi_uv."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (x * x + y * y) * self.V_chi_uv(0.5 * (x * x - y * y))

    @cached_property
    def c1(self) -> float:
        """sup V_chi_uv * M^2 for this profile (attained at the annulus midpoint)."""
        peak = 2.0 / (_BUMP_MASS * math.e)
        return (0.5 * math.pi * peak / (self.spec.kappa**2 - 1.0)) ** 2

    def to_dict(self) -> dict:
        return {"spec": asdict(self.spec), "profile": "bump-smoothstep", "c1": self.c1,
                "c2": self.spec.c2, "bump_mass": _BUMP_MASS}


def partition(spec: RegionSpec) -> PartitionOfUnity:
    return PartitionOfUnity(spec)


def valley_geometry(lam: float, spec: RegionSpec, alpha: float,
                    c1: float | None = None) -> tuple[float, Callable[[float], float]]:
    """Radius r_lambda where the central region meets the valleys, and the valley half-angle.

    r_lambda is the positive root of
    -r^4/4 + r + lambda (1 + r^2)^(-alpha/2) + r^2 c1 / M^2 = 0,
    bracketed by doubling and refined with Brent's method.
    phi_r(r) = (r + lambda r^-alpha)^(1/2) / r^2.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if c1 is None:
        c1 = partition(spec).c1
    k = c1 / spec.M**2

    def f(r):
        return -0.25 * r**4 + r + lam * (1.0 + r * r) ** (-0.5 * alpha) + r * r * k

    lo = 1e-12
    if f(lo) <= 0:
        raise ValueError("balance function not positive near r = 0")
    hi = 1.0
    for _ in range(200):
        if f(hi) < 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ValueError("failed to bracket r_lambda")
    r = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)

    def phi_r(rr):
        rr = np.asarray(rr, dtype=float)
        return np.sqrt(rr + lam * rr ** (-alpha)) / rr**2

    return r, phi_r


def export_regions(spec: RegionSpec, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(partition(spec).to_dict(), indent=2, sort_keys=True))
    return path
