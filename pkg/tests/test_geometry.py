import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from susytoy.geometry import (REFLECT_DIAG, REFLECT_ORIGIN, REFLECT_X0, RegionSpec, classify, export_regions,
                              from_parabolic, partition, scale_factor, smoothstep, smoothstep_derivative,
                              to_parabolic, valley_geometry)

SPEC = RegionSpec(2.0)
finite = st.floats(-50, 50, allow_nan=False)


def test_regionspec_validation():
    for bad in (dict(M=0), dict(M=1, kappa=1.0), dict(M=1, delta=1.0), dict(M=1, delta=0.0)):
        with pytest.raises(ValueError):
            RegionSpec(**bad)
    assert RegionSpec(1.0).c2 == pytest.approx(25.0)


def test_to_parabolic_examples():
    assert to_parabolic(1, 1) == (0.0, 1.0)
    assert to_parabolic(1, 0) == (0.5, 0.0)
    assert to_parabolic(-2.5, 3.0) == to_parabolic(2.5, -3.0)


def test_from_parabolic_examples():
    x, y = from_parabolic(0.0, 1.0)
    assert (x, y) == pytest.approx((1.0, 1.0), abs=1e-15)
    x, y = from_parabolic(0.5, 0.0)
    assert (x, y) == pytest.approx((1.0, 0.0), abs=1e-15)
    with pytest.raises(ValueError):
        from_parabolic(-1.0, 0.0)


def test_roundtrip_random(rng):
    x = rng.uniform(1e-3, 20, 10_000)
    y = rng.uniform(-20, 20, 10_000)
    u, v = to_parabolic(x, y)
    u2, v2 = to_parabolic(*from_parabolic(u, v))
    scale = np.maximum(1.0, np.hypot(u, v))
    assert np.max(np.abs(u2 - u) / scale) < 1e-12 and np.max(np.abs(v2 - v) / scale) < 1e-12
    xb, yb = from_parabolic(u, v)
    assert np.allclose(xb, x, rtol=1e-12, atol=1e-12) and np.allclose(yb, y, rtol=1e-12, atol=1e-12)


def test_scale_factor(rng):
    assert scale_factor(0.5, 0.0) == pytest.approx(1.0, rel=1e-15)
    assert scale_factor(0.0, 1.0) == pytest.approx(2**-0.5, rel=1e-15)
    u, v = rng.uniform(-10, 10, (2, 1000))
    x, y = from_parabolic(u, v)
    assert np.max(np.abs(scale_factor(u, v) ** 2 * (x * x + y * y) - 1)) < 1e-12
    with pytest.raises(ValueError):
        scale_factor(0.0, 0.0)


def test_jacobian_monte_carlo(rng):
    # int_{x>0} exp(-((x-3)^2 + y^2)) dx dy = pi (up to ~1e-8), evaluated as int f h^2 du dv
    n = 2_000_000
    u = rng.uniform(-6.0, 24.0, n)
    v = rng.uniform(-24.0, 24.0, n)
    x, y = from_parabolic(u, v)
    f = np.exp(-((x - 3) ** 2 + y**2)) * scale_factor(u, v) ** 2
    est = f.mean() * 30.0 * 48.0
    assert est == pytest.approx(math.pi, rel=5e-3)


def test_classify_examples():
    assert classify(0, 0, RegionSpec(0.01)) == "A"
    assert classify(3, 0, RegionSpec(1.0)) == "B1"
    assert classify(-3, 0, RegionSpec(1.0)) == "B2"
    assert classify(0, 3, RegionSpec(1.0)) == "B3"
    assert classify(0, -3, RegionSpec(1.0)) == "B4"
    # closed A: |u| = M exactly
    assert classify(2.0, 0.0, RegionSpec(2.0)) == "A"


@given(finite, finite)
def test_classify_reflections(x, y):
    # |u| > M forces x != 0 in B1/B2 and y != 0 in B3/B4, so no tie cases arise
    t = classify(x, y, SPEC)
    assert classify(-x, y, SPEC) == REFLECT_X0[t]
    assert classify(y, x, SPEC) == REFLECT_DIAG[t]
    assert classify(-x, -y, SPEC) == REFLECT_ORIGIN[t]


def test_smoothstep_against_quadrature():
    bump = lambda z: math.exp(-1 / (1 - z * z)) if abs(z) < 1 else 0.0
    mass = integrate.quad(bump, -1, 1, epsabs=0, epsrel=1e-13)[0]
    for s in (0.1, 0.37, 0.5, 0.81):
        ref = integrate.quad(bump, -1, 2 * s - 1, epsabs=0, epsrel=1e-13)[0] / mass
        assert smoothstep(s) == pytest.approx(ref, abs=1e-13)
    assert smoothstep(-1.0) == 0.0 and smoothstep(2.0) == pytest.approx(1.0, abs=1e-15)
    d = 1e-6
    assert smoothstep_derivative(0.3) == pytest.approx((smoothstep(0.3 + d) - smoothstep(0.3 - d)) / (2 * d), rel=1e-6)


def test_partition_identity_and_supports(rng):
    P = partition(SPEC)
    assert P.chi_A_u(0.0) == 1.0 and P.chi_B_u(0.0) == 0.0
    x, y = rng.uniform(-6, 6, (2, 100_000))
    a, b = P.chi_A(x, y), P.chi_B(x, y)
    assert np.max(np.abs(a * a + b * b - 1)) < 1e-10
    u = to_parabolic(x, y)[0]
    inside, outside = np.abs(u) <= SPEC.M, np.abs(u) >= SPEC.outer
    assert np.all(a[inside] == 1.0) and np.allclose(b[outside], 1.0, atol=1e-15)
    V = P.V_chi(x, y)
    assert np.all(V[inside | outside] == 0.0) and np.any(V > 0)


def test_c1_is_sup_of_localization_potential():
    P = partition(SPEC)
    u = np.linspace(SPEC.M, SPEC.outer, 200_001)
    sup = np.max(P.V_chi_uv(u)) * SPEC.M**2
    assert sup <= P.c1 * (1 + 1e-9)
    assert sup == pytest.approx(P.c1, rel=1e-6)
    # V_chi is a gradient-squared of the angle theta(u) = pi/2 S; finite differences agree
    d = 1e-6
    u0 = SPEC.M + 0.3 * (SPEC.outer - SPEC.M)
    th = lambda uu: 0.5 * math.pi * smoothstep((uu - SPEC.M) / (SPEC.outer - SPEC.M))
    assert P.V_chi_uv(u0) == pytest.approx(((th(u0 + d) - th(u0 - d)) / (2 * d)) ** 2, rel=1e-6)


def test_valley_geometry_algebraic_root():
    r, phi = valley_geometry(0.0, SPEC, 3.0, c1=0.0)
    assert r == pytest.approx(4 ** (1 / 3), rel=1e-14)
    assert phi(2.0) == pytest.approx(math.sqrt(2.0) / 4.0)


@pytest.mark.parametrize("lam", [1.0, 100.0, 1e4])
def test_valley_geometry_residual(lam):
    spec = RegionSpec.for_lambda(lam, partition(SPEC).c1)
    r, _ = valley_geometry(lam, spec, 3.0)
    k = partition(spec).c1 / spec.M**2
    res = -r**4 / 4 + r + lam * (1 + r * r) ** -1.5 + r * r * k
    assert abs(res) < 1e-10 * max(1.0, r**4)


def test_valley_geometry_exponent():
    # r_lambda ~ lambda^(1/(4+alpha)): the local log-log slope carries the exponent; the global ratio
    # log r / log lambda still contains the O(1) prefactor at lambda = 1e4
    alpha = 3.0
    radii = {}
    for lam in (1e4 / 1.5, 1e4 * 1.5):
        spec = RegionSpec.for_lambda(lam, partition(SPEC).c1)
        radii[lam] = valley_geometry(lam, spec, alpha)[0]
    (l1, r1), (l2, r2) = sorted(radii.items())
    local = math.log(r2 / r1) / math.log(l2 / l1)
    assert local * (4 + alpha) == pytest.approx(1.0, rel=0.05)


def test_valley_geometry_errors():
    with pytest.raises(ValueError):
        valley_geometry(-1.0, SPEC, 3.0)


def test_export_regions(tmp_path):
    p = export_regions(SPEC, tmp_path / "regions.json")
    d = json.loads(p.read_text())
    assert d["spec"]["M"] == 2.0 and d["c1"] == pytest.approx(partition(SPEC).c1)
    assert d["c2"] == pytest.approx(25.0)
