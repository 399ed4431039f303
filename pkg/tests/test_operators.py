import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import test_spinors
from susytoy.eigensolve import count_negative_dense, dense_spectrum
from susytoy.operators import (PAULI, Box2D, WeightSpec, assemble_hamiltonian, assemble_laplacian,
                               assemble_potential, assemble_shifted, assemble_supercharge, assemble_weight,
                               export_operator, laplacian_1d, load_operator, lower_matrix_potential, weight)


def test_box_validation():
    with pytest.raises(ValueError):
        Box2D(1.0, 1.0, 2, 5)
    with pytest.raises(ValueError):
        Box2D(-1.0, 1.0, 5, 5)
    b = Box2D.square(1.0, 0.5)
    assert b.interior_shape == (3, 3)
    assert b.h_x == pytest.approx(0.5)


def test_pauli_algebra():
    g = PAULI.as_tuple()
    I = np.eye(2)
    for j in range(3):
        assert np.allclose(g[j] @ g[j], I)
        assert np.allclose(g[j], g[j].conj().T)
        for k in range(j + 1, 3):
            assert np.allclose(g[j] @ g[k] + g[k] @ g[j], 0)
    assert np.allclose(g[1], np.diag([1, -1]))


def test_gamma3_makes_Q_square_to_H_symbol():
    # (p1 g1 + p2 g2 + w g3)^2 = (p^2 + w^2) I for any completion of the algebra, and the cross
    # term -i[d, xy] g_k g3 yields x g1 - y g2 only with this sign of g3
    g1, g2, g3 = PAULI.as_tuple()
    assert np.allclose(-1j * g1 @ g3, -g2) and np.allclose(-1j * g2 @ g3, g1)


def test_laplacian_1d_lowest():
    n = 199
    h = math.pi / (n + 1)
    vals = np.linalg.eigvalsh(laplacian_1d(n, h).toarray())
    assert abs(vals[0] - 1.0) < h**2


def test_laplacian_2d_lowest():
    # (0, pi)^2 is the box [-pi/2, pi/2]^2 shifted; -Lap is translation invariant
    box = Box2D(math.pi / 2, math.pi / 2, 41, 41)
    vals = dense_spectrum(assemble_laplacian(box)).eigenvalues
    assert abs(vals[0] - 2.0) < 2 * box.h_x**2
    assert vals[0] > 0


def test_laplacian_constant_interior_rows():
    box = Box2D.square(1.0, 0.1)
    L = assemble_laplacian(box).matrix
    nx, ny = box.interior_shape
    r = L @ np.ones(L.shape[0])
    interior = np.zeros((nx, ny), bool)
    interior[1:-1, 1:-1] = True
    assert np.allclose(r.reshape(nx, ny)[interior], 0.0)


def test_potential_and_lower_eigenvalue():
    assert lower_matrix_potential(0.0, 0.0) == 0.0
    g1, g2, _ = PAULI.as_tuple()
    for x, y in [(1.0, 2.0), (-0.3, 0.7), (2.5, -1.5)]:
        M = x * x * y * y * np.eye(2) + x * g1 - y * g2
        assert np.linalg.eigvalsh(M)[0] == pytest.approx(lower_matrix_potential(x, y), abs=1e-12)


def test_hamiltonian_structure():
    box = Box2D.square(2.0, 0.5)
    H = assemble_hamiltonian(box)
    HB = assemble_hamiltonian(box, supersymmetric=False)
    assert H.dimension == 2 * box.n_interior and HB.dimension == box.n_interior
    assert H.hermiticity_defect() == 0.0
    # spinor index fastest: block of node k sits at rows 2k, 2k+1
    X, Y = box.mesh()
    k = 7
    block = H.matrix[2 * k:2 * k + 2, 2 * k:2 * k + 2].toarray()
    g1, g2, _ = PAULI.as_tuple()
    diag = HB.matrix[k, k]
    assert np.allclose(block, diag * np.eye(2) + X[k] * g1.real - Y[k] * g2.real)


def test_hamiltonian_nonnegative_up_to_discretization():
    box = Box2D.square(4.0, 0.2)
    lo = dense_spectrum(assemble_hamiltonian(box)).eigenvalues[0]
    assert lo > -0.05


def test_bosonic_psd():
    box = Box2D.square(3.0, 0.25)
    assert dense_spectrum(assemble_hamiltonian(box, False)).eigenvalues[0] >= -1e-8


def test_supercharge_constant_spinor_interior():
    box = Box2D.square(2.0, 0.25)
    Q = assemble_supercharge(box)
    xi = np.array([0.3, 0.4 - 0.2j])
    psi = np.tile(xi, box.n_interior)
    out = (Q.matrix @ psi).reshape(*box.interior_shape, 2)
    X, Y = box.mesh()
    expect = (X * Y)[:, None] * (PAULI.gamma3 @ xi)[None, :]
    expect = expect.reshape(*box.interior_shape, 2)
    assert np.allclose(out[1:-1, 1:-1], expect[1:-1, 1:-1], atol=1e-12)


def test_supercharge_hermitian(rng):
    box = Box2D.square(1.5, 0.25)
    Q = assemble_supercharge(box)
    n = Q.dimension
    phi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    psi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    assert np.vdot(phi, Q.matrix @ psi) == pytest.approx(np.vdot(Q.matrix @ phi, psi), abs=1e-10)
    assert Q.hermiticity_defect() == 0.0


def test_form_identity_refines():
    errs = []
    for h in (0.2, 0.1, 0.05):
        box = Box2D.square(6.0, h)
        X, Y = box.mesh()
        H, Q = assemble_hamiltonian(box), assemble_supercharge(box)
        psi = test_spinors(X, Y)[2].reshape(-1)
        qp = Q.matrix @ psi
        errs.append(abs(H.form(psi) - Q.inner(qp, qp).real))
    assert errs[0] / errs[1] >= 1.8 and errs[1] / errs[2] >= 1.8


def test_weight_examples():
    assert weight(0, 0, 3.7) == 1.0
    assert np.all(weight(np.linspace(-3, 3, 7), 1.0, 0.0) == 1.0)
    assert weight(1.0, math.sqrt(2.0), 2.0) == pytest.approx(0.25, rel=1e-15)
    with pytest.raises(ValueError):
        weight(0, 0, -1)
    with pytest.raises(ValueError):
        WeightSpec(-0.5)


@given(st.floats(0.1, 6.0), st.floats(0.0, 2 * math.pi))
def test_weight_decreases_along_rays(alpha, phi):
    r = np.linspace(0, 10, 50)
    w = weight(r * math.cos(phi), r * math.sin(phi), alpha)
    assert np.all(np.diff(w) < 0)


def test_weight_operator_bounds():
    box = Box2D.square(3.0, 0.5)
    d = assemble_weight(box, WeightSpec(2.0)).matrix.diagonal()
    assert np.all(d > 0) and np.all(d <= 1)


def test_shifted_examples():
    box = Box2D.square(2.0, 0.4)
    H = assemble_hamiltonian(box).matrix
    assert (assemble_shifted(box, WeightSpec(3.0, 0.0)).matrix != H).nnz == 0
    lam = 2.5
    S = assemble_shifted(box, WeightSpec(3.0, lam)).matrix
    rho = assemble_weight(box, WeightSpec(3.0)).matrix
    assert abs(S - (H - lam * rho)).max() == 0.0
    # odd node count per axis puts a node at the origin
    k = box.n_interior // 2
    X, Y = box.mesh()
    assert X[k] == 0 and Y[k] == 0
    assert S[2 * k, 2 * k] == pytest.approx(H[2 * k, 2 * k] - lam, abs=1e-13)
    small = Box2D.square(3.0, 0.3)
    assert count_negative_dense(assemble_shifted(small, WeightSpec(3.0, 50.0))).n_negative >= 1


@pytest.mark.parametrize("kind", ["hamiltonian", "supercharge", "shifted"])
def test_export_roundtrip_bit_exact(tmp_path, kind):
    box = Box2D(1.3, 0.9, 7, 6)
    op = {"hamiltonian": lambda: assemble_hamiltonian(box),
          "supercharge": lambda: assemble_supercharge(box),
          "shifted": lambda: assemble_shifted(box, WeightSpec(1.7, 0.3))}[kind]()
    path, sidecar = export_operator(op, tmp_path / "op.txt")
    back = load_operator(path)
    assert back.kind == op.kind and back.box == op.box and back.spec == op.spec
    diff = (back.matrix - op.matrix).tocoo()
    assert diff.nnz == 0 or np.all(diff.data == 0)
    for line in path.read_text().splitlines()[:20]:
        i, j = map(int, line.split()[:2])
        assert i <= j
