import math

import numpy as np
import pytest
import scipy.sparse as sp

from susytoy.eigensolve import (ConvergenceError, FactorizationError, append_jsonl, count_negative,
                                count_negative_dense, dense_spectrum, inertia, lowest_eigenpairs, read_jsonl)
from susytoy.fiber import assemble_fiber
from susytoy.operators import PAULI, Box2D, WeightSpec, assemble_hamiltonian, assemble_potential, assemble_shifted, laplacian_1d


def test_dense_examples():
    assert dense_spectrum(sp.diags([-1.0, 3.0])).eigenvalues == [-1.0, 3.0]
    assert np.allclose(dense_spectrum(PAULI.gamma1).eigenvalues, [-1, 1])
    box = Box2D.square(2.0, 0.5)
    V = assemble_potential(box)
    assert np.allclose(dense_spectrum(V).eigenvalues, np.sort(V.matrix.diagonal()))
    with pytest.raises(ValueError):
        dense_spectrum(sp.identity(10), cap=5)


def test_lowest_1d_laplacian():
    n = 399
    h = math.pi / (n + 1)
    res = lowest_eigenpairs(laplacian_1d(n, h), k=2)
    assert abs(res.eigenvalues[0] - 1.0) < h**2
    assert max(res.residual_norms) <= 1e-8
    assert res.solver == "iterative"


def test_lowest_fiber_zero_and_sqrt2():
    p = assemble_fiber(0.0, spacing=0.01)
    vals = lowest_eigenpairs(p.operator, k=2, sigma=-0.5).eigenvalues
    assert abs(vals[0]) < 1e-4 and abs(vals[1] - math.sqrt(2)) < 1e-3


def test_lowest_matches_dense_20x20():
    box = Box2D(2.0, 2.0, 22, 22)
    H = assemble_shifted(box, WeightSpec(3.0, 4.0))
    it = lowest_eigenpairs(H, k=4).eigenvalues
    de = dense_spectrum(H).eigenvalues[:4]
    assert np.allclose(it, de, rtol=1e-8, atol=1e-10)


def test_lowest_deterministic():
    box = Box2D(2.0, 2.0, 14, 14)
    H = assemble_hamiltonian(box)
    a, b = lowest_eigenpairs(H, k=3), lowest_eigenpairs(H, k=3)
    assert a.eigenvalues == b.eigenvalues


def test_lowest_nonconvergence_reports():
    box = Box2D(3.0, 3.0, 40, 40)
    with pytest.raises(ConvergenceError) as info:
        lowest_eigenpairs(assemble_hamiltonian(box), k=5, maxiter=2)
    assert info.value.residual_norms is not None


def test_lowest_rejects_bad_sigma():
    with pytest.raises(ValueError):
        lowest_eigenpairs(sp.diags(np.arange(1.0, 20.0)), k=2, sigma=5.5)


def test_count_examples():
    box = Box2D.square(2.0, 0.25)
    from susytoy.operators import assemble_laplacian
    assert count_negative(assemble_laplacian(box)).n_negative == 0
    assert count_negative(sp.diags([-2.0, -1.0, 5.0])).n_negative == 2


def test_count_matches_dense_30x30():
    box = Box2D(3.0, 3.0, 32, 32)
    H = assemble_shifted(box, WeightSpec(3.0, 10.0))
    assert count_negative(H).n_negative == count_negative_dense(H).n_negative


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("shift", [0.0, 0.5, -0.5, 5.0, -5.0])
def test_inertia_equals_dense_random(seed, shift):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 300))
    A = sp.random(n, n, density=0.05, random_state=rng, data_rvs=rng.standard_normal)
    A = (A + A.T + sp.diags(rng.normal(0, 3, n))).tocsr()
    assert count_negative(A, shift).n_negative == count_negative_dense(A, shift).n_negative


def test_complex_hermitian_inertia(rng):
    n = 60
    B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    A = sp.csr_matrix(B + B.conj().T)
    assert count_negative(A).n_negative == count_negative_dense(A).n_negative


def test_singular_shift_perturbed():
    A = sp.diags([-1.0, 0.0, 2.0])
    res = count_negative(A, 0.0)
    assert res.perturbation != 0.0
    assert res.n_negative in (1, 2)
    with pytest.raises(FactorizationError):
        inertia(A, 0.0)


def test_monotone_in_lambda_and_box():
    box = Box2D.square(3.0, 0.25)
    counts = [count_negative(assemble_shifted(box, WeightSpec(3.0, l))).n_negative for l in (1, 4, 16, 64)]
    assert counts == sorted(counts)
    by_box = [count_negative(assemble_shifted(Box2D.square(L, 0.25), WeightSpec(1.0, 8.0))).n_negative
              for L in (2.0, 3.0, 4.0)]
    assert by_box == sorted(by_box)


def test_jsonl_roundtrip(tmp_path):
    res = count_negative(sp.diags([-2.0, 1.0]))
    p = tmp_path / "r.jsonl"
    append_jsonl(p, res.to_record())
    append_jsonl(p, res.to_record())
    back = read_jsonl(p)
    assert len(back) == 2 and back[0]["n_negative"] == 1 and back[0]["method"] == "inertia"
