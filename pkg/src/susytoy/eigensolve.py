"""Low-lying spectra and exact negative-eigenvalue counts.

Counting uses Sylvester's law of inertia: SuperLU is run in symmetric mode
with diagonal pivoting only, so ``P (A - s) P^T = L D L^H`` is a congruence
and the number of negative pivots equals the number of eigenvalues below
``s``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .operators import SparseHermitianOperator

log = logging.getLogger(__name__)

__all__ = [
    "SpectralResult",
    "CountResult",
    "ConvergenceError",
    "FactorizationError",
    "DENSE_CAP",
    "lowest_eigenpairs",
    "dense_spectrum",
    "count_negative",
    "count_negative_dense",
    "inertia",
    "append_jsonl",
    "read_jsonl",
]

DENSE_CAP = 4000
SEED = 20240611


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, eigenvalues=None, residual_norms=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues
        self.residual_norms = residual_norms


class FactorizationError(RuntimeError):
    pass


@dataclass
class SpectralResult:
    eigenvalues: list[float]
    residual_norms: list[float]
    solver: str
    iterations: int = 0
    eigenvectors: np.ndarray | None = field(default=None, repr=False)

    def to_record(self) -> dict:
        d = asdict(self)
        d.pop("eigenvectors")
        return d


@dataclass
class CountResult:
    n_negative: int
    shift: float
    method: str
    perturbation: float = 0.0
    metadata: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return asdict(self)


def _as_matrix(op) -> sp.csr_matrix:
    if isinstance(op, SparseHermitianOperator):
        return op.matrix
    if sp.issparse(op):
        return op.tocsr()
    return sp.csr_matrix(np.asarray(op))


def _meta(op) -> dict:
    return op.metadata() if isinstance(op, SparseHermitianOperator) else {"dimension": _as_matrix(op).shape[0]}


def _residuals(A, vals, vecs) -> np.ndarray:
    return np.linalg.norm(A @ vecs - vecs * vals, axis=0)


def dense_spectrum(op, cap: int = DENSE_CAP, vectors: bool = False) -> SpectralResult:
    """Full spectrum by dense Hermitian eigendecomposition (oracle)."""
    A = _as_matrix(op)
    n = A.shape[0]
    if n > cap:
        raise ValueError(f"dimension {n} exceeds dense cap {cap}")
    M = A.toarray()
    if vectors:
        vals, vecs = np.linalg.eigh(M)
        res = _residuals(M, vals, vecs)
    else:
        vals, vecs = np.linalg.eigvalsh(M), None
        res = np.zeros_like(vals)
    return SpectralResult(vals.tolist(), res.tolist(), "dense", 0, vecs)


def lowest_eigenpairs(op, k: int = 1, tol: float = 1e-8, sigma: float | None = None,
                      maxiter: int | None = None, seed: int = SEED) -> SpectralResult:
    """The ``k`` smallest eigenpairs by implicitly restarted Lanczos (ARPACK).

    ``sigma`` switches to shift-invert mode; it must lie below the spectrum
    (checked by inertia), so the pairs nearest ``sigma`` are the lowest ones.
    Residuals ``||A v - l v||`` are checked against ``tol``.
    """
    A = _as_matrix(op)
    n = A.shape[0]
    if k < 1 or k >= n - 1:
        raise ValueError(f"need 1 <= k < n - 1, got k={k}, n={n}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    if np.iscomplexobj(A.data):
        v0 = v0 + 1j * rng.standard_normal(n)
    scale = max(1.0, float(abs(A).sum(axis=1).max()))
    kwargs = dict(k=k, v0=v0, tol=min(tol / scale, 1e-3) * 1e-2, maxiter=maxiter, return_eigenvectors=True)
    try:
        if sigma is None:
            vals, vecs = spla.eigsh(A, which="SA", **kwargs)
        else:
            below = count_negative(A, sigma).n_negative
            if below:
                raise ValueError(f"sigma={sigma} is above {below} eigenvalue(s)")
            vals, vecs = spla.eigsh(A.tocsc(), sigma=sigma, which="LM", **kwargs)
    except spla.ArpackNoConvergence as exc:
        vals, vecs = exc.eigenvalues, exc.eigenvectors
        res = _residuals(A, vals, vecs) if len(vals) else np.array([])
        raise ConvergenceError(f"ARPACK did not converge ({len(vals)}/{k} pairs)", vals, res) from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    res = _residuals(A, vals, vecs)
    if np.any(res > tol):
        raise ConvergenceError(f"residuals {res.max():.3e} exceed tol {tol:.1e}", vals, res)
    return SpectralResult(vals.tolist(), res.tolist(), "iterative", 0, vecs)


def _factor_inertia(A: sp.csc_matrix, breakdown: float) -> tuple[int, int, int]:
    lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True, "Equil": False})
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise FactorizationError("off-diagonal pivot taken; factorization is not a congruence")
    d = lu.U.diagonal().real
    if np.min(np.abs(d)) <= breakdown:
        raise FactorizationError(f"pivot {np.min(np.abs(d)):.3e} below breakdown threshold")
    return int((d < 0).sum()), 0, int((d > 0).sum())


def inertia(op, shift: float = 0.0, breakdown: float | None = None) -> tuple[int, int, int]:
    """(negative, zero, positive) pivot counts of ``op - shift``; no retries."""
    A = _as_matrix(op)
    n = A.shape[0]
    norm = float(abs(A).sum(axis=1).max()) or 1.0
    if breakdown is None:
        breakdown = 1e-14 * norm
    M = (A - shift * sp.identity(n, format="csr")).tocsc()
    try:
        return _factor_inertia(M, breakdown)
    except RuntimeError as exc:  # SuperLU raises RuntimeError on exact singularity
        if isinstance(exc, FactorizationError):
            raise
        raise FactorizationError(str(exc)) from exc


def count_negative(op, shift: float = 0.0, retries: int = 3) -> CountResult:
    """Exact number of eigenvalues strictly below ``shift``.

    On pivot breakdown the shift is moved by ``eta = 1e-8 * ||A||_inf``
    (alternating sign, growing) and the perturbation is reported.
    """
    A = _as_matrix(op)
    norm = float(abs(A).sum(axis=1).max()) or 1.0
    eta = 1e-8 * norm
    attempts = [0.0] + [s * eta * (2 ** i) for i in range(retries) for s in (-1.0, 1.0)]
    last: Exception | None = None
    for delta in attempts:
        try:
            neg, _, _ = inertia(A, shift + delta)
        except FactorizationError as exc:
            last = exc
            continue
        if delta:
            log.warning("count_negative: shift %g perturbed by %g after pivot breakdown", shift, delta)
        return CountResult(neg, float(shift), "inertia", float(delta), _meta(op))
    raise FactorizationError(f"singular at shift {shift} after {len(attempts)} attempts: {last}")


def count_negative_dense(op, shift: float = 0.0) -> CountResult:
    vals = np.asarray(dense_spectrum(op).eigenvalues)
    return CountResult(int((vals < shift).sum()), float(shift), "dense", 0.0, _meta(op))


def append_jsonl(path: str | Path, record: dict) -> None:
    with Path(path).open("a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
