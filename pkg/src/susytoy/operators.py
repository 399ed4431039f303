"""Finite-difference assembly of the x^2 y^2 toy-model operators.

All operators live on the interior nodes of a Dirichlet box
``[-Lx, Lx] x [-Ly, Ly]``.  Nodes are flattened with the x index slowest,
then the y index, then (for spinor operators) the spinor index, so each
2x2 spinor block is contiguous.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Box2D",
    "WeightSpec",
    "PauliAlgebra",
    "PAULI",
    "SparseHermitianOperator",
    "laplacian_1d",
    "central_difference_1d",
    "assemble_laplacian",
    "assemble_potential",
    "assemble_hamiltonian",
    "assemble_supercharge",
    "assemble_weight",
    "assemble_shifted",
    "weight",
    "lower_matrix_potential",
    "export_operator",
    "load_operator",
]


@dataclass(frozen=True)
class Box2D:
    """Rectangular Dirichlet box.

    ``n_x`` and ``n_y`` count grid points *including* the two boundary
    nodes, so the spacing is ``2 L / (n - 1)`` and there are ``n - 2``
    interior nodes per direction.
    """

    half_width_x: float
    half_width_y: float
    n_x: int
    n_y: int

    def __post_init__(self):
        if self.n_x < 3 or self.n_y < 3:
            raise ValueError(f"need at least 3 grid points per direction, got ({self.n_x}, {self.n_y})")
        if not (self.half_width_x > 0 and self.half_width_y > 0):
            raise ValueError("half widths must be positive")

    @classmethod
    def square(cls, half_width: float, spacing: float) -> "Box2D":
        n = int(round(2.0 * half_width / spacing)) + 1
        return cls(half_width, half_width, n, n)

    @property
    def h_x(self) -> float:
        return 2.0 * self.half_width_x / (self.n_x - 1)

    @property
    def h_y(self) -> float:
        return 2.0 * self.half_width_y / (self.n_y - 1)

    @property
    def interior_shape(self) -> tuple[int, int]:
        return (self.n_x - 2, self.n_y - 2)

    @property
    def n_interior(self) -> int:
        return (self.n_x - 2) * (self.n_y - 2)

    @property
    def cell_area(self) -> float:
        return self.h_x * self.h_y

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.linspace(-self.half_width_x, self.half_width_x, self.n_x)[1:-1]
        y = np.linspace(-self.half_width_y, self.half_width_y, self.n_y)[1:-1]
        return x, y

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened nodal coordinates in operator ordering (scalar layout)."""
        x, y = self.axes()
        X, Y = np.meshgrid(x, y, indexing="ij")
        return X.ravel(), Y.ravel()

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class WeightSpec:
    """Exponent and spectral shift of the weight (1 + x^2 + y^2)^(-alpha/2)."""

    alpha: float
    lam: float = 0.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "lambda": self.lam}


@dataclass(frozen=True)
class PauliAlgebra:
    gamma1: np.ndarray
    gamma2: np.ndarray
    gamma3: np.ndarray

    def as_tuple(self):
        return self.gamma1, self.gamma2, self.gamma3


# gamma2 diagonal; the sign of gamma3 is fixed so that Q^2 = H with
# Q = -i(d_x g1 + d_y g2) + xy g3 and H = ... + x g1 - y g2.
PAULI = PauliAlgebra(
    gamma1=np.array([[0, 1], [1, 0]], dtype=complex),
    gamma2=np.array([[1, 0], [0, -1]], dtype=complex),
    gamma3=np.array([[0, 1j], [-1j, 0]], dtype=complex),
)


@dataclass(frozen=True)
class SparseHermitianOperator:
    """Immutable sparse Hermitian matrix plus provenance metadata."""

    matrix: sp.csr_matrix
    kind: str
    box: Box2D | None = None
    spec: WeightSpec | None = None
    spinor: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.matrix.data)

    def hermiticity_defect(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(abs(diff).max()) if diff.nnz else 0.0

    def is_hermitian(self, atol: float = 0.0) -> bool:
        return self.hermiticity_defect() <= atol

    def norm_inf(self) -> float:
        return float(abs(self.matrix).sum(axis=1).max())

    def inner(self, phi: np.ndarray, psi: np.ndarray) -> complex:
        """Discrete L2 inner product (cell-area weighted on 2-D boxes)."""
        w = self.box.cell_area if self.box is not None else self.meta.get("cell", 1.0)
        return complex(np.vdot(phi, psi)) * w

    def form(self, psi: np.ndarray) -> float:
        """Quadratic form <psi, A psi> in the discrete L2 product."""
        return self.inner(psi, self.matrix @ psi).real

    def __matmul__(self, other):
        return self.matrix @ other

    def __sub__(self, other: "SparseHermitianOperator") -> "SparseHermitianOperator":
        return SparseHermitianOperator((self.matrix - other.matrix).tocsr(), f"{self.kind}-{other.kind}",
                                       self.box, self.spec, self.spinor, dict(self.meta))

    def shifted(self, shift: float) -> sp.csc_matrix:
        return (self.matrix - shift * sp.identity(self.dimension, format="csr")).tocsc()

    def metadata(self) -> dict:
        return {
            "kind": self.kind,
            "dimension": self.dimension,
            "spinor": self.spinor,
            "complex": self.is_complex,
            "box": self.box.to_dict() if self.box is not None else None,
            "spec": self.spec.to_dict() if self.spec is not None else None,
            "meta": self.meta,
        }


def laplacian_1d(n_interior: int, h: float) -> sp.csr_matrix:
    """Second-order Dirichlet stencil for -d^2/dx^2 on ``n_interior`` nodes."""
    main = np.full(n_interior, 2.0 / h**2)
    off = np.full(n_interior - 1, -1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def central_difference_1d(n_interior: int, h: float) -> sp.csr_matrix:
    """Antisymmetric centered difference for d/dx with zero Dirichlet ends."""
    off = np.full(n_interior - 1, 0.5 / h)
    return sp.diags([-off, off], [-1, 1], format="csr")


def _spinor(scalar: sp.spmatrix, gamma: np.ndarray) -> sp.csr_matrix:
    return sp.kron(scalar, sp.csr_matrix(gamma), format="csr")


def _scalar_to_spinor(scalar: sp.spmatrix) -> sp.csr_matrix:
    return sp.kron(scalar, sp.identity(2), format="csr")


def assemble_laplacian(box: Box2D) -> SparseHermitianOperator:
    """Five-point -Laplacian on the interior nodes (scalar layout)."""
    nx, ny = box.interior_shape
    lap = sp.kron(laplacian_1d(nx, box.h_x), sp.identity(ny)) + sp.kron(sp.identity(nx), laplacian_1d(ny, box.h_y))
    return SparseHermitianOperator(lap.tocsr(), "laplacian", box)


def assemble_potential(box: Box2D) -> SparseHermitianOperator:
    X, Y = box.mesh()
    return SparseHermitianOperator(sp.diags(X**2 * Y**2, format="csr"), "potential", box)


def lower_matrix_potential(x, y):
    """Lower eigenvalue of x^2 y^2 + x g1 - y g2 (valleys along the axes)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return x**2 * y**2 - np.hypot(x, y)


def assemble_hamiltonian(box: Box2D, supersymmetric: bool = True) -> SparseHermitianOperator:
    """Discrete toy-model Hamiltonian.

    With ``supersymmetric`` the result acts on spinors and includes the
    fermionic term ``x g1 - y g2``; otherwise it is the scalar bosonic
    operator ``-Lap + x^2 y^2``.  The matrix is real symmetric in both cases.
    """
    scalar = assemble_laplacian(box).matrix + assemble_potential(box).matrix
    if not supersymmetric:
        return SparseHermitianOperator(scalar.tocsr(), "bosonic", box)
    X, Y = box.mesh()
    g1, g2, _ = PAULI.as_tuple()
    fermionic = _spinor(sp.diags(X), g1.real) - _spinor(sp.diags(Y), g2.real)
    H = _scalar_to_spinor(scalar) + fermionic
    return SparseHermitianOperator(H.tocsr(), "hamiltonian", box, spinor=True)


def assemble_supercharge(box: Box2D) -> SparseHermitianOperator:
    """Centered-difference supercharge -i(d_x g1 + d_y g2) + xy g3 (complex)."""
    nx, ny = box.interior_shape
    Dx = sp.kron(central_difference_1d(nx, box.h_x), sp.identity(ny))
    Dy = sp.kron(sp.identity(nx), central_difference_1d(ny, box.h_y))
    X, Y = box.mesh()
    g1, g2, g3 = PAULI.as_tuple()
    Q = -1j * (_spinor(Dx, g1) + _spinor(Dy, g2)) + _spinor(sp.diags(X * Y), g3)
    return SparseHermitianOperator(Q.tocsr(), "supercharge", box, spinor=True)


def weight(x, y, alpha: float):
    """rho(x, y) = (1 + x^2 + y^2)^(-alpha/2)."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (1.0 + x**2 + y**2) ** (-0.5 * alpha)


def assemble_weight(box: Box2D, spec: WeightSpec, spinor: bool = True) -> SparseHermitianOperator:
    X, Y = box.mesh()
    rho = sp.diags(weight(X, Y, spec.alpha), format="csr")
    if spinor:
        rho = _scalar_to_spinor(rho)
    return SparseHermitianOperator(rho, "weight", box, spec, spinor=spinor)


def assemble_shifted(box: Box2D, spec: WeightSpec, supersymmetric: bool = True) -> SparseHermitianOperator:
    """H_lambda = H - lambda * rho, entrywise."""
    H = assemble_hamiltonian(box, supersymmetric)
    rho = assemble_weight(box, spec, spinor=supersymmetric)
    return SparseHermitianOperator((H.matrix - spec.lam * rho.matrix).tocsr(), "shifted", box, spec,
                                   spinor=supersymmetric)


# -- coordinate-list export -------------------------------------------------

def export_operator(op: SparseHermitianOperator, path: str | Path) -> tuple[Path, Path]:
    """Write ``i j re im`` lines (upper triangle, 0-based) plus a JSON sidecar.

    Values are written with ``repr`` so a round trip is bit exact.
    """
    path = Path(path)
    upper = sp.triu(op.matrix, format="coo")
    order = np.lexsort((upper.col, upper.row))
    rows, cols, vals = upper.row[order], upper.col[order], np.asarray(upper.data[order], dtype=complex)
    with path.open("w") as fh:
        for i, j, v in zip(rows, cols, vals):
            fh.write(f"{i} {j} {float(v.real)!r} {float(v.imag)!r}\n")
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(json.dumps(op.metadata(), indent=2, sort_keys=True))
    return path, sidecar


def load_operator(path: str | Path) -> SparseHermitianOperator:
    path = Path(path)
    meta: dict[str, Any] = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    n = meta["dimension"]
    data = np.loadtxt(path, ndmin=2) if path.stat().st_size else np.zeros((0, 4))
    rows = data[:, 0].astype(np.int64)
    cols = data[:, 1].astype(np.int64)
    vals = data[:, 2] + 1j * data[:, 3] if meta["complex"] else data[:, 2]
    upper = sp.coo_matrix((vals, (rows, cols)), shape=(n, n))
    strict = sp.triu(upper, k=1)
    full = (upper + strict.conj().T).tocsr()
    full.sort_indices()
    box = Box2D(**meta["box"]) if meta["box"] else None
    spec = WeightSpec(meta["spec"]["alpha"], meta["spec"]["lambda"]) if meta["spec"] else None
    return SparseHermitianOperator(full, meta["kind"], box, spec, meta["spinor"], meta["meta"])
