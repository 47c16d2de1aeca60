"""Sparse complex operator algebra on truncated composite Hilbert spaces.

Conventions fixed here and relied on by every other module:

* Subsystem ordering is qubit x mechanics x cavity.  A composite basis
  index decomposes as ``i = (q * n_mech + m) * n_cav + c``.
* Qubit basis: ``sigma_z |0> = +|0>`` and ``sigma_z |1> = -|1>``.
* Everything is complex double precision; no mixed precision anywhere.

Operators are stored in coordinate form, sorted row-major with duplicate
coordinates coalesced by summation at construction time.  Instances are
immutable after construction and safe to share across workers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DimensionError",
    "SpaceConfig",
    "SparseOperator",
    "PureState",
    "DensityMatrix",
    "annihilation",
    "pauli",
    "kron",
    "kron3",
    "embed",
    "add",
    "scale",
    "matmul",
    "dagger",
    "expect",
    "basis_state",
    "product_state",
]

SLOTS = ("qubit", "mech", "cav")


class DimensionError(ValueError):
    """Operator or state dimensions are inconsistent."""


@dataclass(frozen=True)
class SpaceConfig:
    """Composite Hilbert space: qubit (dim 2) x mechanical Fock x cavity Fock.

    ``n_cav = 1`` denotes the reduced qubit+mechanics model with the cavity
    factored out; cavity operators cannot be embedded in that case.
    """

    n_mech: int
    n_cav: int
    n_qubit: int = 2

    def __post_init__(self) -> None:
        if self.n_qubit != 2:
            raise DimensionError("qubit dimension is fixed at 2")
        if self.n_mech < 2:
            raise DimensionError(f"n_mech must be >= 2, got {self.n_mech}")
        if self.n_cav < 1:
            raise DimensionError(f"n_cav must be >= 1, got {self.n_cav}")

    @property
    def total_dim(self) -> int:
        return self.n_qubit * self.n_mech * self.n_cav

    def slot_dim(self, slot: str) -> int:
        return {"qubit": self.n_qubit, "mech": self.n_mech, "cav": self.n_cav}[slot]

    def index(self, q: int, m: int, c: int) -> int:
        return (q * self.n_mech + m) * self.n_cav + c

    def decompose(self, i: int) -> tuple[int, int, int]:
        c = i % self.n_cav
        rest = i // self.n_cav
        return rest // self.n_mech, rest % self.n_mech, c


def _coalesce(dim, rows, cols, data):
    """Sort entries row-major and sum duplicates; drop exact zeros."""
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    data = np.ascontiguousarray(data, dtype=np.complex128)
    if rows.size == 0:
        return rows, cols, data
    keys = rows * dim + cols
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    data = data[order]
    uniq, start = np.unique(keys, return_index=True)
    sums = np.add.reduceat(data, start)
    keep = sums != 0
    uniq, sums = uniq[keep], np.ascontiguousarray(sums[keep])
    return uniq // dim, uniq % dim, sums


class SparseOperator:
    """Immutable sparse matrix on a single Hilbert space of dimension ``dim``."""

    __slots__ = ("dim", "rows", "cols", "data", "_csr")

    def __init__(self, dim, rows, cols, data, _validated=False):
        if dim < 1:
            raise DimensionError(f"operator dimension must be >= 1, got {dim}")
        if not _validated and len(rows):
            raw_rows = np.asarray(rows, dtype=np.int64)
            raw_cols = np.asarray(cols, dtype=np.int64)
            raw_data = np.asarray(data, dtype=np.complex128)
            if (
                raw_rows.min() < 0 or raw_rows.max() >= dim
                or raw_cols.min() < 0 or raw_cols.max() >= dim
            ):
                raise DimensionError("entry coordinates outside [0, dim)")
            if not np.all(np.isfinite(raw_data.real)) or not np.all(np.isfinite(raw_data.imag)):
                raise ValueError("operator entries must be finite")
        rows, cols, data = _coalesce(dim, rows, cols, data)
        for arr in (rows, cols, data):
            arr.setflags(write=False)
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "_csr", None)

    def __setattr__(self, name, value):
        raise AttributeError("SparseOperator is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_entries(cls, dim: int, entries) -> "SparseOperator":
        if not entries:
            return cls.zeros(dim)
        rows, cols, vals = zip(*entries)
        return cls(dim, np.array(rows), np.array(cols), np.array(vals))

    @classmethod
    def from_dense(cls, matrix) -> "SparseOperator":
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError("dense source must be a square matrix")
        rows, cols = np.nonzero(matrix)
        return cls(matrix.shape[0], rows, cols, matrix[rows, cols])

    @classmethod
    def identity(cls, dim: int) -> "SparseOperator":
        idx = np.arange(dim, dtype=np.int64)
        return cls(dim, idx, idx, np.ones(dim, dtype=np.complex128))

    @classmethod
    def zeros(cls, dim: int) -> "SparseOperator":
        empty = np.empty(0, dtype=np.int64)
        return cls(dim, empty, empty, np.empty(0, dtype=np.complex128))

    # -- raw views ---------------------------------------------------------

    @property
    def nnz(self) -> int:
        return self.data.size

    def csr(self):
        """(data, indices, indptr) triplet; cached, read-only."""
        if self._csr is None:
            counts = np.bincount(self.rows, minlength=self.dim)
            indptr = np.zeros(self.dim + 1, dtype=np.int64)
            np.cumsum(counts, out=indptr[1:])
            triple = (self.data, self.cols, indptr)
            indptr.setflags(write=False)
            object.__setattr__(self, "_csr", triple)
        return self._csr

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        out[self.rows, self.cols] = self.data
        return out

    # -- algebra -----------------------------------------------------------

    def _require_same_dim(self, other: "SparseOperator") -> None:
        if self.dim != other.dim:
            raise DimensionError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        self._require_same_dim(other)
        return SparseOperator(
            self.dim,
            np.concatenate([self.rows, other.rows]),
            np.concatenate([self.cols, other.cols]),
            np.concatenate([self.data, other.data]),
            _validated=True,
        )

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "SparseOperator":
        scalar = complex(scalar)
        if not np.isfinite(scalar.real) or not np.isfinite(scalar.imag):
            raise ValueError("scale factor must be finite")
        return SparseOperator(self.dim, self.rows, self.cols, self.data * scalar, _validated=True)

    __rmul__ = __mul__

    def __neg__(self) -> "SparseOperator":
        return (-1.0) * self

    def __matmul__(self, other: "SparseOperator") -> "SparseOperator":
        self._require_same_dim(other)
        if self.nnz == 0 or other.nnz == 0:
            return SparseOperator.zeros(self.dim)
        bd, bi, bp = other.csr()
        counts = bp[self.cols + 1] - bp[self.cols]
        total = int(counts.sum())
        if total == 0:
            return SparseOperator.zeros(self.dim)
        rep = np.repeat(np.arange(self.nnz, dtype=np.int64), counts)
        offsets = np.cumsum(counts) - counts
        within = np.arange(total, dtype=np.int64) - np.repeat(offsets, counts)
        b_idx = np.repeat(bp[self.cols], counts) + within
        return SparseOperator(
            self.dim,
            self.rows[rep],
            bi[b_idx],
            self.data[rep] * bd[b_idx],
            _validated=True,
        )

    def dagger(self) -> "SparseOperator":
        return SparseOperator(self.dim, self.cols, self.rows, np.conj(self.data), _validated=True)

    def conj(self) -> "SparseOperator":
        return SparseOperator(self.dim, self.rows, self.cols, np.conj(self.data), _validated=True)

    def transpose(self) -> "SparseOperator":
        return SparseOperator(self.dim, self.cols, self.rows, self.data, _validated=True)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if x.shape[0] != self.dim:
            raise DimensionError(f"vector of dim {x.shape[0]} against operator of dim {self.dim}")
        if self.nnz == 0:
            return np.zeros(self.dim, dtype=np.complex128)
        prod = self.data * x[self.cols]
        return np.bincount(self.rows, weights=prod.real, minlength=self.dim) + 1j * np.bincount(
            self.rows, weights=prod.imag, minlength=self.dim
        )

    # -- diagnostics -------------------------------------------------------

    def max_abs(self) -> float:
        return float(np.abs(self.data).max()) if self.nnz else 0.0

    def max_abs_diff(self, other: "SparseOperator") -> float:
        return (self - other).max_abs()

    def hermiticity_defect(self) -> float:
        """Max-entry norm of O - O^dagger; exactly computable in sparse form."""
        return self.max_abs_diff(self.dagger())


def annihilation(d: int) -> SparseOperator:
    """Bosonic lowering operator on a Fock space truncated at ``d`` levels."""
    if d < 2:
        raise DimensionError(f"annihilation operator needs dimension >= 2, got {d}")
    n = np.arange(1, d, dtype=np.int64)
    return SparseOperator(d, n - 1, n, np.sqrt(n).astype(np.complex128))


_PAULI = {
    "x": ([0, 1], [1, 0], [1.0 + 0j, 1.0 + 0j]),
    "y": ([0, 1], [1, 0], [-1j, 1j]),
    "z": ([0, 1], [0, 1], [1.0 + 0j, -1.0 + 0j]),
}


def pauli(axis: str) -> SparseOperator:
    if axis not in _PAULI:
        raise ValueError(f"pauli axis must be one of x, y, z; got {axis!r}")
    rows, cols, vals = _PAULI[axis]
    return SparseOperator(2, np.array(rows), np.array(cols), np.array(vals))


def kron(a: SparseOperator, b: SparseOperator) -> SparseOperator:
    """Kronecker product; index convention (i*dim_b + k, j*dim_b + l)."""
    if a.nnz == 0 or b.nnz == 0:
        return SparseOperator.zeros(a.dim * b.dim)
    rows = np.repeat(a.rows, b.nnz) * b.dim + np.tile(b.rows, a.nnz)
    cols = np.repeat(a.cols, b.nnz) * b.dim + np.tile(b.cols, a.nnz)
    data = np.repeat(a.data, b.nnz) * np.tile(b.data, a.nnz)
    return SparseOperator(a.dim * b.dim, rows, cols, data, _validated=True)


def kron3(a: SparseOperator, b: SparseOperator, c: SparseOperator) -> SparseOperator:
    return kron(kron(a, b), c)


def embed(op: SparseOperator, slot: str, space: SpaceConfig) -> SparseOperator:
    """Lift a single-subsystem operator to the full space, identity elsewhere."""
    if slot not in SLOTS:
        raise ValueError(f"slot must be one of {SLOTS}, got {slot!r}")
    if op.dim != space.slot_dim(slot):
        raise DimensionError(
            f"operator dim {op.dim} does not match {slot} subsystem dim {space.slot_dim(slot)}"
        )
    parts = [
        SparseOperator.identity(space.n_qubit),
        SparseOperator.identity(space.n_mech),
        SparseOperator.identity(space.n_cav),
    ]
    parts[SLOTS.index(slot)] = op
    return kron3(*parts)


def add(a: SparseOperator, b: SparseOperator) -> SparseOperator:
    return a + b


def scale(factor, op: SparseOperator) -> SparseOperator:
    return op * factor


def matmul(a: SparseOperator, b: SparseOperator) -> SparseOperator:
    return a @ b


def dagger(op: SparseOperator) -> SparseOperator:
    return op.dagger()


@dataclass(frozen=True)
class PureState:
    """State vector; the stochastic wave function evolved by the trajectory solver."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.size < 1:
            raise DimensionError("state amplitudes must form a non-empty vector")
        if not np.all(np.isfinite(amps.real)) or not np.all(np.isfinite(amps.imag)):
            raise ValueError("state amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def validate(self, normalized: bool = True) -> None:
        n2 = self.norm_sq()
        if n2 > 1.0 + 1e-9:
            raise ValueError(f"squared norm {n2} exceeds 1 + 1e-9")
        if normalized and abs(n2 - 1.0) > 1e-9:
            raise ValueError(f"state not normalized: |norm^2 - 1| = {abs(n2 - 1.0):.3e}")

    def normalized(self) -> "PureState":
        n = np.sqrt(self.norm_sq())
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return PureState(self.amplitudes / n)


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state evolved by the master-equation solver."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        mat = np.ascontiguousarray(self.matrix, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionError("density matrix must be square")
        if not np.all(np.isfinite(mat.real)) or not np.all(np.isfinite(mat.imag)):
            raise ValueError("density matrix entries must be finite")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_pure(cls, state: PureState) -> "DensityMatrix":
        return cls(np.outer(state.amplitudes, np.conj(state.amplitudes)))

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def validate(self, check_positivity: bool | None = None) -> None:
        """Hermitian to 1e-10, unit trace to 1e-8, positive to -1e-8.

        The eigenvalue check is dense and is only run by default on dims <= 64.
        """
        if self.hermiticity_defect() > 1e-10:
            raise ValueError(f"hermiticity defect {self.hermiticity_defect():.3e} > 1e-10")
        if abs(self.trace() - 1.0) > 1e-8:
            raise ValueError(f"trace deviates from 1 by {abs(self.trace() - 1.0):.3e}")
        if check_positivity is None:
            check_positivity = self.dim <= 64
        if check_positivity:
            lo = float(np.linalg.eigvalsh(self.matrix).min())
            if lo < -1e-8:
                raise ValueError(f"minimum eigenvalue {lo:.3e} < -1e-8")


def expect(op: SparseOperator, state) -> complex:
    """<psi|O|psi> for pure states, tr(O rho) for density matrices."""
    if isinstance(state, PureState):
        if state.dim != op.dim:
            raise DimensionError(f"state dim {state.dim} vs operator dim {op.dim}")
        return complex(np.vdot(state.amplitudes, op.matvec(state.amplitudes)))
    if isinstance(state, DensityMatrix):
        if state.dim != op.dim:
            raise DimensionError(f"state dim {state.dim} vs operator dim {op.dim}")
        if op.nnz == 0:
            return 0.0 + 0.0j
        return complex(np.sum(op.data * state.matrix[op.cols, op.rows]))
    raise TypeError(f"expect does not handle states of type {type(state).__name__}")


def basis_state(dim: int, n: int) -> PureState:
    if not 0 <= n < dim:
        raise DimensionError(f"basis index {n} outside [0, {dim})")
    amps = np.zeros(dim, dtype=np.complex128)
    amps[n] = 1.0
    return PureState(amps)


def product_state(
    space: SpaceConfig,
    qubit_amplitudes=(1.0, 0.0),
    mech_fock: int = 0,
    cav_fock: int = 0,
) -> PureState:
    """Normalized product state (qubit amplitudes) x |mech_fock> x |cav_fock>."""
    c0, c1 = complex(qubit_amplitudes[0]), complex(qubit_amplitudes[1])
    qnorm = np.sqrt(abs(c0) ** 2 + abs(c1) ** 2)
    if qnorm == 0.0:
        raise ValueError("qubit amplitudes must not both be zero")
    if not 0 <= mech_fock < space.n_mech:
        raise DimensionError(f"mech_fock {mech_fock} outside [0, {space.n_mech})")
    if not 0 <= cav_fock < space.n_cav:
        raise DimensionError(f"cav_fock {cav_fock} outside [0, {space.n_cav})")
    qubit = np.array([c0, c1], dtype=np.complex128) / qnorm
    mech = np.zeros(space.n_mech, dtype=np.complex128)
    mech[mech_fock] = 1.0
    cav = np.zeros(space.n_cav, dtype=np.complex128)
    cav[cav_fock] = 1.0
    return PureState(np.kron(np.kron(qubit, mech), cav))
