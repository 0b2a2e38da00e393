"""Truncated Fock-space linear algebra.

Single-mode spaces keep the levels ``|0>, ..., |n_max>`` (dimension
``d = n_max + 1``).  Two-mode spaces use the product basis with mode 1 as
the slow index, so ``|n1> (x) |n2>`` sits at position ``n1 * d + n2``.

Operators are stored as ``scipy.sparse`` CSR arrays: every operator in this
package (ladder, pseudospin, their tensor products) has at most a few
nonzeros per row, and the cutoffs needed for strong squeezing reach a few
thousand levels per mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ContractError, CutoffError, DimensionError, NumericalIntegrityError

DEFAULT_TAIL_TOL = 1e-12
HERMITIAN_TOL = 1e-12
IMAG_RESIDUE_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_FLOOR = -1e-8


@dataclass(frozen=True)
class FockCutoff:
    """Highest retained Fock level of one mode."""

    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return self.n_max + 1


def _as_cutoff(cutoff) -> FockCutoff:
    return cutoff if isinstance(cutoff, FockCutoff) else FockCutoff(int(cutoff))


def _csr(matrix) -> sp.csr_array:
    return sp.csr_array(matrix, dtype=np.complex128)


def _max_abs(matrix) -> float:
    if sp.issparse(matrix):
        return float(abs(matrix).max()) if matrix.nnz else 0.0
    return float(np.max(np.abs(matrix))) if matrix.size else 0.0


def hermitian_deviation(matrix) -> float:
    """Largest entry of ``|M - M^dagger|``."""
    if sp.issparse(matrix):
        return _max_abs(matrix - matrix.conj().T)
    matrix = np.asarray(matrix)
    return _max_abs(matrix - matrix.conj().T)


@dataclass(frozen=True, eq=False)
class TruncatedOperator:
    """A square operator on one or two truncated modes.

    Two-mode operators created by :func:`kron` remember their factors so that
    expectation values on pure states never materialize the ``d^2 x d^2``
    matrix.
    """

    cutoff: FockCutoff
    mode_count: int
    matrix: Optional[sp.csr_array] = field(default=None, repr=False)
    factors: Optional[tuple["TruncatedOperator", "TruncatedOperator"]] = field(
        default=None, repr=False
    )
    hermitian: bool = False

    def __post_init__(self):
        if self.mode_count not in (1, 2):
            raise DimensionError(f"mode_count must be 1 or 2, got {self.mode_count}")
        if (self.matrix is None) == (self.factors is None):
            raise ValueError("provide exactly one of matrix or factors")
        if self.matrix is not None:
            if self.matrix.shape != (self.dim, self.dim):
                raise DimensionError(
                    f"matrix shape {self.matrix.shape} does not match dim {self.dim}"
                )
            if not np.all(np.isfinite(self.matrix.data)):
                raise NumericalIntegrityError("operator entries must be finite")
        if self.hermitian and self.hermitian_deviation() > HERMITIAN_TOL:
            raise ContractError("operator flagged Hermitian but M != M^dagger")

    @classmethod
    def single(cls, matrix, cutoff, hermitian=False) -> "TruncatedOperator":
        return cls(_as_cutoff(cutoff), 1, matrix=_csr(matrix), hermitian=hermitian)

    @classmethod
    def double(cls, matrix, cutoff, hermitian=False) -> "TruncatedOperator":
        return cls(_as_cutoff(cutoff), 2, matrix=_csr(matrix), hermitian=hermitian)

    @property
    def dim(self) -> int:
        return self.cutoff.dim**self.mode_count

    @cached_property
    def entries(self) -> sp.csr_array:
        if self.matrix is not None:
            return self.matrix
        a, b = self.factors
        return sp.csr_array(sp.kron(a.entries, b.entries, format="csr"))

    def toarray(self) -> np.ndarray:
        return self.entries.toarray()

    def hermitian_deviation(self) -> float:
        if self.factors is not None:
            a, b = self.factors
            bound = a.hermitian_deviation() * _max_abs(b.entries) + _max_abs(
                a.entries
            ) * b.hermitian_deviation()
            if bound <= HERMITIAN_TOL:
                return bound
        return hermitian_deviation(self.entries)

    def adjoint(self) -> "TruncatedOperator":
        return TruncatedOperator(
            self.cutoff,
            self.mode_count,
            matrix=sp.csr_array(self.entries.conj().T),
            hermitian=self.hermitian,
        )

    def trace(self) -> complex:
        return complex(self.entries.diagonal().sum())

    def _check_compatible(self, other: "TruncatedOperator"):
        if self.cutoff != other.cutoff or self.mode_count != other.mode_count:
            raise DimensionError(
                f"incompatible operators: {self.mode_count}-mode n_max={self.cutoff.n_max} "
                f"vs {other.mode_count}-mode n_max={other.cutoff.n_max}"
            )

    def __matmul__(self, other: "TruncatedOperator") -> "TruncatedOperator":
        self._check_compatible(other)
        return TruncatedOperator(
            self.cutoff, self.mode_count, matrix=sp.csr_array(self.entries @ other.entries)
        )

    def __add__(self, other: "TruncatedOperator") -> "TruncatedOperator":
        self._check_compatible(other)
        return TruncatedOperator(
            self.cutoff,
            self.mode_count,
            matrix=sp.csr_array(self.entries + other.entries),
            hermitian=self.hermitian and other.hermitian,
        )

    def __sub__(self, other: "TruncatedOperator") -> "TruncatedOperator":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "TruncatedOperator":
        scalar = complex(scalar)
        return TruncatedOperator(
            self.cutoff,
            self.mode_count,
            matrix=sp.csr_array(self.entries * scalar),
            hermitian=self.hermitian and scalar.imag == 0.0,
        )

    __rmul__ = __mul__

    def __neg__(self) -> "TruncatedOperator":
        return (-1.0) * self


# -- single-mode building blocks -------------------------------------------


def identity(cutoff, mode_count: int = 1) -> TruncatedOperator:
    cutoff = _as_cutoff(cutoff)
    eye = sp.identity(cutoff.dim**mode_count, dtype=np.complex128, format="csr")
    return TruncatedOperator(cutoff, mode_count, matrix=sp.csr_array(eye), hermitian=True)


def annihilation(cutoff) -> TruncatedOperator:
    """Truncated ``a`` with ``a|n> = sqrt(n)|n-1>``."""
    cutoff = _as_cutoff(cutoff)
    n = np.arange(1, cutoff.dim)
    mat = sp.diags_array(np.sqrt(n).astype(np.complex128), offsets=1, shape=(cutoff.dim,) * 2)
    return TruncatedOperator.single(mat, cutoff)


def creation(cutoff) -> TruncatedOperator:
    return annihilation(cutoff).adjoint()


def number(cutoff) -> TruncatedOperator:
    cutoff = _as_cutoff(cutoff)
    mat = sp.diags_array(np.arange(cutoff.dim, dtype=np.complex128))
    return TruncatedOperator.single(mat, cutoff, hermitian=True)


def level_projector(cutoff, levels) -> TruncatedOperator:
    """Projector onto the listed Fock levels."""
    cutoff = _as_cutoff(cutoff)
    diag = np.zeros(cutoff.dim, dtype=np.complex128)
    diag[np.asarray(list(levels), dtype=int)] = 1.0
    return TruncatedOperator.single(sp.diags_array(diag), cutoff, hermitian=True)


def kron(a: TruncatedOperator, b: TruncatedOperator) -> TruncatedOperator:
    """Tensor product ``a (x) b`` of two single-mode operators."""
    if a.mode_count != 1 or b.mode_count != 1:
        raise DimensionError("kron expects two single-mode operators")
    if a.cutoff != b.cutoff:
        raise DimensionError(
            f"cutoff mismatch: n_max={a.cutoff.n_max} vs n_max={b.cutoff.n_max}"
        )
    return TruncatedOperator(
        a.cutoff, 2, factors=(a, b), hermitian=a.hermitian and b.hermitian
    )


def on_mode(op: TruncatedOperator, mode: int) -> TruncatedOperator:
    """Embed a single-mode operator on mode 0 or 1 of the two-mode space."""
    eye = identity(op.cutoff)
    return kron(op, eye) if mode == 0 else kron(eye, op)


# -- states ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TwoModeState:
    """A bipartite state on ``d^2`` levels, stored as a ket or a density matrix.

    This is a plain container; use :func:`pure_state` or :func:`mixed_state`
    to get renormalized, validated instances.
    """

    cutoff: FockCutoff
    vector: Optional[np.ndarray] = field(default=None, repr=False)
    density: Optional[sp.csr_array] = field(default=None, repr=False)
    tail_mass: float = 0.0
    family: str = "custom"
    offsets: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if (self.vector is None) == (self.density is None):
            raise ValueError("provide exactly one of vector or density")
        dim = self.cutoff.dim**2
        if self.vector is not None and self.vector.shape != (dim,):
            raise DimensionError(f"vector must have length {dim}")
        if self.density is not None and self.density.shape != (dim, dim):
            raise DimensionError(f"density must be {dim}x{dim}")

    @property
    def is_pure(self) -> bool:
        return self.vector is not None

    @property
    def dim(self) -> int:
        return self.cutoff.dim**2

    def amplitudes(self) -> np.ndarray:
        """The ket reshaped to a ``d x d`` matrix indexed by ``(n1, n2)``."""
        if not self.is_pure:
            raise ContractError("amplitudes are only defined for pure states")
        d = self.cutoff.dim
        return self.vector.reshape(d, d)

    def density_matrix(self) -> sp.csr_array:
        if self.is_pure:
            v = sp.csr_array(self.vector.reshape(-1, 1))
            return sp.csr_array(v @ v.conj().T)
        return self.density

    def populations(self) -> np.ndarray:
        """Joint photon-number distribution ``P(n1, n2)`` as a ``d x d`` array."""
        d = self.cutoff.dim
        if self.is_pure:
            return (np.abs(self.vector) ** 2).reshape(d, d)
        return self.density.diagonal().real.reshape(d, d)


def pure_state(
    amplitudes,
    cutoff,
    tail_mass: float = 0.0,
    *,
    family: str = "custom",
    offsets=(0, 0),
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> TwoModeState:
    """Normalize a ket (length ``d^2`` or shape ``(d, d)``) into a validated state."""
    cutoff = _as_cutoff(cutoff)
    vec = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ContractError("state vector vanishes")
    state = TwoModeState(
        cutoff, vector=vec / norm, tail_mass=float(tail_mass), family=family,
        offsets=tuple(offsets),
    )
    _validate(state, tail_tol)
    return state


def mixed_state(
    density,
    cutoff,
    tail_mass: float = 0.0,
    *,
    family: str = "custom",
    offsets=(0, 0),
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> TwoModeState:
    """Trace-normalize a density matrix into a validated state."""
    cutoff = _as_cutoff(cutoff)
    rho = _csr(density)
    tr = rho.diagonal().sum().real
    if tr <= 0.0:
        raise ContractError("density matrix has non-positive trace")
    state = TwoModeState(
        cutoff, density=sp.csr_array(rho / tr), tail_mass=float(tail_mass), family=family,
        offsets=tuple(offsets),
    )
    _validate(state, tail_tol)
    return state


@dataclass(frozen=True)
class StateDiagnostics:
    trace_deviation: float
    hermiticity_deviation: float
    min_eigenvalue: float
    tail_mass: float

    def violations(self, tail_tol: float = DEFAULT_TAIL_TOL) -> list[str]:
        out = []
        if self.trace_deviation > TRACE_TOL:
            out.append(f"trace deviates from 1 by {self.trace_deviation:.3e}")
        if self.hermiticity_deviation > TRACE_TOL:
            out.append(f"Hermiticity deviation {self.hermiticity_deviation:.3e}")
        if self.min_eigenvalue < PSD_FLOOR:
            out.append(f"minimum eigenvalue {self.min_eigenvalue:.3e}")
        if self.tail_mass > tail_tol:
            out.append(f"tail mass {self.tail_mass:.3e} exceeds {tail_tol:.1e}")
        return out

    @property
    def ok(self) -> bool:
        return not self.violations()


def _min_eigenvalue(rho: sp.csr_array) -> float:
    # Block-diagonalize by the sparsity graph; each block is solved densely.
    n_blocks, labels = connected_components(abs(rho) > 0, directed=False)
    sizes = np.bincount(labels, minlength=n_blocks)
    diag = rho.diagonal().real
    lowest = np.inf
    singles = sizes[labels] == 1
    if singles.any():
        lowest = float(diag[singles].min())
    for block in np.flatnonzero(sizes > 1):
        idx = np.flatnonzero(labels == block)
        sub = rho[idx][:, idx].toarray()
        sub = 0.5 * (sub + sub.conj().T)
        lowest = min(lowest, float(scipy.linalg.eigvalsh(sub, subset_by_index=(0, 0))[0]))
    return lowest


def check_state(state: TwoModeState) -> StateDiagnostics:
    """Report trace, Hermiticity, positivity and truncation diagnostics."""
    if state.is_pure:
        norm2 = float(np.vdot(state.vector, state.vector).real)
        return StateDiagnostics(
            trace_deviation=abs(norm2 - 1.0),
            hermiticity_deviation=0.0,
            min_eigenvalue=0.0,
            tail_mass=state.tail_mass,
        )
    rho = state.density
    return StateDiagnostics(
        trace_deviation=abs(complex(rho.diagonal().sum()) - 1.0),
        hermiticity_deviation=hermitian_deviation(rho),
        min_eigenvalue=_min_eigenvalue(rho),
        tail_mass=state.tail_mass,
    )


def _validate(state: TwoModeState, tail_tol: float):
    problems = check_state(state).violations(tail_tol)
    if any(p.startswith("tail mass") for p in problems):
        raise CutoffError(f"n_max={state.cutoff.n_max}: " + "; ".join(problems))
    if problems:
        raise ContractError("invalid state: " + "; ".join(problems))


# -- expectation values ----------------------------------------------------


def trace_product(op: TruncatedOperator, state: TwoModeState) -> complex:
    """``Tr[op rho]`` with no Hermiticity or residue checks."""
    if op.mode_count != 2 or op.cutoff != state.cutoff:
        raise DimensionError(
            f"operator ({op.mode_count}-mode, n_max={op.cutoff.n_max}) does not act on "
            f"state with n_max={state.cutoff.n_max}"
        )
    if state.is_pure:
        if op.factors is not None:
            a, b = (f.entries for f in op.factors)
            psi = state.amplitudes()
            # (A (x) B) vec(Psi) = vec(A Psi B^T) for the row-major layout
            return complex(np.vdot(psi, (a @ (b @ psi.T).T)))
        return complex(np.vdot(state.vector, op.entries @ state.vector))
    return complex(op.entries.multiply(state.density.T).sum())


def expect(op: TruncatedOperator, state: TwoModeState) -> float:
    """Real expectation value of a Hermitian two-mode operator."""
    if op.hermitian_deviation() > HERMITIAN_TOL:
        raise ContractError("expect requires a Hermitian operator")
    value = trace_product(op, state)
    if abs(value.imag) > IMAG_RESIDUE_TOL:
        raise NumericalIntegrityError(
            f"expectation value has imaginary residue {value.imag:.3e}"
        )
    return value.real


def weight_below(state: TwoModeState, mode: int, level: int) -> float:
    """Probability that ``mode`` holds fewer than ``level`` photons."""
    if level <= 0:
        return 0.0
    pops = state.populations()
    marginal = pops.sum(axis=1 - mode)
    return float(marginal[:level].sum())
