"""Generalized pseudospin observables on a truncated Fock space.

For an offset ``q`` the levels ``q, q+1, ...`` are grouped into pairs
``(2n+q, 2n+q+1)``.  Within each pair ``s_x`` flips the levels, ``s_z`` is
``-1`` on the lower and ``+1`` on the upper level.  Only complete pairs are
retained: the levels below ``q`` and an unpaired top level are outside the
support, where all three operators vanish.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from . import fock
from .errors import ContractError, ParameterError
from .fock import FockCutoff, TruncatedOperator


@dataclass(frozen=True, eq=False)
class SpinTriple:
    q: int
    cutoff: FockCutoff
    sx: TruncatedOperator
    sy: TruncatedOperator
    sz: TruncatedOperator
    support: TruncatedOperator

    @property
    def s_plus(self) -> TruncatedOperator:
        return 0.5 * (self.sx + 1j * self.sy)

    @property
    def s_minus(self) -> TruncatedOperator:
        return 0.5 * (self.sx - 1j * self.sy)

    def component(self, axis: int) -> TruncatedOperator:
        """``s_x, s_y, s_z`` for ``axis`` = 0, 1, 2."""
        return (self.sx, self.sy, self.sz)[axis]

    def along(self, vector) -> TruncatedOperator:
        nx, ny, nz = vector
        return nx * self.sx + ny * self.sy + nz * self.sz

    def paired_levels(self) -> np.ndarray:
        return support_levels(self.q, self.cutoff)


def support_levels(q: int, cutoff) -> np.ndarray:
    """Fock levels belonging to a complete ``(2n+q, 2n+q+1)`` pair."""
    cutoff = fock._as_cutoff(cutoff)
    n_pairs = (cutoff.n_max - q + 1) // 2
    return np.arange(q, q + 2 * n_pairs)


@lru_cache(maxsize=64)
def _build_spin_cached(q: int, cutoff: FockCutoff) -> SpinTriple:
    d = cutoff.dim
    levels = support_levels(q, cutoff)
    lower, upper = levels[0::2], levels[1::2]
    ones = np.ones(lower.size, dtype=np.complex128)

    def mat(rows, cols, vals):
        return sp.csr_array((vals, (rows, cols)), shape=(d, d), dtype=np.complex128)

    sx = mat(np.r_[lower, upper], np.r_[upper, lower], np.r_[ones, ones])
    sy = mat(np.r_[lower, upper], np.r_[upper, lower], np.r_[1j * ones, -1j * ones])
    sz = mat(np.r_[upper, lower], np.r_[upper, lower], np.r_[ones, -ones])
    supp = mat(levels, levels, np.ones(levels.size, dtype=np.complex128))
    op = lambda m: TruncatedOperator.single(m, cutoff, hermitian=True)  # noqa: E731
    return SpinTriple(q, cutoff, op(sx), op(sy), op(sz), op(supp))


def build_spin(q: int, cutoff) -> SpinTriple:
    """Pseudospin operators with parity offset ``q``.

    Raises
    ------
    ParameterError
        If ``q`` is not in ``[0, n_max - 1]``.
    """
    cutoff = fock._as_cutoff(cutoff)
    if int(q) != q or not 0 <= q <= cutoff.n_max - 1:
        raise ParameterError(f"q must satisfy 0 <= q <= n_max-1={cutoff.n_max - 1}, got {q}")
    return _build_spin_cached(int(q), cutoff)


@dataclass(frozen=True)
class MeasurementSetting:
    """Direction ``(sin t cos p, sin t sin p, cos t)`` of a pseudospin measurement."""

    theta: float
    phi: float = 0.0
    q: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.theta) and np.isfinite(self.phi)):
            raise ParameterError("measurement angles must be finite")

    @property
    def vector(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.array([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])


def spin_direction(setting: MeasurementSetting, spin: SpinTriple) -> TruncatedOperator:
    """``cos(theta) s_z + sin(theta) (e^{i phi} s_- + e^{-i phi} s_+)``."""
    if setting.q != spin.q:
        raise ContractError(f"setting has q={setting.q} but spin triple has q={spin.q}")
    ct, st = np.cos(setting.theta), np.sin(setting.theta)
    ladder = np.exp(1j * setting.phi) * spin.s_minus + np.exp(-1j * setting.phi) * spin.s_plus
    op = ct * spin.sz + st * ladder
    # the ladder combination is Hermitian by construction; strip roundoff
    herm = 0.5 * (op.entries + op.entries.conj().T)
    return TruncatedOperator.single(herm, spin.cutoff, hermitian=True)


def rotate_spin(tau: float, axis, spin: SpinTriple) -> TruncatedOperator:
    """The pseudospin rotation ``exp(-i tau/2 n.s)``.

    On the paired levels this is ``cos(tau/2) - i sin(tau/2) n.s``; levels
    outside the support, where ``n.s`` vanishes, are left untouched.
    """
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > 1e-12:
        raise ParameterError("rotation axis must be a unit 3-vector")
    eye = fock.identity(spin.cutoff)
    return (
        (eye - spin.support)
        + np.cos(tau / 2) * spin.support
        - 1j * np.sin(tau / 2) * spin.along(axis)
    )


# -- parity qubits and Bob's measurements -----------------------------------


@dataclass(frozen=True, eq=False)
class ParityQubitBasis:
    """Coefficients ``A_n`` of ``|+> = sum A_n |2n+q>``, ``|-> = sum A_n |2n+q+1>``."""

    coefficients: np.ndarray
    q: int = 0

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=np.complex128)
        object.__setattr__(self, "coefficients", coeffs)
        if abs(np.sum(np.abs(coeffs) ** 2) - 1.0) > 1e-12:
            raise ParameterError("parity-qubit coefficients must satisfy sum |A_n|^2 = 1")

    def _ket(self, cutoff: FockCutoff, shift: int) -> np.ndarray:
        levels = 2 * np.arange(self.coefficients.size) + self.q + shift
        if levels[-1] > cutoff.n_max:
            raise ParameterError(
                f"basis needs level {levels[-1]} but n_max={cutoff.n_max}"
            )
        ket = np.zeros(cutoff.dim, dtype=np.complex128)
        ket[levels] = self.coefficients
        return ket

    def plus(self, cutoff) -> np.ndarray:
        return self._ket(fock._as_cutoff(cutoff), 0)

    def minus(self, cutoff) -> np.ndarray:
        return self._ket(fock._as_cutoff(cutoff), 1)


class BellAnalogues(NamedTuple):
    phi_plus: fock.TwoModeState
    phi_minus: fock.TwoModeState
    psi_plus: fock.TwoModeState
    psi_minus: fock.TwoModeState


def bell_analogues(basis1: ParityQubitBasis, basis2: ParityQubitBasis, cutoff) -> BellAnalogues:
    """Bell-state analogues built from the parity qubits of both modes."""
    cutoff = fock._as_cutoff(cutoff)
    p1, m1 = basis1.plus(cutoff), basis1.minus(cutoff)
    p2, m2 = basis2.plus(cutoff), basis2.minus(cutoff)
    pp, mm = np.kron(p1, p2), np.kron(m1, m2)
    pm, mp = np.kron(p1, m2), np.kron(m1, p2)
    mk = lambda v: fock.pure_state(v, cutoff, family="bell")  # noqa: E731
    return BellAnalogues(mk(pp + mm), mk(pp - mm), mk(pm + mp), mk(pm - mp))


def partial_bell_measurement(bells: BellAnalogues, y: int) -> TruncatedOperator:
    """Bob's two-outcome observable written as a signed sum of Bell projectors.

    ``y = 0`` separates ``Phi`` (+1) from ``Psi`` (-1); ``y = 1`` separates
    the ``+`` combinations (+1) from the ``-`` ones (-1).
    """
    signs = {0: (1, 1, -1, -1), 1: (1, -1, 1, -1)}[y]
    cutoff = bells.phi_plus.cutoff
    total = None
    for sign, state in zip(signs, bells):
        proj = sign * state.density_matrix()
        total = proj if total is None else total + proj
    return TruncatedOperator.double(total, cutoff, hermitian=True)


def bob_observables(q_left: int, q_right: int, cutoff) -> tuple[TruncatedOperator, TruncatedOperator]:
    """``B0 = s_z (x) s_z`` and ``B1 = s_x (x) s_x`` on Bob's two modes."""
    left, right = build_spin(q_left, cutoff), build_spin(q_right, cutoff)
    return fock.kron(left.sz, right.sz), fock.kron(left.sx, right.sx)
