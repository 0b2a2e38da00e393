"""Finite-shot simulation of the three-party network.

Each source contributes a joint distribution over Alice's (or Charlie's)
outcome and the outcome of Bob's one-mode observable on his half.  Bob's
reported outcome is the product of his two one-mode outcomes, which is
exactly the measurement of ``s_z (x) s_z`` or ``s_x (x) s_x``.

Outcome tables are indexed ``[a, b, c]`` with index 0 for outcome +1 and
index 1 for outcome -1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import fock
from .biloc import Scenario
from .errors import NumericalIntegrityError, ParameterError
from .pseudospin import MeasurementSetting, spin_direction

OUTCOMES = (1, -1)
NEGATIVE_TOL = 1e-10
BLOCK_SHOTS = 1 << 16

# (x, y, z) in a fixed order; the stream key of each setting is its index here
SETTINGS = tuple(itertools.product(range(2), range(2), range(2)))
_SIGNS = np.array([[[a * b * c for c in OUTCOMES] for b in OUTCOMES] for a in OUTCOMES], dtype=float)


@dataclass(frozen=True)
class ShotPlan:
    shots_per_setting: int
    seed: int = 0

    def __post_init__(self):
        if int(self.shots_per_setting) != self.shots_per_setting or self.shots_per_setting < 1:
            raise ParameterError("shots_per_setting must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SampleEstimate:
    I_hat: float
    J_hat: float
    S_hat: float
    std_err_I: float
    std_err_J: float
    std_err_S: float
    shots: int
    seed: int


def _bipartite_table(state, left, right, obs_left, obs_right) -> np.ndarray:
    """``p(a, b)`` for two-outcome observables restricted to the paired levels."""

    def tr(op_l, op_r):
        return fock.expect(fock.kron(op_l, op_r), state)

    norm = tr(left.support, right.support)
    a_mean = tr(obs_left, right.support)
    b_mean = tr(left.support, obs_right)
    ab = tr(obs_left, obs_right)
    table = np.empty((2, 2))
    for (i, a), (j, b) in itertools.product(enumerate(OUTCOMES), repeat=2):
        table[i, j] = (norm + a * a_mean + b * b_mean + a * b * ab) / (4 * norm)
    return table


def _clamp(table: np.ndarray) -> np.ndarray:
    low = table.min()
    if low < -NEGATIVE_TOL:
        raise NumericalIntegrityError(f"negative outcome probability {low:.3e}")
    table = np.clip(table, 0.0, None)
    return table / table.sum()


def outcome_distribution(
    sc: Scenario, theta1: float, theta2: float, x: int, y: int, z: int,
    phi1: float = 0.0, phi2: float = 0.0,
) -> np.ndarray:
    """Joint table ``p(A, B, C | x, y, z)`` as a ``2 x 2 x 2`` array."""
    if {x, y, z} - {0, 1}:
        raise ParameterError("inputs x, y, z must be 0 or 1")
    alice = spin_direction(MeasurementSetting(theta1, (phi1 + x * math.pi) % (2 * math.pi), sc.offsets[0]), sc.spin_a)
    charlie = spin_direction(MeasurementSetting(theta2, (phi2 + z * math.pi) % (2 * math.pi), sc.offsets[3]), sc.spin_c)
    bob_axis = 2 if y == 0 else 0
    p_ab = _bipartite_table(sc.rho_ab, sc.spin_a, sc.spin_b1, alice, sc.spin_b1.component(bob_axis))
    p_bc = _bipartite_table(sc.rho_bc, sc.spin_b2, sc.spin_c, sc.spin_b2.component(bob_axis), charlie)
    table = np.zeros((2, 2, 2))
    for (i, _), (jl, bl), (jr, br), (k, _) in itertools.product(enumerate(OUTCOMES), repeat=4):
        j = OUTCOMES.index(bl * br)
        table[i, j, k] += p_ab[i, jl] * p_bc[jr, k]
    return _clamp(table)


def product_mean(table: np.ndarray) -> float:
    """``<A B C>`` of an outcome table, by direct summation."""
    return float(np.sum(_SIGNS * table))


def _stream(seed: int, setting: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, setting, block])))


def sample_counts(table: np.ndarray, shots: int, seed: int, setting: int) -> np.ndarray:
    """Outcome counts for one setting, drawn in fixed-size blocks of independent streams."""
    probs = table.reshape(-1)
    counts = np.zeros(8, dtype=np.int64)
    for block, start in enumerate(range(0, shots, BLOCK_SHOTS)):
        n = min(BLOCK_SHOTS, shots - start)
        counts += _stream(seed, setting, block).multinomial(n, probs)
    return counts.reshape(2, 2, 2)


def _root_error(value: float, se: float) -> float:
    # delta method for sqrt|v|; at v = 0 fall back to the scale of sqrt(se)
    if value == 0.0:
        return math.sqrt(se)
    return se / (2.0 * math.sqrt(abs(value)))


def run_shots(sc: Scenario, angles, plan: ShotPlan) -> SampleEstimate:
    """Estimate ``I``, ``J`` and ``S`` from simulated runs at the given angles.

    ``angles`` is ``(theta1, theta2)`` or ``(theta1, theta2, phi1, phi2)``.
    Each of the eight ``(x, y, z)`` settings receives ``shots_per_setting``
    runs; ``y = 0`` runs feed ``I`` and ``y = 1`` runs feed ``J``.
    """
    theta1, theta2, *phis = angles
    phi1, phi2 = phis if phis else (0.0, 0.0)
    n = plan.shots_per_setting
    i_hat = j_hat = var_i = var_j = 0.0
    for index, (x, y, z) in enumerate(SETTINGS):
        table = outcome_distribution(sc, theta1, theta2, x, y, z, phi1, phi2)
        counts = sample_counts(table, n, plan.seed, index)
        mean = float(np.sum(_SIGNS * counts)) / n
        # single-shot products are +-1, so their variance is 1 - mean^2
        var = (1.0 - mean * mean) / n
        if y == 0:
            i_hat += mean
            var_i += var
        else:
            j_hat += (-1) ** (x + z) * mean
            var_j += var
    se_i, se_j = math.sqrt(var_i), math.sqrt(var_j)
    s_hat = math.sqrt(abs(i_hat)) + math.sqrt(abs(j_hat))
    se_s = math.hypot(_root_error(i_hat, se_i), _root_error(j_hat, se_j))
    return SampleEstimate(i_hat, j_hat, s_hat, se_i, se_j, se_s, n, int(plan.seed))
