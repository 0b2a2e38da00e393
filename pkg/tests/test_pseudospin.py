import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvbiloc import fock, states
from cvbiloc.errors import ContractError, ParameterError
from cvbiloc.fock import FockCutoff
from cvbiloc.pseudospin import (
    MeasurementSetting,
    ParityQubitBasis,
    bell_analogues,
    bob_observables,
    build_spin,
    partial_bell_measurement,
    rotate_spin,
    spin_direction,
    support_levels,
)

angles = st.floats(0.0, np.pi)
azimuths = st.floats(0.0, 2 * np.pi)


def interior(matrix, q, n_max):
    """Block on levels [q, n_max - 2], away from the truncation edge."""
    return matrix[q:n_max - 1, q:n_max - 1]


def test_two_level_reduction():
    s = build_spin(0, FockCutoff(1))
    assert np.array_equal(s.sz.toarray(), np.diag([-1, 1]))
    assert np.array_equal(s.sx.toarray(), [[0, 1], [1, 0]])


def test_offset_one_leaves_vacuum_unaddressed():
    s = build_spin(1, FockCutoff(2))
    assert np.array_equal(s.sz.toarray().real, np.diag([0, -1, 1]))


def test_q0_sz_is_minus_parity():
    n_max = 9
    s = build_spin(0, FockCutoff(n_max))
    parity = (-1.0) ** np.arange(n_max + 1)
    assert np.array_equal(np.diag(s.sz.toarray()).real, -parity)


def test_unpaired_top_level_is_outside_support():
    s = build_spin(0, FockCutoff(4))
    assert list(support_levels(0, FockCutoff(4))) == [0, 1, 2, 3]
    assert s.sz.toarray()[4, 4] == 0


def test_build_spin_rejects_bad_offset():
    with pytest.raises(ParameterError):
        build_spin(5, FockCutoff(5))
    with pytest.raises(ParameterError):
        build_spin(-1, FockCutoff(5))


@pytest.mark.parametrize("q", [0, 1, 2])
def test_commutators_on_interior(q):
    n_max = 21
    s = build_spin(q, FockCutoff(n_max))
    sp_, sm, sz = s.s_plus.toarray(), s.s_minus.toarray(), s.sz.toarray()
    for got, want in (
        (sz @ sp_ - sp_ @ sz, 2 * sp_),
        (sz @ sm - sm @ sz, -2 * sm),
        (sp_ @ sm - sm @ sp_, sz),
    ):
        assert np.max(np.abs(interior(got - want, q, n_max))) <= 1e-10


@pytest.mark.parametrize("q", [0, 1, 2])
def test_components_hermitian(q):
    s = build_spin(q, FockCutoff(12))
    for comp in (s.sx, s.sy, s.sz):
        assert comp.hermitian_deviation() <= 1e-12


def test_special_directions():
    s = build_spin(0, FockCutoff(1))
    assert np.allclose(spin_direction(MeasurementSetting(0.0), s).toarray(), s.sz.toarray())
    assert np.allclose(spin_direction(MeasurementSetting(np.pi / 2), s).toarray(), s.sx.toarray())
    quarter = spin_direction(MeasurementSetting(np.pi / 4), s).toarray()
    assert np.allclose(quarter, np.array([[-1, 1], [1, 1]]) / np.sqrt(2), atol=1e-15)


def test_setting_offset_mismatch():
    with pytest.raises(ContractError):
        spin_direction(MeasurementSetting(0.3, 0.0, q=1), build_spin(0, FockCutoff(4)))


@given(theta=angles, phi=azimuths, q=st.sampled_from([0, 1, 2]))
@settings(max_examples=30, deadline=None)
def test_direction_squares_to_support(theta, phi, q):
    s = build_spin(q, FockCutoff(11))
    op = spin_direction(MeasurementSetting(theta, phi, q), s).toarray()
    assert np.max(np.abs(op @ op - s.support.toarray())) <= 1e-10
    assert np.max(np.abs(op - op.conj().T)) <= 1e-12


def test_rotation_special_angles():
    s = build_spin(1, FockCutoff(9))
    supp = s.support.toarray()
    eye = np.eye(10)
    assert np.allclose(rotate_spin(0.0, (0, 0, 1), s).toarray(), eye)
    full = rotate_spin(2 * np.pi, (0, 0, 1), s).toarray()
    assert np.allclose(full, eye - 2 * supp, atol=1e-12)
    u = rotate_spin(np.pi, (0, 0, 1), s).toarray()
    assert np.max(np.abs(u @ s.sx.toarray() @ u.conj().T + s.sx.toarray())) <= 1e-10


def test_rotation_rejects_non_unit_axis():
    with pytest.raises(ParameterError):
        rotate_spin(0.1, (1, 1, 0), build_spin(0, FockCutoff(3)))


@given(tau=st.floats(-2 * np.pi, 2 * np.pi), q=st.sampled_from([0, 1, 2]))
@settings(max_examples=25, deadline=None)
def test_rotation_about_z_turns_sx_towards_sy(tau, q):
    s = build_spin(q, FockCutoff(12))
    u = rotate_spin(tau, (0, 0, 1), s).toarray()
    rotated = u @ s.sx.toarray() @ u.conj().T
    want = np.cos(tau) * s.sx.toarray() + np.sin(tau) * s.sy.toarray()
    assert np.max(np.abs(rotated - want)) <= 1e-10
    assert np.max(np.abs(u.conj().T @ u - np.eye(13))) <= 1e-10


def test_bell_analogues_two_level():
    c = FockCutoff(1)
    b = ParityQubitBasis([1.0])
    bells = bell_analogues(b, b, c)
    r2 = 1 / np.sqrt(2)
    assert np.allclose(bells.phi_plus.vector, [r2, 0, 0, r2])
    assert np.allclose(bells.phi_minus.vector, [r2, 0, 0, -r2])
    assert np.allclose(bells.psi_plus.vector, [0, r2, r2, 0])
    assert np.allclose(bells.psi_minus.vector, [0, r2, -r2, 0])


def test_bell_analogues_orthonormal_and_phi_plus_parity():
    c = FockCutoff(7)
    b1 = ParityQubitBasis(np.array([0.6, 0.0, 0.8j, 0.0]))
    b2 = ParityQubitBasis(np.array([1.0, 1.0, -1.0]) / np.sqrt(3))
    bells = bell_analogues(b1, b2, c)
    vecs = np.array([s.vector for s in bells])
    assert np.max(np.abs(vecs.conj() @ vecs.T - np.eye(4))) <= 1e-12
    b0, _ = bob_observables(0, 0, c)
    assert fock.expect(b0, bells.phi_plus) == pytest.approx(1.0, abs=1e-12)


def test_parity_basis_rejects_unnormalized():
    with pytest.raises(ParameterError):
        ParityQubitBasis([1.0, 1.0])


def test_partial_bell_measurement_matches_bob_observables_on_qubit_subspace():
    c = FockCutoff(7)
    b1 = ParityQubitBasis(np.array([0.6, 0.0, 0.8j, 0.0]))
    b2 = ParityQubitBasis(np.array([1.0, 2.0, 2.0]) / 3)
    bells = bell_analogues(b1, b2, c)
    kets = [np.kron(u, v) for u in (b1.plus(c), b1.minus(c)) for v in (b2.plus(c), b2.minus(c))]
    proj = sum(np.outer(k, k.conj()) for k in kets)
    for y, bob in enumerate(bob_observables(0, 0, c)):
        bsm = partial_bell_measurement(bells, y).toarray()
        restricted = proj @ bob.toarray() @ proj
        assert np.max(np.abs(bsm - restricted)) <= 1e-12


def test_bob_observables_commute_while_factors_anticommute():
    c = FockCutoff(5)
    b0, b1 = bob_observables(0, 0, c)
    assert np.max(np.abs((b0 @ b1 - b1 @ b0).toarray())) == 0.0
    s = build_spin(0, c)
    anti = (s.sz @ s.sx + s.sx @ s.sz).toarray()
    assert np.max(np.abs(anti)) == 0.0
    assert np.max(np.abs((s.sz @ s.sx).toarray())) == 1.0


@pytest.mark.parametrize("r", [0.1, 0.7, 1.5])
def test_b0_on_tmsv_is_one(r):
    state = states.tmsv(r)
    b0, _ = bob_observables(0, 0, state.cutoff)
    assert fock.expect(b0, state) == pytest.approx(1.0, abs=1e-12)


def test_bob_observables_square_to_identity_on_support():
    c = FockCutoff(6)
    for q_l, q_r in ((0, 0), (1, 0), (2, 1)):
        b0, b1 = bob_observables(q_l, q_r, c)
        supp = np.kron(build_spin(q_l, c).support.toarray(), build_spin(q_r, c).support.toarray())
        for b in (b0, b1):
            m = b.toarray()
            assert np.max(np.abs(m @ m - supp)) <= 1e-12
