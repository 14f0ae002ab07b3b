import numpy as np
import pytest

from rcmeas.channels import kraus_to_superop
from rcmeas.errors import DimensionError, DomainError
from rcmeas.instruments import apply, confusion_matrix, ideal_subsystem_measurement
from rcmeas.noise import (
    IndirectMeasurementSpec,
    cnot,
    conditional_projector_unitary,
    confusion_closed_form,
    eigenvector,
    first_order_kraus,
    indirect_kraus,
    indirect_measurement,
    instrument_leakage_report,
    j0_closed_form,
    jk_operator,
    leakage_report,
    overrotated_cx,
    overrotated_readout_spec,
    simplified_rc_readout_instrument,
    weyl_indirect_measurement,
    weyl_indirect_spec,
    weyl_measurement_kraus,
)
from rcmeas.rc import rc_average_exact
from rcmeas.weyl import QuditDims, chi, computational_projector, x_matrix, z_matrix

Q1 = QuditDims(2, 1)


def test_overrotated_cx_examples():
    assert np.allclose(overrotated_cx(0.0), np.eye(4))
    want = np.kron(np.diag([1, 0]), np.eye(2)) - 1j * np.kron(np.diag([0, 1]), x_matrix(2))
    assert np.allclose(overrotated_cx(np.pi / 2), want)
    assert np.allclose(cnot(), np.eye(4)[[0, 1, 3, 2]])


@pytest.mark.parametrize("phi", [0.0, 0.3, 1.1])
def test_overrotated_readout_kraus_operators(phi):
    K = indirect_kraus(overrotated_readout_spec(phi))
    assert np.allclose(K[(0,)], np.diag([1, np.cos(phi)]), atol=1e-15)
    assert np.allclose(K[(1,)], np.diag([0, -1j * np.sin(phi)]), atol=1e-15)


@pytest.mark.parametrize("phi", [0.2, np.pi / 4, 1.4])
def test_overrotated_state_on_plus_input(phi):
    plus = np.array([1, 1]) / np.sqrt(2)
    out = overrotated_cx(phi) @ np.kron(plus, [1, 0])
    want = np.array([1, 0, np.cos(phi), -1j * np.sin(phi)]) / np.sqrt(2)
    assert np.max(np.abs(out - want)) <= 1e-12


def test_cnot_readout_is_the_ideal_measurement():
    inst = indirect_measurement(IndirectMeasurementSpec(Q1, Q1, cnot()))
    assert inst.distance(ideal_subsystem_measurement(None, Q1, (0,))) < 1e-12


def test_conditional_unitary_from_computational_projectors_is_cnot():
    P = [computational_projector((k,), 2) for k in range(2)]
    assert np.allclose(conditional_projector_unitary(P), cnot())


def test_conditional_unitary_qutrit_is_unitary():
    P = [computational_projector((k,), 3) for k in range(3)]
    V = conditional_projector_unitary(P, 3)
    assert np.allclose(V.conj().T @ V, np.eye(9))


def test_conditional_unitary_rejects_bad_projectors():
    with pytest.raises(DomainError):
        conditional_projector_unitary([np.eye(2), np.eye(2)])
    with pytest.raises(DomainError):
        conditional_projector_unitary([np.diag([1, 0]), np.diag([1, 0])])
    with pytest.raises(DimensionError):
        conditional_projector_unitary([computational_projector((k,), 3) for k in range(3)], 2)


def test_parity_readout_leaves_bell_state_intact():
    even = np.diag([1.0, 0, 0, 1])
    V = conditional_projector_unitary([even, np.eye(4) - even], 2)
    inst = indirect_measurement(IndirectMeasurementSpec(QuditDims(2, 2), Q1, V))
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    rho = np.outer(bell, bell)
    recs = apply(inst, rho)
    assert recs[0].probability == pytest.approx(1)
    assert np.allclose(recs[0].post_state, rho, atol=1e-12)
    assert recs[1].negligible


def test_weyl_readout_of_qutrit_z_gives_basis_projectors():
    inst = weyl_indirect_measurement(z_matrix(3), 1.0)
    for k in range(3):
        want = kraus_to_superop([computational_projector((k,), 3)], QuditDims(3, 1))
        assert inst.branches[(k,)].distance(want) < 1e-12


def test_weyl_readout_of_two_qubit_xx_gives_rank_two_projectors():
    XX = np.kron(x_matrix(2), x_matrix(2))
    K = indirect_kraus(weyl_indirect_spec(XX, 1.0))
    assert np.allclose(K[(0,)], (np.eye(4) + XX) / 2, atol=1e-12)
    assert np.allclose(K[(1,)], (np.eye(4) - XX) / 2, atol=1e-12)
    assert [np.linalg.matrix_rank(K[(k,)]) for k in range(2)] == [2, 2]


@pytest.mark.parametrize("d,t", [(2, 1.2), (3, 0.7), (4, 1.05), (5, 1.0)])
def test_weyl_readout_is_complete_and_matches_closed_form(d, t):
    A = z_matrix(d)
    K = indirect_kraus(weyl_indirect_spec(A, t, d))
    closed = weyl_measurement_kraus(A, t, d)
    total = sum(M.conj().T @ M for M in K.values())
    assert np.allclose(total, np.eye(d), atol=1e-12)
    for k in range(d):
        assert np.allclose(K[(k,)], closed[k], atol=1e-12)


def _first_order_error(A, d, eps):
    exact = weyl_measurement_kraus(A, 1 + eps, d)
    return max(np.max(np.abs(exact[k] - first_order_kraus(A, 1 + eps, k, d))) for k in range(d))


@pytest.mark.parametrize("d", [3, 4, 5])
@pytest.mark.parametrize("eps", [1e-2, 1e-3])
def test_first_order_error_is_quadratic(d, eps):
    A = z_matrix(d)
    ratio = _first_order_error(A, d, eps) / _first_order_error(A, d, eps / 2)
    assert 3.5 <= ratio <= 4.5


@pytest.mark.parametrize("d", range(2, 7))
@pytest.mark.parametrize("gen", ["z", "x"])
def test_j0_eigenvalue_on_first_eigenvector(d, gen):
    A = z_matrix(d) if gen == "z" else x_matrix(d)
    psi = eigenvector(A, 1, d)
    out = jk_operator(A, 0, d) @ psi
    assert np.linalg.norm(out - j0_closed_form(d) * psi) <= 1e-9


@pytest.mark.parametrize("d", [3, 4])
def test_jk_acts_on_eigenvectors_by_character_sum(d):
    A = x_matrix(d)
    for k in range(d):
        J = jk_operator(A, k, d)
        for b in range(d):
            psi = eigenvector(A, b, d)
            s = sum(np.conj(chi(k, j, d)) * j * chi(b, j, d) for j in range(d)) * (2j * np.pi * b / d)
            assert np.linalg.norm(J @ psi - s * psi) <= 1e-9


def test_first_order_form_at_exact_power_is_projector():
    A = z_matrix(3)
    for k in range(3):
        assert np.allclose(first_order_kraus(A, 1.0, k, 3), computational_projector((k,), 3), atol=1e-12)


def test_no_leakage_at_exact_power():
    rep = leakage_report(z_matrix(3), 1.0)
    assert rep.max_cross() <= 1e-12 and rep.max_outside() <= 1e-12


def test_overshoot_leaks_outside_the_eigenspace():
    rep = leakage_report(z_matrix(3), 1.05)
    assert rep.entries[0].outside > 1e-6
    assert rep.params["t"] == 1.05


def test_compiling_removes_cross_terms():
    A = z_matrix(3)
    inst = weyl_indirect_measurement(A, 1.05)
    assert instrument_leakage_report(inst, A).max_cross() > 1e-6
    avg = rc_average_exact(inst).averaged
    assert instrument_leakage_report(avg, A).max_cross() <= 1e-12


@pytest.mark.parametrize("phi", [0.0, 0.3, np.pi / 4, np.pi / 2])
def test_hand_compiled_readout_matches_closed_form(phi):
    inst = simplified_rc_readout_instrument(phi)
    C = confusion_matrix(inst, inputs=[0], prepared={1: 0})
    assert np.allclose(C.entries, confusion_closed_form(phi), atol=1e-12)


def test_indirect_spec_rejects_bad_coupling():
    with pytest.raises(DimensionError):
        IndirectMeasurementSpec(Q1, Q1, np.eye(2))
    with pytest.raises(DomainError):
        IndirectMeasurementSpec(Q1, Q1, np.diag([1, 1, 1, 2.0]))
