import warnings

import numpy as np
import oracles
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rcmeas.channels import (
    Superoperator,
    cp_tp_check,
    identity_superop,
    kraus_to_superop,
)
from rcmeas.errors import DimensionError, DomainError
from rcmeas.instruments import (
    ExtractionFailure,
    Instrument,
    UniformStochasticForm,
    _join_blocks,
    apply,
    confusion_matrix,
    extract_uniform_stochastic_form,
    ideal_subsystem_measurement,
    prepare_and_discard,
    random_instrument,
    shift_outcomes,
    split_blocks,
)
from rcmeas.noise import confusion_closed_form, overrotated_readout_instrument
from rcmeas.rc import rc_average_exact
from rcmeas.weyl import QuditDims, x_matrix

PLUS = np.full((2, 2), 0.5, dtype=complex)


def test_qubit_measurement_on_plus():
    inst = ideal_subsystem_measurement(None, QuditDims(2, 1), (0,))
    recs = apply(inst, PLUS)
    assert [r.outcome for r in recs] == [(0,), (1,)]
    assert [r.probability for r in recs] == pytest.approx([0.5, 0.5])
    assert np.allclose(recs[0].post_state, np.diag([1, 0]))
    assert np.allclose(recs[1].post_state, np.diag([0, 1]))


def test_bell_state_collapse():
    inst = ideal_subsystem_measurement(None, QuditDims(2, 2), (1,))
    v = np.array([1, 0, 0, 1]) / np.sqrt(2)
    recs = apply(inst, np.outer(v, v))
    assert recs[0].probability == pytest.approx(0.5)
    assert np.allclose(recs[0].post_state, np.diag([1, 0, 0, 0]), atol=1e-12)


def test_measurement_of_one_is_certain():
    inst = ideal_subsystem_measurement(None, QuditDims(2, 1), (0,))
    recs = apply(inst, np.diag([0.0, 1.0]))
    assert recs[1].probability == pytest.approx(1)
    assert recs[0].negligible and recs[0].post_state is None


def test_side_unitary_acts_on_the_rest():
    U = x_matrix(2)
    inst = ideal_subsystem_measurement(U, QuditDims(2, 2), (1,))
    rho = np.zeros((4, 4))
    rho[0, 0] = 1
    recs = apply(inst, rho)
    want = np.zeros((4, 4))
    want[2, 2] = 1
    assert np.allclose(recs[0].post_state, want)


def test_ideal_measurement_rejects_bad_input():
    with pytest.raises(DimensionError):
        ideal_subsystem_measurement(None, QuditDims(2, 2), (2,))
    with pytest.raises(DimensionError):
        ideal_subsystem_measurement(np.eye(4), QuditDims(2, 2), (1,))
    with pytest.raises(DomainError):
        ideal_subsystem_measurement(np.diag([1.0, 2.0]), QuditDims(2, 2), (1,))


def test_apply_rejects_invalid_state():
    inst = ideal_subsystem_measurement(None, QuditDims(2, 1), (0,))
    with pytest.raises(DomainError):
        apply(inst, np.diag([0.7, 0.7]))
    with pytest.raises(DimensionError):
        apply(inst, np.eye(4) / 4)


@given(st.integers(0, 2**32 - 1), st.sampled_from([(2, 2, (1,)), (3, 1, (0,)), (2, 3, (0, 2))]))
def test_apply_probabilities_form_a_distribution(seed, cfg):
    d, n, measured = cfg
    rng = np.random.default_rng(seed)
    inst = random_instrument(QuditDims(d, n), measured, rng)
    rho = oracles.random_state(d**n, rng)
    probs = [r.probability for r in apply(inst, rho)]
    assert min(probs) >= -1e-12
    assert sum(probs) == pytest.approx(1, abs=1e-9)


def test_branch_sums_are_trace_preserving_for_all_constructions(rng):
    insts = [
        ideal_subsystem_measurement(None, QuditDims(3, 2), (0,)),
        random_instrument(QuditDims(2, 3), (1, 2), rng),
        overrotated_readout_instrument(0.4),
        overrotated_readout_instrument(0.4, embed_readout=True),
    ]
    for inst in insts:
        assert cp_tp_check(inst.total()).tp


def test_ideal_measurement_has_single_block():
    inst = ideal_subsystem_measurement(None, QuditDims(2, 2), (1,))
    form = extract_uniform_stochastic_form(inst)
    assert isinstance(form, UniformStochasticForm)
    nonzero = {ab for ab, w in form.misreport_state_weights.items() if w > 1e-12}
    assert nonzero == {((0,), (0,))}
    assert form.T[((0,), (0,))].allclose(identity_superop(QuditDims(2, 1)))


def test_form_round_trips_to_instrument():
    inst = ideal_subsystem_measurement(x_matrix(3), QuditDims(3, 2), (0,))
    form = extract_uniform_stochastic_form(inst)
    assert form.ok
    assert form.to_instrument().distance(inst) < 1e-12


def test_uncompiled_overrotated_readout_fails_on_coherences():
    inst = overrotated_readout_instrument(np.pi / 2 - 0.3)
    res = extract_uniform_stochastic_form(inst)
    assert isinstance(res, ExtractionFailure)
    assert "dyad" in res.failed and res.dyad_residual > 1e-3
    assert "(i)" in res.message


def test_compiled_overrotated_readout_matches_closed_form():
    phi = 0.7
    rep = rc_average_exact(overrotated_readout_instrument(phi))
    assert rep.success
    assert np.allclose(rep.form.confusion_matrix().entries, confusion_closed_form(phi), atol=1e-12)
    assert np.allclose(confusion_matrix(rep.averaged).entries, confusion_closed_form(phi), atol=1e-12)


@pytest.mark.parametrize("cfg", [(2, 2, (1,)), (2, 3, (0, 2)), (3, 2, (0,))])
def test_form_confusion_equals_instrument_confusion(cfg, rng):
    d, n, measured = cfg
    inst = random_instrument(QuditDims(d, n), measured, rng)
    rep = rc_average_exact(inst)
    assert rep.success
    C = rep.form.confusion_matrix()
    assert np.allclose(C.entries, confusion_matrix(rep.averaged).entries, atol=1e-9)
    assert C.is_column_stochastic()


def test_random_instrument_is_not_uniform_before_compiling(rng):
    inst = random_instrument(QuditDims(2, 2), (1,), rng)
    assert not extract_uniform_stochastic_form(inst).ok


def test_ideal_confusion_is_identity():
    inst = ideal_subsystem_measurement(None, QuditDims(3, 2), (1,))
    assert np.allclose(confusion_matrix(inst).entries, np.eye(3))


def test_confusion_at_zero_angle_is_uniform():
    rep = rc_average_exact(overrotated_readout_instrument(0.0))
    assert np.allclose(confusion_matrix(rep.averaged).entries, 0.5, atol=1e-12)


def test_split_and_join_blocks_are_inverse(rng):
    inst = random_instrument(QuditDims(2, 3), (2, 0), rng)
    S = inst.branches[(1, 0)]
    assert _join_blocks(split_blocks(S, inst.measured), inst.dims, inst.measured).distance(S) == 0


def test_missing_branches_are_zero_and_sorted():
    dims = QuditDims(2, 1)
    inst = Instrument(dims, (0,), {(1,): identity_superop(dims)})
    assert inst.outcomes == [(0,), (1,)]
    assert np.all(inst.branches[(0,)].matrix == 0)


def test_validate_rejects_non_cp_and_warns_on_non_tp():
    dims = QuditDims(2, 1)
    bad = Instrument(dims, (0,), {(0,): identity_superop(dims).scale(-1)})
    with pytest.raises(DomainError):
        bad.validate()
    half = Instrument(dims, (0,), {(0,): identity_superop(dims).scale(0.5)})
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        half.validate()
    assert any("trace-preserving" in str(x.message) for x in w)


def test_shift_outcomes_rekeys(rng):
    inst = random_instrument(QuditDims(3, 1), (0,), rng)
    sh = shift_outcomes(inst, (1,))
    assert sh.branches[(0,)] is inst.branches[(1,)]
    assert sh.branches[(2,)] is inst.branches[(0,)]


def test_prepare_and_discard_reduces_to_data_register():
    # ideal CNOT readout: data qubit 0, readout qubit 1 measured
    dims = QuditDims(2, 2)
    cnot = np.eye(4)[[0, 1, 3, 2]]
    meas = ideal_subsystem_measurement(None, dims, (1,))
    inst = meas.map_branches(lambda B: B @ kraus_to_superop([cnot], dims))
    data = prepare_and_discard(inst, {1: 0}, (0,))
    ideal = ideal_subsystem_measurement(None, QuditDims(2, 1), (0,))
    assert data.distance(ideal) < 1e-12
    assert data.readout == "virtual"


def test_instrument_rejects_mismatched_branch():
    with pytest.raises(DimensionError):
        Instrument(QuditDims(2, 1), (0,), {(0,): Superoperator(np.eye(16), QuditDims(2, 2))})
