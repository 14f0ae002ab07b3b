import numpy as np
import oracles
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from rcmeas.channels import (
    OneDesign,
    Superoperator,
    choi_matrix,
    compose,
    cp_tp_check,
    devectorize,
    embed_superop,
    identity_superop,
    inner,
    is_unnormalized_stochastic,
    kraus_to_superop,
    partial_trace,
    superop_to_kraus,
    tensor,
    twirl,
    unitary_channel,
    vectorize,
    weyl_channel,
    weyl_design,
    weyl_twirl,
)
from rcmeas.errors import DimensionError, DomainError
from rcmeas.instruments import random_instrument
from rcmeas.weyl import (
    QuditDims,
    WeylLabel,
    all_labels,
    chi,
    embed,
    weyl_matrix,
    x_matrix,
    z_matrix,
)

Q1 = QuditDims(2, 1)


def random_channel(dims, rng, env=2):
    D = dims.dim
    V = oracles.random_unitary(D * env, rng)[:, :D].reshape(D, env, D)
    return kraus_to_superop([V[:, e, :] for e in range(env)], dims)


complex_square = st.integers(1, 9).flatmap(
    lambda D: hnp.arrays(
        np.complex128,
        (D, D),
        elements=st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False),
    )
)


@given(complex_square)
def test_vectorize_round_trip_is_exact(M):
    assert np.array_equal(devectorize(vectorize(M)), M)


def test_identity_round_trip():
    assert np.array_equal(devectorize(vectorize(np.eye(2))), np.eye(2))


def test_vectorized_projector_is_a_unit_vector():
    v = vectorize(np.diag([0.0, 1.0]), Q1)
    assert np.array_equal(v, [0, 0, 0, 1])


def test_inner_product_is_hilbert_schmidt(rng):
    for _ in range(20):
        A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        B = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        assert abs(inner(A, B) - np.trace(A.conj().T @ B)) < 1e-12


def test_vectorize_rejects_wrong_shape():
    with pytest.raises(DimensionError):
        vectorize(np.eye(3), Q1)


def test_kraus_examples():
    assert np.allclose(kraus_to_superop([np.eye(2)], Q1).matrix, np.eye(4))
    flip = kraus_to_superop([x_matrix(2)], Q1)
    assert np.allclose(flip.apply(np.diag([1.0, 0.0])), np.diag([0.0, 1.0]))


def test_kraus_superop_matches_matrix_unit_oracle(rng):
    dims = QuditDims(3, 1)
    ks = [rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3)]
    assert np.allclose(kraus_to_superop(ks, dims).matrix, oracles.superop(ks), atol=1e-12)


def test_kraus_shape_mismatch():
    with pytest.raises(DimensionError):
        kraus_to_superop([np.eye(3)], Q1)


def test_unitary_channel_examples(rng):
    dims = QuditDims(2, 2)
    assert np.allclose(unitary_channel(np.eye(4), dims).matrix, np.eye(16))
    U = oracles.random_unitary(4, rng)
    S = unitary_channel(U, dims) @ unitary_channel(U.conj().T, dims)
    assert np.allclose(S.matrix, np.eye(16), atol=1e-12)


def test_unitary_channel_rejects_non_unitary():
    with pytest.raises(DomainError):
        unitary_channel(np.diag([1.0, 1.1]), Q1)


def test_z_conjugation_multiplies_weyl_operators_by_characters():
    d = 3
    dims = QuditDims(d, 1)
    for a in range(d):
        Za = unitary_channel(weyl_matrix(WeylLabel((0,), (a,), d)), dims)
        for L in all_labels(d, 1):
            W = weyl_matrix(L)
            assert np.allclose(Za.apply(W), chi(a, L.x, d) * W, atol=1e-12)


def test_compose_and_tensor(rng):
    dims = QuditDims(2, 1)
    S = random_channel(dims, rng)
    assert S.allclose(compose(S, identity_superop(dims)))
    U, V = oracles.random_unitary(2, rng), oracles.random_unitary(2, rng)
    T = tensor(unitary_channel(U, dims), unitary_channel(V, dims))
    assert T.allclose(unitary_channel(np.kron(U, V), QuditDims(2, 2)))


def test_weyl_channels_compose_by_label_sum():
    d = 3
    for A in all_labels(d, 1):
        for B in all_labels(d, 1):
            assert (weyl_channel(A) @ weyl_channel(B)).allclose(weyl_channel(A + B))


def test_compose_rejects_mismatched_dims():
    with pytest.raises(DimensionError):
        identity_superop(Q1) @ identity_superop(QuditDims(3, 1))


def test_embed_superop_matches_embedded_unitary(rng):
    dims = QuditDims(2, 3)
    U = oracles.random_unitary(4, rng)
    S = embed_superop(unitary_channel(U, QuditDims(2, 2)), [2, 0], dims)
    assert S.allclose(unitary_channel(embed(U, [2, 0], 2, 3), dims))


def test_partial_trace_of_product_state(rng):
    a = oracles.random_state(2, rng)
    c = oracles.random_state(2, rng)
    rho = np.kron(np.kron(a, c), a)
    assert np.allclose(partial_trace(rho, [1], 2, 3), c, atol=1e-12)
    assert np.allclose(partial_trace(rho, [0, 2], 2, 3), np.kron(a, a), atol=1e-12)


def test_cp_tp_examples():
    rep = cp_tp_check(unitary_channel(x_matrix(2), Q1))
    assert rep.cp and rep.tp
    assert not cp_tp_check(identity_superop(Q1).scale(-1)).cp


def test_random_instrument_sums_to_trace_preserving(rng):
    inst = random_instrument(QuditDims(2, 2), (1,), rng)
    assert cp_tp_check(inst.total()).tp
    assert all(cp_tp_check(S).cp for S in inst.branches.values())


@given(st.integers(0, 2**32 - 1), st.sampled_from([(2, 1), (3, 1), (2, 2)]), st.integers(1, 3))
def test_choi_kraus_round_trip(seed, dn, env):
    dims = QuditDims(*dn)
    S = random_channel(dims, np.random.default_rng(seed), env)
    rebuilt = kraus_to_superop(superop_to_kraus(S), dims)
    assert np.max(np.abs(rebuilt.matrix - S.matrix)) <= 1e-9


def test_choi_of_identity_is_maximally_entangled_projector():
    J = choi_matrix(identity_superop(Q1))
    v = np.array([1, 0, 0, 1.0])
    assert np.allclose(J, np.outer(v, v))


def test_twirl_of_identity_is_identity():
    dims = QuditDims(3, 1)
    assert twirl(identity_superop(dims), weyl_design(dims)).allclose(identity_superop(dims))


def test_twirl_identity_weight_of_unitary(rng):
    dims = QuditDims(2, 2)
    V = oracles.random_unitary(4, rng)
    T = twirl(unitary_channel(V, dims), weyl_design(dims))
    cert = is_unnormalized_stochastic(T)
    assert cert.identity_weight == pytest.approx(abs(np.trace(V)) ** 2 / 16, abs=1e-12)


def test_twirl_rejects_empty_design():
    with pytest.raises(DomainError):
        OneDesign((), Q1)


@given(st.integers(0, 2**32 - 1), st.sampled_from([(2, 1), (3, 1), (2, 2)]))
def test_twirled_channels_are_stochastic_and_twirl_is_idempotent(seed, dn):
    dims = QuditDims(*dn)
    S = random_channel(dims, np.random.default_rng(seed))
    design = weyl_design(dims)
    T = twirl(S, design)
    cert = is_unnormalized_stochastic(T)
    assert cert.is_stochastic and cert.residual <= 1e-9
    assert twirl(T, design).distance(T) <= 1e-9
    assert weyl_twirl(S).distance(T) <= 1e-12


def test_identity_certificate():
    cert = is_unnormalized_stochastic(identity_superop(QuditDims(2, 2)))
    assert cert.is_stochastic
    assert cert.identity_weight == pytest.approx(1)
    assert set(cert.weyl_weights) == {WeylLabel.identity(2, 2)}


def test_dephasing_certificate_splits_evenly():
    Z = z_matrix(2)
    S = (identity_superop(Q1) + unitary_channel(Z, Q1)).scale(0.5)
    cert = is_unnormalized_stochastic(S)
    assert cert.is_stochastic
    assert cert.weyl_weights == pytest.approx({WeylLabel((0,), (0,), 2): 0.5, WeylLabel((0,), (1,), 2): 0.5})


def test_coherent_rotation_needs_a_twirl():
    theta = 0.3
    U = np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * x_matrix(2)
    S = unitary_channel(U, Q1)
    assert not is_unnormalized_stochastic(S).is_stochastic
    after = is_unnormalized_stochastic(S, twirl_first=True)
    assert after.is_stochastic
    assert after.pre_twirl_residual > 1e-3
    assert after.identity_weight == pytest.approx(np.cos(theta) ** 2)


def test_zero_map_is_accepted_as_empty_stochastic_map():
    cert = is_unnormalized_stochastic(Superoperator(np.zeros((4, 4)), Q1))
    assert cert.is_stochastic and cert.total_weight == 0


def test_certificate_total_weight_is_trace_scale(rng):
    dims = QuditDims(2, 1)
    T = twirl(random_channel(dims, rng), weyl_design(dims)).scale(0.37)
    assert is_unnormalized_stochastic(T).total_weight == pytest.approx(0.37)
