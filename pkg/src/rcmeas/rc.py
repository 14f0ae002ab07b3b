"""Randomized compiling of subsystem measurements and Clifford gates.

A dressing tuple ``(a, b, x, g)`` wraps a noisy instrument as::

    branch'_k = (U G^dag U^dag (x) X^x Z^b) o M_{k-x} o (G (x) Z^a X^-x)

where the left factor of each tensor product acts on the unmeasured qudits
and the right factor on the measured ones. Averaging over all tuples turns
any noisy instrument into a uniform stochastic one.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _config
from .channels import (
    OneDesign,
    StochasticCertificate,
    Superoperator,
    apply_weyl_left,
    apply_weyl_right,
    conjugate_left,
    conjugate_right,
    is_unnormalized_stochastic,
    unitary_channel,
    weyl_channel,
    weyl_design,
)
from .errors import DimensionError, DomainError, EnumerationCapError
from .instruments import (
    ConfusionMatrix,
    ExtractionFailure,
    Instrument,
    UniformStochasticForm,
    confusion_matrix,
    extract_uniform_stochastic_form,
)
from .weyl import (
    QuditDims,
    WeylLabel,
    all_digit_vectors,
    all_labels,
    embed,
    is_unitary,
    label_of,
    weyl_matrix,
)

CHUNK = 64  # tuples per reduction chunk; fixed so results do not depend on worker count


# ------------------------------------------------------------- dephasing


def dephasing_average(d: int, n: int, tol: float | None = None) -> Superoperator:
    """``E_a Z^a`` over ``a`` in ``Z_d^n`` by enumeration.

    The result is checked against the diagonal-dyad form before returning.
    """
    dims = QuditDims(d, n)
    acc = np.zeros((dims.dim**2, dims.dim**2), dtype=complex)
    for a in all_digit_vectors(d, n):
        acc += weyl_channel(WeylLabel((0,) * n, a, d)).matrix
    avg = Superoperator(acc / dims.dim, dims)
    forms = dephasing_forms(d, n)
    resid = float(np.max(np.abs(avg.matrix - forms["diagonal_dyads"].matrix)))
    if resid > _config.resolve_tol(tol):
        raise AssertionError(f"dephasing average disagrees with the dyad form by {resid:.3g}")
    return avg


def dephasing_forms(d: int, n: int) -> dict:
    """Two closed forms of the dephasing average.

    ``weyl_dyads`` is ``sum_z |Z^z>><<Z^z| / d^n`` and ``diagonal_dyads`` is
    ``sum_j |jj>><<jj|`` in matrix-unit coordinates.
    """
    dims = QuditDims(d, n)
    D = dims.dim
    wd = np.zeros((D * D, D * D), dtype=complex)
    for z in all_digit_vectors(d, n):
        v = weyl_matrix(WeylLabel((0,) * n, z, d)).reshape(-1)
        wd += np.outer(v, v.conj())
    wd /= D
    diag = np.zeros((D * D, D * D), dtype=complex)
    for j in range(D):
        diag[j * D + j, j * D + j] = 1
    return {"weyl_dyads": Superoperator(wd, dims), "diagonal_dyads": Superoperator(diag, dims)}


def dephasing_residuals(d: int, n: int) -> dict:
    """Max-entry distances between the enumerated average and both closed forms."""
    dims = QuditDims(d, n)
    acc = np.zeros((dims.dim**2, dims.dim**2), dtype=complex)
    for a in all_digit_vectors(d, n):
        acc += weyl_channel(WeylLabel((0,) * n, a, d)).matrix
    acc /= dims.dim
    forms = dephasing_forms(d, n)
    return {name: float(np.max(np.abs(acc - S.matrix))) for name, S in forms.items()}


# ----------------------------------------------------------------- dressing


@dataclass(frozen=True)
class DressingTuple:
    a: tuple
    b: tuple
    x: tuple
    g_index: int

    def as_dict(self) -> dict:
        return {"a": list(self.a), "b": list(self.b), "x": list(self.x), "g_index": self.g_index}


def rest_design(inst: Instrument) -> OneDesign:
    """Projective Weyl group on the unmeasured qudits of ``inst``."""
    return weyl_design(QuditDims(inst.dims.d, inst.dims.n - inst.m))


def _check_design(inst: Instrument, design: OneDesign):
    rest_dims = QuditDims(inst.dims.d, inst.dims.n - inst.m)
    if design.dims != rest_dims:
        raise DimensionError(f"design acts on {design.dims}, expected the unmeasured factor {rest_dims}")


def _weyl_on(d, x, z):
    """``X^x Z^z`` on ``len(x)`` qudits (empty vectors give the 1x1 identity)."""
    if len(x) == 0:
        return np.ones((1, 1), dtype=complex)
    return weyl_matrix(WeylLabel(x, z, d))


def _assemble_label(inst: Instrument, rest_label: WeylLabel, x, z) -> WeylLabel:
    n = inst.dims.n
    fx, fz = [0] * n, [0] * n
    for i, q in enumerate(inst.rest):
        fx[q], fz[q] = rest_label.x[i], rest_label.z[i]
    for i, q in enumerate(inst.measured):
        fx[q], fz[q] = x[i], z[i]
    return WeylLabel(tuple(fx), tuple(fz), inst.dims.d)


def _fast_path(inst: Instrument, design: OneDesign) -> bool:
    U = inst.side_unitary
    return design.is_weyl and np.allclose(U, np.eye(U.shape[0]), atol=1e-14, rtol=0)


def _dressing_maps(inst: Instrument, t: DressingTuple, design: OneDesign):
    """Return ``(pre, post)`` either as Weyl labels (fast path) or unitaries."""
    d = inst.dims.d
    neg_x = tuple(-v for v in t.x)
    zero_m = (0,) * inst.m
    if _fast_path(inst, design):
        g = design.labels[t.g_index]
        # Z^a X^-x equals X^-x Z^a up to phase
        pre = _assemble_label(inst, g, neg_x, t.a)
        post = _assemble_label(inst, -g, t.x, t.b)
        return pre, post
    G = design.elements[t.g_index]
    U = inst.side_unitary
    meas_pre = _weyl_on(d, zero_m, t.a) @ _weyl_on(d, neg_x, zero_m)
    meas_post = _weyl_on(d, t.x, t.b)
    order = list(inst.rest) + list(inst.measured)
    pre = embed(np.kron(G, meas_pre), order, d, inst.dims.n)
    post = embed(np.kron(U @ G.conj().T @ U.conj().T, meas_post), order, d, inst.dims.n)
    return pre, post


def _dress_branch(S: Superoperator, pre, post) -> Superoperator:
    if isinstance(pre, WeylLabel):
        return apply_weyl_left(apply_weyl_right(S, pre), post)
    return conjugate_left(conjugate_right(S, pre), post)


def dress_instrument(noisy: Instrument, t: DressingTuple, design: OneDesign | None = None) -> Instrument:
    """One randomly compiled instance of ``noisy``, with outcomes re-keyed by ``+x``."""
    design = rest_design(noisy) if design is None else design
    _check_design(noisy, design)
    d, m = noisy.dims.d, noisy.m
    for v in (t.a, t.b, t.x):
        if len(v) != m or any(not 0 <= int(c) < d for c in v):
            raise DimensionError(f"dressing digits {v} invalid for {m} measured qudits of dimension {d}")
    if not 0 <= t.g_index < len(design):
        raise DimensionError(f"design index {t.g_index} out of range")
    pre, post = _dressing_maps(noisy, t, design)
    branches = {}
    for k in noisy.outcomes:
        src = tuple((kk - xx) % d for kk, xx in zip(k, t.x))
        branches[k] = _dress_branch(noisy.branches[src], pre, post)
    return noisy.replace(branches=branches)


def all_tuples(d: int, m: int, design_size: int):
    """Dressing tuples in lexicographic ``(a, b, x, g_index)`` order."""
    vecs = list(all_digit_vectors(d, m))
    for a, b, x, g in itertools.product(vecs, vecs, vecs, range(design_size)):
        yield DressingTuple(a, b, x, g)


def tuple_count(d: int, m: int, design_size: int) -> int:
    return d ** (3 * m) * design_size


# ---------------------------------------------------------------- averaging


@dataclass(frozen=True, eq=False)
class RCReport:
    averaged: Instrument
    form: UniformStochasticForm | ExtractionFailure
    dyad_residual: float
    k_independence_residual: float
    stochastic_residual_max: float
    tuples_evaluated: int
    mode: dict
    confusion: ConfusionMatrix
    exact_deviation: float | None = None

    @property
    def success(self) -> bool:
        return bool(self.form.ok)

    @property
    def trace_weights(self) -> dict:
        if isinstance(self.form, UniformStochasticForm):
            return dict(self.form.misreport_state_weights)
        return {}


def _accumulate(noisy: Instrument, design: OneDesign, tuples) -> dict:
    d = noisy.dims.d
    acc = {k: np.zeros_like(S.matrix) for k, S in noisy.branches.items()}
    for t in tuples:
        pre, post = _dressing_maps(noisy, t, design)
        for k in noisy.outcomes:
            src = tuple((kk - xx) % d for kk, xx in zip(k, t.x))
            acc[k] += _dress_branch(noisy.branches[src], pre, post).matrix
    return acc


def _chunked_sum(noisy: Instrument, design: OneDesign, tuples: list, workers: int | None) -> dict:
    chunks = [tuples[i : i + CHUNK] for i in range(0, len(tuples), CHUNK)]
    if workers and workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            partial = list(ex.map(lambda c: _accumulate(noisy, design, c), chunks))
    else:
        partial = [_accumulate(noisy, design, c) for c in chunks]
    total = {k: np.zeros_like(S.matrix) for k, S in noisy.branches.items()}
    for p in partial:
        for k in total:
            total[k] += p[k]
    return total


def _report(noisy, averaged, mode, evaluated, tol, exact_deviation=None, twirl_first=False):
    form = extract_uniform_stochastic_form(averaged, tol)
    return RCReport(
        averaged=averaged,
        form=form,
        dyad_residual=form.dyad_residual,
        k_independence_residual=form.k_independence_residual,
        stochastic_residual_max=form.stochastic_residual,
        tuples_evaluated=evaluated,
        mode=mode,
        confusion=confusion_matrix(averaged),
        exact_deviation=exact_deviation,
    )


def exact_average(noisy: Instrument, design: OneDesign | None = None, workers: int | None = None) -> Instrument:
    design = rest_design(noisy) if design is None else design
    _check_design(noisy, design)
    N = tuple_count(noisy.dims.d, noisy.m, len(design))
    cap = _config.get_enum_cap()
    if N > cap:
        raise EnumerationCapError(
            f"exact averaging needs {N} dressing tuples, above the cap {cap}; use sampled mode instead"
        )
    tuples = list(all_tuples(noisy.dims.d, noisy.m, len(design)))
    total = _chunked_sum(noisy, design, tuples, workers)
    return noisy.replace(branches={k: Superoperator(v / N, noisy.dims) for k, v in total.items()})


def rc_average_exact(
    noisy: Instrument,
    design: OneDesign | None = None,
    tol: float | None = None,
    workers: int | None = None,
) -> RCReport:
    """Uniform average of :func:`dress_instrument` over every dressing tuple."""
    design = rest_design(noisy) if design is None else design
    averaged = exact_average(noisy, design, workers)
    N = tuple_count(noisy.dims.d, noisy.m, len(design))
    return _report(noisy, averaged, {"mode": "exact"}, N, tol)


def sample_tuple(d: int, m: int, design_size: int, seed: int, index: int) -> DressingTuple:
    """Draw tuple number ``index`` from its own stream, so any subset can be drawn independently."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    a, b, x = (tuple(int(v) for v in rng.integers(0, d, size=m)) for _ in range(3))
    return DressingTuple(a, b, x, int(rng.integers(0, design_size)))


def sampled_tuples(d: int, m: int, design_size: int, samples: int, seed: int, stratified: bool = False) -> list:
    if samples < 1:
        raise DomainError("samples must be at least 1")
    if not stratified:
        return [sample_tuple(d, m, design_size, seed, s) for s in range(samples)]
    every = list(all_tuples(d, m, design_size))
    order = np.random.default_rng(np.random.SeedSequence(seed)).permutation(len(every))
    return [every[order[s % len(every)]] for s in range(samples)]


def rc_average_sampled(
    noisy: Instrument,
    design: OneDesign | None = None,
    samples: int = 1000,
    seed: int = 0,
    stratified: bool = False,
    workers: int | None = None,
    compare_exact: bool = True,
    tol: float | None = None,
) -> RCReport:
    """Empirical mean over seeded random dressing tuples.

    With ``stratified`` the tuples are a seeded permutation of all tuples, so
    ``samples`` equal to the tuple count covers each exactly once.
    """
    design = rest_design(noisy) if design is None else design
    _check_design(noisy, design)
    tuples = sampled_tuples(noisy.dims.d, noisy.m, len(design), samples, seed, stratified)
    total = _chunked_sum(noisy, design, tuples, workers)
    averaged = noisy.replace(branches={k: Superoperator(v / samples, noisy.dims) for k, v in total.items()})
    deviation = None
    N = tuple_count(noisy.dims.d, noisy.m, len(design))
    if compare_exact and N <= _config.get_enum_cap():
        deviation = averaged.distance(exact_average(noisy, design, workers))
    mode = {"mode": "sampled", "seed": int(seed), "samples": int(samples), "stratified": bool(stratified)}
    return _report(noisy, averaged, mode, samples, tol, deviation)


# ------------------------------------------------------- Clifford dressing


@dataclass(frozen=True, eq=False)
class CliffordLabelMap:
    """Action ``W -> V W V^dag`` of a Clifford ``V`` on Weyl labels.

    Column ``i`` of ``matrix`` is the image of generator ``X_i`` (``i < n``)
    or ``Z_{i-n}``, written as ``(x | z)`` digits; labels map linearly.
    """

    d: int
    n: int
    matrix: np.ndarray
    phases: tuple

    def image(self, label: WeylLabel) -> WeylLabel:
        v = np.concatenate([label.x, label.z]).astype(np.int64)
        out = (self.matrix @ v) % self.d
        return WeylLabel(tuple(out[: self.n]), tuple(out[self.n :]), self.d)


def _generator_name(i: int, n: int) -> str:
    return f"X{i}" if i < n else f"Z{i - n}"


def clifford_label_map(V: np.ndarray, d: int, tol: float | None = None) -> CliffordLabelMap:
    V = np.asarray(V, dtype=complex)
    D = V.shape[0]
    n = round(math.log(D, d))
    if d**n != D or V.shape != (D, D):
        raise DimensionError(f"matrix of shape {V.shape} is not an operator on {d}-level qudits")
    if not is_unitary(V, tol):
        raise DomainError("Clifford candidate is not unitary within tolerance")
    M = np.zeros((2 * n, 2 * n), dtype=np.int64)
    phases = []
    for i in range(2 * n):
        x, z = [0] * n, [0] * n
        (x if i < n else z)[i % n] = 1
        gen = WeylLabel(tuple(x), tuple(z), d)
        try:
            img, phase = label_of(V @ weyl_matrix(gen) @ V.conj().T, d, tol)
        except DomainError:
            raise DomainError(
                f"matrix is not Clifford: conjugating generator {_generator_name(i, n)} ({gen}) "
                "does not give a Weyl operator"
            ) from None
        M[:, i] = list(img.x) + list(img.z)
        phases.append(phase)
    return CliffordLabelMap(d, n, M, tuple(phases))


@dataclass(frozen=True, eq=False)
class CliffordAverage:
    lambda_: Superoperator
    certificate: StochasticCertificate
    averaged: Superoperator
    reconstruction_residual: float
    label_map: CliffordLabelMap


def correction_label(label_map: CliffordLabelMap, label: WeylLabel) -> WeylLabel:
    """Label of ``V W^dag V^dag`` for ``W = X^p Z^q``, up to phase."""
    return -label_map.image(label)


def rc_clifford_average(noisyV: Superoperator, idealV: np.ndarray, tol: float | None = None) -> CliffordAverage:
    """Average ``C_{p,q} o noisyV o W_{p,q}`` over all ``p, q``.

    ``C_{p,q}`` is the Weyl correction ``V W_{p,q}^dag V^dag``; its label is
    found symbolically from the Clifford label map. ``lambda_`` is the
    average composed with the inverse of the ideal gate.
    """
    tol = _config.resolve_tol(tol)
    dims = noisyV.dims
    idealV = np.asarray(idealV, dtype=complex)
    if idealV.shape != (dims.dim, dims.dim):
        raise DimensionError(f"ideal gate shape {idealV.shape} does not match {dims}")
    lmap = clifford_label_map(idealV, dims.d, tol)
    acc = np.zeros_like(noisyV.matrix)
    labels = all_labels(dims.d, dims.n)
    for L in labels:
        corr = correction_label(lmap, L)
        acc += apply_weyl_left(apply_weyl_right(noisyV, L), corr).matrix
    averaged = Superoperator(acc / len(labels), dims)
    Vinv = unitary_channel(idealV.conj().T, dims, tol)
    lam = averaged @ Vinv
    resid = (lam @ unitary_channel(idealV, dims, tol)).distance(averaged)
    return CliffordAverage(lam, is_unnormalized_stochastic(lam, tol), averaged, resid, lmap)


def compose_measurement_after(inst: Instrument, S: Superoperator) -> Instrument:
    """Instrument whose branch ``k`` is ``branch_k o S``."""
    if S.dims != inst.dims:
        raise DimensionError("channel and instrument act on different systems")
    return inst.map_branches(lambda B: B @ S)
