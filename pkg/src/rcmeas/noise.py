"""Concrete noisy measurement circuits.

Covers the over-rotated CNOT readout of a data qubit, general indirect
measurements through a coupling unitary, and indirect measurement of a Weyl
operator through a controlled power ``A^t`` with ``t`` near 1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _config
from .channels import Superoperator, kraus_to_superop
from .errors import DimensionError, DomainError
from .instruments import Instrument, check_density
from .weyl import (
    QuditDims,
    all_digit_vectors,
    as_digits,
    chi,
    digits_to_index,
    fourier,
    infer_d,
    is_unitary,
    label_of,
    spectral_projectors,
    weyl_log,
    weyl_power,
    x_matrix,
)


def overrotated_cx(phi: float) -> np.ndarray:
    """``|0><0| (x) I + |1><1| (x) exp(-i phi X)``; ``phi = pi/2`` is CNOT up to a phase."""
    rot = np.cos(phi) * np.eye(2) - 1j * np.sin(phi) * x_matrix(2)
    V = np.zeros((4, 4), dtype=complex)
    V[:2, :2] = np.eye(2)
    V[2:, 2:] = rot
    return V


def cnot() -> np.ndarray:
    return embed_controlled(x_matrix(2))


def embed_controlled(A: np.ndarray) -> np.ndarray:
    """``|0><0| (x) I + |1><1| (x) A`` for a qubit control."""
    D = A.shape[0]
    out = np.zeros((2 * D, 2 * D), dtype=complex)
    out[:D, :D] = np.eye(D)
    out[D:, D:] = A
    return out


@dataclass(frozen=True, eq=False)
class IndirectMeasurementSpec:
    """Data register coupled to a readout register that is then measured.

    ``coupling`` acts on data (x) readout. ``pre`` and ``post`` act on the
    readout right before and after the coupling. ``measured`` lists the data
    qudits that the virtual outcome register is attached to; by default the
    first ``readout_dims.n`` data qudits.
    """

    data_dims: QuditDims
    readout_dims: QuditDims
    coupling: np.ndarray
    readout_prep: tuple | None = None
    pre: np.ndarray | None = None
    post: np.ndarray | None = None
    measured: tuple | None = None

    def __post_init__(self):
        if self.data_dims.d != self.readout_dims.d:
            raise DimensionError("data and readout registers must share the qudit dimension")
        D = self.data_dims.dim * self.readout_dims.dim
        V = np.asarray(self.coupling, dtype=complex)
        if V.shape != (D, D):
            raise DimensionError(f"coupling of shape {V.shape} does not act on data (x) readout of dimension {D}")
        if not is_unitary(V):
            raise DomainError("coupling is not unitary within tolerance")
        object.__setattr__(self, "coupling", V)
        m = self.readout_dims.n
        prep = (0,) * m if self.readout_prep is None else as_digits(self.readout_prep, self.data_dims.d, m)
        object.__setattr__(self, "readout_prep", prep)
        Dr = self.readout_dims.dim
        for name in ("pre", "post"):
            R = getattr(self, name)
            R = np.eye(Dr, dtype=complex) if R is None else np.asarray(R, dtype=complex)
            if R.shape != (Dr, Dr) or not is_unitary(R):
                raise DomainError(f"readout rotation '{name}' must be a {Dr}x{Dr} unitary")
            object.__setattr__(self, name, R)
        measured = tuple(range(min(m, self.data_dims.n))) if self.measured is None else tuple(self.measured)
        if len(measured) != m or any(not 0 <= q < self.data_dims.n for q in measured):
            raise DimensionError(f"measured data qudits {measured} do not match {m} readout qudits")
        object.__setattr__(self, "measured", measured)

    def full_unitary(self) -> np.ndarray:
        Id = np.eye(self.data_dims.dim)
        return np.kron(Id, self.post) @ self.coupling @ np.kron(Id, self.pre)


def indirect_kraus(spec: IndirectMeasurementSpec) -> dict:
    """``K_k = (I (x) <k|) post V pre (I (x) |prep>)`` for every outcome ``k``."""
    d = spec.data_dims.d
    Dd, Dr = spec.data_dims.dim, spec.readout_dims.dim
    W = spec.full_unitary().reshape(Dd, Dr, Dd, Dr)
    p = digits_to_index(spec.readout_prep, d)
    return {k: W[:, digits_to_index(k, d), :, p].copy() for k in all_digit_vectors(d, spec.readout_dims.n)}


def indirect_measurement(spec: IndirectMeasurementSpec, embed_readout: bool = False) -> Instrument:
    """Instrument on the data register with branch ``k`` given by the single Kraus ``K_k``.

    With ``embed_readout`` the instrument acts on data (x) readout instead:
    the readout input is discarded, the coupling applied to a fresh
    preparation, and the readout left in ``|k>``.
    """
    kraus = indirect_kraus(spec)
    meta = {"readout_qudits": spec.readout_dims.n, "readout_prep": list(spec.readout_prep)}
    if not embed_readout:
        branches = {k: kraus_to_superop([K], spec.data_dims) for k, K in kraus.items()}
        return Instrument(spec.data_dims, spec.measured, branches, readout="virtual", metadata=meta)
    d = spec.data_dims.d
    nd, m = spec.data_dims.n, spec.readout_dims.n
    full = QuditDims(d, nd + m)
    Dr = spec.readout_dims.dim
    branches = {}
    for k, K in kraus.items():
        ket = np.zeros(Dr)
        ket[digits_to_index(k, d)] = 1
        ops = []
        for j in range(Dr):
            bra = np.zeros(Dr)
            bra[j] = 1
            ops.append(np.kron(K, np.outer(ket, bra)))
        branches[k] = kraus_to_superop(ops, full)
    return Instrument(full, tuple(range(nd, nd + m)), branches, metadata=meta)


def _check_projective(projectors, tol):
    P = [np.asarray(p, dtype=complex) for p in projectors]
    D = P[0].shape[0]
    for i, p in enumerate(P):
        if p.shape != (D, D):
            raise DimensionError(f"projector {i} has shape {p.shape}")
        if np.max(np.abs(p - p.conj().T)) > tol:
            raise DomainError(f"projector {i} is not Hermitian")
        if np.max(np.abs(p @ p - p)) > tol:
            raise DomainError(f"projector {i} is not idempotent")
    for i, j in itertools.combinations(range(len(P)), 2):
        if np.max(np.abs(P[i] @ P[j])) > tol:
            raise DomainError(f"projectors {i} and {j} are not orthogonal")
    if np.max(np.abs(sum(P) - np.eye(D))) > tol:
        raise DomainError("projectors do not sum to the identity")
    return P


def conditional_projector_unitary(projectors, d: int | None = None, tol: float | None = None) -> np.ndarray:
    """``V = sum_{j,k} pi_k (x) |k+j><j|`` on data (x) readout.

    ``projectors[i]`` is ``pi_k`` for the ``i``-th outcome ``k`` in index
    order, so there must be ``d^m`` of them for ``m`` readout qudits.
    """
    tol = _config.resolve_tol(tol)
    P = _check_projective(projectors, tol)
    K = len(P)
    if d is None:
        d = infer_d(K) if K > 1 else 2
    m = 0
    while d**m < K:
        m += 1
    if d**m != K:
        raise DimensionError(f"{K} projectors do not match a readout of {d}-level qudits")
    D = P[0].shape[0]
    V = np.zeros((D * K, D * K), dtype=complex)
    for ki, k in enumerate(all_digit_vectors(d, m)):
        for j in all_digit_vectors(d, m):
            shift = np.zeros((K, K))
            shift[digits_to_index(tuple((a + b) % d for a, b in zip(k, j)), d), digits_to_index(j, d)] = 1
            V += np.kron(P[ki], shift)
    return V


# --------------------------------------------------- noisy Weyl measurement


def _weyl_coupling(A: np.ndarray, t: float, d: int) -> np.ndarray:
    """``sum_j A^{j t} (x) |j><j|`` with the readout qudit last."""
    D = A.shape[0]
    V = np.zeros((D * d, D * d), dtype=complex)
    for j in range(d):
        proj = np.zeros((d, d))
        proj[j, j] = 1
        V += np.kron(weyl_power(A, j * t, d), proj)
    return V


def weyl_indirect_spec(A: np.ndarray, t: float, d: int | None = None) -> IndirectMeasurementSpec:
    A = np.asarray(A, dtype=complex)
    d = infer_d(A.shape[0]) if d is None else d
    n = round(np.log(A.shape[0]) / np.log(d))
    F = fourier(d)
    return IndirectMeasurementSpec(
        QuditDims(d, n), QuditDims(d, 1), _weyl_coupling(A, t, d), pre=F, post=F.conj().T
    )


def weyl_indirect_measurement(A: np.ndarray, t: float, d: int | None = None, embed_readout: bool = False) -> Instrument:
    """Readout in ``F|0>``, controlled ``A^t``, inverse Fourier, then measure the readout."""
    return indirect_measurement(weyl_indirect_spec(A, t, d), embed_readout)


def weyl_measurement_kraus(A: np.ndarray, t: float, d: int | None = None) -> list:
    """Closed form ``M_k(t) = (1/d) sum_j conj(chi_k(j)) A^{j t}``."""
    A = np.asarray(A, dtype=complex)
    d = infer_d(A.shape[0]) if d is None else d
    powers = [weyl_power(A, j * t, d) for j in range(d)]
    return [sum(np.conj(chi(k, j, d)) * powers[j] for j in range(d)) / d for k in range(d)]


def jk_operator(A: np.ndarray, k: int, d: int | None = None) -> np.ndarray:
    """``J_k = sum_j conj(chi_k(j)) j A^j ln(A)`` with the principal-branch log."""
    A = np.asarray(A, dtype=complex)
    d = infer_d(A.shape[0]) if d is None else d
    k = int(np.atleast_1d(k)[0]) if np.ndim(k) else int(k)
    L = weyl_log(A, d)
    acc = np.zeros_like(A)
    Aj = np.eye(A.shape[0], dtype=complex)
    for j in range(d):
        acc += np.conj(chi(k, j, d)) * j * Aj
        Aj = Aj @ A
    return acc @ L


def first_order_kraus(A: np.ndarray, t: float, k: int, d: int | None = None) -> np.ndarray:
    """``pi_k + ((t - 1)/d) J_k``, the expansion of ``M_k(t)`` around ``t = 1``."""
    A = np.asarray(A, dtype=complex)
    d = infer_d(A.shape[0]) if d is None else d
    return spectral_projectors(A, d)[k] + (t - 1) / d * jk_operator(A, k, d)


def eigenvector(A: np.ndarray, b: int, d: int | None = None) -> np.ndarray:
    """A unit eigenvector of ``A`` for eigenvalue ``chi_b(1)``."""
    A = np.asarray(A, dtype=complex)
    d = infer_d(A.shape[0]) if d is None else d
    P = spectral_projectors(A, d)[b]
    col = int(np.argmax(np.linalg.norm(P, axis=0)))
    v = P[:, col]
    nv = np.linalg.norm(v)
    if nv < 1e-12:
        raise DomainError(f"eigenvalue chi_{b}(1) does not occur")
    return v / nv


def j0_closed_form(d: int) -> complex:
    """``pi (cot(pi/d) - i)``; at ``d = 2`` the cotangent vanishes."""
    cot = 0.0 if d == 2 else 1.0 / np.tan(np.pi / d)
    return np.pi * (cot - 1j)


# ------------------------------------------------------------------ leakage


def trace_norm(M: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(M, compute_uv=False)))


@dataclass(frozen=True)
class LeakageEntry:
    outcome: int
    ideal: float
    cross: float
    outside: float


@dataclass(frozen=True)
class LeakageReport:
    entries: list
    params: dict = field(default_factory=dict)

    def max_cross(self) -> float:
        return max(e.cross for e in self.entries)

    def max_outside(self) -> float:
        return max(e.outside for e in self.entries)


def decompose_output(sigma: np.ndarray, projectors, k: int) -> LeakageEntry:
    """Split ``sigma`` by the ideal eigenprojectors into the ``k``-block, cross and outside parts."""
    P = projectors
    ideal = P[k] @ sigma @ P[k]
    outside = sum(P[b] @ sigma @ P[b] for b in range(len(P)) if b != k)
    cross = sum(P[b] @ sigma @ P[c] for b in range(len(P)) for c in range(len(P)) if b != c)
    return LeakageEntry(k, trace_norm(ideal), trace_norm(np.asarray(cross)), trace_norm(np.asarray(outside)))


def uniform_superposition(D: int) -> np.ndarray:
    return np.full((D, D), 1.0 / D, dtype=complex)


def leakage_report(A: np.ndarray, t: float, rho: np.ndarray | None = None, d: int | None = None) -> LeakageReport:
    """Trace norms of the ideal, cross and outside-eigenspace parts of ``M_k(t) rho M_k(t)^dag``."""
    A = np.asarray(A, dtype=complex)
    d = infer_d(A.shape[0]) if d is None else d
    D = A.shape[0]
    n = round(np.log(D) / np.log(d))
    rho = uniform_superposition(D) if rho is None else check_density(rho, QuditDims(d, n))
    P = spectral_projectors(A, d)
    entries = []
    for k, M in enumerate(weyl_measurement_kraus(A, t, d)):
        entries.append(decompose_output(M @ rho @ M.conj().T, P, k))
    try:
        label = str(label_of(A, d)[0])
    except DomainError:
        label = "custom"
    return LeakageReport(entries, {"A": label, "t": float(t), "d": d, "n": n})


def instrument_leakage_report(inst: Instrument, A: np.ndarray, rho: np.ndarray | None = None) -> LeakageReport:
    """Leakage decomposition for an instrument on the data register measuring ``A``."""
    d = inst.dims.d
    P = spectral_projectors(A, d)
    if P[0].shape[0] != inst.dims.dim:
        raise DimensionError("observable and instrument act on different systems")
    rho = uniform_superposition(inst.dims.dim) if rho is None else check_density(rho, inst.dims)
    entries = []
    for k in inst.outcomes:
        kk = digits_to_index(k, d)
        entries.append(decompose_output(inst.branches[k].apply(rho), P, kk))
    return LeakageReport(entries, {"d": d, "n": inst.dims.n})


# ---------------------------------------------------- two-qubit example


def overrotated_readout_spec(phi: float) -> IndirectMeasurementSpec:
    return IndirectMeasurementSpec(QuditDims(2, 1), QuditDims(2, 1), overrotated_cx(phi))


def overrotated_readout_instrument(phi: float, embed_readout: bool = False) -> Instrument:
    """Data-qubit instrument realized by an over-rotated CNOT onto a ``|0>`` readout."""
    return indirect_measurement(overrotated_readout_spec(phi), embed_readout)


def simplified_rc_readout_instrument(phi: float) -> Instrument:
    """Hand-compiled randomized version of the over-rotated CNOT readout.

    Data qubit 0, readout qubit 1. For each bit string ``(x0, x1, z0, z1)``
    the circuit is ``X^x0 Z^z0 (x) X^x1``, the over-rotated CNOT, then
    ``X^-x0 Z^(-z0-z1) (x) X^(-x1-x0)`` and an ideal readout measurement.
    The returned instrument is the average over all 16 strings.
    """
    dims = QuditDims(2, 2)
    X = x_matrix(2)
    Z = np.diag([1.0, -1.0])
    V = overrotated_cx(phi)
    mp = lambda M, e: np.linalg.matrix_power(M, e % 2)
    acc = {(0,): np.zeros((16, 16), complex), (1,): np.zeros((16, 16), complex)}
    for x0, x1, z0, z1 in itertools.product(range(2), repeat=4):
        pre = np.kron(mp(X, x0) @ mp(Z, z0), mp(X, x1))
        post = np.kron(mp(X, -x0) @ mp(Z, -z0 - z1), mp(X, -x1 - x0))
        W = post @ V @ pre
        for k in (0, 1):
            proj = np.zeros((2, 2))
            proj[k, k] = 1
            K = np.kron(np.eye(2), proj) @ W
            acc[(k,)] += kraus_to_superop([K], dims).matrix
    branches = {k: Superoperator(v / 16, dims) for k, v in acc.items()}
    return Instrument(dims, (1,), branches)


def confusion_closed_form(phi: float) -> np.ndarray:
    s, c = np.sin(phi) ** 2, np.cos(phi) ** 2
    return 0.5 * np.array([[1 + s, c], [c, 1 + s]])
