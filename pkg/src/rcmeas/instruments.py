"""Quantum instruments for subsystem measurements.

An :class:`Instrument` maps each outcome ``k`` in ``Z_d^m`` to a completely
positive superoperator on the full system. The measured qudits stay in the
state space after measurement; the classical register is implicit in the
outcome keys.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _config
from .channels import (
    Superoperator,
    conjugate_left,
    cp_tp_check,
    is_unnormalized_stochastic,
    kraus_to_superop,
    partial_trace,
    zero_superop,
)
from .errors import DimensionError, DomainError
from .weyl import (
    QuditDims,
    all_digit_vectors,
    as_digits,
    digits_to_index,
    embed,
    is_unitary,
)


def _shift(k, s, d):
    return tuple((a + b) % d for a, b in zip(k, s))


def _minus(k, s, d):
    return tuple((a - b) % d for a, b in zip(k, s))


@dataclass(frozen=True, eq=False)
class Instrument:
    """Outcome-indexed CP maps on ``dims``.

    ``measured`` lists the qudits whose computational basis is read out, in
    outcome-digit order. ``side_unitary`` acts on the remaining qudits in
    ascending order. ``readout`` is ``"virtual"`` when the outcome came from
    a consumed readout register rather than from the measured qudits
    themselves.
    """

    dims: QuditDims
    measured: tuple
    branches: Mapping
    side_unitary: np.ndarray | None = None
    readout: str = "direct"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        d, n = self.dims.d, self.dims.n
        measured = tuple(int(q) for q in self.measured)
        if len(set(measured)) != len(measured) or any(q < 0 or q >= n for q in measured):
            raise DimensionError(f"measured qudits {measured} out of range for {n} qudits")
        object.__setattr__(self, "measured", measured)
        m = len(measured)
        branches = {}
        for k, S in self.branches.items():
            key = as_digits(k, d, m) if m else ()
            if S.dims != self.dims:
                raise DimensionError(f"branch {key} has dims {S.dims}, expected {self.dims}")
            branches[key] = S
        for k in all_digit_vectors(d, m):
            branches.setdefault(k, zero_superop(self.dims))
        object.__setattr__(self, "branches", dict(sorted(branches.items())))
        Dr = d ** (n - m)
        U = np.eye(Dr, dtype=complex) if self.side_unitary is None else np.array(self.side_unitary, dtype=complex)
        if U.shape != (Dr, Dr):
            raise DimensionError(f"side unitary of shape {U.shape} does not match the {n - m} unmeasured qudits")
        U.setflags(write=False)
        object.__setattr__(self, "side_unitary", U)

    @property
    def m(self) -> int:
        return len(self.measured)

    @property
    def rest(self) -> tuple:
        return tuple(q for q in range(self.dims.n) if q not in self.measured)

    @property
    def outcomes(self) -> list:
        return list(self.branches)

    def total(self) -> Superoperator:
        acc = zero_superop(self.dims)
        for S in self.branches.values():
            acc = acc + S
        return acc

    def validate(self, tol: float | None = None) -> "Instrument":
        """Raise if a branch is not CP; warn if the branch sum is not trace preserving."""
        tol = _config.resolve_tol(tol)
        for k, S in self.branches.items():
            rep = cp_tp_check(S, tol)
            if not rep.cp:
                raise DomainError(f"branch {k} is not completely positive (Choi eigenvalue {rep.choi_min_eig:.3g})")
        rep = cp_tp_check(self.total(), tol)
        if not rep.tp:
            warnings.warn(f"instrument branches sum to a non trace-preserving map (defect {rep.tp_defect:.3g})", stacklevel=2)
        return self

    def replace(self, **changes) -> "Instrument":
        fields = dict(
            dims=self.dims,
            measured=self.measured,
            branches=self.branches,
            side_unitary=self.side_unitary,
            readout=self.readout,
            metadata=self.metadata,
        )
        fields.update(changes)
        return Instrument(**fields)

    def map_branches(self, fn) -> "Instrument":
        return self.replace(branches={k: fn(S) for k, S in self.branches.items()})

    def distance(self, other: "Instrument") -> float:
        if self.dims != other.dims or self.outcomes != other.outcomes:
            raise DimensionError("instruments have different shapes")
        return max(self.branches[k].distance(other.branches[k]) for k in self.branches)


def shift_outcomes(inst: Instrument, s) -> Instrument:
    """Re-key so that the new branch ``k`` is the old branch ``k + s``."""
    d = inst.dims.d
    s = as_digits(s, d, inst.m)
    return inst.replace(branches={k: inst.branches[_shift(k, s, d)] for k in inst.branches})


def compose_before(inst: Instrument, S: Superoperator) -> Instrument:
    """Instrument whose branch ``k`` is ``branch_k o S``."""
    return inst.map_branches(lambda B: B @ S)


def compose_after(inst: Instrument, S: Superoperator) -> Instrument:
    """Instrument whose branch ``k`` is ``S o branch_k``."""
    return inst.map_branches(lambda B: S @ B)


# ----------------------------------------------------------------- builders


def _basis_ket(j, d):
    v = np.zeros(d ** len(j), dtype=complex)
    v[digits_to_index(j, d)] = 1.0
    return v


def kraus_on_split(rest_op: np.ndarray, meas_op: np.ndarray, dims: QuditDims, measured: Sequence[int]) -> np.ndarray:
    """Full-system matrix of ``rest_op (x) meas_op`` placed on the right qudits."""
    measured = list(measured)
    rest = [q for q in range(dims.n) if q not in measured]
    return embed(np.kron(rest_op, meas_op), rest + measured, dims.d, dims.n)


def ideal_subsystem_measurement(U: np.ndarray | None, dims: QuditDims, measured: Sequence[int]) -> Instrument:
    """Ideal non-destructive computational measurement of ``measured`` with side unitary ``U``."""
    measured = tuple(measured)
    if len(set(measured)) != len(measured) or any(q < 0 or q >= dims.n for q in measured):
        raise DimensionError(f"measured qudits {measured} out of range for {dims.n} qudits")
    m = len(measured)
    Dr = dims.d ** (dims.n - m)
    U = np.eye(Dr, dtype=complex) if U is None else np.asarray(U, dtype=complex)
    if U.shape != (Dr, Dr):
        raise DimensionError(f"side unitary of shape {U.shape} does not match {dims.n - m} unmeasured qudits")
    if not is_unitary(U):
        raise DomainError("side unitary is not unitary within tolerance")
    branches = {}
    for k in all_digit_vectors(dims.d, m):
        ket = _basis_ket(k, dims.d)
        K = kraus_on_split(U, np.outer(ket, ket), dims, measured)
        branches[k] = kraus_to_superop([K], dims)
    return Instrument(dims, measured, branches, U)


def random_unitary(D: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    g = (rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_instrument(
    dims: QuditDims,
    measured: Sequence[int],
    rng: np.random.Generator,
    env_dim: int = 2,
    side_unitary: np.ndarray | None = None,
) -> Instrument:
    """Random trace-preserving instrument from a random isometric dilation.

    A Haar unitary on system (x) outcome register (x) environment, restricted
    to the all-zero ancilla input, gives Kraus operators ``(I (x) <k, e|) V``.
    """
    measured = tuple(measured)
    m = len(measured)
    D = dims.dim
    K_out = dims.d**m
    W = random_unitary(D * K_out * env_dim, rng)
    V = W[:, :D]  # isometry D -> D * K_out * env_dim
    V = V.reshape(D, K_out, env_dim, D)
    branches = {}
    for idx, k in enumerate(all_digit_vectors(dims.d, m)):
        kraus = [V[:, idx, e, :] for e in range(env_dim)]
        branches[k] = kraus_to_superop(kraus, dims)
    return Instrument(dims, measured, branches, side_unitary)


# -------------------------------------------------------------------- apply


def check_density(rho: np.ndarray, dims: QuditDims, tol: float | None = None) -> np.ndarray:
    tol = _config.resolve_tol(tol)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dims.dim, dims.dim):
        raise DimensionError(f"density matrix of shape {rho.shape} does not match dimension {dims.dim}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise DomainError(f"density matrix has trace {np.trace(rho).real:.6g}")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -tol:
        raise DomainError("density matrix is not positive semidefinite")
    return rho


@dataclass(frozen=True)
class OutcomeRecord:
    outcome: tuple
    probability: float
    post_state: np.ndarray | None
    unnormalized: np.ndarray
    negligible: bool


def apply(inst: Instrument, rho: np.ndarray, threshold: float | None = None) -> list[OutcomeRecord]:
    """Outcome probabilities and Lüders-style post-states of ``inst`` on ``rho``."""
    rho = check_density(rho, inst.dims)
    threshold = _config.NEGLIGIBLE_PROB if threshold is None else threshold
    out = []
    for k, S in inst.branches.items():
        sigma = S.apply(rho)
        p = float(np.trace(sigma).real)
        negligible = p <= threshold
        out.append(OutcomeRecord(k, p, None if negligible else sigma / p, sigma, negligible))
    return out


# ------------------------------------------------------- uniform stochastic form


def split_blocks(S: Superoperator, measured: Sequence[int]) -> np.ndarray:
    """Reshape ``S`` to ``[p, q, r, s, rest_out, rest_in]``.

    ``(p, q)`` is the output dyad ``|p><q|`` on the measured qudits, ``(r, s)``
    the input dyad; the last two axes form a superoperator on the rest.
    """
    d, n = S.dims.d, S.dims.n
    measured = list(measured)
    rest = [q for q in range(n) if q not in measured]
    t = S.matrix.reshape((d,) * (4 * n))
    axes = []
    for block in range(4):
        axes += [block * n + q for q in measured]
    for block in range(4):
        axes += [block * n + q for q in rest]
    t = t.transpose(axes)
    Dm, Dr = d ** len(measured), d ** len(rest)
    return t.reshape(Dm, Dm, Dm, Dm, Dr * Dr, Dr * Dr)


@dataclass(frozen=True, eq=False)
class UniformStochasticForm:
    """``sum_{a,b,k} U T_{a,b} (x) |k+b>><<k+a| (x) |k>`` data.

    ``T[(a, b)]`` acts on the unmeasured qudits; ``a`` is the input offset
    (misreport), ``b`` the output offset (wrong post-measurement state).
    """

    dims: QuditDims
    measured: tuple
    T: dict
    side_unitary: np.ndarray
    misreport_state_weights: dict
    certificates: dict
    dyad_residual: float
    k_independence_residual: float
    stochastic_residual: float

    ok = True

    def confusion_matrix(self) -> "ConfusionMatrix":
        d, m = self.dims.d, len(self.measured)
        outcomes = list(all_digit_vectors(d, m))
        Dm = len(outcomes)
        C = np.zeros((Dm, Dm))
        for (a, b), w in self.misreport_state_weights.items():
            for k in outcomes:
                j = _shift(k, a, d)
                C[digits_to_index(k, d), digits_to_index(j, d)] += w
        return ConfusionMatrix(C, outcomes)

    def to_instrument(self) -> Instrument:
        d, n = self.dims.d, self.dims.n
        m = len(self.measured)
        rest_dims = QuditDims(d, n - m)
        U = self.side_unitary
        UU = np.kron(U, U.conj())
        Dm = d**m
        branches = {}
        for k in all_digit_vectors(d, m):
            blocks = np.zeros((Dm, Dm, Dm, Dm, rest_dims.dim**2, rest_dims.dim**2), dtype=complex)
            for (a, b), T in self.T.items():
                p = digits_to_index(_shift(k, b, d), d)
                r = digits_to_index(_shift(k, a, d), d)
                blocks[p, p, r, r] = UU @ T.matrix
            branches[k] = _join_blocks(blocks, self.dims, self.measured)
        return Instrument(self.dims, self.measured, branches, U)


def _join_blocks(blocks: np.ndarray, dims: QuditDims, measured) -> Superoperator:
    d, n = dims.d, dims.n
    measured = list(measured)
    rest = [q for q in range(n) if q not in measured]
    m, r = len(measured), len(rest)
    t = blocks.reshape((d,) * (4 * m) + (d,) * (4 * r))
    src = []
    for block in range(4):
        src += [("m", block, i) for i in range(m)]
    for block in range(4):
        src += [("r", block, i) for i in range(r)]
    target = []
    for block in range(4):
        for q in range(n):
            if q in measured:
                target.append(src.index(("m", block, measured.index(q))))
            else:
                target.append(src.index(("r", block, rest.index(q))))
    t = t.transpose(target)
    return Superoperator(t.reshape(dims.dim**2, dims.dim**2), dims)


@dataclass(frozen=True)
class ExtractionFailure:
    """Why an instrument is not a uniform stochastic instrument.

    ``failed`` names the failing checks: ``"dyad"`` (off-dyad blocks on the
    measured qudits do not vanish), ``"k_independence"`` (blocks depend on
    the reported outcome) and ``"stochastic"`` (an extracted ``T_{a,b}`` is
    not an unnormalized stochastic channel).
    """

    failed: tuple
    dyad_residual: float
    k_independence_residual: float
    stochastic_residual: float
    message: str = ""

    ok = False


def extract_uniform_stochastic_form(
    inst: Instrument, tol: float | None = None
) -> UniformStochasticForm | ExtractionFailure:
    tol = _config.resolve_tol(tol)
    d, n = inst.dims.d, inst.dims.n
    m = inst.m
    rest_dims = QuditDims(d, n - m)
    outcomes = inst.outcomes
    Dm = d**m
    blocks = {k: split_blocks(S, inst.measured) for k, S in inst.branches.items()}

    dyad_res = 0.0
    off = ~(np.eye(Dm, dtype=bool)[:, :, None, None] & np.eye(Dm, dtype=bool)[None, None, :, :])
    for B in blocks.values():
        vals = np.abs(B[off])
        if vals.size:
            dyad_res = max(dyad_res, float(vals.max()))

    # M_{k, alpha, beta}: input dyad k+alpha, output dyad k+beta
    per_k = {}
    for k in outcomes:
        B = blocks[k]
        per_k[k] = {}
        for a in all_digit_vectors(d, m):
            r = digits_to_index(_shift(k, a, d), d)
            for b in all_digit_vectors(d, m):
                p = digits_to_index(_shift(k, b, d), d)
                per_k[k][(a, b)] = B[p, p, r, r]
    k0 = outcomes[0]
    kind_res = 0.0
    for k in outcomes[1:]:
        for ab, blk in per_k[k].items():
            kind_res = max(kind_res, float(np.max(np.abs(blk - per_k[k0][ab]))))

    U = inst.side_unitary
    T, weights, certs = {}, {}, {}
    stoch_res = 0.0
    for ab in per_k[k0]:
        mean = sum(per_k[k][ab] for k in outcomes) / len(outcomes)
        Tab = conjugate_left(Superoperator(mean, rest_dims), U.conj().T)
        cert = is_unnormalized_stochastic(Tab, tol)
        T[ab] = Tab
        certs[ab] = cert
        weights[ab] = cert.total_weight
        viol = cert.worst
        if not cert.is_stochastic:
            viol = max(viol, tol * (1 + 1e-12))
        stoch_res = max(stoch_res, viol)

    failed = []
    if dyad_res > tol:
        failed.append("dyad")
    if kind_res > tol:
        failed.append("k_independence")
    if any(not c.is_stochastic for c in certs.values()):
        failed.append("stochastic")
    if failed:
        msg = ", ".join(
            {
                "dyad": f"(i) off-dyad blocks do not vanish (residual {dyad_res:.3g})",
                "k_independence": f"(ii) blocks depend on the outcome (residual {kind_res:.3g})",
                "stochastic": f"(iii) an extracted T_ab is not unnormalized stochastic (residual {stoch_res:.3g})",
            }[f]
            for f in failed
        )
        return ExtractionFailure(tuple(failed), dyad_res, kind_res, stoch_res, msg)
    return UniformStochasticForm(
        inst.dims, inst.measured, T, U, weights, certs, dyad_res, kind_res, stoch_res
    )


# ------------------------------------------------------------- confusion matrix


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Entry ``(k, j)`` is the probability of reporting ``k`` given input ``|j>``."""

    entries: np.ndarray
    outcomes: list

    def is_column_stochastic(self, tol: float | None = None) -> bool:
        tol = _config.resolve_tol(tol)
        E = self.entries
        return bool(np.all(E >= -tol) and np.all(E <= 1 + tol) and np.allclose(E.sum(axis=0), 1, atol=tol, rtol=0))


def confusion_matrix(
    inst: Instrument,
    inputs: Sequence[int] | None = None,
    prepared: Mapping[int, int] | None = None,
) -> ConfusionMatrix:
    """Report probabilities for computational inputs.

    By default the input ``|j>`` is prepared on the measured qudits with the
    rest maximally mixed. For an indirect measurement pass the data qudits
    as ``inputs`` and fix the readout preparation with ``prepared``.
    """
    d, n = inst.dims.d, inst.dims.n
    inputs = list(inst.measured if inputs is None else inputs)
    prepared = dict(prepared or {})
    if set(inputs) & set(prepared):
        raise DimensionError("a qudit cannot be both an input and prepared")
    others = [q for q in range(n) if q not in inputs and q not in prepared]
    input_states = list(all_digit_vectors(d, len(inputs)))
    C = np.zeros((len(inst.outcomes), len(input_states)))
    mixed = np.eye(d ** len(others)) / d ** len(others)
    fixed_q = list(prepared)
    fixed_ket = _basis_ket(tuple(prepared[q] for q in fixed_q), d) if fixed_q else np.ones(1)
    for col, j in enumerate(input_states):
        ket = np.kron(_basis_ket(j, d), fixed_ket)
        local = np.kron(np.outer(ket, ket.conj()), mixed)
        rho = embed(local, inputs + fixed_q + others, d, n)
        for row, k in enumerate(inst.outcomes):
            C[row, col] = float(np.trace(inst.branches[k].apply(rho)).real)
    return ConfusionMatrix(C, input_states)


# -------------------------------------------------------------- reductions


def prepare_and_discard(
    inst: Instrument,
    prepared: Mapping[int, int],
    measured: Sequence[int] | None = None,
    readout: str = "virtual",
) -> Instrument:
    """Fix the input of some qudits to ``|digit>`` and trace them out of the output.

    The result acts on the remaining qudits (renumbered in ascending order);
    ``measured`` gives the remaining qudits that the outcomes read out.
    """
    d, n = inst.dims.d, inst.dims.n
    fixed = sorted(prepared)
    keep = [q for q in range(n) if q not in prepared]
    sub = QuditDims(d, len(keep))
    Dk = sub.dim
    fixed_ket = _basis_ket(tuple(prepared[q] for q in fixed), d)
    fixed_proj = np.outer(fixed_ket, fixed_ket.conj())
    prep = np.zeros((inst.dims.dim**2, Dk * Dk), dtype=complex)
    for c in range(Dk * Dk):
        unit = np.zeros(Dk * Dk, dtype=complex)
        unit[c] = 1
        full = embed(np.kron(unit.reshape(Dk, Dk), fixed_proj), keep + fixed, d, n)
        prep[:, c] = full.reshape(-1)
    trace = np.zeros((Dk * Dk, inst.dims.dim**2), dtype=complex)
    for c in range(inst.dims.dim**2):
        unit = np.zeros(inst.dims.dim**2, dtype=complex)
        unit[c] = 1
        trace[:, c] = partial_trace(unit.reshape(inst.dims.dim, -1), keep, d, n).reshape(-1)
    branches = {k: Superoperator(trace @ S.matrix @ prep, sub) for k, S in inst.branches.items()}
    if measured is None:
        measured = tuple(range(min(inst.m, sub.n)))
    measured = tuple(measured)
    rest_n = sub.n - len(measured)
    return Instrument(sub, measured, branches, np.eye(d**rest_n), readout=readout)
