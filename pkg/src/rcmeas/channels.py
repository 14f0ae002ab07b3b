"""Vectorization, superoperators, Choi tests, twirling and stochastic certificates.

Operators are vectorized in the computational matrix-unit basis, row-major:
``vec(M)[i*D + j] = M[i, j]``. With that choice ``rho -> A rho B`` has the
superoperator ``A (x) B^T`` and ``<<A|B>> = tr(A^dagger B)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _config, _kernels
from .errors import DimensionError, DomainError
from .weyl import QuditDims, WeylLabel, all_labels, is_unitary, weyl_matrix

# ------------------------------------------------------------- vectorization


def vectorize(M: np.ndarray, dims: QuditDims | None = None) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"vectorize expects a square matrix, got shape {M.shape}")
    if dims is not None and M.shape[0] != dims.dim:
        raise DimensionError(f"matrix of size {M.shape[0]} does not match dimension {dims.dim}")
    return M.reshape(-1).copy()


def devectorize(v: np.ndarray, dims: QuditDims | None = None) -> np.ndarray:
    v = np.asarray(v).reshape(-1)
    D = int(round(np.sqrt(v.size)))
    if D * D != v.size:
        raise DimensionError(f"vector of length {v.size} is not a vectorized square matrix")
    if dims is not None and D != dims.dim:
        raise DimensionError(f"vector of length {v.size} does not match dimension {dims.dim}")
    return v.reshape(D, D).copy()


def inner(A: np.ndarray, B: np.ndarray) -> complex:
    """``<<A|B>>`` computed from the vectorizations."""
    return complex(np.vdot(vectorize(A), vectorize(B)))


# ------------------------------------------------------------ superoperators


@dataclass(frozen=True, eq=False)
class Superoperator:
    """A linear map on operators of ``dims``, as a ``D^2 x D^2`` matrix."""

    matrix: np.ndarray
    dims: QuditDims

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        D2 = self.dims.dim**2
        if m.shape != (D2, D2):
            raise DimensionError(f"superoperator of shape {m.shape} does not match dims {self.dims}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.dims.dim

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        return compose(self, other)

    def __add__(self, other: "Superoperator") -> "Superoperator":
        _check_same(self, other)
        return Superoperator(self.matrix + other.matrix, self.dims)

    def __sub__(self, other: "Superoperator") -> "Superoperator":
        _check_same(self, other)
        return Superoperator(self.matrix - other.matrix, self.dims)

    def scale(self, c: complex) -> "Superoperator":
        return Superoperator(c * self.matrix, self.dims)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return devectorize(self.matrix @ vectorize(rho, self.dims), self.dims)

    def allclose(self, other: "Superoperator", tol: float | None = None) -> bool:
        _check_same(self, other)
        return bool(np.max(np.abs(self.matrix - other.matrix), initial=0.0) <= _config.resolve_tol(tol))

    def distance(self, other: "Superoperator") -> float:
        _check_same(self, other)
        return float(np.max(np.abs(self.matrix - other.matrix), initial=0.0))


def _check_same(a: Superoperator, b: Superoperator):
    if a.dims != b.dims:
        raise DimensionError(f"superoperator dims differ: {a.dims} vs {b.dims}")


def identity_superop(dims: QuditDims) -> Superoperator:
    return Superoperator(np.eye(dims.dim**2), dims)


def zero_superop(dims: QuditDims) -> Superoperator:
    return Superoperator(np.zeros((dims.dim**2,) * 2), dims)


def completeness_defect(kraus: Sequence[np.ndarray]) -> float:
    """``max |sum_k K^dagger K - I|``; zero iff the Kraus set is trace preserving."""
    ks = [np.asarray(K, dtype=complex) for K in kraus]
    acc = sum(K.conj().T @ K for K in ks)
    return float(np.max(np.abs(acc - np.eye(acc.shape[0]))))


def kraus_to_superop(kraus: Sequence[np.ndarray], dims: QuditDims) -> Superoperator:
    """Superoperator of ``rho -> sum_k K_k rho K_k^dagger``."""
    D = dims.dim
    acc = np.zeros((D * D, D * D), dtype=complex)
    for K in kraus:
        K = np.asarray(K, dtype=complex)
        if K.shape != (D, D):
            raise DimensionError(f"Kraus operator of shape {K.shape} does not match dimension {D}")
        acc += np.kron(K, K.conj())
    return Superoperator(acc, dims)


def unitary_channel(U: np.ndarray, dims: QuditDims, tol: float | None = None) -> Superoperator:
    U = np.asarray(U, dtype=complex)
    if U.shape != (dims.dim, dims.dim):
        raise DimensionError(f"unitary of shape {U.shape} does not match dimension {dims.dim}")
    if not is_unitary(U, tol):
        raise DomainError("matrix is not unitary within tolerance")
    return Superoperator(np.kron(U, U.conj()), dims)


def conjugate_left(S: Superoperator, U: np.ndarray) -> Superoperator:
    """``U-channel o S`` without forming the D^2 x D^2 channel matrix."""
    D = S.dim
    t = S.matrix.reshape(D, D, D * D)
    t = np.einsum("ia,ajk,jb->ibk", U, t, U.conj().T, optimize=True)
    return Superoperator(t.reshape(D * D, D * D), S.dims)


def conjugate_right(S: Superoperator, U: np.ndarray) -> Superoperator:
    """``S o U-channel``."""
    D = S.dim
    t = S.matrix.reshape(D * D, D, D)
    t = np.einsum("rab,ai,bj->rij", t, U, U.conj(), optimize=True)
    return Superoperator(t.reshape(D * D, D * D), S.dims)


def compose(A: Superoperator, B: Superoperator) -> Superoperator:
    """``A o B``: apply ``B`` first."""
    _check_same(A, B)
    return Superoperator(A.matrix @ B.matrix, A.dims)


def _as_tensor(S: Superoperator) -> np.ndarray:
    d, n = S.dims.d, S.dims.n
    return S.matrix.reshape((d,) * (4 * n))


def tensor(A: Superoperator, B: Superoperator) -> Superoperator:
    """Superoperator of ``A (x) B`` with ``A``'s qudits first."""
    if A.dims.d != B.dims.d:
        raise DimensionError("tensor product requires equal qudit dimension")
    Da, Db = A.dim, B.dim
    ta = A.matrix.reshape(Da, Da, Da, Da)
    tb = B.matrix.reshape(Db, Db, Db, Db)
    t = np.einsum("ijkl,IJKL->iIjJkKlL", ta, tb)
    dims = QuditDims(A.dims.d, A.dims.n + B.dims.n)
    return Superoperator(t.reshape(dims.dim**2, dims.dim**2), dims)


def permute_qudits(S: Superoperator, order: Sequence[int]) -> Superoperator:
    """Relabel qudits so that new qudit ``q`` is old qudit ``order[q]``."""
    n = S.dims.n
    order = list(order)
    if sorted(order) != list(range(n)):
        raise DimensionError(f"{order} is not a permutation of {n} qudits")
    axes = []
    for block in range(4):
        axes += [block * n + q for q in order]
    t = _as_tensor(S).transpose(axes)
    return Superoperator(t.reshape(S.matrix.shape), S.dims)


def embed_superop(S: Superoperator, targets: Sequence[int], dims: QuditDims) -> Superoperator:
    """Lift ``S`` acting on ``targets`` (in order) to all qudits of ``dims``."""
    targets = list(targets)
    if S.dims.n != len(targets) or S.dims.d != dims.d:
        raise DimensionError("superoperator does not match the target qudits")
    if len(set(targets)) != len(targets) or any(t < 0 or t >= dims.n for t in targets):
        raise DimensionError(f"invalid target qudits {targets}")
    rest = [q for q in range(dims.n) if q not in targets]
    full = tensor(S, identity_superop(QuditDims(dims.d, len(rest))))
    order = targets + rest
    return permute_qudits(full, [order.index(q) for q in range(dims.n)])


def partial_trace(rho: np.ndarray, keep: Sequence[int], d: int, n: int) -> np.ndarray:
    keep = list(keep)
    t = np.asarray(rho).reshape((d,) * (2 * n))
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    rows = [letters[q] for q in range(n)]
    cols = [letters[n + q] if q in keep else letters[q] for q in range(n)]
    out = "".join(rows[q] for q in keep) + "".join(cols[q] for q in keep)
    t = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    Dk = d ** len(keep)
    return t.reshape(Dk, Dk)


# ---------------------------------------------------------------- Choi tests


def choi_matrix(S: Superoperator) -> np.ndarray:
    """``J = sum_{kl} S(|k><l|) (x) |k><l|``."""
    D = S.dim
    t = S.matrix.reshape(D, D, D, D).transpose(0, 2, 1, 3)
    return t.reshape(D * D, D * D)


@dataclass(frozen=True)
class CPTPReport:
    cp: bool
    tp: bool
    choi_min_eig: float
    tp_defect: float


def cp_tp_check(S: Superoperator, tol: float | None = None) -> CPTPReport:
    tol = _config.resolve_tol(tol)
    J = choi_matrix(S)
    herm_defect = float(np.max(np.abs(J - J.conj().T)))
    min_eig = float(np.min(np.linalg.eigvalsh((J + J.conj().T) / 2)))
    D = S.dim
    diag_rows = np.arange(D) * (D + 1)
    tp_map = S.matrix[diag_rows].sum(axis=0)
    tp_defect = float(np.max(np.abs(tp_map - np.eye(D).reshape(-1))))
    return CPTPReport(
        cp=herm_defect <= tol and min_eig >= -tol,
        tp=tp_defect <= tol,
        choi_min_eig=min_eig,
        tp_defect=tp_defect,
    )


def superop_to_kraus(S: Superoperator, tol: float | None = None) -> list[np.ndarray]:
    """Kraus operators from the Choi eigendecomposition; requires CP."""
    tol = _config.resolve_tol(tol)
    J = choi_matrix(S)
    w, v = np.linalg.eigh((J + J.conj().T) / 2)
    if w.min(initial=0.0) < -tol:
        raise DomainError(f"map is not completely positive (Choi eigenvalue {w.min():.3g})")
    D = S.dim
    return [np.sqrt(lam) * v[:, i].reshape(D, D) for i, lam in enumerate(w) if lam > tol]


# ----------------------------------------------------------------- twirling


@dataclass(frozen=True, eq=False)
class OneDesign:
    """A finite unitary 1-design on ``dims``; ``labels`` is set for Weyl designs."""

    elements: tuple
    dims: QuditDims
    labels: tuple | None = None
    name: str = "custom"

    def __post_init__(self):
        if not self.elements:
            raise DomainError("a 1-design needs at least one element")
        els = []
        for G in self.elements:
            G = np.array(G, dtype=complex)
            if G.shape != (self.dims.dim, self.dims.dim):
                raise DimensionError(f"design element of shape {G.shape} does not match {self.dims}")
            G.setflags(write=False)
            els.append(G)
        object.__setattr__(self, "elements", tuple(els))

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def is_weyl(self) -> bool:
        return self.labels is not None


def weyl_design(dims: QuditDims) -> OneDesign:
    """The projective Weyl group on ``dims``, in label order."""
    labels = tuple(all_labels(dims.d, dims.n))
    return OneDesign(tuple(weyl_matrix(L) for L in labels), dims, labels, name="weyl")


def weyl_channel(label: WeylLabel) -> Superoperator:
    W = weyl_matrix(label)
    return Superoperator(np.kron(W, W.conj()), label.dims)


def twirl(S: Superoperator, design: OneDesign) -> Superoperator:
    """``E_G G^dagger o S o G`` by enumeration in design order."""
    if design.dims != S.dims:
        raise DimensionError("design does not act on the superoperator's system")
    acc = np.zeros_like(S.matrix)
    for G in design.elements:
        acc += conjugate_right(conjugate_left(S, G.conj().T), G).matrix
    return Superoperator(acc / len(design), S.dims)


def weyl_twirl(S: Superoperator) -> Superoperator:
    """Weyl twirl computed as the projection onto the Weyl-channel span."""
    c = _kernels.weyl_coefficients(S.matrix, S.dims.d, S.dims.n)
    return Superoperator(_kernels.weyl_expand(c, S.dims.d, S.dims.n), S.dims)


def apply_weyl_left(S: Superoperator, label: WeylLabel) -> Superoperator:
    xi, zi = label.indices
    return Superoperator(_kernels.weyl_apply_left(S.matrix, xi, zi, S.dims.d, S.dims.n), S.dims)


def apply_weyl_right(S: Superoperator, label: WeylLabel) -> Superoperator:
    xi, zi = label.indices
    return Superoperator(_kernels.weyl_apply_right(S.matrix, xi, zi, S.dims.d, S.dims.n), S.dims)


# ------------------------------------------------------ stochastic certificate


@dataclass(frozen=True)
class StochasticCertificate:
    """Outcome of :func:`is_unnormalized_stochastic`.

    ``residual`` is the distance from the certified map to its Weyl-channel
    expansion. When the certificate was computed after a Weyl twirl,
    ``pre_twirl_residual`` holds the distance for the untwirled input.
    """

    is_stochastic: bool
    identity_weight: float
    weyl_weights: dict = field(default_factory=dict)
    residual: float = 0.0
    max_imag: float = 0.0
    min_weight: float = 0.0
    total_weight: float = 0.0
    pre_twirl_residual: float | None = None

    @property
    def worst(self) -> float:
        """Largest violation among residual, imaginary parts and negative weights."""
        return max(self.residual, self.max_imag, max(0.0, -self.min_weight))


def is_unnormalized_stochastic(
    S: Superoperator, tol: float | None = None, twirl_first: bool = False
) -> StochasticCertificate:
    """Certify ``S = sum c_{x,z} W_{x,z}`` with real ``c >= 0`` and ``c_{0,0} > 0``.

    The zero map is accepted as the empty unnormalized stochastic channel.
    With ``twirl_first`` the certificate describes the Weyl twirl of ``S``.
    """
    tol = _config.resolve_tol(tol)
    d, n = S.dims.d, S.dims.n
    c = _kernels.weyl_coefficients(S.matrix, d, n)
    recon = _kernels.weyl_expand(c, d, n)
    residual = float(np.max(np.abs(S.matrix - recon)))
    pre = None
    if twirl_first:
        pre, residual = residual, 0.0
    re = c.real
    max_imag = float(np.max(np.abs(c.imag)))
    min_weight = float(re.min())
    total = float(re.sum())
    c00 = float(re[0, 0])
    weights = {}
    for xi, zi in zip(*np.nonzero(np.abs(c) > tol)):
        weights[WeylLabel.from_indices(int(xi), int(zi), d, n)] = float(re[xi, zi])
    is_zero = float(np.max(np.abs(c))) <= tol
    ok = residual <= tol and max_imag <= tol and min_weight >= -tol and (c00 > tol or is_zero)
    return StochasticCertificate(
        is_stochastic=bool(ok),
        identity_weight=c00,
        weyl_weights=weights,
        residual=residual,
        max_imag=max_imag,
        min_weight=min_weight,
        total_weight=total,
        pre_twirl_residual=pre,
    )
