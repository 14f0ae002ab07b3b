"""Cyclic characters and qudit Weyl, Fourier and controlled-Weyl operators.

Conventions used throughout the package:

* Digit vectors are ordered by qudit, qudit 0 being the leftmost tensor
  factor, so the computational index of ``j`` is ``sum_i j_i d^(n-1-i)``.
* ``X = sum_j |j+1><j|`` and ``Z = sum_j chi_1(j) |j><j|``.
* A :class:`WeylLabel` ``(x, z)`` names ``X^x Z^z`` with no phase; the
  projective group is all the channel level ever sees.
* Non-integer powers of a Weyl matrix use the principal branch that sends
  the eigenvalue ``chi_b(1)`` to ``exp(2 pi i b s / d)`` with ``b`` in
  ``[0, d)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import _config
from .errors import DimensionCapError, DimensionError, DomainError


@dataclass(frozen=True)
class QuditDims:
    """``n`` qudits of dimension ``d``.

    ``n = 0`` is allowed and denotes the trivial one-dimensional system,
    which is what the unmeasured factor becomes when every qudit is measured.
    """

    d: int
    n: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f"qudit dimension must be an integer >= 2, got {self.d}")
        if int(self.n) != self.n or self.n < 0:
            raise DomainError(f"qudit count must be a non-negative integer, got {self.n}")
        cap = _config.get_dim_cap()
        if self.d**self.n > cap:
            raise DimensionCapError(
                f"Hilbert dimension {self.d}^{self.n} = {self.d ** self.n} exceeds cap {cap}"
            )

    @property
    def dim(self) -> int:
        return self.d**self.n

    def sub(self, n: int) -> "QuditDims":
        return QuditDims(self.d, n)


def _check_d(d):
    if int(d) != d or d < 2:
        raise DomainError(f"qudit dimension must be an integer >= 2, got {d}")


def as_digits(v, d: int, n: int | None = None) -> tuple[int, ...]:
    """Normalize an int, string of digits or sequence to a tuple reduced mod ``d``."""
    if isinstance(v, str):
        v = [int(ch) for ch in v]
    elif np.isscalar(v):
        v = [int(v)]
    out = tuple(int(a) % d for a in v)
    if n is not None and len(out) != n:
        raise DimensionError(f"expected {n} digits, got {len(out)}")
    return out


def digits_to_index(digits: Sequence[int], d: int) -> int:
    idx = 0
    for a in digits:
        idx = idx * d + int(a)
    return idx


def index_to_digits(index: int, d: int, n: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        index, r = divmod(index, d)
        out.append(r)
    return tuple(reversed(out))


def all_digit_vectors(d: int, n: int) -> Iterator[tuple[int, ...]]:
    """Every vector in Z_d^n in lexicographic order."""
    return itertools.product(range(d), repeat=n)


def chi(a, b, d: int) -> complex:
    """Character ``chi_a(b) = prod_i exp(2 pi i a_i b_i / d)``."""
    _check_d(d)
    a = np.atleast_1d(np.asarray(a, dtype=np.int64))
    b = np.atleast_1d(np.asarray(b, dtype=np.int64))
    if a.shape != b.shape:
        raise DimensionError(f"character arguments have lengths {a.size} and {b.size}")
    p = int(np.sum(a * b)) % d
    return complex(np.exp(2j * np.pi * p / d))


@dataclass(frozen=True)
class WeylLabel:
    """Label ``(x, z)`` of the projective Weyl element ``X^x Z^z``."""

    x: tuple[int, ...]
    z: tuple[int, ...]
    d: int

    def __post_init__(self):
        _check_d(self.d)
        x = as_digits(self.x, self.d)
        z = as_digits(self.z, self.d)
        if len(x) != len(z):
            raise DimensionError("x and z parts of a Weyl label must have equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def dims(self) -> QuditDims:
        return QuditDims(self.d, self.n)

    @classmethod
    def identity(cls, d: int, n: int) -> "WeylLabel":
        return cls((0,) * n, (0,) * n, d)

    @classmethod
    def from_indices(cls, xi: int, zi: int, d: int, n: int) -> "WeylLabel":
        return cls(index_to_digits(xi, d, n), index_to_digits(zi, d, n), d)

    @property
    def indices(self) -> tuple[int, int]:
        return digits_to_index(self.x, self.d), digits_to_index(self.z, self.d)

    def is_identity(self) -> bool:
        return not any(self.x) and not any(self.z)

    def __add__(self, other: "WeylLabel") -> "WeylLabel":
        if other.d != self.d or other.n != self.n:
            raise DimensionError("cannot add Weyl labels of different shapes")
        return WeylLabel(
            tuple(a + b for a, b in zip(self.x, other.x)),
            tuple(a + b for a, b in zip(self.z, other.z)),
            self.d,
        )

    def __neg__(self) -> "WeylLabel":
        return WeylLabel(tuple(-a for a in self.x), tuple(-a for a in self.z), self.d)

    def __sub__(self, other: "WeylLabel") -> "WeylLabel":
        return self + (-other)

    def concat(self, other: "WeylLabel") -> "WeylLabel":
        return WeylLabel(self.x + other.x, self.z + other.z, self.d)

    def restrict(self, qudits: Sequence[int]) -> "WeylLabel":
        return WeylLabel(tuple(self.x[q] for q in qudits), tuple(self.z[q] for q in qudits), self.d)

    def __str__(self) -> str:
        return "x=" + "".join(map(str, self.x)) + ";z=" + "".join(map(str, self.z))

    @classmethod
    def parse(cls, text: str, d: int) -> "WeylLabel":
        parts = dict(p.split("=", 1) for p in text.split(";"))
        return cls(parts["x"], parts["z"], d)


def all_labels(d: int, n: int) -> list[WeylLabel]:
    """All ``d^(2n)`` labels, ordered by ``(x index, z index)``."""
    vecs = list(all_digit_vectors(d, n))
    return [WeylLabel(x, z, d) for x in vecs for z in vecs]


def x_matrix(d: int) -> np.ndarray:
    _check_d(d)
    return np.roll(np.eye(d, dtype=complex), 1, axis=0)


def z_matrix(d: int) -> np.ndarray:
    _check_d(d)
    return np.diag(np.exp(2j * np.pi * np.arange(d) / d))


def weyl_matrix(label: WeylLabel) -> np.ndarray:
    """Dense ``X^x Z^z = tensor_i X^{x_i} Z^{z_i}``."""
    d = label.d
    QuditDims(d, label.n)
    X, Z = x_matrix(d), z_matrix(d)
    out = np.ones((1, 1), dtype=complex)
    for xi, zi in zip(label.x, label.z):
        out = np.kron(out, np.linalg.matrix_power(X, xi) @ np.linalg.matrix_power(Z, zi))
    return out


def computational_projector(j, d: int) -> np.ndarray:
    j = as_digits(j, d)
    D = d ** len(j)
    QuditDims(d, len(j))
    P = np.zeros((D, D), dtype=complex)
    k = digits_to_index(j, d)
    P[k, k] = 1.0
    return P


def projector_from_z_average(j, d: int) -> np.ndarray:
    """``|j><j|`` built as the character average ``E_z conj(chi_j(z)) Z^z``."""
    j = as_digits(j, d)
    n = len(j)
    D = d**n
    acc = np.zeros((D, D), dtype=complex)
    zeros = (0,) * n
    for z in all_digit_vectors(d, n):
        acc += np.conj(chi(j, z, d)) * weyl_matrix(WeylLabel(zeros, z, d))
    return acc / D


def fourier(d: int) -> np.ndarray:
    """``F = d^{-1/2} sum_{a,b} chi_a(b) |a><b|``."""
    _check_d(d)
    a = np.arange(d)
    return np.exp(2j * np.pi * np.outer(a, a) / d) / np.sqrt(d)


def is_unitary(U: np.ndarray, tol: float | None = None) -> bool:
    tol = _config.resolve_tol(tol)
    U = np.asarray(U)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        return False
    return bool(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) <= tol)


def infer_d(D: int) -> int:
    """Smallest base ``d >= 2`` of which ``D`` is a power."""
    for d in range(2, D + 1):
        m = D
        while m % d == 0:
            m //= d
        if m == 1:
            return d
    raise DimensionError(f"dimension {D} is not a qudit power")


def spectral_projectors(A: np.ndarray, d: int | None = None, tol: float | None = None) -> list[np.ndarray]:
    """Eigenprojectors ``P_b`` of ``A`` for eigenvalue ``chi_b(1)``, ``b = 0..d-1``.

    Requires ``A`` unitary with ``A^d = I``; uses ``P_b = (1/d) sum_j conj(chi_b(j)) A^j``.
    """
    tol = _config.resolve_tol(tol)
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if d is None:
        d = infer_d(A.shape[0])
    if not is_unitary(A, tol):
        raise DomainError("matrix is not unitary within tolerance")
    powers = [np.eye(A.shape[0], dtype=complex)]
    for _ in range(d):
        powers.append(powers[-1] @ A)
    if np.max(np.abs(powers[d] - powers[0])) > tol:
        raise DomainError(f"eigenvalues of the matrix are not {d}-th roots of unity")
    omega = np.exp(2j * np.pi / d)
    return [sum(omega ** (-b * j) * powers[j] for j in range(d)) / d for b in range(d)]


def weyl_power(A: np.ndarray, s: float, d: int | None = None, tol: float | None = None) -> np.ndarray:
    """Principal-branch power ``A^s = sum_b exp(2 pi i b s / d) P_b``."""
    if d is None:
        d = infer_d(np.shape(A)[0])
    P = spectral_projectors(A, d, tol)
    return sum(np.exp(2j * np.pi * b * s / d) * P[b] for b in range(d))


def weyl_log(A: np.ndarray, d: int | None = None, tol: float | None = None) -> np.ndarray:
    """``ln(A) = sum_b (2 pi i b / d) P_b``; the ``b = 0`` eigenspace contributes 0."""
    if d is None:
        d = infer_d(np.shape(A)[0])
    P = spectral_projectors(A, d, tol)
    return sum((2j * np.pi * b / d) * P[b] for b in range(d))


def controlled_weyl(A: np.ndarray, t: float = 1.0, d: int | None = None, tol: float | None = None) -> np.ndarray:
    """Controlled power ``sum_j |j><j| (x) A^{j t}`` with a single control qudit first."""
    A = np.asarray(A, dtype=complex)
    if d is None:
        d = infer_d(A.shape[0])
    P = spectral_projectors(A, d, tol)
    D = A.shape[0]
    out = np.zeros((d * D, d * D), dtype=complex)
    for j in range(d):
        block = sum(np.exp(2j * np.pi * b * j * t / d) * P[b] for b in range(d))
        out[j * D : (j + 1) * D, j * D : (j + 1) * D] = block
    return out


def label_of(M: np.ndarray, d: int, tol: float | None = None) -> tuple[WeylLabel, complex]:
    """Return ``(label, phase)`` with ``M = phase * X^x Z^z``; raise if ``M`` is not such a matrix."""
    tol = _config.resolve_tol(tol)
    M = np.asarray(M, dtype=complex)
    D = M.shape[0]
    n = 0
    while d**n < D:
        n += 1
    if d**n != D or M.shape != (D, D):
        raise DimensionError(f"shape {M.shape} is not a {d}-qudit operator")
    xi = int(np.argmax(np.abs(M[:, 0])))
    x = index_to_digits(xi, d, n)
    phase = M[xi, 0]
    if abs(abs(phase) - 1) > max(tol, 1e-6):
        raise DomainError("matrix is not proportional to a Weyl operator")
    z = []
    for q in range(n):
        e = [0] * n
        e[q] = 1
        col = digits_to_index(e, d)
        row = digits_to_index([(a + b) % d for a, b in zip(x, e)], d)
        ratio = M[row, col] / phase
        z.append(int(round(np.angle(ratio) * d / (2 * np.pi))) % d)
    label = WeylLabel(x, tuple(z), d)
    if np.max(np.abs(M - phase * weyl_matrix(label))) > max(tol, 1e-6):
        raise DomainError("matrix is not proportional to a Weyl operator")
    return label, complex(phase)


def embed(op: np.ndarray, targets: Sequence[int], d: int, n: int) -> np.ndarray:
    """Lift an operator on ``targets`` (in the given order) to all ``n`` qudits."""
    targets = list(targets)
    k = len(targets)
    op = np.asarray(op, dtype=complex)
    if op.shape != (d**k, d**k):
        raise DimensionError(f"operator shape {op.shape} does not match {k} qudits of dimension {d}")
    if len(set(targets)) != k or any(t < 0 or t >= n for t in targets):
        raise DimensionError(f"invalid target qudits {targets} for {n} qudits")
    if k == n and targets == list(range(n)):
        return op.copy()
    rest = [q for q in range(n) if q not in targets]
    full = np.kron(op, np.eye(d ** len(rest)))
    order = targets + rest
    perm = [order.index(q) for q in range(n)]
    t = full.reshape((d,) * (2 * n))
    t = t.transpose(perm + [p + n for p in perm])
    return t.reshape(d**n, d**n)
