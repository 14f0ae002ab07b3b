"""Gate matrices, side-file formats and noise models for the circuit DSL."""

from __future__ import annotations

import numpy as np

from ..channels import Superoperator, embed_superop, unitary_channel
from ..errors import DomainError
from ..noise import overrotated_cx
from ..weyl import (
    QuditDims,
    WeylLabel,
    controlled_weyl,
    fourier,
    weyl_matrix,
    x_matrix,
    z_matrix,
)

SINGLE = {"X", "Z", "F"}
ARITY = {"X": 1, "Z": 1, "F": 1, "CX": 2}
GATE_NAMES = ("X", "Z", "F", "CX", "CW", "W", "U", "CLIFFORD")
REF_GATES = ("U", "CLIFFORD")
NOISE_MODELS = ("overrot", "depol", "coherent")


def matrix_power(M: np.ndarray, p: int) -> np.ndarray:
    if p >= 0:
        return np.linalg.matrix_power(M, p)
    return np.linalg.matrix_power(M.conj().T, -p)


def cx_matrix(d: int) -> np.ndarray:
    """``|c, t> -> |c, t + c>``."""
    D = d * d
    M = np.zeros((D, D))
    for c in range(d):
        for t in range(d):
            M[c * d + (t + c) % d, c * d + t] = 1
    return M


def digit_param(value, length: int, d: int, name: str) -> tuple:
    s = str(value)
    if len(s) != length or not s.isdigit() or any(int(ch) >= d for ch in s):
        raise DomainError(f"parameter {name}={s} must be {length} digits below {d}")
    return tuple(int(ch) for ch in s)


def gate_unitary(gate, d: int, matrices: dict) -> np.ndarray:
    """Matrix of ``gate`` on its own qudits (in the listed order)."""
    name, k = gate.name, len(gate.qudits)
    p = int(gate.param("pow", 1))
    if name == "X":
        return matrix_power(x_matrix(d), p)
    if name == "Z":
        return matrix_power(z_matrix(d), p)
    if name == "F":
        return matrix_power(fourier(d), p)
    if name == "CX":
        return matrix_power(cx_matrix(d), p)
    if name == "W":
        x = digit_param(gate.param("x", "0" * k), k, d, "x")
        z = digit_param(gate.param("z", "0" * k), k, d, "z")
        return weyl_matrix(WeylLabel(x, z, d))
    if name == "CW":
        k_t = k - 1
        x = digit_param(gate.param("x", "0" * k_t), k_t, d, "x")
        z = digit_param(gate.param("z", "0" * k_t), k_t, d, "z")
        A = weyl_matrix(WeylLabel(x, z, d))
        return controlled_weyl(A, float(gate.param("t", 1.0)), d)
    if name in REF_GATES:
        return np.asarray(matrices[gate.ref], dtype=complex)
    raise DomainError(f"unknown gate {name}")


# --------------------------------------------------------------- side files


def read_matrix_file(path) -> np.ndarray:
    """Plain-text complex matrix: ``rows cols`` then row-major ``re im`` pairs."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_matrix_text(text)


def parse_matrix_text(text: str) -> np.ndarray:
    lines = [ln.split("#", 1)[0] for ln in text.splitlines()]
    tokens = " ".join(lines).split()
    if len(tokens) < 2:
        raise DomainError("matrix file needs a 'rows cols' header")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
        vals = [float(t) for t in tokens[2:]]
    except ValueError as exc:
        raise DomainError(f"matrix file has a non-numeric entry: {exc}") from None
    if rows < 1 or cols < 1:
        raise DomainError("matrix dimensions must be positive")
    if len(vals) != 2 * rows * cols:
        raise DomainError(f"matrix file has {len(vals) // 2} entries, expected {rows * cols}")
    arr = np.array(vals).reshape(rows, cols, 2)
    return arr[..., 0] + 1j * arr[..., 1]


def format_matrix_text(M: np.ndarray) -> str:
    M = np.asarray(M, dtype=complex)
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    for row in M:
        lines.append(" ".join(f"{v.real!r} {v.imag!r}" for v in row))
    return "\n".join(lines) + "\n"


def parse_clifford_text(text: str, d: int, n: int) -> dict:
    """Generator images ``{"X0": (label, phase_units), ...}``.

    Each line reads ``X0 = x=10 z=00 [phase=p]``, meaning ``V X_0 V^dag =
    exp(i pi p / d) X^x Z^z``.
    """
    images = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"label-map line '{line}' lacks '='")
        gen, rhs = (s.strip() for s in line.split("=", 1))
        fields = dict(f.split("=", 1) for f in rhs.split() if "=" in f)
        if "x" not in fields or "z" not in fields:
            raise DomainError(f"label-map line '{line}' needs x= and z= digits")
        label = WeylLabel(digit_param(fields["x"], n, d, "x"), digit_param(fields["z"], n, d, "z"), d)
        images[gen] = (label, int(fields.get("phase", 0)))
    wanted = [f"X{i}" for i in range(n)] + [f"Z{i}" for i in range(n)]
    missing = [g for g in wanted if g not in images]
    extra = [g for g in images if g not in wanted]
    if missing or extra:
        raise DomainError(f"label map must list exactly {', '.join(wanted)}")
    return images


def clifford_from_images(images: dict, d: int, n: int, tol: float = 1e-9) -> np.ndarray:
    """Unitary ``V`` with the given generator images, unique up to global phase."""
    D = d**n
    ops = {}
    for gen, (label, p) in images.items():
        ops[gen] = np.exp(1j * np.pi * p / d) * weyl_matrix(label)
    proj = np.eye(D, dtype=complex)
    for i in range(n):
        Zi = ops[f"Z{i}"]
        avg = sum(np.linalg.matrix_power(Zi, s) for s in range(d)) / d
        proj = avg @ proj
    col = int(np.argmax(np.linalg.norm(proj, axis=0)))
    v0 = proj[:, col]
    if np.linalg.norm(v0) < 1e-9:
        raise DomainError("label map has no common +1 eigenvector of the Z images")
    v0 = v0 / np.linalg.norm(v0)
    V = np.zeros((D, D), dtype=complex)
    for j in range(D):
        digits = [(j // d ** (n - 1 - i)) % d for i in range(n)]
        v = v0
        for i in range(n):
            v = np.linalg.matrix_power(ops[f"X{i}"], digits[i]) @ v
        V[:, j] = v
    if np.max(np.abs(V.conj().T @ V - np.eye(D))) > 1e-8:
        raise DomainError("label map does not define a unitary (images violate the commutation relations)")
    for i in range(n):
        for kind, base in (("X", x_matrix(d)), ("Z", z_matrix(d))):
            gen_m = _embed1(base, i, d, n)
            if np.max(np.abs(V @ gen_m @ V.conj().T - ops[f"{kind}{i}"])) > 1e-8:
                raise DomainError(f"label map is inconsistent at generator {kind}{i}")
    return V


def _embed1(M, q, d, n):
    out = np.ones((1, 1))
    for i in range(n):
        out = np.kron(out, M if i == q else np.eye(d))
    return out


# ---------------------------------------------------------------- noise


def random_hermitian(D: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
    H = (H + H.conj().T) / 2
    return H / np.linalg.norm(H, 2)


def depolarizing(dims: QuditDims, p: float) -> Superoperator:
    """``(1 - p) id + p * (rho -> tr(rho) I / D)``."""
    D = dims.dim
    vI = np.eye(D).reshape(-1)
    full = np.outer(vI, vI) / D
    return Superoperator((1 - p) * np.eye(D * D) + p * full, dims)


def noisy_gate_channel(gate, binding, d: int, matrices: dict) -> Superoperator:
    """Channel on the gate's own qudits with ``binding`` applied."""
    k = len(gate.qudits)
    local = QuditDims(d, k)
    G = gate_unitary(gate, d, matrices)
    if binding is None:
        return unitary_channel(G, local)
    model = binding.model
    if model == "overrot":
        if gate.name != "CX" or d != 2 or int(gate.param("pow", 1)) != 1:
            raise DomainError("overrot noise applies only to a qubit CX gate")
        return unitary_channel(overrotated_cx(float(binding.param("phi"))), local)
    if model == "depol":
        p = float(binding.param("p"))
        if not 0 <= p <= 1 + 1 / (local.dim**2 - 1):
            raise DomainError(f"depolarizing probability {p} out of range")
        return depolarizing(local, p) @ unitary_channel(G, local)
    if model == "coherent":
        eps = float(binding.param("eps"))
        H = random_hermitian(local.dim, int(binding.param("seed", 0)))
        w, v = np.linalg.eigh(H)
        E = v @ np.diag(np.exp(-1j * eps * w)) @ v.conj().T
        return unitary_channel(E @ G, local)
    raise DomainError(f"unknown noise model {model}")


def place(S: Superoperator, qudits, dims: QuditDims) -> Superoperator:
    if list(qudits) == list(range(dims.n)):
        return S
    return embed_superop(S, list(qudits), dims)
