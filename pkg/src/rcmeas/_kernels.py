"""Inner loops over Weyl labels.

Every Weyl-conjugation channel is a monomial matrix in the matrix-unit basis:
``W(|i><j|)W^dagger = chi_z(i - j) |i+x><j+x|`` for ``W = X^x Z^z``. The
kernels below exploit that to decompose superoperators into Weyl channels
and to apply Weyl channels in O(D^4) instead of dense O(D^6) products.

Each kernel has a numba implementation and a pure-numpy one. The numba path
is used when numba imports and ``RCMEAS_DISABLE_NUMBA`` is unset (or "0").
Both are importable directly so they can be benchmarked side by side.

Index tables (see :func:`tables`):
    add[i, x]  index of digits(i) + digits(x) mod d
    dot[z, i]  sum_k z_k i_k mod d
    omega[p]   exp(2 pi i p / d)
"""

import functools
import os

import numpy as np

_flag = os.environ.get("RCMEAS_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _flag not in ("", "0", "false", "no")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


@functools.lru_cache(maxsize=64)
def tables(d: int, n: int):
    """Return read-only ``(add, dot, omega)`` tables for ``n`` qudits of dimension ``d``."""
    D = d**n
    digits = np.zeros((D, n), dtype=np.int64)
    idx = np.arange(D)
    for q in range(n - 1, -1, -1):
        digits[:, q] = idx % d
        idx = idx // d
    weights = d ** np.arange(n - 1, -1, -1, dtype=np.int64)
    summed = (digits[:, None, :] + digits[None, :, :]) % d
    add = np.ascontiguousarray(summed @ weights, dtype=np.int64)
    dot = np.ascontiguousarray((digits @ digits.T) % d, dtype=np.int64)
    omega = np.exp(2j * np.pi * np.arange(d) / d)
    for arr in (add, dot, omega):
        arr.setflags(write=False)
    return add, dot, omega


# ---------------------------------------------------------------- numpy path


def _pairs(D):
    ii, jj = np.divmod(np.arange(D * D), D)
    return ii, jj


def numpy_weyl_coefficients(S, add, dot, omega, d):
    D = add.shape[0]
    ii, jj = _pairs(D)
    phi = omega[dot]  # phi[z, i] = chi_z(i)
    out = np.empty((D, D), dtype=np.complex128)
    cols = np.arange(D * D)
    for x in range(D):
        rows = add[ii, x] * D + add[jj, x]
        g = S[rows, cols].reshape(D, D)
        out[x] = np.einsum("zi,ij,zj->z", phi.conj(), g, phi)
    return out / (D * D)


def numpy_weyl_expand(c, add, dot, omega, d):
    D = add.shape[0]
    ii, jj = _pairs(D)
    phi = omega[dot]
    S = np.zeros((D * D, D * D), dtype=np.complex128)
    cols = np.arange(D * D)
    for x in range(D):
        rows = add[ii, x] * D + add[jj, x]
        S[rows, cols] = np.einsum("z,zi,zj->ij", c[x], phi, phi.conj()).reshape(-1)
    return S


def _perm_phase(x, z, add, dot, omega, d):
    D = add.shape[0]
    ii, jj = _pairs(D)
    rows = add[ii, x] * D + add[jj, x]
    phase = omega[(dot[z, ii] - dot[z, jj]) % d]
    return rows, phase


def numpy_weyl_apply_left(S, x, z, add, dot, omega, d):
    rows, phase = _perm_phase(x, z, add, dot, omega, d)
    out = np.empty_like(S)
    out[rows] = phase[:, None] * S
    return out


def numpy_weyl_apply_right(S, x, z, add, dot, omega, d):
    rows, phase = _perm_phase(x, z, add, dot, omega, d)
    return S[:, rows] * phase[None, :]


# ---------------------------------------------------------------- numba path


def _coefficients_loops(S, add, dot, omega, d):
    D = add.shape[0]
    out = np.zeros((D, D), dtype=np.complex128)
    for x in range(D):
        for i in range(D):
            ix = add[i, x]
            for j in range(D):
                s = S[ix * D + add[j, x], i * D + j]
                if s == 0:
                    continue
                for z in range(D):
                    out[x, z] += omega[(dot[z, j] - dot[z, i]) % d] * s
    return out / (D * D)


def _expand_loops(c, add, dot, omega, d):
    D = add.shape[0]
    S = np.zeros((D * D, D * D), dtype=np.complex128)
    for x in range(D):
        for i in range(D):
            ix = add[i, x]
            for j in range(D):
                val = 0j
                for z in range(D):
                    val += c[x, z] * omega[(dot[z, i] - dot[z, j]) % d]
                S[ix * D + add[j, x], i * D + j] = val
    return S


def _apply_left_loops(S, x, z, add, dot, omega, d):
    D = add.shape[0]
    out = np.empty_like(S)
    ncol = S.shape[1]
    for i in range(D):
        for j in range(D):
            ph = omega[(dot[z, i] - dot[z, j]) % d]
            src = i * D + j
            dst = add[i, x] * D + add[j, x]
            for c in range(ncol):
                out[dst, c] = ph * S[src, c]
    return out


def _apply_right_loops(S, x, z, add, dot, omega, d):
    D = add.shape[0]
    nrow = S.shape[0]
    out = np.empty_like(S)
    src = np.empty(D * D, dtype=np.int64)
    ph = np.empty(D * D, dtype=S.dtype)
    for i in range(D):
        for j in range(D):
            src[i * D + j] = add[i, x] * D + add[j, x]
            ph[i * D + j] = omega[(dot[z, i] - dot[z, j]) % d]
    # row-major walk keeps both reads and writes contiguous per row
    for r in range(nrow):
        for c in range(D * D):
            out[r, c] = ph[c] * S[r, src[c]]
    return out

if HAVE_NUMBA:
    numba_weyl_coefficients = numba.njit(cache=True, nogil=True)(_coefficients_loops)
    numba_weyl_expand = numba.njit(cache=True, nogil=True)(_expand_loops)
    numba_weyl_apply_left = numba.njit(cache=True, nogil=True)(_apply_left_loops)
    numba_weyl_apply_right = numba.njit(cache=True, nogil=True)(_apply_right_loops)
else:  # pragma: no cover
    numba_weyl_coefficients = numba_weyl_expand = None
    numba_weyl_apply_left = numba_weyl_apply_right = None

if USE_NUMBA:
    _coeffs, _expand = numba_weyl_coefficients, numba_weyl_expand
    _left, _right = numba_weyl_apply_left, numba_weyl_apply_right
else:
    _coeffs, _expand = numpy_weyl_coefficients, numpy_weyl_expand
    _left, _right = numpy_weyl_apply_left, numpy_weyl_apply_right


def weyl_coefficients(S, d, n):
    """Coefficients ``c[x, z] = <<W_{x,z}|S>> / D^2`` indexed by label indices."""
    add, dot, omega = tables(d, n)
    return _coeffs(np.ascontiguousarray(S, dtype=np.complex128), add, dot, omega, d)


def weyl_expand(c, d, n):
    """Inverse of :func:`weyl_coefficients` restricted to the Weyl-channel span."""
    add, dot, omega = tables(d, n)
    return _expand(np.ascontiguousarray(c, dtype=np.complex128), add, dot, omega, d)


def weyl_apply_left(S, x, z, d, n):
    """``W_{x,z} o S`` where ``x``, ``z`` are label indices."""
    add, dot, omega = tables(d, n)
    return _left(np.ascontiguousarray(S, dtype=np.complex128), int(x), int(z), add, dot, omega, d)


def weyl_apply_right(S, x, z, d, n):
    """``S o W_{x,z}`` where ``x``, ``z`` are label indices."""
    add, dot, omega = tables(d, n)
    return _right(np.ascontiguousarray(S, dtype=np.complex128), int(x), int(z), add, dot, omega, d)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
