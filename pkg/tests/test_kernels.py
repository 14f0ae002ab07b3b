import json
import os
import subprocess
import sys

import numpy as np
import oracles
import pytest

from rcmeas import _kernels as K
from rcmeas.channels import twirl, weyl_design
from rcmeas.instruments import random_instrument
from rcmeas.weyl import QuditDims

SIZES = [(2, 1), (3, 1), (2, 2), (5, 1), (3, 2)]

needs_numba = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")


def _random_superop(d, n, rng):
    D = d**n
    return rng.normal(size=(D * D, D * D)) + 1j * rng.normal(size=(D * D, D * D))


@pytest.mark.parametrize("d,n", SIZES)
def test_apply_kernels_match_dense_conjugation(d, n, rng):
    S = _random_superop(d, n, rng)
    for x, z in [oracles.labels(d, n)[i] for i in rng.choice(d ** (2 * n), 4, replace=False)]:
        W = oracles.conj_superop(oracles.weyl(x, z, d))
        xi, zi = oracles.index(x, d), oracles.index(z, d)
        assert np.allclose(K.numpy_weyl_apply_left(S, xi, zi, *K.tables(d, n), d), W @ S, atol=1e-10)
        assert np.allclose(K.numpy_weyl_apply_right(S, xi, zi, *K.tables(d, n), d), S @ W, atol=1e-10)


@pytest.mark.parametrize("d,n", SIZES)
def test_coefficients_pick_out_weyl_channels(d, n):
    for x, z in oracles.labels(d, n)[:: max(1, d ** (2 * n) // 5)]:
        W = oracles.conj_superop(oracles.weyl(x, z, d))
        c = K.weyl_coefficients(W, d, n)
        want = np.zeros_like(c)
        want[oracles.index(x, d), oracles.index(z, d)] = 1
        assert np.allclose(c, want, atol=1e-12)


@pytest.mark.parametrize("d,n", [(2, 1), (3, 1), (2, 2)])
def test_expand_inverts_coefficients_on_twirled_maps(d, n, rng):
    dims = QuditDims(d, n)
    S = random_instrument(dims, (n - 1,), rng).total()
    T = twirl(S, weyl_design(dims)).matrix
    assert np.allclose(K.weyl_expand(K.weyl_coefficients(T, d, n), d, n), T, atol=1e-12)


@needs_numba
@pytest.mark.parametrize("d,n", SIZES)
def test_numba_and_numpy_kernels_agree(d, n, rng):
    S = _random_superop(d, n, rng)
    t = K.tables(d, n)
    for x, z in [(0, 0), (1, d ** n - 1), (d ** n - 1, 1)]:
        assert np.allclose(K.numba_weyl_apply_left(S, x, z, *t, d), K.numpy_weyl_apply_left(S, x, z, *t, d), atol=1e-12)
        assert np.allclose(K.numba_weyl_apply_right(S, x, z, *t, d), K.numpy_weyl_apply_right(S, x, z, *t, d), atol=1e-12)
    c_nb = K.numba_weyl_coefficients(S, *t, d)
    c_np = K.numpy_weyl_coefficients(S, *t, d)
    assert np.allclose(c_nb, c_np, atol=1e-12)
    assert np.allclose(K.numba_weyl_expand(c_np, *t, d), K.numpy_weyl_expand(c_np, *t, d), atol=1e-12)


def test_tables_are_read_only():
    add, dot, omega = K.tables(3, 2)
    with pytest.raises(ValueError):
        add[0, 0] = 5


@pytest.mark.parametrize("flag,want", [("1", "numpy"), ("0", "numba" if K.HAVE_NUMBA else "numpy")])
def test_environment_flag_selects_backend(flag, want):
    env = dict(os.environ, RCMEAS_DISABLE_NUMBA=flag)
    code = "import json; from rcmeas import _kernels; print(json.dumps(_kernels.backend()))"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert json.loads(out.stdout) == want


def test_pure_numpy_backend_gives_same_average():
    code = (
        "import numpy as np, json\n"
        "from rcmeas import rc_average_exact, random_instrument, QuditDims\n"
        "inst = random_instrument(QuditDims(2, 2), (1,), np.random.default_rng(3))\n"
        "avg = rc_average_exact(inst).averaged\n"
        "print(json.dumps([[z.real, z.imag] for z in avg.branches[(0,)].matrix.ravel()]))\n"
    )
    runs = {}
    for flag in ("1", "0"):
        env = dict(os.environ, RCMEAS_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        runs[flag] = np.array(json.loads(out.stdout))
    assert np.allclose(runs["1"], runs["0"], atol=1e-12)
