"""Brute-force reference constructions used by the tests.

Everything here is written with explicit loops and dense matrices so that it
shares no code path with the package kernels.
"""

import itertools

import numpy as np


def omega(d):
    return np.exp(2j * np.pi / d)


def digits(index, d, n):
    out = []
    for _ in range(n):
        out.append(index % d)
        index //= d
    return tuple(reversed(out))


def index(digs, d):
    i = 0
    for v in digs:
        i = i * d + int(v)
    return i


def weyl(x, z, d):
    """``X^x Z^z`` from its action ``|j> -> w^(z.j) |j + x>``."""
    n = len(x)
    D = d**n
    M = np.zeros((D, D), dtype=complex)
    for j in range(D):
        jd = digits(j, d, n)
        phase = omega(d) ** (sum(a * b for a, b in zip(z, jd)) % d)
        out = tuple((a + b) % d for a, b in zip(jd, x))
        M[index(out, d), j] = phase
    return M


def labels(d, n):
    vecs = list(itertools.product(range(d), repeat=n))
    return [(x, z) for x in vecs for z in vecs]


def superop(kraus):
    """Superoperator from its action on every matrix unit, row-major vec."""
    D = kraus[0].shape[1]
    Do = kraus[0].shape[0]
    S = np.zeros((Do * Do, D * D), dtype=complex)
    for c in range(D * D):
        E = np.zeros((D, D), dtype=complex)
        E[c // D, c % D] = 1
        out = sum(K @ E @ K.conj().T for K in kraus)
        S[:, c] = out.reshape(-1)
    return S


def conj_superop(U):
    return superop([U])


def random_state(D, rng, rank=None):
    rank = D if rank is None else rank
    G = rng.normal(size=(D, rank)) + 1j * rng.normal(size=(D, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho)


def random_unitary(D, rng):
    g = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_kraus_instrument(d, n_rest, rng, env=2):
    """Kraus lists per outcome for a random instrument measuring the last qudit."""
    D = d ** (n_rest + 1)
    W = random_unitary(D * d * env, rng)[:, :D].reshape(D, d, env, D)
    return {k: [W[:, k, e, :] for e in range(env)] for k in range(d)}


def rc_average_bruteforce(branches, d, n_rest, side=None):
    """Dense average over every dressing tuple for one measured qudit placed last.

    ``branches[k]`` are superoperator matrices on rest (x) measured.
    """
    Dr = d**n_rest
    U = np.eye(Dr) if side is None else side
    X = weyl((1,), (0,), d)
    Z = weyl((0,), (1,), d)
    mp = np.linalg.matrix_power
    out = {k: np.zeros_like(branches[0]) for k in range(d)}
    rest_group = [weyl(x, z, d) for x, z in labels(d, n_rest)]
    count = 0
    for a, b, x in itertools.product(range(d), repeat=3):
        for G in rest_group:
            pre = np.kron(G, mp(Z, a) @ mp(X, (-x) % d))
            post = np.kron(U @ G.conj().T @ U.conj().T, mp(X, x) @ mp(Z, b))
            Pre, Post = conj_superop(pre), conj_superop(post)
            for k in range(d):
                out[k] += Post @ branches[(k - x) % d] @ Pre
            count += 1
    return {k: v / count for k, v in out.items()}


def kron_all(ops):
    out = np.ones((1, 1))
    for o in ops:
        out = np.kron(out, o)
    return out
