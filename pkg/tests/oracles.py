"""Independent brute-force oracles.

Everything here works on the full (unsymmetrized) tensor space of
dimension M^n with explicit permutation sums, never through the
package's occupation-basis kernels, so it can arbitrate signs and
normalization conventions.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def perm_sign(p) -> int:
    sign, seen = 1, [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        length, j = 0, i
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def antisymmetrizer(m: int, n: int) -> np.ndarray:
    """P on C^{M^n}: (1/n!) sum over permutations with signs."""
    dim = m**n
    P = np.zeros((dim, dim))
    strides = [m**k for k in range(n - 1, -1, -1)]
    for idx in range(dim):
        digits = [(idx // s) % m for s in strides]
        for sigma in itertools.permutations(range(n)):
            jdx = sum(digits[sigma[k]] * strides[k] for k in range(n))
            P[jdx, idx] += perm_sign(sigma) / math.factorial(n)
    return P


def occupation_isometry(m: int, n: int) -> np.ndarray:
    """Columns are the tensor-space images of the occupation basis states,
    (1/sqrt(n!)) sum_sigma sgn(sigma) e_{s_sigma(1)} x ... x e_{s_sigma(n)}."""
    states = list(itertools.combinations(range(m), n))
    strides = [m**k for k in range(n - 1, -1, -1)]
    Q = np.zeros((m**n, len(states)))
    for col, S in enumerate(states):
        for sigma in itertools.permutations(range(n)):
            idx = sum(S[sigma[k]] * strides[k] for k in range(n))
            Q[idx, col] += perm_sign(sigma) / math.sqrt(math.factorial(n))
    return Q


def tensor_vector(fs) -> np.ndarray:
    """f_1 x ... x f_n as a flat tensor-space vector."""
    out = np.array([1.0 + 0.0j])
    for f in fs:
        out = np.kron(out, np.asarray(f, dtype=complex))
    return out


def wedge_vector_oracle(m: int, fs) -> np.ndarray:
    """P (f_1 x ... x f_n) in the occupation basis."""
    n = len(fs)
    P = antisymmetrizer(m, n)
    Q = occupation_isometry(m, n)
    return Q.conj().T @ (P @ tensor_vector(fs))


def embed_oracle(m: int, C_occ: np.ndarray, mbody: int, n: int) -> np.ndarray:
    """P (C x Id_{n-m}) P compressed to F_n, C given in the occupation basis."""
    Qm = occupation_isometry(m, mbody)
    Qn = occupation_isometry(m, n)
    Ct = Qm @ np.asarray(C_occ, dtype=complex) @ Qm.conj().T
    big = np.kron(Ct, np.eye(m ** (n - mbody)))
    return Qn.conj().T @ big @ Qn


def wedge_operator_oracle(m: int, Ks) -> np.ndarray:
    """(1/n!) sum_sigma K_sigma(1) x ... x K_sigma(n), explicitly symmetrized,
    compressed to the occupation basis."""
    n = len(Ks)
    Qn = occupation_isometry(m, n)
    dim = m**n
    avg = np.zeros((dim, dim), dtype=complex)
    for sigma in itertools.permutations(range(n)):
        term = np.array([[1.0 + 0.0j]])
        for k in range(n):
            term = np.kron(term, np.asarray(Ks[sigma[k]], dtype=complex))
        avg += term
    avg /= math.factorial(n)
    return Qn.conj().T @ avg @ Qn


def elementary_symmetric(xs, kmax: int) -> list[float]:
    """e_0..e_kmax of the values xs by the standard recurrence."""
    e = [1.0] + [0.0] * kmax
    for x in xs:
        for k in range(kmax, 0, -1):
            e[k] += x * e[k - 1]
    return e


def truncated_free_occupations(energies, beta: float, nmax: int):
    """Eigenmode occupations of the particle-number-truncated free ensemble.

    Z = sum_{n <= nmax} e_n(x), x_i = exp(-beta eps_i);
    <n_i> = sum_{n <= nmax} x_i e_{n-1}(x without i) / Z.
    """
    xs = [math.exp(-beta * e) for e in energies]
    z = sum(elementary_symmetric(xs, nmax)[: nmax + 1])
    occ = []
    for i, xi in enumerate(xs):
        rest = xs[:i] + xs[i + 1 :]
        e_rest = elementary_symmetric(rest, nmax)
        occ.append(xi * sum(e_rest[:nmax]) / z)
    return np.array(occ), z
