"""Pure-Python occupation-basis kernels (fallback backend).

Every function mirrors a routine in the compiled extension
``fermidyn._kernels``; results must agree bit-for-bit.  States are
bitmasks; the fermionic phase for acting at mode p is
(-1)^popcount(mask & ((1 << p) - 1)).

Matrix-building kernels return COO triplets (rows, cols, vals).
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"


def _phase(mask: int, p: int) -> int:
    return -1 if (mask & ((1 << p) - 1)).bit_count() & 1 else 1


def creation_coo(basis_src, basis_dst, f):
    """COO triplets of a*(f) = sum_p f[p] a*_p mapping F_n -> F_{n+1}."""
    f = np.asarray(f, dtype=complex)
    nz = np.nonzero(f)[0]
    rows, cols, vals = [], [], []
    for col, mask_u in enumerate(basis_src.masks):
        mask = int(mask_u)
        for p in nz:
            p = int(p)
            if (mask >> p) & 1:
                continue
            rows.append(basis_dst.index_of_mask(mask | (1 << p)))
            cols.append(col)
            vals.append(_phase(mask, p) * f[p])
    return (
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(vals, dtype=complex),
    )


def dgamma_coo(basis, K):
    """COO triplets of sum_{p,q} K[p,q] a*_p a_q on one sector."""
    K = np.asarray(K, dtype=complex)
    rows, cols, vals = [], [], []
    for col, mask_u in enumerate(basis.masks):
        mask = int(mask_u)
        diag = 0.0 + 0.0j
        for q in range(basis.modes):
            if not (mask >> q) & 1:
                continue
            diag += K[q, q]
            ph_q = _phase(mask, q)
            removed = mask & ~(1 << q)
            for p in range(basis.modes):
                if p == q or K[p, q] == 0:
                    continue
                if (removed >> p) & 1:
                    continue
                rows.append(basis.index_of_mask(removed | (1 << p)))
                cols.append(col)
                vals.append(ph_q * _phase(removed, p) * K[p, q])
        if diag != 0:
            rows.append(col)
            cols.append(col)
            vals.append(diag)
    return (
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(vals, dtype=complex),
    )


def pair_diagonal(basis, vtable):
    """Diagonal of sum_{i != j} V(s_i - s_j); vtable[d] = V at folded displacement d."""
    vtable = np.asarray(vtable, dtype=float)
    out = np.zeros(basis.dim)
    for idx, state in enumerate(basis.states):
        acc = 0.0
        n = len(state)
        for i in range(n):
            for j in range(i + 1, n):
                acc += vtable[state[j] - state[i]]
        out[idx] = 2.0 * acc
    return out


def site_diagonal(basis, weights):
    """Diagonal of sum_{occupied p} weights[p]."""
    weights = np.asarray(weights, dtype=float)
    out = np.zeros(basis.dim)
    for idx, state in enumerate(basis.states):
        out[idx] = sum(weights[p] for p in state)
    return out


def embed_coo(basis_m, basis_n, C, scale):
    """COO triplets of scale * sum_{I,J} C[I,J] M_{I,J} on F_n.

    M_{I,J} = a*_{i_1}...a*_{i_m} a_{j_m}...a_{j_1} with I, J increasing;
    at n = m this monomial is exactly |I><J| (positive sign), so the sum
    reproduces the compression P (C x Id_{n-m}) P when scale = 1/c(n, m).
    """
    C = np.asarray(C, dtype=complex)
    m = basis_m.n
    rows, cols, vals = [], [], []
    if m == 0:
        lam = scale * C[0, 0]
        if lam != 0:
            for idx in range(basis_n.dim):
                rows.append(idx)
                cols.append(idx)
                vals.append(lam)
    else:
        col_nz = [np.nonzero(C[:, j])[0] for j in range(basis_m.dim)]
        for col, state in enumerate(basis_n.states):
            mask = int(basis_n.masks[col])
            for J in _subsets(state, m):
                jmask = 0
                sgn_a = 1
                rest = mask
                for j in J:  # annihilate smallest first: a_{j_m}...a_{j_1}|S>
                    sgn_a *= _phase(rest, j)
                    rest &= ~(1 << j)
                    jmask |= 1 << j
                jdx = basis_m.index_of_mask(jmask)
                for idx_i in col_nz[jdx]:
                    I = basis_m.states[idx_i]
                    new = rest
                    sgn_c = 1
                    blocked = False
                    for i in reversed(I):  # create largest first: a*_{i_1}...a*_{i_m}
                        if (new >> i) & 1:
                            blocked = True
                            break
                        sgn_c *= _phase(new, i)
                        new |= 1 << i
                    if blocked:
                        continue
                    rows.append(basis_n.index_of_mask(new))
                    cols.append(col)
                    vals.append(scale * sgn_a * sgn_c * C[idx_i, jdx])
    return (
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(vals, dtype=complex),
    )


def interaction_creation_coo(basis_src, basis_dst, h, vtable):
    """COO triplets of the commutator [pair interaction, a*(h)]: F_n -> F_{n+1}.

    Acting on |S>, mode y gets created with amplitude
    2 h[y] * sum_{s in S} vtable[|y - s|] times the usual fermionic phase;
    vtable is the displacement-folded potential table.
    """
    h = np.asarray(h, dtype=complex)
    vtable = np.asarray(vtable, dtype=float)
    nz = np.nonzero(h)[0]
    rows, cols, vals = [], [], []
    for col, (mask_u, state) in enumerate(zip(basis_src.masks, basis_src.states)):
        mask = int(mask_u)
        for y in nz:
            y = int(y)
            if (mask >> y) & 1:
                continue
            w = sum(vtable[abs(y - s)] for s in state)
            if w == 0:
                continue
            rows.append(basis_dst.index_of_mask(mask | (1 << y)))
            cols.append(col)
            vals.append(2.0 * _phase(mask, y) * h[y] * w)
    return (
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(vals, dtype=complex),
    )


def _subsets(state, m):
    import itertools

    return itertools.combinations(state, m)
