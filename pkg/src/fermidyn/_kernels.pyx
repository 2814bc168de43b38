# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled occupation-basis kernels (hot inner loops).

Mirrors fermidyn._kernels_py exactly; see there for the conventions.
States are uint64 bitmasks, lookups go through the basis' sorted-mask
table, phases are (-1)^popcount(mask & ((1 << p) - 1)).
"""
import numpy as np

cimport cython
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

BACKEND = "cython"


cdef inline int _popcount(uint64_t x) nogil:
    cdef int c = 0
    while x:
        x &= x - 1
        c += 1
    return c


cdef inline double _sign(uint64_t mask, int p) nogil:
    cdef uint64_t below = mask & ((<uint64_t>1 << p) - 1)
    return -1.0 if _popcount(below) & 1 else 1.0


cdef inline int64_t _lookup(const uint64_t[::1] sorted_masks,
                            const int64_t[::1] order, uint64_t mask) nogil:
    cdef int64_t lo = 0, hi = sorted_masks.shape[0] - 1, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if sorted_masks[mid] < mask:
            lo = mid + 1
        else:
            hi = mid
    return order[lo]


def creation_coo(basis_src, basis_dst, f):
    """COO triplets of a*(f) = sum_p f[p] a*_p mapping F_n -> F_{n+1}."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] fv = np.ascontiguousarray(f, dtype=complex)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] nz = np.nonzero(fv)[0].astype(np.int64)
    cdef const uint64_t[::1] src = basis_src.masks
    cdef const uint64_t[::1] dsorted = basis_dst._sorted_masks
    cdef const int64_t[::1] dorder = basis_dst._sorted
    cdef Py_ssize_t ncols = src.shape[0], nnz = nz.shape[0]
    cdef Py_ssize_t cap = ncols * nnz
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rows = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cols = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] vals = np.empty(cap, dtype=complex)
    cdef Py_ssize_t col, k, out = 0
    cdef int p
    cdef uint64_t mask
    for col in range(ncols):
        mask = src[col]
        for k in range(nnz):
            p = <int>nz[k]
            if (mask >> p) & 1:
                continue
            rows[out] = _lookup(dsorted, dorder, mask | (<uint64_t>1 << p))
            cols[out] = col
            vals[out] = _sign(mask, p) * fv[p]
            out += 1
    return rows[:out].copy(), cols[:out].copy(), vals[:out].copy()


def dgamma_coo(basis, K):
    """COO triplets of sum_{p,q} K[p,q] a*_p a_q on one sector."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] Km = np.ascontiguousarray(K, dtype=complex)
    cdef const uint64_t[::1] masks = basis.masks
    cdef const uint64_t[::1] bsorted = basis._sorted_masks
    cdef const int64_t[::1] border = basis._sorted
    cdef int modes = basis.modes
    cdef Py_ssize_t ncols = masks.shape[0]
    cdef Py_ssize_t cap = ncols * (1 + basis.n * modes)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rows = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cols = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] vals = np.empty(cap, dtype=complex)
    cdef Py_ssize_t col, out = 0
    cdef int p, q
    cdef uint64_t mask, removed
    cdef double ph_q
    cdef double complex diag, kpq
    for col in range(ncols):
        mask = masks[col]
        diag = 0
        for q in range(modes):
            if not (mask >> q) & 1:
                continue
            diag = diag + Km[q, q]
            ph_q = _sign(mask, q)
            removed = mask & ~(<uint64_t>1 << q)
            for p in range(modes):
                kpq = Km[p, q]
                if p == q or kpq == 0:
                    continue
                if (removed >> p) & 1:
                    continue
                rows[out] = _lookup(bsorted, border, removed | (<uint64_t>1 << p))
                cols[out] = col
                vals[out] = ph_q * _sign(removed, p) * kpq
                out += 1
        if diag != 0:
            rows[out] = col
            cols[out] = col
            vals[out] = diag
            out += 1
    return rows[:out].copy(), cols[:out].copy(), vals[:out].copy()


def pair_diagonal(basis, vtable):
    """Diagonal of sum_{i != j} V(s_i - s_j); vtable[d] = V at folded displacement d."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vt = np.ascontiguousarray(vtable, dtype=float)
    cdef const uint64_t[::1] masks = basis.masks
    cdef int modes = basis.modes
    cdef Py_ssize_t ncols = masks.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(ncols)
    cdef Py_ssize_t col
    cdef int i, j
    cdef uint64_t mask
    cdef double acc
    for col in range(ncols):
        mask = masks[col]
        acc = 0.0
        for i in range(modes):
            if not (mask >> i) & 1:
                continue
            for j in range(i + 1, modes):
                if (mask >> j) & 1:
                    acc += vt[j - i]
        out[col] = 2.0 * acc
    return out


def site_diagonal(basis, weights):
    """Diagonal of sum_{occupied p} weights[p]."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(weights, dtype=float)
    cdef const uint64_t[::1] masks = basis.masks
    cdef int modes = basis.modes
    cdef Py_ssize_t ncols = masks.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(ncols)
    cdef Py_ssize_t col
    cdef int p
    cdef uint64_t mask
    cdef double acc
    for col in range(ncols):
        mask = masks[col]
        acc = 0.0
        for p in range(modes):
            if (mask >> p) & 1:
                acc += w[p]
        out[col] = acc
    return out


def interaction_creation_coo(basis_src, basis_dst, h, vtable):
    """COO triplets of the commutator [pair interaction, a*(h)]: F_n -> F_{n+1}.

    Acting on |S>, mode y gets created with amplitude
    2 h[y] * sum_{s in S} vtable[|y - s|] times the usual fermionic phase;
    vtable is the displacement-folded potential table.
    """
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] hv = np.ascontiguousarray(h, dtype=complex)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vt = np.ascontiguousarray(vtable, dtype=float)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] nz = np.nonzero(hv)[0].astype(np.int64)
    cdef const uint64_t[::1] src = basis_src.masks
    cdef const uint64_t[::1] dsorted = basis_dst._sorted_masks
    cdef const int64_t[::1] dorder = basis_dst._sorted
    cdef int modes = basis_src.modes
    cdef Py_ssize_t ncols = src.shape[0], nnz = nz.shape[0]
    cdef Py_ssize_t cap = ncols * nnz
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rows = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cols = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] vals = np.empty(cap, dtype=complex)
    cdef Py_ssize_t col, k, out = 0
    cdef int y, s, d
    cdef uint64_t mask
    cdef double w
    for col in range(ncols):
        mask = src[col]
        for k in range(nnz):
            y = <int>nz[k]
            if (mask >> y) & 1:
                continue
            w = 0.0
            for s in range(modes):
                if (mask >> s) & 1:
                    d = y - s if y >= s else s - y
                    w += vt[d]
            if w == 0.0:
                continue
            rows[out] = _lookup(dsorted, dorder, mask | (<uint64_t>1 << y))
            cols[out] = col
            vals[out] = 2.0 * _sign(mask, y) * hv[y] * w
            out += 1
    return rows[:out].copy(), cols[:out].copy(), vals[:out].copy()


def embed_coo(basis_m, basis_n, C, scale):
    """COO triplets of scale * sum_{I,J} C[I,J] M_{I,J} on F_n.

    M_{I,J} = a*_{i_1}...a*_{i_m} a_{j_m}...a_{j_1} with I, J increasing.
    """
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] Cm = np.ascontiguousarray(C, dtype=complex)
    cdef double complex sc = scale
    cdef int m = basis_m.n
    cdef const uint64_t[::1] masks_n = basis_n.masks
    cdef const uint64_t[::1] nsorted = basis_n._sorted_masks
    cdef const int64_t[::1] norder = basis_n._sorted
    cdef const uint64_t[::1] msorted = basis_m._sorted_masks
    cdef const int64_t[::1] morder = basis_m._sorted
    cdef Py_ssize_t ncols = masks_n.shape[0], dm = Cm.shape[0]
    cdef Py_ssize_t col, jdx, idx_i, out = 0
    cdef int n = basis_n.n, modes = basis_n.modes

    if m == 0:
        lam = sc * Cm[0, 0]
        if lam == 0:
            e = np.empty(0)
            return e.astype(np.int64), e.astype(np.int64), e.astype(complex)
        idx = np.arange(ncols, dtype=np.int64)
        return idx, idx.copy(), np.full(ncols, lam, dtype=complex)

    # CSC-style layout of the nonzero entries per column of C
    nz_per_col = [np.nonzero(Cm[:, j])[0].astype(np.int64) for j in range(dm)]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] nz_ptr = np.zeros(dm + 1, dtype=np.int64)
    for jdx in range(dm):
        nz_ptr[jdx + 1] = nz_ptr[jdx] + nz_per_col[jdx].shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] nz_rows = (
        np.concatenate(nz_per_col) if nz_ptr[dm] > 0 else np.empty(0, dtype=np.int64)
    )
    # I-state site lists, flattened
    cdef cnp.ndarray[cnp.int64_t, ndim=2] istates = np.array(
        basis_m.states, dtype=np.int64
    ).reshape(dm, m)

    rows_l, cols_l, vals_l = [], [], []
    cdef int[64] occ
    cdef int[64] pos
    cdef int nocc, k, i, t, blocked, p
    cdef uint64_t mask, rest, new, jmask
    cdef double sgn_a, sgn_c
    cdef double complex cval

    for col in range(ncols):
        mask = masks_n[col]
        nocc = 0
        for p in range(modes):
            if (mask >> p) & 1:
                occ[nocc] = p
                nocc += 1
        # enumerate size-m index subsets pos[0] < ... < pos[m-1] of 0..nocc-1
        for k in range(m):
            pos[k] = k
        while True:
            rest = mask
            sgn_a = 1.0
            jmask = 0
            for k in range(m):
                p = occ[pos[k]]
                sgn_a *= _sign(rest, p)
                rest &= ~(<uint64_t>1 << p)
                jmask |= <uint64_t>1 << p
            jdx = _lookup(msorted, morder, jmask)
            for t in range(nz_ptr[jdx], nz_ptr[jdx + 1]):
                idx_i = nz_rows[t]
                new = rest
                sgn_c = 1.0
                blocked = 0
                for k in range(m - 1, -1, -1):
                    i = <int>istates[idx_i, k]
                    if (new >> i) & 1:
                        blocked = 1
                        break
                    sgn_c *= _sign(new, i)
                    new |= <uint64_t>1 << i
                if blocked:
                    continue
                cval = Cm[idx_i, jdx]
                rows_l.append(_lookup(nsorted, norder, new))
                cols_l.append(col)
                vals_l.append(sc * sgn_a * sgn_c * cval)
            # advance the combination
            k = m - 1
            while k >= 0 and pos[k] == nocc - m + k:
                k -= 1
            if k < 0:
                break
            pos[k] += 1
            for i in range(k + 1, m):
                pos[i] = pos[i - 1] + 1
    return (
        np.asarray(rows_l, dtype=np.int64),
        np.asarray(cols_l, dtype=np.int64),
        np.asarray(vals_l, dtype=complex),
    )
