"""Antisymmetric Fock space over the finite one-body chain.

Operators are graded families of per-sector blocks: a grade-k operator
stores, for each source sector n, the matrix of its F_n -> F_{n+k}
block in the occupation-number basis.  The space is truncated at
``nmax``; creation out of the top sector maps to zero, which is the only
place truncation error can enter.

Blocks are dense below :data:`DENSE_DIM_CAP` sector dimension and
scipy.sparse CSR beyond.
"""
from __future__ import annotations

import math
from typing import Iterable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._backend import kernels
from .basis import SectorBasis, sector_basis, sector_dim
from .errors import ShapeError
from .lattice import OneBodySpace, OneBodyVector

__all__ = [
    "DENSE_DIM_CAP",
    "FockSpace",
    "FockVector",
    "FockOperator",
    "create",
    "annihilate",
    "number_op",
    "creation_product_vector",
    "wedge_vector",
    "wedge_operator",
    "embed",
    "placement_count",
]

DENSE_DIM_CAP = 1000


# ---------------------------------------------------------------------------
# dense/sparse block helpers


def _prefer_sparse(rows: int, cols: int) -> bool:
    return max(rows, cols) > DENSE_DIM_CAP


def _assemble(rows, cols, vals, shape):
    if _prefer_sparse(*shape):
        return sp.csr_matrix((vals, (rows, cols)), shape=shape, dtype=complex)
    out = np.zeros(shape, dtype=complex)
    np.add.at(out, (rows, cols), vals)
    return out


def _is_sparse(block) -> bool:
    return sp.issparse(block)


def _adjoint(block):
    return block.conj().T if not _is_sparse(block) else block.conj().T.tocsr()


def _norm2(block) -> float:
    """Largest singular value; deterministic also for sparse blocks."""
    if _is_sparse(block):
        k = min(block.shape)
        if k <= DENSE_DIM_CAP:
            return float(np.linalg.norm(block.toarray(), 2))
        if block.nnz == 0:
            return 0.0
        v0 = np.ones(min(block.shape)) / math.sqrt(min(block.shape))
        s = spla.svds(block, k=1, v0=v0, return_singular_vectors=False)
        return float(s[0])
    if block.size == 0:
        return 0.0
    return float(np.linalg.norm(block, 2))


def _zeros_like_shape(shape):
    if _prefer_sparse(*shape):
        return sp.csr_matrix(shape, dtype=complex)
    return np.zeros(shape, dtype=complex)


# ---------------------------------------------------------------------------


class FockSpace:
    """Truncated antisymmetric Fock space: sectors n = 0..nmax over M modes."""

    def __init__(self, space: OneBodySpace, nmax: int):
        if nmax < 0 or nmax > space.sites:
            raise ValueError(f"need 0 <= nmax <= {space.sites}, got {nmax}")
        self.space = space
        self.modes = space.sites
        self.nmax = nmax

    def basis(self, n: int) -> SectorBasis:
        return sector_basis(self.modes, n)

    def dim(self, n: int) -> int:
        return sector_dim(self.modes, n)

    def sectors(self) -> range:
        return range(self.nmax + 1)

    def __repr__(self) -> str:
        return f"FockSpace(modes={self.modes}, nmax={self.nmax})"


class FockVector:
    """Element of the truncated Fock space: per-sector coefficient blocks."""

    def __init__(self, fspace: FockSpace, blocks: dict[int, np.ndarray] | None = None):
        self.fspace = fspace
        self.blocks: dict[int, np.ndarray] = {}
        for n, b in (blocks or {}).items():
            b = np.asarray(b, dtype=complex)
            if b.shape != (fspace.dim(n),):
                raise ShapeError(f"sector {n} block has shape {b.shape}")
            self.blocks[n] = b

    @classmethod
    def vacuum(cls, fspace: FockSpace) -> "FockVector":
        return cls(fspace, {0: np.ones(1, dtype=complex)})

    def sector(self, n: int) -> np.ndarray:
        if n in self.blocks:
            return self.blocks[n]
        return np.zeros(self.fspace.dim(n), dtype=complex)

    def norm(self) -> float:
        return math.sqrt(sum(float(np.vdot(b, b).real) for b in self.blocks.values()))

    def inner(self, other: "FockVector") -> complex:
        acc = 0.0 + 0.0j
        for n, b in self.blocks.items():
            if n in other.blocks:
                acc += np.vdot(b, other.blocks[n])
        return complex(acc)

    def scaled(self, z: complex) -> "FockVector":
        return FockVector(self.fspace, {n: z * b for n, b in self.blocks.items()})

    def __add__(self, other: "FockVector") -> "FockVector":
        blocks = {n: self.sector(n) + other.sector(n)
                  for n in set(self.blocks) | set(other.blocks)}
        return FockVector(self.fspace, blocks)

    def __sub__(self, other: "FockVector") -> "FockVector":
        return self + other.scaled(-1.0)


class FockOperator:
    """Grade-k family of sector blocks; ``block(n)`` maps F_n to F_{n+k}."""

    def __init__(self, fspace: FockSpace, grade: int, blocks: dict | None = None):
        self.fspace = fspace
        self.grade = grade
        self.blocks: dict = {}
        for n, b in (blocks or {}).items():
            self._check_shape(n, b)
            self.blocks[n] = b

    def _check_shape(self, n: int, b) -> None:
        k = self.grade
        if n < 0 or n > self.fspace.nmax or not (0 <= n + k <= self.fspace.nmax):
            raise ShapeError(f"source sector {n} invalid for grade {k}")
        want = (self.fspace.dim(n + k), self.fspace.dim(n))
        if b.shape != want:
            raise ShapeError(f"block {n} has shape {b.shape}, expected {want}")

    # -- construction helpers ------------------------------------------------

    @classmethod
    def identity(cls, fspace: FockSpace) -> "FockOperator":
        blocks = {}
        for n in fspace.sectors():
            d = fspace.dim(n)
            blocks[n] = sp.identity(d, format="csr", dtype=complex) if _prefer_sparse(d, d) \
                else np.eye(d, dtype=complex)
        return cls(fspace, 0, blocks)

    @classmethod
    def zero(cls, fspace: FockSpace, grade: int = 0) -> "FockOperator":
        return cls(fspace, grade, {})

    @classmethod
    def from_diagonals(cls, fspace: FockSpace, diags: dict[int, np.ndarray]) -> "FockOperator":
        blocks = {}
        for n, d in diags.items():
            d = np.asarray(d, dtype=complex)
            dim = fspace.dim(n)
            blocks[n] = sp.diags(d, format="csr") if _prefer_sparse(dim, dim) else np.diag(d)
        return cls(fspace, 0, blocks)

    # -- block access ----------------------------------------------------------

    def block(self, n: int):
        """Block out of source sector n (zeros if absent)."""
        if n in self.blocks:
            return self.blocks[n]
        k = self.grade
        if n < 0 or n > self.fspace.nmax or not (0 <= n + k <= self.fspace.nmax):
            raise ShapeError(f"source sector {n} invalid for grade {k}")
        return _zeros_like_shape((self.fspace.dim(n + k), self.fspace.dim(n)))

    def source_sectors(self) -> list[int]:
        k = self.grade
        lo, hi = max(0, -k), min(self.fspace.nmax, self.fspace.nmax - k)
        return list(range(lo, hi + 1))

    # -- algebra ---------------------------------------------------------------

    def __add__(self, other: "FockOperator") -> "FockOperator":
        if self.grade != other.grade:
            raise ShapeError("cannot add operators of different grade")
        blocks = {}
        for n in set(self.blocks) | set(other.blocks):
            blocks[n] = self.block(n) + other.block(n)
        return FockOperator(self.fspace, self.grade, blocks)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        return self + (other * (-1.0))

    def __mul__(self, z: complex) -> "FockOperator":
        return FockOperator(self.fspace, self.grade, {n: b * z for n, b in self.blocks.items()})

    __rmul__ = __mul__

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        """Operator composition self @ other (grades add)."""
        k = self.grade + other.grade
        blocks = {}
        for n, b in other.blocks.items():
            mid = n + other.grade
            if not (0 <= mid + self.grade <= self.fspace.nmax):
                continue
            if mid in self.blocks:
                blocks[n] = self.blocks[mid] @ b
        return FockOperator(self.fspace, k, blocks)

    def adjoint(self) -> "FockOperator":
        blocks = {}
        for n, b in self.blocks.items():
            blocks[n + self.grade] = _adjoint(b)
        return FockOperator(self.fspace, -self.grade, blocks)

    def commutator(self, other: "FockOperator") -> "FockOperator":
        return self @ other - other @ self

    def anticommutator(self, other: "FockOperator") -> "FockOperator":
        return self @ other + other @ self

    def apply(self, vec: FockVector) -> FockVector:
        out: dict[int, np.ndarray] = {}
        for n, v in vec.blocks.items():
            if n in self.blocks:
                w = self.blocks[n] @ v
                tgt = n + self.grade
                out[tgt] = out.get(tgt, 0) + np.asarray(w).ravel()
        return FockVector(self.fspace, {n: np.asarray(v) for n, v in out.items()})

    # -- norms -------------------------------------------------------------

    def seminorm(self, n: int) -> float:
        """Operator norm of the block out of sector n: |A restricted to F_n|."""
        if n not in self.blocks:
            self.block(n)  # shape validation
            return 0.0
        return _norm2(self.blocks[n])

    def norm(self) -> float:
        """Largest singular value over all stored blocks."""
        return max((self.seminorm(n) for n in self.blocks), default=0.0)

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        out_blocks = []
        for n in sorted(self.blocks):
            b = self.blocks[n]
            coo = sp.coo_matrix(b)
            entries = [
                [int(i), int(j), float(v.real), float(v.imag)]
                for i, j, v in zip(coo.row, coo.col, coo.data)
            ]
            out_blocks.append(
                {"n": int(n), "rows": int(b.shape[0]), "cols": int(b.shape[1]),
                 "entries": entries}
            )
        return {"grade": self.grade, "nmax": self.fspace.nmax, "blocks": out_blocks}

    @classmethod
    def from_json_dict(cls, fspace: FockSpace, data: dict) -> "FockOperator":
        if data["nmax"] != fspace.nmax:
            raise ShapeError("nmax mismatch in serialized operator")
        blocks = {}
        for blk in data["blocks"]:
            rows = [e[0] for e in blk["entries"]]
            cols = [e[1] for e in blk["entries"]]
            vals = [complex(e[2], e[3]) for e in blk["entries"]]
            blocks[blk["n"]] = _assemble(rows, cols, vals, (blk["rows"], blk["cols"]))
        return cls(fspace, data["grade"], blocks)


# ---------------------------------------------------------------------------
# second-quantized constructors


def _coeffs(f) -> np.ndarray:
    if isinstance(f, OneBodyVector):
        return f.coefficients
    return np.asarray(f, dtype=complex)


def create(fspace: FockSpace, f) -> FockOperator:
    """Creation operator a*(f), grade +1; the top sector maps to zero."""
    fv = _coeffs(f)
    blocks = {}
    for n in range(fspace.nmax):
        bsrc, bdst = fspace.basis(n), fspace.basis(n + 1)
        rows, cols, vals = kernels.creation_coo(bsrc, bdst, fv)
        blocks[n] = _assemble(rows, cols, vals, (bdst.dim, bsrc.dim))
    return FockOperator(fspace, +1, blocks)


def annihilate(fspace: FockSpace, f) -> FockOperator:
    """Annihilation operator a(f) = create(f)* (antilinear in f)."""
    return create(fspace, f).adjoint()


def number_op(fspace: FockSpace, f) -> FockOperator:
    """Local number operator n(f) = a*(f) a(f)."""
    return create(fspace, f) @ annihilate(fspace, f)


def dgamma(fspace: FockSpace, K, n: int):
    """Second quantization of a one-body matrix on one sector:
    sum_{p,q} K[p,q] a*_p a_q restricted to F_n."""
    b = fspace.basis(n)
    rows, cols, vals = kernels.dgamma_coo(b, np.asarray(K, dtype=complex))
    return _assemble(rows, cols, vals, (b.dim, b.dim))


def creation_product_vector(fspace: FockSpace, fs: Iterable) -> FockVector:
    """a*(f_1) ... a*(f_n) applied to the vacuum."""
    vec = FockVector.vacuum(fspace)
    for f in reversed(list(fs)):
        vec = create(fspace, f).apply(vec)
    return vec


def wedge_vector(fspace: FockSpace, fs) -> FockVector:
    """f_1 ^ ... ^ f_n as a sector-n Fock vector.

    Computed through a*(f_1)...a*(f_n) vacuum = sqrt(n!) (f_1 ^ ... ^ f_n).
    """
    fs = list(fs)
    n = len(fs)
    if n > fspace.nmax:
        raise ShapeError(f"wedge of {n} vectors exceeds nmax={fspace.nmax}")
    return creation_product_vector(fspace, fs).scaled(1.0 / math.sqrt(math.factorial(n)))


def wedge_operator(fspace: FockSpace, Ks) -> np.ndarray:
    """(K_1 ^ ... ^ K_n) restricted to F_n, for one-body matrices K_i.

    Entries are (1/n!) sum_tau sgn(tau) det D(tau) with
    D(tau)[k, j] = K_k[t_{tau(k)}, s_j]; this is the compression of the
    single tensor-product term K_1 x ... x K_n to the antisymmetric
    subspace, which equals the symmetrized wedge there.
    """
    import itertools

    Ks = [np.asarray(K, dtype=complex) for K in Ks]
    n = len(Ks)
    if n == 0:
        raise ValueError("need at least one factor")
    basis = fspace.basis(n)
    dim = basis.dim
    out = np.zeros((dim, dim), dtype=complex)
    perms = [(p, _perm_sign(p)) for p in itertools.permutations(range(n))]
    fact = math.factorial(n)
    for r, T in enumerate(basis.states):
        for c, S in enumerate(basis.states):
            acc = 0.0 + 0.0j
            for tau, sgn in perms:
                D = np.empty((n, n), dtype=complex)
                for k in range(n):
                    D[k, :] = Ks[k][T[tau[k]], S]
                acc += sgn * np.linalg.det(D)
            out[r, c] = acc / fact
    return out


def _perm_sign(p) -> int:
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


def placement_count(n: int, m: int) -> int:
    """c(n, m) = n!/(n-m)!: ordered placements of m bodies among n slots."""
    if not 0 <= m <= n:
        raise ShapeError(f"need 0 <= m <= n, got m={m}, n={n}")
    return math.factorial(n) // math.factorial(n - m)


def embed(fspace: FockSpace, C, m: int, n: int):
    """Compression of C x Id_{n-m} to F_n for an m-body matrix C on F_m.

    Expanded over occupation matrix units as
    (1/binom(n, m)) sum_{I,J} C[I,J] a*_{i_1}..a*_{i_m} a_{j_m}..a_{j_1},
    whose restriction to F_m reproduces C exactly.
    """
    if m > n:
        raise ShapeError(f"cannot embed {m}-body component into sector {n}")
    C = C.toarray() if sp.issparse(C) else np.asarray(C, dtype=complex)
    bm, bn = fspace.basis(m), fspace.basis(n)
    if C.shape != (bm.dim, bm.dim):
        raise ShapeError(f"component shape {C.shape} does not match sector {m}")
    scale = 1.0 / math.comb(n, m)
    rows, cols, vals = kernels.embed_coo(bm, bn, C, scale)
    return _assemble(rows, cols, vals, (bn.dim, bn.dim))
