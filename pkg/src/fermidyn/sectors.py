"""Canonical sector decompositions and the level-descent calculus.

A particle-number-preserving observable restricted to sector n splits as
a sum of m-body components extended by identity factors,

    A restricted to F_n  =  sum_m  c(n, m) * embed(C^(m), n),

with c(n, m) = n!/(n-m)! in the normalized convention (components are
then level-independent) or coefficient 1 in the paper convention (the
components absorb c).  ``extract`` computes the canonical components by
recursive subtraction from the bottom sector up; ``descend`` maps a
level-n decomposition to level n-1 by dropping the top component and,
in the paper convention, rescaling component m by (n-m)/n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import LevelError, ShapeError
from .fock import FockOperator, FockSpace, creation_product_vector, embed, number_op, placement_count
from .lattice import OneBodyVector, translate

__all__ = [
    "SectorDecomposition",
    "extract",
    "realize",
    "descend",
    "realized_family",
    "clustering_correlator",
    "ClusterPoint",
    "alternating_number_product",
    "separation_residuals",
]

NORMALIZED = "normalized"
PAPER = "paper"


@dataclass(frozen=True)
class SectorDecomposition:
    """Components C^(0)..C^(level), each a matrix on its m-particle sector."""

    fspace: FockSpace
    level: int
    components: tuple
    convention: str = NORMALIZED

    def __post_init__(self):
        if self.level < 0:
            raise LevelError("decomposition level must be >= 0")
        if len(self.components) != self.level + 1:
            raise ShapeError(
                f"level {self.level} needs {self.level + 1} components, "
                f"got {len(self.components)}"
            )
        if self.convention not in (NORMALIZED, PAPER):
            raise ValueError(f"unknown convention {self.convention!r}")
        for m, c in enumerate(self.components):
            d = self.fspace.dim(m)
            if c.shape != (d, d):
                raise ShapeError(f"component {m} has shape {c.shape}, expected {(d, d)}")

    def component(self, m: int):
        return self.components[m]

    def to_convention(self, convention: str) -> "SectorDecomposition":
        if convention == self.convention:
            return self
        comps = []
        for m, c in enumerate(self.components):
            f = placement_count(self.level, m)
            comps.append(c * f if convention == PAPER else c / f)
        return SectorDecomposition(self.fspace, self.level, tuple(comps), convention)

    def to_json_dict(self) -> dict:
        comps = []
        for m, c in enumerate(self.components):
            coo = sp.coo_matrix(c)
            comps.append(
                {"m": m, "entries": [
                    [int(i), int(j), float(v.real), float(v.imag)]
                    for i, j, v in zip(coo.row, coo.col, coo.data)
                ]}
            )
        return {"level": self.level, "convention": self.convention, "components": comps}

    @classmethod
    def from_json_dict(cls, fspace: FockSpace, data: dict) -> "SectorDecomposition":
        comps = []
        for blk in data["components"]:
            m = blk["m"]
            d = fspace.dim(m)
            c = np.zeros((d, d), dtype=complex)
            for i, j, re, im in blk["entries"]:
                c[i, j] = complex(re, im)
            comps.append(c)
        return cls(fspace, data["level"], tuple(comps), data["convention"])


def realize(dec: SectorDecomposition, n: int):
    """Evaluate sum_m [c(n, m)] embed(C^(m), n) as a matrix on F_n."""
    if n != dec.level:
        raise ShapeError(f"decomposition at level {dec.level} realized at {n}")
    fspace = dec.fspace
    out = None
    for m, c in enumerate(dec.components):
        if _component_is_zero(c):
            continue
        coeff = placement_count(n, m) if dec.convention == NORMALIZED else 1
        term = embed(fspace, c, m, n) * coeff
        out = term if out is None else out + term
    if out is None:
        d = fspace.dim(n)
        out = np.zeros((d, d), dtype=complex)
    return out


def _component_is_zero(c) -> bool:
    if sp.issparse(c):
        return c.nnz == 0
    return not np.any(c)


def extract(A: FockOperator, n: int) -> SectorDecomposition:
    """Canonical normalized-convention decomposition of a grade-0 operator.

    Recursively, component k is 1/k! times the sector-k remainder after
    subtracting the realizations of all lower components; by construction
    realize(extract(A, n), n) reproduces A on F_n exactly.
    """
    if A.grade != 0:
        raise ShapeError("extraction applies to grade-0 operators")
    fspace = A.fspace
    comps: list = []
    for k in range(n + 1):
        blk = A.block(k)
        R = np.asarray(blk.toarray() if sp.issparse(blk) else blk, dtype=complex).copy()
        for m, c in enumerate(comps):
            R -= placement_count(k, m) * _dense(embed(fspace, c, m, k))
        comps.append(R / math.factorial(k))
    return SectorDecomposition(fspace, n, tuple(comps), NORMALIZED)


def _dense(x):
    return x.toarray() if sp.issparse(x) else x


def descend(dec: SectorDecomposition) -> SectorDecomposition:
    """Map a level-n decomposition to the canonical level-(n-1) one.

    Drops the top component; in the paper convention component m picks up
    the factor (n-m)/n, in the normalized convention the components are
    untouched (the factor is absorbed by c(n, m) -> c(n-1, m)).
    """
    n = dec.level
    if n == 0:
        raise LevelError("cannot descend below level 0")
    comps = dec.components[:n]
    if dec.convention == PAPER:
        comps = tuple(((n - m) / n) * c for m, c in enumerate(comps))
    return SectorDecomposition(dec.fspace, n - 1, tuple(comps), dec.convention)


def realized_family(dec: SectorDecomposition) -> FockOperator:
    """Grade-0 operator whose sector-n blocks realize the descent chain of ``dec``."""
    blocks = {}
    cur = dec
    while True:
        blocks[cur.level] = realize(cur, cur.level)
        if cur.level == 0:
            break
        cur = descend(cur)
    return FockOperator(dec.fspace, 0, blocks)


# ---------------------------------------------------------------------------
# clustering probes


@dataclass(frozen=True)
class ClusterPoint:
    """One separation point of a clustering sweep."""

    shift: int
    lhs: complex
    rhs: complex

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs)


def clustering_correlator(
    A: FockOperator,
    fs: list[OneBodyVector],
    gs: list[OneBodyVector],
    x: int,
) -> ClusterPoint:
    """Translated correlator against its factorized long-range limit.

    Evaluates ``<a*(g_1)..a*(T_x g_n) vac, A a*(f_1)..a*(T_x f_n) vac>``
    and the factorized value
    ``<a*(g_1)..a*(g_{n-1}) vac, A a*(f_1)..a*(f_{n-1}) vac> <g_n, f_n>``,
    returning both; their gap closes as the shifted supports separate.
    """
    if len(fs) != len(gs) or not fs:
        raise ShapeError("need equally many f and g vectors")
    fspace = A.fspace
    space = fspace.space
    n = len(fs)
    if n > fspace.nmax:
        raise ShapeError("correlator sector exceeds nmax")
    fx = fs[:-1] + [translate(space, fs[-1], x)]
    gx = gs[:-1] + [translate(space, gs[-1], x)]
    psi = creation_product_vector(fspace, fx)
    phi = creation_product_vector(fspace, gx)
    lhs = phi.inner(A.apply(psi))
    psi1 = creation_product_vector(fspace, fs[:-1])
    phi1 = creation_product_vector(fspace, gs[:-1])
    rhs = phi1.inner(A.apply(psi1)) * gs[-1].inner(fs[-1])
    return ClusterPoint(x, complex(lhs), complex(rhs))


# ---------------------------------------------------------------------------
# the separating coherent family (alternating occupancy products)


def alternating_number_product(fspace: FockSpace, k_max: int, modes=None) -> FockOperator:
    """sum_{k=1}^{k_max} (-1)^k n(f_1)...n(f_k) as a grade-0 operator.

    On an occupation eigenstate the value is -1 when the longest occupied
    prefix f_1..f_K has odd K and 0 when even, so every eigenvalue lies in
    {0, -1} and the blocks form an exactly coherent family.
    """
    if modes is None:
        modes = [OneBodyVector.basis(fspace.space, i) for i in range(k_max)]
    if len(modes) < k_max:
        raise ShapeError("need at least k_max modes")
    nops = [number_op(fspace, modes[k]) for k in range(k_max)]
    total = None
    prod = None
    for k in range(k_max):
        prod = nops[k] if prod is None else prod @ nops[k]
        term = prod * ((-1.0) ** (k + 1))
        total = term if total is None else total + term
    return total


def separation_residuals(
    A: FockOperator, B: FockOperator, k: int, modes=None
) -> tuple[float, float]:
    """Normalized residuals of A - B on the two witness vectors.

    The witnesses are the filled prefixes f_1^..^f_k and f_1^..^f_{k+1};
    for any B = b Id + (polynomial with creation factors over modes <= k
    shifted to the right) these evaluate to |b| and |1 + b|, whose max is
    at least 1/2.
    """
    fspace = A.fspace
    if modes is None:
        modes = [OneBodyVector.basis(fspace.space, i) for i in range(k + 1)]
    out = []
    for kk in (k, k + 1):
        psi = creation_product_vector(fspace, modes[:kk])
        delta = A.apply(psi) - B.apply(psi)
        out.append(delta.norm() / psi.norm())
    return out[0], out[1]
