"""One-body layer: a finite 1-D chain standing in for continuum one-particle space.

Sites are indexed 0..M-1.  The kinetic term is the second-difference
stencil, pair interactions are radial profiles V(k) over integer
displacements, and translations act by (T_x f)(i) = f(i + x) with either
cyclic wrap-around (periodic) or clipping checks (open).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OpenBoundaryClipError

__all__ = [
    "OneBodySpace",
    "PotentialProfile",
    "OneBodyVector",
    "kinetic_matrix",
    "translate",
    "pair_interaction",
    "PairInteraction",
]


@dataclass(frozen=True)
class OneBodySpace:
    """Finite one-body space: M lattice sites with spacing ``a``."""

    sites: int
    spacing: float = 1.0
    boundary: str = "open"

    def __post_init__(self):
        if self.sites < 2:
            raise ValueError("need at least 2 sites")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def positions(self) -> np.ndarray:
        """Physical site positions measured from the chain centre."""
        i = np.arange(self.sites, dtype=float)
        return (i - (self.sites - 1) / 2.0) * self.spacing

    def min_image(self, k: int) -> int:
        """Displacement folded to the minimal image on periodic chains."""
        if not self.periodic:
            return k
        m = self.sites
        k = ((k % m) + m) % m
        return k - m if k > m // 2 else k


@dataclass(frozen=True)
class PotentialProfile:
    """Radial pair-potential profile V(k) over integer displacements.

    ``values[k]`` holds V(k) for k = 0..len-1; negative displacements use
    V(-k) = V(k).  Box and Gaussian constructors are provided; arbitrary
    tables can be loaded from "k value" text files.
    """

    kind: str
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("profile values must be a nonempty 1-D real array")

    @classmethod
    def box(cls, amplitude: float, radius: int) -> "PotentialProfile":
        """V(k) = amplitude for |k| <= radius, zero beyond."""
        if radius < 0:
            raise ValueError("radius must be >= 0")
        return cls("box", np.full(radius + 1, float(amplitude)))

    @classmethod
    def gaussian(cls, amplitude: float, width: float, cutoff: int = 64) -> "PotentialProfile":
        """V(k) = amplitude * exp(-k^2 / (2 width^2)), tabulated up to ``cutoff``."""
        if width <= 0:
            raise ValueError("width must be positive")
        k = np.arange(cutoff + 1, dtype=float)
        return cls("gaussian", float(amplitude) * np.exp(-(k**2) / (2.0 * width**2)))

    @classmethod
    def zero(cls) -> "PotentialProfile":
        return cls("box", np.zeros(1))

    @classmethod
    def tabulated(cls, pairs) -> "PotentialProfile":
        """Build from (k, value) pairs; the table must be symmetric in k."""
        table: dict[int, float] = {}
        for k, v in pairs:
            k = int(k)
            if abs(k) in table and table[abs(k)] != float(v):
                raise ValueError(f"asymmetric table entry at |k|={abs(k)}")
            table[abs(k)] = float(v)
        radius = max(table) if table else 0
        vals = np.zeros(radius + 1)
        for k, v in table.items():
            vals[k] = v
        return cls("tabulated", vals)

    @classmethod
    def from_file(cls, path) -> "PotentialProfile":
        pairs = []
        with open(path) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                k, v = line.split()
                pairs.append((int(k), float(v)))
        return cls.tabulated(pairs)

    def value(self, k: int) -> float:
        k = abs(int(k))
        return float(self.values[k]) if k < self.values.size else 0.0

    @property
    def radius(self) -> int:
        """Largest |k| with V(k) != 0 (exact interaction range)."""
        nz = np.nonzero(self.values)[0]
        return int(nz[-1]) if nz.size else 0

    def table(self, space: OneBodySpace) -> np.ndarray:
        """V at every site displacement 0..M-1, minimal-image when periodic."""
        return np.array(
            [self.value(space.min_image(k)) for k in range(space.sites)]
        )


@dataclass(frozen=True)
class OneBodyVector:
    """A one-body wave function, optionally with declared compact support.

    ``support`` is an inclusive site-index window (lo, hi); when declared,
    the coefficients are checked to vanish outside it.
    """

    coefficients: np.ndarray
    support: tuple[int, int] | None = None

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        object.__setattr__(self, "coefficients", c)
        if c.ndim != 1:
            raise ValueError("coefficients must be 1-D")
        if self.support is not None:
            lo, hi = self.support
            if not (0 <= lo <= hi < c.size):
                raise ValueError(f"support {self.support} outside chain of {c.size} sites")
            mask = np.ones(c.size, dtype=bool)
            mask[lo : hi + 1] = False
            if np.any(c[mask] != 0):
                raise ValueError("nonzero coefficient outside declared support")

    @classmethod
    def basis(cls, space: OneBodySpace, site: int) -> "OneBodyVector":
        c = np.zeros(space.sites, dtype=complex)
        c[site] = 1.0
        return cls(c, support=(site, site))

    @classmethod
    def bump(cls, space: OneBodySpace, center: int, width: float,
             radius: int | None = None) -> "OneBodyVector":
        """Normalized Gaussian bump, hard-truncated to ``radius`` if given."""
        i = np.arange(space.sites, dtype=float)
        c = np.exp(-((i - center) ** 2) / (2.0 * width**2)).astype(complex)
        support = None
        if radius is not None:
            lo, hi = max(0, center - radius), min(space.sites - 1, center + radius)
            mask = np.ones(space.sites, dtype=bool)
            mask[lo : hi + 1] = False
            c[mask] = 0.0
            support = (lo, hi)
        return cls(c / np.linalg.norm(c), support=support)

    @property
    def sites(self) -> int:
        return self.coefficients.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def inner(self, other: "OneBodyVector") -> complex:
        return complex(np.vdot(self.coefficients, other.coefficients))

    def effective_support(self) -> tuple[int, int]:
        """Declared support, or the hull of nonzero coefficients."""
        if self.support is not None:
            return self.support
        nz = np.nonzero(self.coefficients)[0]
        if nz.size == 0:
            return (0, 0)
        return (int(nz[0]), int(nz[-1]))


def kinetic_matrix(space: OneBodySpace) -> np.ndarray:
    """Second-difference stencil for -Laplacian: 2/a^2 on the diagonal,
    -1/a^2 on neighbours, wrapped when periodic."""
    m, a2 = space.sites, space.spacing**2
    t = np.zeros((m, m))
    np.fill_diagonal(t, 2.0 / a2)
    idx = np.arange(m - 1)
    t[idx, idx + 1] = -1.0 / a2
    t[idx + 1, idx] = -1.0 / a2
    if space.periodic:
        t[0, m - 1] = t[m - 1, 0] = -1.0 / a2
    return t


def translate(space: OneBodySpace, f: OneBodyVector, x: int) -> OneBodyVector:
    """(T_x f)(i) = f(i + x); cyclic on periodic chains.

    On open chains the shifted support must stay inside the chain,
    otherwise :class:`OpenBoundaryClipError` is raised.
    """
    c = f.coefficients
    m = space.sites
    if c.size != m:
        raise ValueError("vector length does not match the chain")
    if space.periodic:
        out = np.roll(c, -x)
        sup = None
        if f.support is not None:
            lo, hi = f.support
            if hi - lo + 1 < m and 0 <= lo - x and hi - x < m:
                sup = (lo - x, hi - x)
        return OneBodyVector(out, support=sup)
    lo, hi = f.effective_support()
    if lo - x < 0 or hi - x >= m:
        raise OpenBoundaryClipError(
            f"support [{lo},{hi}] shifted by {-x} leaves the open chain of {m} sites"
        )
    out = np.zeros(m, dtype=complex)
    out[lo - x : hi - x + 1] = c[lo : hi + 1]
    sup = (lo - x, hi - x) if f.support is not None else None
    return OneBodyVector(out, support=sup)


class PairInteraction:
    """Two-site interaction evaluators V_ij on n-particle site configurations.

    ``term_value`` evaluates a single (i, j) pair on a configuration;
    ``config_value`` sums over all ordered pairs i != j.  On periodic
    chains displacements use the minimal image.
    """

    def __init__(self, space: OneBodySpace, profile: PotentialProfile, n: int):
        if n < 2:
            raise ValueError("pair interaction needs n >= 2 particles")
        self.space = space
        self.profile = profile
        self.n = n
        self._table = profile.table(space)

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.n) for j in range(self.n) if i != j]

    def term_value(self, config, i: int, j: int) -> float:
        """V(s_i - s_j) for one ordered pair of particle slots."""
        d = abs(int(config[i]) - int(config[j]))
        if self.space.periodic:
            d = abs(self.space.min_image(d))
        return float(self._table[d])

    def config_value(self, config) -> float:
        """sum_{i != j} V(s_i - s_j) on one position configuration."""
        total = 0.0
        for i in range(self.n):
            for j in range(i + 1, self.n):
                total += self.term_value(config, i, j)
        return 2.0 * total


def pair_interaction(space: OneBodySpace, profile: PotentialProfile, n: int) -> PairInteraction:
    return PairInteraction(space, profile, n)
