"""Hamiltonians, exact propagators and the interaction-picture Dyson calculus.

The exact propagator (per-sector spectral factorization) is the ground
truth; the Dyson machinery below is the object under test and is never
used as the production propagator.  Integrals are Gauss-Legendre with
node-doubling error estimates; iterated (time-ordered) integrals
represent each level on the outer Gauss grid and interpolate it
barycentrically inside the next level's integral.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._backend import kernels
from ._util import thread_map
from .errors import KernelMismatch, ShapeError, TailBoundExceeded
from .fock import (
    FockOperator,
    FockSpace,
    annihilate,
    create,
    dgamma,
    _assemble,
    _norm2,
)
from .lattice import OneBodyVector, PotentialProfile, kinetic_matrix, translate
from .quadrature import (
    QuadratureSpec,
    barycentric_eval,
    barycentric_weights,
    gauss_nodes,
    integrate_with_estimate,
)
from .sectors import descend, extract, realize

__all__ = [
    "Hamiltonian",
    "Propagator",
    "heisenberg",
    "evolved_interaction",
    "commutator_integral",
    "dyson_terms",
    "dyson_sum",
    "dyson_rate",
    "dyson_tail",
    "choose_dyson_order",
    "interaction_picture",
    "interaction_commutators",
    "support_vanishing_report",
    "descent_commutator_residual",
    "descent_evolution_residual",
    "dressed_creation_residuals",
    "WindowFunction",
    "time_average",
]


# ---------------------------------------------------------------------------
# Hamiltonians and exact propagators


class Hamiltonian:
    """Per-sector Hamiltonians H_n = dGamma(one-body) + pair interaction.

    The one-body part is the kinetic stencil plus, when ``trap_L`` is
    set, the harmonic site weights (x/L^2)^2 with x the physical position
    measured from the chain centre.  The pair interaction is diagonal in
    the occupation basis.
    """

    def __init__(self, fspace: FockSpace, profile: PotentialProfile | None = None,
                 trap_L: float | None = None):
        self.fspace = fspace
        self.profile = profile if profile is not None else PotentialProfile.zero()
        self.trap_L = trap_L
        space = fspace.space
        one_body = kinetic_matrix(space).astype(complex)
        if trap_L is not None:
            if trap_L <= 0:
                raise ValueError("trap parameter must be positive")
            one_body = one_body + np.diag(space.positions() ** 2 / trap_L**4)
        self.one_body = one_body
        self._vtable = self.profile.table(space)
        self._free: dict[int, np.ndarray] = {}
        self._vdiag: dict[int, np.ndarray] = {}
        self._props: dict[str, "Propagator"] = {}

    @property
    def kind(self) -> str:
        if self.trap_L is not None:
            return "trapped"
        return "interacting" if self.profile.radius or np.any(self.profile.values) else "free"

    def free_sector(self, n: int) -> np.ndarray:
        """One-body part dGamma(h) on F_n, dense."""
        if n not in self._free:
            if n == 0:
                self._free[0] = np.zeros((1, 1), dtype=complex)
            else:
                blk = dgamma(self.fspace, self.one_body, n)
                self._free[n] = blk.toarray() if sp.issparse(blk) else blk
        return self._free[n]

    def interaction_diagonal(self, n: int) -> np.ndarray:
        """Diagonal of sum_{i != j} V(s_i - s_j) on F_n."""
        if n not in self._vdiag:
            self._vdiag[n] = kernels.pair_diagonal(self.fspace.basis(n), self._vtable)
        return self._vdiag[n]

    def interaction_norm(self, n: int) -> float:
        return float(np.max(np.abs(self.interaction_diagonal(n)))) if n >= 2 else 0.0

    def sector(self, n: int) -> np.ndarray:
        return self.free_sector(n) + np.diag(self.interaction_diagonal(n))

    def interaction_operator(self) -> FockOperator:
        return FockOperator.from_diagonals(
            self.fspace, {n: self.interaction_diagonal(n) for n in self.fspace.sectors()}
        )

    def propagator(self, part: str = "full") -> "Propagator":
        if part not in self._props:
            self._props[part] = Propagator(self, part)
        return self._props[part]

    def expectation(self, vec) -> float:
        """<psi, H psi> over the truncated space."""
        acc = 0.0
        for n, v in vec.blocks.items():
            acc += float(np.vdot(v, self.sector(n) @ v).real)
        return acc


class Propagator:
    """Cached per-sector spectral factorizations driving exact evolution."""

    def __init__(self, ham: Hamiltonian, part: str = "full"):
        if part not in ("full", "free"):
            raise ValueError("part must be 'full' or 'free'")
        self.ham = ham
        self.part = part
        self.fspace = ham.fspace
        self._eig: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def matrix(self, n: int) -> np.ndarray:
        return self.ham.sector(n) if self.part == "full" else self.ham.free_sector(n)

    def eig(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        if n not in self._eig:
            self._eig[n] = np.linalg.eigh(self.matrix(n))
        return self._eig[n]

    def warm(self, sectors=None) -> None:
        sectors = list(self.fspace.sectors()) if sectors is None else list(sectors)
        missing = [n for n in sectors if n not in self._eig]
        for n, pair in zip(missing, thread_map(lambda m: np.linalg.eigh(self.matrix(m)), missing)):
            self._eig[n] = pair

    def phase_matrix(self, n: int, t: float) -> np.ndarray:
        """exp(+i t H_n), dense unitary."""
        E, U = self.eig(n)
        return (U * np.exp(1j * t * E)) @ U.conj().T

    def conjugate_block(self, block, n_src: int, n_dst: int, t: float):
        """exp(i t H_dst) block exp(-i t H_src): one Heisenberg-evolved block."""
        left = self.phase_matrix(n_dst, t)
        right = self.phase_matrix(n_src, -t)
        if sp.issparse(block):
            return np.asarray(left @ (block @ right))
        return left @ block @ right

    def evolve_vector(self, vec, t: float):
        """Schrodinger evolution exp(-i t H) psi."""
        from .fock import FockVector

        blocks = {}
        for n, v in vec.blocks.items():
            E, U = self.eig(n)
            blocks[n] = U @ (np.exp(-1j * t * E) * (U.conj().T @ v))
        return FockVector(vec.fspace, blocks)


def heisenberg(prop: Propagator, A: FockOperator, t: float) -> FockOperator:
    """alpha_t(A) = exp(itH) A exp(-itH), block by block."""
    k = A.grade
    items = sorted(A.blocks.items())
    prop.warm(sorted({n for n, _ in items} | {n + k for n, _ in items}))
    evolved = thread_map(
        lambda item: prop.conjugate_block(item[1], item[0], item[0] + k, t), items
    )
    return FockOperator(A.fspace, k, {n: b for (n, _), b in zip(items, evolved)})


def evolved_interaction(ham: Hamiltonian, free: Propagator, n: int, s: float) -> np.ndarray:
    """V_n(s) = exp(isH0_n) V_n exp(-isH0_n), dense."""
    u = free.phase_matrix(n, s)
    return (u * ham.interaction_diagonal(n)) @ u.conj().T


# ---------------------------------------------------------------------------
# Dyson calculus


def _seed_block(ham, seed, n, grade):
    if isinstance(seed, FockOperator):
        if seed.grade != grade:
            raise ShapeError("seed grade mismatch")
        blk = seed.block(n)
        return np.asarray(blk.toarray() if sp.issparse(blk) else blk, dtype=complex)
    return np.asarray(seed, dtype=complex)


def _bracket(ham, free, block, n, grade, s):
    """i [block, V(s)] for a block F_n -> F_{n+grade}."""
    vn = evolved_interaction(ham, free, n, s)
    if grade == 0:
        return 1j * (block @ vn - vn @ block)
    if grade == 1:
        vtop = evolved_interaction(ham, free, n + 1, s)
        return 1j * (block @ vn - vtop @ block)
    raise ShapeError("Dyson machinery handles grades 0 and +1")


def commutator_integral(ham: Hamiltonian, seed, n: int, grade: int, t: float,
                        quad: QuadratureSpec) -> tuple[np.ndarray, float]:
    """First-order map: i * integral_0^t [seed, V(s)] ds with error estimate."""
    free = ham.propagator("free")
    block = _seed_block(ham, seed, n, grade)
    return integrate_with_estimate(lambda s: _bracket(ham, free, block, n, grade, s),
                                   0.0, t, quad)


@dataclass
class DysonTerms:
    """Iterated Dyson integrals D_0..D_order at time t with doubling estimates."""

    time: float
    terms: list = field(default_factory=list)
    estimates: list = field(default_factory=list)

    def partial_sum(self) -> np.ndarray:
        return sum(self.terms[1:], start=self.terms[0])

    def estimate_total(self) -> float:
        return float(sum(self.estimates))


def _dyson_ladder(ham, free, seed, n, grade, t, order, q):
    """Values of D_l at the q Gauss nodes of [0, t] plus the endpoint."""
    nodes, _ = gauss_nodes(0.0, t, q)
    grid = np.append(nodes, t)
    bw = barycentric_weights(nodes)
    levels = [[seed.copy() for _ in grid]]
    for _ in range(order):
        prev = levels[-1]
        cur = []
        for target in grid:
            xs, ws = gauss_nodes(0.0, target, q)
            acc = np.zeros_like(seed)
            for x, w in zip(xs, ws):
                dprev = barycentric_eval(nodes, bw, prev[: q], x)
                acc = acc + w * _bracket(ham, free, dprev, n, grade, x)
            cur.append(acc)
        levels.append(cur)
    return [lv[-1] for lv in levels]


def dyson_terms(ham: Hamiltonian, seed, n: int, grade: int, t: float, order: int,
                quad: QuadratureSpec) -> DysonTerms:
    """D_0 = seed, D_{l+1}(t) = i int_0^t [D_l(s), V(s)] ds, evaluated at t.

    Each level is computed on the ``quad.nodes`` and the doubled grid; the
    doubled values are returned, the per-level differences are the
    estimates.
    """
    free = ham.propagator("free")
    seed = _seed_block(ham, seed, n, grade)
    coarse = _dyson_ladder(ham, free, seed, n, grade, t, order, quad.nodes)
    fine = _dyson_ladder(ham, free, seed, n, grade, t, order, 2 * quad.nodes)
    out = DysonTerms(time=t)
    for c, f in zip(coarse, fine):
        out.terms.append(f)
        out.estimates.append(float(np.linalg.norm(f - c, 2)))
    return out


def dyson_rate(ham: Hamiltonian, n: int, grade: int) -> float:
    """Growth rate x/|t| of the term bounds: 2|V_n| (grade 0) or
    |V_n| + |V_{n+1}| (grade +1)."""
    if grade == 0:
        return 2.0 * ham.interaction_norm(n)
    return ham.interaction_norm(n) + ham.interaction_norm(n + 1)


def dyson_tail(x: float, order: int) -> float:
    """sum_{l > order} x^l / l! (the full analytic remainder)."""
    term = x ** (order + 1) / math.factorial(order + 1)
    total, l = 0.0, order + 1
    while term > total * 1e-17 + 1e-300 and l < order + 400:
        total += term
        l += 1
        term *= x / l
    return total


def choose_dyson_order(x: float, tolerance: float, scale: float = 1.0) -> int:
    """Smallest L with x^(L+1)/(L+1)! * scale below tolerance."""
    L = 0
    while x ** (L + 1) / math.factorial(L + 1) * scale >= tolerance:
        L += 1
        if L > 400:
            raise TailBoundExceeded("no order below tolerance within 400 terms")
    return L


@dataclass
class DysonSum:
    value: np.ndarray
    terms: DysonTerms
    order: int
    tail_bound: float
    quad_estimate: float


def dyson_sum(ham: Hamiltonian, seed, n: int, grade: int, t: float, order: int,
              quad: QuadratureSpec, tolerance: float | None = None) -> DysonSum:
    """Partial Dyson sum with its analytic tail bound and quadrature estimate."""
    seed_blk = _seed_block(ham, seed, n, grade)
    scale = _norm2(seed_blk)
    tail = dyson_tail(abs(t) * dyson_rate(ham, n, grade), order) * scale
    if tolerance is not None and tail > tolerance:
        raise TailBoundExceeded(
            f"tail bound {tail:.3e} at order {order} exceeds tolerance {tolerance:.3e}"
        )
    terms = dyson_terms(ham, seed_blk, n, grade, t, order, quad)
    return DysonSum(
        value=terms.partial_sum(),
        terms=terms,
        order=order,
        tail_bound=tail,
        quad_estimate=terms.estimate_total(),
    )


def interaction_picture(ham: Hamiltonian, seed, n: int, grade: int, t: float) -> np.ndarray:
    """Exact interaction-frame dressing of one block: U A U* with
    U = exp(itH0) exp(-itH), the map the iterated-commutator series sums to
    (it solves G_t(A) = A + int_0^t i [G_s(A), V(s)] ds)."""
    full = ham.propagator("full")
    free = ham.propagator("free")
    block = _seed_block(ham, seed, n, grade)
    inner = full.conjugate_block(block, n, n + grade, -t)
    return free.conjugate_block(inner, n, n + grade, t)


# ---------------------------------------------------------------------------
# interaction commutator kernels and support separation


def interaction_commutators(ham: Hamiltonian, h: OneBodyVector,
                            tolerance: float = 1e-12) -> tuple[FockOperator, FockOperator]:
    """Kernel-built commutators ([V, a*(h)], [V, a(h)]).

    Both are assembled from the explicit one-insertion kernels
    (2 h(y) sum_{s in S} V(y - s) with the fermionic sign) and checked
    against the direct matrix commutators; disagreement raises
    :class:`KernelMismatch`.
    """
    fspace = ham.fspace
    vtable = ham.profile.table(fspace.space)
    blocks = {}
    for n in range(fspace.nmax):
        bsrc, bdst = fspace.basis(n), fspace.basis(n + 1)
        rows, cols, vals = kernels.interaction_creation_coo(
            bsrc, bdst, h.coefficients, vtable
        )
        blocks[n] = _assemble(rows, cols, vals, (bdst.dim, bsrc.dim))
    comm_create = FockOperator(fspace, +1, blocks)
    comm_annih = comm_create.adjoint() * (-1.0)

    vop = ham.interaction_operator()
    ref_create = vop.commutator(create(fspace, h))
    ref_annih = vop.commutator(annihilate(fspace, h))
    scale = max(1.0, h.norm() * max(ham.interaction_norm(m) for m in fspace.sectors()))
    gap = max(
        (comm_create - ref_create).norm(),
        (comm_annih - ref_annih).norm(),
    )
    if gap > tolerance * scale:
        raise KernelMismatch(f"kernel vs matrix commutator gap {gap:.3e}")
    return comm_create, comm_annih


@dataclass(frozen=True)
class SupportVanishingRow:
    shift: int
    separation: int
    norm_with_creation: float
    norm_with_annihilation: float
    expect_zero: bool


@dataclass
class SupportVanishingReport:
    interaction_radius: int
    rows: list

    def max_beyond_range(self) -> float:
        vals = [max(r.norm_with_creation, r.norm_with_annihilation)
                for r in self.rows if r.expect_zero]
        return max(vals, default=0.0)

    def max_overlapping(self) -> float:
        vals = [max(r.norm_with_creation, r.norm_with_annihilation)
                for r in self.rows if not r.expect_zero]
        return max(vals, default=0.0)


def _interval_distance(a: tuple[int, int], b: tuple[int, int]) -> int:
    if a[1] < b[0]:
        return b[0] - a[1]
    if b[1] < a[0]:
        return a[0] - b[1]
    return 0


def support_vanishing_report(ham: Hamiltonian, f: OneBodyVector, h: OneBodyVector,
                             shifts) -> SupportVanishingReport:
    """Norms of {a*(T_x f), [V, a#(h)]} across support separations.

    On an open chain the anticommutators vanish identically once the
    distance between the supports of T_x f and h exceeds the exact
    interaction radius.  Norms are taken over the sectors where both
    composition orders stay inside the truncation (the top sectors only
    carry truncation artifacts).
    """
    fspace = ham.fspace
    space = fspace.space
    comm_c, comm_a = interaction_commutators(ham, h)
    r_v = ham.profile.radius
    hsup = h.effective_support()
    rows = []
    for x in shifts:
        fx = translate(space, f, x)
        sep = _interval_distance(fx.effective_support(), hsup)
        cf = create(fspace, fx)
        with_c = cf.anticommutator(comm_c)   # grade +2: sources <= nmax - 2
        with_a = cf.anticommutator(comm_a)   # grade 0: sources <= nmax - 1
        rows.append(
            SupportVanishingRow(
                shift=int(x),
                separation=sep,
                norm_with_creation=max(
                    (with_c.seminorm(n) for n in range(fspace.nmax - 1)), default=0.0),
                norm_with_annihilation=max(
                    (with_a.seminorm(n) for n in range(fspace.nmax)), default=0.0),
                expect_zero=sep > r_v,
            )
        )
    return SupportVanishingReport(interaction_radius=r_v, rows=rows)


# ---------------------------------------------------------------------------
# descent compatibility (coherence of the Dyson maps)


def descent_commutator_residual(ham: Hamiltonian, A: FockOperator, t: float, n: int,
                                quad: QuadratureSpec) -> tuple[float, float]:
    """Gap between descending after and applying the first-order map below.

    Computes realize(descend(extract(D(t)A, n)), n-1) against
    D(t) applied directly to the sector-(n-1) block; exact up to
    quadrature because D(t)A is the restriction family of one operator.
    """
    if A.grade != 0:
        raise ShapeError("descent check needs a grade-0 operator")
    blocks, est = {}, 0.0
    for m in range(n + 1):
        blk, e = commutator_integral(ham, A, m, 0, t, quad)
        blocks[m] = blk
        est += e
    DA = FockOperator(A.fspace, 0, blocks)
    lhs = realize(descend(extract(DA, n)), n - 1)
    residual = float(np.linalg.norm(_as_dense(lhs) - blocks[n - 1], 2))
    return residual, est


def descent_evolution_residual(prop: Propagator, A: FockOperator, t: float, n: int) -> float:
    """Same compatibility for the full Heisenberg evolution (no quadrature)."""
    at = heisenberg(prop, A, t)
    lhs = realize(descend(extract(at, n)), n - 1)
    rhs = _as_dense(at.block(n - 1))
    return float(np.linalg.norm(_as_dense(lhs) - rhs, 2))


def _as_dense(x):
    return np.asarray(x.toarray() if sp.issparse(x) else x, dtype=complex)


# ---------------------------------------------------------------------------
# the dressed-creation first-order identity and its pair kernel


@dataclass
class DressedCreationResult:
    identity_residual: float
    quad_estimate: float
    kernel_gap: float
    kernel_hermiticity: float


def dressed_creation_residuals(ham: Hamiltonian, f: OneBodyVector, t: float, n: int,
                               quad: QuadratureSpec) -> DressedCreationResult:
    """Checks the first-order dressing of a creation operator on F_n:

    a(f) D(t)(a*(f)) = i a(f) a*(f) int_0^t V_n(s) ds
                       - i a(f) (int_0^t V_{n+1}(s) ds) a*(f),

    plus the one-body pair kernel K(s) defined weakly by
    <phi, K(s) g> = 2 <f x phi, V_01(s) f x g>, compared against the
    direct tensor contraction of the integrated two-body operator.
    """
    fspace = ham.fspace
    if n + 1 > fspace.nmax:
        raise ShapeError("need one sector above n")
    free = ham.propagator("free")
    cop, aop = create(fspace, f), annihilate(fspace, f)
    astar_n = _as_dense(cop.block(n))

    delta_blk, e1 = commutator_integral(ham, astar_n, n, +1, t, quad)
    lhs = _as_dense(aop.block(n + 1)) @ delta_blk

    iv_n, e2 = integrate_with_estimate(
        lambda s: evolved_interaction(ham, free, n, s), 0.0, t, quad)
    iv_top, e3 = integrate_with_estimate(
        lambda s: evolved_interaction(ham, free, n + 1, s), 0.0, t, quad)
    aa = _as_dense(aop.block(n + 1)) @ astar_n
    rhs = 1j * (aa @ iv_n) - 1j * (_as_dense(aop.block(n + 1)) @ iv_top @ astar_n)
    identity_residual = float(np.linalg.norm(lhs - rhs, 2))

    # two-body pair kernel on the extra tensor slot
    space = fspace.space
    m = space.sites
    T = ham.one_body
    E, U = np.linalg.eigh(T)
    pos = np.arange(m)
    disp = np.abs(pos[:, None] - pos[None, :])
    if space.periodic:
        fold = np.minimum(disp, m - disp)
    else:
        fold = disp
    v2 = ham.profile.table(space)[fold].reshape(m * m)  # diag of V_01 on h x h

    def two_body(s):
        u = (U * np.exp(1j * s * E)) @ U.conj().T
        uu = np.kron(u, u)
        return (uu * v2) @ uu.conj().T

    W, e4 = integrate_with_estimate(two_body, 0.0, t, quad)
    fc = f.coefficients
    # weak form, element by element
    K_weak = np.empty((m, m), dtype=complex)
    for q_ in range(m):
        g = np.zeros(m); g[q_] = 1.0
        rightv = W @ np.kron(fc, g)
        for p_ in range(m):
            e = np.zeros(m); e[p_] = 1.0
            K_weak[p_, q_] = 2.0 * np.vdot(np.kron(fc, e), rightv)
    # direct contraction over the extra slot
    W4 = W.reshape(m, m, m, m)
    K_contr = 2.0 * np.einsum("p,prqs,q->rs", fc.conj(), W4, fc)
    kernel_gap = float(np.linalg.norm(K_weak - K_contr, 2))
    kernel_herm = float(np.linalg.norm(K_contr - K_contr.conj().T, 2))

    return DressedCreationResult(
        identity_residual=identity_residual,
        quad_estimate=float(e1 + e2 + e3 + e4),
        kernel_gap=kernel_gap,
        kernel_hermiticity=kernel_herm,
    )


# ---------------------------------------------------------------------------
# time averages


_BUMP_NORM = None


def _bump_mass() -> float:
    global _BUMP_NORM
    if _BUMP_NORM is None:
        xs, ws = gauss_nodes(-1.0, 1.0, 200)
        _BUMP_NORM = float(np.sum(ws * np.exp(-1.0 / (1.0 - xs**2))))
    return _BUMP_NORM


@dataclass(frozen=True)
class WindowFunction:
    """Real, continuous, compactly supported averaging window."""

    lo: float
    hi: float
    profile: object  # callable s -> float, vectorized

    @classmethod
    def bump(cls, center: float = 0.0, half_width: float = 1.0,
             mass: float = 1.0) -> "WindowFunction":
        """Smooth bump supported on [center - h, center + h] with unit mass
        (scaled to ``mass``)."""
        scale = mass / (_bump_mass() * half_width)

        def fn(s):
            u = (np.asarray(s, dtype=float) - center) / half_width
            out = np.zeros_like(u)
            inside = np.abs(u) < 1.0
            out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
            return scale * out

        return cls(center - half_width, center + half_width, fn)

    def values(self, s):
        return self.profile(s)

    def shifted(self, t: float) -> "WindowFunction":
        """The window s -> f(s - t)."""
        base = self.profile
        return WindowFunction(self.lo + t, self.hi + t, lambda s: base(np.asarray(s) - t))

    def integral(self, q: int = 64) -> float:
        xs, ws = gauss_nodes(self.lo, self.hi, q)
        return float(np.sum(ws * self.values(xs)))

    def abs_integral(self, q: int = 64) -> float:
        xs, ws = gauss_nodes(self.lo, self.hi, q)
        return float(np.sum(ws * np.abs(self.values(xs))))


def time_average(prop: Propagator, A: FockOperator, window: WindowFunction,
                 quad: QuadratureSpec) -> tuple[FockOperator, float]:
    """integral f(s) alpha_s(A) ds, blockwise, with quadrature estimate."""
    k = A.grade
    blocks, est = {}, 0.0
    for n in sorted(A.blocks):
        blk = _as_dense(A.blocks[n])

        def integrand(s, n=n, blk=blk):
            return float(window.values(s)) * prop.conjugate_block(blk, n, n + k, s)

        val, e = integrate_with_estimate(integrand, window.lo, window.hi, quad)
        blocks[n] = val
        est += e
    return FockOperator(A.fspace, k, blocks), est
