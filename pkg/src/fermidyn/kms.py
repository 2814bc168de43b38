"""Trapped Gibbs states and KMS identity checks.

The Gibbs state of the harmonically trapped Hamiltonian is evaluated by
per-sector spectral factorization over the truncated Fock space, with an
explicit tail certificate for the dropped sectors.  The shifted-time
identity and its integrated (test-function) form are both evaluated in
closed form in the eigenbasis; the integrated form is additionally
cross-checked by direct time quadrature.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._util import thread_map
from .dynamics import Hamiltonian
from .errors import (
    FrequencyCoverageError,
    OverflowGuardError,
    ShapeError,
    TruncationWarning,
)
from .fock import FockOperator, FockSpace
from .quadrature import QuadratureSpec, gauss_nodes

__all__ = [
    "GibbsState",
    "gibbs_state",
    "two_point",
    "kms_exact_residuals",
    "TestFunction",
    "kms_integral_residuals",
    "trap_sweep",
]

_BETA_SPREAD_CAP = 500.0


class GibbsState:
    """Thermal state tr(. e^{-beta H}) / tr(e^{-beta H}) on the truncated space.

    Energies are shifted by the global minimum before exponentiation, so
    ``weights`` are e^{-beta (E - E0)} and ``z`` is the shifted partition
    sum; all expectation values are shift-invariant.
    """

    def __init__(self, ham: Hamiltonian, beta: float):
        if beta <= 0:
            raise ValueError("beta must be positive")
        self.ham = ham
        self.beta = beta
        self.fspace = ham.fspace
        sectors = list(self.fspace.sectors())
        eigs = thread_map(lambda n: np.linalg.eigh(ham.sector(n)), sectors)
        self.energies = {n: e for n, (e, _) in zip(sectors, eigs)}
        self.basis = {n: u for n, (_, u) in zip(sectors, eigs)}
        self.e0 = min(float(e.min()) for e in self.energies.values())
        self.weights = {
            n: np.exp(-beta * (self.energies[n] - self.e0)) for n in sectors
        }
        self.z = float(sum(w.sum() for w in self.weights.values()))
        self.tail_bound = self._tail_bound()
        if self.tail_bound > 1e-6 * self.z:
            warnings.warn(
                f"truncation tail estimate {self.tail_bound:.3e} exceeds "
                f"1e-6 * Z = {1e-6 * self.z:.3e}",
                TruncationWarning,
                stacklevel=2,
            )

    def _tail_bound(self) -> float:
        """sum over dropped sectors of dim * e^{-beta lb(n)} with the
        per-particle lower bound lb(n) = n lambda_min + n(n-1) min(V, 0)."""
        modes = self.fspace.modes
        nmax = self.fspace.nmax
        if nmax >= modes:
            return 0.0
        lam = float(np.linalg.eigvalsh(self.ham.one_body).min())
        vmin = min(0.0, float(self.ham.profile.values.min()))
        total = 0.0
        for n in range(nmax + 1, modes + 1):
            lb = n * lam + n * (n - 1) * vmin
            # cap the exponent: an overflowing bound is simply "huge"
            total += math.comb(modes, n) * math.exp(
                min(700.0, -self.beta * (lb - self.e0)))
        return total

    def spread(self) -> float:
        return max(float(e.max()) for e in self.energies.values()) - self.e0

    def expectation(self, A: FockOperator) -> complex:
        if A.grade != 0:
            return 0.0 + 0.0j
        acc = 0.0 + 0.0j
        for n in self.fspace.sectors():
            if n not in A.blocks:
                continue
            u = self.basis[n]
            blk = _dense(A.blocks[n])
            diag = np.einsum("ij,jk,ki->i", u.conj().T, blk, u)
            acc += np.sum(self.weights[n] * diag)
        return complex(acc / self.z)

    def eigenblock(self, X: FockOperator, n_src: int) -> np.ndarray:
        """Block of X out of sector n_src, rotated to the energy eigenbases."""
        n_dst = n_src + X.grade
        return self.basis[n_dst].conj().T @ _dense(X.block(n_src)) @ self.basis[n_src]


def _dense(x):
    return np.asarray(x.toarray() if sp.issparse(x) else x, dtype=complex)


def gibbs_state(fspace: FockSpace, profile, beta: float, trap_L: float) -> GibbsState:
    """Gibbs state of the trapped Hamiltonian at inverse temperature beta."""
    return GibbsState(Hamiltonian(fspace, profile, trap_L=trap_L), beta)


def _pair_terms(state: GibbsState, X: FockOperator, Y: FockOperator):
    """Terms of omega(X alpha_t(Y)): coefficients and Bohr frequencies.

    Yields (coeff, nu) arrays per sector with
    omega(X alpha_t(Y)) = (1/Z) sum coeff * exp(-i t nu),
    nu = E_m,p - E_src,q for p in sector m, q in sector m - grade(X).
    """
    if X.grade + Y.grade != 0:
        raise ShapeError("need opposite grades for a thermal pair")
    fspace = state.fspace
    for m in fspace.sectors():
        src = m - X.grade
        if src < 0 or src > fspace.nmax:
            continue
        Xb = state.eigenblock(X, src)       # F_src -> F_m
        Yb = state.eigenblock(Y, m)         # F_m -> F_src
        coeff = (state.weights[m][:, None] * Xb) * Yb.T  # [p, q]
        nu = state.energies[m][:, None] - state.energies[src][None, :]
        yield coeff, nu


def two_point(state: GibbsState, A: FockOperator, B: FockOperator, t: float) -> complex:
    """omega(A alpha_t(B)) in the global eigenbasis."""
    acc = 0.0 + 0.0j
    for coeff, nu in _pair_terms(state, A, B):
        acc += np.sum(coeff * np.exp(-1j * t * nu))
    return complex(acc / state.z)


def kms_exact_residuals(state: GibbsState, A: FockOperator, B: FockOperator,
                        t: float) -> tuple[complex, complex, float]:
    """(lhs, rhs, |lhs - rhs|) for omega(A alpha_t(B)) = omega(alpha_{t-i beta}(B) A).

    The right side forms the complex-time conjugation
    e^{(it+beta)H} B e^{-(it+beta)H} in the energy eigenbasis and traces it
    against the Boltzmann weights there; staying in the eigenbasis keeps
    every factor a plain product of exponentials (no cancellation from
    rotating e^{beta H}-sized entries), guarded against exponent overflow.
    """
    beta = state.beta
    if beta * state.spread() > _BETA_SPREAD_CAP:
        raise OverflowGuardError(
            f"beta * spread = {beta * state.spread():.1f} > {_BETA_SPREAD_CAP}; "
            "rescale energies or lower beta"
        )
    if A.grade + B.grade != 0:
        raise ShapeError("need opposite grades for the KMS pair")
    lhs = two_point(state, A, B, t)
    z_fac = 1j * t + beta
    fspace = state.fspace
    rhs = 0.0 + 0.0j
    for m in fspace.sectors():
        src = m - B.grade
        if src < 0 or src > fspace.nmax:
            continue
        Bb = state.eigenblock(B, src)   # F_src -> F_m
        Ab = state.eigenblock(A, m)     # F_m -> F_src
        left = state.weights[m] * np.exp(z_fac * (state.energies[m] - state.e0))
        right = np.exp(-z_fac * (state.energies[src] - state.e0))
        rhs += np.sum((left[:, None] * Bb * right[None, :]) * Ab.T)
    rhs /= state.z
    return lhs, complex(rhs), abs(lhs - complex(rhs))


# ---------------------------------------------------------------------------
# test functions with compactly supported smooth Fourier transform


@dataclass(frozen=True)
class TestFunction:
    """Entire test function defined by a smooth bump f-hat on [-Xi, Xi].

    f(z) = (1/2 pi) integral f-hat(xi) e^{i xi z} d xi; the strip shift
    f(t + i beta) reweights f-hat by e^{-beta xi} (stable: the bump's
    vanishing order at the endpoints dominates the exponential).
    """

    xi_max: float
    grid: np.ndarray
    samples: np.ndarray

    @classmethod
    def bump(cls, xi_max: float, points: int = 801) -> "TestFunction":
        if xi_max <= 0:
            raise ValueError("xi_max must be positive")
        grid = np.linspace(-xi_max, xi_max, points)
        return cls(xi_max, grid, cls._profile(grid / xi_max))

    @staticmethod
    def _profile(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            val = np.exp(-1.0 / (1.0 - u**2))
        return np.where(np.abs(u) < 1.0, np.nan_to_num(val, nan=0.0, posinf=0.0), 0.0)

    def fhat(self, xi) -> np.ndarray:
        """f-hat at arbitrary frequencies (closed-form profile)."""
        return self._profile(np.asarray(xi, dtype=float) / self.xi_max)

    def value(self, t, beta_shift: float = 0.0):
        """f(t + i beta_shift) by trapezoid over the stored xi grid."""
        t = np.asarray(t, dtype=float)
        w = self.samples * np.exp(-beta_shift * self.grid)
        phases = np.exp(1j * np.outer(t, self.grid))
        d = self.grid[1] - self.grid[0]
        out = phases @ w * d / (2.0 * np.pi)
        return out if out.size > 1 else complex(out[0])

    def decay_window(self, floor: float = 1e-12) -> float:
        """T with |f| below floor * max|f| outside [-T, T]."""
        ts = np.linspace(0.0, 60.0 * 2.0 * np.pi / self.xi_max, 2000)
        vals = np.abs(self.value(ts))
        ref = float(vals.max()) * floor
        above = np.nonzero(vals > ref)[0]
        return float(ts[int(above[-1])] + ts[1]) if above.size else float(ts[-1])


@dataclass
class KmsIntegralResult:
    lhs_closed: complex
    rhs_closed: complex
    lhs_quad: complex
    rhs_quad: complex
    quad_estimate: float
    coverage_margin: float
    scale: float

    @property
    def residual(self) -> float:
        return abs(self.lhs_closed - self.rhs_closed)

    @property
    def quad_gap(self) -> float:
        return max(abs(self.lhs_closed - self.lhs_quad),
                   abs(self.rhs_closed - self.rhs_quad))


def kms_integral_residuals(state: GibbsState, A: FockOperator, B: FockOperator,
                           f: TestFunction, quad: QuadratureSpec,
                           check_coverage: bool = True,
                           wrong_weight: float = 1.0) -> KmsIntegralResult:
    """Both sides of the integrated KMS identity, closed form and quadrature.

    Closed form: the time integral picks out f-hat at Bohr frequencies,
    the strip-shifted side additionally reweights by e^{+beta nu}.
    ``wrong_weight != 1`` evaluates the shifted side in the state with
    Boltzmann weight e^{-wrong_weight * beta * H} (a deliberate-fault
    control).  Quadrature: both time integrals over a window where f has
    decayed below 1e-12.
    """
    beta = state.beta
    rhs_state = state if wrong_weight == 1.0 else GibbsState(state.ham,
                                                             wrong_weight * beta)

    # omega(A alpha_t(B)) = (1/Z) sum c e^{-it nu};
    # omega(alpha_t(B) A) shares the same (c, nu) lists with phase e^{+it nu}
    lhs_terms = list(_pair_terms(state, A, B))
    rhs_terms = list(_pair_terms(rhs_state, B, A))

    lhs_closed = sum(np.sum(c * f.fhat(nu)) for c, nu in lhs_terms) / state.z
    # the strip shift turns integral f(t+i beta) e^{+it nu} dt into
    # fhat(-nu) e^{+beta nu}
    rhs_closed = sum(
        np.sum(c * f.fhat(-nu) * np.exp(beta * nu))
        for c, nu in rhs_terms
    ) / rhs_state.z

    weight_floor = 1e-14 * state.z
    margin = f.xi_max
    for terms in (lhs_terms, rhs_terms):
        for c, nu in terms:
            heavy = np.abs(c) > weight_floor
            if np.any(heavy):
                margin = min(margin, float(f.xi_max - np.abs(nu[heavy]).max()))
    if check_coverage and margin <= 0:
        raise FrequencyCoverageError(
            f"weighted Bohr frequency exceeds the test-function support by "
            f"{-margin:.3f}; the identity still holds but the test is uninformative"
        )

    T = f.decay_window()
    c_l, nu_l = _flatten_terms(lhs_terms, state.z)
    c_r, nu_r = _flatten_terms(rhs_terms, rhs_state.z)
    base = max(quad.nodes * 16, int(3.0 * T * f.xi_max), 256)

    def both_sides(nnodes, window):
        xs, ws = gauss_nodes(-window, window, nnodes)
        fl = ws * np.atleast_1d(f.value(xs))
        fr = ws * np.atleast_1d(f.value(xs, beta_shift=beta))
        lq = fl @ (np.exp(-1j * np.outer(xs, nu_l)) @ c_l)
        rq = fr @ (np.exp(1j * np.outer(xs, nu_r)) @ c_r)
        return lq, rq

    # doubling in the node count and widening the window both feed the estimate
    lhs_a, rhs_a = both_sides(base, T)
    lhs_b, rhs_b = both_sides(2 * base, T)
    lhs_q, rhs_q = both_sides(2 * base, 1.25 * T)
    est = max(abs(lhs_b - lhs_a), abs(rhs_b - rhs_a),
              abs(lhs_q - lhs_b), abs(rhs_q - rhs_b))

    scale = max(abs(lhs_closed), abs(rhs_closed), 1e-300)
    return KmsIntegralResult(
        lhs_closed=complex(lhs_closed),
        rhs_closed=complex(rhs_closed),
        lhs_quad=complex(lhs_q),
        rhs_quad=complex(rhs_q),
        quad_estimate=float(est),
        coverage_margin=margin,
        scale=float(scale),
    )


def _flatten_terms(terms, z):
    cs, nus = [], []
    for c, nu in terms:
        mask = np.abs(c) > 0
        cs.append(np.asarray(c[mask], dtype=complex).ravel())
        nus.append(np.asarray(nu[mask], dtype=float).ravel())
    if not cs:
        return np.zeros(0, dtype=complex), np.zeros(0)
    return np.concatenate(cs) / z, np.concatenate(nus)


def weighted_bohr_spread(state: GibbsState, ops) -> float:
    """Largest |E_j - E_k| connected by any of the given operators."""
    out = 0.0
    for X in ops:
        for n in state.fspace.sectors():
            src = n - X.grade
            if src < 0 or src > state.fspace.nmax or src not in X.blocks:
                continue
            blk = np.abs(state.eigenblock(X, src))
            nu = np.abs(state.energies[n][:, None] - state.energies[src][None, :])
            heavy = blk > 1e-14 * max(1.0, float(blk.max()))
            if np.any(heavy):
                out = max(out, float(nu[heavy].max()))
    return out


# ---------------------------------------------------------------------------
# trap removal sweeps


@dataclass(frozen=True)
class TrapSweepRow:
    observable: str
    trap_L: float
    value: complex
    increment: float | None
    tail_bound: float


def trap_sweep(fspace: FockSpace, profile, beta: float, l_grid,
               observables) -> list[TrapSweepRow]:
    """Gibbs averages across trap strengths, with Cauchy increments.

    ``observables`` is a list of (name, FockOperator); no convergence is
    asserted, the rows simply report values and successive increments.
    """
    rows: list[TrapSweepRow] = []
    prev: dict[str, complex] = {}
    for L in l_grid:
        state = gibbs_state(fspace, profile, beta, float(L))
        for name, op in observables:
            val = state.expectation(op)
            inc = abs(val - prev[name]) if name in prev else None
            rows.append(TrapSweepRow(name, float(L), val, inc, state.tail_bound))
            prev[name] = val
    return rows
