"""Gauss-Legendre quadrature for matrix-valued integrands.

All operator integrals in the package are plain matrix-valued integrals
(finite dimension), evaluated on Gauss-Legendre nodes with a-posteriori
error estimates from node doubling.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import QuadratureNotConverged

__all__ = ["QuadratureSpec", "gauss_nodes", "integrate", "integrate_with_estimate"]


@dataclass(frozen=True)
class QuadratureSpec:
    """Per-level node count and the tolerance enforced on node doubling.

    ``tolerance=None`` disables the convergence check (estimates are still
    returned).
    """

    nodes: int = 16
    tolerance: float | None = None

    def __post_init__(self):
        if self.nodes < 2:
            raise ValueError("need at least 2 quadrature nodes")


@lru_cache(maxsize=None)
def _reference_rule(q: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(q)
    return x, w


def gauss_nodes(a: float, b: float, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the q-point Gauss-Legendre rule on [a, b]."""
    x, w = _reference_rule(q)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def integrate(fn, a: float, b: float, q: int):
    """sum_i w_i fn(x_i) for a matrix- (or scalar-) valued fn."""
    if a == b:
        z = fn(a)
        return z * 0.0
    xs, ws = gauss_nodes(a, b, q)
    acc = None
    for x, w in zip(xs, ws):
        term = fn(x) * w
        acc = term if acc is None else acc + term
    return acc


def _norm_of(x) -> float:
    arr = np.asarray(x)
    return float(np.linalg.norm(arr.ravel())) if arr.ndim else float(abs(x))


def integrate_with_estimate(fn, a: float, b: float, spec: QuadratureSpec):
    """Integral at 2q nodes plus the q-vs-2q difference as error estimate.

    Raises :class:`QuadratureNotConverged` when a tolerance is declared
    and the doubling difference exceeds it.
    """
    coarse = integrate(fn, a, b, spec.nodes)
    fine = integrate(fn, a, b, 2 * spec.nodes)
    est = _norm_of(fine - coarse)
    if spec.tolerance is not None and est > spec.tolerance:
        raise QuadratureNotConverged(
            f"doubling {spec.nodes}->{2 * spec.nodes} nodes changed the result "
            f"by {est:.3e} > tolerance {spec.tolerance:.3e}"
        )
    return fine, est


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """Weights for barycentric Lagrange interpolation through ``nodes``."""
    n = nodes.size
    w = np.ones(n)
    for j in range(n):
        diff = nodes[j] - np.delete(nodes, j)
        w[j] = 1.0 / np.prod(diff)
    return w


def barycentric_eval(nodes: np.ndarray, weights: np.ndarray, values, x: float):
    """Evaluate the interpolant of matrix ``values`` at a point ``x``."""
    d = x - nodes
    hit = np.nonzero(d == 0.0)[0]
    if hit.size:
        return values[int(hit[0])]
    c = weights / d
    c = c / c.sum()
    acc = values[0] * c[0]
    for j in range(1, nodes.size):
        acc = acc + values[j] * c[j]
    return acc
