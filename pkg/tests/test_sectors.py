import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermidyn import (
    FockOperator,
    FockSpace,
    LevelError,
    OneBodySpace,
    OneBodyVector,
    SectorDecomposition,
    alternating_number_product,
    annihilate,
    clustering_correlator,
    create,
    descend,
    extract,
    number_op,
    realize,
    realized_family,
    separation_residuals,
)
from conftest import unit


def fockspace(m=6, nmax=4, boundary="open"):
    return FockSpace(OneBodySpace(m, 1.0, boundary), nmax)


def monomial(fs, f_list, g_list):
    op = None
    for f in f_list:
        c = create(fs, f)
        op = c if op is None else op @ c
    for g in g_list:
        a = annihilate(fs, g)
        op = a if op is None else op @ a
    return op


def random_poly(fs, rng, terms=3):
    out = FockOperator.identity(fs) * complex(rng.standard_normal(), rng.standard_normal())
    for _ in range(terms):
        m = int(rng.integers(1, 3))
        z = complex(rng.standard_normal(), rng.standard_normal())
        out = out + monomial(fs, [unit(rng, fs.modes) for _ in range(m)],
                             [unit(rng, fs.modes) for _ in range(m)]) * z
    return out


def dense(x):
    import scipy.sparse as sp

    return np.asarray(x.toarray() if sp.issparse(x) else x, dtype=complex)


# ---------------------------------------------------------------------------
# extract / realize


def test_extract_identity():
    fs = fockspace()
    dec = extract(FockOperator.identity(fs), 3)
    assert abs(dec.component(0)[0, 0] - 1.0) < 1e-14
    for m in range(1, 4):
        assert np.linalg.norm(dec.component(m)) < 1e-13


def test_extract_number_operator():
    fs = fockspace()
    n1 = number_op(fs, OneBodyVector.basis(fs.space, 0))
    dec = extract(n1, 3)
    want = np.zeros((6, 6))
    want[0, 0] = 1.0
    np.testing.assert_allclose(dec.component(1), want, atol=1e-13)
    for m in (0, 2, 3):
        assert np.linalg.norm(dec.component(m)) < 1e-13


def test_extract_number_product_cancels_one_body():
    # n(e_1) n(e_2) carries a pure two-body component
    fs = fockspace()
    op = number_op(fs, OneBodyVector.basis(fs.space, 0)) @ \
        number_op(fs, OneBodyVector.basis(fs.space, 1))
    dec = extract(op, 4)
    assert np.linalg.norm(dec.component(0)) < 1e-14
    assert np.linalg.norm(dec.component(1)) < 1e-13
    assert np.linalg.norm(dec.component(2)) > 0.1
    assert np.linalg.norm(dec.component(3)) < 1e-12
    assert np.linalg.norm(dec.component(4)) < 1e-12


def test_realize_extract_is_restriction(rng):
    fs = fockspace()
    for _ in range(5):
        A = random_poly(fs, rng)
        for n in range(fs.nmax + 1):
            gap = np.linalg.norm(dense(realize(extract(A, n), n)) - dense(A.block(n)), 2)
            assert gap <= 1e-12 * max(A.norm(), 1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_realize_extract_roundtrip_property(seed):
    rng = np.random.default_rng(seed)
    fs = fockspace(5, 3)
    A = random_poly(fs, rng, terms=2)
    dec = extract(A, 3)
    for n in range(4):
        lvl = SectorDecomposition(fs, n, dec.components[: n + 1])
        gap = np.linalg.norm(dense(realize(lvl, n)) - dense(A.block(n)), 2)
        assert gap <= 1e-11 * max(A.norm(), 1.0)


def test_extraction_components_coherent_across_levels(rng):
    fs = fockspace()
    A = random_poly(fs, rng)
    d3, d4 = extract(A, 3), extract(A, 4)
    for m in range(4):
        assert np.linalg.norm(d3.component(m) - d4.component(m)) < 1e-12


def test_monomial_realize_at_higher_level(rng):
    # single m=1 component |f><g| placed with coefficient c(n,1) = n
    fs = fockspace()
    f, g = unit(rng, 6), unit(rng, 6)
    A = monomial(fs, [f], [g])
    dec = extract(A, 3)
    np.testing.assert_allclose(dec.component(1), np.outer(f, g.conj()), atol=1e-12)
    lvl2 = SectorDecomposition(fs, 2, dec.components[:3])
    np.testing.assert_allclose(dense(realize(lvl2, 2)), dense(A.block(2)), atol=1e-12)


def test_interaction_two_body_component():
    # sum_{i != j} V_ij carries the single m=2 component V restricted to F_2
    from fermidyn.dynamics import Hamiltonian
    from fermidyn import PotentialProfile

    fs = fockspace()
    ham = Hamiltonian(fs, PotentialProfile.gaussian(0.7, 1.3))
    vop = ham.interaction_operator()
    dec = extract(vop, 4)
    np.testing.assert_allclose(dec.component(2), dense(vop.block(2)) / 2.0, atol=1e-12)
    for m in (0, 1, 3, 4):
        assert np.linalg.norm(dec.component(m)) < 1e-12


# ---------------------------------------------------------------------------
# descent map


def test_descend_level_error():
    fs = fockspace()
    with pytest.raises(LevelError):
        descend(extract(FockOperator.identity(fs), 0))


def test_descend_paper_convention_coefficient():
    fs = fockspace()
    C = np.outer([1, 0, 0, 0, 0, 0], [1, 0, 0, 0, 0, 0]).astype(complex)
    dec = SectorDecomposition(
        fs, 2, (np.zeros((1, 1), complex), C, np.zeros((15, 15), complex)),
        convention="paper")
    down = descend(dec)
    np.testing.assert_allclose(down.component(1), 0.5 * C, atol=1e-15)


def test_descend_drops_top_component(rng):
    fs = fockspace()
    d = fs.dim(2)
    C = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    dec = SectorDecomposition(
        fs, 2, (np.zeros((1, 1), complex), np.zeros((6, 6), complex), C),
        convention="paper")
    down = descend(dec)
    assert down.level == 1
    assert all(np.linalg.norm(c) < 1e-15 for c in down.components)


def test_descend_conventions_commute(rng):
    fs = fockspace()
    A = random_poly(fs, rng)
    dec = extract(A, 3)
    via_paper = descend(dec.to_convention("paper")).to_convention("normalized")
    direct = descend(dec)
    for a, b in zip(via_paper.components, direct.components):
        np.testing.assert_allclose(a, b, atol=1e-13)


def test_descend_realizes_restriction(rng):
    fs = fockspace(6, 5)
    A = monomial(fs, [unit(rng, 6) for _ in range(2)], [unit(rng, 6) for _ in range(2)])
    for n in range(1, 6):
        down = realize(descend(extract(A, n)), n - 1)
        np.testing.assert_allclose(dense(down), dense(A.block(n - 1)), atol=1e-11)


def test_descent_star_homomorphism_on_products(rng):
    fs = fockspace()
    A, B = random_poly(fs, rng, 2), random_poly(fs, rng, 2)
    AB = A @ B
    lhs = realize(descend(extract(AB, 4)), 3)
    np.testing.assert_allclose(dense(lhs), dense(AB.block(3)),
                               atol=1e-11 * max(AB.norm(), 1.0))
    star = extract(A.adjoint(), 3)
    plain = extract(A, 3)
    for m in range(4):
        np.testing.assert_allclose(
            star.component(m), plain.component(m).conj().T, atol=1e-12)


def test_realized_family_blocks(rng):
    fs = fockspace()
    A = random_poly(fs, rng)
    fam = realized_family(extract(A, 4))
    for n in range(5):
        np.testing.assert_allclose(dense(fam.block(n)), dense(A.block(n)),
                                   atol=1e-11 * max(A.norm(), 1.0))


def test_decomposition_json_roundtrip(rng):
    fs = fockspace()
    dec = extract(random_poly(fs, rng), 2)
    back = SectorDecomposition.from_json_dict(fs, dec.to_json_dict())
    assert back.level == dec.level and back.convention == dec.convention
    for a, b in zip(back.components, dec.components):
        np.testing.assert_allclose(a, b)


# ---------------------------------------------------------------------------
# clustering correlator


def _cluster_setup(m=32):
    space = OneBodySpace(m, 1.0, "open")
    fs = FockSpace(space, 2)
    anchor = m - 10
    u = OneBodyVector.bump(space, anchor - 1, 1.5, radius=6)
    v = OneBodyVector.bump(space, anchor, 1.5, radius=6)
    f1 = OneBodyVector.bump(space, anchor + 1, 1.5, radius=6)
    g1 = OneBodyVector.bump(space, anchor - 2, 1.5, radius=6)
    f2 = OneBodyVector.bump(space, anchor, 1.5, radius=6)
    comp = np.outer(u.coefficients, v.coefficients.conj())
    d2 = fs.dim(2)
    dec = SectorDecomposition(
        fs, 2, (np.zeros((1, 1), complex), comp, np.zeros((d2, d2), complex)),
        convention="paper")
    return fs, realized_family(dec), comp, [f1, f2], [g1, f2]


def test_clustering_identity_factorizes_exactly(rng):
    space = OneBodySpace(16, 1.0, "open")
    fs = FockSpace(space, 2)
    f1 = OneBodyVector.bump(space, 12, 1.0, radius=2)
    f2 = OneBodyVector.bump(space, 13, 1.0, radius=2)
    pt = clustering_correlator(FockOperator.identity(fs), [f1, f2], [f1, f2], 8)
    assert pt.gap < 1e-13


def test_clustering_local_monomial_exact_zero_gap():
    space = OneBodySpace(24, 1.0, "open")
    fs = FockSpace(space, 2)
    w = OneBodyVector.bump(space, 20, 1.0, radius=2)
    A = create(fs, w) @ annihilate(fs, w)
    f1 = OneBodyVector.bump(space, 21, 1.0, radius=2)
    f2 = OneBodyVector.bump(space, 19, 1.0, radius=2)
    pt = clustering_correlator(A, [f1, f2], [f1, f2], 12)
    assert pt.gap < 1e-14
    assert abs(pt.rhs) > 1e-6


def test_clustering_one_body_component_weight():
    fs, A, comp, fvecs, gvecs = _cluster_setup()
    pts = [clustering_correlator(A, fvecs, gvecs, x) for x in (4, 8, 12, 16)]
    gaps = [p.gap for p in pts]
    assert all(gaps[i + 1] <= gaps[i] + 1e-15 for i in range(3))
    assert gaps[-1] < 1e-10
    denom = gvecs[0].inner(OneBodyVector(comp @ fvecs[0].coefficients)) * \
        gvecs[1].inner(fvecs[1])
    recovered = (pts[-1].lhs / denom).real
    assert abs(recovered - 0.5) < 1e-6


# ---------------------------------------------------------------------------
# the separating family


def test_alternating_family_eigenvalues():
    fs = fockspace(6, 5)
    A = alternating_number_product(fs, 5)
    for n in fs.sectors():
        w = np.linalg.eigvalsh(dense(A.block(n)))
        assert np.abs(w * (w + 1.0)).max() < 1e-12 if w.size else True
        assert A.seminorm(n) <= 1.0 + 1e-12


def test_alternating_family_coherent():
    fs = fockspace(6, 5)
    A = alternating_number_product(fs, 5)
    dec = extract(A, 5)
    for n in range(5, 0, -1):
        np.testing.assert_allclose(dense(realize(dec, n)), dense(A.block(n)),
                                   atol=1e-12)
        dec = descend(dec)


def test_alternating_family_seminorm_vanishing():
    # growing products vanish on every fixed sector, norms stay at 1
    fs = fockspace(6, 3)
    for k in (4, 5, 6):
        prod = None
        for i in range(k):
            op = number_op(fs, OneBodyVector.basis(fs.space, i))
            prod = op if prod is None else prod @ op
        assert prod.seminorm(3) == 0.0


def test_separation_bound_on_witnesses(rng):
    fs = fockspace(6, 5)
    A = alternating_number_product(fs, 5)
    k = 4
    for _ in range(25):
        b = complex(rng.standard_normal(), rng.standard_normal())
        B = FockOperator.identity(fs) * b
        p = int(rng.integers(1, 3))
        term = None
        for _ in range(p):
            a = annihilate(fs, unit(rng, 6))
            term = a if term is None else term @ a
        for _ in range(p):
            c = create(fs, OneBodyVector.basis(fs.space, int(rng.integers(0, k))))
            term = c if term is None else term @ c
        B = B + term * complex(rng.standard_normal(), rng.standard_normal())
        r1, r2 = separation_residuals(A, B, k)
        assert max(r1, r2) >= 0.5 - 1e-12
        assert abs(r1 - abs(b)) < 1e-12
        assert abs(r2 - abs(1 + b)) < 1e-12


def test_seminorm_monotonicity_excess_shrinks_with_volume():
    # reported probe: the excess max(0, |A|_1 - |A|_2) for a localized
    # hopping monomial decreases as the chain grows
    excesses = []
    for m in (16, 32, 64):
        space = OneBodySpace(m, 1.0, "open")
        fs = FockSpace(space, 2)
        f = OneBodyVector.bump(space, m // 2, 1.5, radius=6)
        g = OneBodyVector.bump(space, m // 2 + 1, 1.5, radius=6)
        A = create(fs, f) @ annihilate(fs, g)
        excesses.append(max(0.0, A.seminorm(1) - A.seminorm(2)))
    assert excesses[2] <= excesses[0] + 1e-9
