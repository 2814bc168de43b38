import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermidyn import (
    FockOperator,
    FockSpace,
    FockVector,
    OneBodySpace,
    OneBodyVector,
    ShapeError,
    annihilate,
    create,
    creation_product_vector,
    embed,
    number_op,
    placement_count,
    wedge_operator,
    wedge_vector,
)
from conftest import unit
from oracles import embed_oracle, wedge_operator_oracle, wedge_vector_oracle


def fockspace(m=6, nmax=3, boundary="open"):
    return FockSpace(OneBodySpace(m, 1.0, boundary), nmax)


# ---------------------------------------------------------------------------
# creation / annihilation


def test_create_on_vacuum():
    fs = fockspace()
    vec = create(fs, OneBodyVector.basis(fs.space, 0)).apply(FockVector.vacuum(fs))
    expect = np.zeros(6)
    expect[fs.basis(1).index_of((0,))] = 1.0
    np.testing.assert_allclose(vec.sector(1), expect)


def test_create_squared_vanishes(rng):
    fs = fockspace()
    c = create(fs, unit(rng, 6))
    assert (c @ c).norm() < 1e-14


def test_annihilate_vacuum(rng):
    fs = fockspace()
    out = annihilate(fs, unit(rng, 6)).apply(FockVector.vacuum(fs))
    assert out.norm() == 0.0


def test_annihilate_sign_from_adjoint():
    # a(e_2)|{1,2}> = -|{1}> (one occupied mode below 2 in 1-based labels)
    fs = fockspace()
    a = annihilate(fs, OneBodyVector.basis(fs.space, 1))
    state = FockVector(fs, {2: np.zeros(15)})
    state.blocks[2][fs.basis(2).index_of((0, 1))] = 1.0
    out = a.apply(state)
    expect = np.zeros(6)
    expect[fs.basis(1).index_of((0,))] = -1.0
    np.testing.assert_allclose(out.sector(1), expect)


def test_creation_norm_equals_vector_norm(rng):
    fs = fockspace()
    f = 2.7 * unit(rng, 6)
    op = create(fs, f)
    assert abs(op.norm() - np.linalg.norm(f)) < 1e-12
    # every sector below the truncation saturates the same norm
    for n in range(fs.nmax):
        assert abs(op.seminorm(n) - np.linalg.norm(f)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_car_relations_random(seed):
    rng = np.random.default_rng(seed)
    fs = fockspace(5, 3)
    f, g = unit(rng, 5), unit(rng, 5)
    af, ag, cg = annihilate(fs, f), annihilate(fs, g), create(fs, g)
    assert af.anticommutator(ag).norm() < 1e-13
    mixed = af.anticommutator(cg) - FockOperator.identity(fs) * np.vdot(f, g)
    assert max(mixed.seminorm(n) for n in range(fs.nmax)) < 1e-13


def test_grade_bookkeeping(rng):
    fs = fockspace()
    c = create(fs, unit(rng, 6))
    assert c.grade == 1
    assert c.adjoint().grade == -1
    for n in range(fs.nmax):
        assert c.block(n).shape == (fs.dim(n + 1), fs.dim(n))


def test_number_operator_basics():
    fs = fockspace()
    n1 = number_op(fs, OneBodyVector.basis(fs.space, 0))
    state = FockVector(fs, {2: np.zeros(15)})
    state.blocks[2][fs.basis(2).index_of((0, 2))] = 1.0
    np.testing.assert_allclose(n1.apply(state).sector(2), state.sector(2))
    n2 = number_op(fs, OneBodyVector.basis(fs.space, 1))
    assert n2.apply(state).norm() == 0.0


def test_number_operator_spectrum(rng):
    fs = fockspace()
    f = 1.7 * unit(rng, 6)
    nf = number_op(fs, f)
    for n in fs.sectors():
        w = np.linalg.eigvalsh(nf.block(n))
        dist = np.minimum(np.abs(w), np.abs(w - np.linalg.norm(f) ** 2))
        assert dist.max() < 1e-12


def test_seminorm_identity_and_truncation_decay():
    fs = fockspace(6, 3)
    assert FockOperator.identity(fs).seminorm(2) == pytest.approx(1.0)
    # products n(e_1)...n(e_k) die on any fixed sector once k exceeds it
    mode_ops = [number_op(fs, OneBodyVector.basis(fs.space, i)) for i in range(6)]
    prod = mode_ops[0]
    norms = [prod.seminorm(2)]
    for op in mode_ops[1:4]:
        prod = prod @ op
        norms.append(prod.seminorm(2))
    assert norms[1] > 0 and norms[2] == 0.0 and norms[3] == 0.0


# ---------------------------------------------------------------------------
# wedge calculus against the tensor oracle


def test_wedge_vector_norm_and_sqrt_factorial():
    fs = fockspace()
    e = [OneBodyVector.basis(fs.space, i) for i in range(3)]
    w = wedge_vector(fs, [e[0], e[1]])
    assert abs(w.norm() - 1.0 / math.sqrt(2)) < 1e-14
    prod = creation_product_vector(fs, [e[0], e[1]])
    assert abs(prod.norm() - 1.0) < 1e-14


def test_wedge_vector_antisymmetry(rng):
    fs = fockspace()
    f = unit(rng, 6)
    assert wedge_vector(fs, [f, f]).norm() < 1e-14


def test_wedge_vector_matches_tensor_oracle(rng):
    fs = fockspace(5, 3)
    for n in (1, 2, 3):
        vs = [unit(rng, 5) for _ in range(n)]
        got = wedge_vector(fs, [OneBodyVector(v) for v in vs]).sector(n)
        want = wedge_vector_oracle(5, vs)
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_wedge_gram_determinant(rng):
    fs = fockspace()
    f = [unit(rng, 6) for _ in range(2)]
    g = [unit(rng, 6) for _ in range(2)]
    lhs = wedge_vector(fs, g).inner(wedge_vector(fs, f))
    gram = np.array([[np.vdot(g[i], f[j]) for j in range(2)] for i in range(2)])
    assert abs(lhs - np.linalg.det(gram) / 2.0) < 1e-13


def test_wedge_operator_identity():
    fs = fockspace()
    eye = np.eye(6)
    np.testing.assert_allclose(wedge_operator(fs, [eye, eye, eye]), np.eye(20), atol=1e-12)


def test_wedge_operator_matches_symmetrized_oracle(rng):
    fs = fockspace(4, 3)
    for n in (2, 3):
        Ks = [rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
              for _ in range(n)]
        got = wedge_operator(fs, Ks)
        want = wedge_operator_oracle(4, Ks)
        np.testing.assert_allclose(got, want, atol=1e-11)


def test_wedge_operator_two_body_definition(rng):
    # K ^ Id on F_2 is the compression of (K x Id + Id x K)/2
    fs = fockspace(4, 2)
    K = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    got = wedge_operator(fs, [K, np.eye(4)])
    want = wedge_operator_oracle(4, [K, np.eye(4)])
    np.testing.assert_allclose(got, want, atol=1e-12)


# ---------------------------------------------------------------------------
# embedding of m-body components: the normalization pin


def test_embed_scalar_and_full_body(rng):
    fs = fockspace()
    lam = 2.0 - 1.0j
    np.testing.assert_allclose(
        embed(fs, np.array([[lam]]), 0, 2), lam * np.eye(15), atol=1e-14)
    d = fs.dim(2)
    C = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    np.testing.assert_allclose(embed(fs, C, 2, 2), C, atol=1e-14)


def test_embed_rank_one_site_example():
    fs = fockspace(3, 2)
    C = np.zeros((3, 3), dtype=complex)
    C[0, 0] = 1.0
    np.testing.assert_allclose(
        embed(fs, C, 1, 2), np.diag([0.5, 0.5, 0.0]), atol=1e-14)


def test_embed_matches_tensor_oracle(rng):
    m = 5
    fs = fockspace(m, 4)
    for mbody in range(4):
        for n in range(mbody, 5):
            d = fs.dim(mbody)
            C = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            got = embed(fs, C, mbody, n)
            want = embed_oracle(m, C, mbody, n)
            np.testing.assert_allclose(got, want, atol=1e-11)


def test_embed_equals_identity_padded_wedge(rng):
    # embed(P(K_1 x .. x K_m)P, n) == wedge_operator(K_1..K_m, Id..Id) on F_n
    m = 5
    fs = fockspace(m, 4)
    eye = np.eye(m)
    for mbody in (1, 2):
        Ks = [rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
              for _ in range(mbody)]
        C = wedge_operator(fs, Ks) if mbody > 1 else np.asarray(Ks[0])
        for n in range(mbody, 5):
            padded = wedge_operator(fs, Ks + [eye] * (n - mbody))
            np.testing.assert_allclose(embed(fs, C, mbody, n), padded, atol=1e-11)


def test_embed_shape_error():
    fs = fockspace()
    with pytest.raises(ShapeError):
        embed(fs, np.zeros((6, 6)), 1, 0)


def test_mode_count_cap():
    from fermidyn.basis import SectorBasis

    SectorBasis(64, 1)
    with pytest.raises(ValueError):
        SectorBasis(65, 1)


def _monomial(fs, fs_list, gs_list):
    op = None
    for f in fs_list:
        c = create(fs, f)
        op = c if op is None else op @ c
    for g in gs_list:
        a = annihilate(fs, g)
        op = a if op is None else op @ a
    return op


def test_monomial_placement_correspondence(rng):
    """The factor pinning normal-ordered monomials to embedded components.

    a*(f_1)..a*(f_m) a(g_m)..a(g_1) restricted to F_n equals
    c(n, m) * embed(C, n) with the single compact C = (1/m!) * (the
    restriction to F_m), for every n >= m.
    """
    m = 5
    fs = fockspace(m, 4)
    for mbody in (1, 2, 3):
        f_list = [unit(rng, m) for _ in range(mbody)]
        g_list = [unit(rng, m) for _ in range(mbody)]
        mono = _monomial(fs, f_list, list(reversed(g_list)))
        C = np.asarray(mono.block(mbody)) / math.factorial(mbody)
        for n in range(mbody, 5):
            got = placement_count(n, mbody) * embed(fs, C, mbody, n)
            np.testing.assert_allclose(got, mono.block(n), atol=1e-11)


def test_monomial_annihilator_ordering_sign(rng):
    """Reversing the annihilator order costs (-1)^{m(m-1)/2}."""
    m = 5
    fs = fockspace(m, 4)
    for mbody in (2, 3):
        f_list = [unit(rng, m) for _ in range(mbody)]
        g_list = [unit(rng, m) for _ in range(mbody)]
        plain = _monomial(fs, f_list, g_list)
        reverse = _monomial(fs, f_list, list(reversed(g_list)))
        sign = (-1.0) ** (mbody * (mbody - 1) // 2)
        diff = plain - reverse * sign
        assert diff.norm() < 1e-12


def test_dgamma_one_body_sum(rng):
    # sum_j id x .. x ketbra x .. x id on F_n equals n * embed(ketbra, n)
    fs = fockspace(4, 3)
    f, g = unit(rng, 4), unit(rng, 4)
    mono = create(fs, f) @ annihilate(fs, g)
    K = np.outer(f, g.conj())
    for n in (1, 2, 3):
        np.testing.assert_allclose(
            mono.block(n), n * embed(fs, K, 1, n), atol=1e-12)


# ---------------------------------------------------------------------------
# operator container behaviour


def test_adjoint_of_blocks(rng):
    fs = fockspace()
    c = create(fs, unit(rng, 6))
    a = c.adjoint()
    for n in range(fs.nmax):
        np.testing.assert_allclose(
            np.asarray(a.block(n + 1)), np.asarray(c.block(n)).conj().T)


def test_json_roundtrip(rng):
    fs = fockspace(4, 3)
    op = _monomial(fs, [unit(rng, 4)], [unit(rng, 4)])
    data = op.to_json_dict()
    back = FockOperator.from_json_dict(fs, data)
    assert (op - back).norm() == 0.0
    assert data["grade"] == 0
    assert {b["n"] for b in data["blocks"]} == set(op.blocks)


def test_json_roundtrip_sparse_blocks():
    # big sectors store CSR; the JSON container is storage-agnostic
    fs = fockspace(64, 2)
    op = number_op(fs, OneBodyVector.basis(fs.space, 10))
    import scipy.sparse as sp

    assert sp.issparse(op.block(2))
    back = FockOperator.from_json_dict(fs, op.to_json_dict())
    assert sp.issparse(back.block(2))
    assert (op - back).norm() == 0.0


def test_apply_grade_shift(rng):
    fs = fockspace()
    c = create(fs, unit(rng, 6))
    vac = FockVector.vacuum(fs)
    one = c.apply(vac)
    assert set(one.blocks) == {1}
    two = c.apply(one)
    assert set(two.blocks) == {2}
