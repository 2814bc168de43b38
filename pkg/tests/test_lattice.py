import numpy as np
import pytest

from fermidyn import (
    OneBodySpace,
    OneBodyVector,
    OpenBoundaryClipError,
    PotentialProfile,
    kinetic_matrix,
    pair_interaction,
    translate,
)


def test_kinetic_two_sites_open():
    t = kinetic_matrix(OneBodySpace(2, 1.0, "open"))
    np.testing.assert_allclose(t, [[2.0, -1.0], [-1.0, 2.0]])


def test_kinetic_periodic_annihilates_constants():
    t = kinetic_matrix(OneBodySpace(3, 1.0, "periodic"))
    np.testing.assert_allclose(t.sum(axis=1), 0.0, atol=1e-15)


def test_kinetic_periodic_smallest_eigenvalue_zero():
    t = kinetic_matrix(OneBodySpace(8, 0.5, "periodic"))
    w = np.linalg.eigvalsh(t)
    assert abs(w[0]) < 1e-12
    assert w[-1] > 0


def test_kinetic_hermitian_and_psd():
    for boundary in ("open", "periodic"):
        t = kinetic_matrix(OneBodySpace(7, 0.7, boundary))
        np.testing.assert_allclose(t, t.conj().T, atol=1e-15)
        assert np.linalg.eigvalsh(t).min() > -1e-12


def test_periodic_kinetic_commutes_with_cyclic_shift():
    space = OneBodySpace(6, 1.0, "periodic")
    t = kinetic_matrix(space)
    shift = np.roll(np.eye(6), 1, axis=0)
    np.testing.assert_allclose(t @ shift, shift @ t, atol=1e-15)


def test_translate_basis_periodic():
    space = OneBodySpace(4, 1.0, "periodic")
    e1 = OneBodyVector.basis(space, 0)
    out = translate(space, e1, 1)
    np.testing.assert_allclose(out.coefficients, [0, 0, 0, 1])


def test_translate_zero_is_identity(rng):
    space = OneBodySpace(5, 1.0, "periodic")
    f = OneBodyVector(rng.standard_normal(5) + 1j * rng.standard_normal(5))
    np.testing.assert_allclose(translate(space, f, 0).coefficients, f.coefficients)


def test_translate_periodic_unitary(rng):
    space = OneBodySpace(9, 1.0, "periodic")
    f = OneBodyVector(rng.standard_normal(9) + 1j * rng.standard_normal(9))
    for x in range(-10, 11):
        assert abs(translate(space, f, x).norm() - f.norm()) < 1e-14


def test_translate_disjoint_supports_orthogonal():
    space = OneBodySpace(8, 1.0, "open")
    f = OneBodyVector.bump(space, 2, 0.7, radius=1)   # support [1, 3]
    g = OneBodyVector.bump(space, 6, 0.7, radius=1)   # support [5, 7]
    assert abs(g.inner(translate(space, f, -1))) == 0.0   # [2, 4]: disjoint
    assert abs(g.inner(translate(space, f, -2))) > 0      # [3, 5]: touching


def test_translate_open_clip_raises():
    space = OneBodySpace(6, 1.0, "open")
    f = OneBodyVector.bump(space, 4, 0.8, radius=1)
    with pytest.raises(OpenBoundaryClipError):
        translate(space, f, -2)
    out = translate(space, f, 2)
    assert out.support == (1, 3)
    assert abs(out.norm() - f.norm()) < 1e-15


def test_profile_box_zero_range():
    p = PotentialProfile.box(1.0, 0)
    assert p.value(0) == 1.0
    assert p.value(1) == 0.0
    assert p.radius == 0


def test_profile_gaussian_value():
    p = PotentialProfile.gaussian(1.0, 2.0)
    assert abs(p.value(3) - np.exp(-9.0 / 8.0)) < 1e-15
    assert p.value(-3) == p.value(3)


def test_profile_tabulated_roundtrip(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text("0 2.0\n1 0.5\n-1 0.5\n# comment\n3 0.25\n")
    p = PotentialProfile.from_file(path)
    assert p.value(1) == 0.5
    assert p.value(2) == 0.0
    assert p.value(3) == 0.25
    assert p.radius == 3


def test_pair_interaction_zero_range_box():
    space = OneBodySpace(6, 1.0, "open")
    inter = pair_interaction(space, PotentialProfile.box(1.0, 0), 2)
    assert inter.term_value((2, 2), 0, 1) == 1.0
    assert inter.term_value((2, 3), 0, 1) == 0.0


def test_pair_interaction_zero_profile():
    space = OneBodySpace(6, 1.0, "open")
    inter = pair_interaction(space, PotentialProfile.zero(), 3)
    assert inter.config_value((0, 2, 4)) == 0.0


def test_pair_interaction_gaussian_displacement():
    space = OneBodySpace(8, 1.0, "open")
    inter = pair_interaction(space, PotentialProfile.gaussian(1.0, 2.0), 2)
    assert abs(inter.term_value((1, 4), 0, 1) - np.exp(-9.0 / 8.0)) < 1e-15


def test_pair_interaction_minimal_image():
    space = OneBodySpace(6, 1.0, "periodic")
    inter = pair_interaction(space, PotentialProfile.gaussian(1.0, 1.0), 2)
    # displacement 5 folds to 1 on a 6-ring
    assert inter.term_value((0, 5), 0, 1) == inter.term_value((0, 1), 0, 1)


def test_pair_interaction_translation_covariant():
    space = OneBodySpace(7, 1.0, "periodic")
    inter = pair_interaction(space, PotentialProfile.gaussian(0.9, 1.4), 3)
    config = (0, 2, 5)
    for shift in range(1, 7):
        moved = tuple((s + shift) % 7 for s in config)
        assert inter.config_value(moved) == inter.config_value(config)
        assert inter.term_value(config, 0, 2) == inter.term_value(config, 2, 0)


def test_translate_periodic_wrap_drops_support_window():
    space = OneBodySpace(6, 1.0, "periodic")
    f = OneBodyVector.bump(space, 1, 0.6, radius=1)   # support [0, 2]
    wrapped = translate(space, f, 1)                  # would need [-1, 1]
    assert wrapped.support is None
    assert abs(wrapped.norm() - f.norm()) < 1e-15


def test_declared_support_validated():
    space = OneBodySpace(6, 1.0, "open")
    c = np.zeros(6, complex)
    c[4] = 1.0
    with pytest.raises(ValueError):
        OneBodyVector(c, support=(0, 2))
