import numpy as np
import pytest

from fermirg.grassmann import GrassmannPolynomial, substitute
from fermirg.lattice import (InteractionSpec, Kernel, LatticeSpec, build_interaction, field_table,
                             random_invariant_polynomial)
from fermirg.symmetry import (SymmetryError, apply_field_transform, check_symmetry, invariance_violation,
                              lemma_b6_check, random_bnst_two_point, reconstruct_two_point, two_point_normal_form)

SPIN = LatticeSpec(d=1, L0=2, Lsp=1, nspin=2)  # 8 field indices
LAT = LatticeSpec(d=1, L0=4, Lsp=2, nspin=2)


def interaction(lat):
    spec = InteractionSpec.from_function(lat, lambda p: np.exp(-np.abs(p).sum()))
    return build_interaction(spec, lat)


def test_interaction_passes_all_tags():
    rep = check_symmetry(interaction(LAT), "BNSTR", lattice=LAT, families=("psi",))
    assert rep.ok, rep.per_tag
    assert set(rep.per_tag) == set("BNSTR")


def test_particle_number_violation_detected():
    rng = np.random.default_rng(0)
    vals = np.zeros((LAT.size, LAT.size))
    vals[0, 2] = 1.0  # two psi (a = 0) fields: unbalanced
    vals[2, 0] = -1.0
    rep = check_symmetry(Kernel(vals, 0, LAT), "N")
    assert not rep.ok
    assert rep.per_tag["N"] == 1.0


def test_two_point_kernel_gets_b_for_free():
    rng = np.random.default_rng(1)
    for _ in range(3):
        f = random_bnst_two_point(LAT, rng)
        assert np.abs(f.values + f.values.T).max() < 1e-12
        assert check_symmetry(f, "NST").ok
        assert check_symmetry(f, "B").ok


def test_unknown_tag_rejected():
    with pytest.raises(SymmetryError):
        check_symmetry(Kernel(np.zeros((2, 2)), 0, SPIN), "Q")


def test_field_transform_identities():
    t = field_table(SPIN, "psi")
    V = interaction(SPIN)
    assert apply_field_transform(V, SPIN, "spin", A=np.eye(2), families=("psi",)).max_abs_diff(V) == 0
    for theta in (0.2, 1.1, 2.9):
        W = apply_field_transform(V, SPIN, "phase", theta=theta, families=("psi",))
        assert W.max_abs_diff(V) < 1e-12


def test_bar_swap_twice_is_the_parity_map():
    rng = np.random.default_rng(2)
    t = field_table(SPIN, "psi")
    masks = rng.integers(0, 1 << t.size, size=30)
    W = GrassmannPolynomial(t, masks, rng.normal(size=30))
    twice = apply_field_transform(apply_field_transform(W, SPIN, "bar-swap", families=("psi",)),
                                  SPIN, "bar-swap", families=("psi",))
    # psi -> i psi(-x, 1-a) twice gives psi -> i^2 psi(x, a) = -psi
    minus = substitute(W, {b: -GrassmannPolynomial.generator(t, "psi", b) for b in range(t.size)})
    assert twice.max_abs_diff(minus) < 1e-14


def test_polynomial_and_kernel_views_agree():
    rng = np.random.default_rng(3)
    lat = LatticeSpec(d=1, L0=2, Lsp=1, nspin=1)
    t = field_table(lat, "phi", "psi")
    W = random_invariant_polynomial(lat, t, rng, [(0, 2), (2, 0), (1, 1)])
    assert check_symmetry(W, "T", lattice=lat).ok
    assert invariance_violation(W, lat, "T") < 1e-12
    W_bad = W + GrassmannPolynomial.generator(t, "phi", 0) * GrassmannPolynomial.generator(t, "psi", 1)
    assert invariance_violation(W_bad, lat, "T") > 0.1
    assert not check_symmetry(W_bad, "T", lattice=lat).ok


def test_interaction_invariance_under_transforms():
    V = interaction(SPIN)
    for tag in "BNSTR":
        assert invariance_violation(V, SPIN, tag, families=("psi",)) < 1e-12


def test_normal_form_roundtrip():
    rng = np.random.default_rng(4)
    prof = rng.normal(size=LAT.nsites) + 1j * rng.normal(size=LAT.nsites)
    f = Kernel(reconstruct_two_point(prof, LAT), 0, LAT)
    assert np.abs(two_point_normal_form(f) - prof).max() < 1e-12


def test_reversal_real_profile():
    rng = np.random.default_rng(5)
    f = random_bnst_two_point(LAT, rng, real_reversal=True)
    assert check_symmetry(f, "R").ok
    prof = two_point_normal_form(f)
    assert np.abs(prof[LAT.mode_of_neg_k0()] - np.conj(prof)).max() < 1e-12


def test_normal_form_rejects_bad_input():
    with pytest.raises(SymmetryError):
        two_point_normal_form(Kernel(np.ones((LAT.size, LAT.size)), 0, LAT))


def test_two_point_identity_cases():
    lat = LatticeSpec(d=1, L0=4, Lsp=2, nspin=1)
    ok, err = lemma_b6_check(Kernel(np.zeros((lat.size, lat.size)), 0, lat))
    assert ok and err == 0
    rng = np.random.default_rng(6)
    for _ in range(3):
        ok, err = lemma_b6_check(random_bnst_two_point(lat, rng))
        assert ok and err < 1e-10
