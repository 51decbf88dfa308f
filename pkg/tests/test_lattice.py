import numpy as np
import pytest

from fermirg.fourier import compose, partial_ft
from fermirg.lattice import (InteractionSpec, Kernel, LatticeError, LatticeSpec, build_interaction, build_J,
                             delta_kernel, field_table, partial_translation_phase, random_invariant_kernel,
                             source_term, translate_kernel)
from fermirg.symmetry import check_symmetry

LAT = LatticeSpec(d=1, L0=4, Lsp=2, nspin=2)


def exponential(lat, coupling=1.0):
    return InteractionSpec.from_function(lat, lambda p: np.exp(-np.abs(p).sum()), coupling)


def test_lattice_validation():
    for bad in [dict(L0=3), dict(L0=0), dict(Lsp=0), dict(dt=0.0), dict(nspin=3), dict(L0=64, Lsp=128)]:
        with pytest.raises(LatticeError):
            LatticeSpec(**bad)


def test_sizes_and_index_layout():
    assert LAT.nsites == 8
    assert LAT.size == 8 * 2 * 2
    assert LAT.index(3, 1, 0) == (3 * 2 + 1) * 2
    f = LAT.fields
    i = LAT.index(5, 1, 1)
    assert (f["site"][i], f["spin"][i], f["a"][i]) == (5, 1, 1)


def test_antiperiodic_time_wrap():
    site, sign = LAT.site_of([LAT.L0, 1])
    assert site == LAT.site_of([0, 1])[0]
    assert sign == -1
    assert LAT.site_of([2 * LAT.L0, 1])[1] == 1
    # spatial directions are periodic
    assert LAT.site_of([1, LAT.Lsp])[1] == 1


def test_matsubara_frequencies_are_odd():
    k0 = LAT.momenta[:, 0] * LAT.L0 * LAT.dt / np.pi
    assert np.allclose(np.round(k0) % 2, 1)
    assert sorted(np.round(k0)) == sorted(-np.round(k0))


def test_J_properties():
    J = build_J(LAT).values
    assert np.array_equal(J, -J.T)
    # J o J = -1 as integral operators
    assert np.abs(compose(J, J, LAT) + delta_kernel(LAT).values).max() < 1e-12


def test_source_term_symmetry():
    lat = LatticeSpec(d=1, L0=2, Lsp=2, nspin=2)
    t = field_table(lat, "phi", "psi")
    assert source_term(t, lat, "phi", "psi").max_abs_diff(source_term(t, lat, "psi", "phi")) < 1e-14


def test_interaction_examples():
    zero = InteractionSpec(np.zeros(LAT.nsites))
    assert len(build_interaction(zero, LAT)) == 0
    V = build_interaction(exponential(LAT), LAT)
    assert V.max_degree() == 4 and V.is_even()
    assert check_symmetry(V, "BNST", lattice=LAT, families=("psi",)).ok
    # v(x0, -x) = conj v(x0, x) and real: R holds as well
    assert check_symmetry(V, "R", lattice=LAT, families=("psi",)).ok


def test_interaction_without_reflection_symmetry():
    lat = LatticeSpec(d=1, L0=4, Lsp=4, nspin=1)
    spec = InteractionSpec.from_function(lat, lambda p: 1.0 + 0.5j * np.sin(p[1]) + 0.3 * np.sin(p[0]))
    V = build_interaction(spec, lat)
    assert not check_symmetry(V, "R", lattice=lat, families=("psi",)).ok


def test_interaction_rejects_bad_potential():
    with pytest.raises(LatticeError):
        build_interaction(InteractionSpec(np.ones(3)), LAT)
    with pytest.raises(LatticeError):
        build_interaction(InteractionSpec(np.full(LAT.nsites, np.nan)), LAT)


def test_translate_kernel():
    rng = np.random.default_rng(1)
    f = Kernel(rng.normal(size=(LAT.size, LAT.size)), 0, LAT)
    assert np.array_equal(translate_kernel(f, (0, 0)).values, f.values)
    g = random_invariant_kernel(LAT, 2, rng)
    for t in [(1, 0), (0, 1), (3, 1), (-2, 1)]:
        assert np.abs(translate_kernel(g, t).values - g.values).max() < 1e-12
    with pytest.raises(LatticeError):
        translate_kernel(f, (1,))


def test_translation_of_partial_kernel_is_a_phase():
    rng = np.random.default_rng(2)
    lat = LatticeSpec(d=1, L0=4, Lsp=2, nspin=1)
    # odd arity kernels cannot be invariant under antiperiodic time translations
    g = random_invariant_kernel(lat, 4, rng, m=2)
    P = partial_ft(g)
    for t in [(1, 0), (0, 1), (2, 1)]:
        moved = translate_kernel(P, t).values
        phase = partial_translation_phase(P, t)
        assert np.abs(moved - phase[:, :, None, None] * P.values).max() < 1e-12
