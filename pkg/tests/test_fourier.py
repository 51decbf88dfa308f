import numpy as np
import pytest

from fermirg.fourier import (FourierError, character_matrix, compose, conservation_mask, covariance_from_profile,
                             inner_product, inverse_partial_ft, inverse_total_ft, k0_vanishing_bound_check,
                             multiplier_hat, partial_ft, project_mean_zero, total_ft, two_point_profile)
from fermirg.lattice import Kernel, LatticeSpec, build_J, delta_kernel, random_invariant_kernel, translate_kernel
from fermirg.symmetry import check_symmetry

LAT = LatticeSpec(d=1, L0=4, Lsp=2, nspin=2)
SMALL = LatticeSpec(d=1, L0=4, Lsp=2, nspin=1)


def random_profile(lat, rng):
    return rng.normal(size=lat.nsites) + 1j * rng.normal(size=lat.nsites)


def test_inner_product_and_characters():
    # spin mismatch
    assert inner_product(LAT, LAT.index(3, 0, 0), LAT.index(5, 1, 0)) == 0.0
    # bit mismatch
    assert inner_product(LAT, LAT.index(3, 0, 0), LAT.index(5, 0, 1)) == 0.0
    Ep, Em = character_matrix(LAT, +1), character_matrix(LAT, -1)
    origin = [LAT.index(0, s, a) for s in range(2) for a in range(2)]
    same = np.abs(Ep) > 0
    for x in origin:
        assert np.allclose(Ep[same[:, x], x], 1.0)
    assert np.allclose((Ep * Em)[same], 1.0)
    assert np.all((Ep * Em)[~same] == 0)


def test_delta_kernel_transform_is_constant():
    F = total_ft(delta_kernel(SMALL)).values
    nz = np.abs(F) > 1e-12
    assert nz.any()
    assert np.allclose(F[nz], F[nz][0])


@pytest.mark.parametrize("nargs,m", [(2, 0), (2, 1), (4, 2), (4, 1)])
def test_total_roundtrip(nargs, m):
    rng = np.random.default_rng(nargs * 10 + m)
    f = random_invariant_kernel(SMALL, nargs, rng, m=m)
    F = total_ft(f)
    assert np.all(F.values[~conservation_mask(SMALL, nargs)] == 0)
    assert np.abs(inverse_total_ft(F).values - f.values).max() < 1e-10
    # shifting an invariant kernel leaves the transform untouched
    assert np.abs(total_ft(translate_kernel(f, (1, 1))).values - F.values).max() < 1e-10


def test_total_ft_rejects_non_invariant():
    rng = np.random.default_rng(0)
    with pytest.raises(FourierError):
        total_ft(Kernel(rng.normal(size=(SMALL.size, SMALL.size)), 0, SMALL))


def test_partial_transform_paths():
    rng = np.random.default_rng(1)
    f = random_invariant_kernel(SMALL, 4, rng, m=2)
    assert np.array_equal(partial_ft(Kernel(f.values, 0, SMALL)).values, f.values)
    P = partial_ft(f)
    assert np.abs(inverse_partial_ft(P).values - f.values).max() < 1e-10
    # transform the remaining position arguments by hand and compare with the total transform
    E = character_matrix(SMALL, +1) * SMALL.weight
    full = np.einsum("ai,bj,cdij->cdab", E, E, P.values)
    want = np.where(conservation_mask(SMALL, 4), full / SMALL.volume, 0)
    assert np.abs(want - total_ft(f).values).max() < 1e-10


def test_multiplier_identities():
    rng = np.random.default_rng(2)
    one = multiplier_hat(np.ones(LAT.nsites), LAT).values
    assert np.abs(one - delta_kernel(LAT).values).max() < 1e-12
    chi, chi2 = random_profile(LAT, rng), random_profile(LAT, rng)
    a, b = multiplier_hat(chi, LAT), multiplier_hat(chi2, LAT)
    assert np.abs(compose(a, b) - multiplier_hat(chi * chi2, LAT).values).max() < 1e-10
    J = build_J(LAT)
    Ja = Kernel(compose(J, a), 0, LAT)
    assert np.abs(two_point_profile(Ja) - chi).max() < 1e-10
    JaJ = compose(Ja.values, J.values, LAT)
    assert np.abs(JaJ + a.values.T).max() < 1e-10


def test_covariance_identities():
    rng = np.random.default_rng(3)
    prof = random_profile(LAT, rng)
    P = covariance_from_profile(prof, LAT)
    C = P.C
    J = build_J(LAT).values
    assert np.abs(C + C.T).max() < 1e-12
    assert np.abs(compose(C, J, LAT) - multiplier_hat(prof, LAT).values).max() < 1e-10
    JCJ = compose(compose(J, C, LAT), J, LAT)
    assert np.abs(two_point_profile(Kernel(JCJ, 0, LAT)) - prof).max() < 1e-10
    assert check_symmetry(P.kernel(), "NST").ok


def test_covariance_matches_explicit_sum():
    # (x, a=0) against (0, a=1): (1/V) sum_k exp(i <k, x>_-) C(k)
    rng = np.random.default_rng(4)
    prof = random_profile(SMALL, rng)
    C = covariance_from_profile(prof, SMALL).C
    k = SMALL.momenta
    for site in range(SMALL.nsites):
        x = SMALL.site_coords[site] * SMALL.spacing
        want = sum(np.exp(1j * (-k[n, 0] * x[0] + k[n, 1] * x[1])) * prof[n] for n in range(SMALL.nsites))
        assert abs(C[SMALL.index(site, 0, 0), SMALL.index(0, 0, 1)] - want / SMALL.volume) < 1e-12


def test_profile_length_checked():
    with pytest.raises(FourierError):
        multiplier_hat(np.ones(3), LAT)
    with pytest.raises(FourierError):
        covariance_from_profile(np.ones(3), LAT)


def mean_zero_u(rng):
    u = random_invariant_kernel(SMALL, 2, rng, antisymmetric=False)
    return project_mean_zero(u)


def test_k0_vanishing_bound():
    rng = np.random.default_rng(5)
    zero = Kernel(np.zeros((SMALL.size, SMALL.size)), 0, SMALL)
    chi = 1 + 0.5 * np.cos(SMALL.momenta[:, 0])
    rep = k0_vanishing_bound_check(zero, chi)
    assert rep.ok and rep.lhs.finite_max() == 0 and rep.rhs.finite_max() == 0
    for _ in range(5):
        rep = k0_vanishing_bound_check(mean_zero_u(rng), chi)
        assert rep.ok


def test_k0_vanishing_requires_mean_zero():
    rng = np.random.default_rng(6)
    u = random_invariant_kernel(SMALL, 2, rng, antisymmetric=False)
    with pytest.raises(FourierError):
        k0_vanishing_bound_check(u, np.ones(SMALL.nsites))
