import itertools

import numpy as np
import pytest

import oracles
from fermirg.fourier import covariance_from_profile
from fermirg.grassmann import GeneratorTable, GrassmannPolynomial, gaussian_convolution, gp_exp, polynomial_to_kernels
from fermirg.lattice import InteractionSpec, LatticeSpec, build_interaction, field_table, random_invariant_polynomial
from fermirg.rg import (RGError, amputate, cj_matrix, field_shift, jcj, free_part, green_functions, modified_covariance,
                        modified_profile, modified_propagator, omega, omega_tilde, quadratic_shift_sides,
                        quadratic_weight_sides, rg_counterterm_derivative, shift_identity_sides,
                        wickdot_pairing_integral)
from fermirg.scales import Counterterm, Dispersion, ScaleFamily
from fermirg.symmetry import reconstruct_two_point

LAT = LatticeSpec(d=1, L0=2, Lsp=1, nspin=1)  # four generators per family
BLOCKS = [(0, 2), (1, 1), (2, 0), (0, 4), (1, 3), (2, 2)]


def random_prop(rng, scale=0.5):
    prof = scale * (rng.normal(size=LAT.nsites) + 1j * rng.normal(size=LAT.nsites))
    return covariance_from_profile(prof, LAT, "random")


def random_W(rng, table=None, coupling=0.3):
    table = table or field_table(LAT, "phi", "psi")
    return random_invariant_polynomial(LAT, table, rng, BLOCKS, coupling)


def oracle_integral(W, C):
    """Z exp(Omega(W)) computed by the slow dict algebra: substitute psi -> psi + zeta and integrate zeta."""
    n = LAT.size
    shifted = {}
    for mono, c in oracles.from_package(W).items():
        term = {(): c}
        for g in mono:
            factor = {(g,): 1.0}
            if g >= n:  # psi generator, its zeta partner sits n places later
                factor[(g + n,)] = 1.0
            term = oracles.mul(term, factor)
        shifted = oracles.add(shifted, term)
    zeta = list(range(2 * n, 3 * n))
    I = oracles.gaussian(oracles.exp(shifted), zeta, C)
    Z = oracles.gaussian(oracles.exp(oracles.set_zero(shifted, range(2 * n))), zeta, C).get((), 0)
    return I, Z


def test_omega_of_zero():
    rng = np.random.default_rng(0)
    C = random_prop(rng)
    t = field_table(LAT, "phi", "psi")
    res = omega(C, GrassmannPolynomial.zero(t))
    assert len(res.output.chop(1e-15)) == 0 and abs(res.logZ) < 1e-15
    assert omega_tilde(C, GrassmannPolynomial.zero(t)).output.max_abs_diff(free_part(C, t)) < 1e-14


def test_omega_against_oracle():
    rng = np.random.default_rng(1)
    C = random_prop(rng)
    W = random_W(rng)
    res = omega(C, W)
    I, Z = oracle_integral(W, C.C)
    assert abs(np.exp(res.logZ) - Z) < 1e-10
    mine = oracles.from_package(gp_exp(res.output) * np.exp(res.logZ))
    assert oracles.max_diff(mine, I) < 1e-10


def test_direct_and_heat_agree():
    rng = np.random.default_rng(2)
    C = random_prop(rng)
    W = random_W(rng)
    for fn in (omega, omega_tilde):
        a = fn(C, W, method="direct").output
        b = fn(C, W, method="heat").output
        assert a.max_abs_diff(b) < 1e-11
    with pytest.raises(RGError):
        omega(C, W, method="bogus")


def test_omega_first_order():
    # Omega(eps W) = eps (int W(psi + zeta) - int W(zeta)) + O(eps^2)
    rng = np.random.default_rng(3)
    C = random_prop(rng)
    W = random_W(rng, coupling=1.0)
    errs = []
    for eps in (1e-3, 5e-4):
        out = oracles.from_package(omega(C, W * eps).output)
        conv = oracles.from_package(_convolve(W, C))
        errs.append(oracles.max_diff(out, oracles.scale(conv, eps)))
    assert errs[1] < errs[0] and errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def _convolve(W, C):
    g = gaussian_convolution(W, "psi", C.C)
    return g.without_constant()


def test_rg_map_with_source_factorizes():
    rng = np.random.default_rng(4)
    C = random_prop(rng)
    t = field_table(LAT, "phi", "psi")
    W = random_W(rng, t)
    lhs = omega_tilde(C, W).output
    rhs = free_part(C, t) + field_shift(omega(C, W).output, C)
    assert lhs.max_abs_diff(rhs) < 1e-10


def test_semigroup():
    rng = np.random.default_rng(5)
    C1, C2 = random_prop(rng), random_prop(rng)
    W = random_W(rng)
    lhs = omega_tilde(C1 + C2, W).output
    rhs = omega_tilde(C1, omega_tilde(C2, W).output).output
    assert lhs.max_abs_diff(rhs) < 1e-10


def test_field_shift():
    rng = np.random.default_rng(6)
    C = random_prop(rng)
    t = field_table(LAT, "phi", "psi")
    phi_only = GrassmannPolynomial.generator(t, "phi", 0) * GrassmannPolynomial.generator(t, "phi", 3)
    assert field_shift(phi_only, C).max_abs_diff(phi_only) == 0
    a = rng.normal(size=LAT.size)
    lin = GrassmannPolynomial.linear(t, "psi", a)
    M = cj_matrix(C)
    want = lin + GrassmannPolynomial.linear(t, "phi", a @ M)
    assert field_shift(lin, C).max_abs_diff(want) < 1e-13
    with pytest.raises(RGError):
        field_shift(lin, C, mode="CJphi+sC2Jphi")
    assert field_shift(lin, C, "CJphi+sC2Jphi", C2=C, s=1.0).max_abs_diff(
        lin + GrassmannPolynomial.linear(t, "phi", 2 * a @ M)) < 1e-13


def family(lat=LAT):
    return ScaleFamily(M=4.0, j0=2, lattice=lat, dispersion=Dispersion(mass=1.0, mu_F=0.5))


def test_amputation_of_phi_free_input():
    rng = np.random.default_rng(7)
    t = field_table(LAT, "phi", "psi")
    W = random_invariant_polynomial(LAT, t, rng, [(0, 2), (0, 4)], 1.0)
    assert amputate(W, family()).max_abs_diff(W) == 0
    psi_only = interaction(field_table(LAT, "psi"))
    assert amputate(psi_only, family()) is psi_only


def interaction(table):
    spec = InteractionSpec.from_function(LAT, lambda p: np.exp(-np.abs(p).sum()))
    return build_interaction(spec, LAT, table, "psi")


def test_green_functions_free():
    rng = np.random.default_rng(8)
    C = random_prop(rng)
    t = field_table(LAT, "phi", "psi")
    G = green_functions(C, GrassmannPolynomial.zero(t))
    assert np.abs(G.G[1] - jcj(C)).max() < 1e-12
    assert np.abs(G.amputated[1]).max() < 1e-12
    assert np.abs(G.G[2]).max() < 1e-12


def test_amputated_four_point_is_the_vertex_at_first_order():
    rng = np.random.default_rng(9)
    C = random_prop(rng)
    t = field_table(LAT, "phi", "psi")
    V = interaction(t)
    K = polynomial_to_kernels(V, ["psi"], LAT.weight)[(4,)]
    errs = []
    for eps in (1e-3, 5e-4):
        amp = green_functions(C, V * eps).amputated[2]
        errs.append(np.abs(amp / eps - 24 * K).max())
    assert errs[0] < 1e-2 * np.abs(24 * K).max()
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.05)


def test_green_functions_validation():
    rng = np.random.default_rng(10)
    C = random_prop(rng)
    t = field_table(LAT, "phi", "psi")
    odd = GrassmannPolynomial.generator(t, "psi", 0)
    with pytest.raises(RGError):
        green_functions(C, odd)
    with pytest.raises(RGError):
        green_functions(C, GrassmannPolynomial.generator(t, "phi", 0) * GrassmannPolynomial.generator(t, "psi", 1))
    vanishing = covariance_from_profile(np.zeros(LAT.nsites), LAT)
    with pytest.raises(RGError):
        green_functions(vanishing, interaction(t))


def test_wick_pairing_selects_equal_degree():
    rng = np.random.default_rng(11)
    C = random_prop(rng)
    t = field_table(LAT, "phi", "zeta")
    for q in range(3):
        terms = {}
        for zs in itertools.combinations(range(LAT.size), q):
            terms[sum(1 << t.bit("zeta", b) for b in zs)] = rng.normal() + 1j * rng.normal()
        f = GrassmannPolynomial.from_dict(t, terms)
        for p in range(3):
            res = wickdot_pairing_integral(f, p, C)
            if p != q:
                assert len(res) == 0 or np.abs(res.coeffs).max() < 1e-14
            else:
                assert np.abs(res.coeffs).max() > 1e-6


def test_counterterm_derivative():
    lat = LatticeSpec(d=1, L0=2, Lsp=1, nspin=1)
    fam = family(lat)
    t = field_table(lat, "phi", "psi")
    V = interaction(t) * 0.5
    ct = Counterterm.zero(lat, mu=1.0)
    zero = rg_counterterm_derivative(fam, ct, Counterterm.zero(lat, mu=1.0), V)
    assert len(zero.chop(0.0)) == 0
    direction = Counterterm(np.full_like(ct.deltaE, 0.01), 1.0)
    d, info = rg_counterterm_derivative(fam, ct, direction, V, h=1e-2, report=True)
    assert np.abs(d.coeffs).max() > 0
    assert info["ratio"] == pytest.approx(4.0, rel=0.1)


def test_modified_covariance_forms():
    rng = np.random.default_rng(12)
    C = random_prop(rng)
    assert np.array_equal(modified_profile(C.profile, np.zeros(LAT.nsites)), C.profile)
    u = 0.2 * (rng.normal(size=LAT.nsites) + 1j * rng.normal(size=LAT.nsites))
    U = reconstruct_two_point(u, LAT)
    assert np.abs(modified_covariance(C.C, U, LAT.weight) - modified_propagator(C, u).C).max() < 1e-12
    with pytest.raises(RGError):
        modified_covariance(np.eye(2), 2 * np.eye(2))


def antisym(n, rng, s=1.0):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return s * (A - A.T) / 2


def test_gaussian_shift_identities():
    rng = np.random.default_rng(13)
    n = 4
    t = GeneratorTable.of(phi=n, psi=n)
    masks = rng.integers(0, 1 << n, size=10) << n
    f = GrassmannPolynomial(t, masks, rng.normal(size=10))
    C = antisym(n, rng)
    U = antisym(n, rng, 0.1)
    for sides in (shift_identity_sides(f, C, 0.7), quadratic_weight_sides(f, C, U, 0.7),
                  quadratic_shift_sides(f * 0.3, C, U, 0.7)):
        lhs, rhs = sides
        assert lhs.max_abs_diff(rhs) < 1e-10
