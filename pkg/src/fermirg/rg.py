"""Renormalization group maps, Green's functions and Gaussian shift identities.

Polynomials live on a generator table with families ``phi`` (source) and
``psi`` (field), both the size of the lattice's field index.  The integration
variable ``zeta`` is appended on demand so that the caller's table is untouched.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .fourier import Propagator, compose, covariance_from_profile, multiplier_hat
from .grassmann import (
    GrassmannError,
    GrassmannPolynomial,
    SingularLogError,
    gaussian_convolution,
    gaussian_integral,
    gp_exp,
    gp_log,
    linear_images,
    polynomial_to_kernels,
    shift_family,
    substitute,
    wick_order,
)
from .lattice import Kernel, LatticeSpec, bilinear_form, build_J, source_term
from .scales import Counterterm, ScaleFamily, counterterm_validate, first_scale_covariance

Z_MIN = 1e-300
EXACT_BUDGET = 12
SPARSE_BUDGET = 20
AMP_GUARD = 1e-10


class RGError(ValueError):
    pass


@dataclass
class RGResult:
    output: GrassmannPolynomial
    logZ: complex
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------- helpers


def _covariance(C) -> np.ndarray:
    return C.C if isinstance(C, Propagator) else np.asarray(C, dtype=np.complex128)


def _lattice_of(C, lattice: LatticeSpec | None) -> LatticeSpec:
    if lattice is not None:
        return lattice
    if isinstance(C, Propagator):
        return C.lattice
    raise RGError("a lattice is needed when the covariance is a bare matrix")


def cj_matrix(C, lattice: LatticeSpec | None = None) -> np.ndarray:
    """Coefficients of ``(C J phi)(xi) = sum_eta M[xi, eta] phi_eta``."""
    lat = _lattice_of(C, lattice)
    return lat.weight * compose(_covariance(C), build_J(lat).values, lat)


def jcj(C, lattice: LatticeSpec | None = None) -> np.ndarray:
    lat = _lattice_of(C, lattice)
    J = build_J(lat).values
    return compose(compose(J, _covariance(C), lat), J, lat)


def free_part(C, table, lattice: LatticeSpec | None = None) -> GrassmannPolynomial:
    """``1/2 phi J C J phi``."""
    lat = _lattice_of(C, lattice)
    return 0.5 * bilinear_form(table, "phi", "phi", jcj(C, lat), lat)


def _with_zeta(W: GrassmannPolynomial, budget: int | None):
    n = W.table.family_size("psi")
    table = W.table if "zeta" in W.table.names else W.table.extend("zeta", n)
    table.check_budget(budget)
    return W.retable(table), table


def _shifted_images(table, family: str, add_family: str):
    return [GrassmannPolynomial.generator(table, add_family, i) for i in range(table.family_size(family))]


def _log_normalized(I: GrassmannPolynomial, Z: complex, original_table):
    if not np.isfinite(Z) or abs(Z) < Z_MIN:
        raise SingularLogError(f"normalization Z = {Z!r} is zero or not finite")
    out = gp_log(I / Z)
    # everything left should be free of zeta
    if out.table != original_table:
        zmask = out.table.family_mask("zeta")
        if np.any(out.masks & zmask):
            raise GrassmannError("integration variable survived the integral")
        out = GrassmannPolynomial(original_table, out.masks, out.coeffs)
    return out.without_constant(), complex(np.log(Z))


def _normalization(W: GrassmannPolynomial, C: np.ndarray) -> complex:
    """``Z = int exp(W(0, zeta)) dmu_C(zeta)`` with ``zeta`` realised in the ``psi`` slot."""
    fams = [f for f in W.table.names if f != "psi"]
    W0 = W.set_zero(*fams)
    return complex(gaussian_integral(gp_exp(W0), "psi", C).constant_term)


# ------------------------------------------------------------- the maps


def _omega_impl(C, W: GrassmannPolynomial, with_source: bool, lattice, method: str, budget):
    t0 = time.perf_counter()
    Cm = _covariance(C)
    if method not in ("direct", "heat"):
        raise RGError(f"method must be 'direct' or 'heat', got {method!r}")
    if with_source and "phi" not in W.table.names:
        raise RGError("the source map needs a phi family")
    Z = _normalization(W, Cm)
    if method == "direct":
        Wz, table = _with_zeta(W, EXACT_BUDGET if budget is None else budget)
        F = shift_family(Wz, "psi", _shifted_images(table, "psi", "zeta"))
        if with_source:
            F = F + source_term(table, _lattice_of(C, lattice), "phi", "zeta")
        I = gaussian_integral(gp_exp(F), "zeta", Cm)
        ngen = table.size
    else:
        W.table.check_budget(SPARSE_BUDGET if budget is None else budget)
        # int F(psi + zeta) dmu(zeta) = exp(Delta_C / 2) F, and phi J zeta = phi J (psi + zeta) - phi J psi
        if with_source:
            lat = _lattice_of(C, lattice)
            src = source_term(W.table, lat, "phi", "psi")
            I = gaussian_convolution(gp_exp(W + src), "psi", Cm) * gp_exp(-src)
        else:
            I = gaussian_convolution(gp_exp(W), "psi", Cm)
        ngen = W.table.size
    out, logZ = _log_normalized(I, Z, W.table)
    diag = {"generators": ngen, "terms": len(out), "method": method, "truncated": False,
            "seconds": time.perf_counter() - t0}
    return RGResult(out, logZ, diag)


def omega(C, W: GrassmannPolynomial, lattice: LatticeSpec | None = None, method: str = "direct",
          budget: int | None = None) -> RGResult:
    """``log (1/Z) int exp(W(phi, psi + zeta)) dmu_C(zeta)``."""
    return _omega_impl(C, W, False, lattice, method, budget)


def omega_tilde(C, W: GrassmannPolynomial, lattice: LatticeSpec | None = None, method: str = "direct",
                budget: int | None = None) -> RGResult:
    """Same as :func:`omega` with the source ``exp(phi J zeta)`` under the integral."""
    return _omega_impl(C, W, True, lattice, method, budget)


# ----------------------------------------------------------- substitutions


def field_shift(W: GrassmannPolynomial, C, mode: str = "CJphi", C2=None, s: float = 0.0,
                lattice: LatticeSpec | None = None) -> GrassmannPolynomial:
    """``W(phi, psi + C J phi)``, or ``W(phi, psi + C J phi + s C2 J phi)`` for mode ``"CJphi+sC2Jphi"``."""
    lat = _lattice_of(C, lattice)
    M = cj_matrix(C, lat)
    if mode == "CJphi+sC2Jphi":
        if C2 is None:
            raise RGError("the s-variant needs a second covariance")
        M = M + s * cj_matrix(C2, lat)
    elif mode != "CJphi":
        raise RGError(f"unknown shift mode {mode!r}")
    return shift_family(W, "psi", linear_images(W.table, "phi", M))


def transform_phi(W: GrassmannPolynomial, K: np.ndarray, lattice: LatticeSpec) -> GrassmannPolynomial:
    """Substitute ``phi(xi) -> int K(xi, xi') phi(xi') dxi'``."""
    M = lattice.weight * np.asarray(K)
    off = W.table.offset("phi")
    imgs = linear_images(W.table, "phi", M)
    return substitute(W, {off + i: img for i, img in enumerate(imgs)})


def amputation_symbol(fam: ScaleFamily) -> np.ndarray:
    return 1j * fam.lattice.momenta[:, 0] - fam.e


def amputate(W: GrassmannPolynomial, fam: ScaleFamily) -> GrassmannPolynomial:
    """``W(A_hat phi, psi)`` with ``A(k) = i k0 - e(k)``."""
    if "phi" not in W.table.names:
        return W
    lat = fam.lattice
    return transform_phi(W, multiplier_hat(amputation_symbol(fam), lat).values, lat)


# -------------------------------------------------------- Green's functions


@dataclass
class GreenFunctions:
    G: dict          # n -> kernel in (phi_1 .. phi_2n), antisymmetric
    amputated: dict  # n -> amputated kernel
    leg: np.ndarray  # the leg operator C J, as a coefficient matrix


def _leg_inverse(C: Propagator) -> np.ndarray:
    prof = np.asarray(C.profile)
    small = np.abs(prof) < AMP_GUARD
    if np.any(small):
        raise RGError(f"|C(k)| below {AMP_GUARD} on {int(small.sum())} modes; amputation is undefined there")
    return np.linalg.inv(cj_matrix(C))


def _apply_legs(K: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Contract every index of ``K`` with ``M``: ``K'[b..] = sum_a K[a..] M[a, b]``."""
    out = K
    for ax in range(K.ndim):
        out = np.moveaxis(np.tensordot(out, M, axes=([ax], [0])), -1, ax)
    return out


def green_functions(C: Propagator, V: GrassmannPolynomial, maxN: int = 2, method: str = "heat",
                    budget: int | None = None) -> GreenFunctions:
    """Connected Green's functions from ``Omega_tilde_C(V)(phi, 0)``.

    ``G[n]`` is normalised so that the generating functional reads
    ``sum_n 1/(2n)! int G[n] phi...phi``; for ``V = 0`` this makes ``G[1] = J C J``,
    whose momentum profile is ``C(k)``.  Amputation undoes the leg operator
    ``C J`` on every argument, after removing the free part from ``G[1]``.
    """
    lat = C.lattice
    if not V.is_even(1e-14):
        raise RGError("V must be even")
    if "phi" in V.table.names and np.any(V.masks & V.table.family_mask("phi")):
        raise RGError("V must not depend on phi")
    res = omega_tilde(C, V, method=method, budget=budget)
    G_phi = res.output.set_zero("psi")
    raw = polynomial_to_kernels(G_phi, ["phi"], lat.weight, degrees=[(2 * n,) for n in range(1, maxN + 1)])
    G, amp = {}, {}
    Minv = _leg_inverse(C)
    for n in range(1, maxN + 1):
        K = raw.get((2 * n,), np.zeros((lat.size,) * (2 * n), np.complex128)) * factorial(2 * n)
        G[n] = K
        base = K - jcj(C) if n == 1 else K
        amp[n] = _apply_legs(base, Minv.T)
    return GreenFunctions(G, amp, cj_matrix(C))


# ----------------------------------------------------------- Wick pairing


def wickdot_pairing_integral(f: GrassmannPolynomial, p: int, C, lattice: LatticeSpec | None = None) -> GrassmannPolynomial:
    """``int :f:_zeta :(phi J zeta)^p:_zeta dmu_C(zeta)`` with both Wick dots taken w.r.t. ``C``."""
    lat = _lattice_of(C, lattice)
    Cm = _covariance(C)
    table = f.table
    src = source_term(table, lat, "phi", "zeta")
    power = GrassmannPolynomial.one(table)
    for _ in range(p):
        power = power * src
    g = wick_order(f, "zeta", Cm) * wick_order(power, "zeta", Cm)
    return gaussian_integral(g, "zeta", Cm).chop(0.0)


# ------------------------------------------------------- counterterm flow


def _counterterm_map(fam: ScaleFamily, ct: Counterterm, V: GrassmannPolynomial, method: str):
    ok, why = counterterm_validate(ct, fam)
    if not ok:
        raise RGError(f"counterterm rejected: {why}")
    C0 = first_scale_covariance(fam, ct)
    return omega_tilde(C0, V, method=method).output - free_part(C0, V.table)


def rg_counterterm_derivative(fam: ScaleFamily, ct: Counterterm, ctp: Counterterm, V: GrassmannPolynomial,
                              h: float = 1e-3, method: str = "heat", report: bool = False):
    """Derivative in ``s`` at ``s = 0`` of ``Omega_tilde_{C0(de + s de')}(V) - 1/2 phi J C0 J phi``.

    Central differences at ``h`` and ``h/2`` are combined by Richardson extrapolation.
    With ``report=True`` also returns the two raw differences and the step-halving
    ratio of their residuals against the extrapolated value.
    """
    if not np.any(np.asarray(ctp.deltaE)):
        out = GrassmannPolynomial.zero(V.table)
        return (out, {"ratio": float("nan"), "d_h": out, "d_h2": out}) if report else out

    def central(step):
        plus = _counterterm_map(fam, ct + ctp.scaled(step), V, method)
        minus = _counterterm_map(fam, ct + ctp.scaled(-step), V, method)
        return (plus - minus) / (2 * step)

    d1 = central(h)
    d2 = central(h / 2)
    rich = (d2 * 4 - d1) / 3
    if not report:
        return rich
    r1 = d1.max_abs_diff(rich)
    r2 = d2.max_abs_diff(rich)
    ratio = r1 / r2 if r2 > 0 else float("inf")
    return rich, {"ratio": ratio, "d_h": d1, "d_h2": d2, "residual_h": r1, "residual_h2": r2}


# ------------------------------------------------ Gaussian shift identities


def _check_size(*polys, budget=10):
    for f in polys:
        f.table.check_budget(budget)


def shift_identity_sides(f: GrassmannPolynomial, C, w: float = 1.0):
    """Both sides of ``int f(psi) e^{psi.phi} dmu_C = e^{-phi C phi / 2} int f(psi + C phi) dmu_C``.

    ``psi.phi = w sum psi_i phi_i``; ``(C phi)_i = w sum_j C_ij phi_j``; ``phi C phi`` carries ``w^2``.
    """
    C = np.asarray(C, dtype=np.complex128)
    t = f.table
    n = t.family_size("psi")
    lhs_int = f * gp_exp(GrassmannPolynomial.bilinear(t, "psi", "phi", w * np.eye(n)))
    lhs = gaussian_integral(lhs_int, "psi", C)
    shifted = shift_family(f, "psi", linear_images(t, "phi", w * C))
    gauss = gp_exp(GrassmannPolynomial.bilinear(t, "phi", "phi", -0.5 * w * w * C))
    rhs = gauss * gaussian_integral(shifted, "psi", C)
    return lhs, rhs


def modified_covariance(C, U, w: float = 1.0, check: bool = True) -> np.ndarray:
    """``C' = (1 - C U)^{-1} C`` as an operator identity, i.e. ``(I - w^2 C U)^{-1} C`` on values."""
    C = np.asarray(C, dtype=np.complex128)
    U = np.asarray(U, dtype=np.complex128)
    A = w * w * (C @ U)
    if check:
        nrm = np.linalg.norm(A, 2)
        if nrm >= 1:
            raise RGError(f"integral operator C U has norm {nrm:.3g} >= 1")
    return np.linalg.solve(np.eye(len(C)) - A, C)


def quadratic_weight_sides(f: GrassmannPolynomial, C, U, w: float = 1.0):
    """``(1/Z) int f e^{U/2} dmu_C`` and ``int f dmu_{C'}`` as constants, ``U = w^2 sum psi U psi``."""
    C = np.asarray(C, dtype=np.complex128)
    Uq = GrassmannPolynomial.bilinear(f.table, "psi", "psi", w * w * np.asarray(U))
    eU = gp_exp(0.5 * Uq)
    Z = gaussian_integral(eU, "psi", C).constant_term
    lhs = gaussian_integral(f * eU, "psi", C) / Z
    Cp = modified_covariance(C, U, w)
    rhs = gaussian_integral(f, "psi", Cp)
    return lhs, rhs


def quadratic_shift_sides(W: GrassmannPolynomial, C, U, w: float = 1.0):
    """Both sides of the combined shift and reweighting identity.

    ``(1/Z) int e^{W(psi + phi)} dmu_C(psi)`` against
    ``e^{phi U [1 + C'U] phi / 2} int e^{(W - U/2)(psi + [1 + C'U] phi)} dmu_{C'}(psi)``
    where ``Z = int e^{U/2} dmu_C``.
    """
    C = np.asarray(C, dtype=np.complex128)
    U = np.asarray(U, dtype=np.complex128)
    t = W.table
    n = t.family_size("psi")
    Uq = GrassmannPolynomial.bilinear(t, "psi", "psi", w * w * U)
    Z = gaussian_integral(gp_exp(0.5 * Uq), "psi", C).constant_term
    lhs = gaussian_integral(gp_exp(shift_family(W, "psi", linear_images(t, "phi", np.eye(n)))), "psi", C) / Z
    Cp = modified_covariance(C, U, w)
    T = np.eye(n) + w * w * (Cp @ U)
    pref = gp_exp(GrassmannPolynomial.bilinear(t, "phi", "phi", 0.5 * w * w * (U @ T)))
    inner = shift_family(W - 0.5 * Uq, "psi", linear_images(t, "phi", T))
    rhs = pref * gaussian_integral(gp_exp(inner), "psi", Cp)
    return lhs, rhs


def modified_profile(profile, U_profile) -> np.ndarray:
    """Momentum form ``C(k) / (1 - C(k) U(k))`` of the modified covariance."""
    c = np.asarray(profile, dtype=np.complex128)
    return c / (1 - c * np.asarray(U_profile, dtype=np.complex128))


def modified_propagator(C: Propagator, U_profile) -> Propagator:
    return covariance_from_profile(modified_profile(C.profile, U_profile), C.lattice, f"{C.tag}'")


def two_point_leg_profile(K: np.ndarray, lattice: LatticeSpec) -> np.ndarray:
    """Momentum profile of a two-argument kernel (read off as in the covariance convention)."""
    from .fourier import two_point_profile
    return two_point_profile(Kernel(K, 0, lattice))


__all__ = [
    "RGResult", "RGError", "omega", "omega_tilde", "field_shift", "amputate", "green_functions",
    "wickdot_pairing_integral", "rg_counterterm_derivative", "shift_identity_sides",
    "quadratic_weight_sides", "quadratic_shift_sides", "modified_covariance", "modified_profile",
    "modified_propagator", "free_part", "cj_matrix", "jcj", "transform_phi", "amputation_symbol",
    "GreenFunctions", "two_point_leg_profile",
]
