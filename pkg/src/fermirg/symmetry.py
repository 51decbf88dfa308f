"""Translation, particle number, spin, k0-reversal and bar/unbar symmetries.

Kernels are checked directly on their coefficient arrays; a Grassmann
polynomial is symmetric when each of its kernels ``W_{m,n}`` is.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .fourier import FourierError, compose, multiplier_hat, two_point_profile
from .grassmann import GrassmannPolynomial, permute_generators, substitute
from .lattice import (Kernel, LatticeSpec, apply_field_map, bilinear_form, build_J, polynomial_kernels,
                      translate_kernel, unit_translations)

TAGS = ("T", "N", "S", "R", "B")
SYM_TOL = 1e-10


class SymmetryError(ValueError):
    pass


def _parse_tags(tags) -> tuple[str, ...]:
    if isinstance(tags, str):
        tags = tuple(tags)
    out = []
    for t in tags:
        if t not in TAGS:
            raise SymmetryError(f"unknown symmetry tag {t!r}")
        if t not in out:
            out.append(t)
    return tuple(sorted(out, key=TAGS.index))


def _su2_samples() -> list[np.ndarray]:
    """A fixed set of SU(2) matrices whose generated group is dense (one per Pauli axis plus a mixed one)."""
    pauli = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.array([[1, 0], [0, -1]])]
    out = []
    for k, s in enumerate(pauli):
        th = 0.7 + 0.3 * k
        out.append(np.cos(th) * np.eye(2) + 1j * np.sin(th) * s)
    n = np.array([0.48, -0.6, 0.64])
    th = 1.1
    out.append(np.cos(th) * np.eye(2) + 1j * np.sin(th) * sum(c * s for c, s in zip(n, pauli)))
    return out


def check_su2(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.complex128)
    if A.shape != (2, 2) or not np.allclose(A.conj().T @ A, np.eye(2), atol=1e-12) \
            or abs(np.linalg.det(A) - 1) > 1e-12:
        raise SymmetryError("spin transformation must be a special unitary 2x2 matrix")
    return A


# ---------------------------------------------------------------- kernel predicates


def _deviation(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).max()) if np.size(a) else 0.0


def _a_count(lat: LatticeSpec, nargs: int) -> np.ndarray:
    a = lat.fields["a"]
    count = np.zeros((1,) * nargs, dtype=int)
    for ax in range(nargs):
        sh = [1] * nargs
        sh[ax] = -1
        count = count + a.reshape(sh)
    return count


def _spin_rotate(values: np.ndarray, lat: LatticeSpec, A: np.ndarray) -> np.ndarray:
    """``f^A``: every argument's spin contracted with ``A`` (particle bit 0) or ``conj(A)`` (bit 1)."""
    out = np.asarray(values, dtype=np.complex128)
    nargs = out.ndim
    for ax in range(nargs):
        shp = out.shape
        v = out.reshape(shp[:ax] + (lat.nsites, lat.nspin, 2) + shp[ax + 1:])
        # axes ax: site, ax+1: spin, ax+2: a
        v0 = np.take(v, 0, axis=ax + 2)
        v1 = np.take(v, 1, axis=ax + 2)
        r0 = np.moveaxis(np.tensordot(v0, A, axes=([ax + 1], [0])), -1, ax + 1)
        r1 = np.moveaxis(np.tensordot(v1, A.conj(), axes=([ax + 1], [0])), -1, ax + 1)
        v = np.stack([r0, r1], axis=ax + 2)
        out = v.reshape(shp)
    return out


def kernel_violation(f: Kernel, tag: str) -> float:
    """Largest deviation from the identity defining ``tag`` (0 when it holds exactly)."""
    if f.space != "position":
        raise SymmetryError("symmetry predicates act on position kernels")
    lat = f.space_ref
    vals = np.asarray(f.values, dtype=np.complex128)
    nargs = vals.ndim
    if tag == "T":
        return max((_deviation(translate_kernel(f, t).values, vals) for t in unit_translations(lat)), default=0.0)
    if tag == "N":
        if nargs % 2:
            return float(np.abs(vals).max()) if vals.size else 0.0
        bad = 2 * _a_count(lat, nargs) != nargs
        return float(np.abs(np.where(bad, vals, 0)).max()) if vals.size else 0.0
    if tag == "S":
        if lat.nspin != 2:
            raise SymmetryError("spin symmetry needs a lattice with spin")
        return max(_deviation(_spin_rotate(vals, lat, A), vals) for A in _su2_samples())
    if tag == "R":
        t_target, t_sign = lat.reflect("time")
        m_target, m_sign = lat.reflect("minus")
        lhs = apply_field_map(vals, t_target, t_sign)
        rhs = np.conj(apply_field_map(vals, m_target, m_sign))
        return _deviation(lhs, rhs)
    if tag == "B":
        site, sign = lat.site_of(-lat.site_coords)
        flip_t, flip_s = lat.field_map(np.arange(lat.nsites), np.ones(lat.nsites), flip_a=True)
        m_target, m_sign = lat.field_map(site, sign)
        lhs = apply_field_map(vals, flip_t, flip_s)
        rhs = (1j ** nargs) * apply_field_map(vals, m_target, m_sign)
        return _deviation(lhs, rhs)
    raise SymmetryError(f"unknown symmetry tag {tag!r}")


@dataclass
class SymmetryReport:
    ok: bool
    violation: float
    per_tag: dict


def check_symmetry(obj, tags, tol: float = SYM_TOL, lattice: LatticeSpec | None = None,
                   families: Sequence[str] = ("phi", "psi")) -> SymmetryReport:
    """Test each tagged identity on a kernel, a raw array (with ``lattice``) or a Grassmann polynomial.

    For a polynomial every coefficient kernel is tested, with the families
    given in table order. The tolerance is relative to the largest coefficient.
    """
    tags = _parse_tags(tags)
    if isinstance(obj, GrassmannPolynomial):
        if lattice is None:
            raise SymmetryError("a lattice is needed to read kernels off a polynomial")
        fams = [f for f in families if f in obj.table.names]
        kernels = list(polynomial_kernels(obj.without_constant(), lattice, fams).values())
    elif isinstance(obj, Kernel):
        kernels = [obj]
    else:
        if lattice is None:
            raise SymmetryError("a lattice is needed for a raw array")
        kernels = [Kernel(np.asarray(obj), 0, lattice)]
    per_tag = {}
    for tag in tags:
        worst = 0.0
        for K in kernels:
            worst = max(worst, kernel_violation(K, tag))
        per_tag[tag] = worst
    scale = max([1.0] + [float(np.abs(K.values).max()) for K in kernels if np.size(K.values)])
    violation = max(per_tag.values(), default=0.0)
    return SymmetryReport(violation <= tol * scale, violation, per_tag)


# ---------------------------------------------------------------- field transformations


def _family_perm(W: GrassmannPolynomial, lat: LatticeSpec, families, target: np.ndarray, factors: np.ndarray):
    nbits = W.table.size
    perm = np.arange(nbits)
    fac = np.ones(nbits, np.complex128)
    for fam in families:
        if fam not in W.table.names:
            continue
        if W.table.family_size(fam) != lat.size:
            raise SymmetryError(f"family {fam!r} does not match the lattice")
        off = W.table.offset(fam)
        perm[off:off + lat.size] = off + target
        fac[off:off + lat.size] = factors
    return perm, fac


def apply_field_transform(W: GrassmannPolynomial, lattice: LatticeSpec, transform: str, *, theta: float = 0.0,
                          A=None, t=None, families: Sequence[str] = ("phi", "psi")) -> GrassmannPolynomial:
    """Substitute every field of ``families`` according to ``transform``.

    * ``"phase"``: ``psi(x, a) -> exp(i (-1)^a theta) psi(x, a)``
    * ``"spin"``: ``psi(., s, a) -> sum_t A^(a)[s, t] psi(., t, a)`` with ``A^(1) = conj(A)``
    * ``"bar-swap"``: ``psi(x, a) -> i psi(-x, 1 - a)``
    * ``"time-reflection"``: ``psi(xi) -> psi(R0 xi)``
    * ``"reflection"``: ``psi(xi) -> psi(-xi)``
    * ``"translation"``: ``psi(xi) -> psi(xi + t)``
    """
    lat = lattice
    fld = lat.fields
    if transform == "phase":
        fac = np.exp(1j * np.where(fld["a"] == 0, 1.0, -1.0) * theta)
        perm, f = _family_perm(W, lat, families, np.arange(lat.size), fac)
        return permute_generators(W, perm, f)
    if transform == "spin":
        if lat.nspin != 2:
            raise SymmetryError("spin transformation needs a lattice with spin")
        A = check_su2(A)
        images = {}
        for fam in families:
            if fam not in W.table.names:
                continue
            off = W.table.offset(fam)
            for i in range(lat.size):
                s, a = int(fld["spin"][i]), int(fld["a"][i])
                Aa = A if a == 0 else A.conj()
                img = GrassmannPolynomial.zero(W.table)
                for tau in range(2):
                    j = lat.index(int(fld["site"][i]), tau, a)
                    if Aa[s, tau] != 0:
                        img = img + GrassmannPolynomial.generator(W.table, fam, j, Aa[s, tau])
                images[off + i] = img
        return substitute(W, images)
    if transform == "bar-swap":
        site, sign = lat.site_of(-lat.site_coords)
        target, fac = lat.field_map(site, sign, flip_a=True)
        perm, f = _family_perm(W, lat, families, target, 1j * fac)
        return permute_generators(W, perm, f)
    if transform in ("time-reflection", "reflection"):
        target, fac = lat.reflect("time" if transform == "time-reflection" else "minus")
        perm, f = _family_perm(W, lat, families, target, fac)
        return permute_generators(W, perm, f)
    if transform == "translation":
        target, fac = lat.shift(t)
        perm, f = _family_perm(W, lat, families, target, fac)
        return permute_generators(W, perm, f)
    raise SymmetryError(f"unknown transform {transform!r}")


def invariance_violation(W: GrassmannPolynomial, lattice: LatticeSpec, tag: str,
                         families: Sequence[str] = ("phi", "psi")) -> float:
    """Deviation of ``W`` from invariance under the field transformations characterising ``tag``."""
    lat = lattice
    if tag == "T":
        return max(W.max_abs_diff(apply_field_transform(W, lat, "translation", t=t, families=families))
                   for t in unit_translations(lat))
    if tag == "N":
        return max(W.max_abs_diff(apply_field_transform(W, lat, "phase", theta=th, families=families))
                   for th in (0.3, 1.7))
    if tag == "S":
        return max(W.max_abs_diff(apply_field_transform(W, lat, "spin", A=A, families=families))
                   for A in _su2_samples())
    if tag == "B":
        return W.max_abs_diff(apply_field_transform(W, lat, "bar-swap", families=families))
    if tag == "R":
        lhs = apply_field_transform(W, lat, "time-reflection", families=families)
        rhs = apply_field_transform(W.conj(), lat, "reflection", families=families)
        return lhs.max_abs_diff(rhs)
    raise SymmetryError(f"unknown symmetry tag {tag!r}")


# ---------------------------------------------------------------- two point functions


def _check_two_point(f: Kernel, tags="NST", tol: float = SYM_TOL) -> None:
    if np.ndim(f.values) != 2:
        raise SymmetryError("expected a two point kernel")
    vals = np.asarray(f.values)
    scale = max(1.0, float(np.abs(vals).max()))
    if np.abs(vals + vals.T).max() > tol * scale:
        raise SymmetryError("two point kernel is not antisymmetric")
    tags = tags if f.space_ref.nspin == 2 else tags.replace("S", "")
    rep = check_symmetry(f, tags, tol)
    if not rep.ok:
        raise SymmetryError(f"two point kernel fails {rep.per_tag}")


def two_point_normal_form(f: Kernel, tol: float = SYM_TOL) -> np.ndarray:
    """``f_check(k)`` for an antisymmetric NST two point kernel; then ``f = J (f_check)^``."""
    _check_two_point(f, "NST", tol)
    return two_point_profile(Kernel(f.values, 0, f.space_ref))


def reconstruct_two_point(profile, lattice: LatticeSpec) -> np.ndarray:
    """``J (profile)^`` as a kernel array."""
    return compose(build_J(lattice), multiplier_hat(profile, lattice), lattice)


def two_point_identity_sides(W: Kernel, tol: float = SYM_TOL) -> tuple[GrassmannPolynomial, GrassmannPolynomial]:
    """``int psi (J W_check^) phi`` and ``int phi W psi`` as polynomials in ``phi, psi``."""
    from .lattice import field_table
    lat = W.space_ref
    _check_two_point(W, "BNST" if lat.nspin == 2 else "BNT", tol)
    table = field_table(lat, "phi", "psi")
    prof = two_point_profile(Kernel(W.values, 0, lat))
    K = reconstruct_two_point(prof, lat)
    lhs = bilinear_form(table, "psi", "phi", K, lat)
    rhs = bilinear_form(table, "phi", "psi", np.asarray(W.values), lat)
    return lhs, rhs


def lemma_b6_check(W: Kernel, tol: float = SYM_TOL) -> tuple[bool, float]:
    lhs, rhs = two_point_identity_sides(W, tol)
    err = lhs.max_abs_diff(rhs)
    scale = max(1.0, float(np.abs(rhs.coeffs).max()) if len(rhs) else 0.0)
    return err <= tol * scale, err


def random_bnst_two_point(lattice: LatticeSpec, rng: np.random.Generator, real_reversal: bool = False) -> Kernel:
    """Antisymmetric NST two point kernel from a random profile (B follows automatically).

    With ``real_reversal`` the profile obeys ``chi(-k0, k) = conj chi(k0, k)`` and the kernel is R symmetric.
    """
    chi = rng.normal(size=lattice.nsites) + 1j * rng.normal(size=lattice.nsites)
    if real_reversal:
        neg = lattice.mode_of_neg_k0()
        chi = 0.5 * (chi + np.conj(chi[neg]))
    return Kernel(reconstruct_two_point(chi, lattice), 0, lattice)
