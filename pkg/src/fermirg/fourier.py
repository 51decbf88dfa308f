"""Fourier conventions on the lattice.

Characters ``E_+-(k, x) = delta delta exp(+-i (-1)^a <k, x>_-)`` with
``<k, x>_- = -k0 x0 + k.x``. A momentum integral ``int d^{d+1}k/(2pi)^{d+1}``
becomes ``(1/V) sum_modes`` and the momentum conservation delta
``(2pi)^{d+1} delta(...)`` becomes ``V`` times a Kronecker delta, so every
transform identity holds exactly rather than approximately.

Momentum profiles are arrays with one value per mode, in the order of
``LatticeSpec.momenta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decay import DecaySeries, factorial_multi, multi_indices
from .lattice import (Kernel, LatticeSpec, apply_field_map, j_sign, minkowski, momentum_labels,
                      signed_momenta)

FT_TOL = 1e-10


class FourierError(ValueError):
    pass


# ------------------------------------------------------------- characters


def inner_product(lattice: LatticeSpec, kidx: int, xidx: int) -> float:
    """``<xi_check, xi>``: zero unless spin and particle/hole bit agree, else ``(-1)^a <k, x>_-``."""
    mom = momentum_labels(lattice)
    fld = lattice.fields
    if mom["spin"][kidx] != fld["spin"][xidx] or mom["a"][kidx] != fld["a"][xidx]:
        return 0.0
    x = fld["coords"][xidx] * lattice.spacing
    sign = 1.0 if fld["a"][xidx] == 0 else -1.0
    return float(sign * minkowski(mom["k"][kidx], x))


def character_matrix(lattice: LatticeSpec, sign: int = 1) -> np.ndarray:
    """``E[xi_check, xi] = delta delta exp(sign * i (-1)^a <k, x>_-)`` as a dense matrix."""
    mom = momentum_labels(lattice)
    fld = lattice.fields
    x = fld["coords"] * lattice.spacing
    phase = minkowski(mom["k"][:, None, :], x[None, :, :])
    pm = np.where(fld["a"] == 0, 1.0, -1.0)[None, :]
    same = (mom["spin"][:, None] == fld["spin"][None, :]) & (mom["a"][:, None] == fld["a"][None, :])
    return np.where(same, np.exp(sign * 1j * pm * phase), 0.0)


def conservation_mask(lattice: LatticeSpec, nargs: int) -> np.ndarray:
    """Boolean array over momentum index tuples: ``sum (-1)^a k_i`` vanishes on the dual torus."""
    sk = signed_momenta(lattice)
    period = 2 * np.pi / lattice.spacing
    total = np.zeros((lattice.size,) * nargs + (lattice.d + 1,))
    for ax in range(nargs):
        shape = [1] * nargs + [lattice.d + 1]
        shape[ax] = -1
        total = total + sk.reshape(shape)
    r = np.mod(total / period + 0.5, 1.0) - 0.5
    return np.all(np.abs(r) < 1e-9, axis=-1)


def _contract_axes(values: np.ndarray, M: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    out = np.asarray(values, dtype=np.complex128)
    for ax in axes:
        out = np.moveaxis(np.tensordot(M, out, axes=([1], [ax])), 0, ax)
    return out


# ------------------------------------------------------------- transforms


def is_translation_invariant(f: Kernel, tol: float = FT_TOL) -> float:
    """Largest deviation of ``f`` from its unit-translated copies (0 for invariant kernels)."""
    from .lattice import translate_kernel, unit_translations, partial_translation_phase
    worst = 0.0
    for t in unit_translations(f.space_ref):
        g = translate_kernel(f, t)
        if f.space == "partial":
            phase = partial_translation_phase(f, t)
            phase = phase.reshape(phase.shape + (1,) * f.n)
            diff = g.values - phase * f.values
        else:
            diff = g.values - f.values
        worst = max(worst, float(np.abs(diff).max()) if diff.size else 0.0)
    return worst


def total_ft(f: Kernel, check: bool = True, tol: float = FT_TOL) -> Kernel:
    """Total transform ``f_check`` on momentum conserving tuples (zero elsewhere)."""
    if f.space != "position":
        raise FourierError("total_ft expects a position kernel")
    lat = f.space_ref
    if check:
        scale = max(1.0, float(np.abs(f.values).max()) if f.values.size else 0.0)
        viol = is_translation_invariant(f)
        if viol > tol * scale:
            raise FourierError(f"kernel is not translation invariant (deviation {viol:.3g})")
    E = character_matrix(lat, +1) * lat.weight
    full = _contract_axes(f.values, E, range(f.values.ndim))
    mask = conservation_mask(lat, f.values.ndim)
    return Kernel(np.where(mask, full / lat.volume, 0.0), f.m, lat, "total")


def inverse_total_ft(F: Kernel) -> Kernel:
    if F.space != "total":
        raise FourierError("inverse_total_ft expects a total transform")
    lat = F.space_ref
    Einv = character_matrix(lat, -1).T / lat.volume
    vals = _contract_axes(F.values * lat.volume, Einv, range(F.values.ndim))
    return Kernel(vals, F.m, lat, "position")


def partial_ft(f: Kernel, m: int | None = None) -> Kernel:
    """Transform the first ``m`` (external) arguments with ``E_+``; position arguments stay.

    With no position arguments left the partial transform is the total one.
    """
    if f.space != "position":
        raise FourierError("partial_ft expects a position kernel")
    m = f.m if m is None else m
    lat = f.space_ref
    if m == f.values.ndim:
        return total_ft(Kernel(f.values, m, lat))
    if m == 0:
        return Kernel(f.values, 0, lat, "partial")
    E = character_matrix(lat, +1) * lat.weight
    return Kernel(_contract_axes(f.values, E, range(m)), m, lat, "partial")


def inverse_partial_ft(F: Kernel) -> Kernel:
    if F.space == "total":
        return inverse_total_ft(F)
    if F.space != "partial":
        raise FourierError("inverse_partial_ft expects a partial transform")
    lat = F.space_ref
    Einv = character_matrix(lat, -1).T / lat.volume
    return Kernel(_contract_axes(F.values, Einv, range(F.m)), F.m, lat, "position")


def two_point_profile(f: Kernel) -> np.ndarray:
    """``f_check(k)`` read off at ``((k, sigma, 1), (k, sigma, 0))`` for the first spin."""
    lat = f.space_ref
    F = total_ft(Kernel(f.values, 0, lat))
    modes = np.arange(lat.nsites)
    i1 = (modes * lat.nspin) * 2 + 1
    i0 = (modes * lat.nspin) * 2
    return F.values[i1, i0]


def multiplier_hat(chi, lattice: LatticeSpec) -> Kernel:
    """``chi_hat(xi, xi') = delta delta (1/V) sum_k exp((-1)^a i <k, x - x'>_-) chi(k)``."""
    chi = np.asarray(chi, dtype=np.complex128)
    if chi.shape != (lattice.nsites,):
        raise FourierError("profile needs one value per mode")
    lab = momentum_labels(lattice)
    Ep = character_matrix(lattice, +1)
    Em = character_matrix(lattice, -1)
    vals = Ep.T @ (chi[lab["mode"]][:, None] * Em) / lattice.volume
    return Kernel(vals, 0, lattice)


def compose(K: Kernel | np.ndarray, L: Kernel | np.ndarray, lattice: LatticeSpec | None = None) -> np.ndarray:
    """Integral operator composition ``int dxi'' K(xi, xi'') L(xi'', xi')``."""
    lat = lattice if lattice is not None else (K.space_ref if isinstance(K, Kernel) else L.space_ref)
    a = K.values if isinstance(K, Kernel) else np.asarray(K)
    b = L.values if isinstance(L, Kernel) else np.asarray(L)
    return lat.weight * (a @ b)


@dataclass(frozen=True)
class Propagator:
    """A momentum profile together with its antisymmetric position covariance."""

    profile: np.ndarray
    covariance: np.ndarray
    lattice: LatticeSpec
    tag: str = ""

    @property
    def C(self) -> np.ndarray:
        return self.covariance

    def kernel(self) -> Kernel:
        return Kernel(self.covariance, 0, self.lattice)

    def __add__(self, other: "Propagator") -> "Propagator":
        return Propagator(self.profile + other.profile, self.covariance + other.covariance, self.lattice,
                          f"{self.tag}+{other.tag}")

    def scaled(self, c: complex) -> "Propagator":
        return Propagator(self.profile * c, self.covariance * c, self.lattice, self.tag)


def covariance_from_profile(profile, lattice: LatticeSpec, tag: str = "") -> Propagator:
    """Position covariance of a momentum profile.

    ``C((x,s,0),(x',s,1)) = (1/V) sum_k exp(i <k, x - x'>_-) C(k)``, completed
    antisymmetrically, zero on equal particle/hole bits and off the spin diagonal.
    """
    prof = np.asarray(profile, dtype=np.complex128)
    if prof.shape != (lattice.nsites,):
        raise FourierError("profile needs one value per mode")
    k = lattice.momenta
    x = lattice.site_coords * lattice.spacing
    phase_x = np.exp(1j * minkowski(k[None, :, :], x[:, None, :]))  # (site, mode)
    block = (phase_x * prof[None, :]) @ phase_x.conj().T / lattice.volume  # (site, site')
    N = lattice.size
    C = np.zeros((N, N), np.complex128)
    for s in range(lattice.nspin):
        i0 = (np.arange(lattice.nsites) * lattice.nspin + s) * 2
        C[np.ix_(i0, i0 + 1)] = block
        C[np.ix_(i0 + 1, i0)] = -block.T
    return Propagator(prof, C, lattice, tag)


# ------------------------------------------------------------- L1 norm and the mean-zero bound


def l1_series(values: np.ndarray, lattice: LatticeSpec, r0: int = 2, r: int = 2) -> DecaySeries:
    """``sum_delta (1/delta!) [sum_x |x^delta f(x)| w] t^delta`` for a function on sites.

    ``x`` is the minimal-image representative of the site coordinates.
    """
    vals = np.abs(np.asarray(values))
    x = np.abs(lattice.min_image(lattice.site_coords) * lattice.spacing)
    coeffs = {}
    for delta in multi_indices(lattice.d, r0, r):
        wgt = np.prod(x ** np.array(delta), axis=1)
        coeffs[delta] = float(np.sum(wgt * vals) * lattice.weight) / factorial_multi(delta)
    return DecaySeries.from_mapping(coeffs, lattice.d, r0, r)


def profile_position(chi, lattice: LatticeSpec) -> np.ndarray:
    """``chi'(x) = (1/V) sum_k exp(i <k, x>_-) chi(k)`` on sites (antiperiodic in time)."""
    chi = np.asarray(chi, dtype=np.complex128)
    x = lattice.site_coords * lattice.spacing
    return np.exp(1j * minkowski(lattice.momenta[None, :, :], x[:, None, :])) @ chi / lattice.volume


def time_forward_difference(values: np.ndarray, lattice: LatticeSpec) -> np.ndarray:
    """``(f(x0 + dt, x) - f(x0, x)) / dt`` on sites, continuing ``f`` antiperiodically in time."""
    f = np.asarray(values).reshape(lattice.shape)
    nxt = np.roll(f, -1, axis=0)
    nxt[-1] = -nxt[-1]
    return ((nxt - f) / lattice.dt).reshape(-1)


def two_point_offsets(u: Kernel) -> np.ndarray:
    """Values ``v(y) = u((y, s, a), (0, s', a'))`` as an array ``(site, spin, a, spin', a')``."""
    lat = u.space_ref
    vals = np.asarray(u.values).reshape(lat.nsites, lat.nspin, 2, lat.nsites, lat.nspin, 2)
    return vals[:, :, :, 0, :, :]


def mean_zero_violation(u: Kernel) -> float:
    """Largest ``|sum_{y0} w v(y0, y)|`` over spatial offsets, with ``y0`` in the minimal window.

    ``u`` is antiperiodic in time, so the window matters: the sum runs over
    the representatives ``-L0/2 < y0 <= L0/2``.
    """
    lat = u.space_ref
    v = two_point_offsets(u)
    c = lat.site_coords
    t = c[:, 0]
    sign = np.where(t > lat.L0 // 2, -1.0, 1.0)  # y0 = t - L0 picks up one antiperiodic sign
    v = v * sign[:, None, None, None, None]
    v = v.reshape((lat.L0, lat.nsites // lat.L0) + v.shape[1:])
    return float(np.abs(v.sum(axis=0)).max() * lat.dt)


def project_mean_zero(u: Kernel) -> Kernel:
    """Subtract the minimal-window time average so that ``mean_zero_violation`` vanishes.

    Works on the offset function and rebuilds a translation invariant kernel.
    """
    from .lattice import symmetrize_translations
    lat = u.space_ref
    v = two_point_offsets(u).copy()
    t = lat.site_coords[:, 0]
    sign = np.where(t > lat.L0 // 2, -1.0, 1.0)
    vv = (v * sign[:, None, None, None, None]).reshape((lat.L0, -1) + v.shape[1:])
    vv = vv - vv.mean(axis=0, keepdims=True)
    v = vv.reshape(v.shape) * sign[:, None, None, None, None]
    return Kernel(kernel_from_offsets(v, lat), 0, lat)


def kernel_from_offsets(v: np.ndarray, lattice: LatticeSpec) -> np.ndarray:
    """Translation invariant two-point kernel with ``u((y,s,a),(0,s',a')) = v[y, s, a, s', a']``."""
    lat = lattice
    N = lat.size
    out = np.zeros((N, N), np.complex128)
    c = lat.site_coords
    for s2 in range(lat.nsites):
        # u(xi, xi') = sign * v(x - x') via the translation that moves x' to 0
        site, sign = lat.site_of(c - c[s2])
        for sp in range(lat.nspin):
            for a in range(2):
                for sp2 in range(lat.nspin):
                    for a2 in range(2):
                        rows = (np.arange(lat.nsites) * lat.nspin + sp) * 2 + a
                        col = (s2 * lat.nspin + sp2) * 2 + a2
                        out[rows, col] = sign * v[site, sp, a, sp2, a2]
    return out


@dataclass
class BoundReport:
    """Componentwise comparison of two decay series."""

    lhs: DecaySeries
    rhs: DecaySeries
    rows: list = field(default_factory=list)
    ok: bool = True
    extra: dict = field(default_factory=dict)


def k0_vanishing_bound_check(u: Kernel, chi, r0: int = 2, r: int = 2, tol: float = 1e-9) -> BoundReport:
    """Both sides of the bound on ``int chi_hat(xi, eta) u(eta, xi')`` for time-mean-zero ``u``.

    Only the components with ``delta0 = 0`` are compared; the others are
    unbounded on the right hand side. The time derivative of ``chi'`` is a
    forward difference, so the telescoping step of the continuum argument
    is exact on the lattice.
    """
    from .norms import apply_position_weights, norm_1inf
    from .decay import ds_mul, ds_slack
    lat = u.space_ref
    scale = max(1.0, float(np.abs(u.values).max()))
    if mean_zero_violation(u) > 1e-10 * scale:
        raise FourierError("u does not have vanishing time mean")
    chih = multiplier_hat(chi, lat)
    g = Kernel(compose(chih, u), 0, lat)
    lhs = norm_1inf(g, r0, r)
    chi_pos = profile_position(chi, lat)
    dchi = time_forward_difference(chi_pos, lat)
    du = apply_position_weights(u, [((0, 1), tuple([1] + [0] * lat.d))])
    rhs = ds_mul(l1_series(dchi, lat, r0, r), norm_1inf(du, r0, r))
    rows = []
    ok = True
    for delta, a, b, _ in ds_slack(lhs, rhs):
        if delta[0] != 0:
            continue
        good = a <= b + tol * max(1.0, b)
        ok &= good
        rows.append((delta, a, b, good))
    return BoundReport(lhs, rhs, rows, ok)
