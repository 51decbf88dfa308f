"""Smooth partitions of momentum space around the Fermi surface and the propagators built from them.

The bump ``phi`` is one on ``[-1, 1]`` and vanishes outside ``(-2, 2)``;
``nu(x) = phi(x/M) - phi(M x)`` cuts out one dyadic shell in ``x = k0^2 + e(k)^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .decay import DecaySeries
from .fourier import Propagator, covariance_from_profile, multiplier_hat
from .lattice import Kernel, LatticeSpec

DENOM_GUARD = 1e-8
NUMER_TOL = 1e-12


class ScaleError(ValueError):
    pass


class SingularPropagatorError(ScaleError):
    pass


def _h(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def bump_phi(x):
    """Smooth bump: 1 on ``[-1, 1]``, 0 outside ``(-2, 2)``, monotone in between."""
    x = np.abs(np.asarray(x, dtype=float))
    a = _h(2.0 - x)
    b = _h(x - 1.0)
    out = a / (a + b)
    return out if out.ndim else float(out)


def nu(x, M: float):
    """Shell function ``phi(x/M) - phi(M x)`` for ``x > 0`` and zero otherwise."""
    if M <= 1:
        raise ScaleError("scale parameter M must exceed 1")
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0, bump_phi(x / M) - bump_phi(M * x), 0.0)
    return out if out.ndim else float(out)


def nu_tilde(x, M: float):
    """Envelope ``phi(x/M^2) - phi(M^2 x)`` of a shell and its two neighbours."""
    if M <= 1:
        raise ScaleError("scale parameter M must exceed 1")
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0, bump_phi(x / M ** 2) - bump_phi(M ** 2 * x), 0.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------- dispersion


@dataclass(frozen=True)
class Dispersion:
    """``e(k)`` per spatial mode: ``"quadratic"`` ``|k|^2/(2 mass) - mu_F`` or ``"tabulated"`` values."""

    kind: str = "quadratic"
    mass: float = 1.0
    mu_F: float = 0.5
    table: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("quadratic", "tabulated"):
            raise ScaleError(f"unknown dispersion {self.kind!r}")
        if self.kind == "quadratic" and self.mass <= 0:
            raise ScaleError("mass must be positive")
        if self.kind == "tabulated" and self.table is None:
            raise ScaleError("tabulated dispersion needs values")

    def on_modes(self, lattice: LatticeSpec) -> np.ndarray:
        """``e`` at every momentum mode (independent of ``k0``)."""
        k = lattice.momenta[:, 1:]
        if self.kind == "quadratic":
            return np.sum(k ** 2, axis=1) / (2 * self.mass) - self.mu_F
        vals = np.asarray(self.table, dtype=float)
        nsp = lattice.Lsp ** lattice.d
        if vals.shape != (nsp,):
            raise ScaleError(f"tabulated dispersion needs {nsp} values")
        return vals[np.arange(lattice.nsites) % nsp]


def spatial_mode(lattice: LatticeSpec) -> np.ndarray:
    """Spatial mode number of every momentum mode (``k0`` is the slowest axis)."""
    return np.arange(lattice.nsites) % (lattice.Lsp ** lattice.d)


@dataclass
class ScaleFamily:
    """Scale parameter, first scale index, dispersion and ultraviolet cutoff on a lattice.

    The default cutoff ``U = phi(e^2)`` dominates ``nu^(>=1) = phi(M (k0^2 + e^2))``
    because ``phi`` is nonincreasing in ``|x|``.
    """

    M: float = 4.0
    j0: int = 2
    lattice: LatticeSpec = field(default_factory=LatticeSpec)
    dispersion: Dispersion = field(default_factory=Dispersion)
    cutoff: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.M <= 1:
            raise ScaleError("scale parameter M must exceed 1")
        if self.j0 < 1:
            raise ScaleError("j0 must be at least 1")

    @property
    def e(self) -> np.ndarray:
        return self.dispersion.on_modes(self.lattice)

    @property
    def x(self) -> np.ndarray:
        """``k0^2 + e(k)^2`` on every mode."""
        return self.lattice.momenta[:, 0] ** 2 + self.e ** 2

    @property
    def U(self) -> np.ndarray:
        e = self.e
        return bump_phi(e ** 2) if self.cutoff is None else np.asarray(self.cutoff(e), dtype=float)

    def cutoff_dominates(self, tol: float = 1e-15) -> bool:
        return bool(np.all(scale_functions(self, 1, "geq") <= self.U + tol))


def _scale_of(x, M: float, j: float, kind: str):
    if kind == "shell":
        return nu(M ** (2 * j) * x, M)
    if kind == "geq":
        return bump_phi(M ** (2 * j - 1) * x)
    if kind == "extended":
        return nu_tilde(M ** (2 * j) * x, M)
    if kind == "extended_geq":
        return bump_phi(M ** (2 * j - 2) * x)
    if kind == "bar_geq":
        return bump_phi(M ** (2 * j - 3) * x)
    raise ScaleError(f"unknown scale function kind {kind!r}")


SCALE_KINDS = ("shell", "geq", "extended", "extended_geq", "bar_geq")


def scale_functions(fam: ScaleFamily, j: float, kind: str = "shell", x=None) -> np.ndarray:
    """``nu^(j)``, ``nu^(>=j)``, the extended versions or ``nu-bar^(>=j)`` on the momentum grid.

    ``x`` overrides the grid values of ``k0^2 + e^2``.
    """
    if j < 1:
        raise ScaleError("scale index must be at least 1")
    if kind in ("shell", "extended") and float(j) != int(j):
        raise ScaleError("shell functions need an integer scale")
    x = fam.x if x is None else np.asarray(x, dtype=float)
    return np.asarray(_scale_of(x, fam.M, j, kind), dtype=float)


def abs_symbol(fam: ScaleFamily) -> np.ndarray:
    """``|i k0 - e(k)|`` on the grid."""
    return np.sqrt(fam.x)


# ---------------------------------------------------------------- counterterms and covariances


@dataclass(frozen=True)
class Counterterm:
    """Real counterterm ``delta e`` per spatial mode and the bound ``mu`` it must respect."""

    deltaE: np.ndarray
    mu: float = 1.0

    @classmethod
    def zero(cls, lattice: LatticeSpec, mu: float = 1.0) -> "Counterterm":
        return cls(np.zeros(lattice.Lsp ** lattice.d), mu)

    def on_modes(self, lattice: LatticeSpec) -> np.ndarray:
        de = np.asarray(self.deltaE, dtype=float)
        if de.shape != (lattice.Lsp ** lattice.d,):
            raise ScaleError("counterterm needs one value per spatial mode")
        return de[spatial_mode(lattice)]

    def __add__(self, other: "Counterterm") -> "Counterterm":
        return Counterterm(np.asarray(self.deltaE) + np.asarray(other.deltaE), self.mu)

    def scaled(self, c: float) -> "Counterterm":
        return Counterterm(np.asarray(self.deltaE) * c, self.mu)


def counterterm_kernel(ct: Counterterm, lattice: LatticeSpec) -> Kernel:
    """Position kernel of ``delta e`` as a multiplier (constant in ``k0``)."""
    return multiplier_hat(ct.on_modes(lattice), lattice)


def counterterm_norm(ct: Counterterm, lattice: LatticeSpec, r0: int = 2, r: int = 2) -> DecaySeries:
    """``||delta e_hat||_{1,inf}``; only the constant coefficient is finite (the others are unconstrained)."""
    from .decay import INF
    from .norms import mixed_norm
    K = counterterm_kernel(ct, lattice)
    val = mixed_norm(K.values, 0, lattice.weight)
    coeffs = {delta: (val if sum(delta) == 0 else INF) for delta in DecaySeries.zero(lattice.d, r0, r).indices}
    return DecaySeries.from_mapping(coeffs, lattice.d, r0, r)


def counterterm_validate(ct: Counterterm, fam: ScaleFamily, params=None) -> tuple[bool, str]:
    """Support inside ``{U != 0}`` and constant coefficient of ``||delta e_hat||`` strictly below ``mu``."""
    lat = fam.lattice
    try:
        de = ct.on_modes(lat)
    except ScaleError as exc:
        return False, str(exc)
    if not np.all(np.isfinite(de)):
        return False, "counterterm is not finite"
    mu = ct.mu if params is None else params.mu
    bad = (np.abs(de) > 0) & (fam.U == 0)
    if np.any(bad):
        return False, f"support leaves {{U != 0}} at {int(bad.sum())} modes"
    val = counterterm_norm(ct, lat).const
    if not val < mu:
        return False, f"norm {val:.6g} is not below mu = {mu:.6g}"
    return True, "ok"


def _guarded_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    need = np.abs(num) > NUMER_TOL
    if np.any(need & (np.abs(den) < DENOM_GUARD)):
        raise SingularPropagatorError("propagator denominator vanishes on the support of the numerator")
    out = np.zeros_like(den, dtype=np.complex128)
    out[need] = num[need] / den[need]
    return out


def first_scale_profile(fam: ScaleFamily, ct: Counterterm | None = None) -> np.ndarray:
    """``(U - nu^(>j0)) / (i k0 - e + delta e)`` on the grid."""
    lat = fam.lattice
    de = 0.0 if ct is None else ct.on_modes(lat)
    num = fam.U - scale_functions(fam, fam.j0 + 1, "geq")
    den = 1j * lat.momenta[:, 0] - fam.e + de
    return _guarded_ratio(num, den)


def first_scale_covariance(fam: ScaleFamily, ct: Counterterm | None = None) -> Propagator:
    return covariance_from_profile(first_scale_profile(fam, ct), fam.lattice, "first-scale")


def scale_profile(fam: ScaleFamily, j: int) -> np.ndarray:
    """``nu^(j) / (i k0 - e)`` on the grid."""
    lat = fam.lattice
    return _guarded_ratio(scale_functions(fam, j, "shell"), 1j * lat.momenta[:, 0] - fam.e)


def scale_covariance(fam: ScaleFamily, j: int) -> Propagator:
    return covariance_from_profile(scale_profile(fam, j), fam.lattice, f"scale-{j}")


# ---------------------------------------------------------------- power counting


def separable_position(profile: np.ndarray, lattice: LatticeSpec) -> np.ndarray:
    """``(1/V) sum_k exp(i <k, x>_-) C(k)`` on all sites, one axis at a time.

    Same values as :func:`fermirg.fourier.profile_position`, without a dense
    sites-by-modes matrix, so it scales to large grids.
    """
    arr = np.asarray(profile, dtype=np.complex128).reshape(lattice.shape)
    k = lattice.momenta.reshape(lattice.shape + (lattice.d + 1,))
    for ax in range(lattice.d + 1):
        L = lattice.shape[ax]
        sl = [0] * (lattice.d + 1)
        sl[ax] = slice(None)
        kk = k[tuple(sl)][:, ax]
        xx = np.arange(L) * lattice.spacing[ax]
        sign = -1.0 if ax == 0 else 1.0
        E = np.exp(1j * sign * np.outer(xx, kk))
        arr = np.moveaxis(np.tensordot(E, arr, axes=([1], [ax])), 0, ax)
    return (arr / lattice.volume).reshape(-1)


def scale_l1_norm(fam: ScaleFamily, j: int) -> float:
    """``|||C^(j)|||_{1,inf}``: for a translation invariant covariance the weighted sum of ``|C(x)|``."""
    lat = fam.lattice
    c = separable_position(scale_profile(fam, j), lat)
    return float(np.abs(c).sum() * lat.weight)


def power_counting_table(fam: ScaleFamily, scales) -> tuple[list[tuple[int, float]], float]:
    """``(j, |||C^(j)|||_{1,inf})`` rows and the fitted slope of ``log_M`` of the norm against ``j``."""
    rows = [(int(j), scale_l1_norm(fam, int(j))) for j in scales]
    js = np.array([r[0] for r in rows], dtype=float)
    vals = np.array([r[1] for r in rows])
    good = vals > 0
    slope = float("nan")
    if good.sum() >= 2:
        slope = float(np.polyfit(js[good], np.log(vals[good]) / np.log(fam.M), 1)[0])
    return rows, slope
