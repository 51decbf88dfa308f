"""Finite lattice stand-in for position space and its momentum dual.

A field index ``xi = (x0, x, sigma, a)`` lives on an ``L0 x Lsp^d`` torus with
``nspin`` spin values and a particle/hole bit. Time is antiperiodic: moving a
field argument once around the time circle flips its sign. Frequencies are
therefore fermionic Matsubara values ``(2n+1) pi / (L0 dt)``.

Flat index layout (time slowest)::

    idx = (site * nspin + spin) * 2 + a,   site = t * Lsp^d + spatial index

Integrals are Riemann sums ``int dxi -> sum w`` with ``w = dt * dx^d``, so the
lattice delta function is ``1/w`` on the diagonal.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .grassmann import (GeneratorTable, GrassmannPolynomial, antisymmetrize_groups,
                        kernels_to_polynomial, polynomial_to_kernels)


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeSpec:
    d: int = 1
    L0: int = 4
    Lsp: int = 2
    dt: float = 1.0
    dx: float = 1.0
    nspin: int = 2
    max_sites: int = 4096

    def __post_init__(self):
        problems = []
        if self.d < 0:
            problems.append("d must be >= 0")
        if self.L0 < 2 or self.L0 % 2:
            problems.append("L0 must be even and >= 2")
        # Lsp = 1 is allowed so that the exact Grassmann suites fit their generator budget
        if self.Lsp < 1:
            problems.append("Lsp must be >= 1")
        if self.dt <= 0 or self.dx <= 0:
            problems.append("dt and dx must be positive")
        if self.nspin not in (1, 2):
            problems.append("nspin must be 1 or 2")
        if not problems and self.nsites > self.max_sites:
            problems.append(f"{self.nsites} sites exceed the budget of {self.max_sites}")
        if problems:
            raise LatticeError("; ".join(problems))

    # sizes and measures

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.L0,) + (self.Lsp,) * self.d

    @property
    def nsites(self) -> int:
        return self.L0 * self.Lsp ** self.d

    @property
    def size(self) -> int:
        """Number of field indices, i.e. the size of one generator family."""
        return self.nsites * self.nspin * 2

    @property
    def weight(self) -> float:
        return self.dt * self.dx ** self.d

    @property
    def volume(self) -> float:
        return self.L0 * self.dt * (self.Lsp * self.dx) ** self.d

    @property
    def spacing(self) -> np.ndarray:
        return np.array([self.dt] + [self.dx] * self.d)

    # coordinates

    @cached_property
    def site_coords(self) -> np.ndarray:
        """Integer coordinates ``(t, x1..xd)`` of every site, time slowest."""
        grids = np.indices(self.shape).reshape(self.d + 1, -1).T
        grids.setflags(write=False)
        return grids

    @cached_property
    def fields(self) -> dict[str, np.ndarray]:
        """Per field index: ``site``, ``spin``, ``a`` and integer ``coords``."""
        idx = np.arange(self.size)
        a = idx % 2
        spin = (idx // 2) % self.nspin
        site = idx // (2 * self.nspin)
        out = {"site": site, "spin": spin, "a": a, "coords": self.site_coords[site]}
        for v in out.values():
            v.setflags(write=False)
        return out

    def index(self, site: int, spin: int, a: int) -> int:
        return (site * self.nspin + spin) * 2 + a

    def site_of(self, coords) -> tuple[int, int]:
        """Site index of arbitrary integer coordinates and the antiperiodic sign."""
        coords = np.asarray(coords, dtype=np.int64)
        t = coords[..., 0]
        wraps = np.floor_divide(t, self.L0)
        sign = np.where(wraps % 2 == 0, 1, -1)
        wrapped = coords.copy()
        wrapped[..., 0] = t % self.L0
        if self.d:
            wrapped[..., 1:] = coords[..., 1:] % self.Lsp
        site = np.ravel_multi_index(tuple(np.moveaxis(wrapped, -1, 0)), self.shape)
        return site, sign

    def min_image(self, diff) -> np.ndarray:
        """Representative of an integer coordinate difference in ``(-L/2, L/2]`` per axis."""
        diff = np.asarray(diff, dtype=np.int64)
        L = np.array(self.shape)
        r = np.mod(diff, L)
        return np.where(r > L // 2, r - L, r)

    # momenta

    @cached_property
    def momenta(self) -> np.ndarray:
        """Momentum of every mode ``(k0, k1..kd)``, laid out like ``site_coords``.

        ``k0 = (2n+1) pi / (L0 dt)`` for ``n = -L0/2 .. L0/2-1`` (a set closed
        under ``k0 -> -k0``); spatial components use the representative in
        ``(-pi/dx, pi/dx]``.
        """
        c = self.site_coords
        n = c[:, 0] - self.L0 // 2
        k0 = (2 * n + 1) * np.pi / (self.L0 * self.dt)
        out = [k0]
        for ax in range(self.d):
            m = c[:, 1 + ax]
            m = np.where(m > self.Lsp // 2, m - self.Lsp, m)
            out.append(2 * np.pi * m / (self.Lsp * self.dx))
        k = np.stack(out, axis=1)
        k.setflags(write=False)
        return k

    def mode_of_neg_k0(self) -> np.ndarray:
        """Permutation of modes implementing ``k0 -> -k0``."""
        c = self.site_coords.copy()
        c[:, 0] = self.L0 - 1 - c[:, 0]
        return self.site_of(c)[0]

    def mode_of_neg_k(self) -> np.ndarray:
        """Permutation of modes implementing ``k -> -k`` (all components)."""
        c = self.site_coords.copy()
        c[:, 0] = self.L0 - 1 - c[:, 0]
        if self.d:
            c[:, 1:] = (-c[:, 1:]) % self.Lsp
        return self.site_of(c)[0]

    def positions(self) -> np.ndarray:
        """Real coordinates ``(x0, x)`` of the field indices."""
        return self.fields["coords"] * self.spacing

    # field maps

    def field_map(self, site_map: np.ndarray, site_sign: np.ndarray, flip_a: bool = False) -> tuple[np.ndarray, np.ndarray]:
        f = self.fields
        a = 1 - f["a"] if flip_a else f["a"]
        target = (site_map[f["site"]] * self.nspin + f["spin"]) * 2 + a
        return target, site_sign[f["site"]].astype(float)

    def shift(self, t: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """Field index map ``xi -> xi + t`` with the antiperiodic sign of the move."""
        t = np.asarray(t, dtype=np.int64)
        if t.shape != (self.d + 1,):
            raise LatticeError(f"translation needs {self.d + 1} integer components")
        site, sign = self.site_of(self.site_coords + t)
        return self.field_map(site, sign)

    def reflect(self, kind: str) -> tuple[np.ndarray, np.ndarray]:
        """``xi -> -xi`` (kind ``"minus"``) or ``xi -> R0 xi`` (kind ``"time"``)."""
        c = self.site_coords.copy()
        if kind == "minus":
            c = -c
        elif kind == "time":
            c[:, 0] = -c[:, 0]
        else:
            raise LatticeError(f"unknown reflection {kind!r}")
        site, sign = self.site_of(c)
        return self.field_map(site, sign)

    def time_differences(self) -> np.ndarray:
        """Minimal-image coordinate differences ``x_i - x_j`` of all field index pairs, shape ``(N, N, d+1)``."""
        c = self.fields["coords"]
        return self.min_image(c[:, None, :] - c[None, :, :])


@dataclass(frozen=True)
class Kernel:
    """Coefficient array over ``m`` external and ``n`` internal arguments.

    ``space`` is ``"position"`` (all axes are field indices), ``"partial"`` (the
    first ``m`` axes are momentum indices, the rest field indices) or
    ``"total"`` (every axis is a momentum index, values on momentum conserving
    tuples).
    """

    values: np.ndarray
    m: int
    space_ref: LatticeSpec
    space: str = "position"

    def __post_init__(self):
        if self.space not in ("position", "partial", "total"):
            raise LatticeError(f"unknown kernel space {self.space!r}")
        if self.m < 0 or self.m > np.ndim(self.values):
            raise LatticeError("m must be between 0 and the number of arguments")

    @property
    def n(self) -> int:
        return np.ndim(self.values) - self.m

    @property
    def lattice(self) -> LatticeSpec:
        return self.space_ref

    def with_values(self, values) -> "Kernel":
        return replace(self, values=np.asarray(values))

    def __add__(self, other: "Kernel") -> "Kernel":
        return self.with_values(self.values + other.values)

    def __mul__(self, c) -> "Kernel":
        return self.with_values(self.values * c)

    __rmul__ = __mul__


def apply_field_map(values: np.ndarray, target: np.ndarray, sign: np.ndarray, axes: Sequence[int] | None = None) -> np.ndarray:
    """``out[i1..in] = prod sign[i_k] * values[target[i1], .., target[in]]`` over ``axes``."""
    out = np.asarray(values)
    axes = range(out.ndim) if axes is None else axes
    for ax in axes:
        out = np.take(out, target, axis=ax)
        shape = [1] * out.ndim
        shape[ax] = -1
        out = out * sign.reshape(shape)
    return out


# ---------------------------------------------------------------- builders


def build_J(lattice: LatticeSpec) -> Kernel:
    """The particle/hole swap kernel: ``+1/w`` for ``(a, a') = (1, 0)``, ``-1/w`` for ``(0, 1)``."""
    return Kernel(j_sign(lattice) / lattice.weight, 0, lattice)


def j_sign(lattice: LatticeSpec) -> np.ndarray:
    N = lattice.size
    J = np.zeros((N, N))
    for i in range(0, N, 2):
        J[i + 1, i] = 1.0
        J[i, i + 1] = -1.0
    return J


def delta_kernel(lattice: LatticeSpec) -> Kernel:
    """Lattice delta function on field indices (the identity integral operator)."""
    return Kernel(np.eye(lattice.size) / lattice.weight, 0, lattice)


@dataclass(frozen=True)
class InteractionSpec:
    """Two body potential ``v`` as values on sites (indexed like the site difference) and a coupling."""

    v: np.ndarray
    coupling: float = 1.0

    @classmethod
    def from_function(cls, lattice: LatticeSpec, fn: Callable[[np.ndarray], complex], coupling: float = 1.0):
        """``fn`` receives the minimal-image real coordinates ``(x0, x)`` of a site difference."""
        pos = lattice.min_image(lattice.site_coords) * lattice.spacing
        return cls(np.array([fn(p) for p in pos], dtype=np.complex128), coupling)

    @classmethod
    def local(cls, lattice: LatticeSpec, strength: float = 1.0, coupling: float = 1.0):
        """Equal-time contact interaction ``v = strength * delta``."""
        v = np.zeros(lattice.nsites, np.complex128)
        v[0] = strength / lattice.weight
        return cls(v, coupling)


def potential_difference_matrix(spec: InteractionSpec, lattice: LatticeSpec) -> np.ndarray:
    """``V[s, s'] = coupling * v(x_s - x_s')`` with periodic wrapping (densities are bosonic)."""
    v = np.asarray(spec.v, dtype=np.complex128)
    if v.shape != (lattice.nsites,) or not np.all(np.isfinite(v)):
        raise LatticeError("potential must be a finite array with one value per site")
    c = lattice.site_coords
    diff = lattice.min_image(c[:, None, :] - c[None, :, :])
    site, _ = lattice.site_of(diff)
    return spec.coupling * v[site]


def build_interaction(spec: InteractionSpec, lattice: LatticeSpec, table: GeneratorTable | None = None,
                      family: str = "psi") -> GrassmannPolynomial:
    """Quartic density-density interaction with kernel ``-1/2 delta(x1,x2) delta(x3,x4) v(x1-x3)``.

    Equals ``-1/2 w^2 sum_{x,y} v(x-y) psibar(x) psi(x) psibar(y) psi(y)`` where
    ``x, y`` run over sites and spins.
    """
    table = GeneratorTable.of(**{family: lattice.size}) if table is None else table
    if table.family_size(family) != lattice.size:
        raise LatticeError("generator family does not match the lattice")
    V = potential_difference_matrix(spec, lattice)
    w = lattice.weight
    off = table.offset(family)
    masks, coeffs = [], []
    ns = lattice.nspin
    for s1 in range(lattice.nsites):
        for s2 in range(lattice.nsites):
            val = V[s1, s2]
            if val == 0:
                continue
            for sp1 in range(ns):
                for sp2 in range(ns):
                    i = lattice.index(s1, sp1, 0)
                    j = lattice.index(s2, sp2, 0)
                    if i == j:
                        continue
                    # psibar(x) psi(x) = psi_{i+1} psi_i = -psi_i psi_{i+1}; two such factors give +.
                    gens = sorted([i, i + 1, j, j + 1])
                    mask = sum(1 << (off + g) for g in gens)
                    # psi_i psi_{i+1} psi_j psi_{j+1} reordered to increasing order: pairs are adjacent, so sign +
                    masks.append(mask)
                    coeffs.append(-0.5 * w * w * val)
    return GrassmannPolynomial(table, np.array(masks, np.int64), np.array(coeffs, np.complex128))


def translate_kernel(f: Kernel, t: Sequence[int]) -> Kernel:
    """``f(xi_1 + t, ..)`` with antiperiodic signs on position arguments.

    For a partial momentum kernel the momentum arguments are left alone, so a
    translation invariant one picks up the character phase of its external
    momenta (check with :func:`partial_translation_phase`).
    """
    lat = f.space_ref
    target, sign = lat.shift(t)
    if f.space == "position":
        axes = range(f.values.ndim)
    elif f.space == "partial":
        axes = range(f.m, f.values.ndim)
    else:
        raise LatticeError("total transforms carry no position arguments")
    return f.with_values(apply_field_map(f.values, target, sign, axes))


def momentum_labels(lattice: LatticeSpec) -> dict[str, np.ndarray]:
    """Per momentum index ``(mode, spin, a)``: arrays ``mode``, ``spin``, ``a`` and ``k``."""
    idx = np.arange(lattice.size)
    a = idx % 2
    spin = (idx // 2) % lattice.nspin
    mode = idx // (2 * lattice.nspin)
    return {"mode": mode, "spin": spin, "a": a, "k": lattice.momenta[mode]}


def signed_momenta(lattice: LatticeSpec) -> np.ndarray:
    """``(-1)^a k`` for every momentum index; the addition rule of momentum space."""
    lab = momentum_labels(lattice)
    return lab["k"] * np.where(lab["a"] == 0, 1.0, -1.0)[:, None]


def minkowski(k: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``<k, x>_- = -k0 x0 + k . x`` along the last axis."""
    return -k[..., 0] * x[..., 0] + np.sum(k[..., 1:] * x[..., 1:], axis=-1)


def partial_translation_phase(f: Kernel, t: Sequence[int]) -> np.ndarray:
    """Phase ``exp(i <eta_1 + .. + eta_m, t>_-)`` on the external momentum grid of a partial kernel."""
    lat = f.space_ref
    sk = signed_momenta(lat)
    tt = np.asarray(t) * lat.spacing
    phase = np.exp(1j * minkowski(sk, tt))
    out = np.ones((lat.size,) * f.m, np.complex128)
    for ax in range(f.m):
        shape = [1] * f.m
        shape[ax] = -1
        out = out * phase.reshape(shape)
    return out


def symmetrize_translations(values: np.ndarray, lattice: LatticeSpec) -> np.ndarray:
    """Average a position kernel over all lattice translations (the projection onto invariant kernels)."""
    acc = np.zeros_like(np.asarray(values, dtype=np.complex128))
    for c in lattice.site_coords:
        target, sign = lattice.shift(c)
        acc = acc + apply_field_map(values, target, sign)
    return acc / lattice.nsites


def random_invariant_kernel(lattice: LatticeSpec, nargs: int, rng: np.random.Generator, m: int = 0,
                            antisymmetric: bool = True, particle_conserving: bool = False,
                            real: bool = False) -> Kernel:
    """Random translation invariant position kernel, antisymmetric separately in the ``m`` and ``nargs - m`` groups."""
    shape = (lattice.size,) * nargs
    vals = rng.normal(size=shape)
    if not real:
        vals = vals + 1j * rng.normal(size=shape)
    if particle_conserving:
        a = lattice.fields["a"]
        count = np.zeros(shape, dtype=int)
        for ax in range(nargs):
            sh = [1] * nargs
            sh[ax] = -1
            count = count + a.reshape(sh)
        vals = np.where(2 * count == nargs, vals, 0)
    vals = symmetrize_translations(vals, lattice)
    if antisymmetric:
        vals = antisymmetrize_groups(vals, [m, nargs - m])
    return Kernel(vals, m, lattice)


def random_invariant_polynomial(lattice: LatticeSpec, table: GeneratorTable, rng: np.random.Generator,
                                blocks: Sequence[tuple[int, int]], scale: float = 1.0,
                                families: Sequence[str] = ("phi", "psi")) -> GrassmannPolynomial:
    """Sum of translation invariant ``(m, n)`` blocks with random kernels."""
    kernels = {}
    for m, n in blocks:
        if m + n == 0:
            continue
        K = random_invariant_kernel(lattice, m + n, rng, m=m)
        kernels[(m, n)] = K.values * scale
    return kernels_to_polynomial(table, kernels, families, lattice.weight)


# ------------------------------------------------------ polynomial bridges


def field_table(lattice: LatticeSpec, *families: str) -> GeneratorTable:
    return GeneratorTable(tuple((fam, lattice.size) for fam in families))


def polynomial_kernels(W: GrassmannPolynomial, lattice: LatticeSpec, families: Sequence[str] = ("phi", "psi")) -> dict[tuple[int, ...], Kernel]:
    """Separately antisymmetric kernels ``W_{m,n}`` of a polynomial in ``phi`` and ``psi``."""
    raw = polynomial_to_kernels(W, families, lattice.weight)
    out = {}
    for key, K in raw.items():
        out[key] = Kernel(K, key[0] if len(key) > 1 else 0, lattice)
    return out


def kernels_polynomial(kernels, table: GeneratorTable, lattice: LatticeSpec,
                       families: Sequence[str] = ("phi", "psi")) -> GrassmannPolynomial:
    raw = {key: (K.values if isinstance(K, Kernel) else K) for key, K in kernels.items()}
    return kernels_to_polynomial(table, raw, families, lattice.weight)


def bilinear_form(table: GeneratorTable, left: str, right: str, K: np.ndarray, lattice: LatticeSpec) -> GrassmannPolynomial:
    """``int left(xi) K(xi, xi') right(xi')`` with the lattice measure."""
    return GrassmannPolynomial.bilinear(table, left, right, np.asarray(K) * lattice.weight ** 2)


def source_term(table: GeneratorTable, lattice: LatticeSpec, left: str = "phi", right: str = "psi") -> GrassmannPolynomial:
    """``phi J psi``."""
    return bilinear_form(table, left, right, build_J(lattice).values, lattice)


def all_translations(lattice: LatticeSpec):
    return [tuple(int(x) for x in c) for c in lattice.site_coords]


def unit_translations(lattice: LatticeSpec):
    out = []
    for ax in range(lattice.d + 1):
        t = [0] * (lattice.d + 1)
        t[ax] = 1
        out.append(tuple(t))
    return out


__all__ = [name for name in dir() if not name.startswith("_") and name not in ("itertools", "np", "field")]
