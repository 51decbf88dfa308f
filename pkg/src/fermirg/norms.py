"""Differential-decay operators, kernel norms and numerical checks of the norm inequalities.

Conventions on the lattice:

* A position factor ``(x_i - x_j)^delta`` uses the signed minimal-image
  coordinate difference in every axis. Position norms only ever see its
  absolute value, which is a metric on the torus, so the Leibniz-type
  estimates survive the discretization.
* A momentum derivative on an external leg is realised as the dual of a
  position multiplication: ``D (phi~) := (x phi)~``. On the continuum this is
  an identity; here it is the definition.
* For kernels with external arguments in position space the mixed norm is the
  supremum over the externals of the integral over all internal arguments.
  For purely internal kernels it is the usual ``max_j sup_{xi_j} int`` over
  the others.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .decay import (INF, DecaySeries, NormParams, ds_add, ds_leq, ds_mul, ds_slack, e0,
                    factorial_multi, multi_indices)
from .fourier import (BoundReport, Propagator, inverse_partial_ft, partial_ft, total_ft)
from .grassmann import GrassmannPolynomial, antisymmetrize_groups
from .lattice import Kernel, LatticeSpec, j_sign, polynomial_kernels


class NormError(ValueError):
    pass


# ---------------------------------------------------------------- dd-operators


@dataclass(frozen=True)
class DecayOperator:
    """Product of elementary factors ``D^delta_{i;j}`` (1-based argument positions, ``i != j``)."""

    factors: tuple = ()

    def __post_init__(self):
        for i, j, delta in self.factors:
            if i == j:
                raise NormError("dd-operator factor needs i != j")
            if min(delta) < 0:
                raise NormError("multi-index entries must be nonnegative")

    @property
    def order(self) -> tuple[int, ...] | None:
        if not self.factors:
            return None
        return tuple(int(x) for x in np.sum([f[2] for f in self.factors], axis=0))

    def check(self, nargs: int) -> None:
        for i, j, _ in self.factors:
            if not (1 <= i <= nargs and 1 <= j <= nargs):
                raise NormError(f"factor ({i}, {j}) out of range for {nargs} arguments")


def _pairs(nargs: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(nargs), 2))


def _compositions(total: int, parts: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    for c in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for x in c + (total + parts - 1,):
            out.append(x - prev - 1)
            prev = x
        yield tuple(out)


@lru_cache(maxsize=None)
def dd_operators(nargs: int, delta: tuple[int, ...]) -> tuple[np.ndarray, ...]:
    """All dd-operators of total order ``delta`` on ``nargs`` arguments.

    Returned as arrays of shape ``(npairs, len(delta))`` giving the order of the
    factor attached to each unordered pair. Reversing a pair only flips a sign,
    which no norm sees, so unordered pairs exhaust the distinct actions.
    """
    pairs = _pairs(nargs)
    if not pairs:
        return (np.zeros((0, len(delta)), int),) if sum(delta) == 0 else ()
    per_axis = [list(_compositions(k, len(pairs))) for k in delta]
    out = []
    for combo in itertools.product(*per_axis):
        out.append(np.array(combo, dtype=int).T)
    return tuple(out)


def _coordinate_differences(lattice: LatticeSpec) -> np.ndarray:
    c = lattice.fields["coords"]
    return lattice.min_image(c[:, None, :] - c[None, :, :]) * lattice.spacing


def _pair_weight(lattice: LatticeSpec, nargs: int, i: int, j: int, delta) -> np.ndarray:
    """``prod_axes (x_i - x_j)^delta_axis`` broadcast over ``nargs`` axes (0-based i, j)."""
    diff = _coordinate_differences(lattice)
    w = np.prod(diff ** np.asarray(delta), axis=-1)
    shape = [1] * nargs
    shape[i] = lattice.size
    shape[j] = lattice.size
    if i < j:
        return w.reshape(shape)
    return w.T.reshape(shape)


def _operator_weight(lattice: LatticeSpec, nargs: int, op: np.ndarray) -> np.ndarray:
    out = np.ones((1,) * nargs)
    for (i, j), delta in zip(_pairs(nargs), op):
        if any(delta):
            out = out * _pair_weight(lattice, nargs, i, j, delta)
    return out


def apply_position_weights(f: Kernel, factors: Sequence[tuple[tuple[int, int], Sequence[int]]]) -> Kernel:
    """Multiply a position kernel by ``prod (x_i - x_j)^delta`` (0-based argument pairs)."""
    nargs = f.values.ndim
    vals = np.asarray(f.values, dtype=np.complex128)
    for (i, j), delta in factors:
        vals = vals * _pair_weight(f.space_ref, nargs, i, j, delta)
    return f.with_values(vals)


def apply_dd(D: DecayOperator, f: Kernel) -> Kernel:
    """Apply a dd-operator to a position, partial or total kernel.

    Position factors multiply by coordinate differences. Factors touching a
    momentum argument act on the position preimage and are transformed back.
    """
    nargs = f.values.ndim
    D.check(nargs)
    factors = [((i - 1, j - 1), delta) for i, j, delta in D.factors]
    if f.space == "position":
        return apply_position_weights(f, factors)
    touches_ext = any(i < f.m or j < f.m for (i, j), _ in factors)
    if f.space == "partial" and not touches_ext:
        return apply_position_weights(f, factors)
    pos = inverse_partial_ft(f)
    pos = apply_position_weights(pos, factors)
    if f.space == "total":
        return total_ft(Kernel(pos.values, f.m, f.space_ref), check=False)
    return partial_ft(pos, f.m)


# ---------------------------------------------------------------- mixed norms


def mixed_norm(values: np.ndarray, m: int, weight: float, space: str = "position") -> float:
    """``|||f|||_{1,inf}`` of an array whose first ``m`` axes are external.

    * no internal axes: ``sup |f|``;
    * position externals (``m >= 1``): sup over externals of the weighted sum over internals;
    * otherwise: ``max_j sup_{xi_j}`` of the weighted sum over the other internals,
      with a supremum over any momentum externals.
    """
    a = np.abs(np.asarray(values))
    nd = a.ndim
    n = nd - m
    if a.size == 0:
        return 0.0
    if n == 0:
        return float(a.max())
    if space == "position" and m >= 1:
        s = a.sum(axis=tuple(range(m, nd))) * weight ** n
        return float(s.max())
    if n == 1:
        return float(a.max())
    best = 0.0
    for j in range(m, nd):
        others = tuple(ax for ax in range(m, nd) if ax != j)
        s = a.sum(axis=others) * weight ** (n - 1)
        best = max(best, float(s.max()))
    return best


def norm_1inf(f: Kernel, r0: int = 2, r: int = 2) -> DecaySeries:
    """Position space norm as a decay series.

    Kernels with external arguments carry only the constant coefficient
    ``|||f|||_{1,inf}``; purely internal kernels get the full series over
    dd-operators.
    """
    lat = f.space_ref
    d = lat.d
    if f.space != "position":
        raise NormError("norm_1inf expects a position kernel")
    if f.m >= 1 or f.values.ndim == 0:
        val = mixed_norm(f.values, f.m, lat.weight)
        coeffs = {delta: (val if sum(delta) == 0 else 0.0) for delta in multi_indices(d, r0, r)}
        return DecaySeries.from_mapping(coeffs, d, r0, r)
    nargs = f.values.ndim
    a = np.abs(np.asarray(f.values))
    coeffs = {}
    for delta in multi_indices(d, r0, r):
        best = 0.0
        for op in dd_operators(nargs, delta):
            wgt = np.abs(_operator_weight(lat, nargs, op))
            best = max(best, mixed_norm(a * wgt, 0, lat.weight))
        coeffs[delta] = best / factorial_multi(delta)
    return DecaySeries.from_mapping(coeffs, d, r0, r)


def _split_operator(op: np.ndarray, nargs: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Split the pair orders into the part touching an external argument and the purely internal part."""
    ext = np.zeros_like(op)
    inner = np.zeros_like(op)
    for row, (i, j) in enumerate(_pairs(nargs)):
        if i < m or j < m:
            ext[row] = op[row]
        else:
            inner[row] = op[row]
    return ext, inner


def _momentum_images(f: Kernel, r0: int, r: int):
    """Yield ``(delta, |D f~|)`` for every dd-operator up to order ``(r0, r)``.

    Factors between internal position arguments commute with the partial
    transform, so only the distinct external parts need a fresh transform.
    """
    lat = f.space_ref
    nargs = f.values.ndim
    pos = inverse_partial_ft(f).values
    cache: dict[bytes, np.ndarray] = {}

    def transformed(ext: np.ndarray) -> np.ndarray:
        key = ext.tobytes()
        if key not in cache:
            vals = pos * _operator_weight(lat, nargs, ext) if ext.any() else pos
            if f.space == "total":
                cache[key] = total_ft(Kernel(vals, f.m, lat), check=False).values
            else:
                cache[key] = partial_ft(Kernel(vals, f.m, lat), f.m).values
        return cache[key]

    for delta in multi_indices(lat.d, r0, r):
        for op in dd_operators(nargs, delta):
            ext, inner = _split_operator(op, nargs, f.m)
            g = transformed(ext)
            if inner.any():
                g = g * _operator_weight(lat, nargs, inner)
            yield delta, np.abs(g)


def norm_tilde(f: Kernel, r0: int = 2, r: int = 2) -> DecaySeries:
    """Momentum space norm of a partial transform (or a total one when no position argument is left)."""
    lat = f.space_ref
    if f.space == "position":
        if f.m:
            raise NormError("position kernels with external arguments must be transformed first")
        return norm_1inf(f, r0, r)
    coeffs = {delta: 0.0 for delta in multi_indices(lat.d, r0, r)}
    for delta, g in _momentum_images(f, r0, r):
        if f.space == "total":
            val = float(g.max()) if g.size else 0.0
        else:
            val = mixed_norm(g, f.m, lat.weight, "partial")
        coeffs[delta] = max(coeffs[delta], val)
    coeffs = {k: v / factorial_multi(k) for k, v in coeffs.items()}
    return DecaySeries.from_mapping(coeffs, lat.d, r0, r)


def pointwise_series(f: Kernel, r0: int = 2, r: int = 2) -> dict[tuple, DecaySeries]:
    """Per external momentum tuple, the series whose supremum is ``norm_tilde(f)``."""
    lat = f.space_ref
    nargs = f.values.ndim
    n = nargs - f.m
    ext_shape = (lat.size,) * f.m
    best = {delta: np.zeros(ext_shape) for delta in multi_indices(lat.d, r0, r)}
    for delta, g in _momentum_images(f, r0, r):
        if n == 0:
            val = g
        elif n == 1:
            val = g.max(axis=-1)
        else:
            val = np.zeros(ext_shape)
            for j in range(f.m, nargs):
                others = tuple(ax for ax in range(f.m, nargs) if ax != j)
                s = g.sum(axis=others) * lat.weight ** (n - 1)
                val = np.maximum(val, s.max(axis=-1))
        best[delta] = np.maximum(best[delta], val)
    out = {}
    for idx in np.ndindex(*ext_shape):
        c = {delta: float(b[idx]) / factorial_multi(delta) for delta, b in best.items()}
        out[idx] = DecaySeries.from_mapping(c, lat.d, r0, r)
    return out


def sup_norm(C) -> float:
    return float(np.abs(C.covariance if isinstance(C, Propagator) else np.asarray(C)).max())


def triple_norm_1inf(C, lattice: LatticeSpec) -> float:
    """``|||C|||_{1,inf}`` of a two-point kernel: worst row or column weighted sum."""
    a = np.abs(C.covariance if isinstance(C, Propagator) else np.asarray(C))
    return float(max(a.sum(axis=1).max(), a.sum(axis=0).max()) * lattice.weight)


# ---------------------------------------------------------------- aggregate norms


def polynomial_norms(W: GrassmannPolynomial, lattice: LatticeSpec, families=("phi", "psi"),
                     r0: int = 2, r: int = 2, momentum: bool = False) -> dict[tuple[int, int], DecaySeries]:
    """``||W_{m,n}||`` for every kernel block of ``W`` (momentum norms of the partial transforms if asked)."""
    fams = [f for f in families if f in W.table.names]
    kernels = polynomial_kernels(W, lattice, fams)
    out = {}
    for key, K in kernels.items():
        if len(fams) == 1:
            mn = (0, key[0]) if fams[0] != "phi" else (key[0], 0)
            K = Kernel(K.values, mn[0], lattice)
        else:
            mn = (key[0], key[1])
        if sum(mn) == 0:
            continue
        if momentum and K.m:
            out[mn] = norm_tilde(partial_ft(K, K.m), r0, r)
        else:
            out[mn] = norm_1inf(K, r0, r)
    return out


def big_n(W: GrassmannPolynomial, variant: str, params: NormParams, lattice: LatticeSpec,
          X: DecaySeries | None = None, c: DecaySeries | None = None, r0: int = 2, r: int = 2,
          families=("phi", "psi")) -> DecaySeries:
    """Aggregate norms ``N``, ``N0`` and the momentum variant ``N0tilde``.

    * ``N0 = e0(X) sum_{m+n>=2} beta^n rho_{m;n} ||W_{m,n}||_{1,inf}``
    * ``N0tilde`` uses ``beta^{m+n}`` and the momentum norm of the partial transform
    * ``N = (c / b^2) sum alpha^n b^n rho_{m;n} ||W_{m,n}||_{1,inf}`` with
      ``c = (b/4) e0(X)`` by default
    """
    d = lattice.d
    X = DecaySeries.zero(d, r0, r) if X is None else X
    E = e0(X)
    momentum = variant == "N0tilde"
    norms = polynomial_norms(W, lattice, families, r0, r, momentum=momentum)
    acc = DecaySeries.zero(d, r0, r)
    for (m, n), nrm in sorted(norms.items()):
        if m + n < 2:
            continue
        rho = params.rho_of(m, n)
        if variant == "N0":
            w = params.beta ** n * rho
        elif variant == "N0tilde":
            w = params.beta ** (m + n) * rho
        elif variant == "N":
            w = (params.alpha * params.b) ** n * rho
        else:
            raise NormError(f"unknown variant {variant!r}")
        acc = ds_add(acc, nrm.scale(w))
    if variant == "N":
        cc = E.scale(params.b / 4) if c is None else c
        return ds_mul(cc, acc).scale(1.0 / params.b ** 2)
    return ds_mul(E, acc)


# ---------------------------------------------------------------- rho systems


def rho_lambda_scheme(lam: float, upsilon: float, max_total: int = 8) -> dict[tuple[int, int], float]:
    """``rho_{m;n} = lam^{-(1-upsilon)(m+n-2)/2}`` for ``m+n >= 4`` and ``lam^{-(1-upsilon)}`` for ``m+n = 2``."""
    out = {}
    for m in range(max_total + 1):
        for n in range(max_total + 1 - m):
            t = m + n
            if t < 2 or t % 2:
                continue
            expo = (1 - upsilon) * (t - 2) / 2 if t >= 4 else (1 - upsilon)
            out[(m, n)] = lam ** (-expo)
    return out


@dataclass
class RhoReport:
    ok: bool
    witnesses: list = field(default_factory=list)
    checked: int = 0


def rho_validate(params: NormParams, profile: str = "theorem-VIII.6", max_total: int = 8,
                 tol: float = 1e-12) -> RhoReport:
    """Check the monotonicity and submultiplicativity hypotheses on the configured range.

    Only index pairs with even ``m + n >= 2`` are used (those carried by even
    Grassmann functions). Profile ``coupling-lambda`` replaces ``params.rho``
    by the coupling scheme first. ``rho_{0;2} >= 1`` is always asserted.
    """
    if profile == "coupling-lambda":
        rho = rho_lambda_scheme(params.lam, params.upsilon, max_total)
        eps = 1.0
    elif profile == "theorem-VIII.6":
        rho, eps = dict(params.rho), 1.0
    elif profile == "theorem-X.12":
        rho, eps = dict(params.rho), params.epsilonPrime
    else:
        raise NormError(f"unknown rho profile {profile!r}")
    keys = [(m, n) for m in range(max_total + 1) for n in range(max_total + 1 - m)
            if (m + n) >= 2 and (m + n) % 2 == 0]
    missing = [k for k in keys if k not in rho]
    if missing:
        return RhoReport(False, [("missing", k) for k in missing[:5]], 0)
    bad = []
    count = 0

    def le(a, b, what):
        nonlocal count
        count += 1
        if a > b * (1 + tol):
            bad.append((what, a, b))

    for (m, n) in keys:
        if (m, n - 2) in rho and n >= 2:
            le(rho[(m, n - 2)], rho[(m, n)], f"rho[{m};{n - 2}] <= rho[{m};{n}]")
        if n >= 1 and (m + 1, n - 1) in rho:
            le(rho[(m + 1, n - 1)], eps * rho[(m, n)], f"rho[{m + 1};{n - 1}] <= {eps:g} rho[{m};{n}]")
    for (m, n), (mp, np_) in itertools.product(keys, keys):
        if n < 1 or np_ < 1:
            continue
        tgt = (m + mp, n + np_ - 2)
        if tgt in rho:
            le(rho[tgt], rho[(m, n)] * rho[(mp, np_)], f"rho{tgt} <= rho[{m};{n}] rho[{mp};{np_}]")
    if (0, 2) in rho and rho[(0, 2)] < 1 - tol:
        bad.append(("rho[0;2] >= 1", rho[(0, 2)], 1.0))
    return RhoReport(not bad, bad, count)


# ---------------------------------------------------------------- inequality checks


def splice(f: Kernel, fp: Kernel, mu: int, nu: int) -> Kernel:
    """Join internal argument ``mu`` of ``f`` with ``nu`` of ``f'`` (1-based) by integrating over it.

    For two one-point internals on partial kernels the momentum conservation
    delta is divided out, giving a function on external momenta only.
    """
    lat = f.space_ref
    if f.space != fp.space:
        raise NormError("kernels must live in the same space")
    n, npr = f.n, fp.n
    if not (1 <= mu <= n and 1 <= nu <= npr):
        raise NormError("contraction slots out of range")
    a = np.moveaxis(np.asarray(f.values), f.m + mu - 1, -1)
    b = np.moveaxis(np.asarray(fp.values), fp.m + nu - 1, 0)
    # a: (ext_f, int_f', z) b: (z, ext_fp, int_fp')
    g = np.tensordot(a, b, axes=([-1], [0])) * lat.weight
    # reorder to (ext_f, ext_fp, int_f, int_fp)
    ef, inf_ = f.m, n - 1
    efp, infp = fp.m, npr - 1
    order = (list(range(ef)) + list(range(ef + inf_, ef + inf_ + efp)) + list(range(ef, ef + inf_))
             + list(range(ef + inf_ + efp, ef + inf_ + efp + infp)))
    g = np.transpose(g, order)
    if n == 1 and npr == 1:
        if f.space == "partial":
            return Kernel(g / lat.volume, f.m + fp.m, lat, "total")
        return Kernel(g, f.m + fp.m, lat, f.space)
    return Kernel(g, f.m + fp.m, lat, f.space)


def product_inequality_check(f: Kernel, fp: Kernel, mu: int = 1, nu: int = 1, r0: int = 2, r: int = 2) -> BoundReport:
    """``||g~|| <= ||f~|| ||f'~||`` (factor 4 when both have a single internal argument)."""
    g = splice(f, fp, mu, nu)
    lhs = norm_tilde(g, r0, r)
    factor = 4.0 if (f.n == 1 and fp.n == 1) else 1.0
    rhs = ds_mul(norm_tilde(f, r0, r), norm_tilde(fp, r0, r)).scale(factor)
    rows = ds_slack(lhs, rhs)
    report = BoundReport(lhs, rhs, rows, all(row[3] for row in rows))
    if factor == 4.0:
        plain = ds_mul(norm_tilde(f, r0, r), norm_tilde(fp, r0, r))
        report.extra["factor_one_holds"] = all(row[3] for row in ds_slack(lhs, plain))
    return report


def tensor_ext(f: Kernel, fp: Kernel) -> Kernel:
    """``f (x) f'`` with arguments ordered (externals of f, externals of f', internals of f, internals of f')."""
    vals = np.multiply.outer(np.asarray(f.values), np.asarray(fp.values))
    ef, n = f.m, f.n
    efp, npr = fp.m, fp.n
    order = (list(range(ef)) + list(range(ef + n, ef + n + efp)) + list(range(ef, ef + n))
             + list(range(ef + n + efp, ef + n + efp + npr)))
    return Kernel(np.transpose(vals, order), ef + efp, f.space_ref, f.space)


def contract_pair(f: Kernel, i: int, j: int, C: np.ndarray) -> Kernel:
    """Contraction of internal arguments ``i < j`` (1-based) against ``C`` with sign ``(-1)^(j-i+1)``.

    When no internal argument is left on a partial kernel the result is a
    function on external momenta with the conservation delta divided out.
    """
    from .grassmann import contract_kernel
    out = contract_kernel(f, i, j, C)
    if f.space == "partial" and f.n == 2:
        return Kernel(out.values, f.m, f.space_ref, "total")
    return Kernel(out.values, f.m, f.space_ref, f.space)


def contraction_bound_check(f: Kernel, fp: Kernel, C, rho: Mapping | None = None, i: int = 1, j: int | None = None,
                            r0: int = 2, r: int = 2) -> BoundReport:
    """``||Con_{i,n+j} Ant_ext(f (x) f')|| <= 4 ||C||_{1,inf} ||f|| ||f'||`` with optional rho weights.

    With ``rho`` the weighted seminorms ``rho_{m;n} ||.||~`` are compared and the
    submultiplicativity hypothesis is checked first.
    """
    from .grassmann import ant_ext
    lat = f.space_ref
    Cmat = C.covariance if isinstance(C, Propagator) else np.asarray(C)
    j = 1 if j is None else j
    t = tensor_ext(f, fp)
    t = ant_ext(t)
    g = contract_pair(t, i, f.n + j, Cmat)
    lhs = norm_tilde(g, r0, r)
    cnorm = norm_1inf(Kernel(Cmat, 0, lat), r0, r)
    rhs = ds_mul(cnorm.scale(4.0), ds_mul(norm_tilde(f, r0, r), norm_tilde(fp, r0, r)))
    extra = {}
    if rho is not None:
        key_g = (f.m + fp.m, f.n + fp.n - 2)
        need = [key_g, (f.m, f.n), (fp.m, fp.n)]
        for k in need:
            if k not in rho:
                raise NormError(f"missing rho entry {k}")
        if rho[key_g] > rho[(f.m, f.n)] * rho[(fp.m, fp.n)] * (1 + 1e-12):
            raise NormError("rho is not submultiplicative for this pair")
        lhs = lhs.scale(rho[key_g])
        rhs = rhs.scale(rho[(f.m, f.n)] * rho[(fp.m, fp.n)])
        extra["rho"] = (rho[key_g], rho[(f.m, f.n)], rho[(fp.m, fp.n)])
    rows = ds_slack(lhs, rhs)
    return BoundReport(lhs, rhs, rows, all(row[3] for row in rows), extra)


@dataclass
class ImprovingReport:
    observed: float
    candidate: float
    ratios: dict
    ok: bool


def external_improving_image(f: Kernel, C: np.ndarray) -> Kernel:
    """``Ant_ext int J(eta_{m+1}, zeta) C(zeta, zeta') f(eta; zeta', xi..)`` with the new external last."""
    from .grassmann import ant_ext
    lat = f.space_ref
    JC = j_sign(lat) @ np.asarray(C)  # = int J(eta, zeta) C(zeta, zeta') dzeta
    vals = np.asarray(f.values)
    moved = np.moveaxis(vals, f.m, -1)  # (..ext.., ..rest int.., zeta')
    g = np.tensordot(moved, JC, axes=([-1], [1])) * lat.weight  # (..ext.., ..rest.., eta_new)
    g = np.moveaxis(g, -1, f.m)  # new external after the old ones
    return ant_ext(Kernel(g, f.m + 1, lat))


def improving_candidate(C, lattice: LatticeSpec, rho: Mapping, m_max: int, n_max: int) -> float:
    """Smallest ``Gamma`` satisfying both hypotheses of the external improving criterion on the range."""
    c1 = triple_norm_1inf(C, lattice)
    cinf = sup_norm(C)
    cand = 0.0
    for n in range(1, n_max + 1):
        if (1, n - 1) in rho and (0, n) in rho:
            cand = max(cand, rho[(1, n - 1)] / rho[(0, n)] * c1)
    for m in range(1, m_max + 1):
        for n in range(1, n_max + 1):
            if (m + 1, n - 1) in rho and (m, n) in rho:
                cand = max(cand, rho[(m + 1, n - 1)] / rho[(m, n)] * cinf)
    return cand


def external_improving_check(C, lattice: LatticeSpec, rho: Mapping | None = None, m_max: int = 2, n_max: int = 3,
                             samples: int = 3, rng: np.random.Generator | None = None,
                             kernels: Iterable[Kernel] | None = None) -> ImprovingReport:
    """Observed ratio ``||g|| / ||f||`` over sampled ``f`` against the criterion's candidate ``Gamma``."""
    from .lattice import random_invariant_kernel
    Cmat = C.covariance if isinstance(C, Propagator) else np.asarray(C)
    rng = np.random.default_rng(0) if rng is None else rng
    if rho is None:
        rho = {(m, n): 1.0 for m in range(m_max + 2) for n in range(n_max + 1)}
    if kernels is None:
        kernels = []
        for m in range(0, m_max + 1):
            for n in range(1, n_max + 1):
                if (m + n) % 2:
                    continue
                for _ in range(samples):
                    kernels.append(random_invariant_kernel(lattice, m + n, rng, m=m))
    observed = 0.0
    ratios = {}
    for f in kernels:
        g = external_improving_image(f, Cmat)
        lhs = rho[(g.m, g.n)] * mixed_norm(g.values, g.m, lattice.weight)
        fn = rho[(f.m, f.n)] * norm_1inf(f, 0, 0).values[0]
        if fn == 0:
            continue
        ratio = lhs / fn
        ratios[(f.m, f.n)] = max(ratios.get((f.m, f.n), 0.0), ratio)
        observed = max(observed, ratio)
    cand = improving_candidate(Cmat, lattice, rho, m_max, n_max)
    return ImprovingReport(observed, cand, ratios, observed <= cand * (1 + 1e-9) + 1e-15)
