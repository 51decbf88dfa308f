"""Truncated formal power series with nonnegative, possibly infinite, coefficients.

A :class:`DecaySeries` is an element of the saturating semiring of formal
series in ``t^delta``, where ``delta = (delta0, d1, ..., dd)`` is a multi-index.
Only indices with ``delta0 <= r0`` and ``d1 + ... + dd <= r`` are tracked;
every other coefficient is implicitly infinite.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping


class _Infinity:
    """Tagged top element. ``0 * INF == 0`` is enforced by :func:`_mul`."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()

COEF_TOL = 1e-12
INEQ_SLACK = 1e-9


class DecaySeriesError(ValueError):
    pass


def _add(x, y):
    if x is INF or y is INF:
        return INF
    return x + y


def _mul(x, y):
    if x is INF:
        return 0.0 if y == 0 else INF
    if y is INF:
        return 0.0 if x == 0 else INF
    return x * y


def _le(x, y, tol: float = 0.0) -> bool:
    if y is INF:
        return True
    if x is INF:
        return False
    return x <= y + tol


@lru_cache(maxsize=None)
def multi_indices(d: int, r0: int, r: int) -> tuple[tuple[int, ...], ...]:
    """All tracked multi-indices ``(delta0, d1..dd)``, ordered by total degree then lexicographically."""
    out = []
    for d0 in range(r0 + 1):
        for sp in itertools.product(range(r + 1), repeat=d):
            if sum(sp) <= r:
                out.append((d0, *sp))
    out.sort(key=lambda m: (sum(m), m))
    return tuple(out)


@lru_cache(maxsize=None)
def _mul_table(d: int, r0: int, r: int):
    """For each target index, the list of (i, j) positions with idx[i] + idx[j] == target."""
    idx = multi_indices(d, r0, r)
    pos = {m: k for k, m in enumerate(idx)}
    table = []
    for target in idx:
        pairs = []
        for i, a in enumerate(idx):
            b = tuple(t - s for t, s in zip(target, a))
            if min(b) >= 0 and b in pos:
                pairs.append((i, pos[b]))
        table.append(tuple(pairs))
    return tuple(table)


def factorial_multi(delta: Iterable[int]) -> int:
    return math.prod(math.factorial(k) for k in delta)


@dataclass(frozen=True)
class DecaySeries:
    """Immutable truncated series. ``values`` is aligned with ``multi_indices(d, r0, r)``."""

    d: int
    r0: int
    r: int
    values: tuple = field(repr=False)

    def __post_init__(self):
        n = len(multi_indices(self.d, self.r0, self.r))
        if len(self.values) != n:
            raise DecaySeriesError(f"expected {n} coefficients, got {len(self.values)}")
        for v in self.values:
            if v is not INF and (not math.isfinite(v) or v < 0):
                raise DecaySeriesError(f"coefficients must be finite and >= 0 or INF, got {v!r}")

    # construction helpers

    @classmethod
    def zero(cls, d: int = 2, r0: int = 2, r: int = 2) -> "DecaySeries":
        return cls(d, r0, r, (0.0,) * len(multi_indices(d, r0, r)))

    @classmethod
    def constant(cls, c: float, d: int = 2, r0: int = 2, r: int = 2) -> "DecaySeries":
        vals = [0.0] * len(multi_indices(d, r0, r))
        vals[0] = c
        return cls(d, r0, r, tuple(vals))

    @classmethod
    def infinite(cls, d: int = 2, r0: int = 2, r: int = 2) -> "DecaySeries":
        return cls(d, r0, r, (INF,) * len(multi_indices(d, r0, r)))

    @classmethod
    def c0(cls, d: int = 2, r0: int = 2, r: int = 2) -> "DecaySeries":
        """Coefficient one at every tracked index (infinite beyond the truncation)."""
        return cls(d, r0, r, (1.0,) * len(multi_indices(d, r0, r)))

    @classmethod
    def from_mapping(cls, coeffs: Mapping[tuple, object], d: int = 2, r0: int = 2, r: int = 2) -> "DecaySeries":
        idx = multi_indices(d, r0, r)
        known = set(idx)
        for key in coeffs:
            if tuple(key) not in known:
                raise DecaySeriesError(f"index {key} outside truncation (d={d}, r0={r0}, r={r})")
        return cls(d, r0, r, tuple(coeffs.get(m, 0.0) for m in idx))

    @classmethod
    def monomial(cls, delta: tuple, coef: float = 1.0, d: int = 2, r0: int = 2, r: int = 2) -> "DecaySeries":
        return cls.from_mapping({tuple(delta): coef}, d, r0, r)

    # accessors

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.d, self.r0, self.r)

    @property
    def indices(self) -> tuple[tuple[int, ...], ...]:
        return multi_indices(self.d, self.r0, self.r)

    def __getitem__(self, delta) -> object:
        delta = tuple(delta)
        if delta[0] > self.r0 or sum(delta[1:]) > self.r:
            return INF
        return self.values[self.indices.index(delta)]

    @property
    def const(self):
        return self.values[0]

    def items(self):
        return zip(self.indices, self.values)

    def scale(self, c: float) -> "DecaySeries":
        if c < 0:
            raise DecaySeriesError("scale factor must be nonnegative")
        return DecaySeries(self.d, self.r0, self.r, tuple(_mul(c, v) for v in self.values))

    def finite_max(self) -> float:
        return max((v for v in self.values if v is not INF), default=0.0)

    def to_records(self) -> list[tuple]:
        """Flat serialisable records ``(delta0, spatial, coefficient | "inf")``."""
        return [(m[0], list(m[1:]), "inf" if v is INF else float(v)) for m, v in self.items()]

    def __add__(self, other):
        return ds_add(self, other)

    def __mul__(self, other):
        return ds_mul(self, other)

    def __le__(self, other):
        return ds_leq(self, other)


def _check_shape(a: DecaySeries, b: DecaySeries) -> None:
    if a.shape != b.shape:
        raise DecaySeriesError(f"shape mismatch {a.shape} vs {b.shape}")


def ds_add(a: DecaySeries, b: DecaySeries) -> DecaySeries:
    _check_shape(a, b)
    return DecaySeries(a.d, a.r0, a.r, tuple(_add(x, y) for x, y in zip(a.values, b.values)))


def ds_mul(a: DecaySeries, b: DecaySeries) -> DecaySeries:
    """Truncated Cauchy product with the rule ``0 * INF = 0``."""
    _check_shape(a, b)
    out = []
    for pairs in _mul_table(*a.shape):
        acc = 0.0
        for i, j in pairs:
            acc = _add(acc, _mul(a.values[i], b.values[j]))
            if acc is INF:
                break
        out.append(acc)
    return DecaySeries(a.d, a.r0, a.r, tuple(out))


def ds_max(a: DecaySeries, b: DecaySeries) -> DecaySeries:
    """Componentwise supremum."""
    _check_shape(a, b)
    return DecaySeries(a.d, a.r0, a.r, tuple(y if _le(x, y) else x for x, y in zip(a.values, b.values)))


def ds_geometric(c0: DecaySeries, X: DecaySeries) -> DecaySeries:
    """Solve ``E = c0 + X * E`` degree by degree, i.e. ``E = c0 / (1 - X)``."""
    _check_shape(c0, X)
    x0 = X.values[0]
    if x0 is INF or x0 >= 1:
        raise DecaySeriesError(f"constant coefficient of X must be < 1, got {x0}")
    idx = c0.indices
    pos = {m: k for k, m in enumerate(idx)}
    E: list = [0.0] * len(idx)
    inv = 1.0 / (1.0 - x0)
    for k, target in enumerate(idx):
        acc = c0.values[k]
        for i, a in enumerate(idx):
            if i == 0:
                continue
            b = tuple(t - s for t, s in zip(target, a))
            if min(b) < 0:
                continue
            acc = _add(acc, _mul(X.values[i], E[pos[b]]))
        E[k] = INF if acc is INF else acc * inv
    return DecaySeries(c0.d, c0.r0, c0.r, tuple(E))


def e0(X: DecaySeries) -> DecaySeries:
    """``c0 / (1 - X)`` with the all-ones truncated series as numerator."""
    return ds_geometric(DecaySeries.c0(*X.shape), X)


def ds_leq(a: DecaySeries, b: DecaySeries, tol: float = 0.0) -> bool:
    _check_shape(a, b)
    return all(_le(x, y, tol) for x, y in zip(a.values, b.values))


def ds_slack(lhs: DecaySeries, rhs: DecaySeries) -> list[tuple[tuple, object, object, bool]]:
    """Per-index comparison rows ``(delta, lhs, rhs, lhs <= rhs)`` with the suite slack."""
    _check_shape(lhs, rhs)
    return [(m, x, y, _le(x, y, INEQ_SLACK * (1.0 if y is INF else max(1.0, abs(y)))))
            for m, x, y in zip(lhs.indices, lhs.values, rhs.values)]


def ds_close(a: DecaySeries, b: DecaySeries, tol: float = COEF_TOL) -> bool:
    _check_shape(a, b)
    for x, y in zip(a.values, b.values):
        if (x is INF) != (y is INF):
            return False
        if x is not INF and abs(x - y) > tol * max(1.0, abs(x), abs(y)):
            return False
    return True


@dataclass(frozen=True)
class NormParams:
    """Positive constants used by the aggregate norms.

    ``rho`` maps ``(m, n)`` to a positive weight. Missing entries are an error
    at the point of use, not here.
    """

    beta: float = 1.0
    alpha: float = 1.0
    b: float = 1.0
    gamma: float = 0.1
    gammaPrime: float = 0.1
    epsilon: float = 1e-3
    epsilonPrime: float = 1.0
    lam: float = 0.1
    upsilon: float = 0.1
    mu: float = 1.0
    GammaBound: float = 1.0
    rho: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def rho_of(self, m: int, n: int) -> float:
        try:
            return self.rho[(m, n)]
        except KeyError:
            raise DecaySeriesError(f"missing rho entry for (m, n) = ({m}, {n})") from None
