"""Finite dimensional Grassmann algebra with Gaussian integration.

Generators are grouped in named families (``phi``, ``psi``, ``zeta`` ...) and
laid out along one global order. A monomial is a bitmask over that order, read
as the product of its generators in increasing order. Polynomials store sorted
bitmasks and complex coefficients in two numpy arrays; products are computed by
vectorised pair enumeration with the transposition sign read off a prefix
parity mask.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

SINGULAR_LOG = 1e-300
ANTISYM_TOL = 1e-12
_PAIR_CHUNK = 1 << 22


class GrassmannError(ValueError):
    pass


class SingularLogError(GrassmannError):
    """The constant coefficient is (numerically) zero, so the logarithm does not exist."""


class GeneratorBudgetError(GrassmannError):
    pass


def popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x)


@dataclass(frozen=True)
class GeneratorTable:
    """Ordered families of generators. Appending a family keeps earlier bit positions."""

    families: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [name for name, _ in self.families]
        if len(set(names)) != len(names):
            raise GrassmannError(f"duplicate family names in {names}")
        if self.size > 62:
            raise GeneratorBudgetError(f"{self.size} generators exceed the 62-bit monomial encoding")

    @classmethod
    def of(cls, **sizes: int) -> "GeneratorTable":
        return cls(tuple(sizes.items()))

    @property
    def size(self) -> int:
        return sum(n for _, n in self.families)

    def offset(self, name: str) -> int:
        off = 0
        for fam, n in self.families:
            if fam == name:
                return off
            off += n
        raise GrassmannError(f"family {name!r} absent from table {self.names}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.families)

    def family_size(self, name: str) -> int:
        for fam, n in self.families:
            if fam == name:
                return n
        raise GrassmannError(f"family {name!r} absent from table {self.names}")

    def bit(self, name: str, i: int) -> int:
        n = self.family_size(name)
        if not 0 <= i < n:
            raise GrassmannError(f"index {i} out of range for family {name!r} of size {n}")
        return self.offset(name) + i

    def family_mask(self, name: str) -> int:
        return ((1 << self.family_size(name)) - 1) << self.offset(name)

    def extend(self, name: str, n: int) -> "GeneratorTable":
        return GeneratorTable(self.families + ((name, n),))

    def label(self, bit: int) -> str:
        off = 0
        for fam, n in self.families:
            if bit < off + n:
                return f"{fam}[{bit - off}]"
            off += n
        raise GrassmannError(f"bit {bit} outside table")

    def check_budget(self, budget: int | None) -> None:
        if budget is not None and self.size > budget:
            raise GeneratorBudgetError(f"{self.size} generators exceed the budget of {budget}")


def _prefix_parity(masks: np.ndarray, nbits: int) -> np.ndarray:
    """Bit j of the result is the parity of the number of set bits above j."""
    out = np.zeros_like(masks)
    parity = np.zeros_like(masks)
    for j in range(nbits - 1, -1, -1):
        out |= parity << j
        parity ^= (masks >> j) & 1
    return out


def _accumulate(masks: np.ndarray, coeffs: np.ndarray, nbits: int):
    if masks.size == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.complex128)
    if nbits <= 20:
        size = 1 << nbits
        re = np.bincount(masks, weights=coeffs.real, minlength=size)
        im = np.bincount(masks, weights=coeffs.imag, minlength=size)
        keep = np.flatnonzero((re != 0) | (im != 0))
        return keep.astype(np.int64), (re[keep] + 1j * im[keep])
    uniq, inv = np.unique(masks, return_inverse=True)
    re = np.bincount(inv, weights=coeffs.real, minlength=uniq.size)
    im = np.bincount(inv, weights=coeffs.imag, minlength=uniq.size)
    vals = re + 1j * im
    keep = vals != 0
    return uniq[keep], vals[keep]


class GrassmannPolynomial:
    """Immutable sparse element of the Grassmann algebra over a :class:`GeneratorTable`."""

    __slots__ = ("table", "masks", "coeffs")

    def __init__(self, table: GeneratorTable, masks=None, coeffs=None, *, _normalized: bool = False):
        self.table = table
        if masks is None:
            masks = np.zeros(0, np.int64)
            coeffs = np.zeros(0, np.complex128)
        masks = np.asarray(masks, dtype=np.int64)
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if not _normalized:
            if masks.size and (masks.min() < 0 or masks.max() >= (1 << table.size)):
                raise GrassmannError("monomial uses generators outside the table")
            masks, coeffs = _accumulate(masks, coeffs, table.size)
        masks.setflags(write=False)
        coeffs.setflags(write=False)
        self.masks = masks
        self.coeffs = coeffs

    # constructors

    @classmethod
    def zero(cls, table: GeneratorTable) -> "GrassmannPolynomial":
        return cls(table)

    @classmethod
    def constant(cls, table: GeneratorTable, c: complex) -> "GrassmannPolynomial":
        return cls(table, [0], [c])

    @classmethod
    def one(cls, table: GeneratorTable) -> "GrassmannPolynomial":
        return cls.constant(table, 1.0)

    @classmethod
    def generator(cls, table: GeneratorTable, family: str, i: int, c: complex = 1.0) -> "GrassmannPolynomial":
        return cls(table, [1 << table.bit(family, i)], [c])

    @classmethod
    def monomial(cls, table: GeneratorTable, gens: Sequence[tuple[str, int]], c: complex = 1.0) -> "GrassmannPolynomial":
        """Product of the listed generators in the listed order (sign included)."""
        out = cls.constant(table, c)
        for fam, i in gens:
            out = out * cls.generator(table, fam, i)
        return out

    @classmethod
    def linear(cls, table: GeneratorTable, family: str, vec) -> "GrassmannPolynomial":
        vec = np.asarray(vec, dtype=np.complex128)
        off = table.offset(family)
        if vec.shape != (table.family_size(family),):
            raise GrassmannError("linear form has the wrong length")
        return cls(table, np.int64(1) << (off + np.arange(vec.size, dtype=np.int64)), vec)

    @classmethod
    def bilinear(cls, table: GeneratorTable, left: str, right: str, K) -> "GrassmannPolynomial":
        """``sum_ij K[i, j] left_i right_j``."""
        K = np.asarray(K, dtype=np.complex128)
        li, rj = np.nonzero(K)
        if li.size == 0:
            return cls.zero(table)
        lb = (table.offset(left) + li).astype(np.int64)
        rb = (table.offset(right) + rj).astype(np.int64)
        coef = K[li, rj]
        same = lb == rb
        coef = np.where(same, 0, coef)
        sign = np.where(lb < rb, 1.0, -1.0)
        masks = (np.int64(1) << lb) | (np.int64(1) << rb)
        return cls(table, masks, coef * sign)

    @classmethod
    def from_dict(cls, table: GeneratorTable, terms: Mapping[int, complex]) -> "GrassmannPolynomial":
        keys = list(terms)
        return cls(table, np.array(keys, dtype=np.int64), np.array([terms[k] for k in keys], dtype=np.complex128))

    # basic structure

    def __len__(self) -> int:
        return int(self.masks.size)

    def to_dict(self) -> dict[int, complex]:
        return {int(m): complex(c) for m, c in zip(self.masks, self.coeffs)}

    def coefficient(self, mask: int) -> complex:
        k = np.searchsorted(self.masks, mask)
        if k < self.masks.size and self.masks[k] == mask:
            return complex(self.coeffs[k])
        return 0j

    @property
    def constant_term(self) -> complex:
        return self.coefficient(0)

    def degrees(self) -> np.ndarray:
        return popcount(self.masks)

    def max_degree(self) -> int:
        return int(self.degrees().max()) if len(self) else 0

    def _same(self, other: "GrassmannPolynomial") -> None:
        if self.table != other.table:
            raise GrassmannError("polynomials live over different generator tables")

    def select(self, keep: np.ndarray) -> "GrassmannPolynomial":
        return GrassmannPolynomial(self.table, self.masks[keep], self.coeffs[keep], _normalized=True)

    def even_part(self) -> "GrassmannPolynomial":
        return self.select(self.degrees() % 2 == 0)

    def odd_part(self) -> "GrassmannPolynomial":
        return self.select(self.degrees() % 2 == 1)

    def is_even(self, tol: float = 0.0) -> bool:
        odd = self.odd_part()
        return len(odd) == 0 or float(np.abs(odd.coeffs).max()) <= tol

    def family_degree(self, family: str) -> np.ndarray:
        return popcount(self.masks & self.table.family_mask(family))

    def homogeneous(self, **degrees: int) -> "GrassmannPolynomial":
        """Terms with the prescribed degree in each named family."""
        keep = np.ones(len(self), dtype=bool)
        for fam, deg in degrees.items():
            keep &= self.family_degree(fam) == deg
        return self.select(keep)

    def without_constant(self) -> "GrassmannPolynomial":
        return self.select(self.masks != 0)

    def set_zero(self, *families: str) -> "GrassmannPolynomial":
        """Evaluate at the zero field for the named families."""
        fm = 0
        for fam in families:
            fm |= self.table.family_mask(fam)
        return self.select((self.masks & fm) == 0)

    def chop(self, tol: float = 1e-14) -> "GrassmannPolynomial":
        return self.select(np.abs(self.coeffs) > tol)

    def conj(self) -> "GrassmannPolynomial":
        return GrassmannPolynomial(self.table, self.masks, np.conj(self.coeffs), _normalized=True)

    def retable(self, table: GeneratorTable) -> "GrassmannPolynomial":
        """Reinterpret over a table whose leading families coincide with this one's."""
        if table.families[: len(self.table.families)] != self.table.families:
            if len(self) and int(self.masks.max()) >= (1 << table.size):
                raise GrassmannError("target table does not contain the used generators")
            n = min(len(self.table.families), len(table.families))
            if table.families[:n] != self.table.families[:n]:
                raise GrassmannError("tables are not prefix compatible")
        return GrassmannPolynomial(table, self.masks, self.coeffs)

    # arithmetic

    def __add__(self, other):
        if not isinstance(other, GrassmannPolynomial):
            other = GrassmannPolynomial.constant(self.table, other)
        self._same(other)
        return GrassmannPolynomial(self.table, np.concatenate([self.masks, other.masks]),
                                   np.concatenate([self.coeffs, other.coeffs]))

    __radd__ = __add__

    def __neg__(self):
        return GrassmannPolynomial(self.table, self.masks, -self.coeffs, _normalized=True)

    def __sub__(self, other):
        if not isinstance(other, GrassmannPolynomial):
            other = GrassmannPolynomial.constant(self.table, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, GrassmannPolynomial):
            return gp_product(self, other)
        c = complex(other)
        if c == 0:
            return GrassmannPolynomial.zero(self.table)
        return GrassmannPolynomial(self.table, self.masks, self.coeffs * c, _normalized=True)

    def __rmul__(self, other):
        return self * other

    def __truediv__(self, c):
        return self * (1.0 / complex(c))

    def max_abs_diff(self, other: "GrassmannPolynomial") -> float:
        diff = self - other
        return float(np.abs(diff.coeffs).max()) if len(diff) else 0.0

    def allclose(self, other: "GrassmannPolynomial", tol: float = 1e-10) -> bool:
        return self.max_abs_diff(other) <= tol

    def __repr__(self) -> str:
        return f"GrassmannPolynomial({len(self)} terms over {self.table.size} generators)"

    def dump(self) -> str:
        """Lines ``coefficient<TAB>generator-list`` sorted lexicographically."""
        lines = []
        for m, c in zip(self.masks, self.coeffs):
            gens = [self.table.label(b) for b in range(self.table.size) if (int(m) >> b) & 1]
            lines.append(f"{c.real:+.12e}{c.imag:+.12e}j\t{' '.join(gens) if gens else '1'}")
        return "\n".join(sorted(lines))


def gp_product(a: GrassmannPolynomial, b: GrassmannPolynomial) -> GrassmannPolynomial:
    a._same(b)
    nbits = a.table.size
    if len(a) == 0 or len(b) == 0:
        return GrassmannPolynomial.zero(a.table)
    parity = _prefix_parity(a.masks, nbits)
    chunk = max(1, _PAIR_CHUNK // len(b))
    out_m, out_c = [], []
    for start in range(0, len(a), chunk):
        am = a.masks[start:start + chunk]
        ac = a.coeffs[start:start + chunk]
        ap = parity[start:start + chunk]
        ii, jj = np.nonzero((am[:, None] & b.masks[None, :]) == 0)
        if ii.size == 0:
            continue
        bm = b.masks[jj]
        sign = 1.0 - 2.0 * (popcount(bm & ap[ii]) & 1)
        out_m.append(am[ii] | bm)
        out_c.append(ac[ii] * b.coeffs[jj] * sign)
    if not out_m:
        return GrassmannPolynomial.zero(a.table)
    return GrassmannPolynomial(a.table, np.concatenate(out_m), np.concatenate(out_c))


def _nilpotent_series(nil: GrassmannPolynomial, weights: Iterable[complex]) -> GrassmannPolynomial:
    """``sum_k weights[k] nil^k`` for ``k >= 1``, stopping once the power vanishes."""
    out = GrassmannPolynomial.zero(nil.table)
    power = GrassmannPolynomial.one(nil.table)
    for w in weights:
        power = power * nil
        if len(power) == 0:
            break
        out = out + power * w
    return out


def gp_exp(f: GrassmannPolynomial) -> GrassmannPolynomial:
    c = f.constant_term
    nil = f.without_constant()
    n = f.table.size
    series = _nilpotent_series(nil, (1.0 / math.factorial(k) for k in range(1, n + 1)))
    return (series + 1.0) * np.exp(c)


def gp_log(f: GrassmannPolynomial) -> GrassmannPolynomial:
    c = f.constant_term
    if abs(c) < SINGULAR_LOG:
        raise SingularLogError(f"constant coefficient {c!r} is zero; the logarithm is undefined")
    nil = f.without_constant() / c
    n = f.table.size
    series = _nilpotent_series(nil, ((-1.0) ** (k + 1) / k for k in range(1, n + 1)))
    return series + np.log(c)


# ---------------------------------------------------------------- Pfaffians


def check_antisymmetric(A: np.ndarray, tol: float = ANTISYM_TOL) -> None:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise GrassmannError("covariance must be a square matrix")
    scale = max(1.0, float(np.abs(A).max()) if A.size else 0.0)
    err = float(np.abs(A + A.T).max()) if A.size else 0.0
    if err > tol * scale:
        raise GrassmannError(f"matrix is not antisymmetric (max |A + A^T| = {err:.3e})")


class _SubsetPfaffian:
    """Memoised Pfaffians of principal submatrices, indexed by bitmask."""

    def __init__(self, A: np.ndarray):
        self.A = np.asarray(A, dtype=np.complex128)
        self.memo: dict[int, complex] = {0: 1.0 + 0j}

    def __call__(self, mask: int) -> complex:
        memo = self.memo
        if mask in memo:
            return memo[mask]
        if bin(mask).count("1") % 2:
            memo[mask] = 0j
            return 0j
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        total = 0j
        sign = 1.0
        r = rest
        while r:
            j = (r & -r).bit_length() - 1
            r &= r - 1
            a = self.A[i, j]
            if a != 0:
                total += sign * a * self(rest & ~(1 << j))
            sign = -sign
        memo[mask] = total
        return total


def _pfaffian_elimination(A: np.ndarray) -> complex:
    """Skew-symmetric elimination with partial pivoting."""
    A = np.array(A, dtype=np.complex128)
    n = A.shape[0]
    pf = 1.0 + 0j
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(A[k + 1:, k])))
        if kp != k + 1:
            A[[k + 1, kp], :] = A[[kp, k + 1], :]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            pf = -pf
        if A[k + 1, k] == 0:
            return 0j
        pf *= A[k, k + 1]
        if k + 2 < n:
            tau = A[k, k + 2:] / A[k, k + 1]
            col = A[k + 2:, k + 1].copy()
            A[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return pf


def pfaffian(A) -> complex:
    A = np.asarray(A, dtype=np.complex128)
    check_antisymmetric(A)
    n = A.shape[0]
    if n % 2:
        return 0j
    if n == 0:
        return 1.0 + 0j
    if n <= 12:
        return _SubsetPfaffian(A)((1 << n) - 1)
    return _pfaffian_elimination(A)


# ---------------------------------------------------------- integration


def _family_layout(f: GrassmannPolynomial, family: str, C) -> tuple[int, int, np.ndarray]:
    off = f.table.offset(family)
    size = f.table.family_size(family)
    C = np.asarray(C, dtype=np.complex128)
    if C.shape != (size, size):
        raise GrassmannError(f"covariance shape {C.shape} does not match family {family!r} of size {size}")
    check_antisymmetric(C)
    return off, size, C


def gaussian_integral(f: GrassmannPolynomial, family: str, C) -> GrassmannPolynomial:
    """Integrate out ``family`` against the Gaussian measure with covariance ``C``."""
    off, size, C = _family_layout(f, family, C)
    if len(f) == 0:
        return f
    fmask = ((1 << size) - 1) << off
    fam = f.masks & fmask
    rest = f.masks & ~fmask
    keep = popcount(fam) % 2 == 0
    fam, rest, coeffs = fam[keep], rest[keep], f.coeffs[keep]
    swaps = np.zeros_like(fam)
    for p in range(off, off + size):
        below = rest & ((np.int64(1) << p) - 1)
        swaps += ((fam >> p) & 1) * popcount(below)
    sub = _SubsetPfaffian(C)
    local = fam >> off
    uniq, inv = np.unique(local, return_inverse=True)
    pfs = np.array([sub(int(u)) for u in uniq], dtype=np.complex128)
    vals = coeffs * pfs[inv] * (1.0 - 2.0 * (swaps & 1))
    return GrassmannPolynomial(f.table, rest, vals)


def contraction_operator(f: GrassmannPolynomial, family: str, C) -> GrassmannPolynomial:
    """Apply the second order operator that removes one pair ``family_i family_j`` (i < j) with weight ``C[i, j]``."""
    off, size, C = _family_layout(f, family, C)
    out_m, out_c = [], []
    masks, coeffs = f.masks, f.coeffs
    for i in range(size):
        bi = np.int64(1) << (off + i)
        has_i = (masks & bi) != 0
        if not has_i.any():
            continue
        for j in range(i + 1, size):
            if C[i, j] == 0:
                continue
            bj = np.int64(1) << (off + j)
            sel = has_i & ((masks & bj) != 0)
            if not sel.any():
                continue
            m = masks[sel]
            below = popcount(m & (bi - 1)) + popcount(m & (bj - 1)) - 1
            out_m.append(m ^ (bi | bj))
            out_c.append(coeffs[sel] * C[i, j] * (1.0 - 2.0 * (below & 1)))
    if not out_m:
        return GrassmannPolynomial.zero(f.table)
    return GrassmannPolynomial(f.table, np.concatenate(out_m), np.concatenate(out_c))


def _exp_operator(f: GrassmannPolynomial, family: str, C, sign: float) -> GrassmannPolynomial:
    out = f
    term = f
    for k in range(1, f.table.family_size(family) // 2 + 1):
        term = contraction_operator(term, family, C) * (sign / k)
        if len(term) == 0:
            break
        out = out + term
    return out


def wick_order(f: GrassmannPolynomial, family: str, C, direction: str = "forward") -> GrassmannPolynomial:
    """Wick ordering ``:f:_C`` (forward) or its inverse."""
    if direction not in ("forward", "inverse"):
        raise GrassmannError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    f.table.family_size(family)
    return _exp_operator(f, family, C, -1.0 if direction == "forward" else 1.0)


def gaussian_convolution(f: GrassmannPolynomial, family: str, C) -> GrassmannPolynomial:
    """``psi -> int f(psi + zeta) dmu_C(zeta)`` computed as ``exp(Delta_C / 2) f`` acting on ``family``."""
    return _exp_operator(f, family, C, 1.0)


# ---------------------------------------------------------- substitutions


def _group_sign(masks: np.ndarray, src: int, nbits: int) -> np.ndarray:
    """Parity of moving the generators in ``src`` to the front, keeping their order."""
    rest = masks & ~np.int64(src)
    swaps = np.zeros_like(masks)
    for p in range(nbits):
        if (src >> p) & 1:
            swaps += ((masks >> p) & 1) * popcount(rest & ((np.int64(1) << p) - 1))
    return 1.0 - 2.0 * (swaps & 1)


def substitute(f: GrassmannPolynomial, images: Mapping[int, GrassmannPolynomial]) -> GrassmannPolynomial:
    """Simultaneously replace generator ``bit`` by the odd polynomial ``images[bit]``.

    The images may mention any generator, including the substituted ones.
    """
    if not images:
        return f
    for img in images.values():
        f._same(img)
        if len(img) and not img.odd_part().allclose(img, 0.0):
            raise GrassmannError("substitution images must be odd")
    src = 0
    for bit in images:
        src |= 1 << bit
    src = np.int64(src)
    nbits = f.table.size
    group = f.masks & src
    rest = f.masks & ~src
    coeffs = f.coeffs * _group_sign(f.masks, int(src), nbits)
    cache: dict[int, GrassmannPolynomial] = {0: GrassmannPolynomial.one(f.table)}

    def image_of(g: int) -> GrassmannPolynomial:
        if g in cache:
            return cache[g]
        top = g.bit_length() - 1
        res = image_of(g & ~(1 << top)) * images[top]
        cache[g] = res
        return res

    out = GrassmannPolynomial.zero(f.table)
    uniq, inv = np.unique(group, return_inverse=True)
    for k, g in enumerate(uniq):
        sel = inv == k
        rest_poly = GrassmannPolynomial(f.table, rest[sel], coeffs[sel])
        out = out + image_of(int(g)) * rest_poly
    return out


def shift_family(f: GrassmannPolynomial, family: str, shift: Mapping[int, GrassmannPolynomial] | Sequence) -> GrassmannPolynomial:
    """Replace ``family_i`` by ``family_i + shift[i]``."""
    off = f.table.offset(family)
    images = {}
    for i in range(f.table.family_size(family)):
        add = shift[i]
        images[off + i] = GrassmannPolynomial.generator(f.table, family, i) + add
    return substitute(f, images)


def linear_images(table: GeneratorTable, target: str, M) -> list[GrassmannPolynomial]:
    """Rows of ``M`` as linear forms in ``target``: ``image_i = sum_j M[i, j] target_j``."""
    M = np.asarray(M, dtype=np.complex128)
    return [GrassmannPolynomial.linear(table, target, M[i]) for i in range(M.shape[0])]


def permute_generators(f: GrassmannPolynomial, perm: Sequence[int], factors: Sequence[complex] | None = None) -> GrassmannPolynomial:
    """Substitute generator ``b`` by ``factors[b] * generator perm[b]`` (a signed relabelling)."""
    nbits = f.table.size
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(nbits)):
        raise GrassmannError("perm must be a permutation of all generators")
    factors = np.ones(nbits, np.complex128) if factors is None else np.asarray(factors, np.complex128)
    masks, coeffs = f.masks, f.coeffs.copy()
    new = np.zeros_like(masks)
    for b in range(nbits):
        has = (masks >> b) & 1
        new |= has << perm[b]
        coeffs = np.where(has == 1, coeffs * factors[b], coeffs)
    inv = np.zeros_like(masks)
    for i in range(nbits):
        hi = (masks >> i) & 1
        for j in range(i + 1, nbits):
            if perm[i] > perm[j]:
                inv += hi & ((masks >> j) & 1)
    return GrassmannPolynomial(f.table, new, coeffs * (1.0 - 2.0 * (inv & 1)))


def derivation(f: GrassmannPolynomial, L: Mapping[int, Sequence[tuple[int, complex]]]) -> GrassmannPolynomial:
    """Apply the even derivation sending generator ``i`` to ``sum c_j generator_j`` for ``(j, c) in L[i]``."""
    out_m, out_c = [], []
    masks, coeffs = f.masks, f.coeffs
    for i, row in L.items():
        bi = np.int64(1) << i
        sel = (masks & bi) != 0
        if not sel.any():
            continue
        m = masks[sel]
        c = coeffs[sel]
        sign_i = popcount(m & (bi - 1))
        reduced = m ^ bi
        for j, cj in row:
            if cj == 0:
                continue
            bj = np.int64(1) << j
            ok = (reduced & bj) == 0
            if not ok.any():
                continue
            r = reduced[ok]
            s = sign_i[ok] + popcount(r & (bj - 1))
            out_m.append(r | bj)
            out_c.append(c[ok] * cj * (1.0 - 2.0 * (s & 1)))
    if not out_m:
        return GrassmannPolynomial.zero(f.table)
    return GrassmannPolynomial(f.table, np.concatenate(out_m), np.concatenate(out_c))


# ---------------------------------------------------------- kernels


def polynomial_to_kernels(f: GrassmannPolynomial, families: Sequence[str], weight: float = 1.0,
                          degrees: Iterable[tuple[int, ...]] | None = None) -> dict[tuple[int, ...], np.ndarray]:
    """Separately antisymmetric coefficient kernels.

    ``f = sum int K(x^1..; x^2..; ...) fam1(x^1)... fam2(x^2)...`` with the
    integral carrying ``weight`` per argument. Families must appear in ``f.table``
    order and cover every generator that occurs in ``f``.
    """
    table = f.table
    offs = [table.offset(fam) for fam in families]
    sizes = [table.family_size(fam) for fam in families]
    if offs != sorted(offs):
        raise GrassmannError("families must be listed in table order")
    covered = sum(table.family_mask(fam) for fam in families)
    if len(f) and np.any(f.masks & ~np.int64(covered)):
        raise GrassmannError("polynomial uses generators outside the listed families")
    fam_deg = np.stack([popcount(f.masks & np.int64(table.family_mask(fam))) for fam in families], axis=1) \
        if len(f) else np.zeros((0, len(families)), np.int64)
    wanted = None if degrees is None else {tuple(d) for d in degrees}
    out: dict[tuple[int, ...], np.ndarray] = {}
    for key in sorted({tuple(int(x) for x in row) for row in fam_deg}):
        if wanted is not None and key not in wanted:
            continue
        sel = np.all(fam_deg == np.array(key), axis=1)
        shape = tuple(s for s, k in zip(sizes, key) for _ in range(k))
        K = np.zeros(shape, np.complex128)
        norm = math.prod(math.factorial(k) for k in key) * weight ** sum(key)
        for m, c in zip(f.masks[sel], f.coeffs[sel]):
            idx = []
            for off, size in zip(offs, sizes):
                idx.extend(b - off for b in range(off, off + size) if (int(m) >> b) & 1)
            K[tuple(idx)] = c / norm
        out[key] = antisymmetrize_groups(K, key, fill_from_sorted=True)
    if wanted is not None:
        for key in wanted:
            if key not in out:
                out[key] = np.zeros(tuple(s for s, k in zip(sizes, key) for _ in range(k)), np.complex128)
    return out


def _perm_sign(p: Sequence[int]) -> int:
    p = list(p)
    sign = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def antisymmetrize_groups(K: np.ndarray, groups: Sequence[int], fill_from_sorted: bool = False) -> np.ndarray:
    """Antisymmetrise ``K`` separately over consecutive axis groups.

    With ``fill_from_sorted`` the input is assumed to hold values only on sorted
    index tuples and the result extends them with signs (no averaging).

    Uses ``sum_{S_k} sgn = (1 - sum_{i<k} (i k)) sum_{S_{k-1}} sgn``, so a group
    of ``k`` axes costs ``k(k-1)/2`` transposes instead of ``k!``.
    """
    out = np.asarray(K)
    start = 0
    for k in groups:
        for top in range(1, k):
            acc = out.copy()
            for i in range(top):
                acc = acc - np.swapaxes(out, start + i, start + top)
            out = acc
        if k > 1 and not fill_from_sorted:
            out = out / math.factorial(k)
        start += k
    return out


def kernels_to_polynomial(table: GeneratorTable, kernels: Mapping[tuple[int, ...], np.ndarray],
                          families: Sequence[str], weight: float = 1.0) -> GrassmannPolynomial:
    """Inverse of :func:`polynomial_to_kernels` for separately antisymmetric kernels."""
    offs = [table.offset(fam) for fam in families]
    masks, coeffs = [], []
    for key, K in kernels.items():
        K = np.asarray(K, dtype=np.complex128)
        if K.ndim == 0:
            masks.append(0)
            coeffs.append(complex(K))
            continue
        nz = np.argwhere(np.abs(K) > 0)
        for idx in nz:
            bits = []
            pos = 0
            for off, k in zip(offs, key):
                bits.extend(off + int(i) for i in idx[pos:pos + k])
                pos += k
            if len(set(bits)) != len(bits):
                continue
            order = sorted(range(len(bits)), key=lambda t: bits[t])
            sign = _perm_sign(order)
            m = 0
            for b in bits:
                m |= 1 << b
            masks.append(m)
            coeffs.append(sign * K[tuple(idx)] * weight ** sum(key))
    return GrassmannPolynomial(table, np.array(masks, np.int64), np.array(coeffs, np.complex128))


def ant_ext(f):
    """Antisymmetrise a kernel over its external (first ``m``) arguments."""
    m = f.m
    if m <= 1:
        return f
    vals = antisymmetrize_groups(np.asarray(f.values), [m])
    return replace(f, values=vals)


def contract_kernel(f, i: int, j: int, C) -> object:
    """Contract internal arguments ``i < j`` (1-based) of ``f`` against ``C``.

    Carries the prefactor ``(-1)^(j-i+1)`` and the measure weight of each
    integrated argument. For ``n = 2`` in partial momentum space the momentum
    conservation delta is divided out (lattice volume factor).
    """
    n = f.values.ndim - f.m
    if not (1 <= i < j <= n):
        raise GrassmannError(f"contraction indices ({i}, {j}) out of range for n = {n}")
    C = np.asarray(C, dtype=np.complex128)
    w = f.space_ref.weight
    ai, aj = f.m + i - 1, f.m + j - 1
    vals = np.moveaxis(np.asarray(f.values), (ai, aj), (-2, -1))
    res = np.einsum("...ab,ab->...", vals, C) * (w * w) * (-1) ** (j - i + 1)
    if n == 2 and f.space == "partial":
        res = res / f.space_ref.volume
    return replace(f, values=res)


def integral_bound_estimate(C, m_max: int, samples: int, seed: int = 0) -> float:
    """Lower estimate of ``sup |Pf(C restricted)|^(1/m)`` over index tuples of length ``m <= m_max``.

    Every order ``m`` draws from its own stream seeded by ``(seed, m)``, so a
    larger ``samples`` or ``m_max`` only ever adds candidates.
    """
    C = np.asarray(C, dtype=np.complex128)
    check_antisymmetric(C)
    if m_max < 2 or m_max % 2:
        raise GrassmannError("m_max must be even and at least 2")
    n = C.shape[0]
    best = 0.0
    if n >= 2:
        best = float(np.abs(C).max()) ** 0.5
    for m in range(4, m_max + 1, 2):
        if m > n:
            break
        rng = np.random.default_rng([seed, m])
        for _ in range(samples):
            idx = np.sort(rng.choice(n, size=m, replace=False))
            val = abs(pfaffian(C[np.ix_(idx, idx)]))
            best = max(best, val ** (1.0 / m))
    return best
