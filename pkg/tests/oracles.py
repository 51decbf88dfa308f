"""Slow reference implementations used only by the tests.

Nothing here imports the package's algebra. Monomials are sorted tuples of
generator indices, polynomials are plain dicts, and signs come from counting
inversions. The Gaussian measure is realised as the differential operator
exp(1/2 sum_ij C_ij d_j d_i) evaluated at zero, which never forms a Pfaffian.
"""

import itertools
import math

import numpy as np


def _sort_sign(seq):
    """Sign of the permutation sorting ``seq`` and the sorted tuple (None if a generator repeats)."""
    if len(set(seq)) != len(seq):
        return 0, None
    inv = sum(1 for a, b in itertools.combinations(seq, 2) if a > b)
    return (-1) ** inv, tuple(sorted(seq))


def clean(p, tol=0.0):
    return {k: v for k, v in p.items() if abs(v) > tol}


def add(p, q, c=1.0):
    out = dict(p)
    for k, v in q.items():
        out[k] = out.get(k, 0) + c * v
    return out


def mul(p, q):
    out = {}
    for a, x in p.items():
        for b, y in q.items():
            s, key = _sort_sign(a + b)
            if s:
                out[key] = out.get(key, 0) + s * x * y
    return out


def scale(p, c):
    return {k: c * v for k, v in p.items()}


def exp(p, order=None):
    """exp(p) by the Taylor series; the nilpotent part terminates it."""
    c0 = p.get((), 0)
    n = {k: v for k, v in p.items() if k}
    out = {(): 1.0}
    term = {(): 1.0}
    top = order or len(_gens(n)) + 1
    for k in range(1, top + 1):
        term = scale(mul(term, n), 1.0 / k)
        if not clean(term):
            break
        out = add(out, term)
    return scale(out, np.exp(c0))


def _gens(p):
    return sorted({g for k in p for g in k})


def deriv(p, i):
    """Left derivative with respect to generator ``i``."""
    out = {}
    for k, v in p.items():
        if i in k:
            pos = k.index(i)
            key = k[:pos] + k[pos + 1:]
            out[key] = out.get(key, 0) + (-1) ** pos * v
    return out


def set_zero(p, gens):
    gens = set(gens)
    return {k: v for k, v in p.items() if not gens.intersection(k)}


def gaussian(p, gens, C):
    """Integrate the generators ``gens`` (in this order) against covariance ``C``."""
    gens = list(gens)
    n = len(gens)

    def lap(f):
        out = {}
        for a in range(n):
            for b in range(n):
                if C[a][b] != 0:
                    out = add(out, deriv(deriv(f, gens[a]), gens[b]), 0.5 * C[a][b])
        return out

    total = dict(p)
    term = dict(p)
    for k in range(1, n // 2 + 1):
        term = scale(lap(term), 1.0 / k)
        total = add(total, term)
    return clean(set_zero(total, gens), 0.0)


def pfaffian(A):
    """Pfaffian as the signed permutation sum divided by 2^n n!."""
    A = np.asarray(A)
    m = A.shape[0]
    if m % 2:
        return 0.0
    n = m // 2
    tot = 0.0
    for perm in itertools.permutations(range(m)):
        inv = sum(1 for a, b in itertools.combinations(perm, 2) if a > b)
        prod = 1.0
        for i in range(n):
            prod = prod * A[perm[2 * i], perm[2 * i + 1]]
        tot += (-1) ** inv * prod
    return tot / (2 ** n * math.factorial(n))


def antisymmetrize(K, axes):
    """Signed average of ``K`` over all permutations of ``axes``."""
    K = np.asarray(K)
    out = np.zeros_like(K)
    axes = list(axes)
    perms = list(itertools.permutations(range(len(axes))))
    for perm in perms:
        inv = sum(1 for a, b in itertools.combinations(perm, 2) if a > b)
        order = list(range(K.ndim))
        for slot, p in enumerate(perm):
            order[axes[slot]] = axes[p]
        out = out + (-1) ** inv * np.transpose(K, order)
    return out / len(perms)


def from_package(poly):
    """Convert a package polynomial (bitmask keyed) to the dict representation."""
    out = {}
    for mask, c in poly.to_dict().items():
        out[tuple(i for i in range(mask.bit_length()) if (mask >> i) & 1)] = complex(c)
    return out


def max_diff(p, q):
    keys = set(p) | set(q)
    return max((abs(p.get(k, 0) - q.get(k, 0)) for k in keys), default=0.0)
