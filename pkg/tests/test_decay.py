import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fermirg.decay import (INF, DecaySeries, DecaySeriesError, NormParams, ds_add, ds_close, ds_geometric, ds_leq,
                           ds_max, ds_mul, e0, multi_indices)

SHAPE = (1, 2, 2)  # one spatial direction, r0 = r = 2


def series(vals, shape=SHAPE):
    return DecaySeries(*shape, tuple(vals))


def random_series(rng, scale=1.0, shape=SHAPE, inf_prob=0.0):
    n = len(multi_indices(*shape))
    vals = [INF if rng.random() < inf_prob else float(scale * rng.random()) for _ in range(n)]
    return series(vals, shape)


finite_series = st.lists(st.floats(0, 10), min_size=9, max_size=9).map(lambda v: series(v))


def test_index_layout():
    idx = multi_indices(1, 2, 2)
    assert idx[0] == (0, 0)
    assert len(idx) == 9
    assert [sum(m) for m in idx] == sorted(sum(m) for m in idx)
    assert len(multi_indices(2, 2, 2)) == 3 * 6


def test_add_examples():
    c0 = DecaySeries.c0(*SHAPE)
    two = c0 + c0
    assert all(v == 2.0 for v in two.values)
    assert two[(3, 0)] is INF  # untracked indices stay infinite
    X = random_series(np.random.default_rng(0))
    assert ds_add(X, DecaySeries.zero(*SHAPE)) == X
    with_inf = DecaySeries.from_mapping({(1, 0): INF}, *SHAPE)
    assert (with_inf + X)[(1, 0)] is INF


def test_mul_examples():
    a = DecaySeries.monomial((1, 0), 1.0, *SHAPE)
    b = DecaySeries.monomial((0, 1), 1.0, *SHAPE)
    ab = ds_mul(a, b)
    assert ab[(1, 1)] == 1.0
    assert sum(v for v in ab.values) == 1.0
    X = random_series(np.random.default_rng(1))
    assert ds_mul(X, DecaySeries.zero(*SHAPE)) == DecaySeries.zero(*SHAPE)
    c0 = DecaySeries.c0(*SHAPE)
    assert (c0 * c0).const == 1.0
    # beyond truncation nothing is produced
    assert ds_mul(DecaySeries.monomial((2, 0), 1.0, *SHAPE), a)[(3, 0)] is INF


def test_zero_times_infinity_is_zero():
    inf = DecaySeries.infinite(*SHAPE)
    assert ds_mul(inf, DecaySeries.zero(*SHAPE)) == DecaySeries.zero(*SHAPE)
    assert ds_mul(inf, DecaySeries.monomial((1, 1), 2.0, *SHAPE))[(1, 1)] is INF


@settings(max_examples=60, deadline=None)
@given(finite_series, finite_series, finite_series)
def test_semiring_laws(a, b, c):
    assert ds_close(a * b, b * a)
    assert ds_close((a * b) * c, a * (b * c), 1e-10)
    assert ds_close(a * (b + c), a * b + a * c, 1e-10)
    assert ds_leq(a, a + b)
    assert ds_leq(ds_max(a, b), a + b)


def test_geometric_examples():
    c0 = DecaySeries.c0(*SHAPE)
    assert ds_geometric(c0, DecaySeries.zero(*SHAPE)) == c0
    x = 0.3
    E = ds_geometric(c0, DecaySeries.constant(x, *SHAPE))
    assert all(v == pytest.approx(1 / (1 - x)) for v in E.values)
    with pytest.raises(DecaySeriesError):
        ds_geometric(c0, DecaySeries.constant(1.0, *SHAPE))


@pytest.mark.parametrize("seed", range(5))
def test_geometric_against_truncated_sum(seed):
    rng = np.random.default_rng(seed)
    X = random_series(rng, 0.2)
    c0 = DecaySeries.c0(*SHAPE)
    # the explicit sum sum_{n <= N} X^n c0 converges geometrically in the constant coefficient
    total, term = c0, c0
    for _ in range(200):
        term = X * term
        total = total + term
    assert ds_close(ds_geometric(c0, X), total, 1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_e0_dominates_c0_and_solves_fixed_point(seed):
    rng = np.random.default_rng(seed)
    X = random_series(rng, 0.9)
    E = e0(X)
    c0 = DecaySeries.c0(*SHAPE)
    assert ds_leq(c0, E)
    assert ds_close(E, c0 + X * E, 1e-9)


def test_leq_examples():
    X = random_series(np.random.default_rng(3))
    assert ds_leq(X, X)
    assert ds_leq(X, DecaySeries.infinite(*SHAPE))
    assert not ds_leq(DecaySeries.infinite(*SHAPE), X)


def test_validation():
    with pytest.raises(DecaySeriesError):
        series([0.0] * 8)
    with pytest.raises(DecaySeriesError):
        series([-1.0] + [0.0] * 8)
    with pytest.raises(DecaySeriesError):
        series([math.nan] + [0.0] * 8)
    with pytest.raises(DecaySeriesError):
        DecaySeries.from_mapping({(3, 0): 1.0}, *SHAPE)
    with pytest.raises(DecaySeriesError):
        DecaySeries.c0(*SHAPE) + DecaySeries.c0(2, 2, 2)
    with pytest.raises(DecaySeriesError):
        DecaySeries.c0(*SHAPE).scale(-1)


def test_records_are_serialisable():
    import json
    X = DecaySeries.from_mapping({(0, 0): 1.5, (1, 1): INF}, *SHAPE)
    recs = X.to_records()
    json.dumps(recs)
    assert recs[0] == (0, [0], 1.5)
    assert (1, [1], "inf") in recs


def test_norm_params_rho_lookup():
    p = NormParams(rho={(0, 2): 1.0})
    assert p.rho_of(0, 2) == 1.0
    with pytest.raises(DecaySeriesError):
        p.rho_of(1, 1)
