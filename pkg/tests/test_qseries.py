"""Ring laws, exp/log inversion and the product/sum expansion helpers."""

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from potts_sd.errors import TruncationError
from potts_sd.qseries import (
    LaurentPolyS,
    TruncatedSeries,
    expand_product,
    geometric_inverse,
    lambert_sum,
    log1p_series,
)

ORDER = 20


def random_series(draw, min_deg=0, max_terms=6):
    terms = draw(
        st.lists(
            st.tuples(
                st.integers(-9, 9),
                st.integers(min_deg, ORDER),
                st.integers(-3, 3),
            ),
            min_size=0,
            max_size=max_terms,
        )
    )
    return TruncatedSeries.from_terms(terms, order=ORDER)


series_strategy = st.builds(
    lambda terms: TruncatedSeries.from_terms(terms, order=ORDER),
    st.lists(
        st.tuples(st.integers(-9, 9), st.integers(0, ORDER), st.integers(-3, 3)),
        min_size=0,
        max_size=6,
    ),
)

positive_series_strategy = st.builds(
    lambda terms: TruncatedSeries.from_terms(terms, order=ORDER),
    st.lists(
        st.tuples(st.integers(-9, 9), st.integers(1, ORDER), st.integers(-3, 3)),
        min_size=0,
        max_size=6,
    ),
)


def test_geometric_identity():
    one = TruncatedSeries.one(ORDER)
    t = TruncatedSeries.term(1, 1, 0, order=ORDER)
    geo = geometric_inverse(1, 1, 0, ORDER)
    assert (one - t) * geo == one


def test_monomial_multiplication():
    a = TruncatedSeries.term(1, 2, 1, order=ORDER)  # s t^2
    b = TruncatedSeries.term(1, 3, -1, order=ORDER)  # t^3 / s
    assert a * b == TruncatedSeries.term(1, 5, 0, order=ORDER)


@settings(max_examples=60, deadline=None)
@given(series_strategy, series_strategy, series_strategy)
def test_mul_associative(a, b, c):
    assert (a * b) * c == a * (b * c)


@settings(max_examples=60, deadline=None)
@given(series_strategy, series_strategy, series_strategy)
def test_distributive(a, b, c):
    assert a * (b + c) == a * b + a * c


@settings(max_examples=60, deadline=None)
@given(series_strategy, series_strategy)
def test_mul_commutative(a, b):
    assert a * b == b * a


@settings(max_examples=40, deadline=None)
@given(positive_series_strategy)
def test_exp_log_round_trip(a):
    assert log1p_series(a.exp() - 1) == a.truncate(min(a.order, ORDER))


@settings(max_examples=40, deadline=None)
@given(positive_series_strategy)
def test_log_exp_round_trip(a):
    one = TruncatedSeries.one(ORDER)
    assert log1p_series(a).exp() == one + a


@settings(max_examples=40, deadline=None)
@given(series_strategy, series_strategy)
def test_s_inversion_is_ring_map(a, b):
    assert (a * b).subst_s_inv() == a.subst_s_inv() * b.subst_s_inv()
    assert (a + b).subst_s_inv() == a.subst_s_inv() + b.subst_s_inv()


def test_log_of_geometric():
    # log(1/(1 - t^n)) = sum_k t^{nk}/k
    n = 3
    geo = geometric_inverse(1, n, 0, ORDER)
    expected = TruncatedSeries.from_terms(
        [(Fraction(1, k), n * k, 0) for k in range(1, ORDER // n + 1)], order=ORDER
    )
    assert geo.log() == expected


def test_reciprocal_needs_monomial_lead():
    a = TruncatedSeries.from_terms([(1, 0, 0), (1, 0, 1)], order=ORDER)  # 1 + s
    with pytest.raises(TruncationError):
        a.reciprocal()


def test_reciprocal_of_shifted_monomial_lead():
    # leading term -s t^{-2}: invertible in the Laurent ring
    a = TruncatedSeries.from_terms([(-1, -2, 1), (1, 0, 0), (2, 3, -1)], order=ORDER)
    assert a * a.reciprocal() == TruncatedSeries.one(a.order - 4)


def test_log_requires_unit_constant():
    with pytest.raises(TruncationError):
        TruncatedSeries.from_terms([(2, 0, 0), (1, 1, 0)], order=ORDER).log()
    with pytest.raises(TruncationError):
        TruncatedSeries.from_terms([(1, 0, 0), (1, 0, 1)], order=ORDER).exp()


def test_expand_product_odd_q_powers():
    # prod_k (1 - q^{2k+1}) through q^4: 1 - q - q^3 + q^4
    got = expand_product([(1, 0, 4, 8, 1)], 16)
    expected = TruncatedSeries.from_terms([(1, 0, 0), (-1, 4, 0), (-1, 12, 0), (1, 16, 0)], order=16)
    assert got == expected


def test_expand_product_empty():
    assert expand_product([], 12) == TruncatedSeries.one(12)


def test_expand_product_rejects_nontruncating():
    with pytest.raises(TruncationError):
        expand_product([(1, 0, 0, 4, 1)], 12)
    with pytest.raises(TruncationError):
        expand_product([(1, 0, 4, 0, 1)], 12)


def test_corner_product_log_equals_sum():
    # log prod (1-q^{4k-3})^{-1}(1-q^{4k-2})^{-4}(1-q^{4k-1})^{-1}
    #   = sum_n (q^n + 4 q^{2n} + q^{3n})/(n (1 - q^{4n}))
    order = 32
    prod = expand_product([(1, 0, 4, 16, -1), (1, 0, 8, 16, -4), (1, 0, 12, 16, -1)], order)
    lam = lambert_sum([(1, 4, 0), (4, 8, 0), (1, 12, 0)], 16, -1, order)
    assert prod.log() == lam


def test_lambert_zero_numerator():
    assert lambert_sum([(0, 2, 1)], 4, 1, 12).is_zero()
    assert lambert_sum([], 4, 1, 12).is_zero()


def test_lambert_rejects_nonpositive_degree():
    with pytest.raises(TruncationError):
        lambert_sum([(1, 0, 1)], 4, 1, 12)
    with pytest.raises(TruncationError):
        lambert_sum([(1, -2, 1)], 4, 1, 12)


def test_lambert_commutes_with_s_inversion():
    # s -> 1/s on the result equals negating every w-power in the pattern
    numer = [(1, 2, 1), (-1, 6, -1)]
    flipped = [(1, 2, -1), (-1, 6, 1)]
    a = lambert_sum(numer, 8, 1, ORDER)
    assert a.subst_s_inv() == lambert_sum(flipped, 8, 1, ORDER)


def test_leading_coefficient_of_surface_sum():
    # n = 1 term of the vertical-surface sum starts at s * t^2
    from potts_sd.closedform import f_surface_v_series

    c = f_surface_v_series(8).coeff(2)
    assert c == LaurentPolyS({1: 1})


def test_leading_coefficient_of_horizontal_surface_sum():
    # onset at t^2 with coefficient 1/s (rotation image of the vertical one)
    from potts_sd.closedform import f_surface_h_series

    c = f_surface_h_series(8).coeff(2)
    assert c == LaurentPolyS({-1: 1})


def test_serialization_round_trip():
    a = TruncatedSeries.from_terms(
        [(Fraction(3, 7), 2, 1), (-2, 5, -4), (Fraction(-11, 3), 0, 0)], order=9
    )
    assert TruncatedSeries.from_json(a.to_json()) == a
    d = a.to_json_dict()
    assert d["var"] == "q^(1/4)"
    assert all(isinstance(t["s_terms"][0]["num"], str) for t in d["terms"])


def test_truncation_tracking_through_mul():
    # multiplying by a series of minimal degree d extends validity by d
    a = TruncatedSeries.from_terms([(1, 2, 0)], order=10)
    b = TruncatedSeries.from_terms([(1, 3, 0)], order=10)
    assert (a * b).order == 12


def test_division():
    a = TruncatedSeries.from_terms([(1, 0, 0), (5, 1, 1)], order=ORDER)
    assert (a / a) == TruncatedSeries.one(ORDER)
