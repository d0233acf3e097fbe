import pytest
from hypothesis import given, strategies as st

from lospre.cost import (CostVec, INFINITY, SATURATION_BOUND, ZERO, format_cost,
                         pack_cost, packed_add, packed_add_saturating, parse_cost,
                         unpack_cost)

finite = st.builds(CostVec, st.integers(-10**9, 10**9), st.integers(-10**9, 10**9))
costs = st.one_of(finite, st.just(INFINITY))


def test_componentwise_addition():
    assert CostVec(1, 0) + CostVec(0, 1) == CostVec(1, 1)


def test_zero_is_identity():
    for x in (CostVec(3, -4), CostVec(0, 0), INFINITY):
        assert x + ZERO == x


def test_infinity_absorbs():
    assert INFINITY + CostVec(5, 3) == INFINITY
    assert CostVec(5, 3) + INFINITY == INFINITY


def test_lexicographic_order():
    assert CostVec(1, 9) < CostVec(2, 0)
    assert CostVec(1, 0) < CostVec(1, 1)
    assert not INFINITY < INFINITY
    assert CostVec(10**15, 10**15) < INFINITY


def test_saturation_instead_of_overflow():
    big = CostVec(SATURATION_BOUND - 1, 0)
    assert (big + CostVec(1000, 0)).primary == SATURATION_BOUND
    small = CostVec(-SATURATION_BOUND, 0)
    assert (small + CostVec(-5, 0)).primary == -SATURATION_BOUND


@given(costs, costs, costs)
def test_addition_associative_commutative(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert a + b == b + a


@given(costs, costs)
def test_total_order(a, b):
    assert (a < b) + (b < a) + (a == b) == 1


@given(finite, finite, costs)
def test_monotonicity(a, b, c):
    # below the saturation bound, strict order survives addition of any
    # finite value and collapses only at infinity
    if a < b:
        assert a + c < b + c or c == INFINITY


@given(costs)
def test_cost_text_roundtrip(a):
    assert parse_cost(format_cost(a)) == a


def test_parse_cost_formats():
    assert parse_cost("inf") == INFINITY
    assert parse_cost("[3,-2]") == CostVec(3, -2)
    assert parse_cost(" [ 3 , -2 ] ".replace(" ", "")) == CostVec(3, -2)
    with pytest.raises(ValueError):
        parse_cost("(3,2)")
    with pytest.raises(ValueError):
        parse_cost("[3]")


@given(finite, finite)
def test_packed_matches_costvec(a, b):
    assert unpack_cost(pack_cost(a)) == a
    assert unpack_cost(packed_add(pack_cost(a), pack_cost(b))) == a + b
    assert (pack_cost(a) < pack_cost(b)) == (a < b)


@given(costs, costs)
def test_packed_saturating_matches_costvec(a, b):
    assert unpack_cost(packed_add_saturating(pack_cost(a), pack_cost(b))) == a + b
