"""Hypothesis strategies for small exact instances."""
from __future__ import annotations

from fractions import Fraction

from hypothesis import strategies as st

from capmatch.core import Instance, PositionAuctionInstance


def rationals(lo: int = 1, hi: int = 10, max_den: int = 4, allow_zero: bool = False):
    base = st.builds(
        lambda num, den: Fraction(num, den),
        st.integers(lo * max_den, hi * max_den),
        st.integers(1, max_den),
    ).filter(lambda x: lo <= x <= hi)
    return st.one_of(st.just(Fraction(0)), base) if allow_zero else base


@st.composite
def general_instances(draw, max_agents: int = 6, max_positions: int = 4):
    n = draw(st.integers(1, max_agents))
    k = draw(st.integers(1, max_positions))
    sizes = draw(st.lists(rationals(1, 5), min_size=n, max_size=n))
    values = draw(
        st.lists(st.lists(rationals(1, 10, allow_zero=True), min_size=k, max_size=k), min_size=n, max_size=n)
    )
    capacity = draw(rationals(1, int(sum(sizes)) + 1))
    return Instance(capacity, tuple(sizes), tuple(tuple(r) for r in values))


@st.composite
def position_instances(draw, max_agents: int = 5, max_positions: int = 3):
    n = draw(st.integers(1, max_agents))
    k = draw(st.integers(1, max_positions))
    ctrs = sorted(draw(st.sets(st.integers(1, 4 * k), min_size=k, max_size=k)), reverse=True)
    values = draw(st.lists(rationals(1, 10), min_size=n, max_size=n))
    sizes = draw(st.lists(rationals(1, 5), min_size=n, max_size=n))
    capacity = draw(rationals(1, int(sum(sizes)) + 1))
    return PositionAuctionInstance(tuple(values), tuple(sizes), tuple(Fraction(c, 4 * k) for c in ctrs), capacity)
