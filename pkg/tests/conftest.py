import random
from fractions import Fraction

import pytest

from uceauction.model import Instance, MultiUnitValuation, ProductMixValuation


@pytest.fixture
def table1():
    """Three-agent, four-unit worked example used throughout the tests."""
    return Instance(
        agents=(
            MultiUnitValuation(tuple(Fraction(m) for m in (8, 5, 4, 2))),
            MultiUnitValuation(tuple(Fraction(m) for m in (7, 3, 2, 0))),
            MultiUnitValuation(tuple(Fraction(m) for m in (6, 1, 0, 0))),
        ),
        K=4,
    )


@pytest.fixture
def table1_single(table1):
    return Instance(
        agents=table1.agents,
        K=table1.K,
        delta=table1.delta,
        epsilon=table1.epsilon,
        p_init=table1.p_init,
        direction=table1.direction,
        update_mode="single",
    )


@pytest.fixture
def pm_small():
    """Two weak/strong bidders plus a strong-only one, six units of supply."""
    return Instance(
        agents=(
            ProductMixValuation(v_w=Fraction(3), v_s=Fraction(5), gamma=3),
            ProductMixValuation(v_w=Fraction(2), v_s=Fraction(6), gamma=2),
            ProductMixValuation(v_w=Fraction(0), v_s=Fraction(4), gamma=3),
        ),
        K=6,
    )


@pytest.fixture
def rng():
    return random.Random(20260823)
