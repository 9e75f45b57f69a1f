import random
from fractions import Fraction

from uceauction import demand
from uceauction.demand import (
    BALANCED,
    OVER_DEMAND,
    UNDER_DEMAND,
    demand_at_linear_price,
    demand_report_for_prices,
    demand_set,
    diagnose,
    kappa_sums,
    linear_price_fn,
)
from uceauction.model import Bundle, MultiUnitValuation, ProductMixValuation
from uceauction.pricing import initial_state

F = Fraction


def test_multi_unit_demand_at_zero_prices(table1):
    state = initial_state(3, F(0))
    r = demand_set(table1.valuation(1), state, 1)
    assert r.max_utility == F(19)
    assert (r.kappa_min, r.kappa_max) == (4, 4)
    assert r.exhaustive


def test_linear_demand_marginal_cutoff():
    v = MultiUnitValuation((F(8), F(5), F(4), F(2)))
    r = demand_at_linear_price(v, 1, F(4), F(0))
    # The fourth unit is worth 2 < 4; the third exactly 4, so it is optional.
    assert (r.kappa_min, r.kappa_max) == (2, 3)
    assert r.max_utility == F(5)


def test_demand_ties_report_every_maximizer():
    v = MultiUnitValuation((F(4), F(4)))
    r = demand_at_linear_price(v, 1, F(4), F(0))
    assert set(r.maximizers) == {Bundle(0, 0), Bundle(0, 1), Bundle(0, 2)}
    assert r.max_utility == 0


def test_product_mix_demand_prefers_better_ratio():
    v = ProductMixValuation(v_w=F(3), v_s=F(5), gamma=2)
    r = demand_at_linear_price(v, 1, F(2), F(0))
    # Margins: weak 1, strong 3; both positive, so fill up with strong units.
    assert r.maximizers == (Bundle(0, 2),)
    r2 = demand_at_linear_price(v, 1, F(2), F(1))
    # With bias 1 the strong margin drops to 2, still above the weak margin.
    assert r2.maximizers == (Bundle(0, 2),)
    r3 = demand_at_linear_price(v, 1, F(2), F(2))
    # Equal margins of 1: every full bundle maximizes.
    assert set(r3.maximizers) == {Bundle(2, 0), Bundle(1, 1), Bundle(0, 2)}


def test_ray_shortcut_matches_exhaustive_on_kappa():
    rng = random.Random(7)
    for _ in range(200):
        gamma = rng.randint(1, 12)
        v_w = F(rng.randint(0, 6))
        v = ProductMixValuation(v_w=v_w, v_s=v_w + F(rng.randint(1, 6)), gamma=gamma)
        p = F(rng.randint(0, 8))
        delta = F(rng.randint(0, 2))
        fn = linear_price_fn(p, delta)
        full = demand_report_for_prices(v, 1, fn)
        fast = demand._ray_shortcut(v, 1, fn)
        assert fast.max_utility == full.max_utility
        assert (fast.kappa_min, fast.kappa_max) == (full.kappa_min, full.kappa_max)


def test_enumeration_bound_switches_to_rays():
    v = ProductMixValuation(v_w=F(1), v_s=F(2), gamma=40)
    r = demand_report_for_prices(v, 1, linear_price_fn(F(1), F(0)), enumeration_bound=10)
    assert not r.exhaustive
    assert r.kappa_max == 40


def test_contiguity_monitor_records_gap():
    before = len(demand.contiguity_counterexamples)
    v = MultiUnitValuation((F(7), F(3), F(2)))
    prices = {0: F(0), 1: F(4), 2: F(8), 3: F(9)}
    r = demand_report_for_prices(v, 9, lambda k: prices[k.ks])
    assert sorted(k.size for k in r.maximizers) == [1, 3]
    assert len(demand.contiguity_counterexamples) == before + 1
    assert demand.contiguity_counterexamples[-1]["agent"] == 9


def test_diagnose_thresholds(table1):
    state = initial_state(3, F(0))
    reports = {i: demand_set(table1.valuation(i), state, i) for i in (1, 2, 3)}
    assert kappa_sums(reports, 0, 3) == (9, 9)
    assert diagnose(reports, 4, 0, 3) == OVER_DEMAND
    assert diagnose(reports, 9, 0, 3) == BALANCED
    assert diagnose(reports, 12, 0, 3) == UNDER_DEMAND
    # Marginal economy 1 drops agent 1's four units.
    assert kappa_sums(reports, 1, 3) == (5, 5)
