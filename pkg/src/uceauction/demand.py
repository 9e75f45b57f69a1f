"""Agent-side demand oracle under envelope or linear prices.

Computes utility-maximizing bundles, the min/max demanded sizes (kappa), and
the per-economy over/under-demand diagnosis.  Ties are resolved by exact
rational equality only; there is no tolerance parameter anywhere.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

from .model import (
    Bundle,
    MultiUnitValuation,
    ProductMixValuation,
    Valuation,
    economy_members,
)
from .pricing import EnvelopePriceState, rho

log = logging.getLogger(__name__)

DEFAULT_ENUMERATION_BOUND = 10**6

BALANCED = "balanced"
OVER_DEMAND = "over"
UNDER_DEMAND = "under"

# Multi-unit maximizer-size contiguity is verified, not assumed; violations
# are recorded here (and logged) instead of silently accepted.
contiguity_counterexamples = []


@dataclass(frozen=True)
class DemandReport:
    agent: int
    max_utility: Fraction
    kappa_min: int
    kappa_max: int
    maximizers: tuple  # bundles; full set when exhaustive, ray points otherwise
    exhaustive: bool

    def largest_bundle(self) -> Bundle:
        return max(self.maximizers, key=lambda k: (k.size, k.ks, k.kw))


def _report_from_candidates(agent, scored, exhaustive):
    best = max(u for _, u in scored)
    maximizers = tuple(sorted(k for k, u in scored if u == best))
    sizes = [k.size for k in maximizers]
    return DemandReport(
        agent=agent,
        max_utility=best,
        kappa_min=min(sizes),
        kappa_max=max(sizes),
        maximizers=maximizers,
        exhaustive=exhaustive,
    )


def _check_contiguity(agent, report, price_fn, valuation):
    sizes = sorted(k.size for k in report.maximizers)
    contiguous = all(b - a <= 1 for a, b in zip(sizes, sizes[1:]))
    if not contiguous:
        record = {
            "agent": agent,
            "sizes": sizes,
            "marginals": [str(m) for m in valuation.marginals],
            "prices": [str(price_fn(Bundle(0, s))) for s in range(valuation.capacity + 1)],
        }
        contiguity_counterexamples.append(record)
        log.warning("multi-unit demand sizes not contiguous: %s", record)


def demand_report_for_prices(
    valuation: Valuation,
    agent: int,
    price_fn,
    enumeration_bound: int = DEFAULT_ENUMERATION_BOUND,
) -> DemandReport:
    """Demand report against an arbitrary quoted price function (bias included).

    Product-mix agents whose consumption set exceeds the enumeration bound are
    handled by the ray shortcut: utilities are convex along line segments, so
    the two axis rays carry a maximizer of every demanded size.
    """
    if isinstance(valuation, MultiUnitValuation):
        scored = [(k, valuation.value(k) - price_fn(k)) for k in valuation.bundles()]
        report = _report_from_candidates(agent, scored, exhaustive=True)
        _check_contiguity(agent, report, price_fn, valuation)
        return report

    if valuation.bundle_count() <= enumeration_bound:
        scored = [(k, valuation.value(k) - price_fn(k)) for k in valuation.bundles()]
        return _report_from_candidates(agent, scored, exhaustive=True)
    return _ray_shortcut(valuation, agent, price_fn)


def _ray_shortcut(valuation: ProductMixValuation, agent: int, price_fn) -> DemandReport:
    """Evaluate the two axis rays of the consumption-set triangle only."""
    scored = [(Bundle(0, s), valuation.value(Bundle(0, s)) - price_fn(Bundle(0, s)))
              for s in range(valuation.gamma + 1)]
    if valuation.v_w > 0:
        scored += [(Bundle(t, 0), valuation.value(Bundle(t, 0)) - price_fn(Bundle(t, 0)))
                   for t in range(1, valuation.gamma + 1)]
    return _report_from_candidates(agent, scored, exhaustive=False)


def demand_set(
    valuation: Valuation,
    state: EnvelopePriceState,
    agent: int,
    enumeration_bound: int = DEFAULT_ENUMERATION_BOUND,
) -> DemandReport:
    """Demand report of one agent against the current envelope prices."""
    return demand_report_for_prices(
        valuation, agent, lambda k: rho(state, agent, k), enumeration_bound
    )


def linear_price_fn(p: Fraction, delta: Fraction):
    """Quoted uniform prices: p per weak unit, p + delta per strong unit."""
    return lambda k: k.kw * p + k.ks * (p + delta)


def demand_at_linear_price(
    valuation: Valuation,
    agent: int,
    p: Fraction,
    delta: Fraction,
    enumeration_bound: int = DEFAULT_ENUMERATION_BOUND,
) -> DemandReport:
    return demand_report_for_prices(
        valuation, agent, linear_price_fn(p, delta), enumeration_bound
    )


def diagnose(reports: dict, K: int, j: int, n: int) -> str:
    """Balance test for economy j given one report per agent."""
    members = economy_members(j, n)
    low = sum(reports[i].kappa_min for i in members)
    high = sum(reports[i].kappa_max for i in members)
    if low > K:
        return OVER_DEMAND
    if high < K:
        return UNDER_DEMAND
    return BALANCED


def kappa_sums(reports: dict, j: int, n: int):
    members = economy_members(j, n)
    return (
        sum(reports[i].kappa_min for i in members),
        sum(reports[i].kappa_max for i in members),
    )
