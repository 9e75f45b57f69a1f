"""Lower-envelope price state: per-economy unit prices plus per-agent offsets.

The quoted price of a bundle to agent i is the minimum, over every economy
that agent i participates in, of an affine line: kw*p + ks*(p+delta) + alpha.
Price updates follow the closed-form improving direction of the primal-dual
method (unit price of one economy moves by epsilon, every other economy's
offsets move by epsilon times the agent's reported kappa).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .model import Bundle, Instance, economy_members, visible_economies

ZERO = Fraction(0)


@dataclass(frozen=True)
class EnvelopePriceState:
    """Immutable price state: p indexed by economy 0..n, alpha[(i, j)] offsets.

    alpha is defined exactly for pairs with j != i; an agent never sees its
    own marginal economy.  Total dimensionality is n^2 + n + 1 scalars.
    """

    n: int
    p: tuple  # length n+1, index = economy
    alpha: dict  # (agent i, economy j) -> Fraction, j != i
    delta: Fraction = ZERO

    def dimension(self) -> int:
        return self.n * self.n + self.n + 1

    def replace(self, p=None, alpha=None) -> "EnvelopePriceState":
        return EnvelopePriceState(
            n=self.n,
            p=tuple(p if p is not None else self.p),
            alpha=dict(alpha if alpha is not None else self.alpha),
            delta=self.delta,
        )


def initial_state(n: int, p_init: Fraction, delta: Fraction = ZERO) -> EnvelopePriceState:
    alpha = {(i, j): ZERO for i in range(1, n + 1) for j in visible_economies(i, n)}
    return EnvelopePriceState(n=n, p=tuple([Fraction(p_init)] * (n + 1)), alpha=alpha, delta=delta)


def line_price(state: EnvelopePriceState, i: int, j: int, k: Bundle) -> Fraction:
    """Quoted price of bundle k on the affine line of economy j."""
    return k.kw * state.p[j] + k.ks * (state.p[j] + state.delta) + state.alpha[(i, j)]


def rho(state: EnvelopePriceState, i: int, k: Bundle) -> Fraction:
    """Quoted lower-envelope price of bundle k for agent i."""
    return min(line_price(state, i, j, k) for j in visible_economies(i, state.n))


def rho_adjusted(state: EnvelopePriceState, i: int, k: Bundle) -> Fraction:
    """Envelope price net of the strong-item bias: min over j of |k|*p + alpha.

    This is the price in the bias-adjusted economy, where values are
    v(k) - delta*ks; utilities agree with the quoted convention exactly.
    """
    return rho(state, i, k) - state.delta * k.ks


def envelope_argmin(state: EnvelopePriceState, i: int, k: Bundle) -> tuple:
    """All economies attaining the envelope minimum for (i, k), ties included."""
    prices = [(j, line_price(state, i, j, k)) for j in visible_economies(i, state.n)]
    best = min(price for _, price in prices)
    return tuple(j for j, price in prices if price == best)


def apply_over_demand_update(
    state: EnvelopePriceState, j: int, kappa_min: dict, epsilon: Fraction
) -> EnvelopePriceState:
    """Raise economy j's unit price by epsilon; for every other economy, raise
    each member agent's offset by epsilon * kappa_min[i]."""
    return _apply_update(state, j, kappa_min, Fraction(epsilon))


def apply_under_demand_update(
    state: EnvelopePriceState, j: int, kappa_max: dict, epsilon: Fraction
) -> EnvelopePriceState:
    """Mirror of the over-demand update with signs flipped (kappa_max driven)."""
    return _apply_update(state, j, kappa_max, -Fraction(epsilon))


def _apply_update(state, j, kappa, step):
    p = list(state.p)
    p[j] += step
    alpha = dict(state.alpha)
    for ell in range(0, state.n + 1):
        if ell == j:
            continue
        for i in economy_members(ell, state.n):
            alpha[(i, ell)] += step * kappa[i]
    return state.replace(p=p, alpha=alpha)


def normalize(state: EnvelopePriceState, i: int):
    """Subtract min_j alpha[(i, j)] from agent i's offsets.

    Returns (new state, shift).  Afterwards the zero bundle has price 0 for
    agent i; all pairwise price differences are preserved exactly.
    """
    shift = min(state.alpha[(i, j)] for j in visible_economies(i, state.n))
    if shift == 0:
        return state, ZERO
    alpha = dict(state.alpha)
    for j in visible_economies(i, state.n):
        alpha[(i, j)] -= shift
    return state.replace(alpha=alpha), shift


def normalize_all(state: EnvelopePriceState):
    """Normalize every agent; returns (state, {agent: shift})."""
    shifts = {}
    for i in range(1, state.n + 1):
        state, shifts[i] = normalize(state, i)
    return state, shifts


def uce_dual_objective(instance: Instance, state: EnvelopePriceState) -> Fraction:
    """Objective of the UCE dual program evaluated at this price state.

    pi is taken at its minimal feasible level max(0, max_k v_adj(k) - rho_adj(k)),
    which only depends on the agent (the envelope is economy-independent), so
    the value is a valid bound regardless of normalization history.
    """
    n = instance.n
    pi = {}
    for i in range(1, n + 1):
        v = instance.valuation(i)
        pi[i] = max(
            max(v.value(k, instance.delta) - rho_adjusted(state, i, k) for k in v.bundles()),
            ZERO,
        )
    total = ZERO
    for j in range(0, n + 1):
        members = economy_members(j, n)
        total += sum((pi[i] for i in members), ZERO)
        total += instance.K * state.p[j]
        total += sum((state.alpha[(i, j)] for i in members), ZERO)
    return total


def state_to_dict(state: EnvelopePriceState) -> dict:
    """Trace serialization: p as a length n+1 array, alpha as n rows of n+1
    entries with null at the agent's own marginal economy."""
    from .model import format_rational

    rows = []
    for i in range(1, state.n + 1):
        row = []
        for j in range(0, state.n + 1):
            row.append(None if j == i else format_rational(state.alpha[(i, j)]))
        rows.append(row)
    return {
        "p": [format_rational(q) for q in state.p],
        "alpha": rows,
        "delta": format_rational(state.delta),
    }
