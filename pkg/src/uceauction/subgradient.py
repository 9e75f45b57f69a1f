"""Fixed-step subgradient auction over explicit per-bundle prices.

Unlike the envelope engine, this method keeps a full price table rho[(i, k)]
as Lagrange multipliers and is not guaranteed to reach the exact optimum; it
tracks the best dual objective seen over a fixed iteration budget.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .model import Instance, InstanceValidationError, economy_members, format_rational, visible_economies

ZERO = Fraction(0)

MAX_TABLE_BUNDLES = 10**5


@dataclass
class SubgradientState:
    rho: dict  # (agent, Bundle) -> Fraction
    p: list  # economy -> Fraction
    alpha: dict  # (agent, economy) -> Fraction, recomputed each iteration
    step: Fraction


@dataclass
class SubgradientRun:
    log: list = field(default_factory=list)
    best_objective: Fraction | None = None
    best_iteration: int = 0
    state: SubgradientState | None = None


def _lex_argmax(candidates):
    """Maximize by value; break ties on lexicographically smallest (kw, ks).

    Returns None when the best value is negative: the relaxed problem then
    sets the whole selection block to zero, and picking a bundle anyway would
    not be a valid subgradient.
    """
    best_value = max(v for _, v in candidates)
    if best_value < 0:
        return None
    return min(k for k, v in candidates if v == best_value)


def _recompute_alpha(instance, rho, p):
    alpha = {}
    for i in range(1, instance.n + 1):
        bundles = list(instance.valuation(i).bundles())
        for j in visible_economies(i, instance.n):
            alpha[(i, j)] = max(rho[(i, k)] - k.size * p[j] for k in bundles)
    return alpha


def _dual_objective(instance, rho, p, alpha):
    """Feasible UCE dual objective: pi and alpha clamped at zero, prices at p.

    The clamps keep the evaluation inside the dual's feasible region, so the
    reported value is always a valid bound on the optimum.
    """
    n = instance.n
    pi = {}
    for i in range(1, n + 1):
        v = instance.valuation(i)
        pi[i] = max(
            max(v.value(k, instance.delta) - rho[(i, k)] for k in v.bundles()),
            ZERO,
        )
    total = ZERO
    for j in range(0, n + 1):
        members = economy_members(j, n)
        total += sum((pi[i] for i in members), ZERO)
        total += instance.K * max(p[j], ZERO)
        total += sum((max(alpha[(i, j)], ZERO) for i in members), ZERO)
    return total


def run_subgradient(
    instance: Instance,
    step: Fraction,
    iterations: int = 200,
    lp_optimum: Fraction | None = None,
) -> SubgradientRun:
    """Iterate the multiplier updates for a fixed budget, tracking the best
    dual objective seen.  Bundle prices start at size times the initial price."""
    total_bundles = sum(v.bundle_count() for v in instance.agents)
    if total_bundles > MAX_TABLE_BUNDLES:
        raise InstanceValidationError(
            "instance has %d bundles; the per-bundle price table is capped at %d"
            % (total_bundles, MAX_TABLE_BUNDLES)
        )

    n = instance.n
    step = Fraction(step)
    rho = {
        (i, k): k.size * instance.p_init
        for i in range(1, n + 1)
        for k in instance.valuation(i).bundles()
    }
    p = [Fraction(instance.p_init)] * (n + 1)
    run = SubgradientRun()

    for it in range(1, iterations + 1):
        # Agent-side selection: one demanded bundle per agent, reused for
        # every economy the agent participates in.
        z_pick = {}
        for i in range(1, n + 1):
            v = instance.valuation(i)
            z_pick[i] = _lex_argmax(
                [(k, v.value(k, instance.delta) - rho[(i, k)]) for k in v.bundles()]
            )
        # Seller-side selection per (economy, agent), from prices alone.
        beta_pick = {}
        for j in range(0, n + 1):
            for i in economy_members(j, n):
                beta_pick[(j, i)] = _lex_argmax(
                    [(k, rho[(i, k)] - k.size * p[j]) for k in instance.valuation(i).bundles()]
                )

        max_component = ZERO
        new_p = list(p)
        for j in range(0, n + 1):
            grad = (
                sum(
                    beta_pick[(j, i)].size
                    for i in economy_members(j, n)
                    if beta_pick[(j, i)] is not None
                )
                - instance.K
            )
            max_component = max(max_component, abs(Fraction(grad)))
            # Projected step: unit prices stay in the dual's feasible region.
            new_p[j] = max(p[j] + step * grad, ZERO)
        new_rho = dict(rho)
        for i in range(1, n + 1):
            for k in instance.valuation(i).bundles():
                z_count = n if k == z_pick[i] else 0
                b_count = sum(
                    1 for j in visible_economies(i, n) if beta_pick[(j, i)] == k
                )
                grad = z_count - b_count
                if grad:
                    max_component = max(max_component, abs(Fraction(grad)))
                    new_rho[(i, k)] = rho[(i, k)] + step * grad
        rho, p = new_rho, new_p

        alpha = _recompute_alpha(instance, rho, p)
        objective = _dual_objective(instance, rho, p, alpha)
        if run.best_objective is None or objective < run.best_objective:
            run.best_objective = objective
            run.best_iteration = it
        entry = {
            "iteration": it,
            "objective": format_rational(objective),
            "best_objective": format_rational(run.best_objective),
            "max_subgradient": format_rational(max_component),
        }
        if lp_optimum is not None:
            entry["gap"] = format_rational(run.best_objective - lp_optimum)
        run.log.append(entry)

    run.state = SubgradientState(rho=rho, p=p, alpha=_recompute_alpha(instance, rho, p), step=step)
    return run
