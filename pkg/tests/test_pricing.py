from fractions import Fraction

from uceauction.model import Bundle
from uceauction.pricing import (
    apply_over_demand_update,
    apply_under_demand_update,
    envelope_argmin,
    initial_state,
    line_price,
    normalize,
    normalize_all,
    rho,
    rho_adjusted,
    state_to_dict,
    uce_dual_objective,
)

F = Fraction


def test_initial_state_shape():
    s = initial_state(3, F(0))
    assert s.dimension() == 3 * 3 + 3 + 1
    assert s.p == (F(0),) * 4
    assert all(v == 0 for v in s.alpha.values())
    assert (1, 1) not in s.alpha


def test_rho_is_lower_envelope():
    s = initial_state(2, F(0))
    s = s.replace(p=(F(3), F(5), F(1)), alpha={
        (1, 0): F(0), (1, 2): F(4),
        (2, 0): F(1), (2, 1): F(0),
    })
    k = Bundle(0, 2)
    # Agent 1 sees lines through economies 0 and 2.
    assert line_price(s, 1, 0, k) == 2 * 3 + 0
    assert line_price(s, 1, 2, k) == 2 * 1 + 4
    assert rho(s, 1, k) == F(6)
    assert envelope_argmin(s, 1, k) == (0, 2)
    # A bigger bundle tips the envelope to the cheaper unit price.
    assert rho(s, 1, Bundle(0, 5)) == 5 * 1 + 4
    assert envelope_argmin(s, 1, Bundle(0, 5)) == (2,)


def test_delta_raises_strong_unit_quote_only():
    s = initial_state(1, F(2), delta=F(1))
    assert rho(s, 1, Bundle(1, 1)) == 2 + (2 + 1)
    assert rho_adjusted(s, 1, Bundle(1, 1)) == 4
    assert rho_adjusted(s, 1, Bundle(2, 0)) == rho(s, 1, Bundle(2, 0))


def test_over_demand_update_moves_one_line():
    s = initial_state(2, F(0))
    kappa = {1: 2, 2: 1}
    t = apply_over_demand_update(s, 0, kappa, F(1))
    assert t.p == (F(1), F(0), F(0))
    # Offsets shift on every other line so quotes through them keep pace.
    assert t.alpha[(1, 2)] == F(2)
    assert t.alpha[(2, 1)] == F(1)
    # Lines through the updated economy itself keep their offsets.
    assert t.alpha[(1, 0)] == F(0)
    assert t.alpha[(2, 0)] == F(0)


def test_under_demand_update_is_the_mirror():
    s = initial_state(2, F(3))
    kappa = {1: 2, 2: 1}
    up = apply_over_demand_update(s, 1, kappa, F(1))
    down = apply_under_demand_update(up, 1, kappa, F(1))
    assert down.p == s.p
    assert down.alpha == s.alpha


def test_normalize_zeroes_cheapest_offset():
    s = initial_state(2, F(0))
    s = s.replace(alpha={(1, 0): F(3), (1, 2): F(5), (2, 0): F(0), (2, 1): F(2)})
    t, shift = normalize(s, 1)
    assert shift == F(3)
    assert min(t.alpha[(1, j)] for j in (0, 2)) == 0
    assert t.alpha[(2, 0)] == F(0)
    t2, shifts = normalize_all(s)
    assert shifts == {1: F(3), 2: F(0)}
    assert min(t2.alpha[(2, j)] for j in (0, 1)) == 0
    # The zero bundle is free after normalization.
    assert rho(t2, 1, Bundle(0, 0)) == 0


def test_dual_objective_at_table1_terminal(table1):
    """The normalized terminal state of the worked example attains the known
    optimum 91; normalization itself never changes quoted price differences."""
    from uceauction.auction import run_uce_auction

    out, _ = run_uce_auction(table1)
    s = out.final_state
    assert s.p == (F(4), F(1), F(2), F(3))
    normalized, _ = normalize_all(s)
    assert uce_dual_objective(table1, normalized) == F(91)
    for i in (1, 2, 3):
        for k in table1.valuation(i).bundles():
            gap = rho(s, i, k) - rho(s, i, Bundle(0, 0))
            assert rho(normalized, i, k) - rho(normalized, i, Bundle(0, 0)) == gap


def test_state_serialization_round_trip():
    s = initial_state(2, F(1))
    s = apply_over_demand_update(s, 0, {1: 1, 2: 1}, F(1))
    doc = state_to_dict(s)
    assert doc["p"] == ["2", "1", "1"]
    # Row of agent i has a null at its own marginal economy.
    assert doc["alpha"][0][1] is None
    assert doc["alpha"][1][2] is None
