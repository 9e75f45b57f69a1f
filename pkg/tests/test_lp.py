from fractions import Fraction

import pytest

from uceauction import lp, oracle
from uceauction.auction import run_uce_auction
from uceauction.demand import demand_set
from uceauction.model import Bundle, Instance, MultiUnitValuation
from uceauction.pricing import initial_state

F = Fraction


def _rho_from_solution(solution, prefix="rho_i"):
    """Turn rho_i{i}_w{a}s{b} solution entries into a price function."""
    table = {}
    for name, value in solution.items():
        if not name.startswith(prefix):
            continue
        agent_part, bundle_part = name[len(prefix):].split("_", 1)
        kw, ks = bundle_part[1:].split("s")
        table[(int(agent_part), Bundle(int(kw), int(ks)))] = value
    return lambda i, k: table[(i, k)]


def test_simplex_small_max():
    prog = lp.LinearProgram(name="toy", sense="max")
    prog.add_variable("x")
    prog.add_variable("y")
    prog.objective = {"x": F(3), "y": F(2)}
    prog.add_constraint("c1", {"x": F(1), "y": F(1)}, "<=", F(4))
    prog.add_constraint("c2", {"x": F(1)}, "<=", F(2))
    res = lp.solve(prog)
    assert res.status == "optimal"
    assert res.objective == F(10)
    assert res.solution["x"] == F(2) and res.solution["y"] == F(2)


def test_simplex_free_variable_and_fractions():
    prog = lp.LinearProgram(name="toy2", sense="min")
    prog.add_variable("x", free=True)
    prog.objective = {"x": F(1)}
    prog.add_constraint("lb", {"x": F(3)}, ">=", F(-2))
    res = lp.solve(prog)
    assert res.status == "optimal"
    assert res.objective == F(-2, 3)


def test_simplex_infeasible_and_unbounded():
    bad = lp.LinearProgram(name="bad", sense="max")
    bad.add_variable("x")
    bad.add_constraint("c1", {"x": F(1)}, "<=", F(-1))
    assert lp.solve(bad).status == "infeasible"

    unb = lp.LinearProgram(name="unb", sense="max")
    unb.add_variable("x")
    unb.objective = {"x": F(1)}
    unb.add_constraint("c1", {"x": F(-1)}, "<=", F(5))
    assert lp.solve(unb).status == "unbounded"


def test_ce_primal_per_economy_optima(table1):
    expected = {0: F(26), 1: F(18), 2: F(23), 3: F(24)}
    for j, want in expected.items():
        res = lp.solve(lp.build_ce_primal(table1, j))
        assert res.status == "optimal"
        assert res.objective == want


def test_ce_dual_strong_duality(table1):
    primal = lp.solve(lp.build_ce_primal(table1, 0)).objective
    dual = lp.solve(lp.build_ce_dual(table1, 0)).objective
    assert primal == dual == F(26)


def test_universal_primal_equals_economy_sum(table1):
    total = lp.solve(lp.build_uce_primal(table1)).objective
    split = sum(
        (lp.solve(lp.build_ce_primal(table1, j)).objective for j in range(0, 4)),
        F(0),
    )
    assert total == split == F(91)


def test_tied_allocation_variables_do_not_change_optimum(table1):
    tied = lp.solve(lp.build_uce_primal(table1, tie_allocation_vars=True))
    assert tied.status == "optimal"
    assert tied.objective == F(91)


def test_universal_dual_prices_certify(table1):
    res = lp.solve(lp.build_uce_dual(table1))
    assert res.objective == F(91)
    price_fn = _rho_from_solution(res.solution)
    cert = oracle.certify_uce(table1, price_fn)
    assert cert.passed
    payments = oracle.vcg_from_uce(table1, price_fn)
    assert payments == {1: F(5), 2: F(4), 3: F(4)}


def _reports_at(inst, state):
    return {i: demand_set(inst.valuation(i), state, i) for i in range(1, inst.n + 1)}


def test_restricted_dual_negative_at_start(table1):
    state = initial_state(3, F(0))
    reports = _reports_at(table1, state)
    prog = lp.build_restricted_dual(table1, state, reports)
    res = lp.solve(prog)
    assert res.status == "optimal"
    assert res.objective == F(-35, 6)


def test_over_demand_direction_is_feasible_and_improving(table1):
    state = initial_state(3, F(0))
    reports = _reports_at(table1, state)
    prog = lp.build_restricted_dual(table1, state, reports)
    point = lp.over_demand_direction(table1, reports, 0)
    assert lp.check_feasible(prog, point)
    assert lp.objective_value(prog, point) == F(-5, 4)


def test_under_demand_direction_is_feasible_and_improving(table1):
    inst = Instance(agents=table1.agents, K=4, p_init=F(9), direction="descending")
    state = initial_state(3, F(9))
    reports = _reports_at(inst, state)
    # Everyone sits on the zero bundle at the opening price.
    assert all(r.kappa_max == 0 for r in reports.values())
    prog = lp.build_restricted_dual(inst, state, reports)
    point = lp.under_demand_direction(inst, reports, 0)
    assert lp.check_feasible(prog, point)
    assert lp.objective_value(prog, point) < 0


def test_restricted_dual_zero_at_terminal(table1):
    out, _ = run_uce_auction(table1)
    state = out.final_state
    reports = _reports_at(table1, state)
    res = lp.solve(lp.build_restricted_dual(table1, state, reports))
    assert res.status == "optimal"
    assert res.objective == F(0)


def test_render_coefficient_decimal_versus_fraction():
    assert lp.render_coefficient(F(3)) == "3"
    assert lp.render_coefficient(F(1, 4)) == "0.25"
    assert lp.render_coefficient(F(-1, 8)) == "-0.125"
    assert lp.render_coefficient(F(1, 3)) == "1/3"
    assert lp.render_coefficient(F(7, 50)) == "0.14"


def test_emit_parse_round_trip(table1):
    programs = [
        lp.build_ce_primal(table1, 0),
        lp.build_ce_dual(table1, 2),
        lp.build_uce_dual(table1),
    ]
    state = initial_state(3, F(0))
    programs.append(lp.build_restricted_dual(table1, state, _reports_at(table1, state)))
    for prog in programs:
        text = lp.emit_lp_text(prog)
        back = lp.parse_lp_text(text)
        assert back.canonical() == prog.canonical()
        assert lp.emit_lp_text(back) == text


def test_parse_rejects_garbage():
    with pytest.raises(lp.LpFormatError):
        lp.parse_lp_text("hello world\n")


def test_general_instance_pair_solves_and_certifies():
    bundles = ("none", "a", "b", "ab")
    values = {
        (1, "a"): F(6), (1, "b"): F(5), (1, "ab"): F(9),
        (2, "a"): F(5), (2, "b"): F(4), (2, "ab"): F(7),
    }
    allocations = (
        ("none", "none"),
        ("a", "none"), ("b", "none"), ("ab", "none"),
        ("none", "a"), ("none", "b"), ("none", "ab"),
        ("a", "b"), ("b", "a"),
    )
    general = lp.GeneralInstance(
        n=2, bundles=bundles, empty="none", values=values, allocations=allocations
    )
    primal, dual = lp.build_general_uce_lps(general)
    primal_res = lp.solve(primal)
    dual_res = lp.solve(dual)
    # V(N) + V(-1) + V(-2) = 10 + 7 + 9.
    assert primal_res.objective == F(26)
    assert dual_res.objective == F(26)
    table = {
        (i, x): dual_res.solution.get("rho_i%d_x%s" % (i, x), F(0))
        for i in (1, 2)
        for x in bundles
    }
    verdicts = oracle.certify_general(general, lambda i, x: table[(i, x)])
    assert all(v["supported"] for v in verdicts.values())


def test_two_item_encoding_matches_bundle_spaces(table1):
    general = lp.encode_two_item_instance(table1)
    assert general.n == 3
    assert general.empty == "w0s0"
    # Every feasible allocation respects the supply of four units.
    def size(label):
        kw, ks = label[1:].split("s")
        return int(kw) + int(ks)

    for y in general.allocations:
        assert sum(size(x) for x in y) <= 4
    # Values carry over from the original valuations.
    assert general.value(1, "w0s2") == F(13)
    assert general.value(2, "w0s0") == F(0)


def test_variable_cap_raises():
    inst = Instance(
        agents=(MultiUnitValuation(tuple(F(10 - t) for t in range(10))),),
        K=10,
    )
    with pytest.raises(lp.InstanceTooLarge):
        lp.build_uce_dual(inst, variable_cap=3)
