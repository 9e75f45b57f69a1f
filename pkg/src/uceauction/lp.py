"""Exact linear programs: builders, a rational two-phase simplex, text I/O.

Builders emit the competitive-equilibrium primal/dual, their universal
(all-economies) counterparts, the restricted dual that drives price updates,
and the fully general explicit-allocation forms.  The solver is a desk-scale
verifier: exact Fraction pivots, least-index anti-cycling rule.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .model import Bundle, Instance, economy_members, visible_economies
from .pricing import EnvelopePriceState, envelope_argmin

ZERO = Fraction(0)
ONE = Fraction(1)

DEFAULT_VARIABLE_CAP = 10**5
GENERAL_SIZE_CAP = 10**4


class InstanceTooLarge(ValueError):
    """The requested program exceeds the configured size cap."""


class IterationLimit(RuntimeError):
    """Simplex hit the safety cap; indicates a pivot-rule bug."""


class LpFormatError(ValueError):
    """Malformed LP text."""


@dataclass(frozen=True)
class Variable:
    name: str
    free: bool = False  # default sign constraint is >= 0


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: dict  # var name -> Fraction
    rel: str  # one of <=, =, >=
    rhs: Fraction


@dataclass
class LinearProgram:
    name: str
    sense: str  # max or min
    variables: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    annotations: dict = field(default_factory=dict)

    def add_variable(self, name, free=False, annotation=None):
        self.variables.append(Variable(name, free))
        self.annotations[name] = annotation or name
        return name

    def add_constraint(self, name, coeffs, rel, rhs):
        assert rel in ("<=", "=", ">=")
        declared = {v.name for v in self.variables}
        unknown = set(coeffs) - declared
        if unknown:
            raise ValueError("constraint %s references undeclared variables %s" % (name, unknown))
        self.constraints.append(
            Constraint(name, {k: Fraction(v) for k, v in coeffs.items() if v != 0}, rel, Fraction(rhs))
        )

    def canonical(self):
        """Structure used for round-trip equality checks."""
        return (
            self.sense,
            tuple(sorted((n, c) for n, c in self.objective.items() if c != 0)),
            tuple(
                (tuple(sorted(c.coeffs.items())), c.rel, c.rhs) for c in self.constraints
            ),
            frozenset(v.name for v in self.variables if v.free),
            frozenset(v.name for v in self.variables),
        )


@dataclass
class SolveResult:
    status: str  # optimal | infeasible | unbounded
    objective: Fraction | None = None
    solution: dict | None = None


def check_feasible(lp: LinearProgram, point: dict) -> bool:
    """Exact feasibility check of a full assignment (missing vars read as 0)."""
    for v in lp.variables:
        if not v.free and point.get(v.name, ZERO) < 0:
            return False
    for c in lp.constraints:
        lhs = sum((coef * point.get(var, ZERO) for var, coef in c.coeffs.items()), ZERO)
        if c.rel == "<=" and lhs > c.rhs:
            return False
        if c.rel == ">=" and lhs < c.rhs:
            return False
        if c.rel == "=" and lhs != c.rhs:
            return False
    return True


def objective_value(lp: LinearProgram, point: dict) -> Fraction:
    return sum((coef * point.get(var, ZERO) for var, coef in lp.objective.items()), ZERO)


# ---------------------------------------------------------------------------
# Two-phase simplex with the least-index (Bland) anti-cycling rule.
# ---------------------------------------------------------------------------

def solve(lp: LinearProgram, iteration_limit: int = 200000) -> SolveResult:
    """Exact optimum and a vertex solution, or infeasible/unbounded status."""
    columns = []  # (var name, sign) pairs; free vars split into +/- parts
    col_of = {}
    for v in lp.variables:
        col_of[v.name] = len(columns)
        columns.append((v.name, 1))
        if v.free:
            columns.append((v.name, -1))

    minimize = lp.sense == "min"
    c = [ZERO] * len(columns)
    for name, coef in lp.objective.items():
        coef = coef if minimize else -coef
        idx = col_of[name]
        c[idx] += coef
        if columns[idx + 1 : idx + 2] and columns[idx + 1][0] == name:
            c[idx + 1] -= coef

    rows = []
    rhs = []
    rels = []
    for con in lp.constraints:
        row = [ZERO] * len(columns)
        for name, coef in con.coeffs.items():
            idx = col_of[name]
            row[idx] += coef
            if columns[idx + 1 : idx + 2] and columns[idx + 1][0] == name:
                row[idx + 1] -= coef
        b = con.rhs
        rel = con.rel
        if b < 0:
            row = [-x for x in row]
            b = -b
            rel = {"<=": ">=", ">=": "<=", "=": "="}[rel]
        rows.append(row)
        rhs.append(b)
        rels.append(rel)

    n_struct = len(columns)
    m = len(rows)
    # Slack/surplus columns, then artificials.
    artificial_cols = []
    basis = []
    for r in range(m):
        for rr in range(m):
            rows[rr].append(ONE if (rr == r and rels[r] == "<=") else (-ONE if (rr == r and rels[r] == ">=") else ZERO))
    for r in range(m):
        if rels[r] == "<=":
            basis.append(n_struct + r)
        else:
            col = len(rows[0])
            for rr in range(m):
                rows[rr].append(ONE if rr == r else ZERO)
            artificial_cols.append(col)
            basis.append(col)

    width = len(rows[0])
    tableau = [rows[r] + [rhs[r]] for r in range(m)]

    def reduced_cost_row(cost):
        z = list(cost) + [ZERO] * (width - len(cost)) + [ZERO]
        for r, bvar in enumerate(basis):
            coef = z[bvar]
            if coef != 0:
                trow = tableau[r]
                for jj in range(width + 1):
                    z[jj] -= coef * trow[jj]
        return z

    def pivot(r, col):
        trow = tableau[r]
        piv = trow[col]
        inv = ONE / piv
        tableau[r] = [x * inv for x in trow]
        trow = tableau[r]
        for rr in range(m):
            if rr == r:
                continue
            factor = tableau[rr][col]
            if factor != 0:
                other = tableau[rr]
                tableau[rr] = [a - factor * b for a, b in zip(other, trow)]
        basis[r] = col

    def run_phase(z, allowed, budget):
        iterations = 0
        while True:
            iterations += 1
            if iterations > budget:
                raise IterationLimit("simplex exceeded %d iterations" % budget)
            entering = None
            for jj in range(width):
                if allowed[jj] and z[jj] < 0:
                    entering = jj
                    break
            if entering is None:
                return z
            leaving = None
            best_ratio = None
            for r in range(m):
                a = tableau[r][entering]
                if a > 0:
                    ratio = tableau[r][width] / a
                    if (
                        best_ratio is None
                        or ratio < best_ratio
                        or (ratio == best_ratio and basis[r] < basis[leaving])
                    ):
                        best_ratio = ratio
                        leaving = r
            if leaving is None:
                return None  # unbounded
            pivot(leaving, entering)
            factor = z[entering]
            trow = tableau[leaving]
            z = [a - factor * b for a, b in zip(z, trow + [])]

    allowed = [True] * width

    if artificial_cols:
        phase1_cost = [ZERO] * width
        for col in artificial_cols:
            phase1_cost[col] = ONE
        z = reduced_cost_row(phase1_cost)
        z = run_phase(z, allowed, iteration_limit)
        if z is None:
            raise IterationLimit("phase 1 reported unbounded; malformed program")
        if -z[width] > 0:
            return SolveResult(status="infeasible")
        # Drive artificials out of the basis where possible.
        art_set = set(artificial_cols)
        for r in range(m):
            if basis[r] in art_set:
                target = None
                for jj in range(width):
                    if jj not in art_set and tableau[r][jj] != 0:
                        target = jj
                        break
                if target is not None:
                    pivot(r, target)
        for col in artificial_cols:
            allowed[col] = False

    z = reduced_cost_row(c)
    for col in artificial_cols:
        z[col] = ZERO if basis.count(col) else z[col]
    z = run_phase(z, allowed, iteration_limit)
    if z is None:
        return SolveResult(status="unbounded")

    values = [ZERO] * width
    for r, bvar in enumerate(basis):
        values[bvar] = tableau[r][width]
    solution = {}
    for idx, (name, sign) in enumerate(columns):
        solution[name] = solution.get(name, ZERO) + sign * values[idx]
    obj = objective_value(lp, solution)
    return SolveResult(status="optimal", objective=obj, solution=solution)


# ---------------------------------------------------------------------------
# Builders for the two-item instance programs.
# ---------------------------------------------------------------------------

def _bundle_tag(k: Bundle) -> str:
    return "w%ds%d" % (k.kw, k.ks)


def _check_variable_cap(count, cap, what):
    if count > cap:
        raise InstanceTooLarge("%s needs %d variables, cap is %d" % (what, count, cap))


def build_ce_primal(instance: Instance, economy: int, variable_cap: int = DEFAULT_VARIABLE_CAP) -> LinearProgram:
    """Efficient-allocation program of one economy over bias-adjusted values."""
    members = economy_members(economy, instance.n)
    count = sum(instance.valuation(i).bundle_count() for i in members)
    _check_variable_cap(count, variable_cap, "allocation primal")
    lp = LinearProgram(name="ce_primal_e%d" % economy, sense="max")
    for i in members:
        for k in instance.valuation(i).bundles():
            name = "z_i%d_%s" % (i, _bundle_tag(k))
            lp.add_variable(name, annotation="allocation indicator, agent %d bundle %s" % (i, tuple(k)))
            lp.objective[name] = instance.adjusted_value(i, k)
    supply = {}
    for i in members:
        cap_row = {}
        for k in instance.valuation(i).bundles():
            name = "z_i%d_%s" % (i, _bundle_tag(k))
            cap_row[name] = ONE
            if k.size:
                supply[name] = Fraction(k.size)
        lp.add_constraint("one_bundle_i%d" % i, cap_row, "<=", ONE)
    lp.add_constraint("supply", supply, "<=", Fraction(instance.K))
    return lp


def build_ce_dual(instance: Instance, economy: int, variable_cap: int = DEFAULT_VARIABLE_CAP) -> LinearProgram:
    """Dual of the allocation program: agent utilities plus a unit price."""
    members = economy_members(economy, instance.n)
    _check_variable_cap(len(members) + 1, variable_cap, "clearing-price dual")
    lp = LinearProgram(name="ce_dual_e%d" % economy, sense="min")
    lp.add_variable("p", annotation="uniform unit price")
    lp.objective["p"] = Fraction(instance.K)
    for i in members:
        lp.add_variable("pi_i%d" % i, annotation="utility of agent %d" % i)
        lp.objective["pi_i%d" % i] = ONE
    for i in members:
        for k in instance.valuation(i).bundles():
            lp.add_constraint(
                "util_i%d_%s" % (i, _bundle_tag(k)),
                {"pi_i%d" % i: ONE, "p": Fraction(k.size)},
                ">=",
                instance.adjusted_value(i, k),
            )
    return lp


def build_uce_dual(instance: Instance, variable_cap: int = DEFAULT_VARIABLE_CAP) -> LinearProgram:
    """All-economies dual with per-agent envelope prices as free variables."""
    n = instance.n
    count = 0
    for j in range(0, n + 1):
        count += 2 * len(economy_members(j, n)) + 1
    count += sum(v.bundle_count() for v in instance.agents)
    _check_variable_cap(count, variable_cap, "universal dual")

    lp = LinearProgram(name="uce_dual", sense="min")
    for j in range(0, n + 1):
        lp.add_variable("p_e%d" % j, annotation="unit price, economy %d" % j)
        lp.objective["p_e%d" % j] = Fraction(instance.K)
        for i in economy_members(j, n):
            lp.add_variable("pi_i%d_e%d" % (i, j), annotation="utility copy, agent %d economy %d" % (i, j))
            lp.objective["pi_i%d_e%d" % (i, j)] = ONE
            lp.add_variable("a_i%d_e%d" % (i, j), annotation="envelope offset, agent %d economy %d" % (i, j))
            lp.objective["a_i%d_e%d" % (i, j)] = ONE
    for i in range(1, n + 1):
        for k in instance.valuation(i).bundles():
            lp.add_variable(
                "rho_i%d_%s" % (i, _bundle_tag(k)),
                free=True,
                annotation="envelope price, agent %d bundle %s" % (i, tuple(k)),
            )
    for j in range(0, n + 1):
        for i in economy_members(j, n):
            for k in instance.valuation(i).bundles():
                tag = _bundle_tag(k)
                lp.add_constraint(
                    "util_i%d_e%d_%s" % (i, j, tag),
                    {"pi_i%d_e%d" % (i, j): ONE, "rho_i%d_%s" % (i, tag): ONE},
                    ">=",
                    instance.adjusted_value(i, k),
                )
                lp.add_constraint(
                    "env_i%d_e%d_%s" % (i, j, tag),
                    {
                        "rho_i%d_%s" % (i, tag): ONE,
                        "p_e%d" % j: -Fraction(k.size),
                        "a_i%d_e%d" % (i, j): -ONE,
                    },
                    "<=",
                    ZERO,
                )
    return lp


def build_uce_primal(
    instance: Instance,
    tie_allocation_vars: bool = False,
    variable_cap: int = DEFAULT_VARIABLE_CAP,
) -> LinearProgram:
    """All-economies allocation program with paired z/beta variables.

    tie_allocation_vars adds z = beta equalities (the simplification used to
    decompose the program per economy); the optimum must be unchanged.
    """
    n = instance.n
    count = 2 * sum(
        instance.valuation(i).bundle_count()
        for j in range(0, n + 1)
        for i in economy_members(j, n)
    )
    _check_variable_cap(count, variable_cap, "universal primal")

    lp = LinearProgram(name="uce_primal", sense="max")
    for j in range(0, n + 1):
        for i in economy_members(j, n):
            for k in instance.valuation(i).bundles():
                tag = _bundle_tag(k)
                zname = "z_i%d_e%d_%s" % (i, j, tag)
                bname = "b_i%d_e%d_%s" % (i, j, tag)
                lp.add_variable(zname, annotation="valued allocation, agent %d economy %d bundle %s" % (i, j, tuple(k)))
                lp.add_variable(bname, annotation="supplied allocation, agent %d economy %d bundle %s" % (i, j, tuple(k)))
                lp.objective[zname] = instance.adjusted_value(i, k)
    for j in range(0, n + 1):
        supply = {}
        for i in economy_members(j, n):
            z_row = {}
            b_row = {}
            for k in instance.valuation(i).bundles():
                tag = _bundle_tag(k)
                z_row["z_i%d_e%d_%s" % (i, j, tag)] = ONE
                b_row["b_i%d_e%d_%s" % (i, j, tag)] = ONE
                if k.size:
                    supply["b_i%d_e%d_%s" % (i, j, tag)] = Fraction(k.size)
            lp.add_constraint("one_z_i%d_e%d" % (i, j), z_row, "<=", ONE)
            lp.add_constraint("one_b_i%d_e%d" % (i, j), b_row, "<=", ONE)
        lp.add_constraint("supply_e%d" % j, supply, "<=", Fraction(instance.K))
    for i in range(1, n + 1):
        for k in instance.valuation(i).bundles():
            tag = _bundle_tag(k)
            row = {}
            for j in visible_economies(i, n):
                row["z_i%d_e%d_%s" % (i, j, tag)] = ONE
                row["b_i%d_e%d_%s" % (i, j, tag)] = -ONE
            lp.add_constraint("match_i%d_%s" % (i, tag), row, "=", ZERO)
    if tie_allocation_vars:
        for j in range(0, n + 1):
            for i in economy_members(j, n):
                for k in instance.valuation(i).bundles():
                    tag = _bundle_tag(k)
                    lp.add_constraint(
                        "tie_i%d_e%d_%s" % (i, j, tag),
                        {"z_i%d_e%d_%s" % (i, j, tag): ONE, "b_i%d_e%d_%s" % (i, j, tag): -ONE},
                        "=",
                        ZERO,
                    )
    return lp


def build_restricted_dual(
    instance: Instance, state: EnvelopePriceState, reports: dict
) -> LinearProgram:
    """The improving-direction program over demanded bundles and envelope-tight
    economies.  A negative optimum yields a price update; optimum 0 certifies
    the current prices as optimal."""
    n = instance.n
    lp = LinearProgram(name="restricted_dual", sense="min")
    for j in range(0, n + 1):
        lp.add_variable("q_e%d" % j, free=True, annotation="unit-price direction, economy %d" % j)
        lp.objective["q_e%d" % j] = Fraction(instance.K)
        lp.add_constraint("q_lb_e%d" % j, {"q_e%d" % j: ONE}, ">=", -ONE)
        for i in economy_members(j, n):
            lam = "lam_i%d_e%d" % (i, j)
            nu = "nu_i%d_e%d" % (i, j)
            lp.add_variable(lam, free=True, annotation="utility direction, agent %d economy %d" % (i, j))
            lp.add_variable(nu, free=True, annotation="offset direction, agent %d economy %d" % (i, j))
            lp.objective[lam] = ONE
            lp.objective[nu] = ONE
            lp.add_constraint("lam_lb_i%d_e%d" % (i, j), {lam: ONE}, ">=", -ONE)
            lp.add_constraint("nu_lb_i%d_e%d" % (i, j), {nu: ONE}, ">=", -ONE)
    for i in range(1, n + 1):
        if not reports[i].exhaustive:
            raise ValueError("restricted dual needs exhaustive demand sets (agent %d)" % i)
        for k in instance.valuation(i).bundles():
            tag = _bundle_tag(k)
            r = "r_i%d_%s" % (i, tag)
            lp.add_variable(r, free=True, annotation="bundle-price direction, agent %d bundle %s" % (i, tuple(k)))
            lp.add_constraint("r_lb_i%d_%s" % (i, tag), {r: ONE}, ">=", -ONE)
    for i in range(1, n + 1):
        demanded = set(reports[i].maximizers)
        for k in instance.valuation(i).bundles():
            tag = _bundle_tag(k)
            r = "r_i%d_%s" % (i, tag)
            if k in demanded:
                for j in visible_economies(i, n):
                    lp.add_constraint(
                        "dem_i%d_e%d_%s" % (i, j, tag),
                        {"lam_i%d_e%d" % (i, j): ONE, r: ONE},
                        ">=",
                        ZERO,
                    )
            for j in envelope_argmin(state, i, k):
                lp.add_constraint(
                    "env_i%d_e%d_%s" % (i, j, tag),
                    {"nu_i%d_e%d" % (i, j): ONE, r: -ONE, "q_e%d" % j: Fraction(k.size)},
                    ">=",
                    ZERO,
                )
    return lp


def over_demand_direction(instance: Instance, reports: dict, j: int) -> dict:
    """Closed-form feasible restricted-dual point for an over-demanded economy."""
    n, K = instance.n, Fraction(instance.K)
    point = {}
    for ell in range(0, n + 1):
        point["q_e%d" % ell] = ONE / K if ell == j else ZERO
        for i in economy_members(ell, n):
            point["lam_i%d_e%d" % (i, ell)] = -Fraction(reports[i].kappa_min) / K
            point["nu_i%d_e%d" % (i, ell)] = (
                ZERO if ell == j else Fraction(reports[i].kappa_min) / K
            )
    for i in range(1, n + 1):
        for k in instance.valuation(i).bundles():
            point["r_i%d_%s" % (i, _bundle_tag(k))] = (
                Fraction(min(k.size, reports[i].kappa_min)) / K
            )
    return point


def under_demand_direction(instance: Instance, reports: dict, j: int) -> dict:
    """Mirror point for an under-demanded economy (signs flipped, kappa_max)."""
    n, K = instance.n, Fraction(instance.K)
    point = {}
    for ell in range(0, n + 1):
        point["q_e%d" % ell] = -ONE / K if ell == j else ZERO
        for i in economy_members(ell, n):
            point["lam_i%d_e%d" % (i, ell)] = Fraction(reports[i].kappa_max) / K
            point["nu_i%d_e%d" % (i, ell)] = (
                ZERO if ell == j else -Fraction(reports[i].kappa_max) / K
            )
    for i in range(1, n + 1):
        for k in instance.valuation(i).bundles():
            point["r_i%d_%s" % (i, _bundle_tag(k))] = (
                -Fraction(max(k.size, reports[i].kappa_max)) / K
            )
    return point


# ---------------------------------------------------------------------------
# General explicit-allocation instances (fully nonlinear, non-anonymous).
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneralInstance:
    """Explicit bundle space, explicit feasible allocations, tabulated values.

    values maps (agent, bundle label) to a Fraction; absent pairs are outside
    the agent's consumption set.  The designated empty bundle has value 0.
    """

    n: int
    bundles: tuple  # labels
    empty: str
    values: dict  # (agent, label) -> Fraction
    allocations: tuple  # tuples of labels, length n

    def __post_init__(self):
        pool = set(self.bundles)
        if self.empty not in pool:
            raise ValueError("empty bundle %r is not in the bundle space" % (self.empty,))
        for y in self.allocations:
            if len(y) != self.n or any(x not in pool for x in y):
                raise ValueError("allocation %r is not drawn from the bundle space" % (y,))

    def available(self, i: int):
        return [x for x in self.bundles if (i, x) in self.values or x == self.empty]

    def value(self, i: int, x: str) -> Fraction:
        if x == self.empty:
            return self.values.get((i, x), ZERO)
        return self.values[(i, x)]


def build_general_uce_lps(general: GeneralInstance, size_cap: int = GENERAL_SIZE_CAP):
    """Universal primal and dual for a general instance; returns (primal, dual)."""
    size = len(general.bundles) * len(general.allocations) * general.n
    if size > size_cap:
        raise InstanceTooLarge(
            "|bundles| x |allocations| x n = %d exceeds cap %d" % (size, size_cap)
        )
    n = general.n

    dual = LinearProgram(name="general_uce_dual", sense="min")
    for j in range(0, n + 1):
        dual.add_variable("mu_e%d" % j, annotation="seller revenue bound, economy %d" % j)
        dual.objective["mu_e%d" % j] = ONE
        for i in economy_members(j, n):
            dual.add_variable("pi_i%d_e%d" % (i, j), annotation="utility copy, agent %d economy %d" % (i, j))
            dual.objective["pi_i%d_e%d" % (i, j)] = ONE
            dual.add_variable("a_i%d_e%d" % (i, j), annotation="envelope offset, agent %d economy %d" % (i, j))
            for x in general.available(i):
                dual.add_variable(
                    "pg_i%d_x%s_e%d" % (i, x, j),
                    annotation="personalized bundle price, agent %d bundle %s economy %d" % (i, x, j),
                )
    for i in range(1, n + 1):
        for x in general.available(i):
            dual.add_variable(
                "rho_i%d_x%s" % (i, x),
                free=True,
                annotation="envelope price, agent %d bundle %s" % (i, x),
            )
    for j in range(0, n + 1):
        for i in economy_members(j, n):
            for x in general.available(i):
                dual.add_constraint(
                    "util_i%d_e%d_x%s" % (i, j, x),
                    {"pi_i%d_e%d" % (i, j): ONE, "rho_i%d_x%s" % (i, x): ONE},
                    ">=",
                    general.value(i, x),
                )
                dual.add_constraint(
                    "env_i%d_e%d_x%s" % (i, j, x),
                    {
                        "rho_i%d_x%s" % (i, x): ONE,
                        "pg_i%d_x%s_e%d" % (i, x, j): -ONE,
                        "a_i%d_e%d" % (i, j): -ONE,
                    },
                    "<=",
                    ZERO,
                )
        for t, y in enumerate(general.allocations):
            row = {"mu_e%d" % j: ONE}
            for i in economy_members(j, n):
                x = y[i - 1]
                row["pg_i%d_x%s_e%d" % (i, x, j)] = row.get("pg_i%d_x%s_e%d" % (i, x, j), ZERO) - ONE
                row["a_i%d_e%d" % (i, j)] = row.get("a_i%d_e%d" % (i, j), ZERO) - ONE
            dual.add_constraint("rev_e%d_y%d" % (j, t), row, ">=", ZERO)

    primal = LinearProgram(name="general_uce_primal", sense="max")
    for j in range(0, n + 1):
        for t in range(len(general.allocations)):
            primal.add_variable("d_y%d_e%d" % (t, j), annotation="seller mix weight, allocation %d economy %d" % (t, j))
        for i in economy_members(j, n):
            for x in general.available(i):
                zname = "z_i%d_x%s_e%d" % (i, x, j)
                bname = "b_i%d_x%s_e%d" % (i, x, j)
                primal.add_variable(zname, annotation="valued allocation, agent %d bundle %s economy %d" % (i, x, j))
                primal.add_variable(bname, annotation="supplied allocation, agent %d bundle %s economy %d" % (i, x, j))
                primal.objective[zname] = general.value(i, x)
    for j in range(0, n + 1):
        primal.add_constraint(
            "mix_e%d" % j,
            {"d_y%d_e%d" % (t, j): ONE for t in range(len(general.allocations))},
            "<=",
            ONE,
        )
        for i in economy_members(j, n):
            primal.add_constraint(
                "one_z_i%d_e%d" % (i, j),
                {"z_i%d_x%s_e%d" % (i, x, j): ONE for x in general.available(i)},
                "<=",
                ONE,
            )
            row = {"b_i%d_x%s_e%d" % (i, x, j): ONE for x in general.available(i)}
            for t in range(len(general.allocations)):
                row["d_y%d_e%d" % (t, j)] = -ONE
            primal.add_constraint("one_b_i%d_e%d" % (i, j), row, "<=", ZERO)
            for x in general.available(i):
                row = {"b_i%d_x%s_e%d" % (i, x, j): ONE}
                for t, y in enumerate(general.allocations):
                    if y[i - 1] == x:
                        row["d_y%d_e%d" % (t, j)] = row.get("d_y%d_e%d" % (t, j), ZERO) - ONE
                primal.add_constraint("pick_i%d_x%s_e%d" % (i, x, j), row, "<=", ZERO)
    for i in range(1, n + 1):
        for x in general.available(i):
            row = {}
            for j in visible_economies(i, n):
                row["z_i%d_x%s_e%d" % (i, x, j)] = ONE
                row["b_i%d_x%s_e%d" % (i, x, j)] = -ONE
            primal.add_constraint("match_i%d_x%s" % (i, x), row, "=", ZERO)
    return primal, dual


def encode_two_item_instance(instance: Instance) -> GeneralInstance:
    """Re-express a two-item instance with explicit bundles and allocations."""
    labels = {}
    values = {}
    empty = "w0s0"
    pool = {empty}
    for i in range(1, instance.n + 1):
        for k in instance.valuation(i).bundles():
            label = _bundle_tag(k)
            pool.add(label)
            labels[label] = k
            values[(i, label)] = instance.adjusted_value(i, k)
    labels[empty] = Bundle(0, 0)

    allocations = []

    def recurse(i, remaining, partial):
        if i > instance.n:
            allocations.append(tuple(partial))
            return
        for k in instance.valuation(i).bundles():
            if k.size <= remaining:
                partial.append(_bundle_tag(k))
                recurse(i + 1, remaining - k.size, partial)
                partial.pop()

    recurse(1, instance.K, [])
    return GeneralInstance(
        n=instance.n,
        bundles=tuple(sorted(pool)),
        empty=empty,
        values=values,
        allocations=tuple(allocations),
    )


# ---------------------------------------------------------------------------
# Text format: emit and parse, round-trip safe.
# ---------------------------------------------------------------------------

def render_coefficient(q: Fraction) -> str:
    """Decimal string when exact, otherwise p/q."""
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    d = q.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return "%d/%d" % (q.numerator, q.denominator)
    exp = max(twos, fives)
    scaled = q.numerator * 10**exp // q.denominator
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(exp + 1, "0")
    return "%s%s.%s" % (sign, digits[:-exp], digits[-exp:])


def _render_terms(coeffs: dict) -> str:
    parts = []
    for name in sorted(coeffs):
        coef = coeffs[name]
        if coef == 0:
            continue
        sign = "-" if coef < 0 else "+"
        parts.append("%s %s %s" % (sign, render_coefficient(abs(coef)), name))
    if not parts:
        return "+ 0 _zero"
    return " ".join(parts)


def emit_lp_text(lp: LinearProgram) -> str:
    lines = []
    lines.append("Maximize" if lp.sense == "max" else "Minimize")
    lines.append(" obj: %s" % _render_terms(lp.objective))
    lines.append("Subject To")
    for c in lp.constraints:
        lines.append(" %s: %s %s %s" % (c.name, _render_terms(c.coeffs), c.rel, render_coefficient(c.rhs)))
    free = [v.name for v in lp.variables if v.free]
    lines.append("Bounds")
    for name in free:
        lines.append(" %s free" % name)
    lines.append("General")
    for v in lp.variables:
        lines.append(" %s" % v.name)
    lines.append("End")
    return "\n".join(lines) + "\n"


def _parse_terms(tokens):
    coeffs = {}
    idx = 0
    while idx < len(tokens):
        sign = 1
        tok = tokens[idx]
        if tok in ("+", "-"):
            sign = -1 if tok == "-" else 1
            idx += 1
            tok = tokens[idx]
        coef = Fraction(tok)
        name = tokens[idx + 1]
        idx += 2
        if name != "_zero":
            coeffs[name] = coeffs.get(name, ZERO) + sign * coef
    return coeffs


def parse_lp_text(text: str) -> LinearProgram:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("\\")]
    if not lines or lines[0] not in ("Maximize", "Minimize"):
        raise LpFormatError("expected Maximize or Minimize header")
    lp = LinearProgram(name="parsed", sense="max" if lines[0] == "Maximize" else "min")
    section = "objective"
    free = set()
    declared = []
    body_constraints = []
    for line in lines[1:]:
        if line in ("Subject To", "Bounds", "General", "End"):
            section = line
            continue
        if section == "objective":
            if not line.startswith("obj:"):
                raise LpFormatError("expected objective line, got %r" % line)
            lp.objective = _parse_terms(line[len("obj:"):].split())
        elif section == "Subject To":
            name, _, rest = line.partition(":")
            tokens = rest.split()
            rel_idx = next(i for i, t in enumerate(tokens) if t in ("<=", "=", ">="))
            body_constraints.append(
                (name.strip(), _parse_terms(tokens[:rel_idx]), tokens[rel_idx], Fraction(tokens[rel_idx + 1]))
            )
        elif section == "Bounds":
            name, kw = line.split()
            if kw != "free":
                raise LpFormatError("unsupported bound line %r" % line)
            free.add(name)
        elif section == "General":
            declared.append(line.split()[0])
    for name in declared:
        lp.add_variable(name, free=name in free)
    for name, coeffs, rel, rhs in body_constraints:
        lp.add_constraint(name, coeffs, rel, rhs)
    return lp
