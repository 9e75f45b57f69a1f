"""Command-line interface: run auctions, verify invariants, emit LPs, generate
instances, and print side-by-side engine comparisons.

Exit codes: 0 success, 2 usage/validation error, 3 invariant or certification
failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import random
import sys
import tempfile
from fractions import Fraction

from . import auction, generate, lp, oracle, subgradient
from .demand import demand_set
from .model import (
    Instance,
    InstanceValidationError,
    ZERO_BUNDLE,
    format_rational,
    instance_to_dict,
    load_instance,
    parse_rational,
)
from .pricing import EnvelopePriceState

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INVARIANT = 3

ENGINES = ("uce", "linear", "parallel", "subgradient")
BUILDS = ("ce-primal", "ce-dual", "uce-primal", "uce-dual", "restricted-dual", "general-uce")


def instance_digest(inst: Instance) -> str:
    canonical = json.dumps(instance_to_dict(inst), sort_keys=True).encode("utf-8")
    return hashlib.sha256(canonical).hexdigest()[:16]


def _write_text(path: str, text: str) -> None:
    """Write a file atomically (temp file + rename in the target directory)."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _out_path(args, name: str) -> str:
    return os.path.join(args.out_dir, name)


def _allocation_split(allocation) -> tuple:
    weak = sum(k.kw for k in allocation.values())
    strong = sum(k.ks for k in allocation.values())
    return weak, strong


def _format_allocation(allocation, n: int) -> str:
    parts = []
    for i in range(1, n + 1):
        k = allocation.get(i, ZERO_BUNDLE)
        parts.append("%d:(%d,%d)" % (i, k.kw, k.ks))
    return " ".join(parts)


def _format_payments(payments, n: int) -> str:
    return " ".join(
        "%d:%s" % (i, format_rational(payments[i])) for i in range(1, n + 1)
    )


def _uce_trace_csv(trace, n: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        ["round", "economy", "p", "sum_kappa_min", "sum_kappa_max", "diagnosis", "action"]
    )
    for record in trace.records:
        updated = {u["economy"]: u["direction"] for u in record["updates"]}
        for j in range(0, n + 1):
            low, high = record["kappa_sums"][j]
            writer.writerow(
                [
                    record["round"],
                    j,
                    record["p"][j],
                    low,
                    high,
                    record["diagnosis"][j],
                    updated.get(j, ""),
                ]
            )
    return buf.getvalue()


def _linear_trace_csv(trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        ["round", "economy", "p", "sum_kappa_min", "sum_kappa_max", "diagnosis", "action"]
    )
    for row in trace.records:
        action = "" if row["diagnosis"] == "balanced" else row["diagnosis"]
        writer.writerow(
            [
                row["round"],
                row.get("economy", 0),
                row["p"],
                row["sum_kappa_min"],
                row["sum_kappa_max"],
                row["diagnosis"],
                action,
            ]
        )
    return buf.getvalue()


def _parallel_trace_csv(trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        ["round", "economy", "p", "sum_kappa_min", "sum_kappa_max", "diagnosis", "action"]
    )
    for record in trace.records:
        for j in sorted(record["economies"]):
            row = record["economies"][j]
            action = "" if row["diagnosis"] == "balanced" else row["diagnosis"]
            writer.writerow(
                [
                    record["round"],
                    j,
                    row["p"],
                    row["sum_kappa_min"],
                    row["sum_kappa_max"],
                    row["diagnosis"],
                    action,
                ]
            )
    return buf.getvalue()


def _subgradient_log_csv(run) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    header = ["iteration", "objective", "best_objective", "max_subgradient"]
    if run.log and "gap" in run.log[0]:
        header.append("gap")
    writer.writerow(header)
    for entry in run.log:
        writer.writerow([entry[h] for h in header])
    return buf.getvalue()


def _outcome_to_dict(outcome, n: int) -> dict:
    doc = {
        "allocation": {
            str(i): list(outcome.allocation.get(i, ZERO_BUNDLE)) for i in range(1, n + 1)
        },
        "rounds": outcome.rounds,
        "queries": outcome.queries,
        "cleared_round": {str(j): r for j, r in sorted(outcome.cleared_round.items())},
        "details": outcome.details,
    }
    if outcome.payments is not None:
        doc["payments"] = {
            str(i): format_rational(outcome.payments[i]) for i in range(1, n + 1)
        }
    if outcome.final_state is not None:
        from .pricing import state_to_dict

        doc["final_state"] = state_to_dict(outcome.final_state)
    return doc


def _state_from_record(record: dict, n: int, delta: Fraction) -> EnvelopePriceState:
    p = tuple(parse_rational(x) for x in record["p"])
    alpha = {}
    for key, val in record["alpha"].items():
        i, j = key.split(",")
        alpha[(int(i), int(j))] = parse_rational(val)
    return EnvelopePriceState(n=n, p=p, alpha=alpha, delta=delta)


def _run_engine(inst, engine, args):
    if engine == "uce":
        return auction.run_uce_auction(
            inst, round_cap=args.round_cap, certify=not args.no_certify
        )
    if engine == "linear":
        return auction.run_linear_auction(inst, round_cap=args.round_cap)
    if engine == "parallel":
        return auction.run_parallel_auction(inst, round_cap=args.round_cap)
    raise ValueError(engine)


def cmd_run(args) -> int:
    inst = load_instance(args.instance)
    digest = instance_digest(inst)
    n = inst.n

    if args.engine == "subgradient":
        lp_opt = parse_rational(args.lp_optimum) if args.lp_optimum else None
        run = subgradient.run_subgradient(
            inst, step=parse_rational(args.step), iterations=args.iterations, lp_optimum=lp_opt
        )
        print("instance %s  engine subgradient  step %s" % (digest, args.step))
        print("iterations %d  best objective %s at iteration %d"
              % (len(run.log), format_rational(run.best_objective), run.best_iteration))
        if lp_opt is not None:
            print("gap to LP optimum: %s" % format_rational(run.best_objective - lp_opt))
        if args.trace_csv:
            _write_text(args.trace_csv, _subgradient_log_csv(run))
        if args.trace_json:
            _write_text(
                args.trace_json,
                json.dumps({"instance_digest": digest, "log": run.log}, indent=2) + "\n",
            )
        return EXIT_OK

    if args.compare:
        return _cmd_compare(inst, digest, args)

    try:
        outcome, trace = _run_engine(inst, args.engine, args)
    except oracle.NotUniversal as exc:
        print("certification FAILED: %s" % exc, file=sys.stderr)
        return EXIT_INVARIANT

    certification = "n/a"
    if args.engine == "uce" and not args.no_certify:
        certification = "passed"

    weak, strong = _allocation_split(outcome.allocation)
    print("instance %s  engine %s  direction %s  mode %s"
          % (digest, args.engine, inst.direction, inst.update_mode))
    print("rounds %d  queries %d  allocation weak=%d strong=%d"
          % (outcome.rounds, outcome.queries, weak, strong))
    print("allocation %s" % _format_allocation(outcome.allocation, n))
    if outcome.payments is not None:
        print("payments %s" % _format_payments(outcome.payments, n))
    else:
        print("payments not available (engine does not elicit enough information)")
    print("certification %s" % certification)
    for key, val in outcome.details.items():
        print("%s %s" % (key, val))

    if args.trace_csv:
        if args.engine == "uce":
            _write_text(args.trace_csv, _uce_trace_csv(trace, n))
        elif args.engine == "linear":
            _write_text(args.trace_csv, _linear_trace_csv(trace))
        else:
            _write_text(args.trace_csv, _parallel_trace_csv(trace))
    if args.trace_json:
        doc = {
            "instance_digest": digest,
            "engine": args.engine,
            "records": trace.records,
            "outcome": _outcome_to_dict(outcome, n),
        }
        _write_text(args.trace_json, json.dumps(doc, indent=2, default=str) + "\n")
    return EXIT_OK


def _cmd_compare(inst, digest, args) -> int:
    """Run all three engines on one instance and print one summary table."""
    rows = []
    for engine in ("uce", "linear", "parallel"):
        outcome, _ = _run_engine(inst, engine, args)
        weak, strong = _allocation_split(outcome.allocation)
        payments = (
            _format_payments(outcome.payments, inst.n)
            if outcome.payments is not None
            else "-"
        )
        rows.append((engine, outcome.rounds, outcome.queries, weak, strong, payments))
    print("instance %s  direction %s  mode %s" % (digest, inst.direction, inst.update_mode))
    header = ("auction", "rounds", "queries", "weak", "strong", "payments")
    widths = [max(len(str(r[c])) for r in rows + [header]) for c in range(6)]
    for row in [header] + rows:
        print("  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)))
    return EXIT_OK


def _dump_counterexample(args, payload: dict) -> str:
    path = _out_path(args, "counterexample.json")
    _write_text(path, json.dumps(payload, indent=2, default=str) + "\n")
    return path


def _verify_instances(args):
    rng = random.Random(args.seed)
    for _ in range(args.count):
        if args.family == "multi_unit":
            yield generate.random_multi_unit_instance(
                rng, n_max=3, K_max=4, value_max=8, units_max=3,
                update_mode=args.mode, direction=args.direction,
            )
        else:
            yield generate.random_product_mix_instance(
                rng, n_max=3, K_max=5, gamma_max=3, value_max=8,
                update_mode=args.mode, direction=args.direction,
            )


def cmd_verify(args) -> int:
    if args.instance:
        instances = [load_instance(args.instance)]
    else:
        instances = list(_verify_instances(args))

    failures = 0
    for idx, inst in enumerate(instances):
        try:
            if args.suite == "lemma1":
                total = lp.solve(lp.build_uce_primal(inst)).objective
                split = sum(
                    (lp.solve(lp.build_ce_primal(inst, j)).objective for j in range(0, inst.n + 1)),
                    Fraction(0),
                )
                ok = total == split
                detail = {"uce_optimum": str(total), "per_economy_sum": str(split)}
            elif args.suite == "vcg":
                outcome, _ = auction.run_uce_auction(inst)
                _, payoffs, _, values = oracle.vcg_from_definition(inst)
                engine_payoffs = {
                    i: inst.adjusted_value(i, outcome.allocation.get(i, ZERO_BUNDLE))
                    - outcome.payments[i]
                    for i in range(1, inst.n + 1)
                }
                ok = engine_payoffs == payoffs
                detail = {
                    "engine_payoffs": {i: str(q) for i, q in engine_payoffs.items()},
                    "oracle_payoffs": {i: str(q) for i, q in payoffs.items()},
                }
            elif args.suite == "descent":
                inst = Instance(
                    agents=inst.agents, K=inst.K, delta=inst.delta,
                    epsilon=inst.epsilon, p_init=inst.p_init,
                    direction=inst.direction, update_mode="single",
                )
                _, trace = auction.run_uce_auction(inst)
                objectives = [parse_rational(r["dual_objective"]) for r in trace.records]
                ok = all(b < a for a, b in zip(objectives, objectives[1:]))
                detail = {"objectives": [str(o) for o in objectives]}
            else:
                print("unknown suite %r" % args.suite, file=sys.stderr)
                return EXIT_VALIDATION
        except (auction.RoundLimitExceeded, oracle.NotUniversal) as exc:
            ok = False
            detail = {"error": str(exc)}
        if not ok:
            failures += 1
            path = _dump_counterexample(
                args,
                {
                    "suite": args.suite,
                    "index": idx,
                    "instance": instance_to_dict(inst),
                    "detail": detail,
                },
            )
            print("FAIL %s instance %d (counterexample: %s)" % (args.suite, idx, path))
    print("%s: %d/%d passed" % (args.suite, len(instances) - failures, len(instances)))
    return EXIT_OK if failures == 0 else EXIT_INVARIANT


def cmd_gen(args) -> int:
    if args.family == "multi_unit":
        rng = random.Random(args.seed)
        inst = generate.random_multi_unit_instance(
            rng, n_max=args.agents, K_max=args.supply,
            update_mode=args.update_mode, direction=args.direction,
        )
    else:
        inst = generate.generate_product_mix(
            seed=args.seed,
            n=args.agents,
            K=args.supply,
            epsilon=parse_rational(args.epsilon),
            strong_only_fraction=args.strong_fraction,
            gamma_max=args.gamma_max,
            delta_steps=args.delta_steps,
            direction=args.direction,
            update_mode=args.update_mode,
        )
    doc = json.dumps(instance_to_dict(inst), indent=2, sort_keys=True) + "\n"
    _write_text(args.output, doc)
    print("wrote %s (digest %s)" % (args.output, instance_digest(inst)))
    return EXIT_OK


def _build_program(inst, args):
    if args.build == "ce-primal":
        return [lp.build_ce_primal(inst, args.economy)]
    if args.build == "ce-dual":
        return [lp.build_ce_dual(inst, args.economy)]
    if args.build == "uce-primal":
        return [lp.build_uce_primal(inst)]
    if args.build == "uce-dual":
        return [lp.build_uce_dual(inst)]
    if args.build == "general-uce":
        primal, dual = lp.build_general_uce_lps(lp.encode_two_item_instance(inst))
        return [primal, dual]
    # restricted-dual: reconstruct the price state at the requested round from
    # the trace, recompute demand reports, and build the program there.
    _, trace = auction.run_uce_auction(inst)
    record = trace.records[args.at_round - 1 if args.at_round else -1]
    state = _state_from_record(record, inst.n, inst.delta)
    reports = {i: demand_set(inst.valuation(i), state, i) for i in range(1, inst.n + 1)}
    return [lp.build_restricted_dual(inst, state, reports)]


def cmd_lp(args) -> int:
    inst = load_instance(args.instance)
    try:
        programs = _build_program(inst, args)
    except lp.InstanceTooLarge as exc:
        print("instance too large: %s" % exc, file=sys.stderr)
        return EXIT_VALIDATION
    if args.emit_lp:
        paths = (
            [args.emit_lp]
            if len(programs) == 1
            else [args.emit_lp, args.emit_lp + ".dual"]
        )
        for program, path in zip(programs, paths):
            _write_text(path, lp.emit_lp_text(program))
            print("wrote %s (%s)" % (path, program.name))
    if args.solve:
        # For the general pair only the (cheaper) primal is solved; its
        # optimum equals the dual's by strong duality.
        program = programs[0]
        result = lp.solve(program)
        print("%s: status %s" % (program.name, result.status))
        if result.status == "optimal":
            print("optimum %s" % format_rational(result.objective))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uceauction",
        description="Iterative single-price-path Vickrey auctions: simulate, verify, solve.",
    )
    parser.add_argument(
        "--out-dir",
        default=os.environ.get("UCEAUCTION_OUT", "."),
        help="directory for report files (default: $UCEAUCTION_OUT or the cwd)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an auction engine on an instance file")
    p_run.add_argument("instance")
    p_run.add_argument("--engine", choices=ENGINES, default="uce")
    p_run.add_argument("--compare", action="store_true",
                       help="run uce, linear, and parallel and print one table")
    p_run.add_argument("--trace-csv", help="write the per-round trace as CSV")
    p_run.add_argument("--trace-json", help="write the full trace as JSON")
    p_run.add_argument("--no-certify", action="store_true",
                       help="skip the final CE certification (uce engine)")
    p_run.add_argument("--round-cap", type=int, default=None)
    p_run.add_argument("--step", default="1/2", help="subgradient step size")
    p_run.add_argument("--iterations", type=int, default=200)
    p_run.add_argument("--lp-optimum", default=None,
                       help="known dual optimum for subgradient gap reporting")
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="batch invariant checks against oracles")
    p_verify.add_argument("--suite", choices=("lemma1", "vcg", "descent"), required=True)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--count", type=int, default=20)
    p_verify.add_argument("--family", choices=("multi_unit", "product_mix"),
                          default="multi_unit")
    p_verify.add_argument("--mode", choices=("batch", "single"), default="batch")
    p_verify.add_argument("--direction", choices=("ascending", "descending"),
                          default="ascending")
    p_verify.add_argument("--instance", default=None,
                          help="check a single instance file instead of a random batch")
    p_verify.set_defaults(func=cmd_verify)

    p_gen = sub.add_parser("gen", help="generate a seeded synthetic instance")
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--family", choices=("product_mix", "multi_unit"),
                       default="product_mix")
    p_gen.add_argument("--agents", type=int, default=17)
    p_gen.add_argument("--supply", type=int, default=100)
    p_gen.add_argument("--epsilon", default="1/100")
    p_gen.add_argument("--strong-fraction", type=float, default=0.2)
    p_gen.add_argument("--gamma-max", type=int, default=None)
    p_gen.add_argument("--delta-steps", type=int, default=0)
    p_gen.add_argument("--direction", choices=("ascending", "descending"),
                       default="ascending")
    p_gen.add_argument("--update-mode", choices=("batch", "single"), default="batch")
    p_gen.add_argument("--output", required=True)
    p_gen.set_defaults(func=cmd_gen)

    p_lp = sub.add_parser("lp", help="build, emit, and solve the linear programs")
    p_lp.add_argument("instance")
    p_lp.add_argument("--build", choices=BUILDS, required=True)
    p_lp.add_argument("--economy", type=int, default=0)
    p_lp.add_argument("--solve", action="store_true")
    p_lp.add_argument("--emit-lp", default=None)
    p_lp.add_argument("--at-round", type=int, default=None,
                      help="restricted-dual: build at this round of the trace")
    p_lp.set_defaults(func=cmd_lp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InstanceValidationError as exc:
        print("invalid instance: %s" % exc, file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
