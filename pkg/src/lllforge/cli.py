"""Command-line front end: ``lllforge {solve,audit,enumerate,bench}``.

Reports go to stdout (or ``--out``) as JSON; a one-line summary goes to
stderr.  Exit codes: 0 success, 1 the LLL condition fails, 2 bad input,
3 a bound that must hold was observed violated.
"""
from __future__ import annotations

import argparse
import json
import logging
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

from .adapters import CnfFormula, Instance, cnf_event_system, load_instance
from .audit import audit
from .derandomize import PartialTable, deterministic_pipeline, enumerate_forbidden, phi
from .engine import RandomStream, run_randomized, run_with_table
from .errors import ConsistencyError, InputError, LLLError, ValidationFailure
from .generators import clustered_cnf
from .model import derive_params
from .parallel import solve_parallel

log = logging.getLogger("lllforge")

EXIT_OK, EXIT_VALIDATION, EXIT_INPUT, EXIT_CONSISTENCY = 0, 1, 2, 3


def _epsilon(text: str):
    """Parse epsilon, keeping short decimals and fractions like '1/2' exact."""
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"invalid epsilon {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("epsilon must be positive")
    return int(value) if value.denominator == 1 else value


def _num(value):
    if isinstance(value, Fraction):
        return float(value)
    return value


def _split_sizes(inst: Instance):
    return [len(t) for t in inst.split_trees]


def _params(inst: Instance, epsilon):
    return derive_params(inst.system, inst.x, epsilon, _split_sizes(inst))


def _param_block(params, system) -> dict:
    return {
        "epsilon": _num(params.epsilon),
        "M": _num(params.M),
        "gamma": params.gamma,
        "w_min": params.w_min,
        "D": params.D,
        "m": system.m,
        "n": system.n,
        "table_width": params.table_width,
        "heavy": len(params.heavy_set),
    }


def _assignment(values) -> dict:
    # variables are 1-based in both input formats
    return {str(p + 1): v for p, v in enumerate(values)}


def _satisfied(inst: Instance, values) -> bool:
    return not inst.system.happening(values)


def _read_instance(path: str, epsilon, clique_cover: bool) -> Instance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return load_instance(text, epsilon, clique_cover)


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, default=_num)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _require_valid(inst: Instance) -> None:
    if inst.validation is not None and not inst.validation.ok:
        bad = inst.validation.violations()[0]
        raise ValidationFailure(f"event {bad.event} violates Pr[A] <= x'(A)^(1+eps)", inst.validation)


def cmd_solve(args) -> int:
    inst = _read_instance(args.input, args.eps, args.clique_cover == "on")
    system = inst.system
    params = _params(inst, args.eps)
    report = {"mode": args.mode, "parameters": _param_block(params, system)}
    if inst.validation is not None:
        report["validation"] = {"ok": inst.validation.ok}
    t0 = time.perf_counter()
    if args.mode in ("det", "par"):
        _require_valid(inst)
    elif inst.validation is not None and not inst.validation.ok:
        log.warning("LLL condition fails for this epsilon; running anyway")

    if args.mode == "rand":
        run = run_randomized(system, args.seed, args.max_steps)
        report["run"] = {"steps": run.steps, "outcome": run.outcome, "resamples": run.resamples}
        values = run.assignment
        ok = run.success
        report["timings"] = {"run_ms": (time.perf_counter() - t0) * 1e3}
    elif args.mode == "table":
        stream = RandomStream(system, args.seed)
        for p in range(system.n):
            stream.value(p, params.table_width)
        table = stream.table()
        run = run_with_table(system, table, args.max_steps or system.m * params.table_width)
        report["run"] = {"steps": run.steps, "outcome": run.outcome, "resamples": run.resamples,
                         "table_width": table.width}
        values = run.assignment
        ok = run.success
        report["timings"] = {"run_ms": (time.perf_counter() - t0) * 1e3}
    elif args.mode == "det":
        res = deterministic_pipeline(system, inst.x, args.eps, inst.split_trees)
        report["forbidden"] = {"count": len(res.forbidden), "f1": len(res.forbidden.f1),
                               "f2": len(res.forbidden.f2), "phi_empty": float(res.phi_empty)}
        report["run"] = {"steps": res.run.steps, "outcome": res.run.outcome, "resamples": res.run.resamples}
        report["timings"] = res.timings
        values = res.assignment
        ok = res.run.success
    else:
        res = solve_parallel(system, inst.x, args.eps, split_sizes=_split_sizes(inst), workers=args.workers)
        report["space"] = res.space.to_json() | {"index": res.index, "tried": res.tried}
        report["budget"] = {"c": res.budget.c, "k": res.budget.global_k(res.params)}
        report["run"] = {"rounds": res.run.steps, "max_rounds": res.params.max_rounds,
                         "outcome": res.run.outcome, "resamples": res.run.resamples}
        report["timings"] = res.timings
        values = res.assignment
        ok = res.run.success
    report["assignment"] = _assignment(values) if ok else None
    if ok and not _satisfied(inst, values):
        raise ConsistencyError("returned assignment leaves a bad event happening")
    _emit(report, args.out)
    print(f"{args.mode}: {'ok' if ok else 'no assignment'} (m={system.m}, n={system.n})", file=sys.stderr)
    return EXIT_OK if ok else EXIT_CONSISTENCY


def cmd_audit(args) -> int:
    inst = _read_instance(args.input, args.eps, args.clique_cover == "on")
    params = _params(inst, args.eps)
    t0 = time.perf_counter()
    rep = audit(inst.system, params, inst.split_trees, range(args.seed, args.seed + args.seeds), args.max_steps)
    bound = sum(float(x) / (1 - float(x)) for x in inst.x)
    out = {"mode": "audit", "parameters": _param_block(params, inst.system), "audit": rep.to_json(),
           "resample_bound": bound, "timings": {"audit_ms": (time.perf_counter() - t0) * 1e3}}
    _emit(out, args.out)
    print(f"audit: {rep.runs} runs, {rep.witnesses} witnesses, {'ok' if rep.ok else 'FAILED'}", file=sys.stderr)
    return EXIT_OK if rep.ok else EXIT_CONSISTENCY


def cmd_enumerate(args) -> int:
    inst = _read_instance(args.input, args.eps, args.clique_cover == "on")
    params = _params(inst, args.eps)
    t0 = time.perf_counter()
    forbidden = enumerate_forbidden(inst.system, params, inst.split_trees,
                                    independent_levels=args.prune != "none", minimal=args.prune == "minimal")
    width = max(params.table_width, forbidden.max_column)
    phi_empty = phi(forbidden, PartialTable(width), inst.system)
    out = {
        "mode": "enumerate",
        "parameters": _param_block(params, inst.system),
        "forbidden": forbidden.to_json(args.limit) | {"phi_empty": float(phi_empty),
                                                      "phi_empty_exact": str(phi_empty),
                                                      "bound": params.enumeration_bound},
        "timings": {"enumerate_ms": (time.perf_counter() - t0) * 1e3},
    }
    _emit(out, args.out)
    print(f"|F| = {len(forbidden)}, Phi(empty) = {float(phi_empty):.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args) -> int:
    rng = random.Random(args.seed)
    rows = []
    for i in range(args.count):
        formula: CnfFormula = clustered_cnf(args.m, args.k, rng)
        inst = cnf_event_system(formula, args.eps)
        row = {"instance": i, "m": formula.m, "n": formula.num_vars, "d": formula.d, "valid": inst.validation.ok}
        for mode in args.modes.split(","):
            t0 = time.perf_counter()
            if mode == "det":
                values = deterministic_pipeline(inst.system, inst.x, args.eps, inst.split_trees).assignment
            elif mode == "par":
                values = solve_parallel(inst.system, inst.x, args.eps, split_sizes=_split_sizes(inst)).assignment
            elif mode == "rand":
                values = run_randomized(inst.system, i).assignment
            else:
                raise InputError(f"unknown bench mode {mode!r}")
            row[f"{mode}_ms"] = (time.perf_counter() - t0) * 1e3
            row[f"{mode}_sat"] = formula.satisfied_by(values)
        rows.append(row)
        print(json.dumps(row), file=sys.stderr)
    _emit({"mode": "bench", "instances": rows}, args.out)
    return EXIT_OK if all(v for r in rows for k, v in r.items() if k.endswith("_sat")) else EXIT_CONSISTENCY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lllforge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, need_input=True):
        p.add_argument("--eps", type=_epsilon, default=1, help="slack epsilon (decimal or fraction)")
        p.add_argument("--clique-cover", choices=("on", "off"), default="on")
        p.add_argument("--out", help="write the JSON report here instead of stdout")
        if need_input:
            p.add_argument("input", help="DIMACS CNF or 'h' hypergraph file")

    p = sub.add_parser("solve", help="find a good assignment")
    p.add_argument("--mode", choices=("rand", "table", "det", "par"), default="det")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("audit", help="check witness properties over seeded randomized runs")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--max-steps", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("enumerate", help="build the forbidden set and report |F| and Phi(empty)")
    p.add_argument("--prune", choices=("none", "levels", "minimal"), default="none")
    p.add_argument("--limit", type=int, default=20, help="witnesses listed in the report")
    common(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("bench", help="time the solvers on generated clustered k-CNF instances")
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--modes", default="det,par")
    common(p, need_input=False)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationFailure as exc:
        if exc.report is not None:
            _emit({"error": str(exc), "validation": exc.report.to_json()}, getattr(args, "out", None))
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConsistencyError as exc:
        print(f"consistency failure: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except LLLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY


if __name__ == "__main__":
    sys.exit(main())
