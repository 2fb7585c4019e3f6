"""Small hand-built systems shared by the test modules."""
from __future__ import annotations

import random
from fractions import Fraction

from lllforge.adapters import CnfFormula, clause_event, cnf_system
from lllforge.model import Variable, build_event_system, predicate_event


def all_zero_event(id, scope, variables):
    scope = tuple(scope)
    return predicate_event(id, scope, lambda v: all(v[p] == 0 for p in scope), variables,
                           dt_complexity=len(scope), name=f"Z{id}")


def e0():
    """One event (p1 = 0 and p2 = 0) over two fair bits."""
    variables = [Variable.uniform(0), Variable.uniform(1)]
    return build_event_system(variables, [all_zero_event(0, (0, 1), variables)])


def e1():
    """A1 = (p1 = 0 and p2 = 0), A2 = (p2 = 0 and p3 = 0)."""
    variables = [Variable.uniform(p) for p in range(3)]
    return build_event_system(variables, [all_zero_event(0, (0, 1), variables),
                                          all_zero_event(1, (1, 2), variables)])


def cnf(num_vars, *clauses):
    return cnf_system(CnfFormula(num_vars, tuple(tuple(c) for c in clauses)))


def random_small_cnf(rng: random.Random, max_vars=8, max_events=6, min_width=2, max_width=4) -> CnfFormula:
    n = rng.randint(max(2, min_width), max_vars)
    m = rng.randint(1, max_events)
    clauses = []
    for _ in range(m):
        w = rng.randint(min_width, min(max_width, n))
        clauses.append(tuple(v if rng.random() < 0.5 else -v for v in rng.sample(range(1, n + 1), w)))
    return CnfFormula(n, tuple(clauses))


def five_event_system():
    """Fixed 5-clause system over 11 fair bits used for the resampling-count check.

    Consecutive clauses share one variable, so the dependency graph is the
    path A0-A1-A2-A3-A4; x = 1/3 gives x' >= 4/27 > 1/8 = Pr[A].
    """
    clauses = [(1, 2, 3), (-3, 4, 5), (5, -6, 7), (-7, 8, 9), (9, 10, -11)]
    return CnfFormula(11, tuple(clauses))


def uniform_x(system, value=Fraction(1, 2)):
    return tuple(value for _ in range(system.m))
