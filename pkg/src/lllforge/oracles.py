"""Slow, obviously-correct reference implementations used to cross-check the solver.

Nothing here is used by the solvers themselves.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import SpaceTooLarge
from .model import EventSystem, LLLParams
from .witness import EvaluationTable, PartialWitnessTree, SplitTree, cell_assignment, t_check, witness_weight


def brute_force_pr(system: EventSystem, event: int) -> Fraction:
    """Pr[A] by enumerating every assignment of the event's scope."""
    e = system.events[event]
    scope = list(e.vbl)
    total = Fraction(0)
    for combo in itertools.product(*(system.variables[p].domain for p in scope)):
        values = {p: v for p, (v, _) in zip(scope, combo)}
        if e.happens(values):
            prob = Fraction(1)
            for _, q in combo:
                prob *= Fraction(q)
            total += prob
    return total


def _parent_arrays(size: int):
    """Every parent array of a forest on ``size`` vertices where each parent precedes its child."""
    return itertools.product(*(range(-1, i) for i in range(size)))


def brute_force_forbidden(
    system: EventSystem,
    params: LLLParams,
    split_trees: Sequence[SplitTree],
    max_vertices: int,
) -> set[str]:
    """Canonical forms of F by generating every labelled forest up to ``max_vertices`` vertices.

    A candidate is kept when it is well formed, proper and its weight lies in
    [gamma, window_top] (``2 gamma`` unless a heavy event outweighs gamma).
    The first split tree that contains a root set owns it.
    """
    heavy = sorted(params.heavy_set)
    out = {PartialWitnessTree(e.scope, e.id, True).canonical() for e in system.events if e.id not in params.heavy_set}
    roots = {}
    for a in heavy:
        for S in split_trees[a].nodes:
            roots.setdefault(S, a)
    for S, owner in roots.items():
        for size in range(1, max_vertices + 1):
            for parents in _parent_arrays(size):
                for labels in itertools.product(heavy, repeat=size):
                    tree = PartialWitnessTree(S, owner, False, labels, parents)
                    if not (tree.is_well_formed(system) and tree.is_proper()):
                        continue
                    wt = witness_weight(tree, params)
                    if params.gamma - 1e-9 <= wt <= params.window_top + 1e-9:
                        out.add(tree.canonical())
    return out


def all_tables(system: EventSystem, width, limit: int = 2**20) -> Iterable[tuple[EvaluationTable, Fraction]]:
    """Every complete table with its product probability.

    ``width`` is one width for all rows or a per-variable list of widths.
    """
    widths = [width] * system.n if isinstance(width, int) else list(width)
    count = 1
    for v, w in zip(system.variables, widths):
        count *= len(v.domain) ** w
    if count > limit:
        raise SpaceTooLarge(f"{count} tables exceed the limit of {limit}")
    per_var = [list(itertools.product(v.domain, repeat=w)) for v, w in zip(system.variables, widths)]
    for rows in itertools.product(*per_var):
        prob = Fraction(1)
        for row in rows:
            for _, q in row:
                prob *= Fraction(q)
        yield EvaluationTable([[v for v, _ in row] for row in rows]), prob


def read_widths(system: EventSystem, witnesses: Sequence[PartialWitnessTree]) -> list[int]:
    """Per-variable count of table columns any of ``witnesses`` can read."""
    widths = [0] * system.n
    for t in witnesses:
        for cells in cell_assignment(t, system).values():
            for p, col in cells:
                widths[p] = max(widths[p], col)
    return widths


def brute_force_phi(system: EventSystem, witnesses: Sequence[PartialWitnessTree], width=None,
                    limit: int = 2**20) -> Fraction:
    """Expected number of witnesses passing the T-check over a randomly drawn complete table.

    Cells no witness reads cannot change the count, so by default each row
    only gets the columns the witnesses can reach.
    """
    if width is None:
        width = read_widths(system, witnesses)
    total = Fraction(0)
    for table, prob in all_tables(system, width, limit):
        passing = sum(1 for t in witnesses if t_check(t, table, system).passed)
        total += prob * passing
    return total


def reference_resample(system: EventSystem, table: EvaluationTable, max_steps: int = 10**6):
    """Plain table-driven resampling: recompute every event from scratch at every step.

    Returns ``(log, assignment)``, or ``(log, None)`` if the table or step
    budget ran out.
    """
    cursor = [0] * system.n
    log = []
    while len(log) < max_steps:
        values = [table.rows[p][cursor[p]] for p in range(system.n)]
        bad = [e.id for e in system.events if e.happens(values)]
        if not bad:
            return log, values
        a = bad[0]
        if any(cursor[p] + 1 >= len(table.rows[p]) for p in system.events[a].vbl):
            return log, None
        for p in system.events[a].vbl:
            cursor[p] += 1
        log.append(a)
    return log, None
