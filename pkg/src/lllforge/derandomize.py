"""Forbidden witnesses, the conditional expectation Phi and the deterministic solver.

The table is built by the method of conditional probabilities: cells are
fixed in (variable, column) order, each to the value minimising the expected
number of forbidden witnesses that pass the T-check.  With rational variable
probabilities every witness probability is kept as an integer numerator over
one common denominator, so Phi is exact and every comparison is exact.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .engine import RunReport, run_with_table
from .errors import ConsistencyError, EnumerationBoundExceeded, ValidationFailure
from .model import FLOAT_TOL, EventSystem, LLLParams, derive_params, is_exact, validate_lll_condition
from .witness import (
    EvaluationTable,
    PartialWitnessTree,
    SplitTree,
    cell_assignment,
    checked_vertices,
    default_split_trees,
    witness_weight,
)

log = logging.getLogger(__name__)

Cell = tuple[int, int]
Atom = tuple[int, tuple[Cell, ...]]  # (event, cells read by that vertex)


@dataclass
class ForbiddenSet:
    """F1 (single light events) followed by F2 (heavy-event trees in the weight window)."""

    f1: list[PartialWitnessTree]
    f2: list[PartialWitnessTree]
    weights: list[float]
    atoms: list[tuple[Atom, ...]] = field(repr=False)
    independent_levels: bool = False
    minimal: bool = False

    @property
    def witnesses(self) -> list[PartialWitnessTree]:
        return self.f1 + self.f2

    def __len__(self):
        return len(self.f1) + len(self.f2)

    @property
    def max_column(self) -> int:
        return max((col for atoms in self.atoms for _, cells in atoms for _, col in cells), default=0)

    @property
    def max_vertices(self) -> int:
        return max((len(t) for t in self.f2), default=0)

    def to_json(self, limit: int | None = None) -> dict:
        items = list(zip(self.witnesses, self.weights))
        if limit is not None:
            items = items[:limit]
        return {
            "count": len(self),
            "f1": len(self.f1),
            "f2": len(self.f2),
            "independent_levels": self.independent_levels,
            "minimal": self.minimal,
            "witnesses": [{"tree": t.canonical(), "weight": w} for t, w in items],
        }


def level_signature(tree: PartialWitnessTree) -> tuple:
    """Root set plus the sorted labels of every level."""
    return (tree.root_set, tuple(tuple(sorted(tree.labels[i] for i in lvl)) for lvl in tree.levels()))


def _atoms_of(tree: PartialWitnessTree, system: EventSystem) -> tuple[Atom, ...]:
    cells = cell_assignment(tree, system)
    return tuple((a, cells[v]) for v, a in checked_vertices(tree))


def _proper_trees(system, params, heavy, roots_touch, budget):
    """Depth-first generation of proper trees below a root; yields (nested, weight, xprod)."""
    w, xp = params.w, params.x_prime
    gplus = {a: sorted(system.gamma_plus(a) & heavy) for a in heavy}

    def subtrees(label, room):
        if w[label] > room + FLOAT_TOL:
            return
        for forest, fw, fx in forests(gplus[label], 0, room - w[label]):
            yield (label, forest), w[label] + fw, xp[label] * fx

    def forests(cands, i, room):
        if i == len(cands):
            yield (), 0.0, 1
            return
        yield from forests(cands, i + 1, room)
        for sub, sw, sx in subtrees(cands[i], room):
            for rest, rw, rx in forests(cands, i + 1, room - sw):
                yield (sub,) + rest, sw + rw, sx * rx

    yield from forests(roots_touch, 0, budget)


def _flatten(root_set, owner, forest) -> PartialWitnessTree:
    labels: list[int] = []
    parents: list[int] = []

    def visit(node, parent):
        label, kids = node
        labels.append(label)
        parents.append(parent)
        me = len(labels) - 1
        for kid in kids:
            visit(kid, me)

    for node in forest:
        visit(node, -1)
    return PartialWitnessTree(root_set, owner, False, tuple(labels), tuple(parents))


def _level_sequences(system, params, heavy, first, budget, single_budget=None):
    """Sequences of independent label sets, each label below some label of the previous level.

    ``single_budget(v)`` caps the total weight of sequences whose first level
    is the single label ``v``.
    """
    w, xp = params.w, params.x_prime
    min_w = min(w[a] for a in heavy)

    def independent_sets(cands, room):
        chosen: list[int] = []

        def rec(i, used):
            if chosen:
                yield tuple(chosen), used
            for j in range(i, len(cands)):
                c = cands[j]
                if used + w[c] > room + FLOAT_TOL:
                    continue
                if any(system.adjacent(c, b) for b in chosen):
                    continue
                chosen.append(c)
                yield from rec(j + 1, used + w[c])
                chosen.pop()

        yield from rec(0, 0.0)

    def rec(levels, cands, weight, xprod, cap):
        for level, lw in independent_sets(cands, cap - weight):
            lx = 1
            for a in level:
                lx = lx * xp[a]
            nxt = levels + [level]
            level_cap = cap
            if not levels and single_budget is not None and len(level) == 1:
                level_cap = min(cap, single_budget(level[0]))
            yield nxt, weight + lw, xprod * lx
            if weight + lw + min_w <= level_cap + FLOAT_TOL:
                below = set()
                for a in level:
                    below |= system.gamma_plus(a)
                yield from rec(nxt, sorted(below & heavy), weight + lw, xprod * lx, level_cap)

    yield from rec([], first, 0.0, 1, budget)


def _tree_from_levels(system, root_set, owner, levels) -> PartialWitnessTree:
    labels: list[int] = []
    parents: list[int] = []
    prev: list[int] = []
    for level in levels:
        cur = []
        for a in level:
            par = -1
            if prev:
                gplus = system.gamma_plus(a)
                par = next(v for v in prev if labels[v] in gplus)
            labels.append(a)
            parents.append(par)
            cur.append(len(labels) - 1)
        prev = cur
    return PartialWitnessTree(root_set, owner, False, tuple(labels), tuple(parents))


def _level_atoms(system, levels) -> tuple[Atom, ...]:
    used: dict[int, int] = {}
    out = []
    for level in reversed(levels):
        for a in level:
            cells = []
            for p in system.events[a].vbl:
                col = used.get(p, 0) + 1
                used[p] = col
                cells.append((p, col))
            out.append((a, tuple(cells)))
    return tuple(out)


def _single_child_excess(tree: PartialWitnessTree, params: LLLParams, weight: float, xprod) -> bool:
    """For a root with one child v: whether the subtree below the root (minus v) already reaches gamma."""
    kids = tree.children(-1)
    if len(kids) != 1:
        return False
    v = tree.labels[kids[0]]
    rest_x = xprod / params.x_prime[v] if xprod != 1 else 1
    return params.at_least_gamma(weight - params.w[v], rest_x)


def enumerate_forbidden(
    system: EventSystem,
    params: LLLParams,
    split_trees: Sequence[SplitTree] | None = None,
    independent_levels: bool = False,
    minimal: bool = False,
) -> ForbiddenSet:
    """Enumerate F1 and F2 in canonical order.

    F2 roots run over heavy events by id and their split-tree nodes in
    preorder (a root set reached again from a later event is skipped).
    Both flags shrink F2 while keeping every witness that a least-weight
    occurring tree of weight >= gamma could be:

    * ``independent_levels`` keeps only trees whose levels are independent
      sets, one tree per level sequence.
    * ``minimal`` drops trees whose root has a single child ``v`` and whose
      weight without ``v`` already reaches gamma (the subtree at ``v`` would
      be a lighter occurring tree of weight >= gamma).
    """
    if split_trees is None:
        split_trees = default_split_trees(system)
    heavy = params.heavy_set
    f1 = [
        PartialWitnessTree(e.scope, e.id, True)
        for e in system.events
        if e.id not in heavy
    ]
    weights = [params.w[t.owner] for t in f1]
    f2: list[PartialWitnessTree] = []
    f2_atoms: list[tuple[Atom, ...]] = []
    bound = params.enumeration_bound
    budget = params.window_top
    seen_roots = set()
    for a in sorted(heavy):
        for S in split_trees[a].nodes:
            if S in seen_roots:
                continue
            seen_roots.add(S)
            first = sorted(system.touching(S) & heavy)
            if independent_levels:
                single = (lambda v: params.gamma + params.w[v] + FLOAT_TOL) if minimal else None
                gen = (
                    (_tree_from_levels(system, S, a, levels), wt, xprod, _level_atoms(system, levels))
                    for levels, wt, xprod in _level_sequences(system, params, heavy, first, budget, single)
                )
            else:
                gen = (
                    (_flatten(S, a, forest), wt, xprod, None)
                    for forest, wt, xprod in _proper_trees(system, params, heavy, first, budget)
                )
            for tree, wt, xprod, tree_atoms in gen:
                if not tree.labels:
                    continue
                if minimal and _single_child_excess(tree, params, wt, xprod):
                    continue
                if params.in_window(wt, xprod):
                    f2.append(tree)
                    weights.append(wt)
                    f2_atoms.append(tree_atoms if tree_atoms is not None else _atoms_of(tree, system))
                    if len(f1) + len(f2) >= bound:
                        raise EnumerationBoundExceeded(
                            f"forbidden set exceeds M^(2(1+1/eps)) = {bound:.3g}"
                        )
    atoms = [_atoms_of(t, system) for t in f1] + f2_atoms
    return ForbiddenSet(f1, f2, weights, atoms, independent_levels, minimal)


class PartialTable:
    """Table cells fixed so far; every other cell is an independent fresh draw."""

    def __init__(self, width: int, fixed: dict[Cell, object] | None = None):
        self.width = width
        self.fixed: dict[Cell, object] = dict(fixed or {})

    def fix(self, p: int, col: int, value) -> None:
        if not 1 <= col <= self.width:
            raise ValueError(f"column {col} outside 1..{self.width}")
        self.fixed[(p, col)] = value

    def values_for(self, cells) -> dict[int, object]:
        out = {}
        for p, col in cells:
            v = self.fixed.get((p, col), _MISSING)
            if v is not _MISSING:
                out[p] = v
        return out

    @classmethod
    def from_table(cls, table: EvaluationTable) -> "PartialTable":
        fixed = {(p, c + 1): v for p, row in enumerate(table.rows) for c, v in enumerate(row)}
        return cls(table.width, fixed)


_MISSING = object()


def consistency_probability(witness: PartialWitnessTree, partial: PartialTable, system: EventSystem):
    """Probability that ``witness`` passes the T-check on a table completing ``partial``."""
    cells = cell_assignment(witness, system)
    out = 1
    for v, a in checked_vertices(witness):
        out = out * system.events[a].cond_prob(partial.values_for(cells[v]))
        if out == 0:
            return out
    return out


def phi(forbidden: ForbiddenSet, partial: PartialTable, system: EventSystem):
    """Expected number of forbidden witnesses consistent with a completion of ``partial``."""
    total = 0
    for atoms in forbidden.atoms:
        prob = 1
        for a, cells in atoms:
            prob = prob * system.events[a].cond_prob(partial.values_for(cells))
            if prob == 0:
                break
        total = total + prob
    return total


def _denominator(variable) -> int | None:
    den = 1
    for q in variable.probs:
        if not is_exact(q):
            return None
        den = math.lcm(den, Fraction(q).denominator)
    return den


class PhiTracker:
    """Incremental Phi over a forbidden set while table cells get fixed.

    Atom factors are conditional probabilities of one checked vertex given the
    fixed cells it reads.  In exact mode they are integers over the atom's
    fixed denominator ``prod_p den(p)``, witness values are integers over a
    common denominator, and Phi is an exact integer numerator.
    """

    def __init__(self, system: EventSystem, forbidden: ForbiddenSet, width: int):
        self.system = system
        self.partial = PartialTable(width)
        dens = [_denominator(v) for v in system.variables]
        self.exact = all(d is not None for d in dens)
        atom_ids: dict[Atom, int] = {}
        self.atom_event: list[int] = []
        self.atom_cells: list[tuple[Cell, ...]] = []
        self.atom_den: list[int] = []
        self.witness_atoms: list[tuple[int, ...]] = []
        for atoms in forbidden.atoms:
            ids = []
            for atom in atoms:
                idx = atom_ids.get(atom)
                if idx is None:
                    idx = atom_ids[atom] = len(self.atom_event)
                    a, cells = atom
                    for _, col in cells:
                        if col > width:
                            raise ConsistencyError(f"forbidden witness reads column {col} > width {width}")
                    self.atom_event.append(a)
                    self.atom_cells.append(cells)
                    self.atom_den.append(math.prod(dens[p] for p, _ in cells) if self.exact else 1)
                ids.append(idx)
            self.witness_atoms.append(tuple(ids))

        self.atom_value = [self._factor(i, {}) for i in range(len(self.atom_event))]
        self.cell_atoms: dict[Cell, list[int]] = {}
        for i, cells in enumerate(self.atom_cells):
            for cell in cells:
                self.cell_atoms.setdefault(cell, []).append(i)
        self.atom_witnesses: list[list[int]] = [[] for _ in self.atom_event]
        for wi, ids in enumerate(self.witness_atoms):
            for i in ids:
                self.atom_witnesses[i].append(wi)

        if self.exact:
            wden = [math.prod(self.atom_den[i] for i in ids) for ids in self.witness_atoms]
            self.denominator = math.lcm(1, *wden)
            self.value = [
                self.denominator // d * math.prod(self.atom_value[i] for i in ids)
                for d, ids in zip(wden, self.witness_atoms)
            ]
        else:
            self.denominator = 1
            self.value = [math.prod(self.atom_value[i] for i in ids) for ids in self.witness_atoms]
        self.total = sum(self.value)

    def _factor(self, atom: int, extra: dict[int, object]):
        fixed = self.partial.values_for(self.atom_cells[atom])
        fixed.update(extra)
        prob = self.system.events[self.atom_event[atom]].cond_prob(fixed)
        if not self.exact:
            return float(prob)
        scaled = Fraction(prob) * self.atom_den[atom]
        if scaled.denominator != 1:
            raise ConsistencyError(
                f"event {self.atom_event[atom]} returned {prob}, not a multiple of 1/{self.atom_den[atom]}"
            )
        return scaled.numerator

    @property
    def phi(self):
        if self.exact:
            return Fraction(self.total, self.denominator)
        return self.total

    def live_atoms(self, cell: Cell) -> list[int]:
        out = []
        for i in self.cell_atoms.get(cell, ()):
            if self.atom_value[i] and any(self.value[w] for w in self.atom_witnesses[i]):
                out.append(i)
        return out

    def delta(self, cell: Cell, value) -> tuple[object, dict[int, object]]:
        """Change in Phi if ``cell`` is fixed to ``value``, and the new atom factors."""
        p = cell[0]
        atoms = self.live_atoms(cell)
        new = {i: self._factor(i, {p: value}) for i in atoms}
        change = 0
        for i in atoms:
            old_f, new_f = self.atom_value[i], new[i]
            if old_f == new_f:
                continue
            for wi in self.atom_witnesses[i]:
                val = self.value[wi]
                if val:
                    if self.exact:
                        change += val // old_f * new_f - val
                    else:
                        change += val / old_f * new_f - val
        return change, new

    def commit(self, cell: Cell, value, new: dict[int, object]) -> None:
        for i, new_f in new.items():
            old_f = self.atom_value[i]
            if old_f == new_f:
                continue
            for wi in self.atom_witnesses[i]:
                val = self.value[wi]
                if val:
                    nv = val // old_f * new_f if self.exact else val / old_f * new_f
                    self.total += nv - val
                    self.value[wi] = nv
            self.atom_value[i] = new_f
        self.partial.fix(cell[0], cell[1], value)


FixCallback = Callable[[Cell, object, object, object], None]


def build_table(
    system: EventSystem,
    params: LLLParams,
    forbidden: ForbiddenSet,
    width: int | None = None,
    on_fix: FixCallback | None = None,
) -> EvaluationTable:
    """Fix every table cell to the value minimising Phi (lowest domain index on ties).

    ``on_fix(cell, value, phi_before, phi_after)`` is called for every cell a
    forbidden witness reads.  Raises ConsistencyError if Phi ever increases,
    starts at 1 or more, or ends above zero.
    """
    width = params.table_width if width is None else width
    tracker = PhiTracker(system, forbidden, width)
    if tracker.phi >= 1:
        raise ConsistencyError(f"Phi(empty) = {float(tracker.phi):.6g} >= 1; no good table is guaranteed")
    rows = []
    for p, var in enumerate(system.variables):
        row = []
        for col in range(1, width + 1):
            cell = (p, col)
            if not tracker.live_atoms(cell):
                tracker.partial.fix(p, col, var.values[0])
                row.append(var.values[0])
                continue
            before = tracker.phi
            best = None
            for value in var.values:
                change, new = tracker.delta(cell, value)
                if best is None or change < best[0]:
                    best = (change, value, new)
            change, value, new = best
            tracker.commit(cell, value, new)
            after = tracker.phi
            tol = 0 if tracker.exact else FLOAT_TOL
            if after > before + tol:
                raise ConsistencyError(f"Phi increased from {before} to {after} at cell {cell}")
            if on_fix is not None:
                on_fix(cell, value, before, after)
            row.append(value)
        rows.append(row)
    final = tracker.phi
    if final > (0 if tracker.exact else 0.5):
        raise ConsistencyError(f"Phi = {float(final):.6g} after fixing every cell")
    return EvaluationTable(rows)


@dataclass
class DeterministicResult:
    params: LLLParams
    forbidden: ForbiddenSet
    phi_empty: object
    table: EvaluationTable
    run: RunReport
    phi_trace: list = field(repr=False, default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def assignment(self) -> list:
        return self.run.assignment


def deterministic_pipeline(
    system: EventSystem,
    x,
    epsilon,
    split_trees: Sequence[SplitTree] | None = None,
    independent_levels: bool = True,
    record_trace: bool = False,
    minimal: bool = True,
) -> DeterministicResult:
    """Validate, derive parameters, enumerate F, build the table and replay it."""
    timings = {}
    t0 = time.perf_counter()
    report = validate_lll_condition(system, x, epsilon)
    if not report.ok:
        bad = report.violations()[0]
        raise ValidationFailure(
            f"event {bad.event}: Pr = {float(bad.probability):.6g} > x'^(1+eps) = {bad.bound:.6g}", report
        )
    if split_trees is None:
        split_trees = default_split_trees(system)
        split_sizes = None
    else:
        split_sizes = [len(t) for t in split_trees]
    params = derive_params(system, x, epsilon, split_sizes)
    t1 = time.perf_counter()
    forbidden = enumerate_forbidden(system, params, split_trees, independent_levels, minimal)
    t2 = time.perf_counter()
    trace: list = []
    phi_empty = []

    def on_fix(cell, value, before, after):
        if not phi_empty:
            phi_empty.append(before)
        if record_trace:
            trace.append((cell, value, before, after))

    width = max(params.table_width, forbidden.max_column)
    table = build_table(system, params, forbidden, width, on_fix)
    t3 = time.perf_counter()
    start = phi_empty[0] if phi_empty else 0
    if start >= Fraction(1, 2):
        raise ConsistencyError(f"Phi(empty) = {float(start):.6g} is not below 1/2")
    run = run_with_table(system, table, system.m * params.table_width)
    t4 = time.perf_counter()
    if not run.success:
        raise ConsistencyError(f"replay of the built table ended with outcome {run.outcome}")
    cap = params.table_width
    for a, count in enumerate(run.resamples):
        if count > cap:
            raise ConsistencyError(f"event {a} resampled {count} > {cap} times")
        if count and a not in params.heavy_set:
            raise ConsistencyError(f"light event {a} was resampled")
    timings.update(
        params_ms=(t1 - t0) * 1e3,
        enumerate_ms=(t2 - t1) * 1e3,
        table_ms=(t3 - t2) * 1e3,
        run_ms=(t4 - t3) * 1e3,
    )
    log.debug("det: |F|=%d phi=%s timings=%s", len(forbidden), start, timings)
    return DeterministicResult(params, forbidden, start, table, run, trace, timings)


def solve_deterministic(system: EventSystem, x, epsilon, split_trees=None, independent_levels: bool = True,
                        minimal: bool = True) -> list:
    """A good evaluation found without randomness."""
    return deterministic_pipeline(system, x, epsilon, split_trees, independent_levels, minimal=minimal).assignment


def solve_by_conditional_expectation(system: EventSystem) -> list:
    """Fix variables one by one, minimising the expected number of happening events.

    Needs ``sum_A Pr[A] < 1``; then the final assignment avoids every event.
    """
    fixed: dict[int, object] = {}
    total = sum(e.cond_prob({}) for e in system.events)
    if total >= 1:
        raise ConsistencyError(f"expected number of bad events is {float(total):.6g} >= 1")
    for p, var in enumerate(system.variables):
        touched = [system.events[a] for a in sorted(system.var_events[p])]
        best = None
        for value in var.values:
            fixed[p] = value
            score = sum(e.cond_prob(fixed) for e in touched)
            if best is None or score < best[0]:
                best = (score, value)
        fixed[p] = best[1]
    values = [fixed[p] for p in range(system.n)]
    if system.happening(values):
        raise ConsistencyError("conditional expectations left a bad event happening")
    return values
