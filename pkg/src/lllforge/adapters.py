"""k-CNF and hypergraph 2-coloring front-ends, plus their text formats."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .derandomize import solve_by_conditional_expectation
from .errors import ClauseCountMismatch, InputError, LiteralOutOfRange, MalformedHeader
from .model import (
    BadEvent,
    EventSystem,
    ValidationReport,
    Variable,
    build_event_system,
    validate_lll_condition,
)
from .witness import SplitTree, build_split_tree, default_split_trees


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for i, clause in enumerate(self.clauses):
            if not clause:
                raise InputError(f"clause {i + 1} is empty")
            seen = set()
            for lit in clause:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise LiteralOutOfRange(f"literal {lit} in clause {i + 1} is out of range")
                if abs(lit) in seen:
                    raise InputError(f"clause {i + 1} mentions variable {abs(lit)} twice")
                seen.add(abs(lit))

    @property
    def m(self) -> int:
        return len(self.clauses)

    @property
    def k(self) -> int:
        return max((len(c) for c in self.clauses), default=0)

    def neighbors(self) -> list[set[int]]:
        by_var: dict[int, set[int]] = {}
        for i, clause in enumerate(self.clauses):
            for lit in clause:
                by_var.setdefault(abs(lit), set()).add(i)
        out = []
        for i, clause in enumerate(self.clauses):
            nb = set()
            for lit in clause:
                nb |= by_var[abs(lit)]
            nb.discard(i)
            out.append(nb)
        return out

    @property
    def d(self) -> int:
        return max((len(nb) for nb in self.neighbors()), default=0)

    def satisfied_by(self, assignment: Sequence[int]) -> bool:
        return all(
            any((assignment[abs(l) - 1] == 1) == (l > 0) for l in clause) for clause in self.clauses
        )


def parse_dimacs(text: str) -> CnfFormula:
    """Parse DIMACS CNF; the clause count in the header must match exactly."""
    header = None
    clauses: list[tuple[int, ...]] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            parts = line.split()
            if header is not None or len(parts) != 4 or parts[1] != "cnf":
                raise MalformedHeader(f"line {lineno}: bad problem line {line!r}")
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise MalformedHeader(f"line {lineno}: non-integer counts in {line!r}") from None
            if header[0] < 0 or header[1] < 0:
                raise MalformedHeader(f"line {lineno}: negative counts")
            continue
        if header is None:
            raise MalformedHeader(f"line {lineno}: clause before the problem line")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise InputError(f"line {lineno}: {tok!r} is not an integer literal") from None
            if lit == 0:
                clauses.append(tuple(current))
                current = []
                continue
            if abs(lit) > header[0]:
                raise LiteralOutOfRange(f"line {lineno}: literal {lit} exceeds {header[0]} variables")
            current.append(lit)
    if header is None:
        raise MalformedHeader("missing 'p cnf' problem line")
    if current:
        clauses.append(tuple(current))
    if len(clauses) != header[1]:
        raise ClauseCountMismatch(f"header declares {header[1]} clauses, found {len(clauses)}")
    return CnfFormula(header[0], tuple(clauses))


def to_dimacs(formula: CnfFormula) -> str:
    lines = [f"p cnf {formula.num_vars} {formula.m}"]
    lines += [" ".join(map(str, c)) + " 0" for c in formula.clauses]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Hypergraph:
    num_vertices: int
    edges: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for i, e in enumerate(self.edges):
            if not e:
                raise InputError(f"edge {i + 1} is empty")
            if len(set(e)) != len(e):
                raise InputError(f"edge {i + 1} repeats a vertex")
            for v in e:
                if not 1 <= v <= self.num_vertices:
                    raise LiteralOutOfRange(f"vertex {v} in edge {i + 1} is out of range")

    @property
    def k(self) -> int:
        return max((len(e) for e in self.edges), default=0)

    @property
    def m(self) -> int:
        return len(self.edges)

    def is_proper_coloring(self, colors: Sequence[int]) -> bool:
        return all(len({colors[v - 1] for v in e}) > 1 for e in self.edges)


def parse_hypergraph(text: str) -> Hypergraph:
    """'h <nverts> <nedges>' then one edge per line (1-based vertices, optional trailing 0)."""
    header = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("h"):
            parts = line.split()
            if header is not None or len(parts) != 3:
                raise MalformedHeader(f"line {lineno}: bad header {line!r}")
            try:
                header = (int(parts[1]), int(parts[2]))
            except ValueError:
                raise MalformedHeader(f"line {lineno}: non-integer counts in {line!r}") from None
            continue
        if header is None:
            raise MalformedHeader(f"line {lineno}: edge before the 'h' header")
        try:
            verts = [int(t) for t in line.split()]
        except ValueError:
            raise InputError(f"line {lineno}: non-integer vertex in {line!r}") from None
        if verts and verts[-1] == 0:
            verts.pop()
        for v in verts:
            if not 1 <= v <= header[0]:
                raise LiteralOutOfRange(f"line {lineno}: vertex {v} out of range")
        edges.append(tuple(verts))
    if header is None:
        raise MalformedHeader("missing 'h' header line")
    if len(edges) != header[1]:
        raise ClauseCountMismatch(f"header declares {header[1]} edges, found {len(edges)}")
    return Hypergraph(header[0], tuple(edges))


def to_hypergraph_text(h: Hypergraph) -> str:
    lines = [f"h {h.num_vertices} {h.m}"] + [" ".join(map(str, e)) + " 0" for e in h.edges]
    return "\n".join(lines) + "\n"


def clause_event(id: int, clause: Sequence[int]) -> BadEvent:
    """Event 'clause is unsatisfied' over uniform bits (variable ``v`` has id ``v-1``)."""
    lits = tuple((abs(l) - 1, 1 if l > 0 else 0) for l in clause)
    powers = [Fraction(1, 2**u) for u in range(len(lits) + 1)]

    def happens(values):
        for p, sat in lits:
            if values[p] == sat:
                return False
        return True

    def cond_prob(fixed):
        free = 0
        for p, sat in lits:
            v = fixed.get(p)
            if v is None:
                free += 1
            elif v == sat:
                return Fraction(0)
        return powers[free]

    return BadEvent(id, frozenset(p for p, _ in lits), happens, cond_prob, dt_complexity=len(lits), name=f"C{id + 1}")


def monochromatic_event(id: int, edge: Sequence[int]) -> BadEvent:
    verts = tuple(v - 1 for v in edge)
    powers = [Fraction(1, 2**u) for u in range(len(verts) + 1)]

    def happens(values):
        first = values[verts[0]]
        return all(values[v] == first for v in verts[1:])

    def cond_prob(fixed):
        seen = set()
        free = 0
        for v in verts:
            c = fixed.get(v)
            if c is None:
                free += 1
            else:
                seen.add(c)
        if len(seen) > 1:
            return Fraction(0)
        if seen:
            return powers[free]
        return 2 * powers[free]

    return BadEvent(id, frozenset(verts), happens, cond_prob, dt_complexity=len(verts), name=f"E{id + 1}")


def clique_cover_leaves(system: EventSystem, event: int) -> list[list[int]]:
    """Greedy partition of vbl(event) into groups whose touching events form a clique."""

    def is_clique(evs):
        evs = sorted(evs)
        return all(system.adjacent(a, b) for i, a in enumerate(evs) for b in evs[i + 1:])

    scope = sorted(system.events[event].scope, key=lambda p: (-len(system.var_events[p]), p))
    groups: list[tuple[list[int], set[int]]] = []
    for p in scope:
        touch = set(system.var_events[p])
        for vars_, evs in groups:
            if is_clique(evs | touch):
                vars_.append(p)
                evs |= touch
                break
        else:
            groups.append(([p], touch))
    return [sorted(v) for v, _ in groups]


def clique_cover_split_trees(system: EventSystem) -> list[SplitTree]:
    return [build_split_tree(system, a, clique_cover_leaves(system, a)) for a in range(system.m)]


@dataclass
class Instance:
    """An event system ready for the solvers, with its x values and split trees."""

    system: EventSystem
    x: tuple
    split_trees: list[SplitTree]
    degree: int
    k: int
    validation: ValidationReport | None = None
    source: object = field(default=None, repr=False)

    @property
    def degree_bound(self) -> float | None:
        """The sufficient degree 2^(k/(1+eps)) / e for the epsilon validated against."""
        if self.validation is None:
            return None
        return 2 ** (self.k / (1 + float(self.validation.epsilon))) / math.e


def _x_for_degree(d: int) -> Fraction:
    return Fraction(1, d + 1) if d >= 1 else Fraction(1, 2)


def _instance(system, degree, k, epsilon, clique_cover, source) -> Instance:
    x = tuple(_x_for_degree(degree) for _ in range(system.m))
    trees = clique_cover_split_trees(system) if clique_cover else default_split_trees(system)
    report = validate_lll_condition(system, x, epsilon) if epsilon is not None and system.m else None
    return Instance(system, x, trees, degree, k, report, source)


def cnf_system(formula: CnfFormula) -> EventSystem:
    variables = [Variable.uniform(p) for p in range(formula.num_vars)]
    events = [clause_event(i, c) for i, c in enumerate(formula.clauses)]
    return build_event_system(variables, events)


def cnf_event_system(formula: CnfFormula, epsilon=None, clique_cover: bool = True) -> Instance:
    """One 'clause unsatisfied' event per clause with x(A) = 1/(d+1).

    ``d`` is the largest number of other clauses any clause shares a
    variable with (``x = 1/2`` when no clauses interact).  When ``epsilon`` is
    given the exact LLL condition is checked and attached as ``validation``.
    """
    return _instance(cnf_system(formula), formula.d, formula.k, epsilon, clique_cover, formula)


def hypergraph2color_event_system(h: Hypergraph, epsilon=None, clique_cover: bool = True) -> Instance:
    """One 'edge is monochromatic' event per edge; one uniform color bit per vertex."""
    variables = [Variable.uniform(p) for p in range(h.num_vertices)]
    events = [monochromatic_event(i, e) for i, e in enumerate(h.edges)]
    system = build_event_system(variables, events)
    degree = max((len(system.gamma(a)) for a in range(system.m)), default=0)
    return _instance(system, degree, h.k, epsilon, clique_cover, h)


def cnf_fast_path(formula: CnfFormula) -> list[int]:
    """Method of conditional expectations over single assignments (no tables).

    Applies when the expected number of unsatisfied clauses is below 1,
    e.g. ``m * 2^-k <= 1/2``.
    """
    return solve_by_conditional_expectation(cnf_system(formula))


def load_instance(text: str, epsilon=None, clique_cover: bool = True) -> Instance:
    """Parse DIMACS CNF or the hypergraph format, chosen by the header line."""
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            return cnf_event_system(parse_dimacs(text), epsilon, clique_cover)
        if line.startswith("h"):
            return hypergraph2color_event_system(parse_hypergraph(text), epsilon, clique_cover)
        break
    raise MalformedHeader("input has neither a 'p cnf' nor an 'h' header")
