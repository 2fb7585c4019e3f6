"""Split trees, partial witness trees, evaluation tables and the T-check."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import InputError
from .model import EventSystem, LLLParams


@dataclass(frozen=True)
class SplitTree:
    """Binary tree of variable subsets of one event's scope, stored in preorder.

    ``children[i]`` is ``None`` for a leaf, else the indices of the two
    children of node ``i``.  Node 0 is the root and carries ``vbl(owner)``.
    """

    owner: int
    nodes: tuple[frozenset[int], ...]
    children: tuple[tuple[int, int] | None, ...]

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, subset):
        return frozenset(subset) in self.nodes

    @property
    def leaves(self) -> tuple[frozenset[int], ...]:
        return tuple(s for s, c in zip(self.nodes, self.children) if c is None)


def build_split_tree(system: EventSystem, event: int, leaf_partition=None) -> SplitTree:
    """Balanced binary merge of ``leaf_partition`` (singletons by default).

    Leaves are ordered by their smallest variable id and each internal node
    sends the first ``ceil(k/2)`` of its ``k`` leaves to the left child.
    """
    scope = system.events[event].scope
    if leaf_partition is None:
        leaf_partition = [[p] for p in sorted(scope)]
    leaves = [frozenset(part) for part in leaf_partition]
    seen = set()
    for part in leaves:
        if not part:
            raise InputError(f"empty leaf set in split tree of event {event}")
        if part & seen:
            raise InputError(f"overlapping leaf sets in split tree of event {event}")
        seen |= part
    if seen != scope:
        raise InputError(f"leaf sets of event {event} do not cover its scope exactly")
    leaves.sort(key=min)

    nodes: list[frozenset[int]] = []
    children: list[tuple[int, int] | None] = []

    def build(parts) -> int:
        idx = len(nodes)
        nodes.append(frozenset().union(*parts))
        children.append(None)
        if len(parts) > 1:
            half = (len(parts) + 1) // 2
            left = build(parts[:half])
            right = build(parts[half:])
            children[idx] = (left, right)
        return idx

    build(leaves)
    return SplitTree(event, tuple(nodes), tuple(children))


def default_split_trees(system: EventSystem) -> list[SplitTree]:
    return [build_split_tree(system, a) for a in range(system.m)]


class EvaluationTable:
    """Per-variable rows of values, addressed by 1-based column."""

    __slots__ = ("rows",)

    def __init__(self, rows: Sequence[Sequence]):
        self.rows = tuple(tuple(r) for r in rows)

    @property
    def width(self) -> int:
        return min((len(r) for r in self.rows), default=0)

    def value(self, p: int, col: int):
        return self.rows[p][col - 1]

    def column(self, col: int) -> list:
        return [r[col - 1] for r in self.rows]

    def __eq__(self, other):
        return isinstance(other, EvaluationTable) and self.rows == other.rows

    def __repr__(self):
        return f"EvaluationTable({self.rows!r})"

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence]) -> "EvaluationTable":
        return cls(list(zip(*columns)))

    def to_json(self) -> list:
        return [list(r) for r in self.rows]


@dataclass(frozen=True)
class PartialWitnessTree:
    """A rooted tree whose non-root vertices carry event labels.

    Non-root vertices are numbered in creation order; ``parents[i]`` is the
    index of vertex ``i``'s parent or ``-1`` for the root.  For a full witness
    the root is the event ``owner`` and is itself checked by the T-check.
    """

    root_set: frozenset[int]
    owner: int
    full: bool
    labels: tuple[int, ...] = ()
    parents: tuple[int, ...] = ()

    @property
    def root_label(self):
        return self.owner if self.full else self.root_set

    @property
    def depths(self) -> tuple[int, ...]:
        out: list[int] = []
        for par in self.parents:
            out.append(1 if par < 0 else out[par] + 1)
        return tuple(out)

    def __len__(self):
        return len(self.labels)

    def children(self, vertex: int = -1) -> list[int]:
        return [i for i, par in enumerate(self.parents) if par == vertex]

    def levels(self) -> list[list[int]]:
        out: list[list[int]] = []
        for i, d in enumerate(self.depths):
            while len(out) < d:
                out.append([])
            out[d - 1].append(i)
        return out

    def is_proper(self) -> bool:
        for v in [-1, *range(len(self.labels))]:
            kids = [self.labels[c] for c in self.children(v)]
            if len(kids) != len(set(kids)):
                return False
        return True

    def has_independent_levels(self, system: EventSystem) -> bool:
        for level in self.levels():
            labels = [self.labels[i] for i in level]
            for i, a in enumerate(labels):
                for b in labels[i + 1:]:
                    if a == b or system.adjacent(a, b):
                        return False
        return True

    def is_well_formed(self, system: EventSystem) -> bool:
        for i, (label, par) in enumerate(zip(self.labels, self.parents)):
            if par < 0:
                if not system.events[label].scope & self.root_set:
                    return False
            elif label not in system.gamma_plus(self.labels[par]):
                return False
        return True

    def canonical(self) -> str:
        """Canonical text form: root label, children sorted by label and subtree."""

        def render(v: int) -> str:
            kids = sorted((self.labels[c], render(c)) for c in self.children(v))
            head = f"A{self.labels[v]}"
            if not kids:
                return head
            return head + "(" + ",".join(s for _, s in kids) + ")"

        root = f"A{self.owner}" if self.full else "{" + ",".join(map(str, sorted(self.root_set))) + "}"
        kids = sorted((self.labels[c], render(c)) for c in self.children(-1))
        if not kids:
            return root
        return root + "(" + ",".join(s for _, s in kids) + ")"

    def __str__(self):
        return self.canonical()


def construct_witness(system: EventSystem, log: Sequence[int], t: int, S, split_trees=None) -> PartialWitnessTree:
    """The partial witness tree associated with step ``t`` (1-based) and root set ``S``.

    Going backwards through ``log[:t-1]``, each event is attached below the
    deepest vertex whose label lies in its inclusive neighbourhood (earliest
    created vertex on ties), else below the root when it touches ``S``.
    """
    if not 1 <= t <= len(log):
        raise InputError(f"step {t} outside log of length {len(log)}")
    owner = log[t - 1]
    S = frozenset(S)
    if split_trees is not None:
        if S not in split_trees[owner]:
            raise InputError(f"{sorted(S)} is not a node of the split tree of event {owner}")
    elif not S or not S <= system.events[owner].scope:
        raise InputError(f"{sorted(S)} is not a subset of vbl({owner})")

    labels: list[int] = []
    parents: list[int] = []
    depths: list[int] = []
    for i in range(t - 2, -1, -1):
        c = log[i]
        gplus = system.gamma_plus(c)
        best = -1
        best_depth = 0
        for v, label in enumerate(labels):
            if depths[v] > best_depth and label in gplus:
                best, best_depth = v, depths[v]
        if best >= 0:
            labels.append(c)
            parents.append(best)
            depths.append(best_depth + 1)
        elif system.events[c].scope & S:
            labels.append(c)
            parents.append(-1)
            depths.append(1)
    full = S == system.events[owner].scope
    return PartialWitnessTree(S, owner, full, tuple(labels), tuple(parents))


def witness_weight(tree: PartialWitnessTree, params: LLLParams) -> float:
    """Sum of the event weights over the non-root vertices."""
    return sum(params.w[a] for a in tree.labels)


def witness_xprod(tree: PartialWitnessTree, params: LLLParams):
    """Product of x' over the non-root vertices (exact when x' is)."""
    out = 1
    for a in tree.labels:
        out = out * params.x_prime[a]
    return out


def checked_vertices(tree: PartialWitnessTree) -> list[tuple[int, int]]:
    """(vertex, event) pairs in T-check order; the root of a full witness is vertex -1."""
    depths = tree.depths
    order = sorted(range(len(tree.labels)), key=lambda i: (-depths[i], tree.labels[i], i))
    out = [(i, tree.labels[i]) for i in order]
    if tree.full:
        out.append((-1, tree.owner))
    return out


def cell_assignment(tree: PartialWitnessTree, system: EventSystem) -> dict[int, tuple[tuple[int, int], ...]]:
    """Table cells read by each checked vertex during the T-check.

    Vertices are visited by decreasing depth (then event id) and every
    variable hands out its columns consecutively from 1, so a vertex reads
    column ``|S(p)| + 1`` where ``S(p)`` are the earlier visited vertices on
    ``p``.
    """
    used: dict[int, int] = {}
    out = {}
    for v, a in checked_vertices(tree):
        cells = []
        for p in system.events[a].vbl:
            col = used.get(p, 0) + 1
            used[p] = col
            cells.append((p, col))
        out[v] = tuple(cells)
    return out


@dataclass(frozen=True)
class TCheckResult:
    status: str  # "pass", "fail" or "exhausted"
    cells: tuple[tuple[int, int], ...]

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def t_check(tree: PartialWitnessTree, table: EvaluationTable, system: EventSystem) -> TCheckResult:
    """Replay ``tree`` against ``table``; every checked vertex's event must happen."""
    assignment = cell_assignment(tree, system)
    consumed: list[tuple[int, int]] = []
    for v, a in checked_vertices(tree):
        cells = assignment[v]
        values = {}
        for p, col in cells:
            if col > len(table.rows[p]):
                return TCheckResult("exhausted", tuple(consumed))
            values[p] = table.value(p, col)
        consumed.extend(cells)
        if not system.events[a].happens(values):
            return TCheckResult("fail", tuple(consumed))
    return TCheckResult("pass", tuple(consumed))
