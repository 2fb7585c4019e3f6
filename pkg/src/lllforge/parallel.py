"""Limited-independence table spaces and the round-based parallel solver.

A parallel run reads its table from a small indexed family of tables
instead of a random source.  Each round resamples a maximal independent set
of the happening events; the solver tries tables in index order and keeps
the lowest index that succeeds.

Two spaces are provided.  :func:`build_kwise_space` is exactly k-wise
independent over uniform bits: cell ``i`` is the low bit of a random
polynomial of degree < k evaluated at the field element ``i`` of GF(2^b),
which is a GF(2)-linear function of the seed.  :func:`build_exhaustive_space`
lists every table of a small system (delta = 0 trivially).
"""
from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .engine import EXHAUSTED, SUCCESS, RunReport
from .errors import ConsistencyError, InputError, SpaceTooLarge, UnsupportedDomain, ValidationFailure
from .model import EventSystem, LLLParams, derive_params, snap_ceil, validate_lll_condition
from .witness import EvaluationTable

log = logging.getLogger(__name__)

EXHAUSTIVE_CAP = 2**20
_SCRAMBLE = 0x9E3779B97F4A7C15  # odd, so index -> (index + 1) * _SCRAMBLE mod 2^r is a bijection


class ApproxSpace:
    """An indexed family of complete ``n x width`` tables.

    Every set of at most ``k`` cells has marginals within ``delta`` of the
    product distribution when the index is uniform over ``range(size)``.
    """

    kind = "abstract"

    def __init__(self, n: int, width: int, k: int, delta, size: int):
        self.n = n
        self.width = width
        self.k = k
        self.delta = delta
        self.size = size

    @property
    def cells(self) -> int:
        return self.n * self.width

    def __len__(self):
        return self.size

    def materialize(self, index: int) -> EvaluationTable:
        raise NotImplementedError

    def cell_distribution(self, cell: int) -> list[tuple[object, Fraction]]:
        """Distribution the space approximates at ``cell`` (row-major: ``p * width + col - 1``)."""
        raise NotImplementedError

    def _check_index(self, index: int):
        if not 0 <= index < self.size:
            raise IndexError(f"index {index} outside space of size {self.size}")

    def to_json(self) -> dict:
        return {"kind": self.kind, "k": self.k, "delta": float(self.delta), "size": self.size,
                "cells": self.cells}


class KWiseSpace(ApproxSpace):
    kind = "kwise"

    def __init__(self, n: int, width: int, k: int, field_bits: int, generator: np.ndarray, basis: list[int]):
        super().__init__(n, width, k, 0, 2 ** len(basis))
        self.field_bits = field_bits
        self.seed_bits = len(basis)
        self._gen = generator[:, basis].astype(np.int64)

    def seed(self, index: int) -> int:
        self._check_index(index)
        # index 0 should not be the all-zero seed (the all-zero table)
        return ((index + 1) * _SCRAMBLE) % self.size

    def bits(self, index: int) -> np.ndarray:
        s = self.seed(index)
        vec = np.array([(s >> j) & 1 for j in range(self.seed_bits)], dtype=np.int64)
        return (self._gen @ vec) & 1

    def materialize(self, index: int) -> EvaluationTable:
        return EvaluationTable(self.bits(index).reshape(self.n, self.width).tolist())

    def cell_distribution(self, cell: int):
        return [(0, Fraction(1, 2)), (1, Fraction(1, 2))]

    def to_json(self) -> dict:
        return super().to_json() | {"seed_bits": self.seed_bits, "field_bits": self.field_bits}


class ExhaustiveSpace(ApproxSpace):
    """Every table, each value repeated in proportion to its probability.

    A variable with probabilities ``a_i / L`` (``L`` the common denominator)
    gets ``L`` slots per cell; the index is a mixed-radix number over the
    cells in row-major order, so uniform indices give the product distribution.
    """

    kind = "exhaustive"

    def __init__(self, system: EventSystem, width: int, cap: int = EXHAUSTIVE_CAP):
        self._slots = []
        for var in system.variables:
            probs = [Fraction(q) for q in var.probs]
            lcm = math.lcm(*(q.denominator for q in probs))
            slots = []
            for value, q in zip(var.values, probs):
                slots += [value] * int(q * lcm)
            self._slots.append(tuple(slots))
        self._dist = [list(zip(v.values, (Fraction(q) for q in v.probs))) for v in system.variables]
        size = 1
        for slots in self._slots:
            size *= len(slots) ** width
            if size > cap:
                raise SpaceTooLarge(f"exhaustive space exceeds {cap} tables")
        super().__init__(system.n, width, system.n * width, 0, size)

    def materialize(self, index: int) -> EvaluationTable:
        self._check_index(index)
        rows = []
        for slots in self._slots:
            row = []
            for _ in range(self.width):
                index, r = divmod(index, len(slots))
                row.append(slots[r])
            rows.append(row)
        return EvaluationTable(rows)

    def cell_distribution(self, cell: int):
        return self._dist[cell // self.width]


def build_exhaustive_space(system: EventSystem, width: int, cap: int = EXHAUSTIVE_CAP) -> ExhaustiveSpace:
    if width < 1:
        raise InputError("width must be positive")
    return ExhaustiveSpace(system, width, cap)


# -- GF(2^b) arithmetic ------------------------------------------------------

def _poly_mod(a: int, b: int) -> int:
    db = b.bit_length()
    while a.bit_length() >= db:
        a ^= b << (a.bit_length() - db)
    return a


@lru_cache(maxsize=None)
def irreducible_poly(bits: int) -> int:
    """Lowest-valued irreducible polynomial of degree ``bits`` over GF(2), as an int."""
    if bits < 1:
        raise ValueError("degree must be positive")
    for cand in range((1 << bits) | 1, 1 << (bits + 1), 2):
        if all(_poly_mod(cand, d) for d in range(2, 1 << (bits // 2 + 1))):
            return cand
    raise AssertionError("unreachable: irreducible polynomials exist in every degree")


def _gf_mul(a: np.ndarray, b: np.ndarray, poly: int, bits: int) -> np.ndarray:
    out = np.zeros_like(a)
    a = a.copy()
    top = 1 << bits
    for i in range(bits):
        out ^= np.where((b >> i) & 1, a, 0)
        a <<= 1
        a = np.where(a & top, a ^ poly, a)
    return out


def _low_bit_functionals(poly: int, bits: int) -> np.ndarray:
    """Row t is the linear functional y -> low bit of (x^t * y) as a 0/1 vector over y's bits."""
    powers = [1]
    for _ in range(2 * bits):
        nxt = powers[-1] << 1
        if nxt >> bits:
            nxt ^= poly
        powers.append(nxt)
    return np.array([[powers[t + s] & 1 for s in range(bits)] for t in range(bits)], dtype=np.int64)


def _independent_columns(gen: np.ndarray) -> list[int]:
    basis: dict[int, int] = {}  # pivot bit -> reduced column
    keep = []
    for j in range(gen.shape[1]):
        col = int("".join("1" if b else "0" for b in gen[::-1, j]) or "0", 2)
        while col:
            top = col.bit_length() - 1
            if top not in basis:
                basis[top] = col
                keep.append(j)
                break
            col ^= basis[top]
    return keep


def build_kwise_space(n_cells: int, k: int, shape: tuple[int, int] | None = None) -> KWiseSpace:
    """Exactly k-wise independent uniform bits for ``n_cells`` cells.

    Cell ``i`` gets the low bit of ``sum_j a_j * i^j`` (``j < k``) in GF(2^b)
    with ``b = ceil(log2(n_cells + 1))``.  The seed ``(a_0, ..., a_{k-1})``
    has ``k*b`` bits, but only a basis of the generator's columns is kept,
    so the space has ``2^rank`` tables.  ``shape = (n, width)`` lays the
    cells out as a table, row-major.
    """
    if k < 1:
        raise InputError("k must be at least 1")
    if n_cells < 1:
        raise InputError("need at least one cell")
    n, width = shape if shape is not None else (1, n_cells)
    if n * width != n_cells:
        raise InputError(f"shape {shape} does not hold {n_cells} cells")
    bits = max(1, math.ceil(math.log2(n_cells + 1)))
    poly = irreducible_poly(bits)
    functionals = _low_bit_functionals(poly, bits)
    alpha = np.arange(n_cells, dtype=np.int64)
    power = np.ones(n_cells, dtype=np.int64)
    shifts = np.arange(bits, dtype=np.int64)
    blocks = []
    for _ in range(min(k, n_cells)):
        power_bits = (power[:, None] >> shifts[None, :]) & 1  # cells x bits
        blocks.append((power_bits @ functionals.T) & 1)
        power = _gf_mul(power, alpha, poly, bits)
    gen = np.concatenate(blocks, axis=1)
    return KWiseSpace(n, width, k, bits, gen, _independent_columns(gen))


def _is_uniform_binary(system: EventSystem) -> bool:
    return all(
        list(v.values) == [0, 1] and Fraction(v.probs[0]) == Fraction(v.probs[1]) == Fraction(1, 2)
        for v in system.variables
    )


def space_for(system: EventSystem, width: int, k: int, cap: int = EXHAUSTIVE_CAP) -> ApproxSpace:
    """The k-wise space for uniform bits, else the exhaustive space when it fits."""
    if system.n == 0:
        return build_exhaustive_space(system, width, cap)
    if _is_uniform_binary(system):
        return build_kwise_space(system.n * width, k, (system.n, width))
    try:
        return build_exhaustive_space(system, width, cap)
    except SpaceTooLarge:
        raise UnsupportedDomain(
            "k-wise space needs uniform binary variables and the exhaustive space is too large"
        ) from None


def _all_tables(space: ApproxSpace):
    dists = [space.cell_distribution(c) for c in range(space.cells)]
    for combo in itertools.product(*dists):
        prob = Fraction(1)
        for _, q in combo:
            prob *= q
        values = [v for v, _ in combo]
        rows = [values[p * space.width:(p + 1) * space.width] for p in range(space.n)]
        yield EvaluationTable(rows), prob


def verify_indistinguishability(space: ApproxSpace, predicate: Callable[[EvaluationTable], bool],
                                dt_depth: int, limit: int = 2**16):
    """|E_space(predicate) - E_product(predicate)| by enumerating both distributions.

    Asserts the result is at most ``D**dt_depth * delta``.
    """
    if dt_depth > space.k:
        raise InputError(f"decision-tree depth {dt_depth} exceeds k = {space.k}")
    n_product = 1
    for c in range(space.cells):
        n_product *= len(space.cell_distribution(c))
    if space.size > limit or n_product > limit:
        raise SpaceTooLarge(f"space of {space.size} or product of {n_product} tables is above {limit}")
    hits = sum(1 for i in range(space.size) if predicate(space.materialize(i)))
    e_space = Fraction(hits, space.size)
    e_true = sum((q for table, q in _all_tables(space) if predicate(table)), Fraction(0))
    dev = abs(e_space - e_true)
    D = max((len(space.cell_distribution(c)) for c in range(space.cells)), default=1)
    bound = Fraction(space.delta) * D**dt_depth if space.delta else 0
    if dev > bound:
        raise ConsistencyError(f"deviation {dev} above D^k * delta = {bound}")
    return dev


@dataclass
class DecisionTreeBudget:
    """Per-event budgets ``ceil(c * min(w(A), log2 M))``; global ``k = ceil(2 c gamma)``."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise InputError("budget constant c must be positive")

    def event_budget(self, params: LLLParams, a: int) -> int:
        return snap_ceil(self.c * min(params.w[a], math.log2(params.M)))

    def global_k(self, params: LLLParams) -> int:
        return max(1, snap_ceil(2 * self.c * params.gamma))

    def certify(self, system: EventSystem, params: LLLParams) -> None:
        for e in system.events:
            if e.dt_complexity is None:
                raise InputError(f"event {e.id} has no declared decision-tree complexity")
            if e.dt_complexity > self.event_budget(params, e.id):
                raise InputError(
                    f"event {e.id}: decision-tree complexity {e.dt_complexity} above budget "
                    f"{self.event_budget(params, e.id)}"
                )

    @classmethod
    def fit(cls, system: EventSystem, params: LLLParams) -> "DecisionTreeBudget":
        """Smallest c that certifies every event's declared complexity."""
        c = 1e-9
        for e in system.events:
            if e.dt_complexity is None:
                raise InputError(f"event {e.id} has no declared decision-tree complexity")
            c = max(c, e.dt_complexity / min(params.w[e.id], math.log2(params.M)))
        budget = cls(c)
        budget.certify(system, params)
        return budget


def greedy_mis(system: EventSystem, events) -> list[int]:
    """Lowest-id-first maximal independent set of ``events`` in the dependency graph."""
    chosen: list[int] = []
    blocked: set[int] = set()
    for a in sorted(set(events)):
        if a in blocked:
            continue
        chosen.append(a)
        blocked |= system.gamma_plus(a)
    return chosen


def run_parallel_rounds(system: EventSystem, table: EvaluationTable, max_rounds: int) -> RunReport:
    """Resample a greedy MIS of the happening events per round.

    Succeeds only when no event happens after fewer than ``max_rounds``
    rounds.  ``steps`` counts rounds and ``log`` lists the resampled events
    round after round.
    """
    if len(table.rows) != system.n:
        raise InputError(f"table has {len(table.rows)} rows for {system.n} variables")
    cursors = [1] * system.n
    resamples = [0] * system.m
    log_: list[int] = []
    rounds: list[list[int]] = []

    def values():
        return [table.rows[p][cursors[p] - 1] for p in range(system.n)]

    current = values()
    outcome = SUCCESS
    while True:
        happening = system.happening(current)
        if not happening:
            break
        if len(rounds) + 1 >= max_rounds:
            outcome = EXHAUSTED
            break
        mis = greedy_mis(system, happening)
        touched = set()
        for a in mis:
            touched.update(system.events[a].vbl)
        if any(cursors[p] >= len(table.rows[p]) for p in touched):
            outcome = EXHAUSTED
            break
        for p in touched:
            cursors[p] += 1
        for a in mis:
            resamples[a] += 1
        log_.extend(mis)
        rounds.append(mis)
        current = values()
    return RunReport(outcome, current, log_, resamples, list(cursors), len(rounds), table, rounds)


@dataclass
class ParallelResult:
    params: LLLParams
    budget: DecisionTreeBudget
    space: ApproxSpace
    index: int
    run: RunReport
    tried: int
    timings: dict = field(default_factory=dict)

    @property
    def assignment(self) -> list:
        return self.run.assignment


def solve_parallel(
    system: EventSystem,
    x,
    epsilon,
    budget: DecisionTreeBudget | None = None,
    split_sizes: Sequence[int] | None = None,
    workers: int = 1,
    batch: int = 16,
    max_tables: int | None = None,
    space: ApproxSpace | None = None,
) -> ParallelResult:
    """Run MIS rounds on tables of a k-wise space and keep the lowest succeeding index.

    Tables are scanned in fixed batches of ``batch`` indices; a batch is
    finished completely before the minimum is taken, so the answer does not
    depend on ``workers``.
    """
    t0 = time.perf_counter()
    report = validate_lll_condition(system, x, epsilon)
    if not report.ok:
        bad = report.violations()[0]
        raise ValidationFailure(f"event {bad.event} violates the LLL condition", report)
    params = derive_params(system, x, epsilon, split_sizes)
    if budget is None:
        budget = DecisionTreeBudget.fit(system, params) if system.m else DecisionTreeBudget(1.0)
    else:
        budget.certify(system, params)
    k = budget.global_k(params)
    width = params.max_rounds + 1
    if space is None:
        space = space_for(system, width, k)
    elif space.n != system.n:
        raise InputError(f"space has {space.n} rows for {system.n} variables")
    t1 = time.perf_counter()
    limit = space.size if max_tables is None else min(space.size, max_tables)

    def attempt(i):
        return i, run_parallel_rounds(system, space.materialize(i), params.max_rounds)

    found = None
    tried = 0
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for start in range(0, limit, batch):
            idx = range(start, min(limit, start + batch))
            results = list(pool.map(attempt, idx))
            tried += len(idx)
            ok = [(i, r) for i, r in results if r.success]
            if ok:
                found = min(ok, key=lambda t: t[0])
                break
    t2 = time.perf_counter()
    if found is None:
        raise ConsistencyError(f"none of the first {tried} tables of the space succeeded")
    index, run = found
    log.debug("par: index=%d rounds=%d tried=%d", index, run.steps, tried)
    return ParallelResult(params, budget, space, index, run, tried,
                          {"space_ms": (t1 - t0) * 1e3, "rounds_ms": (t2 - t1) * 1e3})
