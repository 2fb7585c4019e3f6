"""Sequential resampling, either from a seeded random stream or from a fixed table.

Both modes share one loop: the lowest-id happening event is resampled by
advancing the column cursor of every variable in its scope.  The random mode
keeps the values it draws, so every randomized run is also a table run.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from itertools import accumulate

import numpy as np

from .model import EventSystem, LLLParams
from .witness import EvaluationTable

DEFAULT_MAX_STEPS = 10**6

SUCCESS = "success"
EXHAUSTED = "exhausted"
TABLE_EXHAUSTED = "table_exhausted"


@dataclass
class RunReport:
    outcome: str
    assignment: list
    log: list[int]
    resamples: list[int]
    consumed: list[int]
    steps: int
    table: EvaluationTable | None = field(default=None, repr=False)
    rounds: list[list[int]] | None = None  # per-round resampled sets, parallel runs only

    @property
    def success(self) -> bool:
        return self.outcome == SUCCESS

    def to_json(self) -> dict:
        out = {
            "outcome": self.outcome,
            "steps": self.steps,
            "log": self.log,
            "resamples": self.resamples,
            "consumed": self.consumed,
            "assignment": {str(p): v for p, v in enumerate(self.assignment)},
        }
        if self.rounds is not None:
            out["rounds"] = len(self.rounds)
            out["mis_per_round"] = self.rounds
        return out


def default_max_steps(system: EventSystem, params: LLLParams | None = None) -> int:
    if params is None:
        return DEFAULT_MAX_STEPS
    return max(1, system.m * params.table_width)


class RandomStream:
    """Lazily drawn random table: one independent substream per variable.

    Variable ``p`` under seed ``s`` draws from ``numpy.random.default_rng([s, p])``
    (seed reduced mod 2**64); each draw is one uniform double mapped through
    the cumulative domain distribution.
    """

    def __init__(self, system: EventSystem, seed: int):
        self.system = system
        self.seed = seed % 2**64
        self._rngs = [np.random.default_rng([self.seed, p]) for p in range(system.n)]
        self._cdf = [list(accumulate(float(q) for q in v.probs)) for v in system.variables]
        self.rows: list[list] = [[] for _ in range(system.n)]

    def value(self, p: int, col: int):
        row = self.rows[p]
        while len(row) < col:
            u = self._rngs[p].random()
            cdf = self._cdf[p]
            i = min(bisect.bisect_right(cdf, u * cdf[-1]), len(cdf) - 1)
            row.append(self.system.variables[p].values[i])
        return row[col - 1]

    def table(self) -> EvaluationTable:
        return EvaluationTable(self.rows)


class _TableReader:
    def __init__(self, table: EvaluationTable):
        self.rows = table.rows

    def value(self, p: int, col: int):
        row = self.rows[p]
        if col > len(row):
            raise IndexError
        return row[col - 1]


def _run(system: EventSystem, source, max_steps: int) -> RunReport:
    n, m = system.n, system.m
    cursors = [1] * n
    resamples = [0] * m
    log: list[int] = []
    try:
        values = [source.value(p, 1) for p in range(n)]
    except IndexError:
        return RunReport(TABLE_EXHAUSTED, [], log, resamples, [0] * n, 0)
    happening = set(system.happening(values))
    outcome = SUCCESS
    while happening:
        if len(log) >= max_steps:
            outcome = EXHAUSTED
            break
        a = min(happening)
        try:
            fresh = [(p, source.value(p, cursors[p] + 1)) for p in system.events[a].vbl]
        except IndexError:
            outcome = TABLE_EXHAUSTED
            break
        for p, v in fresh:
            cursors[p] += 1
            values[p] = v
        log.append(a)
        resamples[a] += 1
        for b in system.gamma_plus(a):
            if system.events[b].happens(values):
                happening.add(b)
            else:
                happening.discard(b)
    return RunReport(outcome, values, log, resamples, list(cursors), len(log))


def run_randomized(system: EventSystem, seed: int, max_steps: int | None = None) -> RunReport:
    """Randomized resampling from the seeded stream; the drawn table is attached."""
    stream = RandomStream(system, seed)
    report = _run(system, stream, DEFAULT_MAX_STEPS if max_steps is None else max_steps)
    report.table = stream.table()
    return report


def run_with_table(system: EventSystem, table: EvaluationTable, max_steps: int | None = None) -> RunReport:
    """Replay the resampling loop reading values from ``table`` at per-variable cursors."""
    if len(table.rows) != system.n:
        raise ValueError(f"table has {len(table.rows)} rows for {system.n} variables")
    report = _run(system, _TableReader(table), DEFAULT_MAX_STEPS if max_steps is None else max_steps)
    report.table = table
    return report
