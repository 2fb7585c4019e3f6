"""Property checks over logged randomized runs.

For every seed the randomized solver runs once; then a witness is built
for every step ``t`` of the log and every node of the split tree of the
event resampled at ``t``.  Each witness must pass the T-check on the table
the run drew and must have independent levels.  Runs that resample heavy
events only are also checked for the weight range property: a witness of
weight >= gamma implies one inside the F2 window (``[gamma, 2 gamma]``
whenever heavy events weigh at most gamma).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .engine import run_randomized
from .model import EventSystem, LLLParams
from .witness import SplitTree, construct_witness, t_check, witness_weight, witness_xprod


@dataclass
class AuditReport:
    runs: int = 0
    witnesses: int = 0
    tcheck_failures: list = field(default_factory=list)
    level_failures: list = field(default_factory=list)
    range_runs: int = 0
    range_triggered: int = 0
    range_failures: list = field(default_factory=list)
    resamples: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.tcheck_failures or self.level_failures or self.range_failures)

    @property
    def mean_resamples(self) -> float:
        return sum(self.resamples) / len(self.resamples) if self.resamples else 0.0

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "runs": self.runs,
            "witnesses": self.witnesses,
            "tcheck_failures": len(self.tcheck_failures),
            "level_failures": len(self.level_failures),
            "range_runs": self.range_runs,
            "range_triggered": self.range_triggered,
            "range_failures": len(self.range_failures),
            "mean_resamples": self.mean_resamples,
        }


def audit_run(system: EventSystem, params: LLLParams, split_trees: Sequence[SplitTree], seed: int,
              report: AuditReport, max_steps: int | None = None) -> None:
    run = run_randomized(system, seed, max_steps)
    report.runs += 1
    report.resamples.append(run.steps)
    heavy_only = all(a in params.heavy_set for a in run.log)
    weights = []
    for t in range(1, len(run.log) + 1):
        owner = run.log[t - 1]
        for S in split_trees[owner].nodes:
            tree = construct_witness(system, run.log, t, S, split_trees)
            report.witnesses += 1
            if not t_check(tree, run.table, system).passed:
                report.tcheck_failures.append((seed, t, tree.canonical()))
            if not tree.has_independent_levels(system):
                report.level_failures.append((seed, t, tree.canonical()))
            if heavy_only:
                weights.append((witness_weight(tree, params), witness_xprod(tree, params)))
    if heavy_only:
        report.range_runs += 1
        if any(params.at_least_gamma(w, x) for w, x in weights):
            report.range_triggered += 1
            if not any(params.in_window(w, x) for w, x in weights):
                report.range_failures.append(seed)


def audit(system: EventSystem, params: LLLParams, split_trees: Sequence[SplitTree], seeds: Iterable[int],
          max_steps: int | None = None) -> AuditReport:
    report = AuditReport()
    for seed in seeds:
        audit_run(system, params, split_trees, seed, report, max_steps)
    return report
