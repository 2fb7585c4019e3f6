import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import e0, e1, random_small_cnf
from lllforge.adapters import cnf_system
from lllforge.engine import EXHAUSTED, SUCCESS, TABLE_EXHAUSTED, RandomStream, run_randomized, run_with_table
from lllforge.model import build_event_system, Variable
from lllforge.oracles import reference_resample
from lllforge.witness import EvaluationTable


def test_e0_table_not_happening_initially():
    run = run_with_table(e0(), EvaluationTable([[1], [0]]))
    assert run.outcome == SUCCESS and run.log == [] and run.assignment == [1, 0]


def test_e0_table_single_resample():
    run = run_with_table(e0(), EvaluationTable([[0, 1], [0, 1]]))
    assert run.log == [0] and run.success
    assert run.assignment == [1, 1]
    assert run.consumed == [2, 2]


def test_e0_runs_out_of_table():
    run = run_with_table(e0(), EvaluationTable([[0, 0], [0, 0]]))
    assert run.outcome == TABLE_EXHAUSTED and run.log == [0]


def test_e1_replay_matches_reference():
    table = EvaluationTable([[0, 1], [0, 0, 1], [0, 1]])
    run = run_with_table(e1(), table)
    log, values = reference_resample(e1(), table)
    assert run.log == log == [0, 1]
    assert run.assignment == values == [1, 1, 1]


def test_step_cap():
    run = run_with_table(e0(), EvaluationTable([[0] * 10, [0] * 10]), max_steps=3)
    assert run.outcome == EXHAUSTED and run.steps == 3


def test_table_row_count_checked():
    with pytest.raises(ValueError):
        run_with_table(e0(), EvaluationTable([[1]]))


def test_e0_every_seed_succeeds():
    for seed in range(50):
        run = run_randomized(e0(), seed)
        assert run.success and not (run.assignment[0] == 0 and run.assignment[1] == 0)
        if run.table.rows[0][0] == 1:
            assert run.log == []


def test_no_events():
    s = build_event_system([Variable.uniform(0)], [])
    run = run_randomized(s, 3)
    assert run.success and run.log == [] and len(run.assignment) == 1


def test_stream_is_reproducible():
    s = e1()
    a, b = RandomStream(s, 7), RandomStream(s, 7)
    assert [a.value(1, c) for c in range(1, 20)] == [b.value(1, c) for c in range(1, 20)]
    assert RandomStream(s, 2**64 + 7).value(0, 5) == a.value(0, 5)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_randomized_run_replays_from_its_table(seed):
    rng = random.Random(seed)
    s = cnf_system(random_small_cnf(rng))
    run = run_randomized(s, seed, max_steps=5000)  # tiny random formulas can be unsatisfiable
    if run.success:
        assert not s.happening(run.assignment)
    again = run_with_table(s, run.table, max_steps=5000)
    assert (again.outcome, again.log, again.assignment) == (run.outcome, run.log, run.assignment)
    log, values = reference_resample(s, run.table, max_steps=5000)
    assert log == run.log and values == (run.assignment if run.success else None)
    # every variable starts at column 1 and moves once per resample of an event covering it
    for p in range(s.n):
        assert run.consumed[p] == 1 + sum(run.resamples[a] for a in range(s.m) if p in s.events[a].vbl)
