"""Constructive Lovász Local Lemma: resampling, witness trees and derandomized solvers."""
from .adapters import (
    CnfFormula,
    Hypergraph,
    cnf_event_system,
    cnf_fast_path,
    hypergraph2color_event_system,
    load_instance,
    parse_dimacs,
    parse_hypergraph,
)
from .derandomize import (
    build_table,
    deterministic_pipeline,
    enumerate_forbidden,
    phi,
    solve_by_conditional_expectation,
    solve_deterministic,
)
from .engine import run_randomized, run_with_table
from .model import (
    BadEvent,
    EventSystem,
    LLLParams,
    Variable,
    build_event_system,
    derive_params,
    predicate_event,
    validate_lll_condition,
)
from .parallel import (
    DecisionTreeBudget,
    build_exhaustive_space,
    build_kwise_space,
    greedy_mis,
    run_parallel_rounds,
    solve_parallel,
    verify_indistinguishability,
)
from .witness import EvaluationTable, PartialWitnessTree, build_split_tree, construct_witness, t_check

__version__ = "0.1.0"
