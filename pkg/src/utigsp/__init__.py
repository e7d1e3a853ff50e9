"""Permutation-based causal structure learning with unknown intervention targets."""

from utigsp.graphs import (
    BackgroundKnowledge,
    CycleError,
    Dag,
    GraphError,
    IDag,
    Pdag,
    apply_edge_operation,
    chickering_sequence,
    covered_edges,
    d_separated,
    essential_graph,
    i_essential_graph,
    i_markov_equivalent,
    is_imap,
    markov_equivalent,
    reverse_edge,
)
from utigsp.learners import (
    LearnResult,
    PermutationSearch,
    ProblemInput,
    ScoreValue,
    SearchOptions,
    estimated_targets,
    gsp,
    gsp_background,
    i_covered_edges,
    jci_gsp,
    minimal_imap,
    score,
    start_runner,
    ut_igsp,
)
from utigsp.metrics import MetricReport, correct_imec, evaluate, roc_sweep, shd, target_recovery
from utigsp.sem import InterventionSpec, SemModel, SimConfig, apply_intervention, population_cov, sample, sample_er_dag, sample_weights
from utigsp.stats import (
    DataError,
    GaussCITester,
    GaussInvarianceTester,
    SuffStat,
    TestConfig,
    ci_test,
    invariance_test,
    population_ci_oracle,
    population_invariance_oracle,
    suff_stat,
)

__version__ = "0.1.0"
