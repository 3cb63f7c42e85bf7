"""Local causal effect estimation with latent variables.

Finds candidate adjustment variables around a treatment and an outcome
with local conditional-independence tests, estimates the effect under
every subset, prunes insensitive variables, and reports the most
probable estimate.
"""
__version__ = "0.1.0"

from .ci_test import CITestResult, Dataset, FisherZTest, OracleTest, fisher_z_test, partial_correlation
from .criteria import (
    CandidateCapExceeded,
    adjacency_union,
    enumerate_adjustment_sets,
    is_amenable,
    is_m_separated,
    is_visible,
    latent_projection,
    satisfies_gbc,
)
from .dice import Ascet, DiceConfig, most_probable_estimate, prune, run_dice, sensitivity
from .effect_est import EffectEstimate, Estimand, psm_effect, stratified_adjustment
from .local_learn import find_candidates, local_adjacency
from .mixed_graph import Edge, EdgeKind, GraphError, MixedGraph, Path, build_graph, manipulate
from .synth import SemSpec, bench10, generate, load_spec, parse_spec, score_discovery

__all__ = [
    "Ascet", "CITestResult", "CandidateCapExceeded", "Dataset", "DiceConfig", "Edge", "EdgeKind",
    "EffectEstimate", "Estimand", "FisherZTest", "GraphError", "MixedGraph", "OracleTest", "Path",
    "SemSpec", "adjacency_union", "bench10", "build_graph", "enumerate_adjustment_sets",
    "find_candidates", "fisher_z_test", "generate", "is_amenable", "is_m_separated", "is_visible",
    "latent_projection", "load_spec", "local_adjacency", "manipulate", "most_probable_estimate",
    "parse_spec", "partial_correlation", "prune", "psm_effect", "run_dice", "satisfies_gbc",
    "score_discovery", "sensitivity", "stratified_adjustment",
]
