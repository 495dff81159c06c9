"""Simulation laboratory for threshold-gated opinion averaging on graphs.

Agents sit on the vertices of a finite connected graph and hold opinions in
a bounded convex subset of R^d.  Edges fire at unit rate; when an edge
fires, its endpoints average their opinions by a factor mu provided they
differ by at most the confidence threshold tau.  The package simulates the
process, estimates the probability that all agents end up sharing one
opinion, computes a graph-independent lower bound for that probability, and
checks the supporting structural properties as executable assertions.
"""

from .analysis import (BoundReport, CheckReport, EstimateReport,
                       PropertyRecord, RunRecord, bound_from_distribution,
                       consensus_lower_bound, estimate_consensus,
                       example_triangular_bound, example_uniform_bound,
                       lemma_check_report, wilson_interval)
from .dynamics import (Classification, Configuration, RunOutcome, SimParams,
                       Trajectory, detect_absorption, load_kernel, next_event,
                       replay, run, step)
from .errors import (ConnectivityError, DeffuantLabError,
                     DimensionMismatchError, EdgeListParseError,
                     InapplicableBoundError, NoClosedFormError, SamplingError,
                     StructureError, UnsupportedGeometryError)
from .graphs import (Graph, complete, cycle, erdos_renyi_connected, generate,
                     load_edge_list, path, serialize, star, torus2d)
from .initial import (PointMass, TriangularBall, UniformBall, UniformBox,
                      expected_disagreement_analytic, expected_disagreement_mc,
                      initial_configuration, sample, sample_batch)
from .opinion_space import (Ball, Box, Norm, OpinionSpace, distance,
                            interpolate, interval, sample_uniform,
                            sup_distance_to_set)

__version__ = "0.1.0"

__all__ = [
    "Ball", "BoundReport", "Box", "CheckReport", "Classification",
    "Configuration", "ConnectivityError", "DeffuantLabError",
    "DimensionMismatchError", "EdgeListParseError", "EstimateReport", "Graph",
    "InapplicableBoundError", "NoClosedFormError", "Norm", "OpinionSpace",
    "PointMass", "PropertyRecord", "RunOutcome", "RunRecord", "SamplingError",
    "SimParams", "StructureError", "Trajectory", "TriangularBall",
    "UniformBall", "UniformBox", "UnsupportedGeometryError",
    "bound_from_distribution", "complete", "consensus_lower_bound", "cycle",
    "detect_absorption", "distance", "erdos_renyi_connected",
    "estimate_consensus", "example_triangular_bound", "example_uniform_bound",
    "expected_disagreement_analytic", "expected_disagreement_mc", "generate",
    "initial_configuration", "interpolate", "interval", "lemma_check_report",
    "load_edge_list", "load_kernel", "next_event", "path", "replay", "run",
    "sample", "sample_batch", "sample_uniform", "serialize", "star", "step",
    "sup_distance_to_set", "torus2d", "wilson_interval",
]
