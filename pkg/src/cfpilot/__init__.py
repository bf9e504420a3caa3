"""Pilot assignment for cell-free massive MIMO as a diverse clustering problem.

The pipeline for one Monte-Carlo drop is::

    topology -> large-scale fading -> diversity matrix -> pilot assignment
             -> MMSE estimation stats -> power control -> closed-form rates

See :mod:`cfpilot.harness` for the experiment runner and :mod:`cfpilot.cli`
for the command line.
"""
from .kernels import BACKEND
from .scenario import RadioParams, Scenario, Topology, generate_topology, wrap_distance
from .channel import LargeScale, EstimationStats, large_scale, estimation_stats, path_loss_db
from .rates import dl_rate, maxmin_ul_power, noise_power_mw, throughput, ul_rate
from .dcp import DiversityMatrix, PilotSolution, build_diversity, fitness
from .solvers import ImsParams, SolverResult, ims

__all__ = [
    "BACKEND", "RadioParams", "Scenario", "Topology", "generate_topology", "wrap_distance",
    "LargeScale", "EstimationStats", "large_scale", "estimation_stats", "path_loss_db",
    "dl_rate", "maxmin_ul_power", "noise_power_mw", "throughput", "ul_rate",
    "DiversityMatrix", "PilotSolution", "build_diversity", "fitness",
    "ImsParams", "SolverResult", "ims",
]
