"""Deterministic simulator for overlapping local decentralized SGD and its baselines."""

from .algorithms import ALGORITHMS, Hyperparams, SwarmState, consensus_error, init_swarm, step
from .harness import RunConfig, RunTrace, run, simulate, speedup_report, sweep, time_to_target
from .objectives import NoiseModel, QuadraticSuite, LogisticSuite, make_quadratic_suite
from .theory import TheoryConstants, max_step_size, theorem1_rhs
from .timemodel import CostModel, build_timeline, elapsed, round_runtime
from .topology import build_complete, build_mixing, build_ring, metropolis_weights, uniform_complete_weights

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "CostModel",
    "Hyperparams",
    "LogisticSuite",
    "NoiseModel",
    "QuadraticSuite",
    "RunConfig",
    "RunTrace",
    "SwarmState",
    "TheoryConstants",
    "build_complete",
    "build_mixing",
    "build_ring",
    "build_timeline",
    "consensus_error",
    "elapsed",
    "init_swarm",
    "make_quadratic_suite",
    "max_step_size",
    "metropolis_weights",
    "round_runtime",
    "run",
    "simulate",
    "speedup_report",
    "step",
    "sweep",
    "theorem1_rhs",
    "time_to_target",
    "uniform_complete_weights",
]
