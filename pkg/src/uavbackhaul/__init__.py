"""Deterministic simulator of UAV multi-hop backhaul formation."""

from .channel import RadioMap, max_link_distance, snr_a2a
from .experiments import ExperimentConfig, emit_outputs, run_experiment, star_baseline_metrics
from .game import detect_cycle, pairwise_stable, play_round, run_formation
from .oracle import enumerate_trees_oracle
from .scenario import Position3D, Scenario, generate_scenario, load_scenario, save_scenario
from .topology import BackhaulGraph, star_topology, verify_constraints
from .traffic import evaluate_network, link_delay
from .utility import utility

__all__ = [
    "BackhaulGraph", "ExperimentConfig", "Position3D", "RadioMap", "Scenario",
    "detect_cycle", "emit_outputs", "enumerate_trees_oracle", "evaluate_network", "generate_scenario",
    "link_delay", "load_scenario", "max_link_distance", "pairwise_stable", "play_round",
    "run_experiment", "run_formation", "save_scenario", "snr_a2a", "star_baseline_metrics",
    "star_topology", "utility", "verify_constraints",
]
