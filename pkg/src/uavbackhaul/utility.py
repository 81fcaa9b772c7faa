"""Per-UAV utility: end-to-end rates plus relayed packets minus weighted delay.

Units: ``value = (R_dl + R_ul) [bit/s] + delta * (P_dl + P_ul) [packet/s]
- gamma * (tau_dl + tau_ul) [s]``. A UAV with infinite delay (disconnected or
overloaded path) has utility ``-inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .scenario import Scenario, UtilityWeights
from .topology import BackhaulGraph
from .traffic import PathEvaluation, evaluate_network

NEG_INF = -math.inf

# Relative margin for "strictly better": utilities are O(1e6), so differences
# below this are floating-point noise, not preference.
IMPROVEMENT_RTOL = 1e-12


@dataclass(frozen=True)
class UtilityValue:
    value: float
    rate_sum: float
    packet_sum: float
    delay_sum: float


def utility_from_path(e: PathEvaluation, weights: UtilityWeights) -> UtilityValue:
    rate = e.rate_dl + e.rate_ul
    packets = e.relayed_dl + e.relayed_ul
    delay = e.delay_dl + e.delay_ul
    if math.isinf(delay):
        return UtilityValue(NEG_INF, rate, packets, delay)
    return UtilityValue(rate + weights.delta * packets - weights.gamma * delay, rate, packets, delay)


def utility_values(evals: list, weights: UtilityWeights) -> list:
    """Scalar utilities for a list of PathEvaluations (hot path of the game)."""
    d, gm = weights.delta, weights.gamma
    out = []
    for e in evals:
        delay = e.delay_dl + e.delay_ul
        if delay == math.inf:
            out.append(NEG_INF)
        else:
            out.append(e.rate_dl + e.rate_ul + d * (e.relayed_dl + e.relayed_ul) - gm * delay)
    return out


def utility(g: BackhaulGraph, j: int, scenario: Scenario, positions=None) -> UtilityValue:
    if not 0 <= j < g.num_uavs:
        raise ValueError(f"unknown UAV id {j}")
    return utility_from_path(evaluate_network(g, scenario, positions)[j], scenario.weights)


def improves(new: float, old: float) -> bool:
    """Strict improvement, ignoring floating-point noise; -inf never improves."""
    if new == NEG_INF:
        return False
    if old == NEG_INF:
        return True
    return new - old > IMPROVEMENT_RTOL * max(1.0, abs(old))


@dataclass(frozen=True)
class MoveComparison:
    uav: int
    old: float
    new: float

    @property
    def improving(self) -> bool:
        return improves(self.new, self.old)


def compare_move(g: BackhaulGraph, g_candidate: BackhaulGraph, movers, scenario: Scenario,
                 positions=None, candidate_positions=None) -> dict:
    """Old/new utility of each mover between two graphs, with strict-improvement flags."""
    old = utility_values(evaluate_network(g, scenario, positions), scenario.weights)
    cpos = positions if candidate_positions is None else candidate_positions
    new = utility_values(evaluate_network(g_candidate, scenario, cpos), scenario.weights)
    return {m: MoveComparison(m, old[m], new[m]) for m in movers}
