"""Exhaustive enumeration of gateway-rooted spanning trees for small J.

Everything here is recomputed from the scalar channel functions with plain
loops, independently of the vectorized evaluator used by the game, so the
two can be cross-checked. There are (J+1)^(J-1) trees, hence the size cap.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import link_rate, max_link_distance, sinr_a2g, snr_a2a
from .scenario import Position3D, Scenario
from .topology import BackhaulGraph
from .utility import improves

DEFAULT_MAX_UAVS = 5
RANGE_RTOL = 1e-9


@dataclass(frozen=True)
class OracleTree:
    tree: BackhaulGraph
    utilities: tuple
    stable: bool

    @property
    def total_utility(self) -> float:
        return math.fsum(self.utilities) if all(math.isfinite(u) for u in self.utilities) else -math.inf


@dataclass(frozen=True)
class OracleResult:
    trees: tuple  # OracleTree, in enumeration order
    maximizer: OracleTree  # largest total utility; first in enumeration order on ties

    def __iter__(self):
        return iter(self.trees)

    def __len__(self) -> int:
        return len(self.trees)

    @property
    def stable_trees(self) -> list:
        return [t.tree for t in self.trees if t.stable]


def rooted_trees(num_uavs: int):
    """Yield every spanning tree on UAVs 0..J-1 plus the gateway J, as parent tuples."""
    J = num_uavs
    for parent in itertools.product(range(J + 1), repeat=J):
        if any(p == j for j, p in enumerate(parent)):
            continue
        if all(_reaches_gateway(parent, j) for j in range(J)):
            yield parent


def _reaches_gateway(parent, j) -> bool:
    J = len(parent)
    for _ in range(J + 1):
        if j == J:
            return True
        if j is None:
            return False
        j = parent[j]
    return False


def _descendants(parent, j) -> list:
    return [k for k in range(len(parent)) if k != j and _on_route(parent, k, j)]


def _on_route(parent, k, target) -> bool:
    J = len(parent)
    while k is not None and k != J:
        k = parent[k]
        if k == target:
            return True
    return False


def _utilities(parent, positions: dict, scenario: Scenario) -> list:
    """Per-UAV utilities of a parent map (None = no parent) at the given positions."""
    J = scenario.num_uavs
    radio, m = scenario.radio, scenario.model
    lam = scenario.local_arrivals()
    bw = radio.total_bandwidth / J
    powers = {k: radio.tx_power for k in range(J + 1)}
    gw_children = [k for k in range(J) if parent[k] == J]
    c = scenario.env.speed_of_light

    def load(k):
        if m.delta_mode == "one_hop":
            return lam[k] + sum(lam[i] for i in range(J) if parent[i] == k)
        return lam[k] + sum(lam[i] for i in _descendants(parent, k))

    def rates(k):
        p = parent[k]
        if p == J:
            down = sinr_a2g((J, k), [], powers, scenario, positions)
            interferers = [i for i in gw_children if i != k] if m.interference else []
            up = sinr_a2g((k, J), interferers, powers, scenario, positions)
        else:
            down = up = snr_a2a(positions[k], positions[p], radio, speed_of_light=c)
        return link_rate(bw * m.dl_band_fraction, down), link_rate(bw * m.ul_band_fraction, up)

    def delay(arrival, rate):
        mu = rate / scenario.traffic.packet_size
        return math.inf if mu <= arrival else arrival / (2 * mu * (mu - arrival)) + 1 / mu

    out = []
    for j in range(J):
        if not _reaches_gateway(parent, j):
            out.append(-math.inf)
            continue
        r_dl = r_ul = math.inf
        t = 0.0
        k = j
        while k != J:
            dl, ul = rates(k)
            r_dl, r_ul = min(r_dl, dl), min(r_ul, ul)
            t += delay(load(k), dl) + delay(load(k), ul)
            k = parent[k]
        if math.isinf(t):
            out.append(-math.inf)
        else:
            w = scenario.weights
            out.append(r_dl + r_ul + w.delta * 2 * load(j) - w.gamma * t)
    return out


def _approach(j: int, w: int, positions: dict, scenario: Scenario, d_max: float) -> Position3D:
    """Where j ends up after being pulled toward w and pushed off close neighbours."""
    pj = positions[j].as_array()
    pw = positions[w].as_array()
    gap = np.linalg.norm(pw - pj)
    if gap <= d_max:
        return positions[j]
    f = scenario.forces
    m = scenario.model
    x = pj + f.u_attract * (gap - d_max) * (pw - pj) / gap
    x = _clamp(x, scenario)
    push = np.zeros(3)
    for i, p in positions.items():
        if i in (j, scenario.num_uavs):
            continue
        d = np.linalg.norm(p.as_array() - x)
        if d <= m.collision_radius:
            push += f.u_repel_collide / d * (x - p.as_array()) / d
    return Position3D.from_array(_clamp(x + push, scenario))


def _clamp(x, scenario: Scenario):
    side = scenario.area_side
    return np.array([min(max(x[0], 0.0), side), min(max(x[1], 0.0), side),
                     max(x[2], scenario.model.min_altitude)])


def _is_stable(parent: tuple, utils: list, positions: dict, scenario: Scenario, d_max: float) -> bool:
    J = scenario.num_uavs
    init = {u.id: u.initial for u in scenario.uavs}
    for c in range(J):
        p = parent[c]
        if p is None:
            continue
        cut = list(parent)
        cut[c] = None
        moved = dict(positions)
        if scenario.model.step3_revert == "initial":
            moved[c] = init[c]
        after = _utilities(cut, moved, scenario)
        if improves(after[c], utils[c]) or (p != J and improves(after[p], utils[p])):
            return False
    for j in range(J):
        below = set(_descendants(parent, j))
        for w in range(J + 1):
            if w == j or w == parent[j] or (w < J and parent[w] == j) or w in below:
                continue
            moved = dict(positions)
            if w != J:
                moved[j] = _approach(j, w, positions, scenario, d_max)
                if moved[j].distance_to(positions[w]) > d_max * (1 + RANGE_RTOL):
                    continue
            alt = list(parent)
            alt[j] = w
            after = _utilities(alt, moved, scenario)
            if improves(after[j], utils[j]) and (w == J or improves(after[w], utils[w])):
                return False
    return True


def enumerate_trees_oracle(scenario: Scenario, max_uavs: int = DEFAULT_MAX_UAVS) -> OracleResult:
    """All spanning trees at the initial positions, their utilities and stability."""
    J = scenario.num_uavs
    if J > max_uavs:
        raise ValueError(f"J={J} exceeds the enumeration bound of {max_uavs} UAVs "
                         f"({(J + 1) ** (J - 1)} trees)")
    positions = {u.id: u.initial for u in scenario.uavs}
    positions[J] = scenario.gateway
    d_max = max_link_distance(scenario.radio, scenario.env)
    entries = []
    for parent in rooted_trees(J):
        utils = _utilities(parent, positions, scenario)
        stable = _is_stable(parent, utils, positions, scenario, d_max)
        entries.append(OracleTree(BackhaulGraph(parent), tuple(utils), stable))
    best = max(entries, key=lambda e: e.total_utility)
    return OracleResult(tuple(entries), best)
