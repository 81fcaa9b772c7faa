"""Traffic aggregation over the backhaul tree, per-link delay and end-to-end rates.

Each UAV j with a parent owns exactly one uplink-side link ``(j, parent(j))``;
link quantities below are indexed by that child UAV. ``DL`` and ``UL`` refer
to the two FDD directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import RadioMap
from .scenario import Scenario, per_uav_bandwidth
from .topology import BackhaulGraph

DL = "DL"
UL = "UL"
INF = math.inf


@dataclass(frozen=True)
class LinkLoad:
    link: tuple  # (child UAV, parent node)
    arrival: float  # packets/s
    service_dl: float  # packets/s
    service_ul: float
    rate_dl: float  # bits/s
    rate_ul: float


@dataclass(frozen=True)
class PathEvaluation:
    rate_dl: float
    rate_ul: float
    delay_dl: float
    delay_ul: float
    relayed_dl: float
    relayed_ul: float


DISCONNECTED = PathEvaluation(0.0, 0.0, INF, INF, 0.0, 0.0)


def link_delay(psi: float, mu: float) -> float:
    """Mean delay of one link with arrival rate psi and service rate mu (packets/s).

    Returns +inf whenever the queue is not stable (mu <= psi).
    """
    if psi < 0 or mu < 0:
        raise ValueError(f"rates must be non-negative (psi={psi}, mu={mu})")
    if mu <= psi:
        return INF
    return psi / (2.0 * mu * (mu - psi)) + 1.0 / mu


def local_arrival(j: int, scenario: Scenario) -> float:
    """Lambda_j: total arrival rate of the SBSs served by UAV j."""
    if not 0 <= j < scenario.num_uavs:
        raise ValueError(f"unknown UAV id {j}")
    return sum(rate for s, rate in zip(scenario.sbss, scenario.traffic.sbs_rates) if s.serving_uav == j)


def link_arrivals(g: BackhaulGraph, scenario: Scenario, lam: list | None = None) -> list:
    """Psi for the parent link of every UAV.

    ``subtree`` mode: Lambda_j plus the Psi of each child link (flow
    conservation). ``one_hop`` mode: Lambda_j plus the Lambda of each child.
    """
    lam = scenario.arrivals if lam is None else lam
    children = g.children
    J = g.num_uavs
    if scenario.model.delta_mode == "one_hop":
        return [lam[j] + sum(lam[c] for c in children[j]) for j in range(J)]
    psi = [0.0] * J
    # children before parents, so each Psi sees its children's final values
    for v in reversed(g.topo_order):
        psi[v] = lam[v] + sum(psi[c] for c in children[v])
    return psi


def aggregate_arrival(g: BackhaulGraph, j: int, scenario: Scenario) -> float:
    if not 0 <= j < g.num_uavs:
        raise ValueError(f"unknown UAV id {j}")
    return link_arrivals(g, scenario)[j]


def link_rates(g: BackhaulGraph, scenario: Scenario, radio: RadioMap) -> tuple[list, list]:
    """DL and UL Shannon rates of every UAV's parent link (0 where no parent).

    Gateway links share one co-channel group: in the UL the gateway hears the
    other gateway-attached UAVs as interference; in the DL the gateway is the
    only origin in the group, so the link is noise-limited. A2A links are
    orthogonal and symmetric.
    """
    J = g.num_uavs
    r = scenario.radio
    bw = per_uav_bandwidth(r, J)
    bdl, bul = bw * scenario.model.dl_band_fraction, bw * scenario.model.ul_band_fraction
    P, N = r.tx_power, r.noise_power
    gain = radio.gw_gain
    snr = radio.a2a_snr
    parent = g.parent
    gw_children = g.children[J]
    total = sum(P * gain[c] for c in gw_children) if scenario.model.interference else 0.0
    dl = [0.0] * J
    ul = [0.0] * J
    log2 = math.log2
    for j in range(J):
        p = parent[j]
        if p is None:
            continue
        if p == J:
            s = P * gain[j]
            dl[j] = bdl * log2(1.0 + s / N)
            interference = max(0.0, total - s) if scenario.model.interference else 0.0
            ul[j] = bul * log2(1.0 + s / (interference + N))
        else:
            x = log2(1.0 + snr[j][p])
            dl[j] = bdl * x
            ul[j] = bul * x
    return dl, ul


def link_loads(g: BackhaulGraph, scenario: Scenario, positions: np.ndarray | None = None,
               radio: RadioMap | None = None) -> dict:
    radio = RadioMap(scenario, positions) if radio is None else radio
    psi = link_arrivals(g, scenario)
    dl, ul = link_rates(g, scenario, radio)
    ups = scenario.traffic.packet_size
    return {j: LinkLoad((j, p), psi[j], dl[j] / ups, ul[j] / ups, dl[j], ul[j])
            for j, p in enumerate(g.parent) if p is not None}


def evaluate_network(g: BackhaulGraph, scenario: Scenario, positions: np.ndarray | None = None,
                     radio: RadioMap | None = None) -> list:
    """PathEvaluation for every UAV (both directions) in one pass over the tree."""
    J = g.num_uavs
    radio = RadioMap(scenario, positions) if radio is None else radio
    psi = link_arrivals(g, scenario)
    dl, ul = link_rates(g, scenario, radio)
    ups = scenario.traffic.packet_size
    parent = g.parent

    rate_dl = [0.0] * J
    rate_ul = [0.0] * J
    delay_dl = [INF] * J
    delay_ul = [INF] * J
    for j in g.bfs_order:
        p = parent[j]
        ldl = link_delay(psi[j], dl[j] / ups)
        lul = link_delay(psi[j], ul[j] / ups)
        if p == J:
            rate_dl[j], rate_ul[j] = dl[j], ul[j]
            delay_dl[j], delay_ul[j] = ldl, lul
        else:
            rate_dl[j] = min(dl[j], rate_dl[p])
            rate_ul[j] = min(ul[j], rate_ul[p])
            delay_dl[j] = ldl + delay_dl[p]
            delay_ul[j] = lul + delay_ul[p]

    out = []
    for j in range(J):
        ddl, dul = delay_dl[j], delay_ul[j]
        out.append(PathEvaluation(
            rate_dl[j], rate_ul[j], ddl, dul,
            psi[j] if ddl < INF else 0.0,
            psi[j] if dul < INF else 0.0,
        ))
    return out


def evaluate_path(g: BackhaulGraph, j: int, scenario: Scenario, positions: np.ndarray | None = None,
                  radio: RadioMap | None = None) -> PathEvaluation:
    if not 0 <= j < g.num_uavs:
        raise ValueError(f"unknown UAV id {j}")
    return evaluate_network(g, scenario, positions, radio)[j]


def path_delay(g, j, direction, scenario, positions=None) -> float:
    e = evaluate_path(g, j, scenario, positions)
    return e.delay_dl if _dir(direction) == DL else e.delay_ul


def path_rate(g, j, direction, scenario, positions=None) -> float:
    e = evaluate_path(g, j, scenario, positions)
    return e.rate_dl if _dir(direction) == DL else e.rate_ul


def relayed_packets(g, j, direction, scenario, positions=None) -> float:
    e = evaluate_path(g, j, scenario, positions)
    return e.relayed_dl if _dir(direction) == DL else e.relayed_ul


def _dir(direction: str) -> str:
    d = direction.upper()
    if d not in (DL, UL):
        raise ValueError(f"direction must be DL or UL, got {direction!r}")
    return d
