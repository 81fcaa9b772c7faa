"""Path loss, LoS probability, SINR/SNR and Shannon rates for A2G and A2A links.

Conventions: distances in metres, frequencies in Hz, powers in W, losses in
dB, elevation angles in degrees. The scalar functions are the reference
definitions; :class:`RadioMap` evaluates the same formulas over all UAVs
at once for the formation loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .scenario import SPEED_OF_LIGHT, EnvParams, Position3D, RadioParams, Scenario

A2A = "A2A"
A2G_GATEWAY = "A2G-gateway"
A2G_SBS = "A2G-sbs"


def _fspl_constant(speed_of_light: float) -> float:
    # 20 log10(4 pi / c); -147.558 dB for c = 3e8
    return 20.0 * math.log10(4.0 * math.pi / speed_of_light)


def free_space_loss(dist: float, freq: float, speed_of_light: float = SPEED_OF_LIGHT) -> float:
    """Free-space path loss in dB: 20 log10(d) + 20 log10(f) + 20 log10(4 pi / c)."""
    if dist <= 0:
        raise ValueError(f"free_space_loss: distance must be > 0, got {dist}")
    if freq <= 0:
        raise ValueError(f"free_space_loss: frequency must be > 0, got {freq}")
    return 20.0 * math.log10(dist) + 20.0 * math.log10(freq) + _fspl_constant(speed_of_light)


def _dist(o: Position3D, d: Position3D) -> float:
    dist = o.distance_to(d)
    if dist <= 0:
        raise ValueError("coincident points: distance is zero")
    return dist


def elevation_angle(o: Position3D, d: Position3D) -> float:
    """Elevation angle in degrees between two nodes, in [0, 90]."""
    dist = _dist(o, d)
    return math.degrees(math.asin(min(1.0, abs(o.z - d.z) / dist)))


def los_probability(theta: float, env: EnvParams) -> float:
    """Logistic LoS probability for an elevation angle ``theta`` in degrees."""
    if not 0.0 <= theta <= 90.0:
        raise ValueError(f"elevation angle must be in [0, 90] degrees, got {theta}")
    return 1.0 / (1.0 + env.c_env * math.exp(-env.d_env * (theta - env.c_env)))


def a2g_mean_path_loss(o: Position3D, d: Position3D, radio: RadioParams, env: EnvParams) -> float:
    """LoS/NLoS-probability-weighted path loss in dB (averaged in dB)."""
    dist = _dist(o, d)
    xi = free_space_loss(dist, radio.carrier_freq, env.speed_of_light)
    p = los_probability(elevation_angle(o, d), env)
    return p * (xi + radio.eta_los) + (1.0 - p) * (xi + radio.eta_nlos)


def a2a_path_loss(j: Position3D, i: Position3D, radio: RadioParams,
                  speed_of_light: float = SPEED_OF_LIGHT) -> float:
    """UAV-to-UAV links are always LoS: free-space loss plus eta_LoS."""
    dist = _dist(j, i)
    return free_space_loss(dist, radio.carrier_freq, speed_of_light) + radio.eta_los


def channel_gain(loss_db: float) -> float:
    return 10.0 ** (-loss_db / 10.0)


def sinr_a2g(link: tuple, co_channel: Iterable, powers: Mapping, scenario: Scenario,
             positions: Mapping | None = None) -> float:
    """Average SINR of the A2G link ``link = (origin, dest)``.

    Node ids are UAV indices or the gateway id; ``co_channel`` holds the other
    origins transmitting to ``dest`` on the same channel. ``powers`` maps
    origin ids to transmit powers; ``positions`` optionally overrides node
    positions (id -> Position3D).
    """
    origin, dest = link
    co_channel = set(co_channel)
    if origin in co_channel:
        raise ValueError("the serving origin cannot also be an interferer")
    pos = _node_positions(scenario, positions)
    radio, env = scenario.radio, scenario.env
    h = channel_gain(a2g_mean_path_loss(pos[origin], pos[dest], radio, env))
    interference = sum(powers[q] * channel_gain(a2g_mean_path_loss(pos[q], pos[dest], radio, env))
                       for q in co_channel)
    return powers[origin] * h / (interference + radio.noise_power)


def _node_positions(scenario: Scenario, positions: Mapping | None) -> dict:
    pos = {u.id: u.position for u in scenario.uavs}
    pos[scenario.gateway_id] = scenario.gateway
    if positions:
        pos.update(positions)
    return pos


def snr_a2a(j: Position3D, i: Position3D, radio: RadioParams, tx_power: float | None = None,
            speed_of_light: float = SPEED_OF_LIGHT) -> float:
    """SNR of an orthogonal A2A link (no interference)."""
    p = radio.tx_power if tx_power is None else tx_power
    return p / (10.0 ** (a2a_path_loss(j, i, radio, speed_of_light) / 10.0) * radio.noise_power)


def link_rate(bandwidth: float, gamma: float) -> float:
    """Shannon rate in bits/s."""
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth}")
    if gamma < 0:
        raise ValueError(f"SINR must be >= 0, got {gamma}")
    return bandwidth * math.log2(1.0 + gamma)


def max_link_distance(radio: RadioParams, env: EnvParams | None = None) -> float:
    """Largest A2A separation at which the SNR still meets the threshold."""
    c = env.speed_of_light if env is not None else SPEED_OF_LIGHT
    k = (4.0 * math.pi * radio.carrier_freq / c) ** 2
    return math.sqrt(radio.tx_power / (radio.snr_threshold * radio.noise_power
                                       * 10.0 ** (radio.eta_los / 10.0) * k))


@dataclass(frozen=True)
class LinkBudget:
    origin: int
    dest: int
    path_loss_db: float
    gamma: float
    bandwidth: float
    rate: float
    kind: str


def link_budget(origin: int, dest: int, kind: str, path_loss_db: float, gamma: float,
                bandwidth: float) -> LinkBudget:
    return LinkBudget(origin, dest, path_loss_db, gamma, bandwidth, link_rate(bandwidth, gamma), kind)


class RadioMap:
    """Per-position channel quantities for all UAVs, computed in one shot.

    ``gw_gain[j]``: linear channel gain of the UAV j <-> gateway A2G link.
    ``a2a_snr[j][i]``: SNR of the A2A link between UAVs j and i.
    Both are plain nested lists for cheap scalar access.
    """

    __slots__ = ("gw_gain", "a2a_snr", "a2a_dist")

    def __init__(self, scenario: Scenario, positions: np.ndarray | None = None):
        radio, env = scenario.radio, scenario.env
        pos = scenario.positions() if positions is None else np.asarray(positions, dtype=float)
        const = _fspl_constant(env.speed_of_light) + 20.0 * math.log10(radio.carrier_freq)
        gw = np.array([scenario.gateway.x, scenario.gateway.y, scenario.gateway.z])

        d_gw = np.linalg.norm(pos - gw, axis=1)
        if np.any(d_gw <= 0):
            raise ValueError("a UAV coincides with the gateway")
        theta = np.degrees(np.arcsin(np.minimum(1.0, np.abs(pos[:, 2] - gw[2]) / d_gw)))
        p_los = 1.0 / (1.0 + env.c_env * np.exp(-env.d_env * (theta - env.c_env)))
        xi = 20.0 * np.log10(d_gw) + const
        loss = p_los * (xi + radio.eta_los) + (1.0 - p_los) * (xi + radio.eta_nlos)
        self.gw_gain = (10.0 ** (-loss / 10.0)).tolist()

        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        np.fill_diagonal(dist, np.inf)
        if np.any(dist <= 0):
            raise ValueError("two UAVs occupy the same position")
        a2a_loss = 20.0 * np.log10(dist) + const + radio.eta_los
        snr = radio.tx_power / (10.0 ** (a2a_loss / 10.0) * radio.noise_power)
        self.a2a_snr = snr.tolist()
        self.a2a_dist = dist.tolist()
