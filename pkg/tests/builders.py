"""Hand-built scenarios for tests."""

from uavbackhaul.scenario import Position3D, Sbs, Scenario, TrafficParams, Uav


def hand_scenario(uav_xyz, gateway=(2500.0, 2500.0, 0.0), loads=None, **kwargs) -> Scenario:
    """UAVs at the given coordinates; ``loads[j]`` becomes one SBS served by UAV j."""
    uavs = tuple(Uav(k, Position3D(*p), Position3D(*p)) for k, p in enumerate(uav_xyz))
    loads = [0.5] * len(uavs) if loads is None else loads
    sbss = tuple(Sbs(k, Position3D(p[0], p[1], 0.0), k) for k, p in enumerate(uav_xyz))
    traffic = TrafficParams(sbs_rates=tuple(float(x) for x in loads))
    return Scenario(uavs=uavs, gateway=Position3D(*gateway), sbss=sbss, traffic=traffic, **kwargs)


def random_parents(order, picks) -> tuple:
    """Spanning tree where ``order[k]`` attaches to the gateway or an earlier node.

    ``picks[k]`` in [0, 1) selects among the k + 1 candidates.
    """
    J = len(order)
    parent = [None] * J
    for k, j in enumerate(order):
        cands = [J] + list(order[:k])
        parent[j] = cands[int(picks[k] * len(cands))]
    return tuple(parent)
