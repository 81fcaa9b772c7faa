import math
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from builders import hand_scenario
from strategies import trees
from uavbackhaul.scenario import UtilityWeights, generate_scenario
from uavbackhaul.topology import BackhaulGraph, path_to_gateway, replace_parent_link, star_topology, subtree
from uavbackhaul.traffic import PathEvaluation, evaluate_network, link_delay, link_loads
from uavbackhaul.utility import NEG_INF, compare_move, improves, utility, utility_from_path, utility_values

CHAIN = [(3000, 2500, 100), (4000, 2500, 100)]


def test_disconnected_is_minus_infinity():
    s = hand_scenario(CHAIN)
    u = utility(BackhaulGraph((None, 0)), 1, s)
    assert u.value == NEG_INF and u.delay_sum == math.inf


def test_zero_weights_leave_rates():
    s = replace(hand_scenario(CHAIN), weights=UtilityWeights(0.0, 0.0))
    g = BackhaulGraph((2, 0))
    e = evaluate_network(g, s)[1]
    assert utility(g, 1, s).value == e.rate_dl + e.rate_ul


def test_two_node_chain_by_hand():
    s = hand_scenario(CHAIN, loads=[0.4, 0.25])
    g = BackhaulGraph((2, 0))  # 1 -> 0 -> gateway
    loads = link_loads(g, s)
    top, leaf = loads[0], loads[1]
    rate = min(top.rate_dl, leaf.rate_dl) + min(top.rate_ul, leaf.rate_ul)
    delay = (link_delay(0.65, top.service_dl) + link_delay(0.25, leaf.service_dl)
             + link_delay(0.65, top.service_ul) + link_delay(0.25, leaf.service_ul))
    expected = rate + 1.0 * (0.25 + 0.25) - 1e4 * delay
    assert utility(g, 1, s).value == pytest.approx(expected, rel=1e-12)
    relay = utility(g, 0, s)
    assert relay.packet_sum == pytest.approx(1.3)


def test_utility_from_path_components():
    e = PathEvaluation(2e6, 1e6, 0.001, 0.002, 3.0, 3.0)
    u = utility_from_path(e, UtilityWeights(2.0, 1e3))
    assert u.value == pytest.approx(3e6 + 12.0 - 3.0)
    assert (u.rate_sum, u.packet_sum, u.delay_sum) == (3e6, 6.0, pytest.approx(0.003))
    assert utility_values([e], UtilityWeights(2.0, 1e3)) == [u.value]
    inf = PathEvaluation(0, 0, math.inf, math.inf, 0, 0)
    assert utility_from_path(inf, UtilityWeights()).value == NEG_INF
    assert utility_values([inf], UtilityWeights()) == [NEG_INF]


def test_improves_is_strict():
    assert improves(2.0, 1.0)
    assert not improves(1.0, 1.0)
    assert not improves(1e6 * (1 + 1e-14), 1e6)  # rounding noise
    assert improves(-1e9, NEG_INF)
    assert not improves(NEG_INF, NEG_INF)
    assert not improves(NEG_INF, 0.0)


def test_compare_move():
    s = hand_scenario(CHAIN)
    g = star_topology(2)
    same = compare_move(g, g, {0, 1}, s)
    assert not any(m.improving for m in same.values())
    cut = compare_move(g, BackhaulGraph((2, None)), {1}, s)
    assert not cut[1].improving and cut[1].new == NEG_INF


def test_compare_move_lower_delay_improves():
    # rates unchanged (no gateway interference), only the delay term counts (delta = 0)
    s = replace(hand_scenario(CHAIN, loads=[4000.0, 3000.0]), weights=UtilityWeights(0.0, 1e4))
    s = s.with_options(interference=False)
    g_heavy = BackhaulGraph((2, 0))
    g_light = replace_parent_link(g_heavy, 1, 2)
    res = compare_move(g_heavy, g_light, {0}, s)
    before, after = evaluate_network(g_heavy, s)[0], evaluate_network(g_light, s)[0]
    assert after.rate_dl == before.rate_dl and after.delay_dl < before.delay_dl / 2
    assert res[0].new > res[0].old and res[0].improving


@given(trees(min_uavs=3, max_uavs=10), st.integers(0, 500), st.data())
def test_utility_depends_only_on_own_path(parent, seed, data):
    g = BackhaulGraph(parent)
    J = g.num_uavs
    s = generate_scenario(seed, J, 2 * J, area_side=2000).with_options(interference=False)
    j = data.draw(st.integers(0, J - 1))
    path = set(path_to_gateway(g, j))
    # move a UAV k whose old and new routes share no UAV with j's path
    uav_path = path - {J}
    movers = [k for k in range(J) if not set(path_to_gateway(g, k)) & uav_path and not subtree(g, k) & path]
    if not movers:
        return
    k = data.draw(st.sampled_from(movers))
    targets = [w for w in range(J + 1) if w not in subtree(g, k) and w != g.parent[k]
               and (w == J or not set(path_to_gateway(g, w)) & uav_path)]
    if not targets:
        return
    g2 = replace_parent_link(g, k, data.draw(st.sampled_from(targets)))
    assert utility(g2, j, s).value == pytest.approx(utility(g, j, s).value, rel=1e-12)


@given(st.integers(0, 500))
def test_zero_weights_prefer_higher_bottleneck_rate(seed):
    s = replace(generate_scenario(seed, 3, 6, area_side=2000), weights=UtilityWeights(0.0, 0.0))
    s = s.with_options(interference=False)
    g = star_topology(3)
    for w in (1, 3):
        alt = replace_parent_link(g, 0, 1) if w == 1 else g
        ev = evaluate_network(alt, s)[0]
        assert utility(alt, 0, s).value == pytest.approx(ev.rate_dl + ev.rate_ul, rel=1e-15)
