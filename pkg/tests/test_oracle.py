import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import hand_scenario
from test_game import RELAY, RELAY_LOADS, _relay_utilities
from uavbackhaul.game import GameState, pairwise_stable
from uavbackhaul.oracle import enumerate_trees_oracle, rooted_trees
from uavbackhaul.scenario import generate_scenario
from uavbackhaul.topology import BackhaulGraph, verify_constraints


@pytest.mark.parametrize("J,count", [(1, 1), (2, 3), (3, 16), (4, 125)])
def test_tree_counts(J, count):
    found = list(rooted_trees(J))
    assert len(found) == count == len(set(found))
    assert all(verify_constraints(BackhaulGraph(p)).all_pass for p in found)


def test_refuses_large_instances():
    s = generate_scenario(0, 6, 12)
    with pytest.raises(ValueError, match="exceeds"):
        enumerate_trees_oracle(s)
    assert len(enumerate_trees_oracle(generate_scenario(0, 3, 6), max_uavs=3)) == 16


def test_relay_instance():
    s = hand_scenario(RELAY, loads=RELAY_LOADS)
    star, chain = _relay_utilities(s)
    res = enumerate_trees_oracle(s)
    by_tree = {t.tree.parent: t for t in res}
    assert by_tree[(2, 2)].utilities == pytest.approx(star, rel=1e-9)
    assert by_tree[(2, 0)].utilities == pytest.approx(chain, rel=1e-9)
    assert res.stable_trees == [BackhaulGraph((2, 0))]
    assert res.maximizer.tree == BackhaulGraph((2, 0))


def test_oracle_utilities_match_game_evaluator():
    s = generate_scenario(8, 3, 6, area_side=2000)
    for t in enumerate_trees_oracle(s):
        game = GameState.initial(s, t.tree).utilities(s)
        assert game == pytest.approx(list(t.utilities), rel=1e-9)


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.integers(2, 3), st.sampled_from([2000.0, 5000.0]))
def test_oracle_stability_matches_checker(seed, J, side):
    s = generate_scenario(seed, J, 2 * J, area_side=side)
    for t in enumerate_trees_oracle(s):
        assert bool(pairwise_stable(t.tree, None, s)) == t.stable
