"""Myopic network formation among UAVs, with virtual-force repositioning.

Each iteration gives every UAV one round, in random order. In its round a UAV
``j`` activates a uniformly drawn node ``w`` (another UAV or the gateway) and

* if the link ``jw`` exists, deletes it when that strictly raises U_j
  (the deleted child returns to its stored location);
* otherwise moves toward ``w`` if out of range, and replaces its parent link
  by ``jw`` when both ``j`` and ``w`` strictly gain (the gateway always
  consents). A rejected replacement restores j's round-start position.

Termination: after an iteration with no accepted link change, the exhaustive
pairwise-stability check runs; the run has converged iff it passes. The same
deviation builders serve the dynamics and the check, so a converged graph is
pairwise stable by construction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import RadioMap, max_link_distance, snr_a2a
from .forces import ForceVector, attractive_force, apply_force, collision_force, repulsive_force_link
from .scenario import Position3D, Scenario, per_uav_bandwidth, scenario_rng
from .topology import BackhaulGraph, delete_link, replace_parent_link, star_topology, subtree, verify_constraints
from .traffic import PathEvaluation, evaluate_network, link_arrivals, link_delay, link_rates
from .utility import NEG_INF, improves, utility_values

logger = logging.getLogger(__name__)

# A UAV pulled to exactly d_max lands there up to rounding error.
RANGE_RTOL = 1e-9
DEFAULT_MAX_ITERATIONS = 1000
RNG_ALGORITHM = "numpy PCG64, SeedSequence([seed, 1]) per run"


@dataclass
class GameState:
    graph: BackhaulGraph
    positions: np.ndarray  # (J, 3); replaced, never mutated in place
    initial_positions: np.ndarray
    iteration: int = 0
    rng: np.random.Generator | None = None
    _radio: RadioMap | None = field(default=None, repr=False, compare=False)
    _evals: list | None = field(default=None, repr=False, compare=False)
    _utils: list | None = field(default=None, repr=False, compare=False)
    _links: tuple | None = field(default=None, repr=False, compare=False)
    _stability: object = field(default=None, repr=False, compare=False)

    @classmethod
    def initial(cls, scenario: Scenario, graph: BackhaulGraph | None = None, rng=None) -> GameState:
        pos = scenario.initial_positions()
        pos.setflags(write=False)
        return cls(graph or star_topology(scenario.num_uavs), pos, pos, 0, rng)

    def with_(self, graph=None, positions=None) -> GameState:
        return GameState(graph if graph is not None else self.graph,
                         positions if positions is not None else self.positions,
                         self.initial_positions, self.iteration, self.rng)

    def radio(self, scenario: Scenario) -> RadioMap:
        if self._radio is None:
            self._radio = RadioMap(scenario, self.positions)
        return self._radio

    def evaluations(self, scenario: Scenario) -> list:
        if self._evals is None:
            self._evals = evaluate_network(self.graph, scenario, self.positions, self.radio(scenario))
        return self._evals

    def utilities(self, scenario: Scenario) -> list:
        if self._utils is None:
            self._utils = utility_values(self.evaluations(scenario), scenario.weights)
        return self._utils

    def links(self, scenario: Scenario) -> tuple:
        """(Psi, DL rate, UL rate) of every parent link, plus the gateway UL signal total."""
        if self._links is None:
            g = self.graph
            radio = self.radio(scenario)
            psi = link_arrivals(g, scenario)
            dl, ul = link_rates(g, scenario, radio)
            P = scenario.radio.tx_power
            total = sum(P * radio.gw_gain[c] for c in g.children[g.root])
            self._links = (psi, dl, ul, total)
        return self._links


@dataclass
class Deviation:
    """A hypothetical move and the resulting utilities, keyed by UAV id.

    Deletions report every UAV; replacements report the two endpoints.
    """

    kind: str  # "delete" | "replace"
    actor: int
    partner: int
    graph: BackhaulGraph
    positions: np.ndarray
    utilities: dict
    in_range: bool = True
    displacement: ForceVector = ForceVector()


def _pos(a: np.ndarray, k: int) -> Position3D:
    return Position3D(float(a[k, 0]), float(a[k, 1]), float(a[k, 2]))


def _with_row(a: np.ndarray, k: int, p: Position3D) -> np.ndarray:
    out = a.copy()
    out[k] = (p.x, p.y, p.z)
    out.setflags(write=False)
    return out


def _evaluate(graph, positions, scenario, radio=None) -> list:
    radio = RadioMap(scenario, positions) if radio is None else radio
    return utility_values(evaluate_network(graph, scenario, positions, radio), scenario.weights)


def propose_deletion(state: GameState, j: int, w: int, scenario: Scenario) -> Deviation:
    """Unilateral deletion of link jw; the child endpoint returns to its stored location."""
    g = state.graph
    g2 = delete_link(g, j, w)
    child = j if g.parent[j] == w else w
    positions = state.positions
    if scenario.model.step3_revert == "initial":
        positions = _with_row(positions, child, _pos(state.initial_positions, child))
    radio = state.radio(scenario) if positions is state.positions else None
    utils = _evaluate(g2, positions, scenario, radio)
    return Deviation("delete", j, w, g2, positions, dict(enumerate(utils)))


def _chain(parent: tuple, v, root: int) -> list:
    """``v`` and the UAVs above it, up to the gateway or a parentless root."""
    out = []
    while v is not None and v != root:
        out.append(v)
        v = parent[v]
    return out


def _replacement_utilities(state: GameState, j: int, w: int, scenario: Scenario,
                           moved_to: Position3D | None) -> dict:
    """U_j and U_w after j re-parents to w, touching only the links on their paths.

    Psi shifts by j's subtree load along the old and new ancestor chains; the
    gateway UL group changes only when j leaves or joins it; j's own link is
    the only one whose endpoints may have moved.
    """
    g = state.graph
    J = g.num_uavs
    parent = g.parent
    psi, dl, ul, total = state.links(scenario)
    radio = state.radio(scenario)
    m = scenario.model
    r = scenario.radio
    P, N = r.tx_power, r.noise_power
    bw = per_uav_bandwidth(r, J)
    bdl, bul = bw * m.dl_band_fraction, bw * m.ul_band_fraction
    ups = scenario.traffic.packet_size
    old_parent = parent[j]

    shift: dict = {}
    if m.delta_mode == "one_hop":
        lam = scenario.arrivals[j]
        if old_parent is not None and old_parent != J:
            shift[old_parent] = -lam
        if w != J:
            shift[w] = shift.get(w, 0.0) + lam
    else:
        load = psi[j]
        for a in _chain(parent, old_parent, J):
            shift[a] = -load
        for a in _chain(parent, w, J):
            shift[a] = shift.get(a, 0.0) + load

    regroup = (old_parent == J) != (w == J)
    if regroup:
        total = total + P * radio.gw_gain[j] if w == J else total - P * radio.gw_gain[j]

    def gw_ul(s: float) -> float:
        interference = max(0.0, total - s) if m.interference else 0.0
        return bul * math.log2(1.0 + s / (interference + N))

    if w == J:
        s = P * radio.gw_gain[j]
        own = (bdl * math.log2(1.0 + s / N), gw_ul(s))
    else:
        snr = (radio.a2a_snr[j][w] if moved_to is None else
               snr_a2a(moved_to, _pos(state.positions, w), r, speed_of_light=scenario.env.speed_of_light))
        x = math.log2(1.0 + snr)
        own = (bdl * x, bul * x)

    def link(u: int) -> tuple:
        if u == j:
            return own
        if regroup and parent[u] == J:
            return dl[u], gw_ul(P * radio.gw_gain[u])
        return dl[u], ul[u]

    weights = scenario.weights

    def path_utility(v: int) -> float:
        rdl = rul = math.inf
        tdl = tul = 0.0
        u = v
        while u != J:
            if u is None:
                return NEG_INF
            ldl, lul = link(u)
            load = psi[u] + shift.get(u, 0.0)
            tdl += link_delay(load, ldl / ups)
            tul += link_delay(load, lul / ups)
            rdl, rul = min(rdl, ldl), min(rul, lul)
            u = w if u == j else parent[u]
        delay = tdl + tul
        if delay == math.inf:
            return NEG_INF
        relayed = psi[v] + shift.get(v, 0.0)
        return rdl + rul + weights.delta * 2.0 * relayed - weights.gamma * delay

    out = {j: path_utility(j)}
    if w != J:
        out[w] = path_utility(w)
    return out


def propose_replacement(state: GameState, j: int, w: int, scenario: Scenario,
                        d_max: float | None = None) -> Deviation:
    """j drops its parent link (if any) for a link to w, moving toward w if needed.

    Precondition: ``w`` is not in j's subtree and not j's parent. The
    deviation carries the utilities of j and w only.
    """
    g = state.graph
    J = g.num_uavs
    d_max = max_link_distance(scenario.radio, scenario.env) if d_max is None else d_max
    g2 = replace_parent_link(g, j, w)
    positions = state.positions
    moved_to = None
    in_range = True
    disp = ForceVector()
    if w != J:
        pj, pw = _pos(positions, j), _pos(positions, w)
        if pj.distance_to(pw) > d_max * (1 + RANGE_RTOL):
            m = scenario.model
            f = attractive_force(pj, pw, d_max, scenario.forces)
            landing = apply_force(pj, f, scenario.area_side, m.min_altitude)
            push = collision_force(j, landing, positions, scenario.forces, m.collision_radius)
            moved_to = apply_force(landing, push, scenario.area_side, m.min_altitude)
            disp = ForceVector(moved_to.x - pj.x, moved_to.y - pj.y, moved_to.z - pj.z)
            positions = _with_row(positions, j, moved_to)
            in_range = moved_to.distance_to(pw) <= d_max * (1 + RANGE_RTOL)
    utils = _replacement_utilities(state, j, w, scenario, moved_to)
    return Deviation("replace", j, w, g2, positions, utils, in_range, disp)


def replacement_accepted(dev: Deviation, old: list, J: int) -> bool:
    j, w = dev.actor, dev.partner
    if not dev.in_range or not improves(dev.utilities[j], old[j]):
        return False
    return w == J or improves(dev.utilities[w], old[w])


@dataclass(frozen=True)
class RoundOutcome:
    actor: int
    activated: int
    action: str  # "deleted" | "replaced" | "rejected" | "kept" | "cycle"
    du_actor: float = 0.0
    du_activated: float = 0.0
    displacement: tuple = (0.0, 0.0, 0.0)  # net movement of the actor over the round
    repulsion: float = 0.0  # |F^R1| that undoes a rejected move (logged only)
    moved: tuple = ()  # UAV ids whose position changed

    @property
    def graph_changed(self) -> bool:
        return self.action in ("deleted", "replaced")


def _du(new, old) -> float:
    if new == old:
        return 0.0
    if math.isinf(new) or math.isinf(old):
        return math.inf if new > old else -math.inf
    return new - old


def play_round(state: GameState, j: int, w: int, scenario: Scenario,
               d_max: float | None = None) -> tuple[GameState, RoundOutcome]:
    """One round of the dynamics: UAV j acting on activated node w."""
    g = state.graph
    J = g.num_uavs
    if not 0 <= j < J:
        raise ValueError(f"unknown actor UAV {j}")
    if not 0 <= w <= J or w == j:
        raise ValueError(f"invalid activated node {w} for actor {j}")
    old = state.utilities(scenario)

    if g.has_edge(j, w):
        if g.parent[j] == w:
            # losing the parent link disconnects j: utility -inf, never beneficial
            return state, RoundOutcome(j, w, "kept")
        dev = propose_deletion(state, j, w, scenario)
        if improves(dev.utilities[j], old[j]):
            moved = tuple(k for k in range(J) if not np.array_equal(dev.positions[k], state.positions[k]))
            new_state = state.with_(dev.graph, dev.positions)
            return new_state, RoundOutcome(j, w, "deleted", _du(dev.utilities[j], old[j]),
                                           _du(dev.utilities[w], old[w]), moved=moved)
        return state, RoundOutcome(j, w, "kept", _du(dev.utilities[j], old[j]))

    if w != J and w in subtree(g, j):
        return state, RoundOutcome(j, w, "cycle")

    dev = propose_replacement(state, j, w, scenario, d_max)
    du_j = _du(dev.utilities[j], old[j])
    du_w = 0.0 if w == J else _du(dev.utilities[w], old[w])
    d = dev.displacement
    if replacement_accepted(dev, old, J):
        moved = (j,) if d.magnitude > 0 else ()
        return state.with_(dev.graph, dev.positions), RoundOutcome(
            j, w, "replaced", du_j, du_w, (d.fx, d.fy, d.fz), moved=moved)

    # rejected: undo any attraction step
    repulsion = 0.0
    if d.magnitude > 0:
        dm = max_link_distance(scenario.radio, scenario.env) if d_max is None else d_max
        repulsion = repulsive_force_link(_pos(state.initial_positions, j), _pos(state.initial_positions, w),
                                         dm, scenario.forces).magnitude
    if scenario.model.step7_revert == "initial" and not np.array_equal(state.positions[j], state.initial_positions[j]):
        back = _pos(state.initial_positions, j)
        cur = _pos(state.positions, j)
        new_state = state.with_(positions=_with_row(state.positions, j, back))
        return new_state, RoundOutcome(j, w, "rejected", du_j, du_w,
                                       (back.x - cur.x, back.y - cur.y, back.z - cur.z), repulsion, (j,))
    return state, RoundOutcome(j, w, "rejected", du_j, du_w, repulsion=repulsion)


# ---------------------------------------------------------------------------
# Stability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityResult:
    stable: bool
    witness: Deviation | None = None

    def __bool__(self) -> bool:
        return self.stable


def improving_deviations(state: GameState, scenario: Scenario, first_only: bool = False) -> list:
    """All profitable unilateral deletions and pairwise replacements from ``state``."""
    g = state.graph
    J = g.num_uavs
    old = state.utilities(scenario)
    d_max = max_link_distance(scenario.radio, scenario.env)
    found = []
    # (1) deletions, judged by either endpoint that is a UAV
    for c in range(J):
        p = g.parent[c]
        if p is None:
            continue
        for actor, other in ((c, p), (p, c)):
            if actor == J:
                continue
            dev = propose_deletion(state, actor, other, scenario)
            if improves(dev.utilities[actor], old[actor]):
                found.append(dev)
                if first_only:
                    return found
    # (2) replacements over every non-adjacent, cycle-free pair
    for j in range(J):
        sub = subtree(g, j)
        for w in range(J + 1):
            if w == j or g.has_edge(j, w) or (w != J and w in sub):
                continue
            dev = propose_replacement(state, j, w, scenario, d_max)
            if replacement_accepted(dev, old, J):
                found.append(dev)
                if first_only:
                    return found
    return found


def pairwise_stable(g: BackhaulGraph, positions, scenario: Scenario,
                    initial_positions=None) -> StabilityResult:
    """Exhaustive pairwise-stability check with a witnessing deviation if unstable.

    ``positions`` defaults to the scenario's initial positions when ``None``.
    """
    report = verify_constraints(g)
    if not (report.acyclic and report.binary):
        raise ValueError("pairwise_stable needs a valid forest")
    init = scenario.initial_positions() if initial_positions is None else np.asarray(initial_positions, float)
    pos = init if positions is None else np.asarray(positions, dtype=float)
    return _stability(GameState(g, pos, init), scenario)


def _stability(state: GameState, scenario: Scenario) -> StabilityResult:
    if state._stability is None:
        devs = improving_deviations(state, scenario, first_only=True)
        state._stability = StabilityResult(not devs, devs[0] if devs else None)
    return state._stability


def detect_cycle(history) -> tuple | None:
    """First repeated graph in ``history`` as ``(first_index, length)``, else None."""
    seen = {}
    for k, g in enumerate(history):
        key = g.edges if isinstance(g, BackhaulGraph) else frozenset(frozenset(e) for e in g)
        if key in seen:
            return seen[key], k - seen[key]
        seen[key] = k
    return None


# ---------------------------------------------------------------------------
# Full run
# ---------------------------------------------------------------------------

@dataclass
class RunStats:
    iterations_to_converge: int
    link_changes: int
    final_stable: bool
    per_uav: list  # PathEvaluation per UAV on the final graph
    cycle: tuple | None = None
    witness: Deviation | None = None
    rng_algorithm: str = RNG_ALGORITHM


@dataclass
class FormationRecord:
    """Optional per-round output of a run: event log and position trace."""

    events: list = field(default_factory=list)
    trace: list = field(default_factory=list)  # (iteration, round, uav, x, y, z)


def _draw_partner(rng: np.random.Generator, j: int, J: int) -> int:
    k = int(rng.integers(J))  # J candidates: the other J-1 UAVs and the gateway (id J)
    return k if k < j else k + 1


def run_formation(scenario: Scenario, max_iterations: int = DEFAULT_MAX_ITERATIONS, *,
                  seed: int | None = None, record: FormationRecord | None = None):
    """Run the dynamics from the star network until pairwise stable or the cap.

    Returns ``(graph, positions, stats)``.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    J = scenario.num_uavs
    rng = scenario_rng(scenario.seed if seed is None else seed, 1)
    state = GameState.initial(scenario, rng=rng)
    d_max = max_link_distance(scenario.radio, scenario.env)
    history = [state.graph]
    changes = 0
    stable = StabilityResult(False)
    it = 0
    if record is not None:
        for k in range(J):
            record.trace.append((0, 0, k, *map(float, state.positions[k])))

    while it < max_iterations:
        it += 1
        state.iteration = it
        changed = 0
        for rnd, j in enumerate(rng.permutation(J), 1):
            j = int(j)
            w = _draw_partner(rng, j, J)
            state, out = play_round(state, j, w, scenario, d_max)
            state.iteration = it
            if out.graph_changed:
                changed += 1
                history.append(state.graph)
            if record is not None:
                record.events.append(_event(it, rnd, out))
                for k in out.moved:
                    record.trace.append((it, rnd, k, *map(float, state.positions[k])))
        changes += changed
        if changed == 0:
            stable = _stability(state, scenario)
            if stable:
                break

    cycle = detect_cycle(history)
    if not stable:
        logger.info("seed %s: no stable network after %d iterations", scenario.seed, it)
    stats = RunStats(it, changes, stable.stable, list(state.evaluations(scenario)), cycle, stable.witness)
    return state.graph, state.positions, stats


def _event(it: int, rnd: int, out: RoundOutcome) -> dict:
    def num(x):
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")

    return {
        "iteration": it, "round": rnd, "actor": out.actor, "activated": out.activated,
        "action": out.action, "du_actor": num(out.du_actor), "du_activated": num(out.du_activated),
        "displacement": list(out.displacement), "repulsion": out.repulsion,
    }


def star_evaluations(scenario: Scenario) -> list[PathEvaluation]:
    return evaluate_network(star_topology(scenario.num_uavs), scenario, scenario.initial_positions())
