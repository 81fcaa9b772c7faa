"""Backhaul graph: an undirected forest over J UAVs and the gateway.

The graph is stored as a parent map oriented toward the gateway (id ``J``),
which makes path and subtree queries proportional to tree depth. Every
operation returns a new graph; the original is never modified.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable


class TopologyError(ValueError):
    pass


class CycleError(TopologyError):
    pass


@dataclass(frozen=True)
class BackhaulGraph:
    parent: tuple  # parent[j] is a node id (UAV or gateway J) or None

    def __post_init__(self):
        J = len(self.parent)
        for j, p in enumerate(self.parent):
            if p is None:
                continue
            if not (0 <= p <= J) or p == j:
                raise TopologyError(f"invalid parent {p!r} for UAV {j}")
        # every parent chain must terminate (at the gateway or a parentless UAV)
        state = [0] * J  # 0 unseen, 1 on stack, 2 done
        for start in range(J):
            chain, k = [], start
            while k is not None and k != J and state[k] == 0:
                state[k] = 1
                chain.append(k)
                k = self.parent[k]
            if k is not None and k != J and state[k] == 1:
                raise CycleError(f"parent map contains a cycle through UAV {k}")
            for c in chain:
                state[c] = 2

    @classmethod
    def _trusted(cls, parent: tuple) -> BackhaulGraph:
        # for results of operations that preserve acyclicity by construction
        g = object.__new__(cls)
        object.__setattr__(g, "parent", parent)
        return g

    @property
    def num_uavs(self) -> int:
        return len(self.parent)

    @property
    def root(self) -> int:
        return len(self.parent)

    @cached_property
    def edges(self) -> frozenset:
        return frozenset(frozenset((j, p)) for j, p in enumerate(self.parent) if p is not None)

    @cached_property
    def children(self) -> tuple:
        """children[v] for every node v in 0..J (index J is the gateway)."""
        ch = [[] for _ in range(self.num_uavs + 1)]
        for j, p in enumerate(self.parent):
            if p is not None:
                ch[p].append(j)
        return tuple(tuple(c) for c in ch)

    @cached_property
    def connected(self) -> tuple:
        """connected[j] is True when UAV j has a path to the gateway."""
        out = [False] * self.num_uavs
        for j in self.bfs_order:
            out[j] = True
        return tuple(out)

    @cached_property
    def topo_order(self) -> tuple:
        """Every UAV, parents before children (gateway component first)."""
        order = list(self.bfs_order)
        for r in range(self.num_uavs):
            if self.parent[r] is None:
                frontier = [r]
                while frontier:
                    order.extend(frontier)
                    frontier = [c for v in frontier for c in self.children[v]]
        return tuple(order)

    @cached_property
    def bfs_order(self) -> tuple:
        """Gateway-connected UAVs, parents before children."""
        order, frontier = [], list(self.children[self.root])
        while frontier:
            order.extend(frontier)
            frontier = [c for v in frontier for c in self.children[v]]
        return tuple(order)

    def has_edge(self, a: int, b: int) -> bool:
        J = self.num_uavs
        return (a < J and self.parent[a] == b) or (b < J and self.parent[b] == a)

    def edge_list(self) -> list:
        return sorted((j, p) for j, p in enumerate(self.parent) if p is not None)

    def _check(self, j: int):
        if not (isinstance(j, int) and 0 <= j < self.num_uavs):
            raise TopologyError(f"unknown UAV id {j!r}")

    @classmethod
    def from_edges(cls, num_uavs: int, edges: Iterable) -> BackhaulGraph:
        """Orient an undirected edge set toward the gateway.

        Raises :class:`CycleError` if the edges contain a cycle.
        """
        J = num_uavs
        adj = {v: [] for v in range(J + 1)}
        count = 0
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b or not (0 <= a <= J and 0 <= b <= J):
                raise TopologyError(f"invalid edge ({a}, {b})")
            adj[a].append(b)
            adj[b].append(a)
            count += 1
        parent: list = [None] * J
        seen = set()
        comps = 0
        for start in [J] + list(range(J)):
            if start in seen:
                continue
            comps += 1
            seen.add(start)
            stack = [start]
            while stack:
                v = stack.pop()
                for u in adj[v]:
                    if u in seen:
                        continue
                    seen.add(u)
                    if u != J:
                        parent[u] = v
                    stack.append(u)
        # a forest on J+1 nodes with c components has exactly J+1-c edges
        if count != J + 1 - comps:
            raise CycleError("edge set contains a cycle or duplicate edge")
        return cls(tuple(parent))


def star_topology(num_uavs: int) -> BackhaulGraph:
    if num_uavs < 1:
        raise ValueError(f"num_uavs must be >= 1, got {num_uavs}")
    return BackhaulGraph((num_uavs,) * num_uavs)


def path_to_gateway(g: BackhaulGraph, j: int):
    """Node sequence from UAV j to the gateway, or ``None`` if j is disconnected."""
    g._check(j)
    if not g.connected[j]:
        return None
    path = [j]
    while path[-1] != g.root:
        path.append(g.parent[path[-1]])
    return tuple(path)


def subtree(g: BackhaulGraph, j: int) -> set:
    """UAVs whose route toward the gateway passes through j (j included)."""
    g._check(j)
    out, frontier = {j}, [j]
    while frontier:
        nxt = [c for v in frontier for c in g.children[v]]
        out.update(nxt)
        frontier = nxt
    return out


def replace_parent_link(g: BackhaulGraph, j: int, w: int) -> BackhaulGraph:
    """Swap j's parent link for a link to ``w`` (plain addition if j has no parent)."""
    g._check(j)
    if not (0 <= w <= g.num_uavs) or w == j:
        raise TopologyError(f"invalid target node {w!r}")
    if g.parent[j] == w:
        raise TopologyError(f"{w} is already the parent of {j}")
    if w != g.root and w in subtree(g, j):
        raise CycleError(f"linking {j} to {w} would close a cycle ({w} is in the subtree of {j})")
    parent = list(g.parent)
    parent[j] = w
    return BackhaulGraph._trusted(tuple(parent))


def delete_link(g: BackhaulGraph, j: int, w: int) -> BackhaulGraph:
    if not g.has_edge(j, w):
        raise TopologyError(f"no link between {j} and {w}")
    parent = list(g.parent)
    child = j if (j < g.num_uavs and g.parent[j] == w) else w
    parent[child] = None
    return BackhaulGraph._trusted(tuple(parent))


@dataclass(frozen=True)
class ConstraintReport:
    connected: bool  # every UAV reaches the gateway, and the gateway has a link
    edge_count_ok: bool  # at most J edges
    binary: bool  # no duplicate / self edges
    acyclic: bool
    edge_count: int

    @property
    def all_pass(self) -> bool:
        return self.connected and self.edge_count_ok and self.binary and self.acyclic


def verify_constraints(g, num_uavs: int | None = None) -> ConstraintReport:
    """Check connectivity, edge budget, binary encoding and acyclicity.

    ``g`` is a :class:`BackhaulGraph` or an iterable of undirected edges (then
    ``num_uavs`` is required). Checks run on the raw edge set with a
    union-find, independent of the parent orientation.
    """
    if isinstance(g, BackhaulGraph):
        J = g.num_uavs
        raw = [(j, p) for j, p in enumerate(g.parent) if p is not None]
    else:
        if num_uavs is None:
            raise ValueError("num_uavs is required for a raw edge list")
        J = num_uavs
        raw = [(int(a), int(b)) for a, b in g]

    keys = [frozenset(e) for e in raw]
    binary = all(len(k) == 2 for k in keys) and len(set(keys)) == len(keys)

    uf = list(range(J + 1))

    def find(x):
        while uf[x] != x:
            uf[x] = uf[uf[x]]
            x = uf[x]
        return x

    acyclic = True
    for a, b in raw:
        ra, rb = find(a), find(b)
        if ra == rb:
            acyclic = False
        else:
            uf[ra] = rb
    gw = find(J)
    connected = all(find(j) == gw for j in range(J)) and any(J in e for e in raw)
    return ConstraintReport(connected, len(raw) <= J, binary, acyclic, len(raw))


def write_edge_list(g: BackhaulGraph, path) -> None:
    lines = [f"# J {g.num_uavs}", f"# root {g.root}"]
    lines += [f"{j} {p}" for j, p in g.edge_list()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_edge_list(path) -> BackhaulGraph:
    J = None
    edges = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "J":
                J = int(parts[1])
            elif len(parts) == 2 and parts[0] == "root" and J is not None and int(parts[1]) != J:
                raise TopologyError(f"{path}:{lineno}: root id must equal J")
            continue
        parts = line.split()
        if len(parts) != 2:
            raise TopologyError(f"{path}:{lineno}: expected 'node-id node-id'")
        edges.append((int(parts[0]), int(parts[1])))
    if J is None:
        raise TopologyError(f"{path}: missing '# J <n>' header")
    return BackhaulGraph.from_edges(J, edges)
