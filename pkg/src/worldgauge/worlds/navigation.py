"""Street-graph navigation: the world is a city map, sequences are rides.

A ride sequence is ``origin destination dir dir ... end`` where the first two
tokens name intersections, each direction token follows the unique street
leaving the current intersection with that compass label, and ``end`` is only
valid at the destination.  The induced automaton has a (current, destination)
state for every node pair plus one terminal state; it is generated lazily
because the pair space is quadratic in the node count.

``gen_grid_city`` builds synthetic planar street grids (optionally with
one-way streets and diagonal shortcuts) as a stand-in for a real city graph;
real maps can be loaded from the same JSON schema.  ``gen_traversals``
produces the three corpus flavors: exact shortest paths, shortest paths under
randomly perturbed edge weights (synthetic traffic), and plain random walks.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..automata import DIRECTION_NAMES, Alphabet, TokenSeq
from ..errors import InputError
from ..genmodel import ExactDfaModel
from .base import World

END_TOKEN_NAME = "end"

# maximum number of direction tokens in a corpus sequence; sequences needing
# more are dropped, and prefix sampling keeps completions inside the budget
MAX_DIRECTIONS = 99


@dataclass(frozen=True)
class StreetEdge:
    u: int
    v: int
    weight: float
    direction: str


def bearing_direction(dx: float, dy: float) -> str:
    """Quantize an edge vector (x east, y north) to one of 8 compass labels."""
    if dx == 0 and dy == 0:
        raise InputError("zero-length edge has no direction")
    bearing = math.degrees(math.atan2(dx, dy)) % 360.0
    sector = int(round(bearing / 45.0)) % 8
    return ("N", "NE", "E", "SE", "S", "SW", "W", "NW")[sector]


class StreetGraph:
    """Directed planar street graph with per-node-unique direction labels."""

    def __init__(self, coords: dict[int, tuple[float, float]], edges: Iterable[StreetEdge]):
        self.coords = {int(k): (float(x), float(y)) for k, (x, y) in coords.items()}
        self.edges = sorted(edges, key=lambda e: (e.u, e.v, e.direction))
        self.out_edges: dict[int, dict[str, tuple[int, float]]] = {n: {} for n in self.coords}
        self.in_neighbors: dict[int, list[tuple[int, str]]] = {n: [] for n in self.coords}
        for e in self.edges:
            if e.u not in self.coords or e.v not in self.coords:
                raise InputError(f"edge {e} references an unknown node")
            if e.u == e.v:
                raise InputError("self-loop streets are not allowed")
            if e.weight <= 0:
                raise InputError("edge weights must be positive")
            if e.direction not in DIRECTION_NAMES:
                raise InputError(f"unknown direction label {e.direction!r}")
            if e.direction in self.out_edges[e.u]:
                raise InputError(f"node {e.u} already has a {e.direction} street")
            self.out_edges[e.u][e.direction] = (e.v, e.weight)
            self.in_neighbors[e.v].append((e.u, e.direction))
        for lst in self.in_neighbors.values():
            lst.sort()
        self.nodes = sorted(self.coords)

    @property
    def num_nodes(self) -> int:
        return len(self.coords)

    def euclidean(self, u: int, v: int) -> float:
        (x1, y1), (x2, y2) = self.coords[u], self.coords[v]
        return math.hypot(x2 - x1, y2 - y1)

    def is_strongly_connected(self) -> bool:
        if not self.nodes:
            return False
        root = self.nodes[0]
        fwd = _bfs_cover(root, lambda n: (v for v, _w in self.out_edges[n].values()))
        rev = _bfs_cover(root, lambda n: (u for u, _d in self.in_neighbors[n]))
        return len(fwd) == self.num_nodes and len(rev) == self.num_nodes

    def to_json(self) -> str:
        doc = {
            "nodes": [
                {"id": n, "x": self.coords[n][0], "y": self.coords[n][1]} for n in self.nodes
            ],
            "edges": [
                {"from": e.u, "to": e.v, "weight": e.weight, "dir": e.direction}
                for e in self.edges
            ],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "StreetGraph":
        doc = json.loads(text)
        try:
            coords = {int(n["id"]): (float(n["x"]), float(n["y"])) for n in doc["nodes"]}
            edges = [
                StreetEdge(int(e["from"]), int(e["to"]), float(e["weight"]), str(e["dir"]))
                for e in doc["edges"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed street graph document: {exc}") from exc
        return cls(coords, edges)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "StreetGraph":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _bfs_cover(root: int, neighbors) -> set[int]:
    seen = {root}
    frontier = [root]
    while frontier:
        nxt = []
        for n in frontier:
            for m in neighbors(n):
                if m not in seen:
                    seen.add(m)
                    nxt.append(m)
        frontier = nxt
    return seen


def gen_grid_city(
    rows: int,
    cols: int,
    one_way_fraction: float = 0.2,
    diagonal_fraction: float = 0.0,
    seed: int = 0,
    block_miles: float = 0.1,
    max_regenerations: int = 200,
) -> StreetGraph:
    """Random planar street grid, regenerated until strongly connected.

    Nodes sit on a ``rows x cols`` lattice spaced ``block_miles`` apart (node
    id ``r * cols + c``; y grows northward).  Each lattice adjacency becomes a
    two-way street, or a one-way street with probability ``one_way_fraction``.
    Each unit cell gains a diagonal street with probability
    ``diagonal_fraction``.  Every direction label at a node is unique by
    construction (one lattice neighbor / one cell per compass octant).
    """
    if rows < 2 or cols < 2:
        raise InputError("grid must be at least 2x2")
    for attempt in range(max_regenerations):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        graph = _gen_grid_once(rows, cols, one_way_fraction, diagonal_fraction, block_miles, rng)
        if graph.is_strongly_connected():
            return graph
    raise InputError(
        "could not generate a strongly connected grid; lower one_way_fraction"
    )


def _gen_grid_once(rows, cols, one_way_fraction, diagonal_fraction, block, rng) -> StreetGraph:
    def node(r, c):
        return r * cols + c

    coords = {node(r, c): (c * block, r * block) for r in range(rows) for c in range(cols)}
    edges: list[StreetEdge] = []

    def add_street(a, b, two_way_roll):
        w = math.hypot(coords[b][0] - coords[a][0], coords[b][1] - coords[a][1])
        d_ab = bearing_direction(coords[b][0] - coords[a][0], coords[b][1] - coords[a][1])
        d_ba = bearing_direction(coords[a][0] - coords[b][0], coords[a][1] - coords[b][1])
        if two_way_roll < one_way_fraction:
            if rng.random() < 0.5:
                edges.append(StreetEdge(a, b, w, d_ab))
            else:
                edges.append(StreetEdge(b, a, w, d_ba))
        else:
            edges.append(StreetEdge(a, b, w, d_ab))
            edges.append(StreetEdge(b, a, w, d_ba))

    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                add_street(node(r, c), node(r, c + 1), rng.random())
            if r + 1 < rows:
                add_street(node(r, c), node(r + 1, c), rng.random())
    for r in range(rows - 1):
        for c in range(cols - 1):
            if rng.random() < diagonal_fraction:
                if rng.random() < 0.5:
                    add_street(node(r, c), node(r + 1, c + 1), rng.random())
                else:
                    add_street(node(r, c + 1), node(r + 1, c), rng.random())
    return StreetGraph(coords, edges)


# -- shortest paths ----------------------------------------------------------


def dijkstra(
    graph: StreetGraph, source: int, weight_of=None
) -> tuple[dict[int, float], dict[int, tuple[int, str]]]:
    """Distances and predecessor links from ``source``.

    ``weight_of(u, v, direction, base_weight)`` overrides edge weights (used
    for the synthetic-traffic corpora).  Ties resolve deterministically: the
    first settled relaxation wins and the heap orders by (distance, node).
    """
    dist = {source: 0.0}
    prev: dict[int, tuple[int, str]] = {}
    heap = [(0.0, source)]
    done: set[int] = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for direction in sorted(graph.out_edges[u]):
            v, w = graph.out_edges[u][direction]
            if weight_of is not None:
                w = weight_of(u, v, direction, w)
            nd = d + w
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                prev[v] = (u, direction)
                heapq.heappush(heap, (nd, v))
    return dist, prev


def _directions_from_tree(prev: dict[int, tuple[int, str]], origin: int, dest: int) -> list[str]:
    out: list[str] = []
    node = dest
    while node != origin:
        u, direction = prev[node]
        out.append(direction)
        node = u
    out.reverse()
    return out


def shortest_path_directions(graph: StreetGraph, origin: int, dest: int, weight_of=None) -> list[str] | None:
    dist, prev = dijkstra(graph, origin, weight_of)
    if dest not in dist:
        return None
    return _directions_from_tree(prev, origin, dest)


def hop_distances_to(graph: StreetGraph, dest: int) -> dict[int, int]:
    """Unweighted distance from every node to ``dest`` (BFS on reversed edges)."""
    dist = {dest: 0}
    frontier = [dest]
    while frontier:
        nxt = []
        for v in frontier:
            for u, _d in graph.in_neighbors[v]:
                if u not in dist:
                    dist[u] = dist[v] + 1
                    nxt.append(u)
        frontier = nxt
    return dist


# -- the navigation world ----------------------------------------------------

_START = ("await_origin",)
_DONE = ("done",)


class NavWorld(World):
    """Lazy (current, destination)-state automaton over a street graph."""

    end_token: int

    def __init__(self, graph: StreetGraph, max_directions: int = MAX_DIRECTIONS):
        self.graph = graph
        self.max_directions = max_directions
        names = [str(n) for n in graph.nodes]
        self.alphabet = Alphabet(names + list(DIRECTION_NAMES) + [END_TOKEN_NAME])
        self._node_of_token = {i: n for i, n in enumerate(graph.nodes)}
        self._token_of_node = {n: i for i, n in enumerate(graph.nodes)}
        v = len(graph.nodes)
        self.direction_token_ids = tuple(range(v, v + len(DIRECTION_NAMES)))
        self._dir_name_of_token = {
            v + i: name for i, name in enumerate(DIRECTION_NAMES)
        }
        self.end_token = v + len(DIRECTION_NAMES)
        self.start_state = _START
        self._node_token_range = range(v)
        # direction token ids available per node, precomputed once
        self._dirs_at: dict[int, tuple[int, ...]] = {
            n: tuple(
                v + DIRECTION_NAMES.index(d) for d in sorted(graph.out_edges[n], key=DIRECTION_NAMES.index)
            )
            for n in graph.nodes
        }
        self._hops_to: dict[int, dict[int, int]] = {}

    def node_token(self, node: int) -> int:
        return self._token_of_node[node]

    def header(self, origin: int, dest: int) -> TokenSeq:
        return (self.node_token(origin), self.node_token(dest))

    def hop_dist(self, node: int, dest: int) -> int:
        table = self._hops_to.get(dest)
        if table is None:
            table = hop_distances_to(self.graph, dest)
            self._hops_to[dest] = table
        return table.get(node, -1)

    # -- transition system --------------------------------------------------

    def step_state(self, state, token: int):
        kind = state[0]
        if kind == "await_origin":
            if token in self._node_token_range:
                return ("await_dest", self._node_of_token[token])
            return None
        if kind == "await_dest":
            if token in self._node_token_range:
                return (state[1], self._node_of_token[token])
            return None
        if kind == "done":
            return None
        cur, dest = state
        if token == self.end_token:
            return _DONE if cur == dest else None
        name = self._dir_name_of_token.get(token)
        if name is None:
            return None
        hop = self.graph.out_edges[cur].get(name)
        return (hop[0], dest) if hop is not None else None

    def valid_tokens(self, state) -> tuple[int, ...]:
        kind = state[0]
        if kind in ("await_origin", "await_dest"):
            return tuple(self._node_token_range)
        if kind == "done":
            return ()
        cur, dest = state
        dirs = self._dirs_at[cur]
        return dirs + (self.end_token,) if cur == dest else dirs

    # -- samplers -------------------------------------------------------------

    def sample_state(self, rng: np.random.Generator, max_hop: int | None = None) -> tuple[int, int]:
        """Uniform (current, destination) pair reachable within the ride budget."""
        if max_hop is None:
            max_hop = self.max_directions - 1
        nodes = self.graph.nodes
        while True:
            cur = nodes[rng.integers(len(nodes))]
            dest = nodes[rng.integers(len(nodes))]
            d = self.hop_dist(cur, dest)
            if 0 <= d <= max_hop:
                return (cur, dest)

    def sample_prefix(self, state, rng: np.random.Generator) -> TokenSeq:
        """Header plus a reverse random walk into the current intersection.

        The walk length is capped so the ride can still reach the destination
        within the direction budget.
        """
        cur, dest = state
        budget = self.max_directions - self.hop_dist(cur, dest)
        if budget < 1:
            raise InputError("state is too far from its destination to sample a prefix")
        length = int(rng.integers(1, budget + 1))
        tokens_rev: list[int] = []
        node = cur
        for _ in range(length):
            preds = self.graph.in_neighbors[node]
            u, direction = preds[rng.integers(len(preds))]
            tokens_rev.append(self.direction_token_ids[DIRECTION_NAMES.index(direction)])
            node = u
        return self.header(node, dest) + tuple(reversed(tokens_rev))

    def route_model(self) -> "RouteOracleModel":
        return RouteOracleModel(self)


class RouteOracleModel(ExactDfaModel):
    """World oracle that also routes: mass only on hop-shortening directions.

    At the destination it emits only ``end``.  Used as the true-world-model
    reference wherever a traversal must actually be completed (capability and
    detour runs); the plain oracle spreads mass over every valid token and
    wanders.
    """

    def __init__(self, world: NavWorld):
        super().__init__(world)
        self.world = world

    def _support(self, state) -> tuple[int, ...]:
        if state[0] in ("await_origin", "await_dest", "done"):
            return self.world.valid_tokens(state)
        cur, dest = state
        if cur == dest:
            return (self.world.end_token,)
        here = self.world.hop_dist(cur, dest)
        out = []
        for tok in self.world.valid_tokens(state):
            name = self.world._dir_name_of_token.get(tok)
            if name is None:
                continue
            v, _w = self.world.graph.out_edges[cur][name]
            if self.world.hop_dist(v, dest) == here - 1:
                out.append(tok)
        return tuple(out)


def nav_world(graph: StreetGraph, max_directions: int = MAX_DIRECTIONS) -> NavWorld:
    return NavWorld(graph, max_directions)


# -- corpus generation -------------------------------------------------------


def gen_traversals(
    world_or_graph,
    mode: str,
    count: int,
    seed: int = 0,
    num_weightings: int = 50,
    max_attempt_factor: int = 30,
) -> list[TokenSeq]:
    """Ride corpus in one of three flavors: shortest, noisy_shortest, random_walk.

    Sequences longer than the direction budget are dropped and duplicates are
    removed; the function returns up to ``count`` sequences (fewer only if the
    graph cannot supply enough distinct rides within the attempt budget).
    """
    world = world_or_graph if isinstance(world_or_graph, NavWorld) else NavWorld(world_or_graph)
    graph = world.graph
    rng = np.random.default_rng(seed)
    if mode not in ("shortest", "noisy_shortest", "random_walk"):
        raise InputError(f"unknown traversal mode {mode!r}")

    weightings: list[dict[tuple[int, int, str], float]] = []
    if mode == "noisy_shortest":
        for _ in range(num_weightings):
            noisy = {
                (e.u, e.v, e.direction): e.weight + float(rng.gamma(e.weight, 1.0))
                for e in graph.edges
            }
            weightings.append(noisy)

    dir_token = {
        name: world.direction_token_ids[i] for i, name in enumerate(DIRECTION_NAMES)
    }
    nodes = graph.nodes
    trees: dict[tuple[int, int], tuple[dict, dict]] = {}
    out: list[TokenSeq] = []
    seen: set[TokenSeq] = set()
    attempts = 0
    max_attempts = count * max_attempt_factor
    while len(out) < count and attempts < max_attempts:
        attempts += 1
        if len(trees) > 4000:
            trees.clear()
        if mode == "random_walk":
            length = int(rng.integers(3, 101))
            if length > world.max_directions:
                continue
            node = nodes[rng.integers(len(nodes))]
            origin = node
            dirs: list[str] = []
            for _ in range(length):
                options = sorted(graph.out_edges[node])
                direction = options[rng.integers(len(options))]
                dirs.append(direction)
                node = graph.out_edges[node][direction][0]
            seq = world.header(origin, node) + tuple(dir_token[d] for d in dirs) + (world.end_token,)
        else:
            origin = nodes[rng.integers(len(nodes))]
            dest = nodes[rng.integers(len(nodes))]
            if origin == dest:
                continue
            if mode == "noisy_shortest":
                widx = attempts % num_weightings
                table = weightings[widx]
                tree_key = (origin, widx)
                tree = trees.get(tree_key)
                if tree is None:
                    tree = dijkstra(graph, origin, lambda u, v, d, w: table[(u, v, d)])
                    trees[tree_key] = tree
            else:
                tree_key = (origin, -1)
                tree = trees.get(tree_key)
                if tree is None:
                    tree = dijkstra(graph, origin)
                    trees[tree_key] = tree
            dist, prev = tree
            if dest not in dist:
                continue
            dirs = _directions_from_tree(prev, origin, dest)
            if len(dirs) > world.max_directions:
                continue
            seq = world.header(origin, dest) + tuple(dir_token[d] for d in dirs) + (world.end_token,)
        if seq not in seen:
            seen.add(seq)
            out.append(seq)
    return out


def split_by_endpoints(
    sequences: Sequence[TokenSeq], test_fraction: float, seed: int = 0
) -> tuple[list[TokenSeq], list[TokenSeq]]:
    """Train/test split keeping every (origin, destination) pair on one side."""
    if not 0.0 < test_fraction < 1.0:
        raise InputError("test_fraction must lie in (0, 1)")
    groups: dict[tuple[int, int], list[TokenSeq]] = {}
    for seq in sequences:
        groups.setdefault((seq[0], seq[1]), []).append(seq)
    keys = sorted(groups)
    rng = np.random.default_rng(seed)
    rng.shuffle(keys)
    target = test_fraction * len(sequences)
    test: list[TokenSeq] = []
    test_keys = set()
    for key in keys:
        if len(test) >= target:
            break
        test.extend(groups[key])
        test_keys.add(key)
    train = [s for k in sorted(groups) if k not in test_keys for s in groups[k]]
    return train, test
