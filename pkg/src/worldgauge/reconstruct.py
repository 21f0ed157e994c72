"""Greedy street-map reconstruction from ride sequences.

Rebuilds the edge-labeled graph implied by a corpus of ride sequences over a
known set of intersections.  The algorithm walks each sequence through the
partial map, reusing edges it has already placed, preferring edges of the true
graph when a new one is needed, and otherwise fabricating the nearby edge that
keeps the walk alive longest.  It fails a sequence (leaving any edges it
already added in place) when a node's degree budget is exhausted, when no
candidate target exists within the distance cap, or when the walk does not end
at the listed destination.

On a corpus of sequences that are valid in the true graph the reconstruction
adds true edges only and fails nothing: reused edges are true by induction,
and with a degree budget at least the true maximum out-degree the needed true
edge always fits.  Fabricated edges therefore witness genuine disagreement
between the sequence source and the world.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import InputError
from .worlds.navigation import NavWorld, StreetGraph

FAIL_MALFORMED = "malformed"
FAIL_DEGREE = "degree_budget_exhausted"
FAIL_NO_CANDIDATE = "no_candidate_in_range"
FAIL_WRONG_DESTINATION = "wrong_destination"


@dataclass(frozen=True)
class ReconParams:
    max_degree: int = 4
    max_dist_miles: float = 0.5

    def __post_init__(self):
        if not 1 <= self.max_degree <= 8:
            raise InputError("max_degree must lie in [1, 8]")
        if self.max_dist_miles <= 0:
            raise InputError("max_dist_miles must be positive")


@dataclass
class ReconResult:
    """Reconstructed edge map plus per-sequence failure accounting."""

    edges: dict[tuple[int, str], int]  # (node, direction) -> target node
    params: ReconParams
    num_sequences: int
    failed: int
    failure_reasons: dict[str, int] = field(default_factory=dict)

    def edge_triples(self) -> list[tuple[int, str, int]]:
        return sorted((u, d, v) for (u, d), v in self.edges.items())


def _parse_sequence(world: NavWorld, seq) -> tuple[int, int, list[str]] | None:
    """Split a token sequence into (origin, destination, direction names)."""
    if len(seq) < 3:
        return None
    origin = world._node_of_token.get(seq[0])
    dest = world._node_of_token.get(seq[1])
    if origin is None or dest is None:
        return None
    if seq[-1] != world.end_token:
        return None
    dirs = []
    for tok in seq[2:-1]:
        name = world._dir_name_of_token.get(tok)
        if name is None:
            return None
        dirs.append(name)
    return origin, dest, dirs


def reconstruct(sequences, world_or_graph, params: ReconParams = ReconParams()) -> ReconResult:
    """Run the greedy reconstruction over ``sequences`` in the given order.

    The corpus order matters: edges accumulate across sequences and earlier
    fabrications steer later walks.  Input order is preserved, and all
    tie-breaks are deterministic (longest continuation, then shortest
    Euclidean span, then smallest node id).
    """
    world = world_or_graph if isinstance(world_or_graph, NavWorld) else NavWorld(world_or_graph)
    graph = world.graph
    d_hat: dict[int, dict[str, int]] = {}
    near_cache: dict[int, list[int]] = {}

    def neighbors_within(u: int) -> list[int]:
        got = near_cache.get(u)
        if got is None:
            got = sorted(
                v
                for v in graph.nodes
                if v != u and graph.euclidean(u, v) <= params.max_dist_miles
            )
            near_cache[u] = got
        return got

    def lookahead(u0: int, cand: int, dirs: list[str], j0: int) -> int:
        """Walk steps achievable after hypothetically adding (u0, dirs[j0]) -> cand.

        Simulates the main loop with a private overlay: existing map edges and
        hypothetical true-graph additions keep the walk going; it stops where
        the real loop would fail or fabricate another edge.
        """
        overlay: dict[tuple[int, str], int] = {(u0, dirs[j0]): cand}
        u = cand
        steps = 0
        for j in range(j0 + 1, len(dirs)):
            name = dirs[j]
            committed = d_hat.get(u, {})
            tgt = overlay.get((u, name), committed.get(name))
            if tgt is None:
                degree = len(committed) + sum(1 for (ou, _od) in overlay if ou == u)
                if degree >= params.max_degree:
                    break
                hop = graph.out_edges[u].get(name)
                if hop is None:
                    break
                overlay[(u, name)] = hop[0]
                tgt = hop[0]
            u = tgt
            steps += 1
        return steps

    failed = 0
    reasons: dict[str, int] = {}
    n = 0

    def fail(reason: str) -> None:
        nonlocal failed
        failed += 1
        reasons[reason] = reasons.get(reason, 0) + 1

    for seq in sequences:
        n += 1
        parsed = _parse_sequence(world, tuple(seq))
        if parsed is None:
            fail(FAIL_MALFORMED)
            continue
        origin, dest, dirs = parsed
        u = origin
        broke = False
        for j, name in enumerate(dirs):
            slots = d_hat.setdefault(u, {})
            if name in slots:
                u = slots[name]
                continue
            if len(slots) >= params.max_degree:
                fail(FAIL_DEGREE)
                broke = True
                break
            hop = graph.out_edges[u].get(name)
            if hop is not None:
                slots[name] = hop[0]
                u = hop[0]
                continue
            taken = set(slots.values())
            cands = [v for v in neighbors_within(u) if v not in taken]
            if not cands:
                fail(FAIL_NO_CANDIDATE)
                broke = True
                break
            best = max(
                cands,
                key=lambda v: (lookahead(u, v, dirs, j), -graph.euclidean(u, v), -v),
            )
            slots[name] = best
            u = best
        if not broke and u != dest:
            fail(FAIL_WRONG_DESTINATION)
    edges = {(u, d): v for u, slots in sorted(d_hat.items()) for d, v in sorted(slots.items())}
    return ReconResult(edges=edges, params=params, num_sequences=n, failed=failed, failure_reasons=reasons)


def classify_edges(result: ReconResult, graph: StreetGraph) -> tuple[int, int]:
    """(true, false) edge counts: an edge is true iff the real graph has the
    same direction label from the same node to the same target."""
    true_count = 0
    for (u, name), v in result.edges.items():
        hop = graph.out_edges[u].get(name)
        if hop is not None and hop[0] == v:
            true_count += 1
    return true_count, len(result.edges) - true_count


def edge_classification(result: ReconResult, graph: StreetGraph) -> list[tuple[int, str, int, bool]]:
    out = []
    for u, name, v in result.edge_triples():
        hop = graph.out_edges[u].get(name)
        out.append((u, name, v, hop is not None and hop[0] == v))
    return out


def export_map(result: ReconResult, graph: StreetGraph, fmt: str, path) -> None:
    """Write the reconstructed map as json, dot, or geojson (false edges flagged)."""
    classified = edge_classification(result, graph)
    if fmt == "json":
        doc = {
            "nodes": [{"id": n, "x": graph.coords[n][0], "y": graph.coords[n][1]} for n in graph.nodes],
            "edges": [
                {"from": u, "dir": d, "to": v, "true": flag} for u, d, v, flag in classified
            ],
            "failed_sequences": result.failed,
            "failure_reasons": dict(sorted(result.failure_reasons.items())),
        }
        text = json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    elif fmt == "dot":
        lines = ["digraph reconstruction {"]
        for node in graph.nodes:
            x, y = graph.coords[node]
            lines.append(f'  n{node} [pos="{x},{y}!"];')
        for u, d, v, flag in classified:
            color = "black" if flag else "red"
            lines.append(f'  n{u} -> n{v} [label="{d}", color="{color}"];')
        lines.append("}")
        text = "\n".join(lines) + "\n"
    elif fmt == "geojson":
        features = []
        for u, d, v, flag in classified:
            features.append(
                {
                    "type": "Feature",
                    "geometry": {
                        "type": "LineString",
                        "coordinates": [list(graph.coords[u]), list(graph.coords[v])],
                    },
                    "properties": {"from": u, "to": v, "dir": d, "true": flag},
                }
            )
        doc = {"type": "FeatureCollection", "features": features}
        text = json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    else:
        raise InputError(f"unknown export format {fmt!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
