import json

import numpy as np
import pytest

from oracles import parse_dot_digraph
from worldgauge.errors import InputError
from worldgauge.genmodel import sample_suffixes, train_ngram
from worldgauge.reconstruct import (
    FAIL_DEGREE,
    FAIL_MALFORMED,
    FAIL_WRONG_DESTINATION,
    ReconParams,
    ReconResult,
    classify_edges,
    export_map,
    reconstruct,
)
from worldgauge.worlds import StreetEdge, StreetGraph, gen_grid_city, gen_traversals, nav_world


class TestParams:
    def test_validation(self):
        with pytest.raises(InputError):
            ReconParams(0, 0.5)
        with pytest.raises(InputError):
            ReconParams(9, 0.5)
        with pytest.raises(InputError):
            ReconParams(4, 0.0)


class TestConsistency:
    def test_valid_corpus_reconstructs_cleanly(self, small_nav):
        # degree budget 8 covers this grid's diagonals
        seqs = gen_traversals(small_nav, "random_walk", 400, seed=5)
        result = reconstruct(seqs, small_nav, ReconParams(8, 0.5))
        true_edges, false_edges = classify_edges(result, small_nav.graph)
        assert false_edges == 0
        assert result.failed == 0
        assert true_edges == len(result.edges)

    def test_valid_corpus_property_over_random_graphs(self):
        for seed in range(6):
            g = gen_grid_city(5, 5, one_way_fraction=0.3, diagonal_fraction=0.0, seed=seed)
            world = nav_world(g)
            seqs = gen_traversals(world, "noisy_shortest", 150, seed=seed)
            result = reconstruct(seqs, world, ReconParams(4, 0.5))
            _t, false_edges = classify_edges(result, g)
            assert false_edges == 0 and result.failed == 0

    def test_reconstructed_edges_subset_of_true(self, small_nav):
        seqs = gen_traversals(small_nav, "shortest", 300, seed=6)
        result = reconstruct(seqs, small_nav, ReconParams(8, 0.5))
        for (u, name), v in result.edges.items():
            assert small_nav.graph.out_edges[u][name][0] == v


class TestFailuresAndFalseEdges:
    def grid(self):
        g = gen_grid_city(4, 4, one_way_fraction=0.0, diagonal_fraction=0.0, seed=1)
        return g, nav_world(g)

    def test_two_planted_wrong_labels_make_two_false_edges(self):
        g, world = self.grid()
        # straight rides whose final direction is re-labeled to a diagonal
        # that exists nowhere on this grid; corruption at the last step cannot
        # cascade, so exactly one fabricated edge per planted label
        s1 = world.header(0, 2) + world.alphabet.encode("E NE") + (world.end_token,)
        s2 = world.header(12, 14) + world.alphabet.encode("E SE") + (world.end_token,)
        result = reconstruct([s1, s2], world, ReconParams(4, 0.5))
        _t, false_edges = classify_edges(result, g)
        assert false_edges == 2

    def test_fully_fabricated_edge_set(self):
        g, world = self.grid()
        # a ride that is wrong at every step: every edge must be fabricated
        s = world.header(0, 5) + world.alphabet.encode("NE NE") + (world.end_token,)
        result = reconstruct([s], world, ReconParams(4, 0.5))
        true_edges, false_edges = classify_edges(result, g)
        assert true_edges == 0
        assert false_edges == len(result.edges) > 0

    def test_degree_saturated_node_fails_sequence(self):
        coords = {0: (0.0, 0.0), 1: (0.1, 0.0)}
        edges = [StreetEdge(0, 1, 0.1, "E"), StreetEdge(1, 0, 0.1, "W")]
        world = nav_world(StreetGraph(coords, edges))
        ok = world.header(0, 1) + world.alphabet.encode("E") + (world.end_token,)
        # N does not exist at node 0 and the degree budget of 1 is spent
        bad = world.header(0, 1) + world.alphabet.encode("N E") + (world.end_token,)
        result = reconstruct([ok, bad], world, ReconParams(1, 0.5))
        assert result.failed == 1
        assert result.failure_reasons == {FAIL_DEGREE: 1}

    def test_malformed_sequences_counted(self, small_nav):
        seqs = [
            (),  # empty
            small_nav.header(0, 1),  # no end token
            (small_nav.end_token,) * 3,  # header is not nodes
            small_nav.header(0, 1) + (0,) + (small_nav.end_token,),  # node mid-ride
        ]
        result = reconstruct(seqs, small_nav, ReconParams(4, 0.5))
        assert result.failed == 4
        assert result.failure_reasons == {FAIL_MALFORMED: 4}

    def test_wrong_destination_counted(self):
        g, world = self.grid()
        s = world.header(0, 5) + world.alphabet.encode("E") + (world.end_token,)
        result = reconstruct([s], world, ReconParams(4, 0.5))
        assert result.failed == 1
        assert result.failure_reasons == {FAIL_WRONG_DESTINATION: 1}
        # the true edge walked before the failure is kept
        assert (0, "E") in result.edges

    def test_fabrication_prefers_longest_continuation(self):
        # two candidates sit at the same distance from node 0; only node 2
        # lets the remaining "E E" run to completion, and node 1 would win
        # both fallback tie-breaks, so choosing 2 proves the lookahead decided
        coords = {
            0: (0.0, 0.0),
            1: (0.1, 0.0),
            2: (0.0, 0.1),
            3: (0.1, 0.1),
            4: (0.2, 0.1),
            5: (0.2, 0.0),
        }
        edges = [
            StreetEdge(0, 1, 0.1, "E"),
            StreetEdge(1, 5, 0.1, "E"),
            StreetEdge(2, 3, 0.1, "E"),
            StreetEdge(3, 4, 0.1, "E"),
        ]
        g = StreetGraph(coords, edges)
        world = nav_world(g)
        ride = world.header(0, 4) + world.alphabet.encode("N E E") + (world.end_token,)
        result = reconstruct([ride], world, ReconParams(4, 0.25))
        assert result.edges[(0, "N")] == 2
        assert result.failed == 0
        _t, false_edges = classify_edges(result, g)
        assert false_edges == 1

    def test_order_dependence_is_deterministic(self, small_nav):
        corpus = gen_traversals(small_nav, "random_walk", 100, seed=9)
        ng = train_ngram(corpus, small_nav.alphabet, order=2, smoothing=0.2)
        rng = np.random.default_rng(4)
        seqs = []
        for _ in range(60):
            state = small_nav.sample_state(rng)
            h = small_nav.header(*state)
            seqs.append(h + sample_suffixes(ng, h, None, 1, 60, rng, small_nav.end_token)[0].tokens)
        r1 = reconstruct(seqs, small_nav, ReconParams(4, 0.5))
        r2 = reconstruct(seqs, small_nav, ReconParams(4, 0.5))
        assert r1.edges == r2.edges
        assert r1.failure_reasons == r2.failure_reasons


class TestExport:
    def make_result(self, world):
        seqs = gen_traversals(world, "shortest", 60, seed=3)
        return reconstruct(seqs, world, ReconParams(8, 0.5))

    def test_json_round_trip(self, small_nav, tmp_path):
        result = self.make_result(small_nav)
        path = tmp_path / "map.json"
        export_map(result, small_nav.graph, "json", path)
        doc = json.loads(path.read_text())
        got = {(e["from"], e["dir"], e["to"]) for e in doc["edges"]}
        assert got == set(result.edge_triples())
        assert doc["failed_sequences"] == result.failed

    def test_empty_result_is_valid_document(self, small_nav, tmp_path):
        empty = ReconResult({}, ReconParams(4, 0.5), 0, 0)
        for fmt in ("json", "dot", "geojson"):
            path = tmp_path / f"empty.{fmt}"
            export_map(empty, small_nav.graph, fmt, path)
            text = path.read_text()
            if fmt == "dot":
                parse_dot_digraph(text)
            else:
                json.loads(text)

    def test_dot_parses_under_independent_grammar(self, small_nav, tmp_path):
        result = self.make_result(small_nav)
        path = tmp_path / "map.dot"
        export_map(result, small_nav.graph, "dot", path)
        nodes, edges = parse_dot_digraph(path.read_text())
        assert len(nodes) == small_nav.graph.num_nodes
        assert len(edges) == len(set((u, v) for u, _d, v in result.edge_triples()))

    def test_geojson_structure(self, small_nav, tmp_path):
        result = self.make_result(small_nav)
        path = tmp_path / "map.geojson"
        export_map(result, small_nav.graph, "geojson", path)
        doc = json.loads(path.read_text())
        assert doc["type"] == "FeatureCollection"
        assert len(doc["features"]) == len(result.edges)
        for feat in doc["features"]:
            assert feat["geometry"]["type"] == "LineString"
            assert feat["properties"]["true"] is True

    def test_deterministic_bytes(self, small_nav, tmp_path):
        result = self.make_result(small_nav)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        export_map(result, small_nav.graph, "json", a)
        export_map(result, small_nav.graph, "json", b)
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_format(self, small_nav, tmp_path):
        with pytest.raises(InputError):
            export_map(self.make_result(small_nav), small_nav.graph, "svg", tmp_path / "x")
