"""Rebuilding the street map a model believes in.

Three corpora over the same city: valid rides from the routing oracle, the
same rides with a fifth of them carrying one wrong direction label, and rides
babbled by a bigram.  Valid rides reconstruct the true map exactly; the
corrupted corpus adds a few false edges; the bigram's map drifts much
further.  Exports a geojson you can drop into any viewer.
"""

import numpy as np

import worldgauge as wg
from worldgauge.genmodel import corrupt_sequences, sample_suffixes
from worldgauge.reconstruct import ReconParams, classify_edges, export_map, reconstruct
from worldgauge.worlds import gen_grid_city, gen_traversals, nav_world

world = nav_world(gen_grid_city(15, 15, one_way_fraction=0.2, seed=3))
router = world.route_model()
params = ReconParams(max_degree=4, max_dist_miles=0.5)

rng = np.random.default_rng(0)
nodes = world.graph.nodes
headers = []
while len(headers) < 300:
    o, d = nodes[rng.integers(len(nodes))], nodes[rng.integers(len(nodes))]
    if o != d and 0 < world.hop_dist(o, d) <= 99:
        headers.append(world.header(o, d))

rides = [
    h + sample_suffixes(router, h, None, 1, 100, rng, world.end_token)[0].tokens
    for h in headers
]
corrupted = corrupt_sequences(rides, 0.2, world.direction_token_ids, seed=1)

bigram = wg.train_ngram(gen_traversals(world, "shortest", 4000, seed=3),
                        world.alphabet, order=2)
rng2 = np.random.default_rng(2)
babbled = [
    h + sample_suffixes(bigram, h, None, 1, 100, rng2, world.end_token)[0].tokens
    for h in headers
]

for name, corpus in (("valid rides", rides), ("corrupted rides", corrupted),
                     ("bigram rides", babbled)):
    result = reconstruct(corpus, world, params)
    true_edges, false_edges = classify_edges(result, world.graph)
    print(f"{name:>16}: {true_edges:>3} true edges, {false_edges:>3} false edges, "
          f"{result.failed}/{result.num_sequences} sequences failed")
    if name == "bigram rides":
        export_map(result, world.graph, "geojson", "bigram_map.geojson")
        print("                  wrote bigram_map.geojson (false edges flagged)")
