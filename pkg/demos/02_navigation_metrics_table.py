"""The main evaluation table on a synthetic street grid.

Builds a 15x15 grid city, trains small n-gram models on two corpus flavors,
and scores them alongside the oracle and a blind baseline.  The n-grams are
desk-scale stand-ins for trained sequence models: they ace next-token
prediction far more often than they compress or distinguish states.
"""

import worldgauge as wg
from worldgauge.genmodel import RandomLogitModel
from worldgauge.metrics import (
    compression_precision,
    distinction_metrics,
    markdown_table,
    next_token_test,
    sample_next_token_contexts,
)
from worldgauge.worlds import gen_grid_city, gen_traversals, nav_world

world = nav_world(gen_grid_city(15, 15, one_way_fraction=0.2, seed=7))

models = {"untrained": RandomLogitModel(world.alphabet, seed=0)}
for mode in ("shortest", "random_walk"):
    corpus = gen_traversals(world, mode, 4000, seed=7)
    models[f"ngram-3 ({mode})"] = wg.train_ngram(corpus, world.alphabet, order=3)
models["true world model"] = wg.make_exact_dfa_model(world)

contexts = list(sample_next_token_contexts(world, 150, seed=11))
prefixes = [c[0] for c in contexts]
states = [c[1] for c in contexts]

rows = []
for name, model in models.items():
    print(f"scoring {name} ...")
    reports = {
        "next_token": next_token_test(world, model, prefixes, states),
        "compression_precision": compression_precision(world, model, num_states=40, seed=11),
    }
    prec, rec = distinction_metrics(world, model, num_pairs=40, seed=11)
    reports["distinction_precision"] = prec
    reports["distinction_recall"] = rec
    rows.append((name, reports))

print()
print(markdown_table(rows))
