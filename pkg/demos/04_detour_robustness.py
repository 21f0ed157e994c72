"""How gracefully does a model re-route when forced off its plan?

Each trial decodes a ride greedily; with probability p per token the model's
choice is swapped for another valid direction (random, or the model's least
favorite).  The memorizer below is a high-order n-gram that replays training
rides verbatim: on its training pairs it looks flawless, but one detour pushes
it out of the memorized groove and it never finds the destination again.  A
model holding the real map (the routing oracle) recovers from anything.
"""

import worldgauge as wg
from worldgauge.detour import DetourConfig, run_detours
from worldgauge.worlds import gen_grid_city, gen_traversals, nav_world

world = nav_world(gen_grid_city(12, 12, one_way_fraction=0.2, seed=5))
corpus = gen_traversals(world, "shortest", 3000, seed=5)
memorizer = wg.train_ngram(corpus, world.alphabet, order=14, smoothing=0.01)
# evaluate on pairs the memorizer has actually seen, its best case
train_pairs = sorted({
    (world._node_of_token[s[0]], world._node_of_token[s[1]]) for s in corpus
})

probabilities = (0.0, 0.01, 0.1, 0.5, 0.75)
print("fraction of valid rides under random detours")
print("p:                " + "  ".join(f"{p:>5.0%}" for p in probabilities))
for name, model, pairs in (
    ("memorizer", memorizer, train_pairs),
    ("true world model", world.route_model(), None),
):
    scores = []
    for p in probabilities:
        rep = run_detours(world, model, DetourConfig(p, "random", trials=60),
                          seed=9, test_pairs=pairs)
        scores.append(rep.mean)
    print(f"{name:<18}" + "  ".join(f"{s:>5.2f}" for s in scores))
