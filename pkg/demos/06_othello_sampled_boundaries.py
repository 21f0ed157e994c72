"""Boundary metrics on Othello, where exact boundaries are intractable.

The Othello state space is astronome-scale, so true boundaries are sampled
from complete random rollouts and compression states come from boards that
different random games happen to transpose into.  The oracle still scores
perfectly; a blind babbler scores nothing.
"""

import worldgauge as wg
from worldgauge.metrics import compression_precision, distinction_metrics
from worldgauge.worlds import othello_world

world = othello_world(pool_games=1000, pool_seed=0)
print("simulating the 1000-game pool (first call builds it) ...")

for name, model in (
    ("true world model", wg.make_exact_dfa_model(world)),
    ("uniform babbler", wg.make_uniform_model(world.alphabet)),
):
    comp = compression_precision(world, model, num_states=20, m=15, max_len=70, seed=4)
    prec, rec = distinction_metrics(world, model, num_pairs=20, m=15, max_len=70, seed=4)
    precision = f"{prec.mean:.2f}" if prec.n else " n/a"
    print(f"{name:<18} compression {comp.mean:.2f}   "
          f"distinction precision {precision}   recall {rec.mean:.2f}")
