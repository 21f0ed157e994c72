"""Why next-token accuracy alone cannot certify a world model.

A model that ignores the board entirely and spreads probability uniformly
over the seven columns looks near-perfect on the next-token test once the
board is tall, because almost no uniformly drawn board has a full column.
The boundary-based metrics see through it immediately: the model never
distinguishes any pair of distinct boards.
"""

import worldgauge as wg
from worldgauge.metrics import (
    compression_precision,
    distinction_metrics,
    next_token_test,
    sample_next_token_contexts,
)
from worldgauge.worlds import connect4_world, fraction_of_states_with_no_full_column

for n_rows in (4, 100, 1000):
    world = connect4_world(n_rows)
    babbler = wg.make_uniform_model(world.alphabet)
    contexts = list(sample_next_token_contexts(world, 2000, seed=1))
    rep = next_token_test(world, babbler, (c[0] for c in contexts), (c[1] for c in contexts))
    analytic = fraction_of_states_with_no_full_column(n_rows)
    print(f"n={n_rows:>4}: next-token validity {rep.mean:.3f}   "
          f"(all-columns-open share: {analytic:.3f})")

print()
world = connect4_world(4)
babbler = wg.make_uniform_model(world.alphabet)
comp = compression_precision(world, babbler, num_states=50, seed=2)
prec, rec = distinction_metrics(world, babbler, num_pairs=50, seed=2)
print(f"compression precision {comp.mean:.2f} "
      "(accepts everything, so it never contradicts itself...)")
print(f"distinction recall    {rec.mean:.2f} "
      "(...and never tells two boards apart: no world model here)")
print(f"distinction precision not applicable on {prec.not_applicable} pairs "
      "(its boundary is always empty)")
