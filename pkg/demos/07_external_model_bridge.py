"""Evaluating a model that lives in another process.

Launches the reference client as a subprocess serving a uniform distribution
over the wgv1 wire protocol, evaluates it exactly like an in-process model,
and checks the scores agree bit for bit.  Swap the subprocess command for
your own client wrapping a real network to evaluate it the same way.
"""

import sys

import numpy as np

import worldgauge as wg
from worldgauge.bridge import BridgeModel, open_session
from worldgauge.metrics import compression_precision, distinction_metrics
from worldgauge.worlds import connect4_world

world = connect4_world(4)
session = open_session(
    world.alphabet,
    bridge_cmd=[sys.executable, "-m", "worldgauge_client", "--uniform-vocab", "7"],
)
print(f"handshake ok, capabilities: {session.capabilities}")

remote = BridgeModel(session)
local = wg.make_uniform_model(world.alphabet)

r_comp = compression_precision(world, remote, num_states=15, seed=6)
l_comp = compression_precision(world, local, num_states=15, seed=6)
_rp, r_rec = distinction_metrics(world, remote, num_pairs=15, seed=6)
_lp, l_rec = distinction_metrics(world, local, num_pairs=15, seed=6)
session.close()

print(f"compression  remote {r_comp.mean:.2f} / local {l_comp.mean:.2f}   "
      f"bit-identical: {np.array_equal(r_comp.scores, l_comp.scores)}")
print(f"recall       remote {r_rec.mean:.2f} / local {l_rec.mean:.2f}   "
      f"bit-identical: {np.array_equal(r_rec.scores, l_rec.scores)}")
