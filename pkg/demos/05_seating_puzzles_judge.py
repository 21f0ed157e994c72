"""Judging a model that only answers yes/no, on seating-arrangement puzzles.

Statement worlds suit models reached by prompting: no token probabilities,
just an accept/reject verdict per continuation.  The world-backed judge is
the fixed point: perfect on puzzles and on both state-tracking metrics.  The
myopic judge reasons soundly about the single most recent statement and
nothing else: it cannot solve a puzzle, yet its verdict stream still looks
fairly self-consistent to the probes.  Task accuracy and the state-tracking
metrics measure different failures, which is why the toolkit reports both.
"""

from worldgauge.automata import state_of_prefix
from worldgauge.metrics import (
    ExactJudge,
    compression_precision_judge,
    distinction_recall_judge,
)
from worldgauge.worlds import seating_world
from worldgauge.worlds.seating import task_accuracy

world = seating_world(3)


def myopic_judge(prefix, suffix):
    # sound logic over the most recent statement only
    recent = tuple(prefix[-1:])
    return state_of_prefix(world, recent + tuple(suffix)) is not None


for name, judge in (("true world model", ExactJudge(world)), ("myopic judge", myopic_judge)):
    acc = task_accuracy(world, judge, num_instances=100, seed=1)
    comp = compression_precision_judge(world, judge, num_states=100, seed=1)
    rec = distinction_recall_judge(world, judge, num_pairs=100, m=5, seed=1)
    print(f"{name:<18} task accuracy {acc.mean:.2f}   "
          f"compression {comp.mean:.2f}   distinction recall {rec.mean:.2f}")
