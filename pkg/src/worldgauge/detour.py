"""Detour robustness: greedy decoding under forced valid substitutions.

A trial prompts the model with an (origin, destination) header and decodes
greedily.  With probability ``p`` per emitted token the model's proposal is
replaced by another world-valid token: a uniformly random one ("random" mode)
or the valid token the model ranks lowest ("adversarial" mode, ties to the
largest token id).  Substitutions are only drawn from tokens that leave the
destination reachable within the remaining direction budget, so a perfect
router can always finish; when no substitution satisfies that constraint the
model's own token stands and the step is logged.

A navigation trial scores 1 iff the produced ride is valid, ends with the end
token at the destination, and uses at most ``max_len`` directions.  A game
trial scores 1 iff every move was legal through to the end of the game.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .metrics import MetricReport, _run_units
from .worlds.navigation import NavWorld
from .worlds.othello import OthelloWorld


@dataclass(frozen=True)
class DetourConfig:
    probability: float
    mode: str = "random"
    max_len: int = 100
    trials: int = 100

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise InputError("detour probability must lie in [0, 1]")
        if self.mode not in ("random", "adversarial"):
            raise InputError("mode must be 'random' or 'adversarial'")
        if self.trials < 1:
            raise InputError("trials must be >= 1")


def _pick_substitute(cands: list[int], dist: np.ndarray, mode: str, rng: np.random.Generator) -> int:
    if mode == "random":
        return int(cands[rng.integers(len(cands))])
    # adversarial: lowest model probability, ties to the largest token id
    return min(cands, key=lambda t: (float(dist[t]), -t))


def run_detours(
    world: NavWorld,
    model,
    config: DetourConfig,
    seed: int = 0,
    test_pairs=None,
    workers: int = 1,
) -> MetricReport:
    """Fraction of valid rides under detours on the navigation world.

    ``test_pairs`` optionally restricts trials to held-out (origin,
    destination) pairs; otherwise pairs are sampled uniformly among those
    completable within the budget.
    """
    constraint_skips = [0]

    def unit(_i: int, rng: np.random.Generator):
        if test_pairs is not None:
            origin, dest = test_pairs[rng.integers(len(test_pairs))]
        else:
            nodes = world.graph.nodes
            while True:
                origin = nodes[rng.integers(len(nodes))]
                dest = nodes[rng.integers(len(nodes))]
                d = world.hop_dist(origin, dest)
                if origin != dest and 0 < d <= config.max_len:
                    break
        ctx = world.header(origin, dest)
        cur = origin
        dirs_used = 0
        while True:
            dist = model.next_dist(ctx)
            if dist.max() <= 0.0:
                return 0.0
            token = int(np.argmax(dist))
            if rng.random() < config.probability:
                state = (cur, dest)
                cands = []
                for tok in world.valid_tokens(state):
                    if tok == world.end_token:
                        cands.append(tok)
                        continue
                    nxt = world.step_state(state, tok)
                    if world.hop_dist(nxt[0], dest) <= config.max_len - (dirs_used + 1):
                        cands.append(tok)
                if cands:
                    token = _pick_substitute(cands, dist, config.mode, rng)
                else:
                    constraint_skips[0] += 1
            if token == world.end_token:
                return 1.0 if cur == dest else 0.0
            nxt = world.step_state((cur, dest), token)
            if nxt is None:
                return 0.0  # model emitted an invalid token
            cur = nxt[0]
            dirs_used += 1
            if dirs_used > config.max_len:
                return 0.0
            ctx = ctx + (token,)

    scores = _run_units(config.trials, seed, unit, workers)
    return MetricReport(
        "detour_valid_fraction",
        np.asarray(scores, dtype=float),
        params={
            "probability": config.probability,
            "mode": config.mode,
            "max_len": config.max_len,
            "trials": config.trials,
            "seed": seed,
            "no_valid_substitution_steps": constraint_skips[0],
        },
    )


def run_detours_game(
    world: OthelloWorld,
    model,
    config: DetourConfig,
    seed: int = 0,
    workers: int = 1,
) -> MetricReport:
    """Fraction of complete legal games under detours on a game world."""

    def unit(_i: int, rng: np.random.Generator):
        state = world.start_state
        ctx: tuple[int, ...] = ()
        for _ply in range(config.max_len + 64):
            legal = world.valid_tokens(state)
            if not legal:
                return 1.0  # game over, every move was legal
            dist = model.next_dist(ctx)
            token = int(np.argmax(dist))
            if rng.random() < config.probability:
                token = _pick_substitute(list(legal), dist, config.mode, rng)
            nxt = world.step_state(state, token)
            if nxt is None:
                return 0.0
            state = nxt
            ctx = ctx + (token,)
        return 0.0  # safety cap; should not trigger for real games

    scores = _run_units(config.trials, seed, unit, workers)
    return MetricReport(
        "detour_game_valid_fraction",
        np.asarray(scores, dtype=float),
        params={
            "probability": config.probability,
            "mode": config.mode,
            "trials": config.trials,
            "seed": seed,
        },
    )
