"""Common structure for concrete worlds.

Every world is a lazily-defined transition system (``start_state``,
``step_state``, ``valid_tokens`` -- the same structural interface ``Dfa``
implements) plus samplers the metric estimators draw from:

* ``sample_state``: a random accept state;
* ``sample_prefix``: a random valid token sequence reaching a given state;
* ``sample_compression_pair``: one state with two distinct prefixes;
* ``sample_distinction_pair``: two distinct states with one prefix each;
* ``sample_continuation``: for worlds whose boundaries are approximated from
  rollouts (``boundary_kind == "sampled"``), a complete random continuation.

Game worlds have no end-of-sequence token (``end_token is None``); sequences
simply stop when nothing is valid.
"""

from __future__ import annotations

from typing import Hashable

import numpy as np

from ..automata import TokenSeq


class World:
    end_token: int | None = None
    boundary_kind: str = "exact"

    def sample_state(self, rng: np.random.Generator) -> Hashable:
        raise NotImplementedError

    def sample_prefix(self, state: Hashable, rng: np.random.Generator) -> TokenSeq:
        raise NotImplementedError

    def sample_compression_prefixes(
        self, state: Hashable, rng: np.random.Generator, max_tries: int = 50
    ) -> tuple[TokenSeq, TokenSeq] | None:
        """Two distinct prefixes reaching ``state``, or None if it admits only one."""
        s1 = self.sample_prefix(state, rng)
        for _ in range(max_tries):
            s2 = self.sample_prefix(state, rng)
            if s2 != s1:
                return s1, s2
        return None

    def sample_compression_pair(
        self, rng: np.random.Generator, max_tries: int = 50
    ) -> tuple[Hashable, TokenSeq, TokenSeq] | None:
        """A state plus two distinct prefixes reaching it, or None if the
        drawn state does not admit two."""
        state = self.sample_state(rng)
        prefixes = self.sample_compression_prefixes(state, rng, max_tries)
        if prefixes is None:
            return None
        return state, prefixes[0], prefixes[1]

    def sample_distinction_pair(
        self, rng: np.random.Generator, max_tries: int = 50
    ) -> tuple[Hashable, TokenSeq, Hashable, TokenSeq] | None:
        for _ in range(max_tries):
            q1 = self.sample_state(rng)
            q2 = self.sample_state(rng)
            if q1 != q2:
                return q1, self.sample_prefix(q1, rng), q2, self.sample_prefix(q2, rng)
        return None

    def sample_next_token_context(self, rng: np.random.Generator) -> tuple[TokenSeq, Hashable]:
        state = self.sample_state(rng)
        return self.sample_prefix(state, rng), state

    def sample_continuation(self, state: Hashable, rng: np.random.Generator) -> TokenSeq:
        raise NotImplementedError(f"{type(self).__name__} does not sample continuations")


def sample_prefix_to_state(world: World, state: Hashable, seed: int) -> TokenSeq:
    """Seeded convenience wrapper around ``world.sample_prefix``."""
    return world.sample_prefix(state, np.random.default_rng(seed))
