"""Cumulative Connect-4: drop disks until the board is full.

Seven columns, ``n_rows`` slots each.  Players alternate dropping a disk into
any column that still has room; the game runs until every column is full
(exactly ``7 * n_rows`` moves), with no notion of winning.  Because a disk
never moves once dropped, the game state is just the per-column disk count,
and the only illegal move is dropping into a full column.

Tokens are the column names "1".."7".  The state space is every count vector
in ``[0, n_rows]^7``; all of them are reachable from the empty board.
"""

from __future__ import annotations

import numpy as np

from ..automata import Alphabet, Dfa, TokenSeq
from ..errors import InputError
from .base import World

NUM_COLUMNS = 7


class Connect4World(World):
    def __init__(self, n_rows: int):
        if n_rows < 1:
            raise InputError("n_rows must be >= 1")
        self.n_rows = n_rows
        self.alphabet = Alphabet([str(c) for c in range(1, NUM_COLUMNS + 1)])
        self.start_state: tuple[int, ...] = (0,) * NUM_COLUMNS

    def step_state(self, state: tuple[int, ...], token: int) -> tuple[int, ...] | None:
        if state[token] >= self.n_rows:
            return None
        return state[:token] + (state[token] + 1,) + state[token + 1 :]

    def valid_tokens(self, state: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(c for c in range(NUM_COLUMNS) if state[c] < self.n_rows)

    # -- samplers -----------------------------------------------------------

    def sample_state(self, rng: np.random.Generator) -> tuple[int, ...]:
        """Uniform over all count vectors, full columns included."""
        return tuple(int(x) for x in rng.integers(0, self.n_rows + 1, NUM_COLUMNS))

    def sample_prefix(self, state: tuple[int, ...], rng: np.random.Generator) -> TokenSeq:
        """A uniformly shuffled interleaving of the drops the state implies."""
        tokens = np.repeat(np.arange(NUM_COLUMNS), state)
        return tuple(int(t) for t in rng.permutation(tokens))

    def sample_continuation(self, state: tuple[int, ...], rng: np.random.Generator) -> TokenSeq:
        toks = []
        while True:
            open_cols = self.valid_tokens(state)
            if not open_cols:
                return tuple(toks)
            a = int(open_cols[rng.integers(len(open_cols))])
            toks.append(a)
            state = self.step_state(state, a)

    # -- explicit automaton (small boards) ------------------------------------

    def to_dfa(self) -> Dfa:
        """Materialize the full automaton; feasible for small ``n_rows`` only."""
        base = self.n_rows + 1
        num_boards = base**NUM_COLUMNS
        if num_boards > 1_000_000:
            raise InputError("board too large to materialize explicitly")

        def state_id(state: tuple[int, ...]) -> int:
            sid = 0
            for c in reversed(state):
                sid = sid * base + c
            return sid

        reject = num_boards
        table = np.full((num_boards + 1, NUM_COLUMNS), reject, dtype=np.int64)
        for sid in range(num_boards):
            rem = sid
            state = []
            for _ in range(NUM_COLUMNS):
                state.append(rem % base)
                rem //= base
            for col in range(NUM_COLUMNS):
                if state[col] < self.n_rows:
                    bumped = list(state)
                    bumped[col] += 1
                    table[sid, col] = state_id(tuple(bumped))
        return Dfa(self.alphabet, table, start=0, reject=reject)


def connect4_world(n_rows: int) -> Connect4World:
    return Connect4World(n_rows)


def fraction_of_states_with_no_full_column(n_rows: int) -> float:
    """Analytic share of uniformly drawn count vectors with every column open."""
    return (n_rows / (n_rows + 1)) ** NUM_COLUMNS
