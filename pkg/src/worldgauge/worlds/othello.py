"""Othello (Reversi) as an implicit automaton over move tokens.

Bitboard engine: two 64-bit occupancy masks plus the side to move.  Tokens are
the 60 playable squares in algebraic notation (the four center squares are
occupied from the start and never playable).  A move must flank at least one
opponent line; a side with no legal move is skipped implicitly (move streams
carry no pass token), and the game ends when neither side can move.

The state space is far too large to enumerate, so boundaries are approximated
by sampling complete rollouts.  Metric state/prefix sampling draws from a pool
of random games: compression states are boards reached by at least two
distinct games, distinction pairs are distinct boards reached by equal-length
game prefixes.
"""

from __future__ import annotations

import numpy as np

from ..automata import Alphabet, TokenSeq
from ..errors import InputError
from .base import World

FULL = 0xFFFFFFFFFFFFFFFF
_NOT_A = 0xFEFEFEFEFEFEFEFE  # bits with file a cleared
_NOT_H = 0x7F7F7F7F7F7F7F7F

CENTER_SQUARES = (27, 28, 35, 36)  # d4 e4 d5 e5, occupied from the start


def _shift_n(b):
    return (b << 8) & FULL


def _shift_s(b):
    return b >> 8


def _shift_e(b):
    return (b << 1) & _NOT_A & FULL


def _shift_w(b):
    return (b >> 1) & _NOT_H


def _shift_ne(b):
    return (b << 9) & _NOT_A & FULL


def _shift_nw(b):
    return (b << 7) & _NOT_H & FULL


def _shift_se(b):
    return (b >> 7) & _NOT_A


def _shift_sw(b):
    return (b >> 9) & _NOT_H


_SHIFTS = (_shift_n, _shift_s, _shift_e, _shift_w, _shift_ne, _shift_nw, _shift_se, _shift_sw)


def legal_move_mask(own: int, opp: int) -> int:
    """Bit mask of squares where the mover flanks at least one opponent run."""
    empty = ~(own | opp) & FULL
    moves = 0
    for shift in _SHIFTS:
        x = shift(own) & opp
        for _ in range(5):
            x |= shift(x) & opp
        moves |= shift(x) & empty
    return moves


def flip_mask(own: int, opp: int, sq: int) -> int:
    """Opponent disks flipped by the mover playing ``sq`` (0 if not legal)."""
    m = 1 << sq
    flipped = 0
    for shift in _SHIFTS:
        run = 0
        cur = shift(m)
        while cur & opp:
            run |= cur
            cur = shift(cur)
        if run and (cur & own):
            flipped |= run
    return flipped


def square_name(sq: int) -> str:
    return "abcdefgh"[sq % 8] + str(sq // 8 + 1)


# state: (black bitboard, white bitboard, mover) with mover 0=black, 1=white,
# or 2 when neither side can move (terminal)
OthelloState = tuple[int, int, int]

_INITIAL: OthelloState = (
    (1 << 28) | (1 << 35),  # black: e4, d5
    (1 << 27) | (1 << 36),  # white: d4, e5
    0,
)


class OthelloWorld(World):
    boundary_kind = "sampled"

    def __init__(self, pool_games: int = 1000, pool_seed: int = 0):
        self.playable = tuple(sq for sq in range(64) if sq not in CENTER_SQUARES)
        self.alphabet = Alphabet([square_name(sq) for sq in self.playable])
        self._square_of_token = dict(enumerate(self.playable))
        self._token_of_square = {sq: t for t, sq in enumerate(self.playable)}
        self.start_state: OthelloState = _INITIAL
        self.pool_games = pool_games
        self.pool_seed = pool_seed
        self._pool: list[TokenSeq] | None = None
        self._by_state: dict[OthelloState, list[tuple[int, int]]] | None = None

    # -- transition system ----------------------------------------------------

    def step_state(self, state: OthelloState, token: int) -> OthelloState | None:
        black, white, mover = state
        if mover == 2:
            return None
        sq = self._square_of_token[token]
        own, opp = (black, white) if mover == 0 else (white, black)
        if (own | opp) & (1 << sq):
            return None
        flips = flip_mask(own, opp, sq)
        if not flips:
            return None
        own |= flips | (1 << sq)
        opp &= ~flips
        black, white = (own, opp) if mover == 0 else (opp, own)
        other = 1 - mover
        if legal_move_mask(*((white, black) if other else (black, white))):
            nxt = other
        elif legal_move_mask(*((white, black) if mover else (black, white))):
            nxt = mover
        else:
            nxt = 2
        return (black, white, nxt)

    def valid_tokens(self, state: OthelloState) -> tuple[int, ...]:
        black, white, mover = state
        if mover == 2:
            return ()
        own, opp = (black, white) if mover == 0 else (white, black)
        mask = legal_move_mask(own, opp)
        out = []
        while mask:
            low = mask & -mask
            out.append(self._token_of_square[low.bit_length() - 1])
            mask ^= low
        return tuple(out)

    # -- rollouts and pool ------------------------------------------------------

    def random_game(self, rng: np.random.Generator, start: OthelloState | None = None) -> TokenSeq:
        state = self.start_state if start is None else start
        toks: list[int] = []
        while True:
            options = self.valid_tokens(state)
            if not options:
                return tuple(toks)
            a = int(options[rng.integers(len(options))])
            toks.append(a)
            state = self.step_state(state, a)

    def sample_continuation(self, state: OthelloState, rng: np.random.Generator) -> TokenSeq:
        return self.random_game(rng, start=state)

    def _ensure_pool(self) -> None:
        if self._pool is not None:
            return
        rng = np.random.default_rng(self.pool_seed)
        pool = [self.random_game(rng) for _ in range(self.pool_games)]
        by_state: dict[OthelloState, list[tuple[int, int]]] = {}
        for gi, game in enumerate(pool):
            state = self.start_state
            for ply, tok in enumerate(game):
                state = self.step_state(state, tok)
                by_state.setdefault(state, []).append((gi, ply + 1))
        self._pool = pool
        self._by_state = by_state

    def sample_state(self, rng: np.random.Generator) -> OthelloState:
        self._ensure_pool()
        game = self._pool[rng.integers(len(self._pool))]
        ply = int(rng.integers(1, len(game) + 1))
        state = self.start_state
        for tok in game[:ply]:
            state = self.step_state(state, tok)
        return state

    def sample_prefix(self, state: OthelloState, rng: np.random.Generator) -> TokenSeq:
        self._ensure_pool()
        hits = self._by_state.get(state)
        if not hits:
            raise InputError("state does not occur in the sampled game pool")
        gi, ply = hits[rng.integers(len(hits))]
        return self._pool[gi][:ply]

    def sample_compression_pair(self, rng, max_tries: int = 50):
        """A board two pool games reach by genuinely different move sequences."""
        self._ensure_pool()
        candidates = self._compression_candidates()
        if not candidates:
            return None
        state = candidates[rng.integers(len(candidates))]
        prefixes = self.sample_compression_prefixes(state, rng, max_tries)
        if prefixes is None:
            return None
        return state, prefixes[0], prefixes[1]

    def _compression_candidates(self) -> list[OthelloState]:
        # boards reached via at least two distinct prefixes (transpositions)
        if not hasattr(self, "_comp_candidates"):
            self._comp_candidates = [
                s
                for s, hits in self._by_state.items()
                if len({self._pool[gi][:ply] for gi, ply in hits}) >= 2
            ]
        return self._comp_candidates

    def sample_compression_prefixes(self, state: OthelloState, rng, max_tries: int = 50):
        hits = self._by_state.get(state, [])
        if len(hits) < 2:
            return None
        for _ in range(max_tries):
            i, j = rng.choice(len(hits), size=2, replace=False)
            (g1, p1), (g2, p2) = hits[int(i)], hits[int(j)]
            s1, s2 = self._pool[g1][:p1], self._pool[g2][:p2]
            if s1 != s2:
                return s1, s2
        return None

    def sample_distinction_pair(self, rng, max_tries: int = 200):
        """Two distinct boards reached by equal-length prefixes of pool games."""
        self._ensure_pool()
        for _ in range(max_tries):
            g1 = int(rng.integers(len(self._pool)))
            g2 = int(rng.integers(len(self._pool)))
            if g1 == g2:
                continue
            max_ply = min(len(self._pool[g1]), len(self._pool[g2]))
            ply = int(rng.integers(1, max_ply + 1))
            s1, s2 = self._pool[g1][:ply], self._pool[g2][:ply]
            q1 = self._replay(s1)
            q2 = self._replay(s2)
            if q1 != q2:
                return q1, s1, q2, s2
        return None

    def _replay(self, prefix: TokenSeq) -> OthelloState:
        state = self.start_state
        for tok in prefix:
            state = self.step_state(state, tok)
        return state


def othello_world(pool_games: int = 1000, pool_seed: int = 0) -> OthelloWorld:
    return OthelloWorld(pool_games, pool_seed)
