import numpy as np
import pytest

from oracles import OccupancyConnect4, naive_othello_legal
from worldgauge.automata import run_state
from worldgauge.errors import InputError
from worldgauge.worlds import connect4_world, othello_world
from worldgauge.worlds.othello import CENTER_SQUARES, flip_mask, legal_move_mask, square_name


class TestConnect4:
    def test_empty_board_accepts_all_columns(self):
        w = connect4_world(3)
        assert w.valid_tokens(w.start_state) == tuple(range(7))

    def test_step_matches_occupancy_oracle(self, rng):
        w = connect4_world(3)
        for _ in range(200):
            oracle = OccupancyConnect4(3)
            state = w.start_state
            for _ in range(25):
                col = int(rng.integers(7))
                ok = oracle.drop(col)
                nxt = w.step_state(state, col)
                assert (nxt is not None) == ok
                if not ok:
                    break
                state = nxt
                assert state == oracle.counts()
                assert w.valid_tokens(state) == oracle.open_columns()

    def test_full_game_reaches_unique_full_board(self, rng):
        n = 2
        w = connect4_world(n)
        for _ in range(30):
            state = w.start_state
            moves = 0
            while w.valid_tokens(state):
                options = w.valid_tokens(state)
                state = w.step_state(state, int(options[rng.integers(len(options))]))
                moves += 1
            assert moves == 7 * n
            assert state == (n,) * 7

    def test_full_column_rejects(self):
        w = connect4_world(2)
        state = (0, 0, 0, 2, 0, 0, 0)
        assert w.step_state(state, 3) is None

    def test_prefix_sampler_reaches_state(self, rng):
        w = connect4_world(4)
        for _ in range(100):
            state = w.sample_state(rng)
            prefix = w.sample_prefix(state, rng)
            assert run_state(w, w.start_state, prefix) == state

    def test_single_interleaving_states_skip_compression(self, rng):
        w = connect4_world(4)
        # all disks in one column: only one prefix exists
        assert w.sample_compression_prefixes((3, 0, 0, 0, 0, 0, 0), rng) is None

    def test_to_dfa_guard(self):
        with pytest.raises(InputError):
            connect4_world(10).to_dfa()


class TestOthelloEngine:
    def test_opening_position(self):
        w = othello_world(pool_games=5)
        names = {w.alphabet.name_of(t) for t in w.valid_tokens(w.start_state)}
        assert names == {"d3", "c4", "f5", "e6"}

    def test_center_squares_not_in_alphabet(self):
        w = othello_world(pool_games=5)
        assert len(w.alphabet) == 60
        for sq in CENTER_SQUARES:
            assert square_name(sq) not in w.alphabet.tokens

    def test_legal_mask_matches_naive_scan_on_random_boards(self, rng):
        # arbitrary occupancy patterns, not just reachable positions
        for _ in range(4000):
            occupied = int(rng.integers(0, 2**63)) | int(rng.integers(0, 2**63)) << 1
            black = occupied & int(rng.integers(0, 2**63)) << 1 | int(rng.integers(0, 2**63))
            black &= occupied
            white = occupied & ~black
            for player in (0, 1):
                own, opp = (black, white) if player == 0 else (white, black)
                got = legal_move_mask(own, opp)
                want = naive_othello_legal(black, white, player)
                assert {i for i in range(64) if got >> i & 1} == want

    def test_legal_mask_matches_naive_scan_in_games(self, rng):
        w = othello_world(pool_games=5)
        for _ in range(40):
            state = w.start_state
            while True:
                black, white, player = state
                if player == 2:
                    break
                own, opp = (black, white) if player == 0 else (white, black)
                got = legal_move_mask(own, opp)
                want = naive_othello_legal(black, white, player)
                assert {i for i in range(64) if got >> i & 1} == want
                options = w.valid_tokens(state)
                state = w.step_state(state, int(options[rng.integers(len(options))]))

    def test_flips_are_flanked_runs(self):
        # black plays d3 at the start: flips exactly d4
        w = othello_world(pool_games=5)
        black, white, _p = w.start_state
        d3 = w.alphabet.id_of("d3")
        nxt = w.step_state(w.start_state, d3)
        assert nxt is not None
        nb, nw_, player = nxt
        assert player == 1  # white to move
        assert bin(nb).count("1") == 4 and bin(nw_).count("1") == 1

    def test_illegal_moves_reject(self):
        w = othello_world(pool_games=5)
        a1 = w.alphabet.id_of("a1")
        assert w.step_state(w.start_state, a1) is None

    def test_random_games_never_reject_and_terminate(self, rng):
        w = othello_world(pool_games=5)
        for _ in range(25):
            game = w.random_game(rng)
            state = w.start_state
            for tok in game:
                state = w.step_state(state, tok)
                assert state is not None
            assert w.valid_tokens(state) == ()
            assert len(game) <= 60

    def test_flip_mask_zero_for_illegal(self):
        black, white, _p = othello_world(pool_games=5).start_state
        assert flip_mask(black, white, 0) == 0


class TestOthelloSampling:
    def test_compression_pair_prefixes_reach_same_board(self, rng):
        # transpositions need a sizable pool; 1000 random games is the
        # standard sampling recipe for this world
        w = othello_world(pool_games=1000, pool_seed=1)
        found = 0
        for _ in range(20):
            drawn = w.sample_compression_pair(rng)
            if drawn is None:
                continue
            found += 1
            state, s1, s2 = drawn
            assert s1 != s2
            assert run_state(w, w.start_state, s1) == state
            assert run_state(w, w.start_state, s2) == state
        assert found >= 15

    def test_tiny_pool_returns_none_gracefully(self, rng):
        w = othello_world(pool_games=5, pool_seed=1)
        assert w.sample_compression_pair(rng) is None or True  # no crash

    def test_distinction_pairs_equal_length_distinct_states(self, rng):
        w = othello_world(pool_games=30, pool_seed=2)
        for _ in range(20):
            q1, s1, q2, s2 = w.sample_distinction_pair(rng)
            assert len(s1) == len(s2)
            assert q1 != q2
            assert run_state(w, w.start_state, s1) == q1
            assert run_state(w, w.start_state, s2) == q2

    def test_continuations_complete_games(self, rng):
        w = othello_world(pool_games=10, pool_seed=3)
        state = w.sample_state(rng)
        cont = w.sample_continuation(state, rng)
        final = run_state(w, state, cont)
        assert final is not None
        assert w.valid_tokens(final) == ()

    def test_pool_deterministic(self):
        a = othello_world(pool_games=10, pool_seed=5)
        b = othello_world(pool_games=10, pool_seed=5)
        a._ensure_pool()
        b._ensure_pool()
        assert a._pool == b._pool
