import numpy as np
import pytest

from worldgauge.detour import DetourConfig, run_detours, run_detours_game
from worldgauge.errors import InputError
from worldgauge.genmodel import make_corrupted_dfa_model, make_exact_dfa_model, make_uniform_model
from worldgauge.worlds import StreetEdge, StreetGraph, nav_world, othello_world


def line_graph(n=6):
    coords = {i: (0.1 * i, 0.0) for i in range(n)}
    edges = []
    for i in range(n - 1):
        edges.append(StreetEdge(i, i + 1, 0.1, "E"))
        edges.append(StreetEdge(i + 1, i, 0.1, "W"))
    return StreetGraph(coords, edges)


class TestConfig:
    def test_validation(self):
        with pytest.raises(InputError):
            DetourConfig(1.5)
        with pytest.raises(InputError):
            DetourConfig(0.5, "sideways")
        with pytest.raises(InputError):
            DetourConfig(0.5, trials=0)


class TestNavDetours:
    def test_router_perfect_at_every_probability(self, small_nav):
        router = small_nav.route_model()
        for p in (0.0, 0.1, 0.75):
            for mode in ("random", "adversarial"):
                rep = run_detours(small_nav, router, DetourConfig(p, mode, trials=30), seed=5)
                assert rep.mean == 1.0, (p, mode)
                assert rep.se == 0.0

    def test_p_zero_equals_plain_greedy(self, small_nav):
        # without detours the score is exactly the plain greedy validity of
        # the model; for a model ignoring the board that is zero
        uniform = make_uniform_model(small_nav.alphabet)
        rep = run_detours(small_nav, uniform, DetourConfig(0.0, trials=20), seed=5)
        from worldgauge.genmodel import greedy_decode
        from worldgauge.automata import state_of_prefix

        nodes = small_nav.graph.nodes
        o, d = nodes[0], nodes[3]
        toks = greedy_decode(uniform, small_nav.header(o, d), 110, small_nav.end_token)
        plain_valid = (
            state_of_prefix(small_nav, small_nav.header(o, d) + toks) == ("done",)
            and toks and toks[-1] == small_nav.end_token
        )
        assert rep.mean == float(plain_valid) == 0.0

    def test_full_adversarial_on_line_matches_independent_simulation(self):
        # with p=1 and a prefix-blind model, every step is the adversarial
        # substitution and the whole trial is a deterministic function of the
        # (origin, destination) pair; replay it with an independent simulator
        g = line_graph(6)
        world = nav_world(g)
        uniform = make_uniform_model(world.alphabet)
        max_len = 100

        def oracle_trial(origin, dest):
            cur, used = origin, 0
            while True:
                # candidate substitutions under the budget constraint
                cands = []
                state = (cur, dest)
                for tok in world.valid_tokens(state):
                    if tok == world.end_token:
                        cands.append(tok)
                        continue
                    nxt = world.step_state(state, tok)
                    if world.hop_dist(nxt[0], dest) <= max_len - (used + 1):
                        cands.append(tok)
                # uniform probabilities tie, adversarial takes the largest id
                token = max(cands)
                if token == world.end_token:
                    return 1.0 if cur == dest else 0.0
                cur = world.step_state((cur, dest), token)[0]
                used += 1
                if used > max_len:
                    return 0.0

        for origin, dest in ((0, 5), (5, 0), (2, 4), (4, 1)):
            rep = run_detours(
                world, uniform, DetourConfig(1.0, "adversarial", trials=5),
                seed=3, test_pairs=[(origin, dest)],
            )
            assert rep.mean == oracle_trial(origin, dest), (origin, dest)

    def test_invalid_model_token_fails_trial(self, small_nav):
        uniform = make_uniform_model(small_nav.alphabet)
        rep = run_detours(small_nav, uniform, DetourConfig(0.0, trials=10), seed=1)
        assert rep.mean == 0.0  # argmax is a node token, invalid mid-ride

    def test_random_mode_keeps_router_on_track(self, small_nav):
        router = small_nav.route_model()
        rep = run_detours(small_nav, router, DetourConfig(1.0, "random", trials=25), seed=9)
        assert rep.mean == 1.0

    def test_deterministic_given_seed(self, small_nav):
        router = small_nav.route_model()
        corrupted = make_corrupted_dfa_model(small_nav, 0.9, base_model=router)
        a = run_detours(small_nav, corrupted, DetourConfig(0.1, trials=25), seed=8)
        b = run_detours(small_nav, corrupted, DetourConfig(0.1, trials=25), seed=8)
        assert np.array_equal(a.scores, b.scores)

    def test_corruption_stress_monotone(self, small_nav):
        # greedy decoding shrugs off mild distribution noise but collapses
        # once the corrupted mass dominates the argmax
        router = small_nav.route_model()
        means = []
        for c in (0.0, 0.5, 0.95):
            model = make_corrupted_dfa_model(small_nav, c, base_model=router)
            rep = run_detours(small_nav, model, DetourConfig(0.05, trials=25), seed=4)
            means.append(rep.mean)
        assert means[0] >= means[1] - 0.05
        assert means[1] >= means[2] - 0.05
        assert means[0] == 1.0 and means[2] < 0.5

    def test_held_out_pairs_respected(self, small_nav):
        router = small_nav.route_model()
        pairs = [(small_nav.graph.nodes[0], small_nav.graph.nodes[7])]
        rep = run_detours(small_nav, router, DetourConfig(0.5, trials=10), seed=2,
                          test_pairs=pairs)
        assert rep.mean == 1.0


class TestGameDetours:
    def test_exact_model_perfect_at_every_probability(self):
        world = othello_world(pool_games=5)
        exact = make_exact_dfa_model(world)
        for p in (0.0, 0.25, 1.0):
            for mode in ("random", "adversarial"):
                rep = run_detours_game(world, exact, DetourConfig(p, mode, trials=10), seed=6)
                assert rep.mean == 1.0, (p, mode)

    def test_p_zero_is_plain_rollout(self):
        world = othello_world(pool_games=5)
        uniform = make_uniform_model(world.alphabet)
        rep = run_detours_game(world, uniform, DetourConfig(0.0, trials=10), seed=6)
        # greedy argmax of a uniform distribution is the lowest square, which
        # is never a legal opening move
        assert rep.mean == 0.0

    def test_full_detours_rescue_blind_model(self):
        # with p=1 every move is replaced by a legal one, so even the blind
        # model produces complete legal games
        world = othello_world(pool_games=5)
        uniform = make_uniform_model(world.alphabet)
        rep = run_detours_game(world, uniform, DetourConfig(1.0, "random", trials=10), seed=6)
        assert rep.mean == 1.0
