import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_dfa
from worldgauge.automata import Alphabet, state_of_prefix
from worldgauge.errors import InputError
from worldgauge.genmodel import (
    AcceptanceRule,
    CorruptedModel,
    ExactDfaModel,
    NgramModel,
    PerturbedDfaModel,
    RandomLogitModel,
    UniformModel,
    accepted_mask,
    accepts_suffix,
    accepts_token,
    corrupt_sequences,
    find_language_mismatch,
    greedy_decode,
    make_corrupted_dfa_model,
    make_exact_dfa_model,
    make_uniform_model,
    perplexity,
    sample_corrupted_sequences,
    sample_suffixes,
    train_ngram,
)
from worldgauge.worlds import connect4_world, gen_grid_city, nav_world


class TestAcceptanceRules:
    def test_parameter_validation(self):
        with pytest.raises(InputError):
            AcceptanceRule("epsilon", 0.0)
        with pytest.raises(InputError):
            AcceptanceRule("epsilon", 1.0)
        with pytest.raises(InputError):
            AcceptanceRule("top_k", 0)
        with pytest.raises(InputError):
            AcceptanceRule("top_p", 1.5)
        with pytest.raises(InputError):
            AcceptanceRule("nonsense", 0.5)

    def test_epsilon_strict_threshold(self):
        dist = np.array([0.02, 0.01, 0.97])
        rule = AcceptanceRule("epsilon", 0.01)
        assert accepts_token(rule, dist, 0)
        assert not accepts_token(rule, dist, 1)  # exactly epsilon is rejected
        assert accepts_token(rule, dist, 2)

    def test_top_k(self):
        dist = np.array([0.5, 0.3, 0.2])
        assert accepted_mask(AcceptanceRule("top_k", 1), dist).tolist() == [True, False, False]
        assert accepted_mask(AcceptanceRule("top_k", 2), dist).tolist() == [True, True, False]

    def test_top_p_strict_inequality_edge(self):
        # minimal set {0.6, 0.3} has mass 0.9 which is not > 0.9, so the set
        # extends to include 0.1 and every token is accepted
        dist = np.array([0.6, 0.3, 0.1])
        mask = accepted_mask(AcceptanceRule("top_p", 0.90), dist)
        assert mask.tolist() == [True, True, True]
        mask = accepted_mask(AcceptanceRule("top_p", 0.85), dist)
        assert mask.tolist() == [True, True, False]

    def test_top_p_full_mass(self):
        dist = np.array([0.7, 0.3])
        assert accepted_mask(AcceptanceRule("top_p", 1.0), dist).tolist() == [True, True]

    def test_zero_probability_never_accepted(self):
        dist = np.array([1.0, 0.0, 0.0])
        for rule in (AcceptanceRule("top_k", 3), AcceptanceRule("top_p", 1.0)):
            assert accepted_mask(rule, dist).tolist() == [True, False, False]
        zero = np.zeros(3)
        for rule in (
            AcceptanceRule("epsilon", 0.01),
            AcceptanceRule("top_k", 2),
            AcceptanceRule("top_p", 0.9),
        ):
            assert not accepted_mask(rule, zero).any()

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_monotonicity(self, seed):
        rng = np.random.default_rng(seed)
        dist = rng.dirichlet(np.ones(6))
        eps_small = accepted_mask(AcceptanceRule("epsilon", 0.01), dist)
        eps_big = accepted_mask(AcceptanceRule("epsilon", 0.2), dist)
        assert not (eps_big & ~eps_small).any()  # larger epsilon accepts less
        k1 = accepted_mask(AcceptanceRule("top_k", 1), dist)
        k3 = accepted_mask(AcceptanceRule("top_k", 3), dist)
        assert not (k1 & ~k3).any()
        p_small = accepted_mask(AcceptanceRule("top_p", 0.5), dist)
        p_big = accepted_mask(AcceptanceRule("top_p", 0.95), dist)
        assert not (p_small & ~p_big).any()


class TestReferenceModels:
    def test_uniform_is_prefix_independent(self):
        c4 = connect4_world(4)
        model = make_uniform_model(c4.alphabet)
        d0 = model.next_dist(())
        d1 = model.next_dist((0, 1, 2))
        assert np.allclose(d0, 1.0 / 7)
        assert np.array_equal(d0, d1)

    def test_exact_model_uniform_over_valid(self):
        c4 = connect4_world(1)
        model = make_exact_dfa_model(c4)
        dist = model.next_dist((0,))  # column 1 now full
        assert dist[0] == 0.0
        assert np.allclose(dist[1:], 1.0 / 6)

    def test_exact_model_dead_end_gives_zero_vector(self):
        c4 = connect4_world(1)
        model = make_exact_dfa_model(c4)
        full = tuple(range(7))
        assert model.next_dist(full).sum() == 0.0

    def test_exact_model_invalid_prefix_raises(self):
        c4 = connect4_world(1)
        model = make_exact_dfa_model(c4)
        with pytest.raises(InputError):
            model.next_dist((0, 0))

    def test_exact_model_end_token_at_destination(self, small_nav):
        model = make_exact_dfa_model(small_nav)
        node = small_nav.graph.nodes[0]
        prefix = small_nav.header(node, node)
        assert model.next_dist(prefix)[small_nav.end_token] > 0

    def test_exact_model_next_token_support_matches_dfa(self, rng):
        for _ in range(20):
            dfa = random_dfa(rng)
            model = make_exact_dfa_model(dfa)
            for _ in range(50):
                # random valid prefix
                prefix = []
                q = dfa.start
                for _ in range(int(rng.integers(0, 6))):
                    opts = dfa.valid_tokens(q)
                    if not opts:
                        break
                    a = int(opts[rng.integers(len(opts))])
                    prefix.append(a)
                    q = dfa.step(q, a)
                dist = model.next_dist(tuple(prefix))
                support = {int(a) for a in np.nonzero(dist > 0)[0]}
                assert support == set(dfa.valid_tokens(q))

    def test_random_logit_deterministic(self):
        alphabet = Alphabet(["a", "b", "c"])
        m1 = RandomLogitModel(alphabet, seed=4)
        m2 = RandomLogitModel(alphabet, seed=4)
        assert np.array_equal(m1.next_dist((0, 1)), m2.next_dist((0, 1)))
        assert not np.array_equal(m1.next_dist((0, 1)), m1.next_dist((1, 0)))


class TestSampling:
    def test_deterministic_given_seed(self):
        c4 = connect4_world(2)
        model = make_exact_dfa_model(c4)
        rule = AcceptanceRule("epsilon", 0.01)
        a = sample_suffixes(model, (), rule, 5, 10, seed=9)
        b = sample_suffixes(model, (), rule, 5, 10, seed=9)
        assert a == b

    def test_exact_model_samples_always_valid(self, rng):
        c4 = connect4_world(2)
        model = make_exact_dfa_model(c4)
        rule = AcceptanceRule("epsilon", 0.01)
        from worldgauge.automata import run_state

        for sample in sample_suffixes(model, (0, 1), rule, 20, 14, rng):
            assert run_state(c4, c4.step_state(c4.step_state(c4.start_state, 0), 1), sample.tokens) is not None

    def test_never_emits_rejected_token(self, rng):
        alphabet = Alphabet(["a", "b", "c"])

        class Fixed:
            def __init__(self):
                self.alphabet = alphabet

            def next_dist(self, prefix):
                return np.array([0.895, 0.1, 0.005])

        rule = AcceptanceRule("epsilon", 0.01)
        for sample in sample_suffixes(Fixed(), (), rule, 50, 5, rng):
            assert 2 not in sample.tokens

    def test_truncation_flag_on_dead_end(self):
        c4 = connect4_world(1)
        model = make_exact_dfa_model(c4)
        rule = AcceptanceRule("epsilon", 0.01)
        samples = sample_suffixes(model, (), rule, 3, 100, seed=0)
        # every complete fill uses exactly 7 tokens then hits the dead end
        for s in samples:
            assert len(s.tokens) == 7
            assert s.truncated

    def test_empirical_frequencies_match_renormalized(self):
        alphabet = Alphabet(["a", "b", "c", "d"])

        class Fixed:
            def __init__(self):
                self.alphabet = alphabet
                self.p = np.array([0.5, 0.3, 0.195, 0.005])

            def next_dist(self, prefix):
                return self.p

        rule = AcceptanceRule("epsilon", 0.01)
        samples = sample_suffixes(Fixed(), (), rule, 10_000, 1, seed=3)
        counts = np.zeros(4)
        for s in samples:
            counts[s.tokens[0]] += 1
        assert counts[3] == 0
        renorm = np.array([0.5, 0.3, 0.195, 0.0])
        renorm /= renorm.sum()
        n = 10_000
        for i in range(3):
            sigma = np.sqrt(n * renorm[i] * (1 - renorm[i]))
            assert abs(counts[i] - n * renorm[i]) < 3.2 * sigma

    def test_greedy_decode_routes_to_destination(self, small_nav):
        router = small_nav.route_model()
        nodes = small_nav.graph.nodes
        o, d = nodes[0], nodes[-1]
        toks = greedy_decode(router, small_nav.header(o, d), 120, small_nav.end_token)
        assert toks[-1] == small_nav.end_token
        assert len(toks) - 1 == small_nav.hop_dist(o, d)


class TestNgram:
    def test_single_sequence_reproduced_greedily(self):
        alphabet = Alphabet(["a", "b", "c"])
        seq = (0, 1, 0, 2)
        model = train_ngram([seq] * 5, alphabet, order=3, smoothing=0.01)
        out = greedy_decode(model, (), 4)
        assert out == seq

    def test_counts_closed_form(self):
        # corpus: "a b", "a c", "a b" -> P(b | a) = (2 + l) / (3 + 3 l)
        alphabet = Alphabet(["a", "b", "c"])
        lam = 0.5
        model = train_ngram([(0, 1), (0, 2), (0, 1)], alphabet, order=2, smoothing=lam)
        dist = model.next_dist((0,))
        assert dist[1] == pytest.approx((2 + lam) / (3 + 3 * lam))
        assert dist[2] == pytest.approx((1 + lam) / (3 + 3 * lam))
        assert dist.sum() == pytest.approx(1.0)

    def test_backoff_on_unseen_context(self):
        alphabet = Alphabet(["a", "b"])
        model = train_ngram([(0, 0, 0)], alphabet, order=3, smoothing=0.1)
        # context (b, b) unseen at order 3 and (b,) unseen at order 2: falls
        # back to the unigram table, which only ever saw "a"
        dist = model.next_dist((1, 1))
        uni = model.next_dist((1,))
        assert np.array_equal(dist, uni)
        assert dist[0] > dist[1]

    def test_large_smoothing_approaches_uniform(self):
        alphabet = Alphabet(["a", "b", "c"])
        model = train_ngram([(0, 0)] * 10, alphabet, order=2, smoothing=1e9)
        assert np.allclose(model.next_dist((0,)), 1 / 3, atol=1e-6)

    def test_distributions_sum_to_one(self, rng):
        alphabet = Alphabet(["a", "b", "c", "d"])
        corpus = [tuple(rng.integers(0, 4, rng.integers(1, 9))) for _ in range(30)]
        model = train_ngram(corpus, alphabet, order=3, smoothing=0.2)
        for _ in range(30):
            prefix = tuple(rng.integers(0, 4, rng.integers(0, 5)))
            assert model.next_dist(prefix).sum() == pytest.approx(1.0)

    def test_empty_corpus_is_uniform(self):
        alphabet = Alphabet(["a", "b"])
        model = train_ngram([], alphabet, order=2, smoothing=0.1)
        assert np.allclose(model.next_dist(()), 0.5)

    def test_serialization_round_trip(self, rng):
        alphabet = Alphabet(["a", "b", "c"])
        corpus = [tuple(rng.integers(0, 3, 6)) for _ in range(20)]
        model = train_ngram(corpus, alphabet, order=3, smoothing=0.3)
        clone = NgramModel.from_json(model.to_json())
        assert clone.to_json() == model.to_json()
        for prefix in [(), (0,), (1, 2), (2, 2, 1)]:
            assert np.array_equal(clone.next_dist(prefix), model.next_dist(prefix))

    def test_bad_document_rejected(self):
        with pytest.raises(InputError):
            NgramModel.from_json('{"format": "something-else"}')

    def test_perplexity_finite(self):
        alphabet = Alphabet(["a", "b"])
        model = train_ngram([(0, 1, 0)], alphabet, order=2, smoothing=0.1)
        assert np.isfinite(perplexity(model, [(1, 1, 0, 1)]))


class TestCorruption:
    def test_zero_probability_is_exact(self, small_nav):
        exact = make_exact_dfa_model(small_nav)
        corrupted = make_corrupted_dfa_model(small_nav, 0.0)
        node = small_nav.graph.nodes
        prefix = small_nav.header(node[0], node[5])
        assert np.array_equal(corrupted.next_dist(prefix), exact.next_dist(prefix))

    def test_full_corruption_always_relabels(self, small_nav):
        # with probability 1 every direction emission is re-labeled, so the
        # surviving mass on any direction comes only from other directions
        exact = make_exact_dfa_model(small_nav)
        corrupted = make_corrupted_dfa_model(small_nav, 1.0)
        node = small_nav.graph.nodes
        prefix = small_nav.header(node[0], node[5])
        p = exact.next_dist(prefix)
        q = corrupted.next_dist(prefix)
        group = list(small_nav.direction_token_ids)
        for tok in group:
            spread = (p[group].sum() - p[tok]) / (len(group) - 1)
            assert q[tok] == pytest.approx(spread)
        assert q.sum() == pytest.approx(1.0)

    def test_corrupted_mass_conserved(self, small_nav):
        corrupted = make_corrupted_dfa_model(small_nav, 0.37)
        node = small_nav.graph.nodes
        for dst in (node[3], node[10]):
            prefix = small_nav.header(node[0], dst)
            assert corrupted.next_dist(prefix).sum() == pytest.approx(1.0)

    def test_empirical_invalid_rate_matches_simulation(self, small_nav):
        # emitted invalid-label rate should approach
        # corruption_prob * (share of re-labelings that are invalid at the state)
        prob = 0.3
        router = small_nav.route_model()
        rng = np.random.default_rng(11)
        nodes = small_nav.graph.nodes
        headers = []
        while len(headers) < 300:
            o, d = nodes[rng.integers(len(nodes))], nodes[rng.integers(len(nodes))]
            if o != d:
                headers.append(small_nav.header(o, d))
        seqs = sample_corrupted_sequences(
            small_nav, router, prob, small_nav.direction_token_ids, headers,
            seed=5, end_token=small_nav.end_token,
        )
        total = invalid = 0
        expected_terms = []
        group = set(small_nav.direction_token_ids)
        for seq in seqs:
            state = state_of_prefix(small_nav, seq[:2])
            for tok in seq[2:]:
                if tok == small_nav.end_token:
                    break
                total += 1
                nxt = small_nav.step_state(state, tok)
                if nxt is None:
                    invalid += 1
                    # corrupted labels never move the hidden ride; recover the
                    # expected invalid share at this state for the oracle
                    valid_here = set(small_nav.valid_tokens(state))
                    others = group - {tok}
                    expected_terms.append(len(others - valid_here) / len(others))
                    break  # emitted stream no longer tracks the state
                valid_here = set(small_nav.valid_tokens(state))
                others = group - {tok}
                expected_terms.append(len(others - valid_here) / len(others))
                state = nxt
        rate = invalid / total
        expected = prob * float(np.mean(expected_terms))
        assert abs(rate - expected) < 0.05

    def test_corrupt_sequences_single_relabel(self, rng):
        seqs = [(0, 1, 2, 3)] * 200
        out = corrupt_sequences(seqs, 0.5, relabel_tokens=(1, 2, 3), seed=rng)
        changed = [a for a, b in zip(seqs, out) if a != b]
        assert 60 < len(changed) < 140  # about half
        for a, b in zip(seqs, out):
            diffs = [i for i in range(4) if a[i] != b[i]]
            assert len(diffs) in (0, 1)
            if diffs:
                assert diffs[0] != 0  # token 0 is outside the re-label group

    def test_needs_two_labels(self, small_nav):
        with pytest.raises(InputError):
            CorruptedModel(make_exact_dfa_model(small_nav), 0.5, relabel_tokens=(3,))


class TestLanguageEquivalence:
    def test_exact_model_matches_dfa(self, rng):
        rule = AcceptanceRule("epsilon", 0.01)
        for _ in range(15):
            dfa = random_dfa(rng, max_states=6, max_reach_depth=5)
            model = make_exact_dfa_model(dfa)
            assert find_language_mismatch(dfa, model, (), rule, 6) is None

    def test_perturbed_model_detected(self, rng):
        rule = AcceptanceRule("epsilon", 0.01)
        dfa = random_dfa(rng, max_states=5, max_reach_depth=4)
        q = dfa.start
        valid = dfa.valid_tokens(q)
        invalid = [a for a in range(len(dfa.alphabet)) if a not in valid]
        for token in list(valid)[:1] + invalid[:1]:
            try:
                model = PerturbedDfaModel(dfa, q, int(token))
            except InputError:
                continue
            assert find_language_mismatch(dfa, model, (), rule, 6) is not None

    def test_uniform_model_on_connect4(self):
        c4 = connect4_world(1)
        rule = AcceptanceRule("epsilon", 0.01)
        uniform = make_uniform_model(c4.alphabet)
        # uniform accepts a drop into a full column that the world rejects
        mismatch = find_language_mismatch(c4, uniform, (0,), rule, 2)
        assert mismatch is not None


class TestAcceptsSuffix:
    def test_exact_matches_world_membership(self, small_nav, rng):
        model = make_exact_dfa_model(small_nav)
        rule = AcceptanceRule("epsilon", 0.001)
        from worldgauge.automata import run_state

        for _ in range(40):
            state = small_nav.sample_state(rng)
            prefix = small_nav.sample_prefix(state, rng)
            suffix = tuple(int(t) for t in rng.choice(
                list(small_nav.direction_token_ids) + [small_nav.end_token], size=3
            ))
            assert accepts_suffix(model, prefix, suffix, rule) == (
                run_state(small_nav, state, suffix) is not None
            )

    def test_uniform_epsilon_thresholds(self):
        c4 = connect4_world(4)
        uniform = make_uniform_model(c4.alphabet)
        assert accepts_suffix(uniform, (), (0, 0, 0), AcceptanceRule("epsilon", 0.01))
        assert not accepts_suffix(uniform, (), (0,), AcceptanceRule("epsilon", 0.2))

    def test_empty_suffix_rejected(self):
        c4 = connect4_world(4)
        uniform = make_uniform_model(c4.alphabet)
        with pytest.raises(InputError):
            accepts_suffix(uniform, (), (), AcceptanceRule("epsilon", 0.01))
