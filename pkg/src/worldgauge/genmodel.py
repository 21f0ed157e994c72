"""Generative sequence models and the acceptance rules that induce languages.

A model is any object with an ``alphabet`` and a ``next_dist(prefix)`` method
returning a probability vector over the alphabet.  An acceptance rule turns
that vector into a set of accepted next tokens (threshold, top-k, or top-p),
which in turn defines the set of sequences the model can generate.

The reference models here are deliberately simple: a uniform babbler, an
oracle that spreads mass uniformly over the tokens valid in an underlying
world, a corrupted variant of any base model that randomly re-labels tokens
from a designated group, a fixed random-logit model standing in for an
untrained network, and a count-based n-gram model with additive smoothing and
back-off.  External neural models attach through the bridge module instead.

Dead ends are representable: at a state with no valid continuation the oracle
returns the all-zero vector (the one exception to the unit-sum invariant), and
every acceptance rule treats zero-probability tokens as rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from .automata import Alphabet, TokenSeq, state_of_prefix
from .errors import InputError

# -- acceptance rules --------------------------------------------------------


@dataclass(frozen=True)
class AcceptanceRule:
    """Policy converting a next-token distribution into accepted tokens.

    ``epsilon``: accept tokens with probability strictly above the threshold.
    ``top_k``: accept the k highest-probability tokens (ties broken by lower
    token id, matching a stable descending sort).
    ``top_p``: accept the smallest set of highest-probability tokens whose
    cumulative mass exceeds p, extended to the whole support if the total
    never exceeds p.  Zero-probability tokens are never accepted.
    """

    kind: str
    param: float

    def __post_init__(self):
        if self.kind == "epsilon":
            if not 0.0 < self.param < 1.0:
                raise InputError("epsilon must lie in (0, 1)")
        elif self.kind == "top_k":
            if self.param < 1 or self.param != int(self.param):
                raise InputError("top_k parameter must be an integer >= 1")
        elif self.kind == "top_p":
            if not 0.0 < self.param <= 1.0:
                raise InputError("top_p parameter must lie in (0, 1]")
        else:
            raise InputError(f"unknown acceptance rule kind {self.kind!r}")

    def __str__(self) -> str:
        return f"{self.kind}={self.param:g}"


DEFAULT_RULE = AcceptanceRule("epsilon", 0.01)


def accepted_mask(rule: AcceptanceRule, dist: np.ndarray) -> np.ndarray:
    """Boolean mask of tokens the rule accepts under ``dist``."""
    positive = dist > 0.0
    if rule.kind == "epsilon":
        return dist > rule.param
    order = np.argsort(-dist, kind="stable")
    mask = np.zeros(len(dist), dtype=bool)
    if rule.kind == "top_k":
        mask[order[: int(rule.param)]] = True
    else:  # top_p
        csum = np.cumsum(dist[order])
        above = np.nonzero(csum > rule.param)[0]
        cut = int(above[0]) + 1 if len(above) else len(order)
        mask[order[:cut]] = True
    return mask & positive


def accepts_token(rule: AcceptanceRule, dist: np.ndarray, a: int) -> bool:
    if not 0 <= a < len(dist):
        raise InputError(f"token {a} out of range")
    if rule.kind == "epsilon":
        return bool(dist[a] > rule.param)
    return bool(accepted_mask(rule, dist)[a])


def accepts_suffix(model, prefix: Sequence[int], suffix: Sequence[int], rule: AcceptanceRule) -> bool:
    """Does the model accept every token of ``suffix`` after ``prefix``?"""
    if len(suffix) == 0:
        raise InputError("suffix must be non-empty")
    ctx = tuple(prefix)
    for a in suffix:
        if not accepts_token(rule, model.next_dist(ctx), a):
            return False
        ctx = ctx + (a,)
    return True


@dataclass(frozen=True)
class SampledSuffix:
    tokens: TokenSeq
    truncated: bool  # ended because no token was accepted, not by choice


def sample_suffixes(
    model,
    prefix: Sequence[int],
    rule: AcceptanceRule | None,
    m: int,
    max_len: int,
    seed: int | np.random.Generator,
    end_token: int | None = None,
) -> list[SampledSuffix]:
    """Draw ``m`` continuations from the model, renormalized over accepted tokens.

    ``rule=None`` means plain ancestral sampling (positive probability only).
    Each sample stops at ``end_token`` (when given), at ``max_len`` tokens, or
    with ``truncated=True`` when no token is accepted.
    """
    if max_len < 1:
        raise InputError("max_len must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    base = tuple(prefix)
    out = []
    for _ in range(m):
        ctx = base
        toks: list[int] = []
        truncated = False
        for _ in range(max_len):
            dist = model.next_dist(ctx)
            mask = accepted_mask(rule, dist) if rule is not None else dist > 0.0
            weights = np.where(mask, dist, 0.0)
            total = weights.sum()
            if total <= 0.0:
                truncated = True
                break
            cdf = np.cumsum(weights / total)
            a = int(np.searchsorted(cdf, rng.random(), side="right"))
            if a >= len(dist) or not mask[a]:
                a = int(np.nonzero(mask)[0][-1])
            toks.append(a)
            ctx = ctx + (a,)
            if end_token is not None and a == end_token:
                break
        out.append(SampledSuffix(tuple(toks), truncated))
    return out


def greedy_decode(model, prefix: Sequence[int], max_len: int, end_token: int | None = None) -> TokenSeq:
    """Argmax decoding until ``end_token``, ``max_len``, or an empty distribution."""
    ctx = tuple(prefix)
    toks: list[int] = []
    for _ in range(max_len):
        dist = model.next_dist(ctx)
        if dist.max() <= 0.0:
            break
        a = int(np.argmax(dist))
        toks.append(a)
        ctx = ctx + (a,)
        if end_token is not None and a == end_token:
            break
    return tuple(toks)


# -- reference models --------------------------------------------------------


class UniformModel:
    """Assigns every token probability 1/|alphabet| regardless of the prefix."""

    def __init__(self, alphabet: Alphabet):
        self.alphabet = alphabet
        self._dist = np.full(len(alphabet), 1.0 / len(alphabet))

    def next_dist(self, prefix: Sequence[int]) -> np.ndarray:
        return self._dist


class ExactDfaModel:
    """Oracle model: uniform over the tokens valid in the underlying world.

    Prefix-to-state resolution is memoized so that extending a known prefix by
    one token costs a single transition; this makes suffix-tree evaluations
    linear instead of quadratic.  Very long prefixes are resolved but not
    cached to bound memory.
    """

    _CACHE_MAX_LEN = 512
    _CACHE_MAX_SIZE = 500_000

    def __init__(self, system):
        self.system = system
        self.alphabet = system.alphabet
        self._states: dict[TokenSeq, Hashable] = {(): system.start_state}

    def _support(self, state) -> tuple[int, ...]:
        return self.system.valid_tokens(state)

    def state_of(self, prefix: tuple[int, ...]) -> Hashable:
        state = self._states.get(prefix)
        if state is not None:
            return state
        # walk back to the longest cached ancestor, then forward
        i = len(prefix)
        while i > 0 and prefix[:i] not in self._states:
            i -= 1
        state = self._states[prefix[:i]]
        for j in range(i, len(prefix)):
            state = self.system.step_state(state, prefix[j])
            if state is None:
                raise InputError("prefix is invalid in the underlying world")
        if len(prefix) <= self._CACHE_MAX_LEN:
            if len(self._states) >= self._CACHE_MAX_SIZE:
                self._states = {(): self.system.start_state}
            self._states[prefix] = state
        return state

    def next_dist(self, prefix: Sequence[int]) -> np.ndarray:
        support = self._support(self.state_of(tuple(prefix)))
        dist = np.zeros(len(self.alphabet))
        if support:
            dist[list(support)] = 1.0 / len(support)
        return dist


class PerturbedDfaModel(ExactDfaModel):
    """Oracle with the validity of exactly one (state, token) entry flipped."""

    def __init__(self, system, target_state, token: int):
        super().__init__(system)
        base = set(system.valid_tokens(target_state))
        flipped = base ^ {token}
        if not flipped:
            raise InputError("perturbation would leave the state with no support")
        self.target_state = target_state
        self.token = token
        self._flipped = tuple(sorted(flipped))

    def _support(self, state) -> tuple[int, ...]:
        if state == self.target_state:
            return self._flipped
        return self.system.valid_tokens(state)


class CorruptedModel:
    """Re-labels emissions from a base model within a designated token group.

    With probability ``corruption_prob``, a token drawn from the group (for
    navigation worlds: the eight direction labels) is replaced by a uniformly
    chosen *other* label from the group, whether or not the replacement is
    valid where it lands.  ``next_dist`` is the exact law of that two-stage
    process given the state the prefix reaches, so greedy decoding and
    single-step sampling see the corrupted distribution directly.

    Caveat: once an emitted label is invalid in the world, the true ride state
    is no longer a function of the emitted prefix, so this distribution view
    only conditions on world-valid prefixes.  Whole corrupted *sequences*
    (where the underlying ride continues along the true path while labels lie)
    come from ``sample_corrupted_sequences``, which tracks the hidden state.
    """

    def __init__(self, base_model, corruption_prob: float, relabel_tokens: Sequence[int]):
        if not 0.0 <= corruption_prob <= 1.0:
            raise InputError("corruption_prob must lie in [0, 1]")
        if len(relabel_tokens) < 2:
            raise InputError("need at least two labels to re-label among")
        self.base = base_model
        self.alphabet = base_model.alphabet
        self.corruption_prob = corruption_prob
        self.relabel_tokens = tuple(sorted(relabel_tokens))

    def next_dist(self, prefix: Sequence[int]) -> np.ndarray:
        p = self.base.next_dist(prefix)
        c = self.corruption_prob
        if c == 0.0:
            return p
        group = list(self.relabel_tokens)
        g = p[group]
        out = p.copy()
        # mass landing on label a = survived mass + re-label mass from others
        spread = (g.sum() - g) / (len(group) - 1)
        out[group] = (1.0 - c) * g + c * spread
        return out


class RandomLogitModel:
    """Fixed random function from prefixes to distributions (untrained stand-in)."""

    def __init__(self, alphabet: Alphabet, seed: int = 0):
        self.alphabet = alphabet
        self.seed = seed

    def next_dist(self, prefix: Sequence[int]) -> np.ndarray:
        rng = np.random.default_rng(
            np.random.SeedSequence([self.seed, len(prefix), *(t + 1 for t in prefix)])
        )
        logits = rng.standard_normal(len(self.alphabet))
        z = np.exp(logits - logits.max())
        return z / z.sum()


class NgramModel:
    """Additively smoothed n-gram model with back-off to shorter contexts.

    ``counts[L]`` maps a length-L context to token counts.  Prediction uses
    the longest context length with observations; an unseen context backs off
    one level at a time down to the unigram table, and an empty model is
    uniform.
    """

    FORMAT = "worldgauge-ngram"
    VERSION = 1

    def __init__(self, alphabet: Alphabet, order: int, smoothing: float):
        if order < 1:
            raise InputError("order must be >= 1")
        if smoothing <= 0.0:
            raise InputError("smoothing must be > 0")
        self.alphabet = alphabet
        self.order = order
        self.smoothing = smoothing
        self.counts: list[dict[TokenSeq, dict[int, int]]] = [{} for _ in range(order)]
        self.totals: list[dict[TokenSeq, int]] = [{} for _ in range(order)]

    def observe(self, seq: Sequence[int]) -> None:
        seq = tuple(seq)
        for i, tok in enumerate(seq):
            for length in range(min(self.order - 1, i) + 1):
                ctx = seq[i - length : i]
                slot = self.counts[length].setdefault(ctx, {})
                slot[tok] = slot.get(tok, 0) + 1
                self.totals[length][ctx] = self.totals[length].get(ctx, 0) + 1

    def next_dist(self, prefix: Sequence[int]) -> np.ndarray:
        prefix = tuple(prefix)
        vocab = len(self.alphabet)
        for length in range(min(self.order - 1, len(prefix)), -1, -1):
            ctx = prefix[len(prefix) - length :]
            total = self.totals[length].get(ctx)
            if total:
                dist = np.full(vocab, self.smoothing)
                for tok, cnt in self.counts[length][ctx].items():
                    dist[tok] += cnt
                return dist / (total + self.smoothing * vocab)
        return np.full(vocab, 1.0 / vocab)

    def to_json(self) -> str:
        doc = {
            "format": self.FORMAT,
            "version": self.VERSION,
            "order": self.order,
            "smoothing": self.smoothing,
            "alphabet": list(self.alphabet.tokens),
            "counts": [
                {
                    " ".join(map(str, ctx)): {str(t): c for t, c in sorted(toks.items())}
                    for ctx, toks in sorted(table.items())
                }
                for table in self.counts
            ],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "NgramModel":
        doc = json.loads(text)
        if doc.get("format") != cls.FORMAT or doc.get("version") != cls.VERSION:
            raise InputError("not a recognized n-gram model document")
        model = cls(Alphabet(doc["alphabet"]), int(doc["order"]), float(doc["smoothing"]))
        for length, table in enumerate(doc["counts"]):
            for key, toks in table.items():
                ctx = tuple(int(x) for x in key.split()) if key else ()
                slot = {int(t): int(c) for t, c in toks.items()}
                model.counts[length][ctx] = slot
                model.totals[length][ctx] = sum(slot.values())
        return model


def train_ngram(
    corpus: Iterable[Sequence[int]], alphabet: Alphabet, order: int, smoothing: float = 0.1
) -> NgramModel:
    model = NgramModel(alphabet, order, smoothing)
    for seq in corpus:
        model.observe(seq)
    return model


def save_ngram(model: NgramModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model.to_json())


def load_ngram(path) -> NgramModel:
    with open(path, encoding="utf-8") as fh:
        return NgramModel.from_json(fh.read())


def perplexity(model, corpus: Iterable[Sequence[int]], floor: float = 1e-12) -> float:
    """Token-level perplexity of the model on a corpus."""
    total_logp = 0.0
    n = 0
    for seq in corpus:
        ctx = ()
        for tok in seq:
            p = float(model.next_dist(ctx)[tok])
            total_logp += np.log(max(p, floor))
            n += 1
            ctx = ctx + (tok,)
    if n == 0:
        raise InputError("perplexity needs a non-empty corpus")
    return float(np.exp(-total_logp / n))


# -- factory helpers matching the public surface -----------------------------


def make_uniform_model(alphabet: Alphabet) -> UniformModel:
    return UniformModel(alphabet)


def make_exact_dfa_model(system) -> ExactDfaModel:
    return ExactDfaModel(system)


def make_corrupted_dfa_model(
    system,
    corruption_prob: float,
    relabel_tokens: Sequence[int] | None = None,
    base_model=None,
) -> CorruptedModel:
    """Corrupted oracle for a world.

    ``relabel_tokens`` defaults to the world's direction-label token ids when
    the world exposes them (navigation), else the full alphabet.
    """
    if relabel_tokens is None:
        relabel_tokens = getattr(system, "direction_token_ids", None)
        if relabel_tokens is None:
            relabel_tokens = tuple(range(len(system.alphabet)))
    base = base_model if base_model is not None else ExactDfaModel(system)
    return CorruptedModel(base, corruption_prob, relabel_tokens)


def sample_corrupted_sequences(
    system,
    base_model,
    corruption_prob: float,
    relabel_tokens: Sequence[int],
    prefixes: Iterable[Sequence[int]],
    seed: int | np.random.Generator,
    max_len: int = 100,
    end_token: int | None = None,
) -> list[TokenSeq]:
    """Emit label-corrupted sequences while the hidden ride follows the truth.

    For each prefix, tokens are sampled from ``base_model`` along the *true*
    (uncorrupted) continuation; each sampled token from the re-label group is
    emitted as a uniformly random other group label with probability
    ``corruption_prob``.  The returned sequences contain the corrupted labels
    (prefix included), so they may be invalid in the world even though every
    underlying step was real.
    """
    if not 0.0 <= corruption_prob <= 1.0:
        raise InputError("corruption_prob must lie in [0, 1]")
    group = sorted(relabel_tokens)
    if len(group) < 2:
        raise InputError("need at least two labels to re-label among")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out: list[TokenSeq] = []
    for prefix in prefixes:
        true_ctx = tuple(prefix)
        emitted = list(true_ctx)
        for _ in range(max_len):
            dist = base_model.next_dist(true_ctx)
            total = dist.sum()
            if total <= 0.0:
                break
            cdf = np.cumsum(dist / total)
            a = int(np.searchsorted(cdf, rng.random(), side="right"))
            a = min(a, len(dist) - 1)
            label = a
            if a in group and rng.random() < corruption_prob:
                others = [t for t in group if t != a]
                label = int(others[rng.integers(len(others))])
            emitted.append(label)
            true_ctx = true_ctx + (a,)
            if end_token is not None and a == end_token:
                break
        out.append(tuple(emitted))
    return out


def corrupt_sequences(
    sequences: Iterable[Sequence[int]],
    prob: float,
    relabel_tokens: Sequence[int],
    seed: int | np.random.Generator = 0,
) -> list[TokenSeq]:
    """Sequence-level corruption: some sequences get one re-labeled token.

    With probability ``prob`` a sequence is chosen for corruption, and one
    uniformly chosen token from the re-label group is replaced by a uniformly
    chosen *other* group label.  Sequences without group tokens pass through
    unchanged.  This is the corpus-transformation counterpart of
    ``CorruptedModel``'s per-emission noise.
    """
    if not 0.0 <= prob <= 1.0:
        raise InputError("prob must lie in [0, 1]")
    group = set(relabel_tokens)
    labels = sorted(group)
    if len(labels) < 2:
        raise InputError("need at least two labels to re-label among")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out: list[TokenSeq] = []
    for seq in sequences:
        seq = tuple(seq)
        if rng.random() < prob:
            positions = [i for i, t in enumerate(seq) if t in group]
            if positions:
                i = positions[rng.integers(len(positions))]
                others = [t for t in labels if t != seq[i]]
                seq = seq[:i] + (int(others[rng.integers(len(others))]),) + seq[i + 1 :]
        out.append(seq)
    return out


def find_language_mismatch(
    system, model, prefix: Sequence[int], rule: AcceptanceRule, max_depth: int
) -> TokenSeq | None:
    """First suffix (DFS order, length <= max_depth) where model and world disagree.

    A suffix is accepted by the world iff it stays valid from the state the
    prefix reaches, and by the model iff every token passes the rule.  Returns
    None when the two languages agree on all suffixes up to the depth bound.
    """
    start = state_of_prefix(system, prefix)
    if start is None:
        raise InputError("prefix is invalid in the world")
    base = tuple(prefix)
    stack: list[tuple[TokenSeq, Hashable]] = [((), start)]
    while stack:
        suffix, state = stack.pop()
        if len(suffix) >= max_depth:
            continue
        mask = accepted_mask(rule, model.next_dist(base + suffix))
        for a in range(len(system.alphabet)):
            nxt = system.step_state(state, a)
            if bool(mask[a]) != (nxt is not None):
                return suffix + (a,)
            if nxt is not None:
                stack.append((suffix + (a,), nxt))
    return None
