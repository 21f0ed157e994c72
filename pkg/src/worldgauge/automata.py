"""Deterministic finite automata with an explicit absorbing reject state.

A world model here is a complete DFA in which every state except a single
``reject`` state is accepting.  A token sequence is valid iff running it never
touches ``reject``; the reject state absorbs (all of its outgoing transitions
are self-loops).

Two state-pair notions drive the evaluation metrics built on top of this
module:

* the *interior* of a state pair: non-empty sequences valid from both states;
* the *boundary* of an ordered state pair: minimal sequences valid from the
  first state but not the second (every proper non-empty prefix lies in the
  interior).

``compute_boundary_exact`` and ``compute_boundary_sampled`` materialize the
boundary.  Both are written against a small structural interface (``start_state``,
``step_state``, ``valid_tokens``) so that lazily-defined worlds with huge state
spaces can reuse them; ``Dfa`` implements the same interface with integer
states.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Iterator, Sequence

import numpy as np

from .errors import InputError

TokenSeq = tuple[int, ...]

DIRECTION_NAMES = ("N", "S", "E", "W", "NE", "NW", "SE", "SW")


class Alphabet:
    """Ordered token vocabulary with dense integer ids."""

    def __init__(self, tokens: Sequence[str]):
        tokens = tuple(tokens)
        if len(tokens) < 1:
            raise InputError("alphabet must contain at least one token")
        if any(not t for t in tokens):
            raise InputError("alphabet tokens must be non-empty strings")
        if len(set(tokens)) != len(tokens):
            raise InputError("alphabet tokens must be unique")
        self.tokens = tokens
        self._index = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Alphabet) and self.tokens == other.tokens

    def __hash__(self) -> int:
        return hash(self.tokens)

    def __repr__(self) -> str:
        return f"Alphabet({len(self.tokens)} tokens)"

    def id_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise InputError(f"unknown token {name!r}") from None

    def name_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise InputError(f"token id {token_id} out of range")
        return self.tokens[token_id]

    def encode(self, text: str | Iterable[str]) -> TokenSeq:
        """Translate a space-separated string (or iterable of names) to ids."""
        names = text.split() if isinstance(text, str) else list(text)
        return tuple(self.id_of(n) for n in names)

    def decode(self, seq: Iterable[int]) -> str:
        return " ".join(self.name_of(t) for t in seq)


class Dfa:
    """Complete DFA over dense integer states; all states accept except ``reject``."""

    def __init__(
        self,
        alphabet: Alphabet,
        transitions: Sequence[Sequence[int]] | np.ndarray,
        start: int,
        reject: int,
    ):
        table = np.asarray(transitions, dtype=np.int64)
        if table.ndim != 2 or table.shape[1] != len(alphabet):
            raise InputError("transition table must be num_states x alphabet size")
        n = table.shape[0]
        if not (0 <= start < n and 0 <= reject < n):
            raise InputError("start/reject state out of range")
        if table.min() < 0 or table.max() >= n:
            raise InputError("transition target out of range")
        if not (table[reject] == reject).all():
            raise InputError("reject state must self-loop on every token")
        self.alphabet = alphabet
        self.transitions = table
        self.num_states = n
        self.start = start
        self.reject = reject
        # token ids valid per state, cached for the structural interface
        self._valid: list[tuple[int, ...]] | None = None

    def __repr__(self) -> str:
        return f"Dfa(states={self.num_states}, tokens={len(self.alphabet)})"

    def step(self, q: int, a: int) -> int:
        if not 0 <= q < self.num_states:
            raise InputError(f"state {q} out of range")
        if not 0 <= a < len(self.alphabet):
            raise InputError(f"token {a} out of range")
        return int(self.transitions[q, a])

    def run(self, q: int, seq: Sequence[int]) -> int:
        for a in seq:
            q = self.step(q, a)
            if q == self.reject:
                return self.reject
        return q

    def accepts_from(self, q: int, seq: Sequence[int]) -> bool:
        if len(seq) == 0:
            raise InputError("acceptance is defined for non-empty sequences only")
        return self.run(q, seq) != self.reject

    # -- structural interface shared with lazily-defined worlds ------------

    @property
    def start_state(self) -> int:
        return self.start

    def step_state(self, state: int, token: int) -> int | None:
        nxt = self.step(state, token)
        return None if nxt == self.reject else nxt

    def valid_tokens(self, state: int) -> tuple[int, ...]:
        if self._valid is None:
            rej = self.reject
            self._valid = [
                tuple(int(a) for a in np.nonzero(row != rej)[0])
                for row in self.transitions
            ]
        return self._valid[state]


def run_state(system, state: Hashable | None, seq: Sequence[int]) -> Hashable | None:
    """Fold ``step_state`` over ``seq``; ``None`` stands for the reject state."""
    for a in seq:
        if state is None:
            return None
        state = system.step_state(state, a)
    return state


def state_of_prefix(system, prefix: Sequence[int]) -> Hashable | None:
    return run_state(system, system.start_state, prefix)


def seq_valid_from(system, state: Hashable, seq: Sequence[int]) -> bool:
    if len(seq) == 0:
        raise InputError("validity is defined for non-empty sequences only")
    return run_state(system, state, seq) is not None


def mn_interior_member(dfa: Dfa, q1: int, q2: int, s: Sequence[int]) -> bool:
    """Is ``s`` valid from both states (a member of the pair's interior)?"""
    return dfa.accepts_from(q1, s) and dfa.accepts_from(q2, s)


@dataclass(frozen=True)
class BoundarySet:
    """Minimal distinguishing suffixes for an ordered state pair.

    ``mode`` records provenance: ``"exact"`` sets are exhaustive up to depth
    ``depth_or_samples``; ``"sampled"`` sets come from that many Monte Carlo
    trajectories and may miss suffixes.
    """

    suffixes: frozenset[TokenSeq]
    mode: str
    depth_or_samples: int

    def __post_init__(self):
        if self.mode not in ("exact", "sampled"):
            raise InputError(f"unknown boundary mode {self.mode!r}")
        for s in self.suffixes:
            if len(s) == 0:
                raise InputError("boundary suffixes must be non-empty")

    def __len__(self) -> int:
        return len(self.suffixes)

    def __iter__(self) -> Iterator[TokenSeq]:
        return iter(sorted(self.suffixes))

    def __contains__(self, seq: TokenSeq) -> bool:
        return tuple(seq) in self.suffixes

    def is_prefix_free(self) -> bool:
        for s in self.suffixes:
            for j in range(1, len(s)):
                if s[:j] in self.suffixes:
                    return False
        return True


def compute_boundary_exact(system, q1, q2, max_depth: int = 5) -> BoundarySet:
    """All minimal suffixes valid from ``q1`` but not ``q2``, up to ``max_depth``.

    Breadth-first search over the synchronized pair automaton.  Words are
    grouped by the (q1-side, q2-side) state pair they reach so the valid-token
    classification is computed once per pair and depth rather than once per
    word.  States indistinguishable within the depth budget yield an empty set
    here; that is a statement about depth ``max_depth`` only, not equality.
    """
    if max_depth < 1:
        raise InputError("max_depth must be >= 1")
    boundary: list[TokenSeq] = []
    # words of the current length, grouped by the pair state they reach
    layer: dict[tuple[Hashable, Hashable], list[TokenSeq]] = {(q1, q2): [()]}
    for _ in range(max_depth):
        nxt: dict[tuple[Hashable, Hashable], list[TokenSeq]] = {}
        for (u, v), words in layer.items():
            for a in system.valid_tokens(u):
                v2 = system.step_state(v, a)
                if v2 is None:
                    boundary.extend(w + (a,) for w in words)
                else:
                    u2 = system.step_state(u, a)
                    nxt.setdefault((u2, v2), []).extend(w + (a,) for w in words)
        layer = nxt
        if not layer:
            break
    return BoundarySet(frozenset(boundary), "exact", max_depth)


def boundary_exists(system, q1, q2, max_depth: int) -> bool:
    """Is the (q1, q2) boundary non-empty within ``max_depth``?

    Pair-state search only; nothing is materialized, so this stays cheap even
    where the boundary itself would be enormous.
    """
    if max_depth < 1:
        raise InputError("max_depth must be >= 1")
    seen = {(q1, q2)}
    layer = [(q1, q2)]
    for _ in range(max_depth):
        nxt = []
        for u, v in layer:
            for a in system.valid_tokens(u):
                v2 = system.step_state(v, a)
                if v2 is None:
                    return True
                u2 = system.step_state(u, a)
                if (u2, v2) not in seen:
                    seen.add((u2, v2))
                    nxt.append((u2, v2))
        layer = nxt
        if not layer:
            break
    return False


def compute_boundary_sampled(
    system,
    q1,
    q2,
    continuation_sampler: Callable[[np.random.Generator], Sequence[int]],
    m: int,
    seed: int | np.random.Generator = 0,
) -> BoundarySet:
    """Approximate the boundary from ``m`` sampled complete continuations.

    Each trajectory must be valid from ``q1`` (the sampler's contract).  For
    every trajectory that dies from ``q2``, its shortest dead prefix is a
    minimal distinguishing suffix and enters the set.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    found: set[TokenSeq] = set()
    for _ in range(m):
        traj = tuple(continuation_sampler(rng))
        if len(traj) == 0:
            continue
        if run_state(system, q1, traj) is None:
            raise RuntimeError("continuation sampler produced a sequence invalid from q1")
        v = q2
        for i, a in enumerate(traj):
            v = system.step_state(v, a)
            if v is None:
                found.add(traj[: i + 1])
                break
    return BoundarySet(frozenset(found), "sampled", m)


def reachable_states(dfa: Dfa) -> set[int]:
    """Accept states reachable from the start state (reject excluded)."""
    seen = {dfa.start} if dfa.start != dfa.reject else set()
    frontier = deque(seen)
    while frontier:
        q = frontier.popleft()
        for a in dfa.valid_tokens(q):
            nxt = int(dfa.transitions[q, a])
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen


def minimize(dfa: Dfa) -> Dfa:
    """Language-preserving minimization by partition refinement.

    Unreachable accept states are dropped first.  The reject state is always
    kept (the representation requires it) and is always its own block.  Output
    block ids are assigned by the lowest original state id they contain, with
    reject placed last, so the result is deterministic.
    """
    reach = sorted(reachable_states(dfa))
    vocab = len(dfa.alphabet)
    if not reach:
        # degenerate case: the start state is (or only reaches) reject
        table = np.zeros((1, vocab), dtype=np.int64)
        return Dfa(dfa.alphabet, table, start=0, reject=0)
    # refine {reachable accept states} until no block splits; reject is
    # implicitly its own block (sentinel -1 in signatures)
    block: dict[int, int] = {q: 0 for q in reach}
    n_blocks = 1
    while True:
        sigs: dict[tuple[int, ...], list[int]] = {}
        for q in reach:
            row = dfa.transitions[q]
            sig = tuple(
                -1 if int(row[a]) == dfa.reject else block[int(row[a])]
                for a in range(vocab)
            )
            sigs.setdefault((block[q],) + sig, []).append(q)
        groups = sorted(sigs.values(), key=min)
        new_block = {q: i for i, g in enumerate(groups) for q in g}
        if len(groups) == n_blocks:
            block = new_block
            break
        block, n_blocks = new_block, len(groups)
    reject_id = n_blocks
    table = np.full((n_blocks + 1, vocab), reject_id, dtype=np.int64)
    for q in reach:
        b = block[q]
        for a in range(vocab):
            tgt = int(dfa.transitions[q, a])
            table[b, a] = reject_id if tgt == dfa.reject else block[tgt]
    return Dfa(dfa.alphabet, table, start=block[dfa.start], reject=reject_id)


def dfa_equivalent(d1: Dfa, d2: Dfa) -> bool:
    """Do two DFAs accept the same language?  Product-automaton emptiness check."""
    if d1.alphabet != d2.alphabet:
        return False
    seen = {(d1.start, d2.start)}
    frontier = deque(seen)
    while frontier:
        u, v = frontier.popleft()
        for a in range(len(d1.alphabet)):
            u2, v2 = int(d1.transitions[u, a]), int(d2.transitions[v, a])
            if (u2 == d1.reject) != (v2 == d2.reject):
                return False
            if u2 == d1.reject:
                continue
            if (u2, v2) not in seen:
                seen.add((u2, v2))
                frontier.append((u2, v2))
    return True


# -- JSON interchange -------------------------------------------------------
#
# {"alphabet": [...names...], "num_states": N, "start": s, "reject": r,
#  "transitions": [N*V ints, row-major]}
#
# Serialization is canonical (sorted keys, no whitespace) so save/load
# round-trips are byte-stable.


def dfa_to_json(dfa: Dfa) -> str:
    doc = {
        "alphabet": list(dfa.alphabet.tokens),
        "num_states": dfa.num_states,
        "start": dfa.start,
        "reject": dfa.reject,
        "transitions": [int(x) for x in dfa.transitions.reshape(-1)],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def dfa_from_json(text: str) -> Dfa:
    doc = json.loads(text)
    try:
        alphabet = Alphabet(doc["alphabet"])
        n = int(doc["num_states"])
        table = np.asarray(doc["transitions"], dtype=np.int64).reshape(n, len(alphabet))
        return Dfa(alphabet, table, start=int(doc["start"]), reject=int(doc["reject"]))
    except (KeyError, ValueError) as exc:
        raise InputError(f"malformed DFA document: {exc}") from exc


def save_dfa(dfa: Dfa, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dfa_to_json(dfa))


def load_dfa(path) -> Dfa:
    with open(path, encoding="utf-8") as fh:
        return dfa_from_json(fh.read())
