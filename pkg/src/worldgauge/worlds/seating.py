"""Seating-arrangement logic puzzles as an automaton over statements.

``n`` people sit in ``n`` seats.  Tokens are statements: ``A=2`` places person
A in seat 2, ``A-B=1`` says the seat indices of A and B differ by exactly 1
(unordered, absolute distance).  The automaton state is the set of seat
permutations consistent with every statement so far; a statement is valid iff
at least one consistent arrangement survives it, and a contradiction rejects.
States with identical permutation sets are literally identical here (the set
is the state), so the Myhill-Nerode structure is exact by construction.
"""

from __future__ import annotations

import itertools
import string

import numpy as np

from ..automata import Alphabet, TokenSeq
from ..errors import InputError
from .base import World

Arrangement = tuple[int, ...]  # seat of person i, 1-based


class SeatingWorld(World):
    def __init__(self, n: int):
        if not 2 <= n <= 5:
            raise InputError("n must be between 2 and 5 (state space is factorial)")
        self.n = n
        self.persons = string.ascii_uppercase[:n]
        self.perms: tuple[Arrangement, ...] = tuple(
            perm for perm in itertools.permutations(range(1, n + 1))
        )
        names: list[str] = []
        preds: list[frozenset[int]] = []
        for p in range(n):
            for seat in range(1, n + 1):
                names.append(f"{self.persons[p]}={seat}")
                preds.append(
                    frozenset(i for i, perm in enumerate(self.perms) if perm[p] == seat)
                )
        for p, q in itertools.combinations(range(n), 2):
            for d in range(1, n):
                names.append(f"{self.persons[p]}-{self.persons[q]}={d}")
                preds.append(
                    frozenset(
                        i
                        for i, perm in enumerate(self.perms)
                        if abs(perm[p] - perm[q]) == d
                    )
                )
        self.alphabet = Alphabet(names)
        self._preds = preds
        self.start_state: frozenset[int] = frozenset(range(len(self.perms)))
        self._reachable: tuple[frozenset[int], ...] | None = None

    def assign_token(self, person: str, seat: int) -> int:
        return self.alphabet.id_of(f"{person}={seat}")

    def step_state(self, state: frozenset[int], token: int) -> frozenset[int] | None:
        nxt = state & self._preds[token]
        return nxt if nxt else None

    def valid_tokens(self, state: frozenset[int]) -> tuple[int, ...]:
        return tuple(a for a, pred in enumerate(self._preds) if state & pred)

    def reachable_states(self) -> tuple[frozenset[int], ...]:
        """All reachable consistent permutation sets, in BFS order."""
        if self._reachable is None:
            seen = {self.start_state}
            order = [self.start_state]
            frontier = [self.start_state]
            while frontier:
                nxt = []
                for state in frontier:
                    for a in range(len(self._preds)):
                        child = state & self._preds[a]
                        if child and child not in seen:
                            seen.add(child)
                            order.append(child)
                            nxt.append(child)
                frontier = nxt
            self._reachable = tuple(order)
        return self._reachable

    # -- samplers -----------------------------------------------------------

    def sample_state(self, rng: np.random.Generator) -> frozenset[int]:
        states = self.reachable_states()
        return states[rng.integers(len(states))]

    def sample_prefix(self, state: frozenset[int], rng: np.random.Generator) -> TokenSeq:
        """Random statement sequence narrowing the start state to exactly ``state``.

        Draws only statements that hold for every arrangement in the target
        (so the walk can never overshoot) until the running intersection
        equals the target.
        """
        candidates = [
            a for a, pred in enumerate(self._preds) if state <= pred
        ]
        rng.shuffle(candidates)
        cur = self.start_state
        toks: list[int] = []
        for a in candidates:
            if cur == state:
                break
            nxt = cur & self._preds[a]
            if nxt != cur:
                toks.append(a)
                cur = nxt
        if cur != state:
            raise InputError("state is not reachable by statements true of it")
        return tuple(toks)

    def fully_specified_task(
        self, rng: np.random.Generator, minimal: bool = True
    ) -> tuple[TokenSeq, Arrangement]:
        """A statement set pinning down a single arrangement, plus the answer.

        With ``minimal=True``, removing any one statement leaves more than one
        consistent arrangement.
        """
        target_idx = int(rng.integers(len(self.perms)))
        target = frozenset([target_idx])
        statements = list(self.sample_prefix(target, rng))
        if minimal:
            kept = list(statements)
            order = list(range(len(kept)))
            rng.shuffle(order)
            for i in sorted(order, reverse=True):
                trial = kept[:i] + kept[i + 1 :]
                cur = self.start_state
                for a in trial:
                    cur = cur & self._preds[a]
                if cur == target:
                    kept = trial
            statements = kept
        return tuple(statements), self.perms[target_idx]


def seating_world(n: int) -> SeatingWorld:
    return SeatingWorld(n)


def task_accuracy(world: SeatingWorld, judge, num_instances: int, seed: int = 0, minimal: bool = True):
    """Fraction of fully specified puzzles the judge solves exactly.

    The judge answers by acceptance: person ``p`` is judged to sit in seat
    ``s`` iff the statement ``p=s`` is accepted after the puzzle statements.
    An instance counts as solved when the judged assignment of every person
    is exactly the answer key.
    """
    from ..metrics import MetricReport  # local import to avoid a cycle

    rng = np.random.default_rng(seed)
    scores = []
    for _ in range(num_instances):
        statements, answer = world.fully_specified_task(rng, minimal=minimal)
        ok = True
        for p in range(world.n):
            accepted = [
                seat
                for seat in range(1, world.n + 1)
                if judge(statements, (world.assign_token(world.persons[p], seat),))
            ]
            if accepted != [answer[p]]:
                ok = False
                break
        scores.append(1.0 if ok else 0.0)
    return MetricReport(
        name="task_accuracy",
        scores=np.asarray(scores),
        params={"num_instances": num_instances, "seed": seed, "minimal": minimal},
    )
