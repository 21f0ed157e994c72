"""Compression, distinction, and next-token metrics with Monte Carlo estimation.

Three measurements compare a generative model against a world:

* **next-token test** -- is the model's top-1 prediction valid where the
  prefix leads?  When several tokens tie for the top probability, all of them
  must be valid (a uniform babbler is only credited where every move is
  legal).
* **compression precision** -- for two prefixes reaching the *same* state,
  continuations sampled from the model after one prefix must all be accepted
  after the other (checked in both directions).  One violating sample zeroes
  the pair.
* **distinction precision / recall** -- for prefixes reaching *distinct*
  states, the model's sampled boundary is compared against the world's
  boundary: precision asks whether the model's minimal distinguishing
  suffixes really distinguish the states, recall asks what share of the true
  boundary the model separates.

Equal-state recall is undefined (no true boundary), so compression reports
precision only; a model's empty boundary on equal states scores 1.  An empty
model boundary on distinct states is excluded from the precision average and
counted in the report.  Pairs whose true boundary is empty at the depth
budget are redrawn and logged.

Every estimator takes an explicit seed and derives one child seed per unit of
work, so results are reproducible bit-for-bit and independent of worker
count.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .automata import (
    BoundarySet,
    TokenSeq,
    boundary_exists,
    compute_boundary_exact,
    compute_boundary_sampled,
    run_state,
    state_of_prefix,
)
from .errors import BridgeError, InputError, PartialResultError
from .genmodel import (
    AcceptanceRule,
    DEFAULT_RULE,
    accepted_mask,
    accepts_suffix,
    accepts_token,
    sample_suffixes,
)


@dataclass
class MetricReport:
    """Per-unit scores plus the bookkeeping needed to interpret them."""

    name: str
    scores: np.ndarray
    params: dict = field(default_factory=dict)
    skipped: int = 0  # draws that produced no usable unit
    resampled: int = 0  # redraws due to an empty true boundary
    not_applicable: int = 0  # units excluded from the average

    @property
    def n(self) -> int:
        return len(self.scores)

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores)) if self.n else float("nan")

    @property
    def se(self) -> float:
        if self.n < 2:
            return 0.0
        return float(np.std(self.scores, ddof=1) / np.sqrt(self.n))

    def summary(self) -> str:
        if self.n == 0:
            return "n/a"
        return f"{self.mean:.2f} ({self.se:.2f})"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mean": self.mean,
            "se": self.se,
            "n": self.n,
            "skipped": self.skipped,
            "resampled": self.resampled,
            "not_applicable": self.not_applicable,
            "params": self.params,
            "scores": [float(s) for s in self.scores],
        }


def _run_units(num_units: int, seed: int, unit: Callable, workers: int = 1) -> list:
    """Evaluate ``unit(index, rng)`` per unit with independent child seeds.

    Results come back in index order whatever the worker count, so
    parallelism never changes the aggregate.
    """
    children = np.random.SeedSequence(seed).spawn(num_units)
    if workers <= 1:
        done: list = []
        for i in range(num_units):
            try:
                done.append(unit(i, np.random.default_rng(children[i])))
            except BridgeError as exc:
                raise PartialResultError(
                    f"bridge failure at unit {i}/{num_units}: {exc}", done, i
                ) from exc
        return done
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(
            pool.map(lambda i: unit(i, np.random.default_rng(children[i])), range(num_units))
        )


# -- next-token test ---------------------------------------------------------


def next_token_test(world, model, prefixes: Iterable[TokenSeq], states=None) -> MetricReport:
    """Fraction of prefixes whose top-probability prediction is valid.

    ``states`` may carry the (pre-verified) state each prefix reaches, which
    spares a replay for worlds where prefixes are long.
    """
    scores: list[float] = []
    pairs = zip(prefixes, states) if states is not None else ((p, None) for p in prefixes)
    for prefix, state in pairs:
        prefix = tuple(prefix)
        if state is None:
            state = state_of_prefix(world, prefix)
            if state is None:
                raise InputError("next-token test prefix is invalid in the world")
        dist = model.next_dist(prefix)
        top = np.nonzero(dist == dist.max())[0]
        ok = all(world.step_state(state, int(a)) is not None for a in top)
        scores.append(1.0 if ok else 0.0)
    return MetricReport("next_token", np.asarray(scores, dtype=float))


def sample_next_token_contexts(world, n: int, seed: int):
    """Stream ``n`` (prefix, state) pairs drawn from the world's samplers."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield world.sample_next_token_context(rng)


# -- boundary statistics -----------------------------------------------------


def boundary_recall(
    world_boundary: BoundarySet, model, s1: TokenSeq, s2: TokenSeq, rule: AcceptanceRule
) -> float | None:
    """Share of the true boundary the model accepts after s1 and rejects after s2.

    Returns None when the true boundary is empty (undefined for equal states).
    Elements are walked as a shared-prefix tree so each context costs one
    model call regardless of how many suffixes pass through it.
    """
    if len(world_boundary) == 0:
        return None
    root: dict = {}
    for word in world_boundary.suffixes:
        node = root
        for tok in word:
            node = node.setdefault(tok, {})
    hits = 0

    def walk(node: dict, c1: TokenSeq, c2: TokenSeq, alive2: bool) -> None:
        nonlocal hits
        m1 = accepted_mask(rule, model.next_dist(c1))
        m2 = accepted_mask(rule, model.next_dist(c2)) if alive2 else None
        for tok, child in node.items():
            if not m1[tok]:
                continue  # not generable from s1: no recall credit below here
            a2 = alive2 and bool(m2[tok])
            if child:
                walk(child, c1 + (tok,), c2 + (tok,), a2)
            elif not a2:
                hits += 1

    walk(root, tuple(s1), tuple(s2), True)
    return hits / len(world_boundary)


def boundary_precision(model_boundary: BoundarySet, system, q1, q2) -> float | None:
    """Share of the model's boundary that genuinely separates q1 from q2.

    An empty model boundary is correct (precision 1) when the states are
    equal, and not applicable (None) when they differ.
    """
    if len(model_boundary) == 0:
        return 1.0 if q1 == q2 else None
    hits = 0
    for word in model_boundary.suffixes:
        if run_state(system, q1, word) is not None and run_state(system, q2, word) is None:
            hits += 1
    return hits / len(model_boundary)


def model_boundary_from_samples(
    model,
    s1: TokenSeq,
    s2: TokenSeq,
    rule: AcceptanceRule,
    m: int,
    max_len: int,
    seed,
    end_token: int | None = None,
) -> BoundarySet:
    """Monte Carlo approximation of the model's boundary for (s1, s2).

    Samples continuations after s1 (rule-constrained by construction) and
    records the minimal prefix of each that the model rejects after s2.
    """
    samples = sample_suffixes(model, s1, rule, m, max_len, seed, end_token)
    found: set[TokenSeq] = set()
    base2 = tuple(s2)
    for sample in samples:
        ctx = base2
        for i, a in enumerate(sample.tokens):
            if not accepts_token(rule, model.next_dist(ctx), a):
                found.add(sample.tokens[: i + 1])
                break
            ctx = ctx + (a,)
    return BoundarySet(frozenset(found), "sampled", m)


# -- compression -------------------------------------------------------------


def _compression_pair_score(world, model, rule, s1, s2, m, max_len, rng) -> float:
    for src, dst in ((s1, s2), (s2, s1)):
        for sample in sample_suffixes(model, src, rule, m, max_len, rng, world.end_token):
            if sample.tokens and not accepts_suffix(model, dst, sample.tokens, rule):
                return 0.0
    return 1.0


def compression_precision(
    world,
    model,
    rule: AcceptanceRule = DEFAULT_RULE,
    num_states: int = 100,
    prefix_pairs_per_state: int = 1,
    m: int = 30,
    max_len: int = 100,
    seed: int = 0,
    workers: int = 1,
) -> MetricReport:
    """Do same-state prefixes admit the same continuations under the model?

    Scores one state per unit: 1 only if no sampled continuation of either
    prefix is rejected after the other, averaged over ``prefix_pairs_per_state``
    prefix pairs, then over states.  States that cannot produce two distinct
    prefixes are skipped and counted.
    """

    def unit(_i: int, rng: np.random.Generator):
        drawn = world.sample_compression_pair(rng)
        if drawn is None:
            return None
        state, s1, s2 = drawn
        pair_scores = [_compression_pair_score(world, model, rule, s1, s2, m, max_len, rng)]
        for _ in range(prefix_pairs_per_state - 1):
            more = world.sample_compression_prefixes(state, rng)
            if more is None:
                break
            pair_scores.append(
                _compression_pair_score(world, model, rule, more[0], more[1], m, max_len, rng)
            )
        return float(np.mean(pair_scores))

    results = _run_units(num_states, seed, unit, workers)
    scores = [r for r in results if r is not None]
    return MetricReport(
        "compression_precision",
        np.asarray(scores, dtype=float),
        params={
            "rule": str(rule),
            "num_states": num_states,
            "prefix_pairs_per_state": prefix_pairs_per_state,
            "m": m,
            "max_len": max_len,
            "seed": seed,
        },
        skipped=len(results) - len(scores),
    )


# -- distinction -------------------------------------------------------------


def distinction_metrics(
    world,
    model,
    rule: AcceptanceRule = DEFAULT_RULE,
    num_pairs: int = 100,
    m: int = 30,
    k: int = 5,
    max_len: int = 100,
    seed: int = 0,
    workers: int = 1,
    max_resample: int = 200,
) -> tuple[MetricReport, MetricReport]:
    """(precision report, recall report) over distinct-state prefix pairs.

    The true boundary is exhaustive to depth ``k`` for explicit worlds and
    sampled from ``m`` rollouts for rollout worlds.  Pairs whose true boundary
    comes back empty are redrawn (logged in ``resampled``); pairs where the
    model's sampled boundary is empty contribute recall but are excluded from
    the precision average (logged in ``not_applicable``).
    """

    def unit(_i: int, rng: np.random.Generator):
        resampled = 0
        for _ in range(max_resample):
            drawn = world.sample_distinction_pair(rng)
            if drawn is None:
                continue
            q1, s1, q2, s2 = drawn
            if world.boundary_kind == "sampled":
                true_boundary = compute_boundary_sampled(
                    world, q1, q2, lambda r: world.sample_continuation(q1, r), m, rng
                )
            else:
                if not boundary_exists(world, q1, q2, k):
                    resampled += 1
                    continue
                true_boundary = compute_boundary_exact(world, q1, q2, k)
            if len(true_boundary) == 0:
                resampled += 1
                continue
            recall = boundary_recall(true_boundary, model, s1, s2, rule)
            model_boundary = model_boundary_from_samples(
                model, s1, s2, rule, m, max_len, rng, world.end_token
            )
            precision = boundary_precision(model_boundary, world, q1, q2)
            return recall, precision, resampled
        return None, None, resampled

    results = _run_units(num_pairs, seed, unit, workers)
    recalls = [r for r, _p, _n in results if r is not None]
    precisions = [p for _r, p, _n in results if p is not None]
    total_resampled = sum(n for _r, _p, n in results)
    params = {
        "rule": str(rule),
        "num_pairs": num_pairs,
        "m": m,
        "k": k,
        "max_len": max_len,
        "seed": seed,
    }
    n_recall_units = sum(1 for r, _p, _n in results if r is not None)
    precision_report = MetricReport(
        "distinction_precision",
        np.asarray(precisions, dtype=float),
        params=params,
        skipped=num_pairs - n_recall_units,
        resampled=total_resampled,
        not_applicable=n_recall_units - len(precisions),
    )
    recall_report = MetricReport(
        "distinction_recall",
        np.asarray(recalls, dtype=float),
        params=params,
        skipped=num_pairs - n_recall_units,
        resampled=total_resampled,
    )
    return precision_report, recall_report


# -- judgment-mode metrics (accept/reject access only) ------------------------


class ExactJudge:
    """Ground-truth membership judge backed by the world itself."""

    def __init__(self, world):
        self.world = world

    def __call__(self, prefix: Sequence[int], suffix: Sequence[int]) -> bool:
        state = state_of_prefix(self.world, tuple(prefix))
        if state is None:
            return False
        return run_state(self.world, state, tuple(suffix)) is not None


def compression_precision_judge(
    world,
    judge,
    num_states: int = 100,
    probes_per_state: int = 5,
    seed: int = 0,
    workers: int = 1,
) -> MetricReport:
    """Compression for models that only answer accept/reject queries.

    Single-statement probes are drawn half from the tokens valid at the state
    and half uniformly from the alphabet; the state scores 1 only if the judge
    gives the same verdict after both prefixes for every probe.
    """
    vocab = len(world.alphabet)

    def unit(_i: int, rng: np.random.Generator):
        drawn = world.sample_compression_pair(rng)
        if drawn is None:
            return None
        state, s1, s2 = drawn
        valid = world.valid_tokens(state)
        for j in range(probes_per_state):
            if j % 2 == 0 and valid:
                probe = (int(valid[rng.integers(len(valid))]),)
            else:
                probe = (int(rng.integers(vocab)),)
            if judge(s1, probe) != judge(s2, probe):
                return 0.0
        return 1.0

    results = _run_units(num_states, seed, unit, workers)
    scores = [r for r in results if r is not None]
    return MetricReport(
        "compression_precision_judge",
        np.asarray(scores, dtype=float),
        params={"num_states": num_states, "probes_per_state": probes_per_state, "seed": seed},
        skipped=len(results) - len(scores),
    )


def distinction_recall_judge(
    world,
    judge,
    num_pairs: int = 100,
    m: int = 5,
    k: int = 5,
    seed: int = 0,
    workers: int = 1,
    max_resample: int = 200,
) -> MetricReport:
    """Distinction recall from accept/reject queries on true-boundary samples."""

    def unit(_i: int, rng: np.random.Generator):
        resampled = 0
        for _ in range(max_resample):
            drawn = world.sample_distinction_pair(rng)
            if drawn is None:
                continue
            q1, s1, q2, s2 = drawn
            if world.boundary_kind == "sampled":
                true_boundary = compute_boundary_sampled(
                    world, q1, q2, lambda r: world.sample_continuation(q1, r), max(m, 30), rng
                )
            else:
                if not boundary_exists(world, q1, q2, k):
                    resampled += 1
                    continue
                true_boundary = compute_boundary_exact(world, q1, q2, k)
            if len(true_boundary) == 0:
                resampled += 1
                continue
            elements = sorted(true_boundary.suffixes)
            if len(elements) > m:
                idx = rng.choice(len(elements), size=m, replace=False)
                elements = [elements[int(i)] for i in sorted(idx)]
            hits = sum(1 for x in elements if judge(s1, x) and not judge(s2, x))
            return hits / len(elements), resampled
        return None, resampled

    results = _run_units(num_pairs, seed, unit, workers)
    scores = [r for r, _n in results if r is not None]
    return MetricReport(
        "distinction_recall_judge",
        np.asarray(scores, dtype=float),
        params={"num_pairs": num_pairs, "m": m, "k": k, "seed": seed},
        skipped=len(results) - len(scores),
        resampled=sum(n for _r, n in results),
    )


# -- report tables -----------------------------------------------------------

TABLE_COLUMNS = (
    ("next_token", "Next-token test"),
    ("compression_precision", "Compression precision"),
    ("distinction_precision", "Distinction precision"),
    ("distinction_recall", "Distinction recall"),
)


def markdown_table(rows: Sequence[tuple[str, dict[str, MetricReport]]]) -> str:
    """Model-by-metric table in the four-column evaluation layout."""
    header = "| Model | " + " | ".join(label for _k, label in TABLE_COLUMNS) + " |"
    rule = "| --- | " + " | ".join("---" for _ in TABLE_COLUMNS) + " |"
    lines = [header, rule]
    for name, reports in rows:
        cells = []
        for key, _label in TABLE_COLUMNS:
            rep = reports.get(key)
            cells.append(rep.summary() if rep is not None else "---")
        lines.append(f"| {name} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def csv_table(rows: Sequence[tuple[str, dict[str, MetricReport]]]) -> str:
    """Long-form CSV: one line per model/metric with full bookkeeping."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["model", "metric", "mean", "se", "n", "skipped", "resampled", "not_applicable", "params"]
    )
    for name, reports in rows:
        for key in sorted(reports):
            rep = reports[key]
            writer.writerow(
                [
                    name,
                    rep.name,
                    f"{rep.mean:.6f}",
                    f"{rep.se:.6f}",
                    rep.n,
                    rep.skipped,
                    rep.resampled,
                    rep.not_applicable,
                    json.dumps(rep.params, sort_keys=True),
                ]
            )
    return buf.getvalue()
