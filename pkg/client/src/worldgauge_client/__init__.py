"""Reference client for the wgv1 evaluation bridge.

Wraps any user-supplied next-token log-probability function and/or
accept/reject judge and serves it to a worldgauge evaluator over stdio or
TCP, speaking newline-delimited JSON as documented in the evaluator repo's
``protocol/PROTOCOL.md``.  Standard library only: the model framework behind
the callbacks is entirely the user's business.

Typical use::

    from worldgauge_client import ClientAdapter, serve_stdio

    def logprobs(prefix: list[int]) -> list[float | None]:
        ...  # length-|alphabet| vector, None for zero probability

    serve_stdio(ClientAdapter(alphabet=my_tokens, dist_fn=logprobs))

A judge-only client (for models that can answer yes/no but not expose token
probabilities, e.g. a prompted chat model) passes ``judge_fn`` instead; see
``wrap_judge`` for the prompt-and-parse scaffolding.
"""

from __future__ import annotations

import json
import socket
import sys
from typing import Callable, Sequence

PROTOCOL_VERSION = "wgv1"
MAX_BATCH = 64
CAP_NEXT_DIST = "next_dist"
CAP_ACCEPTS = "accepts"

DistFn = Callable[[list[int]], Sequence["float | None"]]
JudgeFn = Callable[[list[int], list[int]], bool]


class JudgeParseError(Exception):
    """The judge's response could not be turned into a verdict."""


class ClientAdapter:
    """Binds user callbacks to an alphabet and answers wgv1 requests."""

    def __init__(self, alphabet: Sequence[str], dist_fn: DistFn | None = None,
                 judge_fn: JudgeFn | None = None):
        if dist_fn is None and judge_fn is None:
            raise ValueError("adapter needs dist_fn, judge_fn, or both")
        self.alphabet = list(alphabet)
        self.dist_fn = dist_fn
        self.judge_fn = judge_fn

    def capabilities(self) -> list[str]:
        caps = []
        if self.dist_fn is not None:
            caps.append(CAP_NEXT_DIST)
        if self.judge_fn is not None:
            caps.append(CAP_ACCEPTS)
        return caps

    def _logprobs(self, prefix) -> list:
        row = list(self.dist_fn([int(t) for t in prefix]))
        if len(row) != len(self.alphabet):
            raise ValueError(
                f"dist_fn returned {len(row)} entries for a {len(self.alphabet)}-token alphabet"
            )
        out = []
        for lp in row:
            if lp is None:
                out.append(None)
                continue
            lp = float(lp)
            if lp != lp or lp == float("inf"):
                raise ValueError("dist_fn produced a non-finite log-probability")
            out.append(lp)
        return out

    def handle(self, msg: dict) -> dict:
        rid = msg.get("id")
        op = msg.get("op")
        try:
            if op == "hello":
                if msg.get("version") != PROTOCOL_VERSION:
                    return _error(rid, "protocol", f"unsupported version {msg.get('version')!r}")
                return {
                    "id": rid,
                    "op": "hello_ack",
                    "version": PROTOCOL_VERSION,
                    "alphabet": self.alphabet,
                    "capabilities": self.capabilities(),
                }
            if op == "next_dist":
                if self.dist_fn is None:
                    return _error(rid, "protocol", "session has no next_dist capability")
                return {"id": rid, "logprobs": self._logprobs(msg["prefix"])}
            if op == "next_dist_batch":
                if self.dist_fn is None:
                    return _error(rid, "protocol", "session has no next_dist capability")
                prefixes = msg["prefixes"]
                if len(prefixes) > MAX_BATCH:
                    return _error(rid, "protocol", f"batch larger than {MAX_BATCH}")
                return {"id": rid, "logprobs_batch": [self._logprobs(p) for p in prefixes]}
            if op == "accepts":
                if self.judge_fn is None:
                    return _error(rid, "protocol", "session has no accepts capability")
                verdict = self.judge_fn(
                    [int(t) for t in msg["prefix"]], [int(t) for t in msg["suffix"]]
                )
                return {"id": rid, "accept": bool(verdict)}
            return _error(rid, "protocol", f"unknown op {op!r}")
        except JudgeParseError as exc:
            return _error(rid, "protocol", f"judge reply unparseable: {exc}")
        except (KeyError, TypeError, ValueError) as exc:
            return _error(rid, "protocol", f"bad request: {exc}")
        except Exception as exc:  # user callback blew up: answer, don't die
            return _error(rid, "domain", f"{type(exc).__name__}: {exc}")

    def handle_line(self, line: str) -> str:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            return _encode(_error(None, "protocol", f"malformed JSON on the wire: {exc}"))
        if not isinstance(msg, dict):
            return _encode(_error(None, "protocol", "wire messages must be JSON objects"))
        return _encode(self.handle(msg))


def _error(rid, kind: str, message: str) -> dict:
    return {"id": rid, "error": {"type": kind, "message": message}}


def _encode(msg: dict) -> str:
    return json.dumps(msg, sort_keys=True, separators=(",", ":")) + "\n"


def serve_lines(adapter: ClientAdapter, lines, write) -> None:
    """Answer requests from an iterable of lines until it is exhausted."""
    for line in lines:
        if not line.strip():
            continue
        write(adapter.handle_line(line))


def serve_stdio(adapter: ClientAdapter) -> None:
    def write(text: str) -> None:
        sys.stdout.write(text)
        sys.stdout.flush()

    serve_lines(adapter, sys.stdin, write)


def serve_tcp(adapter: ClientAdapter, host: str, port: int) -> None:
    """Serve one evaluator connection at a time until interrupted."""
    with socket.create_server((host, port)) as server:
        while True:
            conn, _addr = server.accept()
            with conn, conn.makefile("rw", encoding="utf-8", newline="\n") as fh:
                serve_lines(adapter, fh, lambda text: (fh.write(text), fh.flush()))


# -- prompt-based judging -----------------------------------------------------

DEFAULT_JUDGE_TEMPLATE = """You are tracking a puzzle where statements accumulate one at a time.
Statements so far, in order:
{statements}

Proposed continuation:
{continuation}

Is the proposed continuation valid given the statements so far? Think step by
step, then give your verdict on a final line formatted exactly as
"Answer: Yes" or "Answer: No".
"""


def wrap_judge(
    llm_call: Callable[[str], str],
    template: str = DEFAULT_JUDGE_TEMPLATE,
    token_names: Sequence[str] | None = None,
) -> JudgeFn:
    """Turn a text-in/text-out model into an accept/reject judge.

    The prompt lists the prefix statements in order and the proposed
    continuation, and instructs the model to end with an ``Answer:`` line.
    The last ``Answer:`` in the reply wins (chain-of-thought may mention the
    word earlier).  ``token_names`` maps token ids to statement text; without
    it the ids themselves are shown.
    """

    def render(tokens: list[int]) -> str:
        if token_names is not None:
            return "\n".join(f"- {token_names[t]}" for t in tokens) or "- (none yet)"
        return "\n".join(f"- token {t}" for t in tokens) or "- (none yet)"

    def judge(prefix: list[int], suffix: list[int]) -> bool:
        prompt = template.format(statements=render(prefix), continuation=render(suffix))
        reply = llm_call(prompt)
        verdict = None
        for line in reply.splitlines():
            stripped = line.strip()
            if stripped.lower().startswith("answer:"):
                verdict = stripped[len("answer:"):].strip().lower()
        if verdict is None:
            raise JudgeParseError("reply has no 'Answer:' line")
        if verdict.startswith("yes"):
            return True
        if verdict.startswith("no"):
            return False
        raise JudgeParseError(f"unrecognized verdict {verdict!r}")

    return judge
