"""Wire protocol for evaluating models that live in other processes.

Newline-delimited JSON over a subprocess's stdio or a TCP socket, protocol
version "wgv1".  The evaluator opens the session with a ``hello`` carrying the
world alphabet; the client acknowledges with its capabilities (``next_dist``
and/or ``accepts``) and must echo the alphabet token-for-token.  After that
the evaluator issues requests and matches responses by id, so a client may
answer out of order.  Log-probabilities travel on the wire (null meaning zero
probability); the evaluator exponentiates and renormalizes, warning when the
mass is off by more than 1e-6.

Message shapes (one JSON object per "\\n"-terminated UTF-8 line):

    -> {"id": 0, "op": "hello", "version": "wgv1", "alphabet": [...]}
    <- {"id": 0, "op": "hello_ack", "version": "wgv1", "alphabet": [...],
        "capabilities": ["next_dist", "accepts"]}
    -> {"id": 1, "op": "next_dist", "prefix": [3, 7]}
    <- {"id": 1, "logprobs": [-1.2, null, ...]}          # length |alphabet|
    -> {"id": 2, "op": "next_dist_batch", "prefixes": [[...], ...]}  # <= 64
    <- {"id": 2, "logprobs_batch": [[...], ...]}
    -> {"id": 3, "op": "accepts", "prefix": [...], "suffix": [...]}
    <- {"id": 3, "accept": true}
    <- {"id": N, "error": {"type": "protocol"|"domain", "message": "..."}}

A session carries one request pipeline and must not be shared across workers.
"""

from __future__ import annotations

import json
import logging
import math
import queue
import socket
import subprocess
import threading
from typing import Sequence

import numpy as np

from .automata import Alphabet
from .errors import InputError, ProtocolError, TransportError

log = logging.getLogger(__name__)

PROTOCOL_VERSION = "wgv1"
MAX_BATCH = 64
CAP_NEXT_DIST = "next_dist"
CAP_ACCEPTS = "accepts"


def encode_message(msg: dict) -> str:
    return json.dumps(msg, sort_keys=True, separators=(",", ":")) + "\n"


def decode_message(line: str) -> dict:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed JSON on the wire: {exc}") from exc
    if not isinstance(msg, dict):
        raise ProtocolError("wire messages must be JSON objects")
    return msg


# -- transports ---------------------------------------------------------------


class _ReaderThread:
    """Pushes lines from a file-like object into a queue; None marks EOF."""

    def __init__(self, stream):
        self.lines: queue.Queue = queue.Queue()
        self._thread = threading.Thread(target=self._pump, args=(stream,), daemon=True)
        self._thread.start()

    def _pump(self, stream):
        try:
            for line in stream:
                self.lines.put(line)
        except (OSError, ValueError):
            pass
        self.lines.put(None)

    def get(self, timeout: float) -> str:
        try:
            line = self.lines.get(timeout=timeout)
        except queue.Empty:
            raise TransportError(f"no response within {timeout:.1f}s") from None
        if line is None:
            raise TransportError("connection closed by peer")
        return line


class SubprocessTransport:
    """Talk to ``argv`` over its stdin/stdout."""

    def __init__(self, argv: Sequence[str]):
        self.proc = subprocess.Popen(
            list(argv),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._reader = _ReaderThread(self.proc.stdout)

    def send_line(self, line: str) -> None:
        try:
            self.proc.stdin.write(line)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TransportError(f"subprocess pipe closed: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        return self._reader.get(timeout)

    def close(self) -> None:
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()


class TcpTransport:
    def __init__(self, host: str, port: int, connect_timeout: float = 10.0):
        try:
            self.sock = socket.create_connection((host, port), timeout=connect_timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
        self.sock.settimeout(None)
        self._file = self.sock.makefile("rw", encoding="utf-8", newline="\n")
        self._reader = _ReaderThread(self._file)

    def send_line(self, line: str) -> None:
        try:
            self._file.write(line)
            self._file.flush()
        except OSError as exc:
            raise TransportError(f"socket write failed: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        return self._reader.get(timeout)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class LoopbackTransport:
    """In-process transport running a request handler, for tests and demos."""

    def __init__(self, handler: "ModelRequestHandler"):
        self.handler = handler
        self._out: list[str] = []

    def send_line(self, line: str) -> None:
        response = self.handler.handle_line(line)
        if response is not None:
            self._out.append(response)

    def recv_line(self, timeout: float) -> str:
        if not self._out:
            raise TransportError("loopback has no pending response")
        return self._out.pop(0)

    def close(self) -> None:
        pass


# -- server-side request handling (loopback + conformance reference) ---------


class ModelRequestHandler:
    """Reference wgv1 responder wrapping an in-process model and/or judge.

    The secondary client package reimplements this behavior over real
    transports; this in-process twin backs loopback evaluation and defines the
    golden-transcript expectations.
    """

    def __init__(self, alphabet: Alphabet, model=None, judge=None):
        if model is None and judge is None:
            raise InputError("handler needs a model, a judge, or both")
        self.alphabet = alphabet
        self.model = model
        self.judge = judge

    def capabilities(self) -> list[str]:
        caps = []
        if self.model is not None:
            caps.append(CAP_NEXT_DIST)
        if self.judge is not None:
            caps.append(CAP_ACCEPTS)
        return caps

    def handle_line(self, line: str) -> str:
        try:
            msg = decode_message(line)
        except ProtocolError as exc:
            return encode_message({"id": None, "error": {"type": "protocol", "message": str(exc)}})
        return encode_message(self.handle(msg))

    def _logprobs(self, prefix) -> list:
        dist = self.model.next_dist(tuple(int(t) for t in prefix))
        return [math.log(p) if p > 0.0 else None for p in dist]

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
                    "alphabet": list(self.alphabet.tokens),
                    "capabilities": self.capabilities(),
                }
            if op == "next_dist":
                if self.model is None:
                    return _error(rid, "protocol", "session has no next_dist capability")
                return {"id": rid, "logprobs": self._logprobs(msg["prefix"])}
            if op == "next_dist_batch":
                if self.model is None:
                    return _error(rid, "protocol", "session has no next_dist capability")
                prefixes = msg["prefixes"]
                if len(prefixes) > MAX_BATCH:
                    return _error(rid, "protocol", f"batch larger than {MAX_BATCH}")
                return {"id": rid, "logprobs_batch": [self._logprobs(p) for p in prefixes]}
            if op == "accepts":
                if self.judge is None:
                    return _error(rid, "protocol", "session has no accepts capability")
                verdict = self.judge(
                    tuple(int(t) for t in msg["prefix"]), tuple(int(t) for t in msg["suffix"])
                )
                return {"id": rid, "accept": bool(verdict)}
            return _error(rid, "protocol", f"unknown op {op!r}")
        except (KeyError, TypeError, ValueError) as exc:
            return _error(rid, "protocol", f"bad request: {exc}")
        except Exception as exc:  # user callback failure: session must survive
            return _error(rid, "domain", f"{type(exc).__name__}: {exc}")


def _error(rid, kind: str, message: str) -> dict:
    return {"id": rid, "error": {"type": kind, "message": message}}


# -- evaluator-side session ---------------------------------------------------


class BridgeSession:
    """One pipelined wgv1 conversation with an external model."""

    def __init__(self, transport, alphabet: Alphabet, timeout: float = 30.0):
        self.transport = transport
        self.alphabet = alphabet
        self.timeout = timeout
        self.capabilities: tuple[str, ...] = ()
        self._next_id = 0
        self._pending: dict[int, dict] = {}

    def _fresh_id(self) -> int:
        self._next_id += 1
        return self._next_id

    def _request(self, msg: dict) -> dict:
        rid = msg["id"]
        self.transport.send_line(encode_message(msg))
        if rid in self._pending:
            return self._pending.pop(rid)
        while True:
            response = decode_message(self.transport.recv_line(self.timeout))
            got = response.get("id")
            if got == rid:
                return self._check_error(response)
            if got is None:
                self._check_error(response)  # raises for anonymous errors
                raise ProtocolError("response without an id")
            self._pending[int(got)] = response

    @staticmethod
    def _check_error(response: dict) -> dict:
        err = response.get("error")
        if err is not None:
            raise ProtocolError(f"{err.get('type', 'unknown')} error from peer: {err.get('message')}")
        return response

    def handshake(self) -> tuple[str, ...]:
        msg = {
            "id": self._fresh_id(),
            "op": "hello",
            "version": PROTOCOL_VERSION,
            "alphabet": list(self.alphabet.tokens),
        }
        ack = self._request(msg)
        if ack.get("op") != "hello_ack":
            raise ProtocolError(f"expected hello_ack, got {ack.get('op')!r}")
        if ack.get("version") != PROTOCOL_VERSION:
            raise ProtocolError(f"peer speaks {ack.get('version')!r}, not {PROTOCOL_VERSION}")
        if tuple(ack.get("alphabet", ())) != self.alphabet.tokens:
            raise ProtocolError("peer alphabet does not match the world alphabet")
        self.capabilities = tuple(ack.get("capabilities", ()))
        return self.capabilities

    def _to_probs(self, logprobs) -> np.ndarray:
        if len(logprobs) != len(self.alphabet):
            raise ProtocolError("logprobs length does not match the alphabet")
        out = np.zeros(len(logprobs))
        for i, lp in enumerate(logprobs):
            if lp is None:
                continue
            lp = float(lp)
            if math.isnan(lp) or lp == math.inf:
                raise ProtocolError("non-finite log-probability from peer")
            out[i] = math.exp(lp)
        total = out.sum()
        if total <= 0.0:
            return out  # empty-support convention
        if abs(total - 1.0) > 1e-6:
            log.warning("bridge distribution mass %.9f off by more than 1e-6; renormalizing", total)
            return out / total
        return out  # within tolerance: keep the client's numbers bit-for-bit

    def next_dist(self, prefix: Sequence[int]) -> np.ndarray:
        if CAP_NEXT_DIST not in self.capabilities:
            raise ProtocolError("session lacks the next_dist capability")
        response = self._request(
            {"id": self._fresh_id(), "op": "next_dist", "prefix": [int(t) for t in prefix]}
        )
        if "logprobs" not in response:
            raise ProtocolError("next_dist response is missing 'logprobs'")
        return self._to_probs(response["logprobs"])

    def next_dist_batch(self, prefixes: Sequence[Sequence[int]]) -> list[np.ndarray]:
        if CAP_NEXT_DIST not in self.capabilities:
            raise ProtocolError("session lacks the next_dist capability")
        if len(prefixes) > MAX_BATCH:
            raise InputError(f"batch larger than {MAX_BATCH}")
        response = self._request(
            {
                "id": self._fresh_id(),
                "op": "next_dist_batch",
                "prefixes": [[int(t) for t in p] for p in prefixes],
            }
        )
        batch = response.get("logprobs_batch")
        if batch is None or len(batch) != len(prefixes):
            raise ProtocolError("next_dist_batch response shape mismatch")
        return [self._to_probs(row) for row in batch]

    def accepts(self, prefix: Sequence[int], suffix: Sequence[int]) -> bool:
        if CAP_ACCEPTS not in self.capabilities:
            raise ProtocolError("session lacks the accepts capability")
        response = self._request(
            {
                "id": self._fresh_id(),
                "op": "accepts",
                "prefix": [int(t) for t in prefix],
                "suffix": [int(t) for t in suffix],
            }
        )
        if "accept" not in response:
            raise ProtocolError("accepts response is missing 'accept'")
        return bool(response["accept"])

    def close(self) -> None:
        self.transport.close()


class BridgeModel:
    """ModelHandle adapter: the world-facing face of a remote session."""

    def __init__(self, session: BridgeSession):
        self.session = session
        self.alphabet = session.alphabet

    def next_dist(self, prefix: Sequence[int]) -> np.ndarray:
        return self.session.next_dist(prefix)


class BridgeJudge:
    """Accept/reject adapter for judgment-capability sessions."""

    def __init__(self, session: BridgeSession):
        self.session = session
        self.alphabet = session.alphabet

    def __call__(self, prefix: Sequence[int], suffix: Sequence[int]) -> bool:
        return self.session.accepts(prefix, suffix)


def open_session(
    alphabet: Alphabet,
    bridge_cmd: Sequence[str] | None = None,
    bridge_tcp: str | None = None,
    timeout: float = 30.0,
) -> BridgeSession:
    """Open and handshake a session over a subprocess or TCP endpoint."""
    if (bridge_cmd is None) == (bridge_tcp is None):
        raise InputError("specify exactly one of bridge_cmd / bridge_tcp")
    if bridge_cmd is not None:
        transport = SubprocessTransport(bridge_cmd)
    else:
        host, _, port = bridge_tcp.rpartition(":")
        if not host or not port.isdigit():
            raise InputError("bridge_tcp must look like host:port")
        transport = TcpTransport(host, int(port))
    session = BridgeSession(transport, alphabet, timeout)
    session.handshake()
    return session
