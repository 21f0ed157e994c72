"""Run a bridge client from the command line.

The built-in adapters exist for conformance testing and as wiring examples;
real deployments construct a ``ClientAdapter`` around their own callbacks and
call ``serve_stdio`` / ``serve_tcp`` directly.

    python -m worldgauge_client --uniform-vocab 7            # stdio
    python -m worldgauge_client --uniform-vocab 7 --with-parity-judge
    python -m worldgauge_client --uniform-vocab 7 --tcp 127.0.0.1:4242
"""

from __future__ import annotations

import argparse
import math
import sys

from . import ClientAdapter, serve_stdio, serve_tcp


def build_adapter(args) -> ClientAdapter:
    if args.uniform_vocab is None:
        raise SystemExit("this entry point only ships demo adapters; pass --uniform-vocab N")
    n = args.uniform_vocab
    alphabet = [str(i) for i in range(1, n + 1)]
    logp = math.log(1.0 / n)

    def dist_fn(prefix):
        return [logp] * n

    judge_fn = None
    if args.with_parity_judge:
        def judge_fn(prefix, suffix):
            return (sum(prefix) + sum(suffix)) % 2 == 0

    return ClientAdapter(alphabet, dist_fn=dist_fn, judge_fn=judge_fn)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="worldgauge_client")
    parser.add_argument("--tcp", help="listen on HOST:PORT instead of stdio")
    parser.add_argument("--uniform-vocab", type=int, dest="uniform_vocab",
                        help="serve a uniform distribution over N tokens named 1..N")
    parser.add_argument("--with-parity-judge", action="store_true", dest="with_parity_judge",
                        help="also serve the conformance parity judge")
    args = parser.parse_args(argv)
    adapter = build_adapter(args)
    if args.tcp:
        host, _, port = args.tcp.rpartition(":")
        if not host or not port.isdigit():
            raise SystemExit("--tcp must look like host:port")
        serve_tcp(adapter, host, int(port))
    else:
        serve_stdio(adapter)
    return 0


if __name__ == "__main__":
    sys.exit(main())
