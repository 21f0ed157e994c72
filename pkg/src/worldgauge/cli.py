"""Command-line entry point for reproducible evaluation runs.

Subcommands: world-gen, data-gen, train-ngram, eval, reconstruct, detour,
report.  Every option can come from a TOML config file (``--config``), with
command-line flags taking precedence, and the effective configuration is
echoed into each command's manifest so a run can be reproduced exactly.  Any
command that samples requires a seed: ``--seed``, the config file, or the
``WORLDGAUGE_SEED`` environment variable.

Exit codes: 0 success, 1 domain error, 2 usage error, 3 bridge/transport
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import genmodel
from .automata import Alphabet
from .bridge import BridgeJudge, BridgeModel, open_session
from .corpus import load_corpus, save_corpus
from .detour import DetourConfig, run_detours, run_detours_game
from .errors import BridgeError, InputError, WorldGaugeError
from .genmodel import AcceptanceRule
from .metrics import (
    compression_precision,
    csv_table,
    distinction_metrics,
    markdown_table,
    next_token_test,
    sample_next_token_contexts,
)
from .reconstruct import ReconParams, classify_edges, export_map, reconstruct
from .worlds import (
    StreetGraph,
    connect4_world,
    gen_grid_city,
    gen_traversals,
    nav_world,
    othello_world,
    seating_world,
    split_by_endpoints,
)

SEED_ENV_VAR = "WORLDGAUGE_SEED"


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _resolve_seed(args, config: dict) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if "seed" in config:
        return int(config["seed"])
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return int(env)
    raise UsageError("a seed is required: pass --seed, set it in the config, "
                     f"or export {SEED_ENV_VAR}")


class UsageError(Exception):
    pass


def _write_manifest(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


# -- world / model construction from specs ------------------------------------


def _build_world(spec: str, graph_path: str | None, cfg: dict):
    kind, _, arg = spec.partition(":")
    if kind == "grid":
        if graph_path is None:
            raise UsageError("grid world needs --graph")
        return nav_world(StreetGraph.load(graph_path))
    if kind == "connect4":
        return connect4_world(int(arg or cfg.get("n_rows", 4)))
    if kind == "seating":
        return seating_world(int(arg or cfg.get("n", 3)))
    if kind == "othello":
        pool = int(arg or cfg.get("pool_games", 1000))
        return othello_world(pool_games=pool, pool_seed=int(cfg.get("pool_seed", 0)))
    raise UsageError(f"unknown world spec {spec!r}")


def _build_model(spec: str, world, args) -> object:
    kind, _, arg = spec.partition(":")
    if kind == "exact":
        return genmodel.make_exact_dfa_model(world)
    if kind == "router":
        if not hasattr(world, "route_model"):
            raise UsageError("the router model only exists for navigation worlds")
        return world.route_model()
    if kind == "uniform":
        return genmodel.make_uniform_model(world.alphabet)
    if kind == "ngram":
        if not arg:
            raise UsageError("ngram model spec needs a path: ngram:model.json")
        model = genmodel.load_ngram(arg)
        if model.alphabet != world.alphabet:
            raise InputError("n-gram model alphabet does not match the world")
        return model
    if kind == "corrupted":
        prob = float(arg) if arg else 0.2
        return genmodel.make_corrupted_dfa_model(world, prob)
    if kind == "random-logit":
        return genmodel.RandomLogitModel(world.alphabet, seed=int(arg) if arg else 0)
    raise UsageError(f"unknown model spec {spec!r}")


def _open_bridge(args, alphabet: Alphabet):
    return open_session(
        alphabet,
        bridge_cmd=args.bridge_cmd.split() if args.bridge_cmd else None,
        bridge_tcp=args.bridge_tcp,
        timeout=args.bridge_timeout,
    )


def _parse_rule(text: str) -> AcceptanceRule:
    kind, _, param = text.partition(":")
    if not param:
        raise UsageError("acceptance rule must look like epsilon:0.01, top_k:2, top_p:0.9")
    return AcceptanceRule(kind, float(param))


# -- subcommands ---------------------------------------------------------------


def cmd_world_gen(args, config: dict) -> int:
    seed = _resolve_seed(args, config)
    cfg = config.get("world", {})
    rows = args.rows or int(cfg.get("rows", 20))
    cols = args.cols or int(cfg.get("cols", 20))
    one_way = args.one_way if args.one_way is not None else float(cfg.get("one_way_fraction", 0.2))
    diagonals = args.diagonals if args.diagonals is not None else float(cfg.get("diagonal_fraction", 0.0))
    graph = gen_grid_city(rows, cols, one_way, diagonals, seed=seed)
    graph.save(args.out)
    _write_manifest(
        args.out + ".manifest.json",
        {
            "command": "world-gen",
            "config": {
                "rows": rows,
                "cols": cols,
                "one_way_fraction": one_way,
                "diagonal_fraction": diagonals,
                "seed": seed,
            },
            "nodes": graph.num_nodes,
            "edges": len(graph.edges),
        },
    )
    print(f"wrote {args.out}: {graph.num_nodes} nodes, {len(graph.edges)} edges")
    return 0


def cmd_data_gen(args, config: dict) -> int:
    seed = _resolve_seed(args, config)
    cfg = config.get("data", {})
    mode = args.mode or cfg.get("mode", "shortest")
    count = args.count or int(cfg.get("count", 10000))
    test_fraction = args.test_fraction if args.test_fraction is not None else float(
        cfg.get("test_fraction", 0.1)
    )
    world = nav_world(StreetGraph.load(args.graph))
    sequences = gen_traversals(world, mode, count, seed=seed)
    train, test = split_by_endpoints(sequences, test_fraction, seed=seed)
    os.makedirs(args.out_dir, exist_ok=True)
    train_path = os.path.join(args.out_dir, "train.txt")
    test_path = os.path.join(args.out_dir, "test.txt")
    save_corpus(train_path, world.alphabet, train)
    save_corpus(test_path, world.alphabet, test)
    _write_manifest(
        os.path.join(args.out_dir, "manifest.json"),
        {
            "command": "data-gen",
            "config": {
                "graph": args.graph,
                "mode": mode,
                "count": count,
                "test_fraction": test_fraction,
                "seed": seed,
            },
            "generated": len(sequences),
            "train_sequences": len(train),
            "test_sequences": len(test),
        },
    )
    print(f"wrote {train_path} ({len(train)}) and {test_path} ({len(test)})")
    return 0


def cmd_train_ngram(args, config: dict) -> int:
    cfg = config.get("ngram", {})
    order = args.order or int(cfg.get("order", 2))
    smoothing = args.smoothing if args.smoothing is not None else float(cfg.get("smoothing", 0.1))
    world = nav_world(StreetGraph.load(args.graph))
    corpus = load_corpus(args.corpus, world.alphabet)
    model = genmodel.train_ngram(corpus, world.alphabet, order, smoothing)
    genmodel.save_ngram(model, args.out)
    _write_manifest(
        args.out + ".manifest.json",
        {
            "command": "train-ngram",
            "config": {
                "graph": args.graph,
                "corpus": args.corpus,
                "order": order,
                "smoothing": smoothing,
            },
            "sequences": len(corpus),
        },
    )
    print(f"wrote {args.out} (order {order}, {len(corpus)} sequences)")
    return 0


def _eval_one(world, model, rule, args, seed) -> dict:
    reports = {}
    contexts = list(sample_next_token_contexts(world, args.next_token, seed))
    reports["next_token"] = next_token_test(
        world, model, (c[0] for c in contexts), (c[1] for c in contexts)
    )
    reports["compression_precision"] = compression_precision(
        world,
        model,
        rule,
        num_states=args.states,
        m=args.m,
        max_len=args.max_len,
        seed=seed,
        workers=args.workers,
    )
    prec, rec = distinction_metrics(
        world,
        model,
        rule,
        num_pairs=args.pairs,
        m=args.m,
        k=args.k,
        max_len=args.max_len,
        seed=seed,
        workers=args.workers,
    )
    reports["distinction_precision"] = prec
    reports["distinction_recall"] = rec
    return reports


def cmd_eval(args, config: dict) -> int:
    seed = _resolve_seed(args, config)
    cfg = config.get("eval", {})
    for name in ("states", "pairs", "m", "k", "max_len", "next_token"):
        if getattr(args, name) is None:
            setattr(args, name, int(cfg.get(name, _EVAL_DEFAULTS[name])))
    world = _build_world(args.world, args.graph, config.get("world", {}))
    session = None
    if args.bridge_cmd or args.bridge_tcp:
        session = _open_bridge(args, world.alphabet)
        model = BridgeModel(session)
        model_name = "bridge"
    else:
        model = _build_model(args.model, world, args)
        model_name = args.model
    rule = _parse_rule(args.rule or cfg.get("rule", "epsilon:0.01"))

    rows = []
    try:
        if args.sweep:
            param_name, _, values = args.sweep.partition("=")
            if not values:
                raise UsageError("--sweep must look like epsilon=1e-6,1e-4,1e-2,0.1")
            for value in values.split(","):
                sweep_rule = AcceptanceRule(param_name, float(value))
                reports = _eval_one(world, model, sweep_rule, args, seed)
                rows.append((f"{model_name} [{sweep_rule}]", reports))
        else:
            rows.append((model_name, _eval_one(world, model, rule, args, seed)))
    finally:
        if session is not None:
            session.close()

    os.makedirs(args.out_dir, exist_ok=True)
    csv_path = os.path.join(args.out_dir, "metrics.csv")
    md_path = os.path.join(args.out_dir, "metrics.md")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(csv_table(rows))
    with open(md_path, "w", encoding="utf-8") as fh:
        fh.write(markdown_table(rows))
    _write_manifest(
        os.path.join(args.out_dir, "manifest.json"),
        {
            "command": "eval",
            "config": {
                "world": args.world,
                "graph": args.graph,
                "model": model_name,
                "rule": str(rule),
                "sweep": args.sweep,
                "states": args.states,
                "pairs": args.pairs,
                "m": args.m,
                "k": args.k,
                "max_len": args.max_len,
                "next_token": args.next_token,
                "seed": seed,
                "workers": args.workers,
            },
            "reports": {
                name: {metric: rep.to_dict() for metric, rep in reports.items()}
                for name, reports in rows
            },
        },
    )
    print(markdown_table(rows), end="")
    print(f"wrote {csv_path}, {md_path}")
    return 0


_EVAL_DEFAULTS = {"states": 100, "pairs": 100, "m": 30, "k": 5, "max_len": 100, "next_token": 200}


def cmd_reconstruct(args, config: dict) -> int:
    world = nav_world(StreetGraph.load(args.graph))
    sequences = load_corpus(args.corpus, world.alphabet)
    params = ReconParams(args.max_degree, args.max_dist_miles)
    result = reconstruct(sequences, world, params)
    true_edges, false_edges = classify_edges(result, world.graph)
    export_map(result, world.graph, args.format, args.out)
    _write_manifest(
        args.out + ".manifest.json",
        {
            "command": "reconstruct",
            "config": {
                "graph": args.graph,
                "corpus": args.corpus,
                "max_degree": args.max_degree,
                "max_dist_miles": args.max_dist_miles,
                "format": args.format,
            },
            "sequences": result.num_sequences,
            "failed_sequences": result.failed,
            "failure_reasons": dict(sorted(result.failure_reasons.items())),
            "true_edges": true_edges,
            "false_edges": false_edges,
        },
    )
    print(
        f"reconstructed {len(result.edges)} edges ({true_edges} true, {false_edges} false); "
        f"failed on {result.failed}/{result.num_sequences} sequences"
    )
    return 0


def cmd_detour(args, config: dict) -> int:
    seed = _resolve_seed(args, config)
    cfg = config.get("detour", {})
    trials = args.trials or int(cfg.get("trials", 100))
    mode = args.mode or cfg.get("mode", "random")
    probs = [float(p) for p in (args.detour_prob or cfg.get("probability", "0.0")).split(",")]
    world = _build_world(args.world, args.graph, config.get("world", {}))
    session = None
    if args.bridge_cmd or args.bridge_tcp:
        session = _open_bridge(args, world.alphabet)
        model = BridgeModel(session)
        model_name = "bridge"
    else:
        spec = args.model
        # on navigation worlds the true-world-model reference must route
        if spec == "exact" and hasattr(world, "route_model"):
            spec = "router"
        model = _build_model(spec, world, args)
        model_name = spec
    test_pairs = None
    if args.pairs_file:
        corpus = load_corpus(args.pairs_file, world.alphabet)
        test_pairs = sorted(
            {
                (world._node_of_token[s[0]], world._node_of_token[s[1]])
                for s in corpus
                if len(s) >= 2
            }
        )
    results = []
    try:
        for p in probs:
            config_obj = DetourConfig(p, mode, max_len=args.max_len or 100, trials=trials)
            if hasattr(world, "route_model"):
                rep = run_detours(world, model, config_obj, seed=seed, test_pairs=test_pairs,
                                  workers=args.workers)
            else:
                rep = run_detours_game(world, model, config_obj, seed=seed, workers=args.workers)
            results.append((p, rep))
    finally:
        if session is not None:
            session.close()
    header = " | ".join(f"{p:.2%}" for p, _ in results)
    values = " | ".join(rep.summary() for _, rep in results)
    print(f"| Model | {header} |")
    print(f"| {model_name} ({mode}) | {values} |")
    _write_manifest(
        args.out,
        {
            "command": "detour",
            "config": {
                "world": args.world,
                "graph": args.graph,
                "model": model_name,
                "mode": mode,
                "probabilities": probs,
                "trials": trials,
                "seed": seed,
                "pairs_file": args.pairs_file,
            },
            "results": {str(p): rep.to_dict() for p, rep in results},
        },
    )
    return 0


def cmd_report(args, config: dict) -> int:
    rows = []
    for path in args.inputs:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
        for name, reports in manifest.get("reports", {}).items():
            row = {}
            for metric, rep in reports.items():
                row[metric] = _ReportView(rep)
            rows.append((name, row))
    text = markdown_table(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    print(text, end="")
    return 0


class _ReportView:
    """Minimal stand-in so stored report dicts can be re-rendered."""

    def __init__(self, doc: dict):
        self.mean = doc["mean"]
        self.se = doc["se"]

    def summary(self) -> str:
        return f"{self.mean:.2f} ({self.se:.2f})"


# -- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="worldgauge",
        description="Evaluate how faithfully generative sequence models recover DFA worlds.",
    )
    parser.add_argument("--config", help="TOML config file; flags override its values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("world-gen", help="generate a synthetic street grid")
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--one-way", type=float, dest="one_way")
    p.add_argument("--diagonals", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_world_gen)

    p = sub.add_parser("data-gen", help="generate traversal corpora with a train/test split")
    p.add_argument("--graph", required=True)
    p.add_argument("--mode", choices=["shortest", "noisy_shortest", "random_walk"])
    p.add_argument("--count", type=int)
    p.add_argument("--test-fraction", type=float, dest="test_fraction")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.set_defaults(func=cmd_data_gen)

    p = sub.add_parser("train-ngram", help="train a count-based n-gram model on a corpus")
    p.add_argument("--graph", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--order", type=int)
    p.add_argument("--smoothing", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_ngram)

    p = sub.add_parser("eval", help="run next-token, compression, and distinction metrics")
    p.add_argument("--world", default="grid")
    p.add_argument("--graph")
    p.add_argument("--model", default="exact")
    p.add_argument("--rule")
    p.add_argument("--sweep", help="e.g. epsilon=1e-6,1e-4,1e-2,0.1")
    p.add_argument("--states", type=int)
    p.add_argument("--pairs", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--max-len", type=int, dest="max_len")
    p.add_argument("--next-token", type=int, dest="next_token")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--bridge-cmd", dest="bridge_cmd")
    p.add_argument("--bridge-tcp", dest="bridge_tcp")
    p.add_argument("--bridge-timeout", type=float, default=30.0, dest="bridge_timeout")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reconstruct", help="rebuild the street map implied by a corpus")
    p.add_argument("--graph", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--max-degree", type=int, default=4, dest="max_degree")
    p.add_argument("--max-dist-miles", type=float, default=0.5, dest="max_dist_miles")
    p.add_argument("--format", choices=["json", "dot", "geojson"], default="json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("detour", help="greedy decoding under forced detours")
    p.add_argument("--world", default="grid")
    p.add_argument("--graph")
    p.add_argument("--model", default="exact")
    p.add_argument("--detour-prob", dest="detour_prob", help="comma-separated probabilities")
    p.add_argument("--mode", choices=["random", "adversarial"])
    p.add_argument("--trials", type=int)
    p.add_argument("--max-len", type=int, dest="max_len")
    p.add_argument("--pairs-file", dest="pairs_file")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--bridge-cmd", dest="bridge_cmd")
    p.add_argument("--bridge-tcp", dest="bridge_tcp")
    p.add_argument("--bridge-timeout", type=float, default=30.0, dest="bridge_timeout")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detour)

    p = sub.add_parser("report", help="merge eval manifests into one table")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except BridgeError as exc:
        print(f"bridge error: {exc}", file=sys.stderr)
        return 3
    except WorldGaugeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
