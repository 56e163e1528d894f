"""Command-line entry point: ``bestk {decode,bench,sweep,mock-server,rerank}``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from typing import List, Optional

from ..engine import DecodeError
from ..models import MockServer, ModelError, TrieSpecError
from ..types import UsageError
from .config import STRATEGIES, ExperimentConfig, ModelSpec, StrategySpec, config_from_dict, load_config_file, merge
from .corpus import CorpusError, Example
from .experiment import ModelProvider, generated_id, run_experiment, run_strategy
from .rerank import RerankError, rerank_hook

log = logging.getLogger("bestk")


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--trie", metavar="PATH", help="trie spec (YAML or JSON)")
    g.add_argument("--ngram", metavar="PATH", help="training text, one sentence per line")
    g.add_argument("--remote", metavar="URL", help="JSON-over-HTTP model endpoint")
    g.add_argument("--deep-goal", metavar="SEED", type=int, help="generated deep-goal tree population")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--add-k", type=float, default=0.01)
    p.add_argument("--floor", type=float, default=0.0, help="drop n-gram probabilities below this")
    p.add_argument("--count", type=int, default=200, help="deep-goal population size")
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--max-batch-size", type=int, default=64)


def _add_strategy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", choices=STRATEGIES, default="bestk")
    p.add_argument("-k", type=int, default=5, help="group size (bestk) or branching cap (bfs)")
    p.add_argument("--score", default="mean", help="original | mean | last | length:<alpha>")
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--child-cap", type=int, default=None)
    p.add_argument("--frontier-capacity", type=int, default=500)
    p.add_argument("--groups", type=int, default=1)
    p.add_argument("--diversity-penalty", type=float, default=0.0)
    p.add_argument("--sampling", choices=["nucleus", "typical"], default=None)
    p.add_argument("--sampling-value", type=float, default=0.9)
    p.add_argument("-b", "--beam-size", type=int, default=10, help="equivalent beam size")
    p.add_argument("--max-len", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", help="JSONL examples {id, input, references}")
    p.add_argument("-o", "--output-dir", default="runs/out")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config", help="YAML/JSON config; its values override flags")


def _model_doc(a) -> dict:
    if a.trie:
        return {"kind": "trie", "path": a.trie}
    if a.ngram:
        return {"kind": "ngram", "path": a.ngram, "order": a.order, "add_k": a.add_k, "floor": a.floor}
    if a.remote:
        return {"kind": "remote", "endpoint": a.remote, "timeout": a.timeout, "max_batch_size": a.max_batch_size}
    if a.deep_goal is not None:
        return {"kind": "deep-goal", "seed": a.deep_goal, "count": a.count}
    return {}


def _strategy_doc(a) -> dict:
    return {
        "name": a.strategy, "k": a.k, "score": a.score, "kappa": a.kappa, "beta": a.beta,
        "gamma": a.gamma, "child_cap": a.child_cap, "frontier_capacity": a.frontier_capacity,
        "groups": a.groups, "diversity_penalty": a.diversity_penalty,
        "sampling": a.sampling, "sampling_value": a.sampling_value,
    }


def _config_doc(a, sweep: Optional[dict] = None) -> dict:
    doc = {
        "model": _model_doc(a),
        "strategies": [_strategy_doc(a)],
        "beam_size": a.beam_size,
        "max_len": a.max_len,
        "seed": a.seed,
    }
    for key in ("corpus", "output_dir", "workers"):
        if getattr(a, key, None) is not None:
            doc[key] = getattr(a, key)
    if sweep:
        doc["sweep"] = sweep
    if getattr(a, "config", None):
        file_doc = load_config_file(a.config)
        if "strategies" in file_doc:
            doc.pop("strategies")
        doc = merge(doc, file_doc)
    if not doc["model"]:
        raise UsageError("choose a model: --trie, --ngram, --remote or --deep-goal")
    return doc


def build_config(a, sweep: Optional[dict] = None) -> ExperimentConfig:
    return config_from_dict(_config_doc(a, sweep))


def cmd_decode(a) -> int:
    doc = _config_doc(a)
    spec = ModelSpec(**doc["model"])
    strat = StrategySpec(**doc.get("strategies", [{}])[0])
    provider = ModelProvider(spec)
    example = Example(generated_id(a.index) if spec.kind == "deep-goal" else "input", a.input)
    model = provider.for_example(example)
    res = run_strategy(model, strat, strat.beam_size or doc["beam_size"], doc["max_len"], doc["seed"])
    for rank, h in enumerate(res.hypotheses()):
        flag = "complete" if h.complete else "truncated"
        text = " ".join(model.vocab.decode(h.tokens))
        print(f"{rank}\t{h.model_score:.4f}\t{h.cum_logprob:.4f}\t{flag}\t{text}")
    print(f"# explored={res.explored_count} batch_calls={res.model_batch_calls} "
          f"rounds={res.rounds} unique={res.unique_count} time={res.wall_time:.4f}s", file=sys.stderr)
    return 0


def _run(cfg: ExperimentConfig) -> int:
    summaries = run_experiment(cfg)
    errors = 0
    for s in summaries:
        errors += s.row["errors"]
        print(f"{s.label}\tcompletion={s.row['completion_rate']:.1f}%\tS={s.row['S']:.2f}"
              f"\t|S|={s.row['unique_S']:.2f}\texamples={s.row['examples']}\terrors={s.row['errors']}")
    print(f"# wrote {cfg.output_dir}/aggregate.csv", file=sys.stderr)
    return 1 if errors else 0


def cmd_bench(a) -> int:
    return _run(build_config(a))


def cmd_sweep(a) -> int:
    sweep = {}
    if a.kappas:
        sweep["kappa"] = _floats(a.kappas)
    if a.ks:
        sweep["k"] = _floats(a.ks)
    if a.alphas:
        sweep["alpha"] = _floats(a.alphas)
    if a.beam_sizes:
        sweep["beam_size"] = _floats(a.beam_sizes)
    return _run(build_config(a, sweep))


def cmd_mock_server(a) -> int:
    cfg_doc = {"kind": "trie", "path": a.trie} if a.trie else {
        "kind": "ngram", "path": a.ngram, "order": a.order, "add_k": a.add_k, "floor": a.floor}
    model = ModelProvider(ModelSpec(**cfg_doc)).for_example(Example("serve"))
    with MockServer(model, host=a.host, port=a.port) as server:
        print(server.url, flush=True)
        try:
            while True:
                time.sleep(3600)
        except KeyboardInterrupt:
            pass
    return 0


def cmd_rerank(a) -> int:
    n = rerank_hook(a.hypotheses, a.scores, a.output)
    print(f"# reranked {n} hypotheses into {a.output}", file=sys.stderr)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bestk", description="Best-k search decoding and benchmarks")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="decode one input and print hypotheses")
    _add_model_flags(p)
    _add_strategy_flags(p)
    p.add_argument("--input", default="", help="conditioning text (n-gram backend)")
    p.add_argument("--index", type=int, default=0, help="which generated deep-goal tree")
    p.add_argument("--config")
    p.set_defaults(func=cmd_decode, corpus=None)

    p = sub.add_parser("bench", help="run one configuration over a corpus")
    _add_model_flags(p)
    _add_strategy_flags(p)
    _add_run_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="run a grid of kappa / k / alpha / beam-size values")
    _add_model_flags(p)
    _add_strategy_flags(p)
    _add_run_flags(p)
    p.add_argument("--kappas", help="comma-separated, e.g. 0,0.01,0.05,0.1,0.2")
    p.add_argument("--ks", help="comma-separated group sizes")
    p.add_argument("--alphas", help="comma-separated length-penalty exponents")
    p.add_argument("--beam-sizes", help="comma-separated equivalent beam sizes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("mock-server", help="serve a local model over the remote protocol")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--trie", metavar="PATH")
    g.add_argument("--ngram", metavar="PATH")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--add-k", type=float, default=0.01)
    p.add_argument("--floor", type=float, default=0.0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_mock_server)

    p = sub.add_parser("rerank", help="reorder hypotheses JSONL by external scores")
    p.add_argument("hypotheses")
    p.add_argument("scores", help="JSON {id: score} or TSV id<TAB>score; id is <example_id>-<rank>")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_rerank)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, CorpusError, TrieSpecError, RerankError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ModelError, DecodeError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
