"""Acceptance criteria, one test each.

Every test records a ``AC<n> PASS|FAIL <detail>`` line; the lines are printed
in the pytest terminal summary and by ``python tests/test_acceptance.py``.
"""

import math
import random
import sys
import time
import uuid

import numpy as np
import pytest
import requests

from bestk import DecayParams, DecodeConfig, ScoreMode, bestk_decode, bfs_decode
from bestk.baselines import BeamConfig, Sampling, beam_search, nucleus_filter, sample_decode, typical_filter
from bestk.harness.cli import main as cli_main
from bestk.harness.fixtures import (
    DeepGoalModel,
    deep_goal_population,
    dominant_path_trie,
    random_trie,
    synthetic_corpus,
)
from bestk.harness.studies import DEEP_GOAL, INCOMPLETION, budget_study, decay_study, scoring_study
from bestk.metrics import distinct_n, rouge_l, rouge_n
from bestk.models import MockServer, NGramModel, PromptedModel, RemoteModel
from bestk.scoring import KAPPA_GRID

RESULTS = []
POPULATION_SEED = 7


def report(n, ok, detail):
    line = f"AC{n} {'PASS' if ok else 'FAIL'} {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def walk_complete_paths(model, max_len):
    term = model.vocab.termination_ids
    out, stack = set(), [(model.vocab.bos_id,)]
    while stack:
        prefix = stack.pop()
        for tok, _ in model.next_logprobs([prefix])[0]:
            path = prefix + (tok,)
            if tok in term:
                out.add(path)
            elif len(path) - 1 < max_len:
                stack.append(path)
    return out


def max_width(paths):
    by_depth = {}
    for p in paths:
        for d in range(1, len(p)):
            by_depth.setdefault(d, set()).add(p[:d + 1])
    return max(len(v) for v in by_depth.values())


# ---------------------------------------------------------------- AC1

def test_ac1_reduction_identity():
    rng = np.random.default_rng(101)
    modes = [ScoreMode.original(), ScoreMode.mean(), ScoreMode.length(0.5), ScoreMode.last()]
    tries = [random_trie(rng) for _ in range(100)]
    mismatches, compared = 0, 0
    start = time.perf_counter()
    for i, m in enumerate(tries):
        cfg = DecodeConfig(k=1, budget=int(rng.integers(5, 80)), max_len=int(rng.integers(3, 8)),
                           score_mode=modes[i % 4], gamma=[0.0, 0.05][i % 2], child_cap=[0, 1, 2, 3][i % 4])
        a, b = bestk_decode(m, cfg), bfs_decode(m, cfg)
        compared += 1
        same = [h.tokens for h in a.completed] == [h.tokens for h in b.completed] and a.completed == b.completed
        mismatches += not same
    elapsed = time.perf_counter() - start
    report(1, mismatches == 0 and elapsed < 10.0,
           f"reduction identity: {compared} tries, {mismatches} mismatches, {elapsed:.2f}s (< 10s)")


# ---------------------------------------------------------------- AC2

def test_ac2_exhaustive_oracle():
    rng = np.random.default_rng(202)
    max_len = 12
    checked = bad_bestk = bad_beam = 0
    most_leaves = 0
    for _ in range(60):
        m = random_trie(rng)
        truth = walk_complete_paths(m, max_len)
        assert truth == {p for p, _ in m.complete_paths()}
        most_leaves = max(most_leaves, len(truth))
        cfg = DecodeConfig(k=int(rng.integers(1, 6)), budget=m.node_count, max_len=max_len, gamma=0.0, child_cap=0)
        got = {h.tokens for h in bestk_decode(m, cfg).completed}
        beam = beam_search(m, BeamConfig(beam_size=max_width(truth), max_len=max_len, num_return=10**6))
        bad_bestk += got != truth
        bad_beam += {h.tokens for h in beam.completed} != truth
        checked += 1
    ok = bad_bestk == 0 and bad_beam == 0 and most_leaves <= 100
    report(2, ok, f"exhaustive oracle: {checked} tries (max {most_leaves} leaves), "
                  f"best-k mismatches {bad_bestk}, beam mismatches {bad_beam}")


# ---------------------------------------------------------------- AC3

def test_ac3_no_duplication():
    rng = np.random.default_rng(303)
    runs = dup_bestk = dup_beam = bad_sample = 0
    for i in range(1000):
        if i % 4 == 3:
            m = DeepGoalModel(int(rng.integers(1 << 30)))
            max_len = 12
        else:
            m = random_trie(rng)
            max_len = int(rng.integers(3, 10))
        k = int(rng.choice([1, 2, 5, 10]))
        cfg = DecodeConfig(k=k, budget=int(rng.integers(1, 150)), max_len=max_len,
                           decay=DecayParams(float(rng.choice(KAPPA_GRID))),
                           score_mode=[ScoreMode.original(), ScoreMode.mean(), ScoreMode.length(0.5), ScoreMode.last()][i % 4],
                           gamma=float(rng.choice([0.0, 0.05])), frontier_capacity=int(rng.choice([5, 500])))
        seqs = [h.tokens for h in bestk_decode(m, cfg).completed]
        dup_bestk += len(seqs) != len(set(seqs))
        beam = beam_search(m, BeamConfig(beam_size=int(rng.integers(1, 8)), max_len=max_len, num_return=100))
        bseqs = [h.tokens for h in beam.completed]
        dup_beam += len(bseqs) != len(set(bseqs))
        if i % 10 == 0:
            s = sample_decode(m, Sampling("nucleus", 0.9).filter(), 10, max_len, seed=i)
            bad_sample += s.unique_count > len(s.completed)
        runs += 1
    dom = sample_decode(dominant_path_trie(), nucleus_filter_p(0.5), 10, 10, seed=0)
    S, uS = len(dom.completed), dom.unique_count
    ok = dup_bestk == 0 and dup_beam == 0 and bad_sample == 0 and uS < S
    report(3, ok, f"no duplication: {runs} fuzzed runs, best-k dup {dup_bestk}, beam dup {dup_beam}, "
                  f"sampling |S|>S {bad_sample}; dominant path sampling S={S} |S|={uS}")


def nucleus_filter_p(p):
    return Sampling("nucleus", p).filter()


# ---------------------------------------------------------------- AC4

def test_ac4_batch_economy():
    lines = synthetic_corpus(2000, 300, seed=1)
    base = NGramModel.train(lines, 3, add_k=0.01)
    prompts = [PromptedModel(base, base.vocab.encode(l.split()[:2])) for l in lines[:20]]
    max_len = 20
    violations, checked = 0, 0
    for k in (1, 5, 10):
        for C in (50, 100, 200, 400):
            cfg = DecodeConfig(k=k, budget=C, max_len=max_len, gamma=0.0)
            for m in prompts[:5]:
                r = bestk_decode(m, cfg)
                violations += r.model_batch_calls > math.ceil(C / k) + 1
                checked += 1

    budget = 400

    def timed(k):
        cfg = DecodeConfig(k=k, budget=budget, max_len=max_len, gamma=0.0, child_cap=10)
        best = float("inf")
        for _ in range(3):
            t0 = time.perf_counter()
            results = [bestk_decode(m, cfg) for m in prompts]
            best = min(best, time.perf_counter() - t0)
        return best, max(r.model_batch_calls for r in results)

    t1, calls1 = timed(1)
    t10, calls10 = timed(10)
    speedup = t1 / t10
    report(4, violations == 0 and speedup >= 3.0,
           f"batch economy: {checked} runs, {violations} over ceil(C/k)+1; "
           f"k=1 {t1:.3f}s/{calls1} calls vs k=10 {t10:.3f}s/{calls10} calls at C={budget}: {speedup:.1f}x (>= 3x)")


# ---------------------------------------------------------------- AC5-7

@pytest.fixture(scope="module")
def deep_goal():
    return deep_goal_population(200, POPULATION_SEED, DEEP_GOAL)


def test_ac5_decay_completion_trend(deep_goal):
    rates = decay_study(deep_goal, ScoreMode.length(0.5))
    vals = [rates[k] for k in KAPPA_GRID]
    gain = vals[-1] - vals[0]
    monotone = all(b >= a - 0.02 for a, b in zip(vals, vals[1:]))
    shown = ", ".join(f"{k:g}:{100 * v:.1f}%" for k, v in rates.items())
    report(5, gain >= 0.10 and monotone,
           f"decay trend over {len(deep_goal)} tries, alpha=0.5: {shown}; gain {100 * gain:.1f}pp (>= 10)")


def test_ac6_budget_completion_trend():
    models = deep_goal_population(200, POPULATION_SEED, INCOMPLETION)
    inc = budget_study(models)
    vals = [inc[b] for b in (1, 2, 5, 10)]
    ok = all(b < a for a, b in zip(vals, vals[1:]))
    shown = ", ".join(f"b={b}:{100 * v:.1f}%" for b, v in inc.items())
    report(6, ok, f"BFS incompletion over {len(models)} tries: {shown} (strictly decreasing)")


def test_ac7_original_scoring_is_worst(deep_goal):
    rates = scoring_study(deep_goal)
    worst = min(rates, key=rates.get)
    others = [v for m, v in rates.items() if m != "original"]
    ok = all(rates["original"] < v for v in others)
    shown = ", ".join(f"{m}:{100 * v:.1f}%" for m, v in rates.items())
    report(7, ok, f"best completion per score over the decay grid: {shown}; worst={worst}")


# ---------------------------------------------------------------- AC8

def test_ac8_metric_units():
    tol = 1e-9
    checks = {
        "distinct-1": (distinct_n(["the cat", "the dog"], 1), 0.75),
        "rouge-1": (rouge_n("a b c", ["a b"], 1), 0.8),
        "rouge-L": (rouge_l("a x b", ["a b"]), 0.8),
        "rouge-L reversed": (rouge_l("b a", ["a b"]), 0.5),
    }
    nuc = nucleus_filter({0: 0.5, 1: 0.3, 2: 0.2}, 0.7)
    typ = typical_filter({i: 0.25 for i in range(4)}, 0.5)
    checks["nucleus a"] = (nuc.get(0, 0.0), 0.625)
    checks["nucleus b"] = (nuc.get(1, 0.0), 0.375)
    checks["typical id0"] = (typ.get(0, 0.0), 0.5)
    checks["typical id1"] = (typ.get(1, 0.0), 0.5)
    bad = [name for name, (got, want) in checks.items() if abs(got - want) > tol]
    bad += ["nucleus support"] if set(nuc) != {0, 1} else []
    bad += ["typical support"] if set(typ) != {0, 1} else []
    report(8, not bad, f"metric and filter units at 1e-9: {len(checks)} values, failures {bad or 'none'}")


# ---------------------------------------------------------------- AC9

def test_ac9_determinism(tmp_path):
    lines = synthetic_corpus(300, 50, seed=9)
    train = tmp_path / "train.txt"
    train.write_text("\n".join(lines) + "\n")
    corpus = tmp_path / "ex.jsonl"
    import json
    corpus.write_text("".join(json.dumps({"id": f"x{i}", "input": " ".join(l.split()[:2]), "references": [l]}) + "\n"
                              for i, l in enumerate(lines[:10])))
    conf = tmp_path / "bench.yaml"
    import yaml
    conf.write_text(yaml.safe_dump({
        "model": {"kind": "ngram", "path": str(train), "order": 3, "floor": 0.001},
        "corpus": str(corpus), "beam_size": 5, "max_len": 12, "seed": 42,
        "strategies": [
            {"name": "bestk", "k": 5, "kappa": 0.1}, {"name": "bfs", "k": 5},
            {"name": "beam"}, {"name": "dbs", "groups": 5, "diversity_penalty": 0.5},
            {"name": "sample", "sampling": "nucleus", "sampling_value": 0.9},
            {"name": "beam-sample", "sampling": "typical", "sampling_value": 0.9}],
    }))
    blobs = []
    for i, workers in enumerate(("1", "1", "4")):
        out = tmp_path / f"run{i}"
        code = cli_main(["bench", "--config", str(conf), "-o", str(out), "--workers", workers])
        assert code == 0
        blobs.append((out / "aggregate.csv").read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    report(9, ok, f"determinism: 3 bench runs (6 strategies, workers 1/1/4) -> "
                  f"{'byte-identical' if ok else 'different'} aggregate.csv ({len(blobs[0])} bytes)")


# ---------------------------------------------------------------- AC10

def test_ac10_remote_protocol():
    rng = random.Random(10)
    backend = DeepGoalModel(3)
    vocab_ids = [backend.vocab.id(s) for s in backend.vocab.surfaces if s not in ("<s>", "</s>")]
    client_ok = raw_ok = 0
    with MockServer(backend) as server:
        client = RemoteModel(server.url, max_batch_size=32)
        for _ in range(100):
            batch = [[backend.vocab.bos_id] + [rng.choice(vocab_ids) for _ in range(rng.randint(0, 9))]
                     for _ in range(rng.randint(1, 32))]
            client_ok += client.next_logprobs(batch) == backend.next_logprobs(batch)
        for _ in range(100):
            batch = [[backend.vocab.bos_id] + [rng.choice(vocab_ids) for _ in range(rng.randint(0, 9))]
                     for _ in range(rng.randint(1, 32))]
            rid = uuid.UUID(int=rng.getrandbits(128)).hex
            doc = requests.post(server.url + "/", json={"prefixes": batch, "request_id": rid}, timeout=5).json()
            expected = [[[t, lp] for t, lp in d] for d in backend.next_logprobs(batch)]
            raw_ok += doc["request_id"] == rid and doc["logprobs"] == expected
        calls = client.calls
    ok = client_ok == 100 and raw_ok == 100 and calls == 100
    report(10, ok, f"remote loopback: client {client_ok}/100 batches matched in order ({calls} requests), "
                   f"raw protocol {raw_ok}/100 with request_id echoed")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
