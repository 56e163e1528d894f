import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bestk import UsageError
from bestk.harness.fixtures import random_trie
from bestk.models import (
    MockServer,
    NGramModel,
    PromptedModel,
    ProtocolError,
    RemoteModel,
    TransportError,
    TrieModel,
    TrieSpecError,
    check_distribution,
    ngram_train,
)


def dist_of(model, prefix):
    return {model.vocab[t].surface: math.exp(lp) for t, lp in model.next_logprobs([prefix])[0]}


# ---------------------------------------------------------------- trie

def test_single_branch_trie():
    m = TrieModel.from_spec({"tree": {"a": {"prob": 1.0, "children": {"</s>": {"prob": 1.0}}}}})
    assert m.next_logprobs([[m.vocab.bos_id]]) == [[(m.vocab.id("a"), 0.0)]]


def test_skier_round_trip(skier):
    v = skier.vocab
    assert dist_of(skier, (v.bos_id,)) == pytest.approx({"skiing": 0.5, "There": 0.3, "A": 0.2}, abs=1e-15)
    again = TrieModel.from_spec(skier.to_spec())
    prefix = (v.bos_id, v.id("skiing"))
    assert again.next_logprobs([prefix]) == skier.next_logprobs([prefix])


def test_trie_validation_reports_path():
    with pytest.raises(TrieSpecError, match="tree"):
        TrieModel.from_spec({"tree": {"a": {"prob": 0.5}, "b": {"prob": 0.4}}})
    with pytest.raises(TrieSpecError, match="tree/a/children"):
        TrieModel.from_spec({"tree": {"a": {"prob": 1.0, "children": {"x": {"prob": 0.9}}}}})
    with pytest.raises(TrieSpecError):
        TrieModel.from_spec({"tree": {"a": {"prob": "high"}}})
    with pytest.raises(TrieSpecError):
        TrieModel.from_spec(["not", "a", "mapping"])


def test_trie_files(tmp_path, skier):
    import yaml
    y = tmp_path / "t.yaml"
    y.write_text(yaml.safe_dump(skier.to_spec()))
    j = tmp_path / "t.json"
    j.write_text('{"tree": {"a": {"prob": 0.1}, "b": {"prob": 0.2}, "c": {"prob": 0.7}}}')
    assert dist_of(TrieModel.from_file(y), [0]) == dist_of(skier, [0])
    assert len(TrieModel.from_file(j).next_logprobs([[0]])[0]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text('{"tree": {"a": {"prob": 0.1}, "b": {"prob": 0.2}, "c": {"prob": 0.6}}}')
    with pytest.raises(TrieSpecError):
        TrieModel.from_file(bad)


def test_unknown_prefix_is_model_error(skier):
    from bestk.models import ModelError
    with pytest.raises(ModelError):
        skier.next_logprobs([[0, 99]])


@given(st.integers(0, 10_000))
def test_trie_path_mass_sums_to_one(seed):
    m = random_trie(np.random.default_rng(seed))
    total = math.fsum(math.exp(lp) for _, lp in m.complete_paths())
    assert abs(total - 1.0) <= 1e-6


@given(st.integers(0, 10_000))
def test_random_trie_leaf_bound(seed):
    m = random_trie(np.random.default_rng(seed))
    assert sum(1 for _ in m.complete_paths()) <= 100


# ---------------------------------------------------------------- n-gram

def test_ngram_single_bigram():
    m = ngram_train(["a b"], 2, add_k=0)
    v = m.vocab
    assert dist_of(m, (v.bos_id, v.id("a")))["b"] == pytest.approx(1.0, abs=1e-12)


def test_ngram_hand_counts():
    m = ngram_train(["a b", "a c"], 2, add_k=0)
    d = dist_of(m, (m.vocab.bos_id, m.vocab.id("a")))
    assert d["b"] == pytest.approx(0.5, abs=1e-12) and d["c"] == pytest.approx(0.5, abs=1e-12)


def test_ngram_vocabulary():
    m = ngram_train(["a b", "a c"], 2)
    assert set(m.vocab.surfaces) == {"<s>", "</s>", "a", "b", "c"}


def test_ngram_smoothing_covers_vocabulary():
    m = ngram_train(["a b c", "c b a d"], 3, add_k=0.1)
    v = m.vocab
    for prefix in ([v.bos_id], [v.bos_id, v.id("d")], [v.bos_id, v.id("a"), v.id("b")]):
        d = dict(m.next_logprobs([prefix])[0])
        assert set(d) == set(range(len(v))) - {v.bos_id}
        assert math.isclose(sum(math.exp(x) for x in d.values()), 1.0, abs_tol=1e-9)


def test_ngram_backs_off_on_unseen_context():
    m = ngram_train(["a b", "c d"], 3, add_k=0)
    v = m.vocab
    # (b, c) never occurs; the bigram context (c) does
    d = dist_of(m, (v.bos_id, v.id("b"), v.id("c")))
    assert d == pytest.approx({"d": 1.0})


def test_ngram_greedy_reproduces_repeated_line():
    line = "the quick fox jumps over the lazy dog"
    m = ngram_train([line] * 5, 3, add_k=0.01)
    v = m.vocab
    prefix = [v.bos_id]
    while prefix[-1] != v.eos_id and len(prefix) < 20:
        prefix.append(max(m.next_logprobs([prefix])[0], key=lambda tl: tl[1])[0])
    assert " ".join(v.decode(prefix)) == line


def test_ngram_errors_and_floor():
    with pytest.raises(UsageError):
        ngram_train([], 2)
    with pytest.raises(UsageError):
        ngram_train(["   "], 2)
    with pytest.raises(UsageError):
        ngram_train(["a"], 0)
    m = NGramModel.train(["a b", "a c"] * 3, 2, add_k=0.01, floor=0.01)
    d = dict(m.next_logprobs([[m.vocab.bos_id]])[0])
    assert set(d) == {m.vocab.id("a")}


def test_ngram_batch_matches_single_queries():
    m = ngram_train(["a b c d", "b c a", "d d a b"], 3, add_k=0.05)
    prefixes = [[0], [0, 2], [0, 2, 3], [0, 5, 5, 5], [0, 4, 2]]
    batch = m.next_logprobs(prefixes)
    assert batch == [m.next_logprobs([p])[0] for p in prefixes]


def test_prompted_model_inserts_context():
    m = ngram_train(["x y z", "q y w"], 3, add_k=0)
    v = m.vocab
    prompted = PromptedModel(m, [v.id("q")])
    d = dict(prompted.next_logprobs([[v.bos_id, v.id("y")]])[0])
    assert set(d) == {v.id("w")}


# ---------------------------------------------------------------- remote

def test_check_distribution():
    check_distribution([(0, math.log(0.5)), (1, math.log(0.5))], 2)
    with pytest.raises(ProtocolError):
        check_distribution([(0, math.log(0.7)), (1, math.log(0.7))], 2)
    with pytest.raises(ProtocolError):
        check_distribution([(5, -1.0)], 2)
    with pytest.raises(ProtocolError):
        check_distribution([(0, 0.5)], 2)


def test_loopback_returns_backend_distribution(skier):
    with MockServer(skier) as server:
        client = RemoteModel(server.url)
        assert client.vocab.surfaces == skier.vocab.surfaces
        prefixes = [[0], [0, skier.vocab.id("There")]]
        assert client.next_logprobs(prefixes) == skier.next_logprobs(prefixes)
        assert client.calls == 1


def test_empty_batch_makes_no_call(skier):
    with MockServer(skier) as server:
        client = RemoteModel(server.url, vocab=skier.vocab)
        assert client.next_logprobs([]) == []
        assert client.calls == 0


def test_batch_size_limit_and_chunking(skier):
    with MockServer(skier) as server:
        client = RemoteModel(server.url, vocab=skier.vocab, max_batch_size=2)
        with pytest.raises(UsageError):
            client.remote_next([[0]] * 3)
        assert len(client.next_logprobs([[0]] * 5)) == 5
        assert client.calls == 3


class _Scripted(BaseHTTPRequestHandler):
    reply = None

    def log_message(self, *a):
        pass

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        status, doc = type(self).reply(body)
        data = json.dumps(doc).encode() if not isinstance(doc, bytes) else doc
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


@pytest.fixture
def scripted(skier):
    servers = []

    def make(reply):
        handler = type("H", (_Scripted,), {"reply": staticmethod(reply)})
        srv = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        threading.Thread(target=srv.serve_forever, daemon=True).start()
        servers.append(srv)
        return RemoteModel(f"http://127.0.0.1:{srv.server_address[1]}", vocab=skier.vocab, timeout=2)

    yield make
    for s in servers:
        s.shutdown()
        s.server_close()


def test_wrong_length_is_protocol_error(scripted):
    client = scripted(lambda b: (200, {"logprobs": [], "request_id": b["request_id"]}))
    with pytest.raises(ProtocolError):
        client.next_logprobs([[0]])


def test_request_id_must_echo(scripted):
    client = scripted(lambda b: (200, {"logprobs": [[[2, 0.0]]], "request_id": "other"}))
    with pytest.raises(ProtocolError):
        client.next_logprobs([[0]])


def test_unnormalized_response_rejected(scripted):
    client = scripted(lambda b: (200, {"logprobs": [[[2, -0.1], [3, -0.1]]], "request_id": b["request_id"]}))
    with pytest.raises(ProtocolError):
        client.next_logprobs([[0]])


def test_server_failure_is_transport_error_and_retried(scripted):
    seen = []

    def reply(b):
        seen.append(b["request_id"])
        return 503, {"error": "busy"}

    client = scripted(reply)
    client.retries = 2
    with pytest.raises(TransportError):
        client.next_logprobs([[0]])
    assert len(seen) == 3


def test_unreachable_endpoint():
    with pytest.raises(TransportError):
        RemoteModel("http://127.0.0.1:9", timeout=0.5)


def test_remote_drives_decoder(skier):
    from bestk import DecodeConfig, bestk_decode
    with MockServer(skier) as server:
        remote = bestk_decode(RemoteModel(server.url), DecodeConfig(k=2, budget=20, max_len=6))
    local = bestk_decode(skier, DecodeConfig(k=2, budget=20, max_len=6))
    assert remote.completed == local.completed
