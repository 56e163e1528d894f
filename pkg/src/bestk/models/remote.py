"""JSON-over-HTTP client for an out-of-process language model, plus a loopback server.

Wire protocol (``POST``, ``Content-Type: application/json``)::

    request:  {"prefixes": [[token ids], ...], "request_id": "..."}
    response: {"logprobs": [[[token_id, logprob], ...], ...], "request_id": "..."}

Responses are matched to prefixes by position. ``GET /vocab`` returns
``{"tokens": [...], "bos": ..., "eos": ..., "termination": [...]}`` so a client
can be built from the URL alone.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import List, Optional, Sequence

import requests

from ..types import UsageError, Vocabulary
from .base import (
    Distribution,
    ModelError,
    Prefix,
    ProtocolError,
    SequenceModel,
    TransportError,
    check_distribution,
)

log = logging.getLogger(__name__)


class RemoteModel(SequenceModel):
    def __init__(
        self,
        endpoint: str,
        vocab: Optional[Vocabulary] = None,
        timeout: float = 10.0,
        max_batch_size: int = 64,
        retries: int = 0,
    ):
        if max_batch_size < 1:
            raise UsageError("max_batch_size must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.max_batch_size = max_batch_size
        self.retries = retries
        self.calls = 0
        self._session = requests.Session()
        self._lock = threading.Lock()
        self.vocab = vocab if vocab is not None else self._fetch_vocab()

    def _fetch_vocab(self) -> Vocabulary:
        try:
            resp = self._session.get(self.endpoint + "/vocab", timeout=self.timeout)
            resp.raise_for_status()
            doc = resp.json()
            extra = [t for t in doc.get("termination", []) if t != doc["eos"]]
            return Vocabulary(doc["tokens"], bos=doc["bos"], eos=doc["eos"], extra_termination=extra)
        except requests.RequestException as exc:
            raise TransportError(f"vocabulary fetch failed: {exc}") from exc
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed vocabulary document: {exc}") from exc

    def remote_next(self, prefixes: Sequence[Prefix]) -> List[Distribution]:
        """One request for the whole batch."""
        if len(prefixes) > self.max_batch_size:
            raise UsageError(f"batch of {len(prefixes)} exceeds max batch size {self.max_batch_size}")
        if not prefixes:
            return []
        request_id = uuid.uuid4().hex
        body = {"prefixes": [[int(t) for t in p] for p in prefixes], "request_id": request_id}
        attempt = 0
        while True:
            try:
                return self._post(body, request_id, len(prefixes))
            except TransportError:
                attempt += 1
                if attempt > self.retries:
                    raise
                log.warning("retrying request %s (attempt %d)", request_id, attempt)

    def _post(self, body: dict, request_id: str, n: int) -> List[Distribution]:
        with self._lock:
            self.calls += 1
            try:
                resp = self._session.post(self.endpoint + "/", json=body, timeout=self.timeout)
            except requests.RequestException as exc:
                raise TransportError(f"request {request_id} failed: {exc}") from exc
        if resp.status_code >= 500:
            raise TransportError(f"server error {resp.status_code} for request {request_id}")
        if resp.status_code != 200:
            raise ProtocolError(f"unexpected status {resp.status_code} for request {request_id}")
        try:
            doc = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"response to {request_id} is not JSON") from exc
        if not isinstance(doc, dict) or doc.get("request_id") != request_id:
            raise ProtocolError(f"response does not echo request_id {request_id}")
        rows = doc.get("logprobs")
        if not isinstance(rows, list) or len(rows) != n:
            got = len(rows) if isinstance(rows, list) else type(rows).__name__
            raise ProtocolError(f"expected {n} distributions, got {got}")
        out = []
        for row in rows:
            try:
                dist = [(int(t), float(lp)) for t, lp in row]
            except (TypeError, ValueError) as exc:
                raise ProtocolError(f"malformed distribution entry: {exc}") from exc
            check_distribution(dist, len(self.vocab))
            out.append(dist)
        return out

    def next_logprobs(self, prefixes: Sequence[Prefix]) -> List[Distribution]:
        out: List[Distribution] = []
        for i in range(0, len(prefixes), self.max_batch_size):
            out.extend(self.remote_next(prefixes[i:i + self.max_batch_size]))
        return out

    def close(self) -> None:
        self._session.close()


class _Handler(BaseHTTPRequestHandler):
    server: "_ModelHTTPServer"

    def log_message(self, fmt, *args):
        log.debug("mock-server: " + fmt, *args)

    def _send(self, status: int, doc) -> None:
        payload = json.dumps(doc).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self):
        if self.path.rstrip("/") != "/vocab":
            self._send(404, {"error": "not found"})
            return
        vocab = self.server.model.vocab
        self._send(200, {
            "tokens": vocab.surfaces,
            "bos": vocab[vocab.bos_id].surface,
            "eos": vocab[vocab.eos_id].surface,
            "termination": [vocab[i].surface for i in sorted(vocab.termination_ids)],
        })

    def do_POST(self):
        try:
            length = int(self.headers.get("Content-Length", 0))
            doc = json.loads(self.rfile.read(length))
            prefixes = doc["prefixes"]
            request_id = doc["request_id"]
        except (ValueError, KeyError, TypeError):
            self._send(400, {"error": "malformed request"})
            return
        try:
            dists = self.server.model.next_logprobs(prefixes)
        except ModelError as exc:
            self._send(500, {"error": str(exc), "request_id": request_id})
            return
        self._send(200, {"logprobs": [[[t, lp] for t, lp in d] for d in dists], "request_id": request_id})


class _ModelHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, model: SequenceModel):
        super().__init__(address, _Handler)
        self.model = model


class MockServer:
    """Serve any ``SequenceModel`` over the wire protocol, for loopback tests.

    >>> with MockServer(model) as server:          # doctest: +SKIP
    ...     client = RemoteModel(server.url)
    """

    def __init__(self, model: SequenceModel, host: str = "127.0.0.1", port: int = 0):
        self._httpd = _ModelHTTPServer((host, port), model)
        self._thread: Optional[threading.Thread] = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self) -> "MockServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
