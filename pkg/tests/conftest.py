"""Shared fixtures: toy corpora and a local fake inference service."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from regrag.corpus import Corpus, Passage


def make_corpus(texts: list[str], document_id: int = 1) -> Corpus:
    corpus = Corpus()
    for i, text in enumerate(texts):
        key = (document_id, f"p{i}")
        corpus.key_index[key] = i
        corpus.passages.append(Passage(document_id, f"p{i}", text))
    return corpus


@pytest.fixture
def toy_corpus() -> Corpus:
    return make_corpus(
        [
            "A Person must disclose holdings of Financial Instruments.",
            "Events that trigger a disclosure are listed in Rules 7.3.2 and 7.3.3.",
            "An Authorised Person shall maintain adequate capital resources.",
            "This chapter describes definitions used throughout the Rulebook.",
            "The Regulator may impose conditions on a Licence.",
        ]
    )


class _Handler(BaseHTTPRequestHandler):
    """Canned-response handler; behaviors registered per path on the server."""

    def do_POST(self):  # noqa: N802 - http.server API
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        handler = self.server.routes.get(self.path)  # type: ignore[attr-defined]
        if handler is None:
            self.send_response(404)
            self.end_headers()
            return
        status, payload = handler(body)
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):  # silence test output
        pass


class FakeService:
    def __init__(self):
        self.server = HTTPServer(("127.0.0.1", 0), _Handler)
        self.server.routes = {}
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    @property
    def url(self) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    def route(self, path, handler):
        self.server.routes[path] = handler

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def fake_service():
    service = FakeService()
    yield service
    service.close()
