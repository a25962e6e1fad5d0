import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
import torch

from datautil.synth_data import GeneratorSpec, generate
from network.toy_scorer import DIGIT_HEADS, VOCAB, ToyScorer


@pytest.fixture
def small_dataset():
    return generate(GeneratorSpec(seed=0, n_train=120, n_val_in=40, n_val_out=40))


@pytest.fixture
def noiseless_dataset():
    return generate(GeneratorSpec(seed=0, n_train=200, n_val_in=60, n_val_out=60, noise_std=0.0))


def zero_scorer(feature_dim=4, hidden_dim=4):
    model = ToyScorer(feature_dim, hidden_dim)
    with torch.no_grad():
        for param in model.ordered_parameters():
            param.zero_()
    return model


def point_mass_scorer(triple, feature_dim=4, gap=50.0):
    """Scorer whose digit heads put (numerically) all mass on ``triple`` whatever the input."""
    model = zero_scorer(feature_dim)
    with torch.no_grad():
        for head, digit in zip(DIGIT_HEADS, triple):
            model.head_bias[head, VOCAB.digit_token(digit)] = gap
    return model


@pytest.fixture
def rng():
    return np.random.default_rng(0)


class StubChatServer(object):
    """Local chat-completion endpoint replaying a queue of (status, body, delay) replies."""

    def __init__(self):
        self.requests = []
        self.replies = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get('Content-Length', 0))
                stub.requests.append({
                    'path': self.path,
                    'headers': dict(self.headers),
                    'body': json.loads(self.rfile.read(length)),
                })
                status, body, delay = stub.replies.pop(0) if stub.replies else (500, {}, 0.0)
                if delay:
                    threading.Event().wait(delay)
                payload = json.dumps(body).encode()
                try:
                    self.send_response(status)
                    self.send_header('Content-Type', 'application/json')
                    self.send_header('Content-Length', str(len(payload)))
                    self.end_headers()
                    self.wfile.write(payload)
                except (BrokenPipeError, ConnectionResetError):
                    pass

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(('127.0.0.1', 0), Handler)
        self.server.daemon_threads = True
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def base_url(self):
        return 'http://127.0.0.1:{}/v1'.format(self.server.server_address[1])

    def reply(self, content, status=200, delay=0.0):
        body = {'choices': [{'message': {'role': 'assistant', 'content': content}}]}
        self.replies.append((status, body, delay))

    def fail(self, status, times=1):
        for _ in range(times):
            self.replies.append((status, {'error': 'stub'}, 0.0))


@pytest.fixture
def chat_server():
    stub = StubChatServer()
    stub.thread.start()
    yield stub
    stub.server.shutdown()
    stub.server.server_close()


@pytest.fixture
def api_key(monkeypatch):
    monkeypatch.setenv('FDMPO_API_KEY', 'test-key')
    return 'test-key'
