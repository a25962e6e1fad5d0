"""Optimization-model endpoints that propose the next metric definition.

``mock`` walks a fixed candidate pool; ``http`` asks an OpenAI-compatible
chat-completion endpoint, showing it every earlier definition with its V_d.
"""

import os
import random
import re
import sys
import time
from dataclasses import dataclass, field
from typing import List, Optional

import requests

from utils.exceptions import ConfigError, EndpointError, ProtocolError

API_KEY_ENV = 'FDMPO_API_KEY'
ENDPOINT_KINDS = ('mock', 'http')
RETRY_STATUSES = (408, 429, 500, 502, 503, 504)

META_PROMPT = (
    "You optimise the natural-language definition of an image editing quality metric. "
    "A scoring model reads the definition and predicts a score for each edited image. "
    "Each earlier definition is listed with its definition value V_d: the probability-weighted "
    "agreement between the model's predicted score digits and the human scores "
    "(higher is better, at most 1.11). The list is sorted from lowest to highest V_d. "
    "Compare the definitions, infer which criteria the human annotators actually used, and "
    "write ONE new definition that should reach a higher V_d than every definition shown. "
    "Reply with the definition text only: no preamble, no explanation, no quotes, no markdown."
)

_FENCE = re.compile(r'^```[^\n]*\n?(.*?)\n?```$', re.DOTALL)
_QUOTE_PAIRS = (('"', '"'), ("'", "'"), ('“', '”'), ('‘', '’'), ('`', '`'))


@dataclass
class OptimizerEndpoint:
    kind: str = 'mock'
    base_url: str = ''
    model: str = 'gpt-4o'
    temperature: float = 0.7
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 0.5
    backoff_cap: float = 8.0
    pool: List[str] = field(default_factory=list)

    def validate(self):
        if self.kind not in ENDPOINT_KINDS:
            raise ConfigError('optimizer must be one of {}, got {!r}'.format(ENDPOINT_KINDS, self.kind))
        if self.kind == 'http':
            if not self.base_url.strip():
                raise ConfigError('http optimizer needs a base URL (--base-url)')
            if not os.environ.get(API_KEY_ENV, '').strip():
                raise ConfigError('http optimizer needs the {} environment variable'.format(API_KEY_ENV))
            if self.max_retries < 0 or self.timeout <= 0:
                raise ConfigError('max_retries must be >= 0 and timeout > 0')
        elif not self.pool:
            raise ConfigError('mock optimizer needs a non-empty candidate pool')
        return self


class MockOptimizer(object):
    """Returns the first pool entry not tried yet, then cycles through the pool."""

    def __init__(self, pool):
        self.pool = list(pool)

    def propose(self, history):
        tried = {record.definition for record in history}
        for candidate in self.pool:
            if candidate not in tried:
                return candidate
        return self.pool[len(history) % len(self.pool)]


def render_history(history):
    lines = []
    for record in sorted(history, key=lambda r: (r.v_d.v, r.iteration)):
        lines.append('Definition (iteration {}, V_d = {:.6f}):\n{}'.format(
            record.iteration, record.v_d.v, record.definition))
    lines.append('Write the next definition.')
    return '\n\n'.join(lines)


def build_messages(history):
    return [
        {'role': 'system', 'content': META_PROMPT},
        {'role': 'user', 'content': render_history(history)},
    ]


def clean_definition(text):
    """Strip code fences and one layer of surrounding quotes."""
    text = text.strip()
    match = _FENCE.match(text)
    if match:
        text = match.group(1).strip()
    for left, right in _QUOTE_PAIRS:
        if len(text) >= 2 and text.startswith(left) and text.endswith(right):
            text = text[len(left):-len(right)].strip()
            break
    return text


class HttpOptimizer(object):
    def __init__(self, endpoint, session=None, sleep=time.sleep, rng=None):
        self.endpoint = endpoint
        self.url = endpoint.base_url.rstrip('/') + '/chat/completions'
        self.session = session or requests.Session()
        self.sleep = sleep
        self.rng = rng or random.Random()

    def _headers(self):
        return {
            'Content-Type': 'application/json',
            'Authorization': 'Bearer {}'.format(os.environ.get(API_KEY_ENV, '')),
        }

    def _backoff(self, attempt):
        delay = min(self.endpoint.backoff_cap, self.endpoint.backoff_base * (2 ** attempt))
        return delay * (0.5 + 0.5 * self.rng.random())

    def complete(self, messages):
        payload = {
            'model': self.endpoint.model,
            'messages': messages,
            'temperature': self.endpoint.temperature,
        }
        last_status = None
        attempts = self.endpoint.max_retries + 1
        for attempt in range(attempts):
            try:
                response = self.session.post(self.url, json=payload, headers=self._headers(),
                                             timeout=self.endpoint.timeout)
            except requests.RequestException as e:
                last_status = type(e).__name__
            else:
                last_status = response.status_code
                if response.status_code == 200:
                    return self._parse(response)
                if response.status_code not in RETRY_STATUSES:
                    raise EndpointError('optimizer endpoint rejected the request', last_status)
            print('[WARN] optimizer attempt {}/{} failed ({})'.format(attempt + 1, attempts, last_status),
                  file=sys.stderr)
            if attempt < attempts - 1:
                self.sleep(self._backoff(attempt))
        raise EndpointError('optimizer endpoint failed after {} attempts'.format(attempts), last_status)

    @staticmethod
    def _parse(response):
        try:
            content = response.json()['choices'][0]['message']['content']
        except (ValueError, KeyError, IndexError, TypeError):
            raise ProtocolError('optimizer response has no choices[0].message.content')
        if not isinstance(content, str) or not content.strip():
            raise ProtocolError('optimizer returned an empty definition')
        return content

    def propose(self, history):
        text = clean_definition(self.complete(build_messages(history)))
        if not text:
            raise ProtocolError('optimizer reply is empty after removing fences and quotes')
        return text


def make_optimizer(endpoint):
    endpoint.validate()
    if endpoint.kind == 'mock':
        return MockOptimizer(endpoint.pool)
    return HttpOptimizer(endpoint)


def propose_next(history, endpoint, optimizer=None):
    if not history:
        raise ConfigError('propose_next needs a non-empty history')
    optimizer = optimizer or make_optimizer(endpoint)
    return optimizer.propose(history)


def load_pool(path):
    """One candidate definition per non-empty line."""
    with open(path) as f:
        pool = [line.strip() for line in f if line.strip()]
    if not pool:
        raise ConfigError('candidate pool file is empty: {}'.format(path))
    return pool


def make_endpoint(args, pool: Optional[List[str]] = None):
    return OptimizerEndpoint(
        kind=args.optimizer, base_url=args.base_url or '', model=args.model,
        temperature=args.temperature, timeout=args.timeout, max_retries=args.max_retries,
        pool=list(pool or []))
