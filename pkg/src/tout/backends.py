"""Text-generation boundary.

Four interchangeable backends sit behind one ``generate`` call:

* HttpBackend      -- OpenAI-compatible chat-completions endpoint over HTTP.
* ScriptedBackend  -- pure table lookup; the deterministic test double.
* SyntheticOracleBackend -- seeded noisy oracle for desk-scale experiments.
* ResponseCache / cached_generate -- content-addressed response cache.

Temperature is the only model knob the engine manipulates, so backends must
keep responses at distinct temperatures genuinely distinct (cache keys
quantize temperature to 1e-3 rather than hashing raw floats).
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .model import BackendUnavailableError, InvalidArgumentError, Transcript

log = logging.getLogger(__name__)

DEFAULT_MAX_TOKENS = 512

ENV_API_BASE = "TOUT_API_BASE"
ENV_API_KEY = "TOUT_API_KEY"
ENV_MODEL = "TOUT_MODEL"


@dataclass(frozen=True)
class BackendRequest:
    prompt: str
    temperature: float
    n: int = 1
    max_tokens: int = DEFAULT_MAX_TOKENS
    stop: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if not math.isfinite(self.temperature):
            raise InvalidArgumentError("temperature must be finite")
        if not (0.0 <= self.temperature <= 2.0):
            raise InvalidArgumentError("temperature must be within [0, 2]")
        if self.n < 1:
            raise InvalidArgumentError("n must be >= 1")
        if self.max_tokens < 1:
            raise InvalidArgumentError("max_tokens must be >= 1")


@dataclass(frozen=True)
class BackendResponse:
    completions: tuple[str, ...]
    usage: Optional[dict[str, int]] = None


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


def quantize_temperature(temperature: float) -> int:
    """Temperature quantized to 1e-3 steps, the granularity of all keying."""
    return round(temperature * 1000)


def request_to_body(request: BackendRequest, model: str) -> dict[str, Any]:
    """Serialize a request to the chat-completions HTTP body."""
    body: dict[str, Any] = {
        "model": model,
        "messages": [{"role": "user", "content": request.prompt}],
        "temperature": request.temperature,
        "n": request.n,
        "max_tokens": request.max_tokens,
    }
    if request.stop is not None:
        body["stop"] = list(request.stop)
    return body


def body_to_request(body: dict[str, Any]) -> BackendRequest:
    """Parse the chat-completions HTTP body back into a request."""
    stop = body.get("stop")
    return BackendRequest(
        prompt=body["messages"][0]["content"],
        temperature=body["temperature"],
        n=body["n"],
        max_tokens=body["max_tokens"],
        stop=tuple(stop) if stop is not None else None,
    )


class Backend:
    """Minimal backend interface: an id for cache keys plus raw generation."""

    backend_id: str = "backend"

    def generate(self, request: BackendRequest) -> BackendResponse:
        raise NotImplementedError


def generate(
    backend: Backend, request: BackendRequest, transcript: Optional[Transcript] = None
) -> BackendResponse:
    """Issue one generation call, timing it into the live transcript.

    The latency-bearing event is deliberately excluded from persisted run
    records (see model.RECORD_EVENT_KINDS).
    """
    started = time.monotonic()
    response = backend.generate(request)
    latency_ms = (time.monotonic() - started) * 1000.0
    if len(response.completions) != request.n:
        raise BackendUnavailableError(
            f"backend {backend.backend_id} returned {len(response.completions)} "
            f"completions for n={request.n}"
        )
    if transcript is not None:
        transcript.emit(
            "generate",
            backend=backend.backend_id,
            prompt_digest=prompt_digest(request.prompt),
            temperature=request.temperature,
            n=request.n,
            latency_ms=latency_ms,
        )
    log.debug(
        "generate backend=%s temp=%.3f n=%d latency=%.1fms",
        backend.backend_id,
        request.temperature,
        request.n,
        latency_ms,
    )
    return response


class HttpBackend(Backend):
    """Client for any OpenAI-compatible /v1/chat/completions endpoint.

    Batches n completions into a single request when the provider honors n;
    shortfalls are re-requested sequentially and, failing that, padded with
    empty text (the shortfall is logged). Transient failures retry with
    exponential backoff before raising BackendUnavailableError with the
    last HTTP status.
    """

    def __init__(
        self,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        model: Optional[str] = None,
        max_retries: int = 3,
        backoff_s: float = 1.0,
        timeout_s: float = 60.0,
        max_in_flight: int = 8,
    ):
        self.base_url = (base_url or os.getenv(ENV_API_BASE, "")).rstrip("/")
        self.api_key = api_key if api_key is not None else os.getenv(ENV_API_KEY, "")
        self.model = model or os.getenv(ENV_MODEL, "")
        if not self.base_url:
            raise InvalidArgumentError(
                f"no API base URL: pass base_url or set {ENV_API_BASE}"
            )
        if not self.model:
            raise InvalidArgumentError(f"no model name: pass model or set {ENV_MODEL}")
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self.timeout_s = timeout_s
        self._gate = threading.Semaphore(max_in_flight)
        self.backend_id = f"http:{self.base_url}:{self.model}"

    def _post(self, body: dict[str, Any]) -> dict[str, Any]:
        import requests

        url = self.base_url + "/v1/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_status: Optional[int] = None
        last_error = "no attempt made"
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = self.backoff_s * (2 ** (attempt - 1))
                log.warning(
                    "retrying %s in %.1fs (attempt %d/%d): %s",
                    url,
                    delay,
                    attempt,
                    self.max_retries,
                    last_error,
                )
                time.sleep(delay)
            try:
                with self._gate:
                    resp = requests.post(
                        url, json=body, headers=headers, timeout=self.timeout_s
                    )
            except requests.RequestException as exc:
                last_error = repr(exc)
                continue
            if resp.status_code == 200:
                return resp.json()
            last_status = resp.status_code
            last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
            if 400 <= resp.status_code < 500 and resp.status_code != 429:
                break  # client errors won't heal on retry
        raise BackendUnavailableError(
            f"endpoint unavailable after {self.max_retries} retries: {last_error}",
            last_status=last_status,
        )

    def _completions_of(self, payload: dict[str, Any]) -> list[str]:
        return [
            choice.get("message", {}).get("content") or ""
            for choice in payload.get("choices", [])
        ]

    def generate(self, request: BackendRequest) -> BackendResponse:
        payload = self._post(request_to_body(request, self.model))
        completions = self._completions_of(payload)[: request.n]
        usage = payload.get("usage")
        # Provider returned fewer than n choices: top up one at a time.
        while len(completions) < request.n:
            single = request_to_body(request, self.model)
            single["n"] = 1
            try:
                extra = self._completions_of(self._post(single))
            except BackendUnavailableError:
                extra = []
            if extra:
                completions.append(extra[0])
            else:
                log.warning(
                    "padding %d missing completions with empty text",
                    request.n - len(completions),
                )
                completions.extend([""] * (request.n - len(completions)))
        return BackendResponse(completions=tuple(completions), usage=usage)


class ScriptedBackend(Backend):
    """Pure lookup backend: identical inputs always give identical outputs.

    The script maps (prompt digest, quantized temperature, sample index)
    to completion text; unknown keys fall back to ``default``.
    """

    backend_id = "scripted"

    def __init__(self, script: dict[tuple[str, int, int], str], default: str = ""):
        self.script = dict(script)
        self.default = default

    @staticmethod
    def key(prompt: str, temperature: float, index: int) -> tuple[str, int, int]:
        return (prompt_digest(prompt), quantize_temperature(temperature), index)

    def generate(self, request: BackendRequest) -> BackendResponse:
        digest = prompt_digest(request.prompt)
        tq = quantize_temperature(request.temperature)
        completions = tuple(
            self.script.get((digest, tq, i), self.default) for i in range(request.n)
        )
        return BackendResponse(completions=completions)


def _key_seed(seed: int, key: str) -> np.random.Generator:
    key_hash = int.from_bytes(
        hashlib.sha256(key.encode("utf-8")).digest()[:8], "big"
    )
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, key_hash]))


class SyntheticOracleBackend(Backend):
    """Noisy value oracle standing in for an LLM evaluator.

    Prompts follow a tiny line protocol: ``VALUE <key>`` returns the next
    draws of ``true_value[key] + noise_std[key] * g_j`` where g_j is the
    j-th standard normal of the key's seeded substream; ``PROPOSE <key>``
    returns the scripted child labels for that key, one per line. Keying
    each state to its own substream makes the full sample stream
    reproducible for a fixed seed regardless of evaluation interleaving.
    """

    backend_id = "synthetic"

    def __init__(
        self,
        true_value: dict[str, float],
        noise_std: dict[str, float],
        seed: int,
        children: Optional[dict[str, list[str]]] = None,
    ):
        for key, sigma in noise_std.items():
            if sigma < 0:
                raise InvalidArgumentError(f"noise_std[{key!r}] must be >= 0")
        self.true_value = dict(true_value)
        self.noise_std = dict(noise_std)
        self.children = dict(children or {})
        self.seed = seed
        self._draws: dict[str, int] = {}
        self._rngs: dict[str, np.random.Generator] = {}
        self._lock = threading.Lock()

    def _next_draws(self, key: str, n: int) -> list[float]:
        with self._lock:
            rng = self._rngs.get(key)
            if rng is None:
                rng = self._rngs[key] = _key_seed(self.seed, key)
            self._draws[key] = self._draws.get(key, 0) + n
            return [float(g) for g in rng.standard_normal(n)]

    def generate(self, request: BackendRequest) -> BackendResponse:
        prompt = request.prompt
        if prompt.startswith("VALUE "):
            key = prompt[len("VALUE ") :].strip()
            mu = self.true_value.get(key, 0.0)
            sigma = self.noise_std.get(key, 0.0)
            draws = self._next_draws(key, request.n)
            completions = tuple(repr(mu + sigma * g) for g in draws)
            return BackendResponse(completions=completions)
        if prompt.startswith("PROPOSE "):
            key = prompt[len("PROPOSE ") :].strip()
            listing = "\n".join(self.children.get(key, []))
            return BackendResponse(completions=tuple([listing] * request.n))
        return BackendResponse(completions=tuple([""] * request.n))


class ResponseCache:
    """Content-addressed response cache: one JSON file per key digest.

    Keys include the backend id, prompt digest, quantized temperature, n,
    max_tokens, stop and a sample-batch index, so repeated draws at one
    temperature stay distinct while identical requests are served from
    disk. I/O failures degrade to uncached operation with a warning.
    """

    def __init__(self, cache_dir: str | Path, enabled: bool = True):
        self.cache_dir = Path(cache_dir)
        self.enabled = enabled
        self._lock = threading.Lock()
        if enabled:
            try:
                self.cache_dir.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                log.warning("cache disabled, cannot create %s: %s", cache_dir, exc)
                self.enabled = False

    @staticmethod
    def cache_key(
        backend_id: str, request: BackendRequest, batch_index: int = 0
    ) -> str:
        payload = json.dumps(
            [
                backend_id,
                prompt_digest(request.prompt),
                quantize_temperature(request.temperature),
                request.n,
                request.max_tokens,
                list(request.stop) if request.stop else None,
                batch_index,
            ],
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.cache_dir / f"{key}.json"

    def get(self, key: str) -> Optional[BackendResponse]:
        if not self.enabled:
            return None
        try:
            raw = self._path(key).read_text(encoding="utf-8")
        except FileNotFoundError:
            return None
        except OSError as exc:
            log.warning("cache read failed for %s: %s", key, exc)
            return None
        data = json.loads(raw)
        return BackendResponse(
            completions=tuple(data["completions"]), usage=data.get("usage")
        )

    def put(self, key: str, response: BackendResponse) -> None:
        if not self.enabled:
            return
        data = {"completions": list(response.completions), "usage": response.usage}
        try:
            with self._lock:
                self._path(key).write_text(json.dumps(data), encoding="utf-8")
        except OSError as exc:
            log.warning("cache write failed for %s: %s", key, exc)


def cached_generate(
    cache: Optional[ResponseCache],
    backend: Backend,
    request: BackendRequest,
    batch_index: int = 0,
    transcript: Optional[Transcript] = None,
) -> BackendResponse:
    """generate() behind a cache; a missing or disabled cache passes through."""
    if cache is None or not cache.enabled:
        return generate(backend, request, transcript)
    key = ResponseCache.cache_key(backend.backend_id, request, batch_index)
    hit = cache.get(key)
    if hit is not None:
        return hit
    response = generate(backend, request, transcript)
    cache.put(key, response)
    return response
