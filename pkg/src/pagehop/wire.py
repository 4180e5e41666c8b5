"""Transports for the provider/scorer wire protocol.

One JSON request body, one JSON response body, regardless of carrier:
HTTP POST, a line-paired subprocess, or a recorded replay file. A response
containing {"error": ...} is a provider-side failure and raises the same
ProviderError as a transport failure, so callers degrade uniformly.
"""
from __future__ import annotations

import json
import queue
import subprocess
import threading
from pathlib import Path
from typing import Any

import requests


class ProviderError(RuntimeError):
    """Provider unreachable, timed out, or returned an error/garbage."""


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def _check_response(body: Any) -> dict:
    if not isinstance(body, dict):
        raise ProviderError(f"non-object response: {body!r}")
    if "error" in body:
        raise ProviderError(f"provider error: {body['error']}")
    return body


class HttpTransport:
    """POST each request body to a fixed endpoint."""

    def __init__(self, url: str, timeout: float = 10.0, retries: int = 2):
        self.url = url
        self.timeout = timeout
        self.retries = retries
        self.last_error: str | None = None

    def describe(self) -> str:
        return f"http:{self.url}"

    def call(self, request: dict) -> dict:
        last: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = requests.post(self.url, json=request, timeout=self.timeout)
                resp.raise_for_status()
                self.last_error = None
                return _check_response(resp.json())
            except ProviderError:
                raise
            except (requests.RequestException, ValueError) as exc:
                last = exc
        self.last_error = str(last)
        raise ProviderError(f"{self.describe()} unreachable after {self.retries + 1} attempts: {last}")


class SubprocessTransport:
    """One request per line on stdin, one response per line on stdout, strictly paired.

    The process starts lazily on the first call. A process that exits is not
    restarted: every later call fails with ProviderError (deterministically),
    and the caller decides whether to build a fresh transport.
    """

    def __init__(self, cmd: list[str], timeout: float = 10.0):
        self.cmd = list(cmd)
        self.timeout = timeout
        self.last_error: str | None = None
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._lock = threading.Lock()
        self._dead = False

    def describe(self) -> str:
        return f"subprocess:{' '.join(self.cmd)}"

    def _ensure_started(self) -> subprocess.Popen:
        if self._dead:
            raise ProviderError(f"{self.describe()} exited; transport is closed")
        if self._proc is None:
            self._proc = subprocess.Popen(
                self.cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1,
            )
            self._lines = queue.Queue()
            threading.Thread(target=self._pump, args=(self._proc,), daemon=True).start()
        return self._proc

    def _pump(self, proc: subprocess.Popen) -> None:
        assert proc.stdout is not None
        for line in proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF marker

    def call(self, request: dict) -> dict:
        with self._lock:  # strict pairing: one in-flight request at a time
            try:
                proc = self._ensure_started()
                assert proc.stdin is not None
                proc.stdin.write(canonical_json(request) + "\n")
                proc.stdin.flush()
                line = self._lines.get(timeout=self.timeout)
            except (OSError, queue.Empty) as exc:
                self.last_error = str(exc) or "timeout"
                raise ProviderError(f"{self.describe()} failed: {exc or 'timeout'}") from exc
            if line is None:
                self._dead = True
                self.last_error = "process exited"
                raise ProviderError(f"{self.describe()} exited before responding")
            try:
                body = json.loads(line)
            except json.JSONDecodeError as exc:
                self.last_error = f"bad json: {line!r}"
                raise ProviderError(f"{self.describe()} wrote invalid JSON: {line!r}") from exc
            self.last_error = None
            return _check_response(body)

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()  # type: ignore[union-attr]
                self._proc.wait(timeout=2)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()


class ReplayTransport:
    """Serve responses recorded as {"request", "response"} JSONL pairs.

    Lookup is by canonical request body; unrecorded requests fail like a
    dead provider so degraded-mode behavior is exercised too.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.last_error: str | None = None
        self._responses: dict[str, dict] = {}
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                self._responses[canonical_json(rec["request"])] = rec["response"]

    def describe(self) -> str:
        return f"replay:{self.path}"

    def call(self, request: dict) -> dict:
        key = canonical_json(request)
        if key not in self._responses:
            self.last_error = "request not recorded"
            raise ProviderError(f"{self.describe()}: no recorded response for {key}")
        self.last_error = None
        return _check_response(self._responses[key])


class CallableTransport:
    """In-process transport wrapping a request -> response callable."""

    def __init__(self, handler, name: str = "callable"):
        self._handler = handler
        self._name = name
        self.last_error: str | None = None

    def describe(self) -> str:
        return self._name

    def call(self, request: dict) -> dict:
        return _check_response(self._handler(request))
