"""Wire-protocol service: dispatch requests to the configured backends.

Carries the same bodies over HTTP POST or stdin/stdout line mode. Every
advertised op is loaded eagerly at startup; requests for anything else
come back as {"error": ...} instead of crashing the service.
"""
from __future__ import annotations

import argparse
import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import IO

from . import SidecarError, __version__
from .backends import build_backend
from .config import KNOWN_OPS, PROVIDER_OPS, ModelEndpointConfig


def canonical_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


class SidecarService:
    def __init__(self, config: ModelEndpointConfig):
        self.config = config
        self.backends = {}
        for op, spec in config.ops.items():
            options = {k: v for k, v in spec.items() if k != "backend"}
            self.backends[op] = build_backend(spec["backend"], options)

    @property
    def ops(self) -> list[str]:
        return sorted(self.backends)

    def handle(self, request: dict) -> dict:
        if not isinstance(request, dict):
            return {"error": "request must be a JSON object"}
        op = request.get("op")
        if op not in self.backends:
            return {"error": f"op {op!r} not served (available: {', '.join(self.ops)})"}
        try:
            return self._dispatch(op, request)
        except Exception as exc:  # backend fault -> protocol error, keep serving
            return {"error": f"{op} backend failed: {exc}"}

    def _dispatch(self, op: str, request: dict) -> dict:
        backend = self.backends[op]
        if op in ("entity_link", "event_link"):
            text = request.get("text", "")
            k = int(request.get("k", 10))
            return {"titles": backend.link(text, k)}
        if op == "decompose":
            return {"decompositions": backend.decompose(
                request.get("text", ""),
                int(request.get("sets", 5)),
                int(request.get("sentences_per_set", 3)),
            )}
        if op == "correct":
            groups = request.get("decompositions", [])
            if not isinstance(groups, list) or not all(
                    isinstance(g, list) and all(isinstance(s, str) for s in g) for g in groups):
                return {"error": "correct: 'decompositions' must be lists of strings"}
            return {"decompositions": backend.correct(groups)}
        if op == "score":
            raw = request.get("pairs", [])
            if not isinstance(raw, list) or not all(
                    isinstance(p, dict) and "q" in p and "c" in p for p in raw):
                return {"error": "score: 'pairs' must be objects with q and c"}
            pairs = [(p["q"], p["c"]) for p in raw]
            return {"scores": backend.score(pairs)}
        return {"error": f"op {op!r} has no dispatcher"}

    def serve_lines(self, stdin: IO[str], stdout: IO[str]) -> None:
        """One request per input line, one response per output line."""
        for line in stdin:
            if not line.strip():
                continue
            try:
                request = json.loads(line)
            except json.JSONDecodeError as exc:
                response = {"error": f"invalid JSON request: {exc}"}
            else:
                response = self.handle(request)
            stdout.write(canonical_json(response) + "\n")
            stdout.flush()


class _Handler(BaseHTTPRequestHandler):
    server_version = f"pagehop-sidecar/{__version__}"

    def _send(self, status: int, body: dict) -> None:
        payload = canonical_json(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self):  # noqa: N802
        service: SidecarService = self.server.service  # type: ignore[attr-defined]
        if self.path == "/health":
            self._send(200, {"status": "ok", "ops": service.ops})
        else:
            self._send(404, {"error": "not found"})

    def do_POST(self):  # noqa: N802
        service: SidecarService = self.server.service  # type: ignore[attr-defined]
        try:
            length = int(self.headers.get("Content-Length", "0"))
            request = json.loads(self.rfile.read(length) or b"{}")
        except (ValueError, json.JSONDecodeError) as exc:
            self._send(400, {"error": f"bad request: {exc}"})
            return
        self._send(200, service.handle(request))

    def log_message(self, fmt, *args):
        pass


def make_server(service: SidecarService, host: str = "127.0.0.1",
                port: int = 0) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), _Handler)
    server.service = service  # type: ignore[attr-defined]
    return server


def serve_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread


def _require_ops(config: ModelEndpointConfig, required) -> None:
    missing = [op for op in required if op not in config.ops]
    if missing:
        raise SidecarError(f"config is missing required ops: {', '.join(missing)}")


def serve_providers(config: ModelEndpointConfig, host: str = "127.0.0.1",
                    port: int = 0) -> ThreadingHTTPServer:
    """Title-generation service: link, decompose, and correct ops."""
    _require_ops(config, PROVIDER_OPS)
    return make_server(SidecarService(config), host, port)


def serve_scorer(config: ModelEndpointConfig, host: str = "127.0.0.1",
                 port: int = 0) -> ThreadingHTTPServer:
    """Pair-scoring service: positive-token probability per (q, c)."""
    _require_ops(config, ("score",))
    return make_server(SidecarService(config), host, port)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="pagehop-sidecar",
        description="Serve the provider/scorer wire protocols around configured model backends.",
    )
    parser.add_argument("--config", required=True, help="JSON config mapping ops to backends")
    parser.add_argument("--role", choices=("providers", "scorer", "all"), default="all")
    parser.add_argument("--stdio", action="store_true",
                        help="line mode on stdin/stdout instead of HTTP")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=9090)
    args = parser.parse_args(argv)
    try:
        config = ModelEndpointConfig.from_file(args.config)
        if args.role == "providers":
            _require_ops(config, PROVIDER_OPS)
        elif args.role == "scorer":
            _require_ops(config, ("score",))
        service = SidecarService(config)
    except SidecarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.stdio:
        service.serve_lines(sys.stdin, sys.stdout)
        return 0
    server = make_server(service, host=args.host, port=args.port)
    print(f"serving ops {service.ops} on http://{args.host}:{server.server_address[1]}",
          file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


if __name__ == "__main__":
    sys.exit(main())
