"""HTTP surface: deploy, invoke (cold or warm), list, remove, and usage queries."""

from __future__ import annotations

import json
import logging
import signal
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, unquote, urlsplit

from ..errors import (
    BindFailure,
    MalformedModule,
    NameInvalid,
    NotFound,
    NotWasm,
    StorageFailure,
    UnsupportedFeature,
    WasmlessError,
)
from ..executor import Executor, ResourceLimits, SandboxSpec, StartMode
from ..metering import Ledger, format_amount, price
from ..registry import Registry
from ..wasm.tools import ModuleArtifact
from .config import GatewayConfig, check_config

log = logging.getLogger(__name__)


class Gateway:
    """Ties registry, executor and ledger together; independent of HTTP."""

    def __init__(self, config: GatewayConfig):
        check_config(config)
        self.config = config
        self.registry = Registry(config.data_dir)
        self.ledger = Ledger(config.data_dir, fsync=config.fsync_ledger)
        self.executor = Executor(pool_capacity=config.pool_capacity)
        self._artifacts: dict[str, ModuleArtifact] = {}
        self._artifacts_lock = threading.Lock()

    def close(self):
        self.executor.close()

    def deploy(self, name: str, body: bytes, limits: ResourceLimits | None, preopens):
        manifest = self.registry.deploy(name, body, limits or self.config.default_limits, preopens)
        return manifest

    def artifact(self, manifest) -> ModuleArtifact:
        with self._artifacts_lock:
            art = self._artifacts.get(manifest.content_hash)
        if art is None:
            art = self.registry.load_artifact(manifest)
            with self._artifacts_lock:
                self._artifacts[manifest.content_hash] = art
        return art

    def invoke(self, name: str, args: list[str], stdin: bytes, mode: StartMode):
        manifest = self.registry.lookup(name)
        artifact = self.artifact(manifest)
        spec = SandboxSpec(argv=[name, *args], stdin_bytes=stdin, preopens=manifest.preopens)
        result = self.executor.execute(artifact, spec, manifest.limits, mode)
        record = self.ledger.record(result, name)
        return result, record

    def usage(self, name: str):
        self.registry.lookup(name)
        return self.ledger.aggregate(name, self.config.pricing)

    def remove(self, name: str):
        manifest = self.registry.lookup(name)
        self.registry.remove(name)
        self.executor.pool.discard(manifest.content_hash)


_ERROR_STATUS = [
    (NameInvalid, HTTPStatus.BAD_REQUEST),
    (NotFound, HTTPStatus.NOT_FOUND),
    (NotWasm, HTTPStatus.UNPROCESSABLE_ENTITY),
    (MalformedModule, HTTPStatus.UNPROCESSABLE_ENTITY),
    (UnsupportedFeature, HTTPStatus.UNPROCESSABLE_ENTITY),
    (StorageFailure, HTTPStatus.INTERNAL_SERVER_ERROR),
]


class _BadRequest(Exception):
    pass


class Handler(BaseHTTPRequestHandler):
    server_version = "wasmless/0.1"
    protocol_version = "HTTP/1.1"

    @property
    def gateway(self) -> Gateway:
        return self.server.gateway

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    # -- plumbing --

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _send(self, status: int, body: bytes = b"", content_type: str = "application/octet-stream",
              headers: dict | None = None):
        self.send_response(status)
        if status != HTTPStatus.NO_CONTENT:
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
        for k, v in (headers or {}).items():
            self.send_header(k, v)
        self.end_headers()
        if body and status != HTTPStatus.NO_CONTENT:
            self.wfile.write(body)

    def _json(self, status: int, payload):
        self._send(status, json.dumps(payload).encode(), "application/json")

    def _dispatch(self, method: str):
        url = urlsplit(self.path)
        parts = [unquote(p) for p in url.path.split("/") if p]
        query = parse_qs(url.query, keep_blank_values=True)
        try:
            body = self._body()
            self._route(method, parts, query, body)
        except _BadRequest as exc:
            self._json(HTTPStatus.BAD_REQUEST, {"error": str(exc)})
        except WasmlessError as exc:
            for cls, status in _ERROR_STATUS:
                if isinstance(exc, cls):
                    break
            else:
                status = HTTPStatus.INTERNAL_SERVER_ERROR
            self._json(status, {"error": str(exc), "kind": type(exc).__name__})
        except Exception as exc:  # host fault
            log.exception("unhandled error")
            self._json(HTTPStatus.INTERNAL_SERVER_ERROR, {"error": str(exc), "kind": type(exc).__name__})

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_DELETE(self):
        self._dispatch("DELETE")

    # -- routes --

    def _route(self, method, parts, query, body):
        if parts[:1] != ["v1"]:
            return self._json(HTTPStatus.NOT_FOUND, {"error": "not found"})
        rest = parts[1:]
        if method == "GET" and rest == ["healthz"]:
            return self._send(HTTPStatus.OK, b"ok", "text/plain")
        if rest == ["functions"]:
            if method == "POST":
                return self._deploy(query, body)
            if method == "GET":
                return self._json(HTTPStatus.OK, [m.to_dict() for m in self.gateway.registry.list()])
        if len(rest) == 2 and rest[0] == "functions":
            if method == "DELETE":
                self.gateway.remove(rest[1])
                return self._send(HTTPStatus.NO_CONTENT)
            if method == "GET":
                return self._json(HTTPStatus.OK, self.gateway.registry.lookup(rest[1]).to_dict())
        if len(rest) == 3 and rest[0] == "functions":
            if method == "POST" and rest[2] == "invoke":
                return self._invoke(rest[1], query, body)
            if method == "GET" and rest[2] == "usage":
                return self._json(HTTPStatus.OK, self.gateway.usage(rest[1]).to_dict())
        return self._json(HTTPStatus.NOT_FOUND, {"error": "not found"})

    def _deploy(self, query, body):
        names = query.get("name")
        if not names:
            raise NameInvalid("missing ?name=")
        defaults = self.gateway.config.default_limits.to_dict()
        try:
            for key in defaults:
                if key in query:
                    defaults[key] = int(query[key][-1])
            limits = ResourceLimits(**defaults)
            preopens = []
            for item in query.get("preopen", []):
                host, sep, guest = item.rpartition(":")
                if not sep:
                    raise ValueError(f"preopen {item!r} must be host_dir:guest_path")
                preopens.append((host, guest))
            manifest = self.gateway.deploy(names[-1], body, limits, preopens)
        except ValueError as exc:
            raise _BadRequest(str(exc)) from exc
        self._json(HTTPStatus.CREATED, manifest.to_dict())

    def _invoke(self, name, query, body):
        try:
            mode = StartMode(query.get("mode", ["warm"])[-1])
        except ValueError:
            raise _BadRequest("mode must be cold or warm") from None
        result, record = self.gateway.invoke(name, query.get("arg", []), body, mode)
        headers = {
            "X-Exit-Class": record.exit_class,
            "X-Fuel-Consumed": str(record.fuel_consumed),
            "X-Wall-Time-Us": str(record.wall_time_us),
            "X-Setup-Time-Us": str(result.t_setup_us),
            "X-Billed-Amount": format_amount(price(record, self.gateway.config.pricing)),
            "X-Invocation-Id": record.invocation_id,
            "X-Start-Mode": result.start_mode.value,
        }
        if hasattr(result.exit_status, "code"):
            headers["X-Exit-Code"] = str(result.exit_status.code)
        self._send(HTTPStatus.OK, result.stdout, headers=headers)


class GatewayServer(ThreadingHTTPServer):
    daemon_threads = False     # in-flight requests are joined on close
    block_on_close = True
    allow_reuse_address = True

    def __init__(self, gateway: Gateway):
        self.gateway = gateway
        try:
            super().__init__(gateway.config.host_port, Handler)
        except OSError as exc:
            gateway.close()
            raise BindFailure(f"cannot bind {gateway.config.listen_addr}: {exc}") from exc

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def server_close(self):
        super().server_close()
        self.gateway.close()


def make_server(config: GatewayConfig) -> GatewayServer:
    return GatewayServer(Gateway(config))


def serve(config: GatewayConfig, ready: threading.Event | None = None) -> None:
    """Run until SIGTERM/SIGINT, then finish in-flight requests and return."""
    server = make_server(config)

    def stop(signum, frame):
        log.info("signal %s: draining", signum)
        threading.Thread(target=server.shutdown, daemon=True).start()

    previous = {s: signal.signal(s, stop) for s in (signal.SIGTERM, signal.SIGINT)}
    log.info("listening on %s", server.url)
    if ready is not None:
        ready.set()
    try:
        server.serve_forever()
    finally:
        server.server_close()
        for s, handler in previous.items():
            signal.signal(s, handler)
