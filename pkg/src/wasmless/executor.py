"""Sandboxed execution of instrumented modules under WASI.

Every invocation gets a fresh store, instance, linear memory and WASI context.
A warm start reuses only the compiled module, held in an LRU pool keyed by
content hash.  Fuel, memory and wall-clock limits are enforced per invocation.
"""

from __future__ import annotations

import enum
import logging
import os
import tempfile
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import PurePosixPath
from typing import Union

import wasmtime

from .errors import EngineReject
from .wasm import tools
from .wasm.binary import decode

log = logging.getLogger(__name__)

PAGE_SIZE = 65536
MAX_TIMEOUT_MS = 3_600_000
MAX_FUEL = 2**63 - 1


class StartMode(str, enum.Enum):
    COLD = "cold"
    WARM = "warm"


@dataclass(frozen=True)
class ResourceLimits:
    fuel_limit: int = 10**12
    memory_limit_pages: int = 16384
    wall_timeout_ms: int = 60_000

    def __post_init__(self):
        for name in ("fuel_limit", "memory_limit_pages", "wall_timeout_ms"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.fuel_limit > MAX_FUEL:
            raise ValueError("fuel_limit must fit in a signed 64-bit integer")
        if self.memory_limit_pages > tools.MAX_PAGES:
            raise ValueError("memory_limit_pages cannot exceed 65536 (4 GiB)")
        if self.wall_timeout_ms > MAX_TIMEOUT_MS:
            raise ValueError(f"wall_timeout_ms cannot exceed {MAX_TIMEOUT_MS}")

    def to_dict(self) -> dict:
        return {"fuel_limit": self.fuel_limit, "memory_limit_pages": self.memory_limit_pages,
                "wall_timeout_ms": self.wall_timeout_ms}

    @classmethod
    def from_dict(cls, d: dict) -> "ResourceLimits":
        return cls(int(d["fuel_limit"]), int(d["memory_limit_pages"]), int(d["wall_timeout_ms"]))


def check_preopens(preopens) -> list[tuple[str, str]]:
    """Normalise ``(host_dir, guest_path)`` pairs and enforce the path rules."""
    out = []
    for host, guest in preopens:
        gp = PurePosixPath(guest)
        if not gp.is_absolute():
            raise ValueError(f"guest path {guest!r} must be absolute")
        if ".." in gp.parts:
            raise ValueError(f"guest path {guest!r} must not contain '..'")
        out.append((os.fspath(host), str(gp)))
    guests = [PurePosixPath(g) for _, g in out]
    for i, a in enumerate(guests):
        for b in guests[i + 1:]:
            if a == b or a in b.parents or b in a.parents:
                raise ValueError(f"guest paths {str(a)!r} and {str(b)!r} overlap")
    return out


@dataclass(frozen=True)
class SandboxSpec:
    argv: tuple[str, ...] = ("main",)
    env: dict[str, str] = field(default_factory=dict)
    stdin_bytes: bytes = b""
    preopens: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "argv", tuple(self.argv))
        object.__setattr__(self, "preopens", tuple(check_preopens(self.preopens)))
        if not self.argv:
            raise ValueError("argv must contain at least the function name")


# -- exit statuses ---------------------------------------------------------

@dataclass(frozen=True)
class Exited:
    code: int

    @property
    def exit_class(self) -> str:
        # a nonzero exit is a failed function; the ledger has no separate class for it
        return "ok" if self.code == 0 else "trap"


@dataclass(frozen=True)
class Trapped:
    reason: str
    exit_class = "trap"


@dataclass(frozen=True)
class FuelExhausted:
    exit_class = "fuel_exhausted"


@dataclass(frozen=True)
class Timeout:
    exit_class = "timeout"


@dataclass(frozen=True)
class MemoryExceeded:
    exit_class = "memory_exceeded"


ExitStatus = Union[Exited, Trapped, FuelExhausted, Timeout, MemoryExceeded]


@dataclass(frozen=True)
class InvocationResult:
    exit_status: ExitStatus
    stdout: bytes
    stderr: bytes
    t_setup_us: int
    t_exec_us: int
    t_total_us: int
    fuel_consumed: int
    memory_peak_pages: int
    start_mode: StartMode

    @property
    def exit_class(self) -> str:
        return self.exit_status.exit_class

    @property
    def ok(self) -> bool:
        return self.exit_status == Exited(0)


# -- compiled modules and the pool -----------------------------------------

@dataclass(frozen=True)
class CompiledModule:
    artifact: tools.ModuleArtifact
    module: wasmtime.Module
    metered: bool
    initial_pages: int

    @property
    def content_hash(self) -> str:
        return self.artifact.content_hash

    @property
    def key(self) -> str:
        return self.artifact.pool_key


@dataclass(frozen=True)
class PoolStats:
    size: int
    hits: int
    misses: int


class ModulePool:
    """Thread-safe LRU of compiled modules keyed by content hash."""

    def __init__(self, capacity: int = 64):
        if capacity <= 0:
            raise ValueError("pool capacity must be positive")
        self.capacity = capacity
        self._items: OrderedDict[str, CompiledModule] = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: str) -> CompiledModule | None:
        with self._lock:
            item = self._items.get(key)
            if item is None:
                self.misses += 1
                return None
            self._items.move_to_end(key)
            self.hits += 1
            return item

    def put(self, item: CompiledModule) -> None:
        with self._lock:
            self._items[item.key] = item
            self._items.move_to_end(item.key)
            while len(self._items) > self.capacity:
                self._items.popitem(last=False)

    def discard(self, content_hash: str) -> None:
        """Drop every compiled form of the module with this raw content hash."""
        with self._lock:
            for key in [k for k, v in self._items.items() if v.content_hash == content_hash]:
                del self._items[key]

    def stats(self) -> PoolStats:
        with self._lock:
            return PoolStats(len(self._items), self.hits, self.misses)


class _EpochTicker:
    """Advances the engine epoch at a fixed period; stores trap at their deadline."""

    def __init__(self, engine: wasmtime.Engine, period_ms: float):
        self.engine = engine
        self.period_ms = period_ms
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="wasmless-epoch", daemon=True)
        self._thread.start()

    def _run(self):
        # epoch tracks wall-clock time, so oversleeping is caught up, never accumulated
        period_ns = int(self.period_ms * 1e6)
        t0 = time.perf_counter_ns()
        epoch = 0
        while not self._stop.wait(self.period_ms / 1000):
            target = (time.perf_counter_ns() - t0) // period_ns
            while epoch < target:
                self.engine.increment_epoch()
                epoch += 1

    def stop(self):
        self._stop.set()


def _us(ns: int) -> int:
    return ns // 1000


class Executor:
    def __init__(self, pool_capacity: int = 64, epoch_period_ms: float = 2.0):
        config = wasmtime.Config()
        config.epoch_interruption = True
        self.engine = wasmtime.Engine(config)
        self.pool = ModulePool(pool_capacity)
        self.epoch_period_ms = epoch_period_ms
        self._ticker = _EpochTicker(self.engine, epoch_period_ms)

    def close(self):
        self._ticker.stop()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def compile(self, artifact: tools.ModuleArtifact) -> CompiledModule:
        """Compile the instrumented bytes (raw bytes for an uninstrumented artifact)."""
        metered = artifact.instrumented
        data = artifact.instrumented_bytes if metered else artifact.raw_bytes
        try:
            module = wasmtime.Module(self.engine, data)
        except wasmtime.WasmtimeError as exc:
            raise EngineReject(str(exc).strip()) from exc
        mod = decode(artifact.raw_bytes)
        pages = mod.memories[0][0] if mod.memories else 0
        return CompiledModule(artifact, module, metered, pages)

    def pool_stats(self) -> PoolStats:
        return self.pool.stats()

    def execute(self, target: tools.ModuleArtifact | CompiledModule, spec: SandboxSpec,
                limits: ResourceLimits, mode: StartMode | str = StartMode.WARM) -> InvocationResult:
        mode = StartMode(mode)
        artifact = target.artifact if isinstance(target, CompiledModule) else target
        t0 = time.perf_counter_ns()
        if mode is StartMode.COLD:
            compiled = self.compile(artifact)
            self.pool.put(compiled)
            started = StartMode.COLD
        else:
            compiled = self.pool.get(artifact.pool_key)
            started = StartMode.WARM
            if compiled is None:
                compiled = target if isinstance(target, CompiledModule) else self.compile(artifact)
                self.pool.put(compiled)
                started = StartMode.COLD
        return self._run(compiled, spec, limits, started, t0)

    def _run(self, compiled: CompiledModule, spec: SandboxSpec, limits: ResourceLimits,
             started: StartMode, t0: int) -> InvocationResult:
        stdout = bytearray()
        stderr = bytearray()
        t_exec_ns = 0
        fuel_consumed = 0
        peak = compiled.initial_pages
        stdin_path = None

        def finish(status: ExitStatus) -> InvocationResult:
            t_end = time.perf_counter_ns()
            total = t_end - t0
            setup = total - t_exec_ns if t_exec_ns else total
            return InvocationResult(status, bytes(stdout), bytes(stderr), _us(setup), _us(t_exec_ns),
                                    _us(total), fuel_consumed, min(peak, limits.memory_limit_pages), started)

        if compiled.initial_pages > limits.memory_limit_pages:
            peak = 0
            return finish(MemoryExceeded())

        try:
            store = wasmtime.Store(self.engine)
            store.set_limits(memory_size=limits.memory_limit_pages * PAGE_SIZE)
            store.set_epoch_deadline(2**62)
            wasi = wasmtime.WasiConfig()
            wasi.argv = list(spec.argv)
            wasi.env = list(spec.env.items())
            wasi.stdout_custom = stdout.extend
            wasi.stderr_custom = stderr.extend
            if spec.stdin_bytes:
                fd, stdin_path = tempfile.mkstemp(prefix="wasmless-stdin-")
                with os.fdopen(fd, "wb") as fh:
                    fh.write(spec.stdin_bytes)
                wasi.stdin_file = stdin_path
            else:
                wasi.stdin_file = os.devnull
            for host, guest in spec.preopens:
                wasi.preopen_dir(host, guest)
            store.set_wasi(wasi)
            linker = wasmtime.Linker(self.engine)
            linker.define_wasi()
            try:
                instance = linker.instantiate(store, compiled.module)
            except wasmtime.WasmtimeError as exc:
                return finish(Trapped(f"instantiation failed: {_trap_reason(exc)}"))
            exports = instance.exports(store)
            entry = exports.get("_start")
            if not isinstance(entry, wasmtime.Func):
                return finish(Trapped("module has no _start export"))
            fuel = exports.get(tools.FUEL_EXPORT) if compiled.metered else None
            if fuel is not None:
                fuel.set_value(store, wasmtime.Val.i64(limits.fuel_limit))
                exports[tools.MEMORY_LIMIT_EXPORT].set_value(store, wasmtime.Val.i32(limits.memory_limit_pages))
            memory = exports.get("memory")

            status: ExitStatus = Exited(0)
            ticks = max(1, -(-limits.wall_timeout_ms // self.epoch_period_ms))
            store.set_epoch_deadline(int(ticks))
            t_exec0 = time.perf_counter_ns()
            try:
                start = exports.get(tools.START_EXPORT) if compiled.metered else None
                if isinstance(start, wasmtime.Func):
                    start(store)
                entry(store)
            except wasmtime.ExitTrap as exc:
                status = Exited(exc.code)
            except wasmtime.Trap as exc:
                status = self._classify(exc, exports, store, compiled.metered)
            except wasmtime.WasmtimeError as exc:
                status = Trapped(_trap_reason(exc))
            t_exec_ns = time.perf_counter_ns() - t_exec0

            if fuel is not None:
                remaining = fuel.value(store)
                fuel_consumed = limits.fuel_limit - remaining
                if isinstance(status, FuelExhausted):
                    fuel_consumed = limits.fuel_limit
            if isinstance(memory, wasmtime.Memory):
                peak = max(peak, memory.size(store))
            return finish(status)
        finally:
            if stdin_path:
                os.unlink(stdin_path)

    @staticmethod
    def _classify(exc: wasmtime.Trap, exports, store, metered: bool) -> ExitStatus:
        if metered:
            if exports[tools.EXHAUSTED_EXPORT].value(store):
                return FuelExhausted()
            if exports[tools.MEMORY_EXCEEDED_EXPORT].value(store):
                return MemoryExceeded()
        if exc.trap_code == wasmtime.TrapCode.INTERRUPT:
            return Timeout()
        return Trapped(_trap_reason(exc))


def _trap_reason(exc: Exception) -> str:
    text = (getattr(exc, "message", None) or str(exc)).strip()
    for line in text.splitlines():
        if "wasm trap:" in line:
            return line.split("wasm trap:", 1)[1].strip()
    return text.splitlines()[0] if text else type(exc).__name__
