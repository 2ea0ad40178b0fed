"""Run workloads N times per backend and verify every run's output."""

from __future__ import annotations

import hashlib
import logging
import os
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

from ..errors import BackendUnavailable, GuestMissing
from ..executor import Executor, ResourceLimits, SandboxSpec, StartMode
from ..registry import Registry
from ..wasm import tools
from ..workloads import WORKLOADS, WorkloadSpec, reference
from ..workloads.build import GuestSet, existing_guests
from .stats import BenchmarkSample

log = logging.getLogger(__name__)

CAT_SYNC_SIZE = 1 << 20
CAT_SYNC_FILE = "cat-sync.dat"
GUEST_DATA_DIR = "/data"
CONTAINER_IMAGE = os.environ.get("WASMLESS_CONTAINER_IMAGE", "wasmless-guests:latest")
CONTAINER_CLIS = ("docker", "podman")

# sha256 of stdout at the desk and full-scale parameters; the full-scale values for
# nbody, fannkuch-redux and binary-trees equal the published Benchmarks Game outputs
EXPECTED_SHA256 = {
    ("nbody", 1_000_000): "3fb938822f2b87322baee13eea59620bab076cca553f7e01214dbc674bd09387",
    ("fannkuch-redux", 9): "8240a83dc671a1906b1f4ce51a46866362bec862c62128f4429ec1f3e7bf1bb8",
    ("mandelbrot", 1_000): "66b74292639771ac7a6d9307c2a1985b0be22b09f28159cc142f0af988532789",
    ("binary-trees", 14): "b0af3a8c1c6ccf57c7f99716bffd9c6f7365dac78fc307ef6c1903ba1a1b87a3",
    ("nbody", 50_000_000): "3e6c9ef9d26cfe312a4cd8e1b81b3f671b88fbce84de543e8c23c206a942504d",
    ("fannkuch-redux", 12): "4265a65135c506a68d90d6474003fb9030b7ee244a06c046bd89b3932a28ce20",
    ("mandelbrot", 15_000): "11918a84ee4f90acc2098a696f66900e2b57bf3c9c955c39db96e6ce5bff4bac",
    ("binary-trees", 21): "341de11a51feab3d8122b4b5d6a68b038a2d14434aa9bc2372f39300bf5f48e1",
}

# largest parameters at which the pure-Python references are quick enough to run inline
_REFERENCE_CUTOFF = {"nbody": 20_000, "fannkuch-redux": 8, "mandelbrot": 256, "binary-trees": 10**9}

HARNESS_LIMITS = ResourceLimits(fuel_limit=2**62, memory_limit_pages=65536, wall_timeout_ms=3_600_000)


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def expected_digest(workload: str, n: int | None, guests: GuestSet | None = None) -> str:
    """Digest of the correct stdout for ``workload`` at parameter ``n``."""
    if workload == "nop":
        return sha256(reference.nop())
    if workload == "cat-sync":
        return sha256(reference.cat_sync(CAT_SYNC_SIZE))
    if (workload, n) in EXPECTED_SHA256:
        return EXPECTED_SHA256[(workload, n)]
    if n <= _REFERENCE_CUTOFF[workload]:
        return sha256(reference.COMPUTE[workload](n))
    if guests is None:
        raise GuestMissing(f"no frozen output for {workload}({n}) and no native build to derive it from")
    # otherwise the native build is the reference
    proc = subprocess.run([str(guests.native(workload)), str(n)], capture_output=True)
    if proc.returncode != 0:
        raise RuntimeError(f"native reference run of {workload}({n}) failed: {proc.stderr!r}")
    return sha256(proc.stdout)


@dataclass
class Workspace:
    """Scratch directory holding the cat-sync input file."""

    root: Path

    @classmethod
    def create(cls) -> "Workspace":
        root = Path(tempfile.mkdtemp(prefix="wasmless-bench-"))
        data = bytes(range(256)) * (CAT_SYNC_SIZE // 256)
        (root / CAT_SYNC_FILE).write_bytes(data)
        return cls(root)

    def cleanup(self):
        shutil.rmtree(self.root, ignore_errors=True)


def _args(spec: WorkloadSpec, n: int | None, data_path: str) -> list[str]:
    if spec.id == "cat-sync":
        return [data_path]
    if spec.id == "nop":
        return []
    return [str(n)]


def container_cli() -> str:
    for cli in CONTAINER_CLIS:
        path = shutil.which(cli)
        if path:
            return path
    raise BackendUnavailable(f"no container CLI ({' or '.join(CONTAINER_CLIS)}) on PATH")


DOCKERFILE = """\
FROM scratch
COPY native/ /guests/
COPY cat-sync.dat /data/cat-sync.dat
"""


def build_container_image(guests: GuestSet, image: str = CONTAINER_IMAGE) -> None:
    """Build the container baseline image (static native guests on an empty base)."""
    cli = container_cli()
    ctx = Path(tempfile.mkdtemp(prefix="wasmless-image-"))
    try:
        shutil.copytree(guests.root / "native", ctx / "native")
        ws = Workspace.create()
        shutil.copy(ws.root / CAT_SYNC_FILE, ctx / CAT_SYNC_FILE)
        ws.cleanup()
        (ctx / "Dockerfile").write_text(DOCKERFILE)
        subprocess.run([cli, "build", "-t", image, str(ctx)], check=True)
    finally:
        shutil.rmtree(ctx, ignore_errors=True)


class Harness:
    def __init__(self, guests: GuestSet | None = None, executor: Executor | None = None):
        self.guests = guests if guests is not None else existing_guests()
        self._executor = executor
        self._own_executor = executor is None
        self.workspace = Workspace.create()
        self._artifacts: dict[str, bytes] = {}

    def close(self):
        self.workspace.cleanup()
        if self._own_executor and self._executor is not None:
            self._executor.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def executor(self) -> Executor:
        if self._executor is None:
            self._executor = Executor()
        return self._executor

    def run(self, workload: str, backend: str, runs: int = 50, scale: str = "desk",
            n: int | None = None) -> list[BenchmarkSample]:
        spec = WORKLOADS[workload]
        if runs < 1:
            raise ValueError("runs must be at least 1")
        n = n if n is not None else spec.scaled(scale)
        runner = {
            "native": self._native,
            "wasm-cold": self._wasm_cold,
            "wasm-warm": self._wasm_warm,
            "container": self._container,
        }[backend]
        expected = expected_digest(workload, n, self.guests)
        log.info("%s/%s n=%s runs=%d", workload, backend, n, runs)
        return runner(spec, n, runs, expected)

    def _sample(self, spec, backend, i, n, elapsed_ns, ok, reason=""):
        return BenchmarkSample(spec.id, backend, i, max(elapsed_ns, 1) / 1e9, ok, n, reason)

    @staticmethod
    def _verdict(code: int, stdout: bytes, expected: str) -> tuple[bool, str]:
        if code != 0:
            return False, f"exit status {code}"
        if sha256(stdout) != expected:
            return False, "output mismatch"
        return True, ""

    def _native(self, spec, n, runs, expected):
        exe = str(self.guests.native(spec.id))
        argv = [exe, *_args(spec, n, str(self.workspace.root / CAT_SYNC_FILE))]
        samples = []
        for i in range(runs):
            t0 = time.perf_counter_ns()
            proc = subprocess.run(argv, capture_output=True)
            elapsed = time.perf_counter_ns() - t0
            ok, reason = self._verdict(proc.returncode, proc.stdout, expected)
            samples.append(self._sample(spec, "native", i, n, elapsed, ok, reason))
        return samples

    def _container(self, spec, n, runs, expected):
        cli = container_cli()
        argv = [cli, "run", "--rm", CONTAINER_IMAGE, f"/guests/{spec.binary_name}",
                *_args(spec, n, f"{GUEST_DATA_DIR}/{CAT_SYNC_FILE}")]
        samples = []
        for i in range(runs):
            t0 = time.perf_counter_ns()
            proc = subprocess.run(argv, capture_output=True)
            elapsed = time.perf_counter_ns() - t0
            ok, reason = self._verdict(proc.returncode, proc.stdout, expected)
            samples.append(self._sample(spec, "container", i, n, elapsed, ok, reason))
        return samples

    def _raw(self, spec) -> bytes:
        if spec.id not in self._artifacts:
            self._artifacts[spec.id] = self.guests.wasm(spec.id).read_bytes()
        return self._artifacts[spec.id]

    def _sandbox(self, spec, n) -> SandboxSpec:
        preopens = [(str(self.workspace.root), GUEST_DATA_DIR)] if spec.needs_preopen else []
        return SandboxSpec(argv=[spec.id, *_args(spec, n, f"{GUEST_DATA_DIR}/{CAT_SYNC_FILE}")],
                           preopens=preopens)

    def _wasm_result(self, spec, backend, i, n, elapsed, result, expected):
        code = getattr(result.exit_status, "code", None)
        if code is None:
            return self._sample(spec, backend, i, n, elapsed, False, result.exit_class)
        ok, reason = self._verdict(code, result.stdout, expected)
        return self._sample(spec, backend, i, n, elapsed, ok, reason)

    def _wasm_cold(self, spec, n, runs, expected):
        raw = self._raw(spec)
        sandbox = self._sandbox(spec, n)
        samples = []
        for i in range(runs):
            t0 = time.perf_counter_ns()
            artifact = tools.validate_and_instrument(raw)
            result = self.executor.execute(artifact, sandbox, HARNESS_LIMITS, StartMode.COLD)
            elapsed = time.perf_counter_ns() - t0
            samples.append(self._wasm_result(spec, "wasm-cold", i, n, elapsed, result, expected))
        return samples

    def _wasm_warm(self, spec, n, runs, expected):
        artifact = tools.validate_and_instrument(self._raw(spec))
        sandbox = self._sandbox(spec, n)
        self.executor.execute(artifact, sandbox, HARNESS_LIMITS, StartMode.WARM)  # prime the pool
        samples = []
        for i in range(runs):
            t0 = time.perf_counter_ns()
            result = self.executor.execute(artifact, sandbox, HARNESS_LIMITS, StartMode.WARM)
            elapsed = time.perf_counter_ns() - t0
            samples.append(self._wasm_result(spec, "wasm-warm", i, n, elapsed, result, expected))
        return samples


def bench_run(workload: str, backend: str, runs: int = 50, scale: str = "desk",
              guests: GuestSet | None = None, n: int | None = None) -> list[BenchmarkSample]:
    with Harness(guests) as h:
        return h.run(workload, backend, runs, scale, n)


@dataclass(frozen=True)
class SizeRow:
    workload: str
    wasm_raw_bytes: int
    wasm_instrumented_bytes: int
    native_bytes: int


def sizes(guests: GuestSet | None = None, data_dir: Path | str | None = None) -> list[SizeRow]:
    """Deploy every guest into a registry and report on-disk artifact sizes."""
    guests = guests if guests is not None else existing_guests()
    tmp = None
    if data_dir is None:
        tmp = tempfile.mkdtemp(prefix="wasmless-sizes-")
        data_dir = tmp
    try:
        registry = Registry(data_dir)
        for wid in WORKLOADS:
            registry.deploy(wid, guests.wasm(wid).read_bytes())
        footprint = {name: (raw, instr) for name, raw, instr in registry.footprint_report()}
        return [SizeRow(wid, *footprint[wid], guests.native(wid).stat().st_size) for wid in WORKLOADS]
    finally:
        if tmp:
            shutil.rmtree(tmp, ignore_errors=True)


def format_sizes(rows: list[SizeRow]) -> str:
    header = ("workload", "wasm_raw_bytes", "wasm_instrumented_bytes", "native_bytes")
    body = [(r.workload, str(r.wasm_raw_bytes), str(r.wasm_instrumented_bytes), str(r.native_bytes)) for r in rows]
    total = ("total", str(sum(r.wasm_raw_bytes for r in rows)),
             str(sum(r.wasm_instrumented_bytes for r in rows)), str(sum(r.native_bytes for r in rows)))
    table = [header, *body, total]
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for row in table:
        lines.append("  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))))
    return "\n".join(lines) + "\n"
