"""Disk-backed, content-addressed store of deployed functions.

Layout under ``data_dir``::

    artifacts/<hash>.wasm         raw module as uploaded
    artifacts/<hash>.instr.wasm   fuel-instrumented module
    manifests/<name>.json         one manifest per function

Artifacts are shared between functions deployed from identical bytes.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import NameInvalid, NotFound, NotWasm, StorageFailure
from .executor import ResourceLimits, check_preopens
from .wasm import tools
from .wasm.binary import decode

NAME_RE = re.compile(r"[a-z0-9-]{1,64}")


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds").replace("+00:00", "Z")


@dataclass(frozen=True)
class FunctionManifest:
    name: str
    content_hash: str
    limits: ResourceLimits
    preopens: tuple[tuple[str, str], ...]
    created_at: str
    raw_size_bytes: int
    instrumented_size_bytes: int

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "content_hash": self.content_hash,
            "limits": self.limits.to_dict(),
            "preopens": [list(p) for p in self.preopens],
            "created_at": self.created_at,
            "raw_size_bytes": self.raw_size_bytes,
            "instrumented_size_bytes": self.instrumented_size_bytes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FunctionManifest":
        return cls(
            name=d["name"],
            content_hash=d["content_hash"],
            limits=ResourceLimits.from_dict(d["limits"]),
            preopens=tuple((h, g) for h, g in d["preopens"]),
            created_at=d["created_at"],
            raw_size_bytes=int(d["raw_size_bytes"]),
            instrumented_size_bytes=int(d["instrumented_size_bytes"]),
        )


def check_name(name: str) -> str:
    if not isinstance(name, str) or not NAME_RE.fullmatch(name):
        raise NameInvalid(f"function name {name!r} must match [a-z0-9-]{{1,64}}")
    return name


def _fsync_dir(path: Path) -> None:
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


def atomic_write(path: Path, data: bytes) -> None:
    """Write via temp file + rename so readers see either the old or the new file."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
        _fsync_dir(path.parent)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Registry:
    def __init__(self, data_dir: Path | str, schedule: tools.FuelSchedule = tools.DEFAULT_SCHEDULE):
        self.data_dir = Path(data_dir)
        self.schedule = schedule
        self.artifacts_dir = self.data_dir / "artifacts"
        self.manifests_dir = self.data_dir / "manifests"
        try:
            self.artifacts_dir.mkdir(parents=True, exist_ok=True)
            self.manifests_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageFailure(f"cannot create registry under {self.data_dir}: {exc}") from exc
        self._name_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        # guards artifact reference counting across deploy/remove
        self._store_lock = threading.Lock()

    def raw_path(self, content_hash: str) -> Path:
        return self.artifacts_dir / f"{content_hash}.wasm"

    def instrumented_path(self, content_hash: str) -> Path:
        return self.artifacts_dir / f"{content_hash}.instr.wasm"

    def manifest_path(self, name: str) -> Path:
        return self.manifests_dir / f"{name}.json"

    def deploy(self, name: str, wasm_bytes: bytes, limits: ResourceLimits | None = None,
               preopens=()) -> FunctionManifest:
        check_name(name)
        if not wasm_bytes:
            raise NotWasm("empty upload")
        limits = limits or ResourceLimits()
        preopens = tuple(check_preopens(preopens))
        artifact = tools.validate_and_instrument(wasm_bytes, self.schedule)
        with self._name_locks[name]:
            try:
                with self._store_lock:
                    self._store_artifact(artifact)
                    old = self._read_manifest(name)
                    manifest = FunctionManifest(
                        name=name,
                        content_hash=artifact.content_hash,
                        limits=limits,
                        preopens=preopens,
                        created_at=utc_now(),
                        raw_size_bytes=self.raw_path(artifact.content_hash).stat().st_size,
                        instrumented_size_bytes=self.instrumented_path(artifact.content_hash).stat().st_size,
                    )
                    atomic_write(self.manifest_path(name),
                                 json.dumps(manifest.to_dict(), indent=2).encode())
                    if old is not None and old.content_hash != artifact.content_hash:
                        self._collect(old.content_hash)
            except OSError as exc:
                raise StorageFailure(str(exc)) from exc
        return manifest

    def _store_artifact(self, artifact: tools.ModuleArtifact) -> None:
        for path, data in ((self.raw_path(artifact.content_hash), artifact.raw_bytes),
                           (self.instrumented_path(artifact.content_hash), artifact.instrumented_bytes)):
            if not path.exists() or path.stat().st_size != len(data):
                atomic_write(path, data)

    def _read_manifest(self, name: str) -> FunctionManifest | None:
        try:
            text = self.manifest_path(name).read_text()
        except FileNotFoundError:
            return None
        return FunctionManifest.from_dict(json.loads(text))

    def _collect(self, content_hash: str) -> None:
        if any(m.content_hash == content_hash for m in self.list()):
            return
        for path in (self.raw_path(content_hash), self.instrumented_path(content_hash)):
            path.unlink(missing_ok=True)

    def lookup(self, name: str) -> FunctionManifest:
        check_name(name)
        manifest = self._read_manifest(name)
        if manifest is None:
            raise NotFound(f"no function named {name!r}")
        return manifest

    def list(self) -> list[FunctionManifest]:
        out = []
        for path in sorted(self.manifests_dir.glob("*.json")):
            try:
                out.append(FunctionManifest.from_dict(json.loads(path.read_text())))
            except FileNotFoundError:
                continue
        return sorted(out, key=lambda m: m.name)

    def remove(self, name: str) -> None:
        check_name(name)
        with self._name_locks[name]:
            with self._store_lock:
                manifest = self._read_manifest(name)
                if manifest is None:
                    raise NotFound(f"no function named {name!r}")
                try:
                    self.manifest_path(name).unlink()
                    _fsync_dir(self.manifests_dir)
                    self._collect(manifest.content_hash)
                except OSError as exc:
                    raise StorageFailure(str(exc)) from exc

    def load_artifact(self, manifest: FunctionManifest) -> tools.ModuleArtifact:
        raw = self.raw_path(manifest.content_hash).read_bytes()
        instrumented = self.instrumented_path(manifest.content_hash).read_bytes()
        count = decode(raw).instruction_count()
        return tools.ModuleArtifact(raw, manifest.content_hash, count, instrumented)

    def footprint_report(self) -> list[tuple[str, int, int]]:
        """``(name, raw_size_bytes, instrumented_size_bytes)`` read from the files on disk."""
        rows = []
        for m in self.list():
            rows.append((m.name, self.raw_path(m.content_hash).stat().st_size,
                         self.instrumented_path(m.content_hash).stat().st_size))
        return rows
