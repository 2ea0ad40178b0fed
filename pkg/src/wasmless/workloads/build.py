"""Compile the C guests to wasm32-wasi (via zig's clang) and to native executables."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import subprocess
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..errors import GuestMissing
from . import FIXTURES, WORKLOADS

log = logging.getLogger(__name__)

WASM_FLAGS = ["-target", "wasm32-wasi", "-mcpu=mvp", "-O2", "-s", "-Wl,-z,stack-size=1048576"]
NATIVE_FLAGS = ["-O2", "-ffp-contract=off"]
STAMP = "build.json"


def default_guest_dir() -> Path:
    env = os.environ.get("WASMLESS_GUEST_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "wasmless" / "guests"


def source_dir() -> Path:
    return Path(str(resources.files(__package__) / "guests"))


def _sources() -> list[str]:
    names = [w.source for w in WORKLOADS.values()] + [f"{f}.c" for f in FIXTURES]
    return names


def _fingerprint() -> str:
    h = hashlib.sha256()
    h.update(" ".join(WASM_FLAGS + NATIVE_FLAGS).encode())
    for name in _sources():
        h.update(name.encode())
        h.update((source_dir() / name).read_bytes())
    return h.hexdigest()


def _native_cc() -> list[str]:
    for cc in (os.environ.get("CC"), "cc", "clang", "gcc"):
        if cc and shutil.which(cc):
            return [cc]
    return [sys.executable, "-m", "ziglang", "cc"]


def _run(cmd: list[str]) -> None:
    log.info("%s", " ".join(cmd))
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"command failed: {' '.join(cmd)}\n{proc.stderr}")


@dataclass(frozen=True)
class GuestSet:
    """Paths to the built guests, by source stem (``nbody``, ``cat_sync``...)."""

    root: Path

    def wasm(self, name: str) -> Path:
        return self._existing(self.root / "wasm" / f"{_stem(name)}.wasm")

    def native(self, name: str) -> Path:
        return self._existing(self.root / "native" / _stem(name))

    def _existing(self, path: Path) -> Path:
        if not path.exists():
            raise GuestMissing(f"{path} has not been built; run `bench build` first")
        return path


def _stem(name: str) -> str:
    if name in WORKLOADS:
        return WORKLOADS[name].binary_name
    return name.replace("-", "_")


def build_guests(out_dir: Path | str | None = None, force: bool = False) -> GuestSet:
    out = Path(out_dir) if out_dir else default_guest_dir()
    fp = _fingerprint()
    stamp = out / STAMP
    if not force and stamp.exists():
        try:
            if json.loads(stamp.read_text()).get("fingerprint") == fp:
                return GuestSet(out)
        except ValueError:
            pass
    (out / "wasm").mkdir(parents=True, exist_ok=True)
    (out / "native").mkdir(parents=True, exist_ok=True)
    zig = [sys.executable, "-m", "ziglang", "cc"]
    native_cc = _native_cc()
    for name in _sources():
        src = source_dir() / name
        stem = name.removesuffix(".c")
        _run(zig + WASM_FLAGS + [str(src), "-o", str(out / "wasm" / f"{stem}.wasm")])
        _run(native_cc + NATIVE_FLAGS + [str(src), "-o", str(out / "native" / stem), "-lm"])
    for leftover in (out / "wasm").glob("*.o"):
        leftover.unlink()
    stamp.write_text(json.dumps({"fingerprint": fp, "native_cc": native_cc[0]}))
    return GuestSet(out)


def existing_guests(out_dir: Path | str | None = None) -> GuestSet:
    """Return the guest set at ``out_dir`` without building; GuestMissing if absent."""
    out = Path(out_dir) if out_dir else default_guest_dir()
    if not (out / STAMP).exists():
        raise GuestMissing(f"no guests built under {out}; run `bench build` first")
    return GuestSet(out)
