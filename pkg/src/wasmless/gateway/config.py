"""Gateway configuration: defaults, a TOML file, then ``WASMLESS_*`` environment overrides.

Example file::

    listen_addr = "127.0.0.1:8080"
    data_dir = "/var/lib/wasmless"
    pool_capacity = 64
    fsync_ledger = true

    [default_limits]
    fuel_limit = 1000000000000
    memory_limit_pages = 16384
    wall_timeout_ms = 60000

    [pricing]
    fuel_rate = "2e-9"      # strings keep rates exact
    time_rate = "0"
    memory_rate = "0"
    version = 1

Nested fields are overridden with upper-snake names, e.g.
``WASMLESS_DEFAULT_LIMITS_FUEL_LIMIT`` or ``WASMLESS_PRICING_FUEL_RATE``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..errors import ConfigInvalid
from ..executor import ResourceLimits
from ..metering import PricingPolicy

ENV_PREFIX = "WASMLESS_"

_LIMIT_FIELDS = ("fuel_limit", "memory_limit_pages", "wall_timeout_ms")
_PRICING_FIELDS = ("fuel_rate", "time_rate", "memory_rate", "version")


@dataclass(frozen=True)
class GatewayConfig:
    listen_addr: str = "127.0.0.1:8080"
    data_dir: Path = Path("./wasmless-data")
    default_limits: ResourceLimits = field(default_factory=ResourceLimits)
    pool_capacity: int = 64
    pricing: PricingPolicy = field(default_factory=PricingPolicy)
    fsync_ledger: bool = True

    @property
    def host_port(self) -> tuple[str, int]:
        return parse_listen_addr(self.listen_addr)


def parse_listen_addr(addr: str) -> tuple[str, int]:
    host, sep, port = str(addr).rpartition(":")
    if not sep or not port.isdigit() or not 0 <= int(port) <= 65535:
        raise ConfigInvalid(f"listen_addr {addr!r} is not host:port")
    return host.strip("[]") or "0.0.0.0", int(port)


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigInvalid(f"not a boolean: {value!r}")


def _flatten(raw: dict) -> dict[str, object]:
    flat = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                flat[f"{key}.{sub}"] = v
        else:
            flat[key] = value
    return flat


def load_config(path: Path | str | None = None, env: dict | None = None, **overrides) -> GatewayConfig:
    env = os.environ if env is None else env
    flat: dict[str, object] = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                flat.update(_flatten(tomllib.load(fh)))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc

    known = ["listen_addr", "data_dir", "pool_capacity", "fsync_ledger"]
    known += [f"default_limits.{f}" for f in _LIMIT_FIELDS]
    known += [f"pricing.{f}" for f in _PRICING_FIELDS]
    unknown = set(flat) - set(known)
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
    for key in known:
        env_key = ENV_PREFIX + key.replace(".", "_").upper()
        if env_key in env:
            flat[key] = env[env_key]
    flat.update({k.replace("__", "."): v for k, v in overrides.items()})

    defaults = GatewayConfig()
    try:
        limits = ResourceLimits(**{
            f: int(flat.get(f"default_limits.{f}", getattr(defaults.default_limits, f))) for f in _LIMIT_FIELDS})
        pricing = PricingPolicy(**{
            f: flat.get(f"pricing.{f}", getattr(defaults.pricing, f)) for f in _PRICING_FIELDS[:3]},
            version=int(flat.get("pricing.version", defaults.pricing.version)))
        config = GatewayConfig(
            listen_addr=str(flat.get("listen_addr", defaults.listen_addr)),
            data_dir=Path(flat.get("data_dir", defaults.data_dir)),
            default_limits=limits,
            pool_capacity=int(flat.get("pool_capacity", defaults.pool_capacity)),
            pricing=pricing,
            fsync_ledger=_parse_bool(flat.get("fsync_ledger", defaults.fsync_ledger)),
        )
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigInvalid(str(exc)) from exc
    check_config(config)
    return config


def check_config(config: GatewayConfig) -> None:
    parse_listen_addr(config.listen_addr)
    if config.pool_capacity <= 0:
        raise ConfigInvalid("pool_capacity must be positive")
    try:
        config.data_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigInvalid(f"data_dir {config.data_dir} cannot be created: {exc}") from exc
    if not os.access(config.data_dir, os.W_OK):
        raise ConfigInvalid(f"data_dir {config.data_dir} is not writable")
