"""Usage records, the append-only ledger, and pay-as-you-use pricing.

Amounts are exact rationals (:class:`fractions.Fraction`) and are rendered
with nine fractional digits only at the interface.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import asdict, dataclass
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

from .errors import StorageFailure
from .executor import InvocationResult
from .registry import utc_now

EXIT_CLASSES = ("ok", "trap", "fuel_exhausted", "timeout", "memory_exceeded")


@dataclass(frozen=True)
class UsageRecord:
    invocation_id: str
    function_name: str
    timestamp: str
    fuel_consumed: int
    wall_time_us: int
    memory_peak_pages: int
    exit_class: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "UsageRecord":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


def to_fraction(value) -> Fraction:
    """Exact rational from an int, Fraction, Decimal or decimal string; floats go via repr."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, Decimal):
        return Fraction(value)
    return Fraction(str(value).strip())


@dataclass(frozen=True)
class PricingPolicy:
    fuel_rate: Fraction = Fraction(0)
    time_rate: Fraction = Fraction(0)
    memory_rate: Fraction = Fraction(0)
    version: int = 1

    def __post_init__(self):
        for name in ("fuel_rate", "time_rate", "memory_rate"):
            rate = to_fraction(getattr(self, name))
            if rate < 0:
                raise ValueError(f"{name} must be nonnegative")
            object.__setattr__(self, name, rate)

    def bumped(self, **rates) -> "PricingPolicy":
        """A new policy with some rates changed and the version incremented."""
        fields = {"fuel_rate": self.fuel_rate, "time_rate": self.time_rate, "memory_rate": self.memory_rate}
        fields.update(rates)
        return PricingPolicy(version=self.version + 1, **fields)


def price(record: UsageRecord, policy: PricingPolicy) -> Fraction:
    wall_ms = Fraction(record.wall_time_us, 1000)
    return (policy.fuel_rate * record.fuel_consumed
            + policy.time_rate * wall_ms
            + policy.memory_rate * record.memory_peak_pages * wall_ms)


def format_amount(amount: Fraction) -> str:
    scaled = round(amount * 10**9)  # exact, ties to even
    sign = "-" if scaled < 0 else ""
    whole, frac = divmod(abs(scaled), 10**9)
    return f"{sign}{whole}.{frac:09d}"


@dataclass(frozen=True)
class UsageAggregate:
    function_name: str
    record_count: int
    total_fuel: int
    total_wall_time_us: int
    max_memory_peak_pages: int
    billed_amount: Fraction

    def to_dict(self) -> dict:
        d = asdict(self)
        d["billed_amount"] = format_amount(self.billed_amount)
        return d

    def combine(self, other: "UsageAggregate") -> "UsageAggregate":
        if other.function_name != self.function_name:
            raise ValueError("cannot combine aggregates of different functions")
        return UsageAggregate(
            self.function_name,
            self.record_count + other.record_count,
            self.total_fuel + other.total_fuel,
            self.total_wall_time_us + other.total_wall_time_us,
            max(self.max_memory_peak_pages, other.max_memory_peak_pages),
            self.billed_amount + other.billed_amount,
        )


def fold(function_name: str, records, policy: PricingPolicy) -> UsageAggregate:
    """Aggregate by direct summation of per-record prices."""
    count = fuel = wall = peak = 0
    billed = Fraction(0)
    for r in records:
        if r.function_name != function_name:
            continue
        count += 1
        fuel += r.fuel_consumed
        wall += r.wall_time_us
        peak = max(peak, r.memory_peak_pages)
        billed += price(r, policy)
    return UsageAggregate(function_name, count, fuel, wall, peak, billed)


def read_ledger(path: Path | str) -> list[UsageRecord]:
    """Parse a ledger file; a torn final line (crash mid-append) is ignored."""
    records = []
    try:
        with open(path, "rb") as fh:
            lines = fh.read().split(b"\n")
    except FileNotFoundError:
        return records
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            records.append(UsageRecord.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError):
            if i == len(lines) - 1:
                break
            raise StorageFailure(f"corrupt ledger line {i + 1} in {path}")
    return records


@dataclass
class _Running:
    count: int = 0
    fuel: int = 0
    wall: int = 0
    peak: int = 0
    mem_wall: int = 0  # sum of memory_peak_pages * wall_time_us


class Ledger:
    """Append-only usage ledger with incrementally maintained per-function totals."""

    def __init__(self, data_dir: Path | str, fsync: bool = True):
        self.path = Path(data_dir) / "ledger" / "usage.log"
        self.fsync = fsync
        self._lock = threading.Lock()
        self._totals: dict[str, _Running] = {}
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc
        for rec in read_ledger(self.path):
            self._apply(rec)
        self._truncate_torn_tail()

    def _truncate_torn_tail(self):
        if not self.path.exists():
            return
        data = self.path.read_bytes()
        if data and not data.endswith(b"\n"):
            keep = data.rfind(b"\n") + 1
            with open(self.path, "r+b") as fh:
                fh.truncate(keep)

    def _apply(self, rec: UsageRecord) -> None:
        t = self._totals.setdefault(rec.function_name, _Running())
        t.count += 1
        t.fuel += rec.fuel_consumed
        t.wall += rec.wall_time_us
        t.peak = max(t.peak, rec.memory_peak_pages)
        t.mem_wall += rec.memory_peak_pages * rec.wall_time_us

    def append(self, rec: UsageRecord) -> UsageRecord:
        line = (rec.to_json() + "\n").encode()
        with self._lock:
            try:
                with open(self.path, "ab") as fh:
                    fh.write(line)
                    fh.flush()
                    if self.fsync:
                        os.fsync(fh.fileno())
            except OSError as exc:
                raise StorageFailure(f"ledger append failed: {exc}") from exc
            self._apply(rec)
        return rec

    def record(self, result: InvocationResult, function_name: str) -> UsageRecord:
        rec = UsageRecord(
            invocation_id=uuid.uuid4().hex,
            function_name=function_name,
            timestamp=utc_now(),
            fuel_consumed=result.fuel_consumed,
            wall_time_us=result.t_total_us,
            memory_peak_pages=result.memory_peak_pages,
            exit_class=result.exit_class,
        )
        return self.append(rec)

    def aggregate(self, function_name: str, policy: PricingPolicy) -> UsageAggregate:
        with self._lock:
            t = self._totals.get(function_name, _Running())
            billed = (policy.fuel_rate * t.fuel
                      + policy.time_rate * Fraction(t.wall, 1000)
                      + policy.memory_rate * Fraction(t.mem_wall, 1000))
            return UsageAggregate(function_name, t.count, t.fuel, t.wall, t.peak, billed)

    def records(self) -> list[UsageRecord]:
        with self._lock:
            return read_ledger(self.path)
