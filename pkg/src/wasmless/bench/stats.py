from __future__ import annotations

import math
import statistics
from collections import OrderedDict
from dataclasses import asdict, dataclass

from ..errors import NoSamples

BACKENDS = ("native", "wasm-cold", "wasm-warm", "container")


@dataclass(frozen=True)
class BenchmarkSample:
    workload: str
    backend: str
    run_index: int
    wall_time_s: float
    ok: bool
    param: int | None = None
    reason: str = ""

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if not self.wall_time_s > 0:
            raise ValueError("wall_time_s must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkSample":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass(frozen=True)
class BenchmarkSummary:
    workload: str
    backend: str
    n_runs: int
    n_failed: int
    mean_s: float
    stddev_s: float
    min_s: float
    max_s: float

    @property
    def failed(self) -> bool:
        return self.n_runs == 0


def summarize(samples) -> BenchmarkSummary:
    """Mean and sample (N-1) standard deviation over the successful samples."""
    samples = list(samples)
    if not samples:
        raise NoSamples("no samples to summarize")
    good = [s.wall_time_s for s in samples if s.ok]
    n_failed = len(samples) - len(good)
    if not good:
        raise NoSamples(f"all {n_failed} samples for {samples[0].workload}/{samples[0].backend} failed")
    mean = statistics.fmean(good)
    sd = statistics.stdev(good) if len(good) > 1 else 0.0
    return BenchmarkSummary(samples[0].workload, samples[0].backend, len(good), n_failed,
                            mean, sd, min(good), max(good))


def failed_summary(workload: str, backend: str, n_failed: int) -> BenchmarkSummary:
    nan = math.nan
    return BenchmarkSummary(workload, backend, 0, n_failed, nan, nan, nan, nan)


def summarize_groups(samples) -> list[BenchmarkSummary]:
    """One summary per (workload, backend), in first-seen order; all-failed groups become Failed cells."""
    groups: OrderedDict[tuple[str, str], list[BenchmarkSample]] = OrderedDict()
    for s in samples:
        groups.setdefault((s.workload, s.backend), []).append(s)
    out = []
    for (workload, backend), group in groups.items():
        try:
            out.append(summarize(group))
        except NoSamples:
            out.append(failed_summary(workload, backend, len(group)))
    return out
