"""Benchmark guests: the nop / cat-sync start-up probes and four compute programs."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class WorkloadSpec:
    id: str
    source: str
    paper_param: int | None = None
    desk_param: int | None = None
    needs_preopen: bool = False
    param: int | None = None

    @property
    def binary_name(self) -> str:
        return self.source.removesuffix(".c")

    def with_param(self, n: int | None) -> "WorkloadSpec":
        return WorkloadSpec(self.id, self.source, self.paper_param, self.desk_param, self.needs_preopen, n)

    def scaled(self, scale: str) -> int | None:
        if scale == "paper":
            return self.paper_param
        if scale == "desk":
            return self.desk_param
        raise ValueError(f"unknown scale {scale!r}")


WORKLOADS: dict[str, WorkloadSpec] = {
    w.id: w
    for w in [
        WorkloadSpec("nop", "nop.c"),
        WorkloadSpec("cat-sync", "cat_sync.c", needs_preopen=True),
        WorkloadSpec("nbody", "nbody.c", 50_000_000, 1_000_000),
        WorkloadSpec("fannkuch-redux", "fannkuch_redux.c", 12, 9),
        WorkloadSpec("mandelbrot", "mandelbrot.c", 15_000, 1_000),
        WorkloadSpec("binary-trees", "binary_trees.c", 21, 14),
    ]
}

COMPUTE_WORKLOADS = ("nbody", "fannkuch-redux", "mandelbrot", "binary-trees")

# helper guests used to exercise limits and isolation; not benchmarks
FIXTURES = ("spin", "spin_read", "mem_hog", "stateful")


def get(workload_id: str) -> WorkloadSpec:
    try:
        return WORKLOADS[workload_id]
    except KeyError:
        raise KeyError(f"unknown workload {workload_id!r}; expected one of {sorted(WORKLOADS)}") from None
