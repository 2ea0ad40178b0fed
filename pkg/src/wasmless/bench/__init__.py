"""Benchmark harness: repeated timed runs, summaries, and report rendering."""

from .harness import Harness, bench_run, format_sizes, sizes
from .report import report
from .stats import BACKENDS, BenchmarkSample, BenchmarkSummary, summarize, summarize_groups

__all__ = [
    "BACKENDS", "BenchmarkSample", "BenchmarkSummary", "Harness", "bench_run",
    "format_sizes", "report", "sizes", "summarize", "summarize_groups",
]
