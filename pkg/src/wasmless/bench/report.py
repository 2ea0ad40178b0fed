"""Table-style and CSV rendering of benchmark summaries."""

from __future__ import annotations

import csv
import io
import math

from .stats import BenchmarkSummary

WORKLOAD_ORDER = ("nop", "cat-sync", "binary-trees", "fannkuch-redux", "mandelbrot", "nbody")
BACKEND_ORDER = ("native", "container", "wasm-cold", "wasm-warm")

TIMED_WINDOWS = {
    "native": "fork+exec of the native binary until exit, stdout captured through a pipe",
    "container": "`<cli> run --rm` of the prebuilt image until the CLI exits (includes container setup/teardown)",
    "wasm-cold": "validate + instrument + compile + instantiate + run, in process",
    "wasm-warm": "instantiate from the pooled compiled module + run, in process",
}

CSV_COLUMNS = ["workload", "backend", "n_runs", "n_failed", "mean_s", "stddev_s", "min_s", "max_s"]


def _strip(text: str) -> str:
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text


def format_cell(mean: float, stddev: float) -> str:
    """``mean±stddev`` with the deviation at three significant figures, e.g. ``4.1±0.05``."""
    if stddev == 0 or not math.isfinite(stddev):
        return f"{_strip(f'{mean:.6g}')}±0"
    exponent = math.floor(math.log10(abs(stddev)))
    decimals = max(0, 2 - exponent)
    sd_text = _strip(f"{round(stddev, 2 - exponent):.{decimals}f}")
    mean_text = _strip(f"{mean:.{decimals}f}")
    return f"{mean_text}±{sd_text}"


def _order(values, preferred):
    seen = list(dict.fromkeys(values))
    return [v for v in preferred if v in seen] + [v for v in seen if v not in preferred]


def _grid(summaries, cell) -> list[str]:
    workloads = _order([s.workload for s in summaries], WORKLOAD_ORDER)
    backends = _order([s.backend for s in summaries], BACKEND_ORDER)
    by_key = {(s.backend, s.workload): s for s in summaries}
    lines = ["| backend | " + " | ".join(workloads) + " |" if workloads else "| backend |",
             "|---|" + "---|" * len(workloads)]
    for b in backends:
        cells = []
        for w in workloads:
            s = by_key.get((b, w))
            cells.append("" if s is None else cell(s))
        lines.append(f"| {b} | " + " | ".join(cells) + " |")
    return lines


def _markdown(summaries: list[BenchmarkSummary], log10: bool) -> str:
    lines = _grid(summaries, lambda s: "Failed" if s.failed else format_cell(s.mean_s, s.stddev_s))
    if not summaries:
        return "\n".join(lines) + "\n"
    lines.insert(0, "Execution time in seconds, mean±stddev (sample, N-1)")
    lines.insert(1, "")
    if log10:
        lines += ["", "log10(mean seconds)", ""]
        lines += _grid(summaries, lambda s: "Failed" if s.failed else f"{math.log10(s.mean_s):.3f}")
    lines += ["", "Timed windows:"]
    for b in _order([s.backend for s in summaries], BACKEND_ORDER):
        lines.append(f"- {b}: {TIMED_WINDOWS.get(b, 'unspecified')}")
    return "\n".join(lines) + "\n"


def _csv(summaries: list[BenchmarkSummary], log10: bool) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    columns = CSV_COLUMNS + (["log10_mean_s"] if log10 else [])
    writer.writerow(columns)
    for s in summaries:
        stats = ["", "", "", ""] if s.failed else [repr(s.mean_s), repr(s.stddev_s), repr(s.min_s), repr(s.max_s)]
        row = [s.workload, s.backend, s.n_runs, s.n_failed, *stats]
        if log10:
            row.append("" if s.failed else repr(math.log10(s.mean_s)))
        writer.writerow(row)
    return buf.getvalue()


def report(summaries, format: str = "markdown", log10: bool = False) -> str:
    summaries = list(summaries)
    if format == "markdown":
        return _markdown(summaries, log10)
    if format == "csv":
        return _csv(summaries, log10)
    raise ValueError(f"unknown report format {format!r}")
