"""``bench`` command: build guests, run timed samples, render reports, list sizes."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import BackendUnavailable, WasmlessError
from ..workloads import WORKLOADS
from ..workloads.build import build_guests, existing_guests
from .harness import Harness, build_container_image, format_sizes, sizes
from .report import BACKEND_ORDER, WORKLOAD_ORDER, report
from .stats import BACKENDS, BenchmarkSample, summarize_groups


def _choices(value: str, allowed, what: str) -> list[str]:
    if value == "all":
        return list(allowed)
    picked = [v.strip() for v in value.split(",") if v.strip()]
    for v in picked:
        if v not in allowed:
            raise SystemExit(f"unknown {what} {v!r}; expected one of {', '.join(allowed)} or all")
    return picked


def cmd_build(args) -> int:
    guests = build_guests(args.guest_dir, force=args.force)
    print(f"guests built under {guests.root}")
    if args.container_image:
        build_container_image(guests)
        print("container image built")
    return 0


def cmd_run(args) -> int:
    workloads = _choices(args.workload, [w for w in WORKLOAD_ORDER if w in WORKLOADS], "workload")
    backends = _choices(args.backend, [b for b in BACKEND_ORDER if b in BACKENDS], "backend")
    out = open(args.out, "a" if args.append else "w") if args.out else sys.stdout
    skipped = 0
    try:
        with Harness(existing_guests(args.guest_dir)) as harness:
            for backend in backends:
                for workload in workloads:
                    try:
                        samples = harness.run(workload, backend, args.runs, args.scale, args.n)
                    except BackendUnavailable as exc:
                        print(f"skipping {workload}/{backend}: {exc}", file=sys.stderr)
                        skipped += 1
                        continue
                    for s in samples:
                        out.write(json.dumps(s.to_dict()) + "\n")
                    out.flush()
                    bad = sum(not s.ok for s in samples)
                    print(f"{workload}/{backend}: {len(samples) - bad} ok, {bad} failed", file=sys.stderr)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0 if skipped == 0 or args.backend == "all" else 1


def load_samples(path: str) -> list[BenchmarkSample]:
    samples = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                samples.append(BenchmarkSample.from_dict(json.loads(line)))
    return samples


def cmd_report(args) -> int:
    summaries = summarize_groups(load_samples(args.input))
    sys.stdout.write(report(summaries, args.format, args.log10))
    return 0


def cmd_sizes(args) -> int:
    sys.stdout.write(format_sizes(sizes(existing_guests(args.guest_dir))))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--guest-dir", help="where guests are built (default $WASMLESS_GUEST_DIR or ~/.cache/wasmless/guests)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="compile guests to wasm and native")
    p.add_argument("--force", action="store_true", help="rebuild even if sources are unchanged")
    p.add_argument("--container-image", action="store_true", help="also build the container baseline image")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("run", help="time workloads and write samples as JSON lines")
    p.add_argument("--workload", default="all", help="workload id, comma list, or all")
    p.add_argument("--backend", default="all", help="backend id, comma list, or all")
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--scale", choices=["desk", "paper"], default="desk")
    p.add_argument("--n", type=int, default=None, help="override the workload parameter")
    p.add_argument("--out", help="samples file (default stdout)")
    p.add_argument("--append", action="store_true", help="append to --out instead of truncating")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summarize a samples file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    p.add_argument("--log10", action="store_true", help="add log10(mean) data")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sizes", help="on-disk sizes of deployed wasm and native guests")
    p.set_defaults(func=cmd_sizes)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except WasmlessError as exc:
        print(f"bench: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
