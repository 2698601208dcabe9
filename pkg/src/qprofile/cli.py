"""Command line entry points.

Exit codes: 0 success, 2 bad arguments or configuration, 3 runtime or
transport failure, 4 latency self-check failed (run --check only).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .client import ProtocolError, TransportError
from .cluster import LatencyProfile, Topology, load_cluster_config, serve
from .harness import (
    BenchmarkConfig,
    BenchmarkError,
    BenchmarkResult,
    run_benchmark,
    run_extrapolation,
    run_swap_study,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_CHECK = 4

# acceptable relative drift of measured comm phases from profile nominals
CHECK_TOLERANCE = 0.10


def parse_qubits(text: str) -> tuple[int, ...]:
    """Parse "4", "4,6,8", "4..14" (inclusive, step 2), or "4..15..3"."""
    out: list[int] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if ".." in item:
            parts = item.split("..")
            if len(parts) not in (2, 3):
                raise ValueError(f"bad qubit range {item!r}")
            lo, hi = int(parts[0]), int(parts[1])
            step = int(parts[2]) if len(parts) == 3 else 2
            if step < 1 or hi < lo:
                raise ValueError(f"bad qubit range {item!r}")
            out.extend(range(lo, hi + 1, step))
        else:
            out.append(int(item))
    if not out:
        raise ValueError(f"no qubit counts in {text!r}")
    return tuple(out)


def parse_cluster(text: str) -> tuple[str | None, int | None]:
    """"embedded" -> in-process service; "host:port" -> external endpoint."""
    if text == "embedded":
        return None, None
    host, sep, port_text = text.rpartition(":")
    if not sep or not host or not port_text.isdigit():
        raise ValueError(f'cluster must be "embedded" or host:port, got {text!r}')
    return host, int(port_text)


def _load_profile(path: str | None) -> tuple[LatencyProfile, Topology, str]:
    if not path:
        return LatencyProfile(), Topology(), "default"
    profile, topology = load_cluster_config(path)
    return profile, topology, os.path.basename(path)


def _check_latencies(result: BenchmarkResult, profile: LatencyProfile) -> list[str]:
    """Compare byte-independent comm phase means against profile nominals.

    Prepare is excluded: its nominal depends on per-iteration program bytes.
    """
    failures = []
    for n, cell in result.cells.items():
        modules = -(-n // 6)  # readout modules touched by an n-qubit job
        expectations = {
            "stop": profile.stop_ms,
            "final_stop": profile.stop_ms,
            "start": profile.start_ms,
            "retrieve": profile.retrieve_ms * modules,
            "wait_done": profile.done_finalize_ms,
        }
        for phase, nominal in expectations.items():
            if nominal <= 0:
                continue
            measured = cell.report.phase_mean(phase)
            drift = abs(measured - nominal) / nominal
            if drift > CHECK_TOLERANCE:
                failures.append(
                    f"{n}q {phase}: measured {measured:.2f} ms vs nominal "
                    f"{nominal:.2f} ms ({drift:.1%} drift)"
                )
    return failures


def _cmd_run(args) -> int:
    profile, _, profile_name = _load_profile(args.profile)
    host, port = parse_cluster(args.cluster)
    config = BenchmarkConfig(
        qubits=parse_qubits(args.qubits),
        shots=args.shots,
        runs=args.runs,
        reset=args.reset,
        prepare=args.prepare,
        dilation=args.dilation,
        seed=args.seed,
        p=args.p,
        timing_mode=args.timing_mode,
        profile=profile,
        profile_name=profile_name,
        host=host,
        port=port,
        out_dir=args.out,
    )
    result = run_benchmark(config)
    for n in config.qubits:
        print(f"== {n} qubits ==")
        print(result.report(n).to_csv(), end="")
    if args.out:
        print(f"reports written to {args.out}")
    if args.check:
        failures = _check_latencies(result, profile)
        if failures:
            for line in failures:
                print(f"CHECK FAIL {line}", file=sys.stderr)
            return EXIT_CHECK
        print("latency check passed")
    return EXIT_OK


def _cmd_serve(args) -> int:
    profile, topology, _ = _load_profile(args.profile)
    if args.dilation is not None:
        profile = dataclasses.replace(profile, dilation=args.dilation)
    serve(args.bind, profile=profile, topology=topology)
    return EXIT_OK


def _cmd_swaps(args) -> int:
    fit = run_swap_study(
        ns=parse_qubits(args.qubits),
        instances_per_n=args.instances,
        seed=args.seed,
        p=args.p,
        out_path=args.out,
    )
    print(json.dumps({"a": fit.a, "b": fit.b, "residual": fit.residual}, sort_keys=True))
    for n, mean, std in fit.points:
        print(f"n={n:3d} swaps mean={mean:9.2f} std={std:7.2f}")
    if args.out:
        print(f"study written to {args.out}")
    return EXIT_OK


def _cmd_extrapolate(args) -> int:
    table = run_extrapolation(
        report_dir=args.in_dir,
        target_n=args.target,
        swap_fit_path=args.swap_fit,
        compute_swap=not args.no_swap,
        shots=args.shots,
        out_path=args.out,
    )
    if table.interpolation:
        print(f"note: target {table.target_n} lies inside the measured range")
    print(table.to_csv(), end="")
    if args.out:
        print(f"table written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qprofile",
        description="Phase-resolved profiling of a variational workload "
        "against a virtual control cluster.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the benchmark and print phase reports")
    run.add_argument("--qubits", default="4,6,8,10,12,14", help='e.g. "4", "4,6", "4..14"')
    run.add_argument("--shots", type=int, default=1000)
    run.add_argument("--runs", type=int, default=40)
    run.add_argument("--reset", choices=["passive", "active"], default="passive")
    run.add_argument("--prepare", choices=["sequential", "parallel"], default="sequential")
    run.add_argument("--dilation", type=float, default=1.0)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--p", type=int, default=2, help="ansatz layer count")
    run.add_argument("--timing-mode", choices=["real", "virtual"], default="real")
    run.add_argument("--profile", help="cluster config JSON (latency profile, topology)")
    run.add_argument(
        "--cluster", default="embedded", help='"embedded" (default) or host:port'
    )
    run.add_argument("--out", help="directory for reports, records, and summary")
    run.add_argument(
        "--check",
        action="store_true",
        help="exit 4 if measured comm phases drift >10%% from profile nominals",
    )
    run.set_defaults(func=_cmd_run)

    srv = sub.add_parser("serve", help="run a virtual cluster service")
    srv.add_argument("--bind", default="127.0.0.1:7780", help="host:port, port 0 for ephemeral")
    srv.add_argument("--profile", help="cluster config JSON (latency profile, topology)")
    srv.add_argument("--dilation", type=float, default=None, help="override schedule dilation")
    srv.set_defaults(func=_cmd_serve)

    sw = sub.add_parser("swaps", help="measure routed-SWAP scaling and fit a power law")
    sw.add_argument("--qubits", default="4..14", help="qubit counts to route")
    sw.add_argument("--instances", type=int, default=20, help="instances per size")
    sw.add_argument("--seed", type=int, default=1)
    sw.add_argument("--p", type=int, default=2)
    sw.add_argument("--out", help="write the study as CSV")
    sw.set_defaults(func=_cmd_swaps)

    ex = sub.add_parser("extrapolate", help="extrapolate phase runtimes to a target size")
    ex.add_argument("--in", dest="in_dir", required=True, help="directory with report_<n>q.json")
    ex.add_argument("--target", type=int, required=True)
    ex.add_argument("--swap-fit", help="swap study CSV from the swaps command")
    ex.add_argument("--no-swap", action="store_true", help="skip the SWAP schedule term")
    ex.add_argument("--shots", type=int, default=None, help="override shots from report meta")
    ex.add_argument("--out", help="write the table as CSV")
    ex.set_defaults(func=_cmd_extrapolate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BenchmarkError, TransportError, ProtocolError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
