"""Subcommand front end: configuration, execution, JSON/CSV emission.

Every emitted JSON object embeds a run manifest (suite version, argv,
topology, config values, timestamps, output paths) so a run can be repeated
from its own output. Exit codes: 0 success, 1 usage or config error,
2 runtime/resource error. Exactly one benchmark executes at a time
in-process.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from datetime import datetime, timezone
from typing import List, Optional, Sequence

from . import __version__
from .config import load_config
from .errors import CorescopeError, ResourceError, UsageError
from .harness import TrialConfig, sweep, thread_ladder
from .kernels import (
    DESK_BLOCK_BYTES,
    DESK_ITERATIONS,
    PAPER_BLOCK_BYTES,
    PAPER_ITERATIONS,
    ComputeKernelSpec,
    ComputeKind,
    MemoryKernelSpec,
    MemoryKind,
)
from .primitives import (
    CondMode,
    CreateMode,
    SampleSet,
    bench_condvar,
    bench_mutex_handoff,
    bench_mutex_uncontended,
    bench_thread_create,
    summarize,
)
from .stats import DEFAULT_BIN_WIDTH_CYCLES
from .taskpool import Backoff, PoolConfig, PoolVariant, run_noop_benchmark
from .topology import MappingStrategy, detect_topology, pin_plan
from .workloads import (
    FftSpec,
    MatmulSpec,
    fft_run,
    make_pool,
    matmul_run,
    task_count,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _iso_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _build_manifest(argv: Sequence[str], topo, config: dict, args) -> dict:
    return {
        "suite": "corescope",
        "version": __version__,
        "command": list(argv),
        "topology": topo.to_json(),
        "config": dict(config),
        "outputs": {
            "json": getattr(args, "out", None) or "stdout",
            "raw_csv": getattr(args, "raw", None),
        },
        "started_at": _iso_now(),
    }


def _emit(payload: dict, out: Optional[str]) -> None:
    payload["manifest"]["finished_at"] = _iso_now()
    text = json.dumps(payload, indent=2)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_raw_csv(samples: SampleSet, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("a_ns,b_ns\n")
        for s in samples.samples:
            fh.write(f"{s.a_ns},{s.b_ns}\n")


def _parse_threads(value: str, topo) -> List[int]:
    if value == "ladder":
        return thread_ladder(2 * topo.total)
    try:
        counts = [int(v) for v in value.split(",") if v]
    except ValueError:
        raise UsageError(f"--threads expects 'ladder' or a comma list, got {value!r}")
    if not counts or any(c < 1 for c in counts):
        raise UsageError("thread counts must be positive")
    return counts


def _sweep_payload(benchmark: str, points, topo, manifest: dict) -> dict:
    return {
        "kind": "sweep",
        "benchmark": benchmark,
        "topology": topo.to_json(),
        "points": [
            {
                "n": n,
                "strategy": result.metadata["strategy"],
                "span_ns": result.span_ns,
                "total_units": result.total_units,
                "throughput": result.throughput,
                "repeats_kept": result.metadata.get("repeats_kept", 1),
            }
            for n, result in points
        ],
        "manifest": manifest,
    }


def _add_common(p: argparse.ArgumentParser, raw: bool = False) -> None:
    p.add_argument("--config", help="key=value config file (or $CORESCOPE_CONFIG)")
    p.add_argument("--out", help="write JSON here instead of stdout")
    if raw:
        p.add_argument("--raw", help="also dump raw a_ns,b_ns samples as CSV")


def build_parser() -> _Parser:
    parser = _Parser(prog="corescope",
                     description="multicore characterization suite")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    p = sub.add_parser("topo", help="print topology and a sample pin plan")
    _add_common(p)
    p.add_argument("--strategy", default="rr", help="plan strategy (dumb|rr|auto)")
    p.add_argument("--plan-n", type=int, default=0,
                   help="workers in the sample plan (default: one per CPU)")

    p = sub.add_parser("compute", help="arithmetic throughput sweep")
    _add_common(p)
    p.add_argument("--kind", choices=["int", "float"], default="int")
    p.add_argument("--strategy", default="auto")
    p.add_argument("--threads", default="ladder",
                   help="'ladder' or comma list, e.g. 1,2,4")
    p.add_argument("--iterations", type=int, default=0,
                   help=f"chain iterations per thread (default {DESK_ITERATIONS})")
    p.add_argument("--dataset-len", type=int, default=128)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--paper-scale", action="store_true",
                   help=f"use {PAPER_ITERATIONS} iterations")

    p = sub.add_parser("membw", help="memory throughput sweep")
    _add_common(p)
    p.add_argument("--kind", choices=["read", "write"], default="read")
    p.add_argument("--strategy", default="auto")
    p.add_argument("--threads", default="ladder")
    p.add_argument("--block-mb", type=int, default=0,
                   help=f"per-thread block MiB (default {DESK_BLOCK_BYTES >> 20})")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--paper-scale", action="store_true",
                   help=f"use {PAPER_BLOCK_BYTES >> 20} MiB blocks")

    p = sub.add_parser("threads", help="thread creation latency samples")
    _add_common(p, raw=True)
    p.add_argument("--mode", choices=["joinable", "detached"], default="joinable")
    p.add_argument("--samples", type=int, default=100_000)

    p = sub.add_parser("sync", help="mutex/condvar latency samples")
    _add_common(p, raw=True)
    p.add_argument("--primitive",
                   choices=["mutex-pair", "mutex-handoff", "cond-signal", "cond-broadcast"],
                   required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--watchdog", type=float, default=10.0)
    p.add_argument("--pin", default=None,
                   help="two logical ids 'a,b' for the measured threads")

    p = sub.add_parser("pool-bench", help="no-op task throughput per pool variant")
    _add_common(p)
    p.add_argument("--variant", choices=["mutex", "cas"], default="mutex")
    p.add_argument("--tasks", type=int, default=10_000)
    p.add_argument("--workers-cap", type=int, default=64)
    p.add_argument("--drivers", type=int, default=1)
    p.add_argument("--warm", type=int, default=0, help="pre-started idle workers")
    p.add_argument("--backoff", choices=["none", "exp"], default="none")
    p.add_argument("--switch-interval", type=float, default=None,
                   help="interpreter thread switch interval during the run")

    p = sub.add_parser("fft", help="task-decomposed FFT workload")
    _add_common(p)
    p.add_argument("--log2", type=int, required=True)
    p.add_argument("--pool", choices=["mutex", "cas"], default="mutex")
    p.add_argument("--cutoff", type=int, default=64)
    p.add_argument("--workers-cap", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("matmul", help="recursive block matmul workload")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--recursions", type=int, required=True)
    p.add_argument("--pool", choices=["mutex", "cas"], default="mutex")
    p.add_argument("--workers-cap", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("report", help="regenerate summaries from a samples JSON")
    _add_common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--bins", type=int, default=DEFAULT_BIN_WIDTH_CYCLES)

    return parser


def _cmd_topo(args, topo, manifest) -> dict:
    strategy = MappingStrategy.from_name(args.strategy)
    n = args.plan_n or topo.total
    plan = pin_plan(strategy, n, topo)
    return {
        "kind": "topology",
        "topology": topo.to_json(),
        "sample_plan": plan.to_json(),
        "manifest": manifest,
    }


def _cmd_compute(args, topo, manifest) -> dict:
    iterations = args.iterations or (PAPER_ITERATIONS if args.paper_scale else DESK_ITERATIONS)
    spec = ComputeKernelSpec(kind=ComputeKind(args.kind),
                             dataset_len=args.dataset_len,
                             iterations=iterations)
    template = TrialConfig(n_threads=1,
                           strategy=MappingStrategy.from_name(args.strategy),
                           kernel=spec, repeats=args.repeats, seed=args.seed)
    counts = _parse_threads(args.threads, topo)
    points = sweep(counts, template, topo)
    return _sweep_payload(f"compute-{args.kind}", points, topo, manifest)


def _cmd_membw(args, topo, manifest) -> dict:
    block = (args.block_mb << 20) or (PAPER_BLOCK_BYTES if args.paper_scale else DESK_BLOCK_BYTES)
    spec = MemoryKernelSpec(kind=MemoryKind(args.kind), block_bytes=block)
    template = TrialConfig(n_threads=1,
                           strategy=MappingStrategy.from_name(args.strategy),
                           kernel=spec, repeats=args.repeats)
    counts = _parse_threads(args.threads, topo)
    points = sweep(counts, template, topo)
    return _sweep_payload(f"membw-{args.kind}", points, topo, manifest)


def _samples_payload(samples: SampleSet, topo, manifest, args) -> dict:
    if not samples.samples:
        raise ResourceError(f"benchmark produced no samples: {samples.error}")
    if args.raw:
        _write_raw_csv(samples, args.raw)
    return {
        "kind": "samples",
        "benchmark": samples.benchmark,
        "mode": samples.mode,
        "clock_ghz": topo.clock_ghz,
        "samples": [{"a_ns": s.a_ns, "b_ns": s.b_ns} for s in samples.samples],
        "summary": summarize(samples, topo.clock_ghz),
        "truncated": samples.truncated,
        "error": samples.error,
        "manifest": manifest,
    }


def _cmd_threads(args, topo, manifest) -> dict:
    samples = bench_thread_create(CreateMode(args.mode), args.samples)
    return _samples_payload(samples, topo, manifest, args)


def _parse_pin(value: Optional[str], topo):
    if value is None:
        return None
    try:
        a, b = (int(v) for v in value.split(","))
    except ValueError:
        raise UsageError(f"--pin expects 'a,b', got {value!r}")
    for v in (a, b):
        if not 0 <= v < topo.total:
            raise UsageError(f"pin id {v} outside topology of {topo.total} CPUs")
    return a, b


def _cmd_sync(args, topo, manifest) -> dict:
    pin = _parse_pin(args.pin, topo)
    if args.primitive == "mutex-pair":
        avg = bench_mutex_uncontended(pairs=args.samples, clock_ghz=topo.clock_ghz)
        return {
            "kind": "mutex-pair",
            "benchmark": "mutex-pair",
            "pairs": args.samples,
            "avg_cycles_per_pair": avg,
            "clock_ghz": topo.clock_ghz,
            "manifest": manifest,
        }
    if args.primitive == "mutex-handoff":
        samples = bench_mutex_handoff(args.samples, watchdog_s=args.watchdog,
                                      pin=pin, topo=topo)
    else:
        mode = CondMode(args.primitive.removeprefix("cond-"))
        samples = bench_condvar(mode, args.samples, watchdog_s=args.watchdog,
                                pin=pin, topo=topo)
    return _samples_payload(samples, topo, manifest, args)


def _cmd_pool_bench(args, topo, manifest) -> dict:
    cfg = PoolConfig(variant=PoolVariant(args.variant),
                     max_pool_size=args.workers_cap,
                     backoff=Backoff(args.backoff))
    wall_ns, stats = run_noop_benchmark(cfg, tasks=args.tasks, drivers=args.drivers,
                                        initial_workers=args.warm,
                                        switch_interval_s=args.switch_interval)
    return {
        "kind": "pool-bench",
        "variant": args.variant,
        "tasks": args.tasks,
        "workers_cap": args.workers_cap,
        "drivers": args.drivers,
        "wall_ns": wall_ns,
        "spin_stats": dataclasses.asdict(stats),
        "manifest": manifest,
    }


def _cmd_fft(args, topo, manifest) -> dict:
    spec = FftSpec(size_log2=args.log2, pool_variant=PoolVariant(args.pool),
                   cutoff=args.cutoff)
    with make_pool(spec, max_pool_size=args.workers_cap) as pool:
        spectrum, wall_ns, stats = fft_run(spec, pool, seed=args.seed)
    return {
        "kind": "workload",
        "workload": "fft",
        "params": {"log2": args.log2, "pool": args.pool, "cutoff": args.cutoff,
                   "seed": args.seed, "tasks_spawned": task_count(spec)},
        "wall_ms": wall_ns / 1e6,
        "spin_stats": dataclasses.asdict(stats),
        "checksum": float(abs(spectrum).sum()),
        "manifest": manifest,
    }


def _cmd_matmul(args, topo, manifest) -> dict:
    spec = MatmulSpec(n=args.n, recursions=args.recursions,
                      pool_variant=PoolVariant(args.pool))
    with make_pool(spec, max_pool_size=args.workers_cap) as pool:
        product, wall_ns, stats = matmul_run(spec, pool, seed=args.seed)
    return {
        "kind": "workload",
        "workload": "matmul",
        "params": {"n": args.n, "recursions": args.recursions, "pool": args.pool,
                   "seed": args.seed, "leaf_tasks": task_count(spec)},
        "wall_ms": wall_ns / 1e6,
        "spin_stats": dataclasses.asdict(stats),
        "checksum": float(product.sum()),
        "manifest": manifest,
    }


def _cmd_report(args, topo, manifest) -> dict:
    try:
        with open(args.infile, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read samples JSON {args.infile}: {exc}")
    if "samples" not in data:
        raise UsageError(f"{args.infile} has no 'samples' array")
    from .primitives import IntervalSample

    samples = SampleSet(
        benchmark=data.get("benchmark", "unknown"),
        mode=data.get("mode", ""),
        samples=[IntervalSample(a_ns=s["a_ns"], b_ns=s["b_ns"])
                 for s in data["samples"]],
    )
    clock_ghz = data.get("clock_ghz", topo.clock_ghz)
    return {
        "kind": "report",
        "benchmark": samples.benchmark,
        "source": args.infile,
        "clock_ghz": clock_ghz,
        "bin_width_cycles": args.bins,
        "summary": summarize(samples, clock_ghz, bin_width=args.bins),
        "manifest": manifest,
    }


_COMMANDS = {
    "topo": _cmd_topo,
    "compute": _cmd_compute,
    "membw": _cmd_membw,
    "threads": _cmd_threads,
    "sync": _cmd_sync,
    "pool-bench": _cmd_pool_bench,
    "fft": _cmd_fft,
    "matmul": _cmd_matmul,
    "report": _cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help()
            return 1
        config = load_config(getattr(args, "config", None))
        topo = detect_topology(config)
        manifest = _build_manifest(argv, topo, config, args)
        payload = _COMMANDS[args.command](args, topo, manifest)
        _emit(payload, getattr(args, "out", None))
        return 0
    except UsageError as exc:
        print(f"corescope: {exc}", file=sys.stderr)
        return 1
    except CorescopeError as exc:
        print(f"corescope: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
