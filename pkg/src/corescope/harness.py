"""Worker launch, simultaneous barrier release, span timing and throughput.

One trial spawns n worker threads. Each worker allocates and initializes its
buffers, applies its pin, then checks in at a mutex+condition-variable
barrier; the last arrival records the release timestamp and broadcasts. Every
worker then reads the monotonic clock, runs its kernel body once, and reads
the clock again. The trial's span is the interval from the first start to
the last end, and throughput is total units over that span. Simultaneity is
approximate by construction; kernels are sized so the measured region
dominates.

The harness owns worker lifecycle; workers share only the barrier and a
write-once slot each. Not reentrant: one trial at a time per process.
"""

from __future__ import annotations

import dataclasses
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

from .errors import CorescopeError, TrialAbortError, UsageError
from .kernels import (
    ComputeKernelSpec,
    MemoryKernelSpec,
    check_memory_budget,
    make_kernel,
    total_units,
)
from .topology import MappingStrategy, Topology, apply_pin, pin_plan

_clock = time.monotonic_ns


class KeepPolicy(Enum):
    MAX = "max"


@dataclass(frozen=True)
class TrialConfig:
    n_threads: int
    strategy: MappingStrategy
    kernel: Union[ComputeKernelSpec, MemoryKernelSpec]
    repeats: int = 3
    keep: KeepPolicy = KeepPolicy.MAX
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n_threads < 1:
            raise UsageError("n_threads must be >= 1")
        if self.repeats < 1:
            raise UsageError("repeats must be >= 1")


@dataclass(frozen=True)
class ThreadTiming:
    start_ns: int
    end_ns: int
    pinned_to: Optional[int]
    pin_honored: bool

    def __post_init__(self) -> None:
        if self.end_ns < self.start_ns:
            raise UsageError("thread end precedes its start")


@dataclass(frozen=True)
class TrialResult:
    per_thread: Tuple[ThreadTiming, ...]
    total_units: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.per_thread:
            raise UsageError("a trial needs at least one worker timing")
        if self.span_ns <= 0:
            raise UsageError("trial span must be positive")

    @property
    def span_ns(self) -> int:
        starts = [t.start_ns for t in self.per_thread]
        ends = [t.end_ns for t in self.per_thread]
        return max(ends) - min(starts)

    @property
    def throughput(self) -> float:
        """Units per second: total_units / (span_ns * 1e-9).

        Evaluated as units / span * 1e9: 1e9 is exactly representable, so
        the only rounding is the division itself.
        """
        return self.total_units / self.span_ns * 1e9

    def to_json(self) -> dict:
        return {
            "span_ns": self.span_ns,
            "total_units": self.total_units,
            "throughput": self.throughput,
            "metadata": self.metadata,
        }


class CondVarBarrier:
    """Check-in counter + generation flag over one mutex and condition variable.

    The releasing thread records the release timestamp while still holding
    the mutex, then broadcasts; all waiters observe start times at or after
    that timestamp. Mirrors the wake-up pattern whose scheduling artifacts
    the mapping experiments are sensitive to, rather than a tree barrier.
    """

    def __init__(self, parties: int, clock: Callable[[], int] = _clock):
        if parties < 1:
            raise UsageError("barrier needs at least one party")
        self._parties = parties
        self._clock = clock
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._count = 0
        self._generation = 0
        self._release_ns = 0
        self._aborted = False

    def wait(self) -> int:
        """Block until all parties checked in; returns the release timestamp."""
        with self._cond:
            if self._aborted:
                raise TrialAbortError("barrier aborted")
            gen = self._generation
            self._count += 1
            if self._count == self._parties:
                self._count = 0
                self._generation += 1
                self._release_ns = self._clock()
                self._cond.notify_all()
                return self._release_ns
            while gen == self._generation and not self._aborted:
                self._cond.wait()
            if self._aborted:
                raise TrialAbortError("barrier aborted")
            return self._release_ns

    def abort(self) -> None:
        with self._cond:
            self._aborted = True
            self._cond.notify_all()


def run_trial(cfg: TrialConfig, topo: Topology) -> TrialResult:
    """Execute one barrier-released trial and gather per-thread timings."""
    plan = pin_plan(cfg.strategy, cfg.n_threads, topo)
    if isinstance(cfg.kernel, MemoryKernelSpec):
        check_memory_budget(cfg.n_threads, cfg.kernel.block_bytes)

    n = cfg.n_threads
    barrier = CondVarBarrier(n)
    timings: List[Optional[ThreadTiming]] = [None] * n
    failures: List[Optional[BaseException]] = [None] * n
    release_slot: List[int] = [0]

    def worker(idx: int, assignment: Optional[int]) -> None:
        try:
            seed = None if cfg.seed is None else cfg.seed + idx
            kernel = make_kernel(cfg.kernel, seed=seed)
            kernel.prepare()
            honored = apply_pin(assignment, topo)
            release_ns = barrier.wait()
            if idx == 0:
                release_slot[0] = release_ns
            start = _clock()
            kernel.run()
            end = _clock()
            timings[idx] = ThreadTiming(start, end, assignment, honored)
        except BaseException as exc:
            failures[idx] = exc
            barrier.abort()

    threads = [threading.Thread(target=worker, args=(i, plan.assignments[i]),
                                name=f"corescope-worker-{i}")
               for i in range(n)]
    started: List[threading.Thread] = []
    try:
        for t in threads:
            t.start()
            started.append(t)
    except RuntimeError as exc:
        barrier.abort()
        for t in started:
            t.join()
        raise TrialAbortError(f"could not spawn all {n} workers: {exc}") from exc
    for t in started:
        t.join()

    for failure in failures:
        if failure is not None:
            if isinstance(failure, CorescopeError):
                raise failure
            raise TrialAbortError(f"worker failed: {failure!r}") from failure

    done = [t for t in timings if t is not None]
    wake_order = sorted(range(n), key=lambda i: done[i].start_ns)
    metadata = {
        "strategy": cfg.strategy.value,
        "n_threads": n,
        "topology": topo.to_json(),
        "clock": "monotonic_ns",
        "release_ns": release_slot[0],
        "wake_order": wake_order,
        "pin_honored_all": all(t.pin_honored for t in done),
        "timestamp": time.time(),
    }
    return TrialResult(per_thread=tuple(done),
                       total_units=total_units(cfg.kernel, n),
                       metadata=metadata)


def aggregate(results: Sequence[TrialResult]) -> TrialResult:
    """Keep the repeat with maximal throughput (first one wins ties)."""
    if not results:
        raise UsageError("aggregate needs at least one trial result")
    best = max(results, key=lambda r: r.throughput)
    best = dataclasses.replace(
        best, metadata={**best.metadata, "repeats_kept": len(results)})
    return best


def thread_ladder(max_threads: int) -> List[int]:
    """Ascending 2^k and 2^k + 2^(k-1) thread counts up to max_threads."""
    if max_threads < 1:
        raise UsageError("max_threads must be >= 1")
    counts = set()
    k = 0
    while 2 ** k <= max_threads:
        counts.add(2 ** k)
        if k >= 1 and 2 ** k + 2 ** (k - 1) <= max_threads:
            counts.add(2 ** k + 2 ** (k - 1))
        k += 1
    return sorted(counts)


def sweep(thread_counts: Sequence[int], template: TrialConfig,
          topo: Topology) -> List[Tuple[int, TrialResult]]:
    """Run aggregate(run_trial x repeats) for each thread count."""
    if not thread_counts:
        raise UsageError("sweep needs at least one thread count")
    if list(thread_counts) != sorted(thread_counts):
        raise UsageError("thread counts must be ascending")
    points = []
    for n in thread_counts:
        cfg = dataclasses.replace(template, n_threads=n)
        try:
            result = aggregate([run_trial(cfg, topo) for _ in range(cfg.repeats)])
        except CorescopeError as exc:
            exc.args = (f"thread count {n}: {exc}",)
            raise
        points.append((n, result))
    return points
