"""Pooled-worker task runtime with mutex-guarded and lock-free CAS pools.

Spawning first tries to pop an idle worker from the pool and otherwise
starts a fresh OS thread; a worker finishing a task pushes itself back
unless the pool is at capacity, in which case its thread exits. Both pool
variants expose the same LIFO semantics; they differ only in how the shared
stack is updated:

* MutexPool serializes push/pop under one lock and never performs a CAS.
* CasPool is a Treiber stack whose head is swapped by compare-and-swap.
  The head packs (version, size, top) and every successful CAS bumps the
  version, so a location reused after pop/push cannot be mistaken for the
  old state (ABA), and the capacity decision happens in the same atomic
  step as the push. Every failed CAS attempt is counted.

CPython has no user-level hardware CAS, so the atomic cell is a tiny
lock-backed compare-and-swap; the retry loops, their failure accounting and
the contention behavior they expose are preserved. Idle pooled workers
block on a per-worker handoff latch rather than spinning.

The pool is fully thread-safe; spawn and retire may be called from any
thread, including workers (so tasks can spawn subtasks). Stats snapshots
are racy-but-monotone while work is in flight and exact at quiescence.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Tuple

from .errors import UsageError


class PoolVariant(Enum):
    MUTEX = "mutex"
    CAS = "cas"


class Backoff(Enum):
    NONE = "none"
    EXP = "exp"


@dataclass(frozen=True)
class PoolConfig:
    """Pool variant and sizing.

    spawn_overflow keeps the always-create-a-thread policy: a spawn that
    finds the pool empty starts a new OS thread. Turning it off runs such
    tasks inline on the spawning thread instead (never blocks).
    """

    variant: PoolVariant
    max_pool_size: int = 64
    spawn_overflow: bool = True
    backoff: Backoff = Backoff.NONE

    def __post_init__(self) -> None:
        if self.max_pool_size < 0:
            raise UsageError("max_pool_size must be >= 0")


@dataclass(frozen=True)
class SpinStats:
    """Monotone counters; exact once the pool is quiescent."""

    cas_retries: int
    threads_created: int
    pool_hits: int
    pool_misses: int


class Ticket:
    """Completion latch plus result slot for one spawned task."""

    __slots__ = ("_done", "_result", "_error")

    def __init__(self) -> None:
        self._done = threading.Event()
        self._result = None
        self._error: Optional[BaseException] = None

    def _finish(self, result=None, error: Optional[BaseException] = None) -> None:
        self._result = result
        self._error = error
        self._done.set()

    def done(self) -> bool:
        return self._done.is_set()

    def wait(self, timeout: Optional[float] = None) -> bool:
        return self._done.wait(timeout)

    def result(self, timeout: Optional[float] = None):
        if not self._done.wait(timeout):
            raise TimeoutError("task did not complete in time")
        if self._error is not None:
            raise self._error
        return self._result


class AtomicHead:
    """Compare-and-swap cell for the (version, size, top) stack head.

    A failed attempt bumps the failure counter inside the same critical
    section, so the count is exact at quiescence.
    """

    __slots__ = ("_lock", "_value", "cas_failures")

    def __init__(self, value: Tuple[int, int, Optional["_Worker"]]):
        self._lock = threading.Lock()
        self._value = value
        self.cas_failures = 0

    def read(self) -> Tuple[int, int, Optional["_Worker"]]:
        return self._value

    def cas(self, expected, new) -> bool:
        with self._lock:
            if self._value is expected:
                self._value = new
                return True
            self.cas_failures += 1
            return False


class CasStack:
    """Lock-free LIFO of idle workers with a version-counted head."""

    def __init__(self, capacity: int, backoff: Backoff = Backoff.NONE):
        self.capacity = capacity
        self.backoff = backoff
        self.head = AtomicHead((0, 0, None))

    def _pause(self, attempt: int) -> None:
        if self.backoff is Backoff.EXP:
            time.sleep(min(1e-3, 1e-6 * (1 << min(attempt, 10))))

    def push(self, worker: "_Worker") -> bool:
        attempt = 0
        while True:
            old = self.head.read()
            version, size, top = old
            if size >= self.capacity:
                return False
            worker._next = top
            if self.head.cas(old, (version + 1, size + 1, worker)):
                return True
            attempt += 1
            self._pause(attempt)

    def pop(self) -> Optional["_Worker"]:
        attempt = 0
        while True:
            old = self.head.read()
            version, size, top = old
            if top is None:
                return None
            if self.head.cas(old, (version + 1, size - 1, top._next)):
                top._next = None
                return top
            attempt += 1
            self._pause(attempt)

    def size(self) -> int:
        return self.head.read()[1]

    @property
    def cas_failures(self) -> int:
        return self.head.cas_failures


class MutexStack:
    """The same LIFO guarded by one mutex; performs no CAS at all."""

    def __init__(self, capacity: int, backoff: Backoff = Backoff.NONE):
        self.capacity = capacity
        self._lock = threading.Lock()
        self._items: List["_Worker"] = []

    def push(self, worker: "_Worker") -> bool:
        with self._lock:
            if len(self._items) >= self.capacity:
                return False
            self._items.append(worker)
            return True

    def pop(self) -> Optional["_Worker"]:
        with self._lock:
            return self._items.pop() if self._items else None

    def size(self) -> int:
        with self._lock:
            return len(self._items)

    cas_failures = 0


_POISON = object()


class _Worker:
    """One pooled OS thread: run a task, retire into the pool, park on a latch."""

    __slots__ = ("_pool", "_first", "_slot", "_task_ready", "_next", "thread")

    def __init__(self, pool: "TaskPool", first) -> None:
        self._pool = pool
        self._first = first
        self._slot = None
        self._task_ready = threading.Event()
        self._next: Optional[_Worker] = None
        self.thread = threading.Thread(target=self._loop, daemon=True,
                                       name="corescope-pool-worker")

    def assign(self, binding) -> None:
        self._slot = binding
        self._task_ready.set()

    def _loop(self) -> None:
        binding = self._first
        self._first = None
        while True:
            if binding is not None:
                _execute(binding)
            # Latch must be cleared before the push: nobody can assign to a
            # worker that is not yet back in the pool.
            self._task_ready.clear()
            if worker_retire(self, self._pool) == "exited":
                return
            self._task_ready.wait()
            binding = self._slot
            self._slot = None
            if binding is _POISON:
                return


def _execute(binding) -> None:
    fn, ticket = binding
    try:
        ticket._finish(result=fn())
    except BaseException as exc:
        ticket._finish(error=exc)


def worker_retire(worker: "_Worker", pool: "TaskPool") -> str:
    """Return a finished worker to the pool, or let its thread exit.

    The pooled-vs-exited decision is a single linearization step of the
    underlying stack (capacity check inside the mutex or the CAS), so the
    pool size can never exceed its cap.
    """
    if pool._closed:
        return "exited"
    return "pooled" if pool._stack.push(worker) else "exited"


class TaskPool:
    """Worker pool front end shared by all task workloads."""

    def __init__(self, config: PoolConfig, initial_workers: int = 0):
        self.config = config
        stack_cls = CasStack if config.variant is PoolVariant.CAS else MutexStack
        self._stack = stack_cls(config.max_pool_size, config.backoff)
        self._closed = False
        self._count_lock = threading.Lock()
        self._threads_created = 0
        self._pool_hits = 0
        self._pool_misses = 0
        self._all_threads: List[threading.Thread] = []
        for _ in range(initial_workers):
            self._start_worker(first=None)

    def _start_worker(self, first) -> "_Worker":
        w = _Worker(self, first)
        w.thread.start()
        with self._count_lock:
            self._threads_created += 1
            self._all_threads.append(w.thread)
            if len(self._all_threads) % 1024 == 0:
                self._all_threads = [t for t in self._all_threads if t.is_alive()]
        return w

    def spawn(self, fn: Callable[[], object]) -> Ticket:
        """Run fn on a pooled worker if one is idle, else on a new thread."""
        if self._closed:
            raise UsageError("pool is shut down")
        ticket = Ticket()
        binding = (fn, ticket)
        worker = self._stack.pop()
        if worker is not None:
            with self._count_lock:
                self._pool_hits += 1
            worker.assign(binding)
            return ticket
        with self._count_lock:
            self._pool_misses += 1
        if not self.config.spawn_overflow:
            _execute(binding)
            return ticket
        try:
            self._start_worker(first=binding)
        except RuntimeError as exc:
            ticket._finish(error=exc)
        return ticket

    def size(self) -> int:
        return self._stack.size()

    def snapshot_stats(self) -> SpinStats:
        with self._count_lock:
            return SpinStats(
                cas_retries=self._stack.cas_failures,
                threads_created=self._threads_created,
                pool_hits=self._pool_hits,
                pool_misses=self._pool_misses,
            )

    def shutdown(self, timeout: float = 30.0) -> None:
        """Dismiss idle workers and join every thread the pool ever started.

        Draining repeats because a worker that observed the pool still open
        may park itself one last time while the first drain is in flight.
        """
        self._closed = True
        deadline = time.monotonic() + timeout
        while True:
            while True:
                worker = self._stack.pop()
                if worker is None:
                    break
                worker.assign(_POISON)
            with self._count_lock:
                alive = [t for t in self._all_threads if t.is_alive()]
            if not alive or time.monotonic() > deadline:
                break
            alive[0].join(timeout=0.05)

    def __enter__(self) -> "TaskPool":
        return self

    def __exit__(self, *_exc) -> None:
        self.shutdown()


def _noop() -> None:
    return None


def run_noop_benchmark(config: PoolConfig,
                       tasks: int,
                       drivers: int = 1,
                       initial_workers: int = 0,
                       switch_interval_s: Optional[float] = None,
                       ) -> Tuple[int, SpinStats]:
    """Push `tasks` empty tasks through a fresh pool; returns (wall_ns, stats).

    The task count is split across `drivers` concurrently spawning threads,
    each awaiting every ticket, so spawn/retire cycles from different
    drivers collide on the pool. `switch_interval_s` optionally lowers the
    interpreter's thread switch interval for the duration: CPython otherwise
    runs each thread in multi-millisecond slices, which hides the
    read-to-CAS races that a preemptive scheduler exposes.
    """
    if tasks < 1:
        raise UsageError("tasks must be >= 1")
    if drivers < 1:
        raise UsageError("drivers must be >= 1")
    drivers = min(drivers, tasks)
    share = [tasks // drivers + (1 if i < tasks % drivers else 0)
             for i in range(drivers)]

    import sys

    old_interval = sys.getswitchinterval()
    if switch_interval_s is not None:
        sys.setswitchinterval(switch_interval_s)
    try:
        with TaskPool(config, initial_workers=initial_workers) as pool:
            def drive(count: int) -> None:
                for _ in range(count):
                    pool.spawn(_noop).result()

            t0 = time.monotonic_ns()
            if drivers == 1:
                drive(share[0])
            else:
                threads = [threading.Thread(target=drive, args=(c,),
                                            name=f"pool-driver-{i}")
                           for i, c in enumerate(share)]
                for t in threads:
                    t.start()
                for t in threads:
                    t.join()
            wall_ns = time.monotonic_ns() - t0
            stats = pool.snapshot_stats()
        return wall_ns, stats
    finally:
        sys.setswitchinterval(old_interval)
