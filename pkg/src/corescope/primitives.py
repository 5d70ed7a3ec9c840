"""Threading-primitive latencies measured as interval pairs.

Every benchmark produces (a_ns, b_ns) pairs: `a` is how long the initiating
call itself took, `b` is how long until its effect was observable in the
other thread. `b` may be smaller than `a` (the effect can land before the
call returns). "Observable" is operationalized as the first monotonic clock
read after the primitive returns in the observing thread, the only portable
hook available.

Each benchmark uses exactly the one or two threads it describes plus the
orchestrator; sample sets are assembled single-threaded afterwards.
Benchmarks must not run concurrently with each other.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

from .errors import UsageError, WatchdogError
from .stats import build_histogram, build_intensity, to_cycles
from .topology import Topology, apply_pin

_clock = time.monotonic_ns

DEFAULT_SAMPLES = 10 ** 5
DEFAULT_WATCHDOG_S = 10.0
# Give the peer time to actually park on the contended primitive after it
# announces the attempt; flag reads precede real blocking. A sleep, not a
# busy spin: the waiter needs the interpreter to reach its blocking acquire.
SETTLE_S = 10e-6


class CreateMode(Enum):
    JOINABLE = "joinable"
    DETACHED = "detached"


class CondMode(Enum):
    SIGNAL = "signal"
    BROADCAST = "broadcast"


@dataclass(frozen=True)
class IntervalSample:
    a_ns: int          # call duration
    b_ns: int          # effect latency, may be < a_ns
    flagged: bool = False   # protocol caveat, e.g. the waiter never blocked

    def __post_init__(self) -> None:
        if self.a_ns < 0 or self.b_ns < 0:
            raise UsageError("intervals must be non-negative")


@dataclass
class SampleSet:
    benchmark: str
    mode: str
    samples: List[IntervalSample] = field(default_factory=list)
    truncated: bool = False
    error: Optional[str] = None
    protocol_errors: int = 0

    def __post_init__(self) -> None:
        if not self.samples and not self.truncated:
            raise UsageError("a sample set needs at least one sample")

    def pairs_cycles(self, clock_ghz: float) -> List[Tuple[int, int]]:
        return [(to_cycles(s.a_ns, clock_ghz), to_cycles(s.b_ns, clock_ghz))
                for s in self.samples]

    def fraction_b_lt_a(self) -> float:
        if not self.samples:
            raise UsageError("empty sample set")
        return sum(1 for s in self.samples if s.b_ns < s.a_ns) / len(self.samples)


def summarize(samples: SampleSet, clock_ghz: float, bin_width: int = 2000) -> dict:
    """Histograms, per-range percentages and the below-diagonal fraction."""
    pairs = samples.pairs_cycles(clock_ghz)
    hist_a = build_histogram([a for a, _ in pairs], bin_width)
    hist_b = build_histogram([b for _, b in pairs], bin_width)
    grid = build_intensity(pairs, bin_width)
    return {
        "count": len(samples.samples),
        "flagged": sum(1 for s in samples.samples if s.flagged),
        "histogram_a": hist_a.to_json(),
        "histogram_b": hist_b.to_json(),
        "percent_in_ranges": {
            "a": hist_a.percentages(),
            "b": hist_b.percentages(),
        },
        "fraction_b_lt_a": samples.fraction_b_lt_a(),
        "intensity": grid.to_json(),
    }


def _settle() -> None:
    time.sleep(SETTLE_S)


def bench_thread_create(mode: CreateMode, samples: int = DEFAULT_SAMPLES) -> SampleSet:
    """Spawn cost: a = create call duration, b = delay until the body runs.

    Creation here is constructing and starting one thread. Samples never
    overlap: joinable mode joins before the next spawn, detached mode waits
    on a completion flag. A spawn failure mid-run truncates the set with an
    error annotation instead of losing the collected samples.
    """
    if samples < 1:
        raise UsageError("samples must be >= 1")
    out: List[IntervalSample] = []
    for _ in range(samples):
        cell = [0]
        done = threading.Event()
        detached = mode is CreateMode.DETACHED

        def body() -> None:
            cell[0] = _clock()
            if detached:
                done.set()

        try:
            t0 = _clock()
            th = threading.Thread(target=body, daemon=detached)
            th.start()
            t1 = _clock()
        except RuntimeError as exc:
            return SampleSet(benchmark="thread-create", mode=mode.value,
                             samples=out, truncated=True, error=str(exc))
        if detached:
            done.wait()
        else:
            th.join()
        out.append(IntervalSample(a_ns=t1 - t0, b_ns=cell[0] - t0))
    return SampleSet(benchmark="thread-create", mode=mode.value, samples=out)


def bench_mutex_uncontended(pairs: int = 1000, clock_ghz: float = 1.0) -> float:
    """Average cycles for one lock+unlock pair on a single thread."""
    if pairs < 1:
        raise UsageError("pairs must be >= 1")
    lock = threading.Lock()
    acquire, release = lock.acquire, lock.release
    t0 = _clock()
    for _ in range(pairs):
        acquire()
        release()
    t1 = _clock()
    return to_cycles(t1 - t0, clock_ghz) / pairs


def _maybe_pin(assignment: Optional[int], topo: Optional[Topology]) -> None:
    if assignment is not None and topo is not None:
        apply_pin(assignment, topo)


def bench_mutex_handoff(samples: int = DEFAULT_SAMPLES,
                        watchdog_s: float = DEFAULT_WATCHDOG_S,
                        pin: Optional[Tuple[int, int]] = None,
                        topo: Optional[Topology] = None) -> SampleSet:
    """Contended mutex wake latency between a holder and one waiter.

    Per sample the waiter announces it is about to block and acquires the
    held mutex; the holder sees the announcement, settle-spins, then unlocks
    (a = unlock duration) and the waiter stamps the clock as soon as it owns
    the mutex (b = wake latency). Roles re-arm through the mutex itself.
    Samples where the waiter found the mutex free (never blocked) carry the
    flagged bit. A turn counter guarded by the mutex detects any handoff
    that did not alternate.
    """
    if samples < 1:
        raise UsageError("samples must be >= 1")
    mutex = threading.Lock()
    about_to_block = threading.Event()
    sample_done = threading.Event()
    rearmed = threading.Event()
    tripped = threading.Event()
    a_rec: List[Tuple[int, int]] = [(0, 0)] * samples
    b_rec: List[Tuple[int, bool]] = [(0, False)] * samples
    turn = [0]
    protocol_errors = [0]

    def trip() -> None:
        tripped.set()
        about_to_block.set()
        sample_done.set()
        rearmed.set()

    def signaler() -> None:
        _maybe_pin(pin[1] if pin else None, topo)
        if not mutex.acquire(timeout=watchdog_s):
            return trip()
        for i in range(samples):
            if not about_to_block.wait(timeout=watchdog_s) or tripped.is_set():
                mutex.release()
                return trip()
            about_to_block.clear()
            _settle()
            turn[0] = i + 1
            t0 = _clock()
            mutex.release()
            t1 = _clock()
            a_rec[i] = (t0, t1)
            if not sample_done.wait(timeout=watchdog_s) or tripped.is_set():
                return trip()
            sample_done.clear()
            if not mutex.acquire(timeout=watchdog_s):
                return trip()
            rearmed.set()
        mutex.release()

    def waiter() -> None:
        _maybe_pin(pin[0] if pin else None, topo)
        for i in range(samples):
            about_to_block.set()
            no_block = mutex.acquire(blocking=False)
            if not no_block and not mutex.acquire(timeout=watchdog_s):
                return trip()
            t2 = _clock()
            if turn[0] != i + 1:
                protocol_errors[0] += 1
            b_rec[i] = (t2, no_block)
            mutex.release()
            sample_done.set()
            if not rearmed.wait(timeout=watchdog_s) or tripped.is_set():
                return trip()
            rearmed.clear()

    ts = threading.Thread(target=signaler, name="handoff-signaler")
    tw = threading.Thread(target=waiter, name="handoff-waiter")
    ts.start()
    tw.start()
    ts.join()
    tw.join()
    if tripped.is_set():
        raise WatchdogError(
            f"mutex handoff watchdog ({watchdog_s}s) fired; "
            f"completed {sum(1 for t0, _ in a_rec if t0)} of {samples} samples")

    out = []
    for (t0, t1), (t2, no_block) in zip(a_rec, b_rec):
        out.append(IntervalSample(a_ns=t1 - t0, b_ns=max(0, t2 - t0), flagged=no_block))
    return SampleSet(benchmark="mutex-handoff", mode="", samples=out,
                     protocol_errors=protocol_errors[0])


def bench_condvar(mode: CondMode,
                  samples: int = DEFAULT_SAMPLES,
                  watchdog_s: float = DEFAULT_WATCHDOG_S,
                  pin: Optional[Tuple[int, int]] = None,
                  topo: Optional[Topology] = None) -> SampleSet:
    """Condition-variable wake latency through signal or broadcast.

    The waiter publishes its round under the mutex and waits with a
    predicate re-check, so spurious wakeups are absorbed and no wakeup can
    be lost; the signaler acquires the mutex (possible only once the waiter
    is parked), advances the predicate and fires (a = call duration). The
    waiter stamps the clock after waking with the mutex re-held
    (b = wake latency). With a single waiter, broadcast and signal are
    semantically interchangeable.
    """
    if samples < 1:
        raise UsageError("samples must be >= 1")
    mutex = threading.Lock()
    cond = threading.Condition(mutex)
    ready_round = [0]
    fired_round = [0]
    tripped = threading.Event()
    a_rec: List[Tuple[int, int]] = [(0, 0)] * samples
    b_rec: List[int] = [0] * samples
    notify_name = "notify_all" if mode is CondMode.BROADCAST else "notify"

    def signaler() -> None:
        _maybe_pin(pin[1] if pin else None, topo)
        fire = getattr(cond, notify_name)
        for i in range(1, samples + 1):
            deadline = time.monotonic() + watchdog_s
            while ready_round[0] < i:
                if tripped.is_set() or time.monotonic() > deadline:
                    return tripped.set()
                time.sleep(0)   # yield so the waiter can publish its round
            with cond:
                fired_round[0] = i
                t0 = _clock()
                fire()
                t1 = _clock()
            a_rec[i - 1] = (t0, t1)

    def waiter() -> None:
        _maybe_pin(pin[0] if pin else None, topo)
        for i in range(1, samples + 1):
            with cond:
                ready_round[0] = i
                while fired_round[0] < i:
                    if not cond.wait(timeout=watchdog_s) or tripped.is_set():
                        return tripped.set()
                t2 = _clock()
            b_rec[i - 1] = t2

    ts = threading.Thread(target=signaler, name="cond-signaler")
    tw = threading.Thread(target=waiter, name="cond-waiter")
    ts.start()
    tw.start()
    ts.join()
    tw.join()
    if tripped.is_set():
        raise WatchdogError(
            f"condvar watchdog ({watchdog_s}s) fired; "
            f"completed {sum(1 for t0, _ in a_rec if t0)} of {samples} samples")

    out = []
    for (t0, t1), t2 in zip(a_rec, b_rec):
        out.append(IntervalSample(a_ns=t1 - t0, b_ns=max(0, t2 - t0)))
    return SampleSet(benchmark=f"cond-{mode.value}", mode=mode.value, samples=out)
