import collections
import threading

import pytest

from corescope.errors import UsageError
from corescope.taskpool import (
    AtomicHead,
    Backoff,
    CasStack,
    MutexStack,
    PoolConfig,
    PoolVariant,
    TaskPool,
    run_noop_benchmark,
)


def mutex_cfg(cap=8, **kw):
    return PoolConfig(variant=PoolVariant.MUTEX, max_pool_size=cap, **kw)


def cas_cfg(cap=8, **kw):
    return PoolConfig(variant=PoolVariant.CAS, max_pool_size=cap, **kw)


class Tag:
    """Stand-in stack entry; anything with a _next slot can live in the stack."""

    __slots__ = ("name", "_next")

    def __init__(self, name):
        self.name = name
        self._next = None

    def __repr__(self):
        return f"Tag({self.name})"


class TestAtomicHead:
    def test_cas_swaps_only_on_identity(self):
        head = AtomicHead((0, 0, None))
        old = head.read()
        assert head.cas(old, (1, 1, "x"))
        assert head.read() == (1, 1, "x")
        assert not head.cas(old, (2, 2, "y"))
        assert head.cas_failures == 1

    def test_failures_accumulate(self):
        head = AtomicHead((0, 0, None))
        stale = head.read()
        head.cas(stale, (1, 0, None))
        for _ in range(5):
            head.cas(stale, (9, 9, None))
        assert head.cas_failures == 5


class TestCasStackSequential:
    def test_push_then_pop_returns_entry_without_retries(self):
        stack = CasStack(capacity=4)
        w = Tag("w1")
        assert stack.push(w)
        assert stack.cas_failures == 0
        assert stack.pop() is w
        assert stack.cas_failures == 0

    def test_pop_empty_returns_none(self):
        assert CasStack(capacity=4).pop() is None

    def test_lifo_order(self):
        stack = CasStack(capacity=4)
        a, b = Tag("a"), Tag("b")
        stack.push(a)
        stack.push(b)
        assert stack.pop() is b
        assert stack.pop() is a

    def test_capacity_bound(self):
        stack = CasStack(capacity=1)
        assert stack.push(Tag("a"))
        assert not stack.push(Tag("b"))
        assert stack.size() == 1

    def test_version_advances_on_every_success(self):
        stack = CasStack(capacity=4)
        v0 = stack.head.read()[0]
        stack.push(Tag("a"))
        stack.pop()
        assert stack.head.read()[0] == v0 + 2


class TestCasStackConcurrent:
    def test_multiset_preserved_under_hammering(self):
        # 8 threads x 10^4 push/pop pairs circulating 8 tagged entries:
        # at quiescence the entries held plus the stack content must be
        # exactly the original instances, so nothing was duplicated or lost.
        n_threads, cycles = 8, 10_000
        stack = CasStack(capacity=n_threads)
        originals = [Tag(f"t{i}") for i in range(n_threads)]
        finals = [None] * n_threads
        pops = [0] * n_threads

        def hammer(idx):
            me = originals[idx]
            for _ in range(cycles):
                assert stack.push(me)   # cap == n_threads: can never be full
                got = stack.pop()
                while got is None:
                    got = stack.pop()
                pops[idx] += 1
                me = got
            finals[idx] = me

        threads = [threading.Thread(target=hammer, args=(i,)) for i in range(n_threads)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sum(pops) == n_threads * cycles
        assert stack.size() == 0 and stack.pop() is None
        assert sorted(id(t) for t in finals) == sorted(id(t) for t in originals)

    def test_size_never_exceeds_capacity_under_churn(self):
        stack = CasStack(capacity=2)
        stop = threading.Event()
        violations = []

        def churn(idx):
            me = Tag(f"c{idx}")
            while not stop.is_set():
                if stack.push(me):
                    got = None
                    while got is None and not stop.is_set():
                        got = stack.pop()
                    me = got or Tag(f"c{idx}r")

        def watch():
            while not stop.is_set():
                if stack.size() > 2:
                    violations.append(stack.size())

        workers = [threading.Thread(target=churn, args=(i,)) for i in range(4)]
        watcher = threading.Thread(target=watch)
        for t in workers:
            t.start()
        watcher.start()
        threading.Event().wait(0.5)
        stop.set()
        for t in workers + [watcher]:
            t.join()
        assert violations == []


class TestPoolAccounting:
    def test_spawn_on_warm_pool_is_a_hit(self):
        with TaskPool(mutex_cfg(), initial_workers=2) as pool:
            before = pool.snapshot_stats()
            assert before.threads_created == 2
            pool.spawn(lambda: None).result(timeout=5)
            after = pool.snapshot_stats()
        assert after.pool_hits == before.pool_hits + 1
        assert after.threads_created == before.threads_created

    def test_spawn_on_empty_pool_is_a_miss_creating_a_thread(self):
        with TaskPool(mutex_cfg()) as pool:
            pool.spawn(lambda: None).result(timeout=5)
            stats = pool.snapshot_stats()
        assert stats.pool_misses == 1
        assert stats.threads_created == 1

    def test_fresh_pool_counters_zero_except_initial_threads(self):
        with TaskPool(cas_cfg(), initial_workers=3) as pool:
            stats = pool.snapshot_stats()
        assert (stats.cas_retries, stats.pool_hits, stats.pool_misses) == (0, 0, 0)
        assert stats.threads_created == 3

    def test_mutex_pool_never_cas_retries(self):
        wall, stats = run_noop_benchmark(mutex_cfg(), tasks=2000, drivers=4)
        assert stats.cas_retries == 0
        assert stats.pool_hits + stats.pool_misses == 2000

    def test_ten_thousand_spawns_all_complete_with_exact_accounting(self):
        for cfg in (mutex_cfg(16), cas_cfg(16)):
            with TaskPool(cfg) as pool:
                tickets = [pool.spawn(lambda: 1) for _ in range(10_000)]
                assert all(t.result(timeout=30) == 1 for t in tickets)
                stats = pool.snapshot_stats()
            assert stats.pool_hits + stats.pool_misses == 10_000

    def test_cas_retries_monotone_under_load(self):
        with TaskPool(cas_cfg(4)) as pool:
            last = 0
            for _ in range(20):
                for t in [pool.spawn(lambda: None) for _ in range(50)]:
                    t.wait(timeout=10)
                now = pool.snapshot_stats().cas_retries
                assert now >= last
                last = now


class TestPoolSemantics:
    def test_exactly_once_execution_under_stress(self):
        counts = collections.Counter()
        lock = threading.Lock()

        def make_task(i):
            def task():
                with lock:
                    counts[i] += 1
            return task

        with TaskPool(cas_cfg(8)) as pool:
            drivers = []
            for base in range(4):
                def drive(base=base):
                    for i in range(base * 2000, (base + 1) * 2000):
                        pool.spawn(make_task(i)).wait(timeout=30)
                drivers.append(threading.Thread(target=drive))
            for d in drivers:
                d.start()
            for d in drivers:
                d.join()
        assert len(counts) == 8000
        assert set(counts.values()) == {1}

    def test_variants_observationally_equivalent(self):
        def run(cfg):
            seen = collections.Counter()
            lock = threading.Lock()
            with TaskPool(cfg) as pool:
                tickets = []
                for i in range(500):
                    def task(i=i):
                        with lock:
                            seen[i] += 1
                        return i
                    tickets.append(pool.spawn(task))
                results = sorted(t.result(timeout=10) for t in tickets)
            return seen, results

        seen_m, res_m = run(mutex_cfg(4))
        seen_c, res_c = run(cas_cfg(4))
        assert seen_m == seen_c
        assert res_m == res_c == list(range(500))

    def test_task_error_surfaces_on_ticket(self):
        with TaskPool(mutex_cfg()) as pool:
            ticket = pool.spawn(lambda: 1 / 0)
            with pytest.raises(ZeroDivisionError):
                ticket.result(timeout=5)

    def test_worker_retire_respects_zero_capacity(self):
        with TaskPool(mutex_cfg(cap=0)) as pool:
            for _ in range(3):
                pool.spawn(lambda: None).result(timeout=5)
            stats = pool.snapshot_stats()
        # nothing can ever be pooled: every spawn is a miss on a new thread
        assert stats.pool_hits == 0
        assert stats.threads_created == 3

    def test_pool_size_bounded_by_cap(self):
        with TaskPool(cas_cfg(cap=2)) as pool:
            for t in [pool.spawn(lambda: None) for _ in range(50)]:
                t.result(timeout=10)
            assert pool.size() <= 2

    def test_spawn_after_shutdown_rejected(self):
        pool = TaskPool(mutex_cfg())
        pool.shutdown()
        with pytest.raises(UsageError):
            pool.spawn(lambda: None)

    def test_inline_policy_never_creates_threads(self):
        cfg = PoolConfig(variant=PoolVariant.MUTEX, max_pool_size=4,
                         spawn_overflow=False)
        with TaskPool(cfg) as pool:
            assert pool.spawn(lambda: 41).result(timeout=1) == 41
            stats = pool.snapshot_stats()
        assert stats.threads_created == 0

    def test_tasks_can_spawn_subtasks_from_workers(self):
        with TaskPool(cas_cfg(4)) as pool:
            def parent():
                child = pool.spawn(lambda: 21)
                return child.result(timeout=10) * 2

            assert pool.spawn(parent).result(timeout=10) == 42


class TestNoopBenchmark:
    def test_exact_task_accounting(self):
        wall, stats = run_noop_benchmark(cas_cfg(8), tasks=1000, drivers=2)
        assert wall > 0
        assert stats.pool_hits + stats.pool_misses == 1000

    def test_contention_produces_cas_retries(self):
        # Concurrent spawn/retire cycles with a preemptive switch interval
        # must show the lockless pool actually retrying.
        _, stats = run_noop_benchmark(cas_cfg(8), tasks=4000, drivers=8,
                                      switch_interval_s=1e-5)
        assert stats.cas_retries > 0

    def test_single_driver_zero_retries(self):
        _, stats = run_noop_benchmark(cas_cfg(8), tasks=500, drivers=1)
        assert stats.cas_retries == 0

    def test_bad_args_rejected(self):
        with pytest.raises(UsageError):
            run_noop_benchmark(cas_cfg(), tasks=0)
        with pytest.raises(UsageError):
            run_noop_benchmark(cas_cfg(), tasks=10, drivers=0)

    def test_backoff_variant_still_correct(self):
        _, stats = run_noop_benchmark(cas_cfg(8, backoff=Backoff.EXP),
                                      tasks=1000, drivers=4,
                                      switch_interval_s=1e-5)
        assert stats.pool_hits + stats.pool_misses == 1000


class TestMutexStack:
    def test_same_interface(self):
        stack = MutexStack(capacity=1)
        a = Tag("a")
        assert stack.push(a)
        assert not stack.push(Tag("b"))
        assert stack.pop() is a
        assert stack.pop() is None
        assert stack.cas_failures == 0
