"""Concurrency-exposed FFT and recursive block matrix multiplication.

Both workloads submit their recursive decomposition to a task pool and wait
on completion tickets, so they exercise spawn/retire exactly the way a
fine-grained runtime does. Numerical results are independent of the pool
variant: every combine runs in a fixed order on disjoint buffers, so matmul
output is bit-identical across runs and variants, and the FFT matches the
direct transform to rounding error.

Reentrant by design: tasks spawn child tasks from worker threads, and the
pool's create-on-miss policy guarantees progress while parents block on
their children.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import UsageError
from .taskpool import PoolVariant, SpinStats, TaskPool

DEFAULT_FFT_CUTOFF = 64

_clock = time.monotonic_ns


@dataclass(frozen=True)
class FftSpec:
    """Radix-2 FFT of 2**size_log2 points, recursion spawned above the cutoff."""

    size_log2: int
    pool_variant: PoolVariant = PoolVariant.MUTEX
    cutoff: int = DEFAULT_FFT_CUTOFF

    def __post_init__(self) -> None:
        if not 1 <= self.size_log2 <= 16:
            raise UsageError("size_log2 must be in [1, 16]")
        if self.cutoff < 1:
            raise UsageError("cutoff must be >= 1")

    @property
    def points(self) -> int:
        return 2 ** self.size_log2


@dataclass(frozen=True)
class MatmulSpec:
    """n x n double-precision product via k levels of 2x2 block recursion."""

    n: int
    recursions: int
    pool_variant: PoolVariant = PoolVariant.MUTEX

    def __post_init__(self) -> None:
        if self.n < 1:
            raise UsageError("matrix dimension must be >= 1")
        if self.recursions < 0:
            raise UsageError("recursions must be >= 0")
        if self.n % (2 ** self.recursions) != 0:
            raise UsageError(
                f"dimension {self.n} is not divisible by 2^{self.recursions}")

    @property
    def leaf_dim(self) -> int:
        return self.n // 2 ** self.recursions


def leaf_flops(spec: MatmulSpec) -> int:
    """Multiply+add operations in one leaf product: 2 * (n / 2^k)^3."""
    return 2 * spec.leaf_dim ** 3


def matmul_leaf_tasks(recursions: int) -> int:
    """Maximum concurrent leaf multiplications: 8^k (1 means inline, no spawn)."""
    return 8 ** recursions


def matmul_spawned_total(recursions: int) -> int:
    """All tasks submitted over the run: 8 multiplies + 4 adds per interior
    node, summed over the recursion tree = 12 * (8^k - 1) / 7."""
    return 12 * (8 ** recursions - 1) // 7


def fft_spawned_total(spec: FftSpec) -> int:
    """Child tasks submitted by the recursion: 2^(levels above cutoff) * 2 - 2."""
    levels = 0
    size = spec.points
    while size > spec.cutoff:
        levels += 1
        size //= 2
    return 2 ** (levels + 1) - 2


def task_count(spec) -> int:
    """Headline concurrency figure for a workload spec."""
    if isinstance(spec, MatmulSpec):
        return matmul_leaf_tasks(spec.recursions)
    if isinstance(spec, FftSpec):
        return fft_spawned_total(spec)
    raise UsageError(f"not a workload spec: {spec!r}")


_twiddles: Dict[int, np.ndarray] = {}


def _twiddle(n: int) -> np.ndarray:
    tw = _twiddles.get(n)
    if tw is None:
        tw = np.exp(-2j * np.pi * np.arange(n // 2) / n)
        _twiddles[n] = tw
    return tw


def _combine(even: np.ndarray, odd: np.ndarray) -> np.ndarray:
    t = _twiddle(2 * len(even)) * odd
    return np.concatenate([even + t, even - t])


def _fft_inline(x: np.ndarray) -> np.ndarray:
    if len(x) == 1:
        return x.copy()
    return _combine(_fft_inline(x[0::2]), _fft_inline(x[1::2]))


def _fft_tasked(x: np.ndarray, pool: TaskPool, cutoff: int) -> np.ndarray:
    if len(x) <= cutoff:
        return _fft_inline(x)
    even_half = np.ascontiguousarray(x[0::2])
    odd_half = np.ascontiguousarray(x[1::2])
    t_even = pool.spawn(lambda: _fft_tasked(even_half, pool, cutoff))
    t_odd = pool.spawn(lambda: _fft_tasked(odd_half, pool, cutoff))
    return _combine(t_even.result(), t_odd.result())


def fft_run(spec: FftSpec, pool: TaskPool,
            x: Optional[np.ndarray] = None,
            seed: int = 0) -> Tuple[np.ndarray, int, SpinStats]:
    """Transform x (seeded random when omitted); returns (spectrum, wall_ns, stats)."""
    if x is None:
        x = random_complex(spec.points, seed)
    x = np.asarray(x, dtype=np.complex128)
    if len(x) != spec.points:
        raise UsageError(f"input length {len(x)} != 2^{spec.size_log2}")
    t0 = _clock()
    spectrum = _fft_tasked(x, pool, spec.cutoff)
    wall_ns = _clock() - t0
    return spectrum, wall_ns, pool.snapshot_stats()


_NUMBA_LEAF = None
_NUMBA_LEAF_FAILED = False


def _numba_leaf():
    global _NUMBA_LEAF, _NUMBA_LEAF_FAILED
    if _NUMBA_LEAF is not None or _NUMBA_LEAF_FAILED:
        return _NUMBA_LEAF
    if os.environ.get("CORESCOPE_NO_NUMBA"):
        _NUMBA_LEAF_FAILED = True
        return None
    try:
        import numba

        f8 = numba.float64

        @numba.njit(numba.void(f8[:, ::1], f8[:, ::1], f8[:, ::1]),
                    nogil=True, cache=True)
        def leaf(a, b, out):
            m = a.shape[0]
            q = a.shape[1]
            p = b.shape[1]
            for i in range(m):
                for j in range(p):
                    s = 0.0
                    for k in range(q):
                        s += a[i, k] * b[k, j]
                    out[i, j] = s

        _NUMBA_LEAF = leaf
    except Exception:
        _NUMBA_LEAF_FAILED = True
    return _NUMBA_LEAF


def _leaf_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Straightforward triple loop, 2*m^3 flops, ascending-k accumulation."""
    out = np.empty((a.shape[0], b.shape[1]), dtype=np.float64)
    fast = _numba_leaf()
    if fast is not None:
        fast(a, b, out)
        return out
    m, q = a.shape
    p = b.shape[1]
    for i in range(m):
        for j in range(p):
            s = 0.0
            for k in range(q):
                s += a[i, k] * b[k, j]
            out[i, j] = s
    return out


def _mm_tasked(a: np.ndarray, b: np.ndarray, depth: int, pool: TaskPool) -> np.ndarray:
    if depth == 0:
        return _leaf_multiply(a, b)
    m = a.shape[0] // 2
    # Materialized contiguous quadrants; output quadrants are disjoint.
    a11, a12 = a[:m, :m].copy(), a[:m, m:].copy()
    a21, a22 = a[m:, :m].copy(), a[m:, m:].copy()
    b11, b12 = b[:m, :m].copy(), b[:m, m:].copy()
    b21, b22 = b[m:, :m].copy(), b[m:, m:].copy()

    products = [(a11, b11), (a12, b21),   # c11
                (a11, b12), (a12, b22),   # c12
                (a21, b11), (a22, b21),   # c21
                (a21, b12), (a22, b22)]   # c22
    tickets = [pool.spawn(lambda lhs=lhs, rhs=rhs: _mm_tasked(lhs, rhs, depth - 1, pool))
               for lhs, rhs in products]
    partial = [t.result() for t in tickets]   # phase barrier before the adds

    add_tickets = [pool.spawn(lambda u=partial[2 * q], v=partial[2 * q + 1]: u + v)
                   for q in range(4)]
    quadrants = [t.result() for t in add_tickets]

    out = np.empty((2 * m, 2 * m), dtype=np.float64)
    out[:m, :m] = quadrants[0]
    out[:m, m:] = quadrants[1]
    out[m:, :m] = quadrants[2]
    out[m:, m:] = quadrants[3]
    return out


def matmul_run(spec: MatmulSpec, pool: TaskPool,
               a: Optional[np.ndarray] = None,
               b: Optional[np.ndarray] = None,
               seed: int = 0) -> Tuple[np.ndarray, int, SpinStats]:
    """Multiply a @ b by recursive block decomposition on the pool.

    Returns (product, wall_ns, stats). Operands default to seeded random
    matrices so CLI runs are reproducible.
    """
    if a is None or b is None:
        rng = np.random.default_rng(seed)
        a = rng.random((spec.n, spec.n)) if a is None else a
        b = rng.random((spec.n, spec.n)) if b is None else b
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape != (spec.n, spec.n) or b.shape != (spec.n, spec.n):
        raise UsageError(
            f"operands must both be {spec.n}x{spec.n}, got {a.shape} and {b.shape}")
    t0 = _clock()
    product = _mm_tasked(a, b, spec.recursions, pool)
    wall_ns = _clock() - t0
    return product, wall_ns, pool.snapshot_stats()


def random_complex(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.random(n) + 1j * rng.random(n)


def make_pool(spec, max_pool_size: int = 64, initial_workers: int = 0,
              backoff=None) -> TaskPool:
    """Build the pool a workload spec asks for."""
    from .taskpool import Backoff, PoolConfig

    cfg = PoolConfig(variant=spec.pool_variant,
                     max_pool_size=max_pool_size,
                     backoff=backoff or Backoff.NONE)
    return TaskPool(cfg, initial_workers=initial_workers)
