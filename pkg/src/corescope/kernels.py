"""Fixed arithmetic and memory benchmark bodies with exact operation accounting.

The compute body is one canonical 8-operation chain (4 mul, 2 add, 2 sub)
over a small cyclic dataset, carrying the accumulator through every
operation so no step is dead code and the loop cannot be collapsed:

    x  = data[i mod len]
    t1 = acc * x
    t2 = t1 + c1
    t3 = t2 * acc
    t4 = t3 - x
    t5 = t4 * c2
    t6 = t5 + x
    t7 = t6 * t1
    acc = t7 - c3

The integer variant wraps modulo 2^64 (two's complement); the float variant
is IEEE double precision. A numba-jitted nogil path is used when available
so worker threads actually run in parallel; it is bit-identical to the pure
Python evaluation. Memory kernels operate on thread-private numpy blocks
whose fill/reduce operations likewise release the GIL.

Kernel bodies are pure per-thread computations over thread-private buffers;
one instance per worker thread.
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Union

import numpy as np

from .errors import ResourceError, UsageError

OPS_PER_ITERATION = 8
DEFAULT_DATASET_LEN = 128
PAPER_ITERATIONS = 10 ** 9
DESK_ITERATIONS = 10 ** 7
PAPER_BLOCK_BYTES = 256 * 2 ** 20
DESK_BLOCK_BYTES = 64 * 2 ** 20
MIN_BLOCK_BYTES = 2 ** 20

_MASK64 = (1 << 64) - 1
_SIGN64 = 1 << 63

# Final accumulators land here so the computation is observably consumed.
_sink: List[Union[int, float]] = []


def publish(value: Union[int, float]) -> None:
    del _sink[:]
    _sink.append(value)


class ComputeKind(Enum):
    INT_CHAIN = "int"
    FLOAT_CHAIN = "float"


class MemoryKind(Enum):
    READ = "read"
    WRITE = "write"


@dataclass(frozen=True)
class ComputeKernelSpec:
    kind: ComputeKind
    dataset_len: int = DEFAULT_DATASET_LEN
    iterations: int = PAPER_ITERATIONS
    ops_per_iteration: int = OPS_PER_ITERATION

    def __post_init__(self) -> None:
        if self.ops_per_iteration != OPS_PER_ITERATION:
            raise UsageError("the chain body is fixed at 8 operations per iteration")
        if self.dataset_len < 1:
            raise UsageError("dataset_len must be >= 1")
        if self.iterations < 1:
            raise UsageError("iterations must be >= 1")

    @property
    def total_ops_per_thread(self) -> int:
        return OPS_PER_ITERATION * self.iterations


@dataclass(frozen=True)
class MemoryKernelSpec:
    kind: MemoryKind
    block_bytes: int = PAPER_BLOCK_BYTES
    element_width: int = 8

    def __post_init__(self) -> None:
        if self.element_width not in (1, 2, 4, 8):
            raise UsageError("element_width must be 1, 2, 4 or 8 bytes")
        if self.block_bytes < MIN_BLOCK_BYTES:
            raise UsageError("block_bytes must be at least 1 MiB")
        if self.block_bytes % self.element_width != 0:
            raise UsageError("block_bytes must be divisible by element_width")


def wrap64(value: int) -> int:
    """Reduce an unbounded int to signed 64-bit two's complement."""
    value &= _MASK64
    return value - (1 << 64) if value & _SIGN64 else value


def chain_step_int(acc: int, x: int, c1: int, c2: int, c3: int) -> int:
    t1 = wrap64(acc * x)
    t2 = wrap64(t1 + c1)
    t3 = wrap64(t2 * acc)
    t4 = wrap64(t3 - x)
    t5 = wrap64(t4 * c2)
    t6 = wrap64(t5 + x)
    t7 = wrap64(t6 * t1)
    return wrap64(t7 - c3)


def chain_step_float(acc: float, x: float, c1: float, c2: float, c3: float) -> float:
    t1 = acc * x
    t2 = t1 + c1
    t3 = t2 * acc
    t4 = t3 - x
    t5 = t4 * c2
    t6 = t5 + x
    t7 = t6 * t1
    return t7 - c3


def _run_chain_python(kind: ComputeKind, data: List, iterations: int,
                      acc, c1, c2, c3):
    step = chain_step_int if kind is ComputeKind.INT_CHAIN else chain_step_float
    n = len(data)
    j = 0
    for _ in range(iterations):
        acc = step(acc, data[j], c1, c2, c3)
        j += 1
        if j == n:
            j = 0
    return acc


_NUMBA_FNS = None
_NUMBA_FAILED = False


def _numba_chains():
    """Compile the jitted nogil chain loops once; None when numba is unusable."""
    global _NUMBA_FNS, _NUMBA_FAILED
    if _NUMBA_FNS is not None or _NUMBA_FAILED:
        return _NUMBA_FNS
    if os.environ.get("CORESCOPE_NO_NUMBA"):
        _NUMBA_FAILED = True
        return None
    try:
        import numba
    except ImportError:
        _NUMBA_FAILED = True
        return None

    def chain_loop(data, iterations, acc, c1, c2, c3):
        n = data.shape[0]
        j = 0
        for _ in range(iterations):
            x = data[j]
            j += 1
            if j == n:
                j = 0
            t1 = acc * x
            t2 = t1 + c1
            t3 = t2 * acc
            t4 = t3 - x
            t5 = t4 * c2
            t6 = t5 + x
            t7 = t6 * t1
            acc = t7 - c3
        return acc

    try:
        i8 = numba.int64
        f8 = numba.float64
        int_fn = numba.njit(i8(i8[::1], i8, i8, i8, i8, i8),
                            nogil=True, cache=True)(chain_loop)
        float_fn = numba.njit(f8(f8[::1], i8, f8, f8, f8, f8),
                              nogil=True, cache=True)(chain_loop)
    except Exception:
        _NUMBA_FAILED = True
        return None
    _NUMBA_FNS = (int_fn, float_fn)
    return _NUMBA_FNS


def warmup_jit() -> bool:
    """Force JIT compilation outside any timed region; True if the fast path is live."""
    fns = _numba_chains()
    if fns is None:
        return False
    fns[0](np.array([1], dtype=np.int64), 1, 0, 0, 0, 0)
    fns[1](np.array([1.0], dtype=np.float64), 1, 0.0, 0.0, 0.0, 0.0)
    return True


class ComputeKernel:
    """One thread's arithmetic chain: buffers, seeds and the timed body."""

    def __init__(self, spec: ComputeKernelSpec, seed: Optional[int] = None):
        self.spec = spec
        self.seed = seed if seed is not None else random.SystemRandom().randrange(2 ** 63)
        self.units_per_run = spec.total_ops_per_thread
        self._data: Optional[np.ndarray] = None

    def prepare(self) -> None:
        """Initialize the dataset and chain constants from the runtime seed."""
        rng = random.Random(self.seed)
        if self.spec.kind is ComputeKind.INT_CHAIN:
            vals = [rng.randrange(-2 ** 31, 2 ** 31) for _ in range(self.spec.dataset_len)]
            self._data = np.array(vals, dtype=np.int64)
            self._acc0 = rng.randrange(-2 ** 31, 2 ** 31)
            self._c = tuple(rng.randrange(-2 ** 31, 2 ** 31) for _ in range(3))
        else:
            vals = [rng.uniform(0.5, 1.5) for _ in range(self.spec.dataset_len)]
            self._data = np.array(vals, dtype=np.float64)
            self._acc0 = rng.uniform(0.5, 1.5)
            self._c = tuple(rng.uniform(-1.0, 1.0) for _ in range(3))
        warmup_jit()

    def run(self) -> Union[int, float]:
        """Execute the chain `iterations` times; returns the final accumulator."""
        if self._data is None:
            raise UsageError("prepare() must run before run()")
        fns = _numba_chains()
        if fns is not None:
            fn = fns[0] if self.spec.kind is ComputeKind.INT_CHAIN else fns[1]
            result = fn(self._data, self.spec.iterations, self._acc0, *self._c)
            value = int(result) if self.spec.kind is ComputeKind.INT_CHAIN else float(result)
        else:
            data = [int(v) for v in self._data] if self.spec.kind is ComputeKind.INT_CHAIN \
                else [float(v) for v in self._data]
            value = _run_chain_python(self.spec.kind, data, self.spec.iterations,
                                      self._acc0, *self._c)
        publish(value)
        return value


_DTYPES = {1: np.uint8, 2: np.uint16, 4: np.uint32, 8: np.int64}


def sum_elements(block: np.ndarray):
    """Sequentially reduce every element; the read kernel's timed body."""
    return block.sum(dtype=block.dtype)


class MemoryKernel:
    """One thread's read or write pass over a private pre-touched block."""

    def __init__(self, spec: MemoryKernelSpec, fill_value: int = 0):
        self.spec = spec
        # Read blocks are zeroed before the timed region; a nonzero fill is
        # only for verifying the sum path actually visits every element.
        self.fill_value = fill_value
        self.units_per_run = spec.block_bytes
        self._block: Optional[np.ndarray] = None

    @property
    def n_elements(self) -> int:
        return self.spec.block_bytes // self.spec.element_width

    def prepare(self) -> None:
        """Allocate and fully pre-touch the block so no page faults are timed."""
        dtype = _DTYPES[self.spec.element_width]
        try:
            block = np.empty(self.n_elements, dtype=dtype)
        except MemoryError:
            raise ResourceError(
                f"cannot allocate {self.spec.block_bytes} bytes for one worker")
        if self.spec.kind is MemoryKind.READ:
            block.fill(self.fill_value)
        else:
            block.fill(1)
        self._block = block

    def run(self) -> int:
        """Timed pass: write zeros the whole block, read sums every element."""
        if self._block is None:
            raise UsageError("prepare() must run before run()")
        if self.spec.kind is MemoryKind.WRITE:
            self._block.fill(0)
            publish(0)
            return self.spec.block_bytes
        checksum = int(sum_elements(self._block))
        publish(checksum)
        return checksum


def make_kernel(spec: Union[ComputeKernelSpec, MemoryKernelSpec],
                seed: Optional[int] = None):
    if isinstance(spec, ComputeKernelSpec):
        return ComputeKernel(spec, seed=seed)
    return MemoryKernel(spec)


def total_units(spec: Union[ComputeKernelSpec, MemoryKernelSpec], n_threads: int) -> int:
    """Definitional accounting: ops or bytes across all workers."""
    if n_threads < 1:
        raise UsageError("n_threads must be >= 1")
    if isinstance(spec, ComputeKernelSpec):
        return spec.total_ops_per_thread * n_threads
    return spec.block_bytes * n_threads


def available_memory_bytes() -> int:
    try:
        with open("/proc/meminfo", "r") as fh:
            for line in fh:
                if line.startswith("MemAvailable:"):
                    return int(line.split()[1]) * 1024
    except OSError:
        pass
    try:
        return os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_AVPHYS_PAGES")
    except (ValueError, OSError, AttributeError):
        return 1 << 62  # unknown: let allocation itself fail


def check_memory_budget(n_threads: int, block_bytes: int,
                        available: Optional[int] = None) -> None:
    """Reject a memory trial before any allocation or timing happens."""
    if available is None:
        available = available_memory_bytes()
    needed = n_threads * block_bytes
    if needed > available:
        raise ResourceError(
            f"memory trial needs {block_bytes} bytes per worker x {n_threads} workers "
            f"= {needed} bytes, but only {available} bytes are available")
