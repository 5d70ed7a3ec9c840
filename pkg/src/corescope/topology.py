"""Machine shape discovery and worker-to-CPU pin plans.

The machine model is a uniform grid: packages x cores_per_package x
threads_per_core, with logical CPU ids laid out package-major so that every
consecutive run of threads_per_core ids covers the thread slots of one core.
On Linux the real id table is read from sysfs when it matches that uniform
shape; otherwise discovery degrades to a flat single-package model and the
result is flagged so downstream metadata records it.

Topology and PinPlan are immutable after construction and safe to share
across threads. apply_pin must be invoked on the thread being pinned.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

from .errors import UsageError

_SYSFS_CPU = "/sys/devices/system/cpu"


class MappingStrategy(Enum):
    """How workers are bound to logical CPUs."""

    DUMB = "dumb"          # worker i -> id i mod total, ascending
    ROUND_ROBIN = "rr"     # spread over packages, then cores, then interleaved slots
    AUTO = "auto"          # no binding, scheduler decides

    @classmethod
    def from_name(cls, name: str) -> "MappingStrategy":
        for member in cls:
            if name in (member.value, member.name.lower()):
                return member
        raise UsageError(f"unknown mapping strategy {name!r}")


@dataclass(frozen=True)
class Topology:
    """Uniform machine shape plus the nominal clock used for cycle normalization.

    `id_table`, when present, maps our canonical (package, core, slot) order
    to the operating system's logical CPU ids; without it the canonical
    package-major arithmetic layout is used directly.
    """

    packages: int
    cores_per_package: int
    threads_per_core: int
    clock_ghz: float = 1.0
    source: str = "config"   # "sysfs" | "flat-fallback" | "config"
    id_table: Optional[Tuple[int, ...]] = None

    def __post_init__(self) -> None:
        for name in ("packages", "cores_per_package", "threads_per_core"):
            if getattr(self, name) < 1:
                raise UsageError(f"topology.{name} must be >= 1")
        if self.clock_ghz <= 0:
            raise UsageError("topology.clock_ghz must be > 0")
        if self.id_table is not None and len(self.id_table) != self.total:
            raise UsageError("id_table length must equal topology total")

    @property
    def total(self) -> int:
        return self.packages * self.cores_per_package * self.threads_per_core

    def logical_id(self, package: int, core: int, slot: int) -> int:
        """Bijection (package, core, slot) -> [0, total)."""
        if not (0 <= package < self.packages
                and 0 <= core < self.cores_per_package
                and 0 <= slot < self.threads_per_core):
            raise UsageError(f"coordinates out of range: {(package, core, slot)}")
        index = (package * self.cores_per_package + core) * self.threads_per_core + slot
        if self.id_table is not None:
            return self.id_table[index]
        return index

    def coordinates(self, logical: int) -> Tuple[int, int, int]:
        """Inverse of logical_id."""
        if self.id_table is not None:
            index = self.id_table.index(logical)
        else:
            index = logical
        if not 0 <= index < self.total:
            raise UsageError(f"logical id out of range: {logical}")
        slot = index % self.threads_per_core
        core = (index // self.threads_per_core) % self.cores_per_package
        package = index // (self.threads_per_core * self.cores_per_package)
        return package, core, slot

    def to_json(self) -> dict:
        return {
            "packages": self.packages,
            "cores_per_package": self.cores_per_package,
            "threads_per_core": self.threads_per_core,
            "total": self.total,
            "clock_ghz": self.clock_ghz,
            "source": self.source,
        }


@dataclass(frozen=True)
class PinPlan:
    """Per-worker CPU assignments; None means unpinned (scheduler decides)."""

    assignments: Tuple[Optional[int], ...]
    strategy: MappingStrategy
    topology: Topology

    def __len__(self) -> int:
        return len(self.assignments)

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "assignments": list(self.assignments),
        }


def slot_order(threads_per_core: int) -> List[int]:
    """Order in which thread slots of a core are filled by the round-robin scheme.

    Even slot counts interleave the two halves ([0, t/2, 1, t/2+1, ...]) so
    consecutive worker groups land on alternating execution-unit halves; odd
    counts fall back to natural order.
    """
    t = threads_per_core
    if t % 2 != 0:
        return list(range(t))
    order = []
    for k in range(t // 2):
        order.append(k)
        order.append(t // 2 + k)
    return order


def pin_plan(strategy: MappingStrategy, n: int, topo: Topology) -> PinPlan:
    """Compute the worker -> logical CPU assignment for `n` workers.

    Deterministic: identical inputs give identical plans. For n <= topo.total
    the dumb and round-robin assignments are pairwise distinct.
    """
    if n < 1:
        raise UsageError(f"worker count must be >= 1, got {n}")
    if strategy is MappingStrategy.AUTO:
        return PinPlan(assignments=(None,) * n, strategy=strategy, topology=topo)

    if strategy is MappingStrategy.DUMB:
        ids: List[Optional[int]] = []
        for i in range(n):
            index = i % topo.total
            slot = index % topo.threads_per_core
            core = (index // topo.threads_per_core) % topo.cores_per_package
            package = index // (topo.threads_per_core * topo.cores_per_package)
            ids.append(topo.logical_id(package, core, slot))
        return PinPlan(assignments=tuple(ids), strategy=strategy, topology=topo)

    # Round robin: groups of packages*cores_per_package workers fill one slot
    # position core-by-core across all packages before moving to the next
    # slot in the interleave order.
    order = slot_order(topo.threads_per_core)
    per_group = topo.packages * topo.cores_per_package
    ids = []
    for i in range(n):
        g = i // per_group
        j = i % per_group
        package = j % topo.packages
        core = (j // topo.packages) % topo.cores_per_package
        slot = order[g % topo.threads_per_core]
        ids.append(topo.logical_id(package, core, slot))
    return PinPlan(assignments=tuple(ids), strategy=strategy, topology=topo)


def _read_int(path: str) -> Optional[int]:
    try:
        with open(path, "r") as fh:
            return int(fh.read().strip())
    except (OSError, ValueError):
        return None


def _sysfs_topology() -> Optional[Tuple[int, int, int, Tuple[int, ...]]]:
    """Infer a uniform (packages, cores, threads) shape plus id table from sysfs.

    Returns None when sysfs is unavailable or the machine is not uniform
    (heterogeneous core counts, offline CPUs, sparse ids).
    """
    if not os.path.isdir(_SYSFS_CPU):
        return None
    cpus = []
    for name in os.listdir(_SYSFS_CPU):
        m = re.fullmatch(r"cpu(\d+)", name)
        if m:
            cpus.append(int(m.group(1)))
    cpus.sort()
    if not cpus or cpus != list(range(len(cpus))):
        return None

    by_core: Dict[Tuple[int, int], List[int]] = {}
    for cpu in cpus:
        base = f"{_SYSFS_CPU}/cpu{cpu}/topology"
        pkg = _read_int(f"{base}/physical_package_id")
        core = _read_int(f"{base}/core_id")
        if pkg is None or core is None:
            return None
        by_core.setdefault((pkg, core), []).append(cpu)

    packages = sorted({pkg for pkg, _ in by_core})
    cores_per_pkg = {p: sorted({c for pkg, c in by_core if pkg == p}) for p in packages}
    core_counts = {len(v) for v in cores_per_pkg.values()}
    thread_counts = {len(v) for v in by_core.values()}
    if len(core_counts) != 1 or len(thread_counts) != 1:
        return None
    n_pkg = len(packages)
    n_core = core_counts.pop()
    n_thr = thread_counts.pop()
    if n_pkg * n_core * n_thr != len(cpus):
        return None

    table: List[int] = []
    for p in packages:
        for c in cores_per_pkg[p]:
            table.extend(sorted(by_core[(p, c)]))
    return n_pkg, n_core, n_thr, tuple(table)


def _detect_clock_ghz() -> Optional[float]:
    path = f"{_SYSFS_CPU}/cpu0/cpufreq/cpuinfo_max_freq"
    khz = _read_int(path)
    if khz:
        return khz / 1e6
    try:
        with open("/proc/cpuinfo", "r") as fh:
            m = re.search(r"cpu MHz\s*:\s*([\d.]+)", fh.read())
        if m:
            return float(m.group(1)) / 1e3
    except OSError:
        pass
    return None


def detect_topology(overrides: Optional[Dict[str, Union[int, float]]] = None) -> Topology:
    """Best-effort host discovery with mandatory config override path.

    Hosts exposing only a flat CPU count yield packages=1,
    cores_per_package=count, threads_per_core=1 with source "flat-fallback".
    Any `topology.*` override forces the canonical arithmetic id layout,
    since configured shapes need not match the host.
    """
    overrides = overrides or {}
    shape_keys = ("topology.packages", "topology.cores_per_package", "topology.threads_per_core")
    clock = overrides.get("topology.clock_ghz")

    if any(k in overrides for k in shape_keys):
        count = os.cpu_count() or 1
        packages = int(overrides.get("topology.packages", 1))
        cores = int(overrides.get("topology.cores_per_package", count))
        threads = int(overrides.get("topology.threads_per_core", 1))
        return Topology(packages, cores, threads,
                        clock_ghz=float(clock or _detect_clock_ghz() or 1.0),
                        source="config")

    detected = _sysfs_topology()
    if detected is not None:
        n_pkg, n_core, n_thr, table = detected
        return Topology(n_pkg, n_core, n_thr,
                        clock_ghz=float(clock or _detect_clock_ghz() or 1.0),
                        source="sysfs",
                        id_table=table)

    count = os.cpu_count() or 1
    return Topology(1, count, 1,
                    clock_ghz=float(clock or _detect_clock_ghz() or 1.0),
                    source="flat-fallback")


def apply_pin(assignment: Optional[int], topo: Topology) -> bool:
    """Bind the calling thread to one logical CPU; returns whether it was honored.

    None is the unpinned (auto) case and is trivially honored. Ids outside
    the topology are a configuration error; ids the OS refuses (restricted
    affinity mask, configured shape larger than the host, platforms without
    a per-thread affinity call) degrade to unpinned with honored=False so
    the benchmark keeps running.
    """
    if assignment is None:
        return True
    if not 0 <= assignment < topo.total:
        raise UsageError(f"pin target {assignment} outside topology of {topo.total} CPUs")
    if not hasattr(os, "sched_setaffinity"):
        return False
    try:
        os.sched_setaffinity(0, {assignment})
    except OSError:
        return False
    return os.sched_getaffinity(0) == {assignment}
