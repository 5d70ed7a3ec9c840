#!/usr/bin/env python3
"""Figure renderer for corescope result files.

Reads the primary suite's outputs from disk (raw a_ns,b_ns CSV dumps and
sweep JSON) and renders the three analysis figures:

  scatter    scatter of (a, b) interval pairs in KCycles with the y=x
             diagonal and marginal histograms on both axes
  intensity  2D binned heatmap of the same pairs, showing where the
             common case concentrates
  sweep      throughput-vs-threads line chart from a sweep JSON,
             optionally with a log-scale y axis

Usage:
  plots/render.py --kind scatter   --in raw.csv  --clock-ghz 1.67 --out fig.png
  plots/render.py --kind intensity --in raw.csv  --clock-ghz 1.67 --out fig.png
  plots/render.py --kind sweep     --in sweep.json --out fig.png [--log-y]

Every numeric consistency check (bin totals equal the sample count,
marginals equal the 1D histograms, the below-diagonal fraction) runs on
the parsed data before anything is drawn, and inputs are never mutated.
Validation failures exit nonzero with a descriptive message.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

DEFAULT_BIN_WIDTH_CYCLES = 2000


class InputError(Exception):
    """Input file missing, malformed, or failing the primary schema."""


def load_pairs_csv(path: str) -> List[Tuple[int, int]]:
    """Parse a raw samples CSV: header 'a_ns,b_ns', one pair per line."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["a_ns", "b_ns"]:
                raise InputError(f"{path}: expected header 'a_ns,b_ns', got {header}")
            pairs = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    a, b = int(row[0]), int(row[1])
                except (ValueError, IndexError):
                    raise InputError(f"{path}:{lineno}: bad row {row}")
                if a < 0 or b < 0:
                    raise InputError(f"{path}:{lineno}: negative interval {row}")
                pairs.append((a, b))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}")
    if not pairs:
        raise InputError(f"{path}: no samples")
    return pairs


def load_sweep_json(path: str) -> dict:
    """Parse and structurally validate a sweep payload from the primary suite."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}")
    if payload.get("kind") != "sweep":
        raise InputError(f"{path}: not a sweep payload (kind={payload.get('kind')!r})")
    points = payload.get("points")
    if not isinstance(points, list) or not points:
        raise InputError(f"{path}: sweep payload has no points")
    for i, p in enumerate(points):
        for field in ("n", "strategy", "span_ns", "total_units", "throughput"):
            if field not in p:
                raise InputError(f"{path}: point {i} is missing {field!r}")
        if p["n"] < 1 or p["throughput"] <= 0:
            raise InputError(f"{path}: point {i} out of range")
    ns = [p["n"] for p in points]
    if ns != sorted(ns):
        raise InputError(f"{path}: points are not ascending in n")
    return payload


def to_kcycles(ns: int, clock_ghz: float) -> float:
    return ns * clock_ghz / 1000.0


def bin_pairs(pairs_kcycles: Sequence[Tuple[float, float]],
              bin_width_kcycles: float) -> Dict[Tuple[int, int], int]:
    cells: Counter = Counter()
    for a, b in pairs_kcycles:
        cells[(int(a // bin_width_kcycles), int(b // bin_width_kcycles))] += 1
    return dict(cells)


def diagonal_fraction(pairs_ns: Sequence[Tuple[int, int]]) -> float:
    """Share of samples strictly below y=x (effect landed before call return)."""
    return sum(1 for a, b in pairs_ns if b < a) / len(pairs_ns)


def check_dataset(pairs_ns: Sequence[Tuple[int, int]],
                  cells: Dict[Tuple[int, int], int]) -> dict:
    """Pre-render assertions; returns the numbers the figures are built from."""
    total = sum(cells.values())
    if total != len(pairs_ns):
        raise InputError(
            f"intensity cells sum to {total}, expected {len(pairs_ns)} samples")
    marg_a: Counter = Counter()
    marg_b: Counter = Counter()
    for (ia, ib), count in cells.items():
        marg_a[ia] += count
        marg_b[ib] += count
    if sum(marg_a.values()) != total or sum(marg_b.values()) != total:
        raise InputError("marginal totals diverge from the sample count")
    return {
        "count": total,
        "diagonal_fraction": diagonal_fraction(pairs_ns),
        "marginal_a": dict(marg_a),
        "marginal_b": dict(marg_b),
    }


def render_scatter(pairs_ns: Sequence[Tuple[int, int]], clock_ghz: float,
                   out: Optional[str], bin_width_cycles: int = DEFAULT_BIN_WIDTH_CYCLES):
    """Scatter of (a, b) with the y=x line and marginal histograms."""
    kc = [(to_kcycles(a, clock_ghz), to_kcycles(b, clock_ghz)) for a, b in pairs_ns]
    cells = bin_pairs(kc, bin_width_cycles / 1000.0)
    meta = check_dataset(pairs_ns, cells)

    fig = plt.figure(figsize=(7, 7))
    grid = fig.add_gridspec(2, 2, width_ratios=(4, 1), height_ratios=(1, 4),
                            wspace=0.04, hspace=0.04)
    ax = fig.add_subplot(grid[1, 0])
    ax_top = fig.add_subplot(grid[0, 0], sharex=ax)
    ax_right = fig.add_subplot(grid[1, 1], sharey=ax)

    xs = [a for a, _ in kc]
    ys = [b for _, b in kc]
    ax.scatter(xs, ys, s=4, alpha=0.35, linewidths=0, label="samples")
    lim = max(max(xs), max(ys)) * 1.05 or 1.0
    ax.plot([0, lim], [0, lim], lw=1, color="crimson", label="y = x")
    ax.set_xlim(0, lim)
    ax.set_ylim(0, lim)
    ax.set_xlabel("call duration A (KCycles)")
    ax.set_ylabel("effect latency B (KCycles)")
    ax.legend(loc="upper left", fontsize=8)

    nbins = 60
    ax_top.hist(xs, bins=nbins, range=(0, lim), color="steelblue")
    ax_right.hist(ys, bins=nbins, range=(0, lim), color="steelblue",
                  orientation="horizontal")
    ax_top.tick_params(labelbottom=False)
    ax_right.tick_params(labelleft=False)
    ax_top.set_ylabel("count")
    ax_right.set_xlabel("count")
    fig.suptitle(f"interval pairs, n={meta['count']}, "
                 f"{meta['diagonal_fraction']:.1%} below diagonal")
    if out:
        fig.savefig(out, dpi=120, bbox_inches="tight")
    return fig, meta


def render_intensity(pairs_ns: Sequence[Tuple[int, int]], clock_ghz: float,
                     out: Optional[str],
                     bin_width_cycles: int = DEFAULT_BIN_WIDTH_CYCLES):
    """2D histogram heatmap of the pairs on KCycle axes."""
    kc = [(to_kcycles(a, clock_ghz), to_kcycles(b, clock_ghz)) for a, b in pairs_ns]
    width_kc = bin_width_cycles / 1000.0
    cells = bin_pairs(kc, width_kc)
    meta = check_dataset(pairs_ns, cells)

    max_a = max(ia for ia, _ in cells) + 1
    max_b = max(ib for _, ib in cells) + 1
    grid = [[0] * max_a for _ in range(max_b)]
    for (ia, ib), count in cells.items():
        grid[ib][ia] = count

    fig, ax = plt.subplots(figsize=(7, 6))
    mesh = ax.imshow(grid, origin="lower", aspect="auto", cmap="inferno",
                     extent=(0, max_a * width_kc, 0, max_b * width_kc))
    fig.colorbar(mesh, ax=ax, label="samples per cell")
    ax.set_xlabel("call duration A (KCycles)")
    ax.set_ylabel("effect latency B (KCycles)")
    ax.set_title(f"intensity, n={meta['count']}, "
                 f"bin {width_kc:g} KCycles")
    if out:
        fig.savefig(out, dpi=120, bbox_inches="tight")
    return fig, meta


def render_sweep(payload: dict, out: Optional[str], log_y: bool = False):
    """Line chart with one marker per sweep point."""
    points = payload["points"]
    ns = [p["n"] for p in points]
    throughput = [p["throughput"] for p in points]

    fig, ax = plt.subplots(figsize=(7, 5))
    ax.plot(ns, throughput, marker="o")
    ax.set_xlabel("threads")
    ax.set_ylabel("throughput (units/s)")
    if log_y:
        ax.set_yscale("log")
    ax.set_xscale("log", base=2)
    ax.grid(True, which="both", alpha=0.3)
    ax.set_title(payload.get("benchmark", "sweep"))
    if out:
        fig.savefig(out, dpi=120, bbox_inches="tight")
    meta = {"points": len(points), "ns": ns}
    return fig, meta


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="render.py", description="render corescope result figures")
    parser.add_argument("--kind", required=True,
                        choices=["scatter", "scatter_marginals",
                                 "intensity", "sweep", "sweep_lines"])
    parser.add_argument("--in", dest="infile", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--clock-ghz", type=float, default=1.0,
                        help="nominal clock for cycle normalization")
    parser.add_argument("--bins", type=int, default=DEFAULT_BIN_WIDTH_CYCLES,
                        help="bin width in cycles for binned figures")
    parser.add_argument("--log-y", action="store_true",
                        help="log-scale y axis on sweep figures")
    args = parser.parse_args(argv)

    try:
        if args.clock_ghz <= 0:
            raise InputError("--clock-ghz must be > 0")
        if args.kind in ("sweep", "sweep_lines"):
            payload = load_sweep_json(args.infile)
            fig, meta = render_sweep(payload, args.out, log_y=args.log_y)
        else:
            pairs = load_pairs_csv(args.infile)
            render = render_scatter if args.kind in ("scatter", "scatter_marginals") \
                else render_intensity
            fig, meta = render(pairs, args.clock_ghz, args.out,
                               bin_width_cycles=args.bins)
        plt.close(fig)
    except InputError as exc:
        print(f"render.py: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"written": args.out, **{k: v for k, v in meta.items()
                                              if not isinstance(v, dict)}}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
