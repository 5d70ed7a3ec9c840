import json
import random
import subprocess
import sys
from pathlib import Path

import pytest

import render

HERE = Path(__file__).resolve().parent


def write_pairs_csv(path, pairs):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("a_ns,b_ns\n")
        for a, b in pairs:
            fh.write(f"{a},{b}\n")


def make_fixture_pairs(n=5000, seed=7):
    rng = random.Random(seed)
    pairs = []
    for _ in range(n):
        a = rng.randrange(1_000, 200_000)
        b = rng.randrange(500, 250_000)
        pairs.append((a, b))
    return pairs


def make_sweep_payload(points=3):
    return {
        "kind": "sweep",
        "benchmark": "compute-int",
        "topology": {"packages": 1, "cores_per_package": 8,
                     "threads_per_core": 1, "total": 8,
                     "clock_ghz": 2.0, "source": "config"},
        "points": [
            {"n": 2 ** i, "strategy": "auto", "span_ns": 1000 + i,
             "total_units": 8000, "throughput": 1e9 * (i + 1),
             "repeats_kept": 3}
            for i in range(points)
        ],
        "manifest": {"suite": "corescope"},
    }


class TestLoading:
    def test_csv_roundtrip(self, tmp_path):
        pairs = make_fixture_pairs(100)
        path = tmp_path / "raw.csv"
        write_pairs_csv(path, pairs)
        assert render.load_pairs_csv(str(path)) == pairs

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2\n3,4\n")
        with pytest.raises(render.InputError):
            render.load_pairs_csv(str(path))

    def test_negative_interval_rejected(self, tmp_path):
        path = tmp_path / "neg.csv"
        path.write_text("a_ns,b_ns\n-5,2\n")
        with pytest.raises(render.InputError):
            render.load_pairs_csv(str(path))

    def test_empty_csv_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("a_ns,b_ns\n")
        with pytest.raises(render.InputError):
            render.load_pairs_csv(str(path))

    def test_sweep_json_validated(self, tmp_path):
        path = tmp_path / "sweep.json"
        path.write_text(json.dumps(make_sweep_payload()))
        payload = render.load_sweep_json(str(path))
        assert len(payload["points"]) == 3

    def test_wrong_kind_rejected(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text(json.dumps({"kind": "samples"}))
        with pytest.raises(render.InputError):
            render.load_sweep_json(str(path))

    def test_incomplete_point_rejected(self, tmp_path):
        payload = make_sweep_payload()
        del payload["points"][1]["throughput"]
        path = tmp_path / "sweep.json"
        path.write_text(json.dumps(payload))
        with pytest.raises(render.InputError):
            render.load_sweep_json(str(path))


class TestPreRenderChecks:
    def test_cell_sum_equals_sample_count(self):
        pairs = make_fixture_pairs(2000)
        kc = [(render.to_kcycles(a, 2.0), render.to_kcycles(b, 2.0))
              for a, b in pairs]
        cells = render.bin_pairs(kc, 2.0)
        meta = render.check_dataset(pairs, cells)
        assert meta["count"] == 2000
        assert sum(cells.values()) == 2000

    def test_corrupted_cells_caught(self):
        pairs = make_fixture_pairs(100)
        kc = [(render.to_kcycles(a, 2.0), render.to_kcycles(b, 2.0))
              for a, b in pairs]
        cells = render.bin_pairs(kc, 2.0)
        key = next(iter(cells))
        cells[key] += 1
        with pytest.raises(render.InputError):
            render.check_dataset(pairs, cells)

    def test_diagonal_fraction_matches_primary_definition(self):
        pairs = make_fixture_pairs(3000)
        # the primary computes fraction_b_lt_a as count(b < a) / total
        expect = sum(1 for a, b in pairs if b < a) / len(pairs)
        assert render.diagonal_fraction(pairs) == expect


class TestFigures:
    def test_scatter_all_points_below_diagonal(self, tmp_path):
        pairs = [(a, a - delta) for a, delta in
                 ((10_000, 400), (50_000, 900), (120_000, 5_000))] * 20
        fig, meta = render.render_scatter(pairs, clock_ghz=2.0,
                                          out=str(tmp_path / "scatter.png"))
        offsets = fig.axes[0].collections[0].get_offsets()
        assert all(y < x for x, y in offsets)
        assert meta["diagonal_fraction"] == 1.0
        assert (tmp_path / "scatter.png").exists()

    def test_scatter_writes_marginal_histograms(self, tmp_path):
        pairs = make_fixture_pairs(500)
        fig, meta = render.render_scatter(pairs, clock_ghz=1.0,
                                          out=str(tmp_path / "s.png"))
        assert len(fig.axes) == 3   # scatter + two marginals
        assert meta["count"] == 500

    def test_intensity_grid_sums_match(self, tmp_path):
        pairs = make_fixture_pairs(4000)
        fig, meta = render.render_intensity(pairs, clock_ghz=1.67,
                                            out=str(tmp_path / "i.png"))
        assert meta["count"] == 4000
        assert (tmp_path / "i.png").exists()

    def test_sweep_line_has_marker_per_point(self, tmp_path):
        payload = make_sweep_payload(points=3)
        fig, meta = render.render_sweep(payload, out=str(tmp_path / "w.png"))
        line = fig.axes[0].lines[0]
        assert len(line.get_xdata()) == 3
        assert meta["points"] == 3

    def test_sweep_log_scale_option(self, tmp_path):
        payload = make_sweep_payload(points=4)
        fig, _ = render.render_sweep(payload, out=str(tmp_path / "w.png"),
                                     log_y=True)
        assert fig.axes[0].get_yscale() == "log"

    def test_inputs_never_mutated(self, tmp_path):
        pairs = make_fixture_pairs(300)
        snapshot = list(pairs)
        render.render_scatter(pairs, clock_ghz=2.0, out=None)
        render.render_intensity(pairs, clock_ghz=2.0, out=None)
        assert pairs == snapshot
        payload = make_sweep_payload()
        snapshot_json = json.dumps(payload, sort_keys=True)
        render.render_sweep(payload, out=None)
        assert json.dumps(payload, sort_keys=True) == snapshot_json


class TestCli:
    def run_cli(self, args):
        return subprocess.run(
            [sys.executable, str(HERE / "render.py"), *args],
            capture_output=True, text=True)

    def test_all_three_kinds_from_fixtures(self, tmp_path):
        csv_path = tmp_path / "raw.csv"
        write_pairs_csv(csv_path, make_fixture_pairs(1500))
        sweep_path = tmp_path / "sweep.json"
        sweep_path.write_text(json.dumps(make_sweep_payload()))

        for kind, infile in (("scatter", csv_path),
                             ("intensity", csv_path),
                             ("sweep", sweep_path)):
            out = tmp_path / f"{kind}.png"
            proc = self.run_cli(["--kind", kind, "--in", str(infile),
                                 "--clock-ghz", "1.67", "--out", str(out)])
            assert proc.returncode == 0, proc.stderr
            assert out.exists() and out.stat().st_size > 0
            assert json.loads(proc.stdout)["written"] == str(out)

    def test_schema_mismatch_fails_descriptively(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"kind": "samples"}))
        proc = self.run_cli(["--kind", "sweep", "--in", str(bad),
                             "--out", str(tmp_path / "x.png")])
        assert proc.returncode == 1
        assert "sweep" in proc.stderr

    def test_missing_input_fails(self, tmp_path):
        proc = self.run_cli(["--kind", "scatter", "--in",
                             str(tmp_path / "none.csv"),
                             "--out", str(tmp_path / "x.png")])
        assert proc.returncode == 1

    def test_spec_example_invocation(self, tmp_path):
        # plots/render.py --kind scatter --in raw.csv --clock-ghz 1.67 --out fig.png
        csv_path = tmp_path / "raw.csv"
        write_pairs_csv(csv_path, make_fixture_pairs(200))
        out = tmp_path / "fig.png"
        proc = self.run_cli(["--kind", "scatter", "--in", str(csv_path),
                             "--clock-ghz", "1.67", "--out", str(out)])
        assert proc.returncode == 0
        assert out.exists()


def test_acceptance_secondary(tmp_path):
    """All three figure kinds render from fixture data and the pre-render
    assertions hold against independently computed values."""
    try:
        pairs = make_fixture_pairs(2500)
        csv_path = tmp_path / "raw.csv"
        write_pairs_csv(csv_path, pairs)
        sweep_path = tmp_path / "sweep.json"
        sweep_path.write_text(json.dumps(make_sweep_payload()))

        loaded = render.load_pairs_csv(str(csv_path))
        fig_s, meta_s = render.render_scatter(loaded, 1.67,
                                              str(tmp_path / "f1.png"))
        fig_i, meta_i = render.render_intensity(loaded, 1.67,
                                                str(tmp_path / "f2.png"))
        fig_w, _ = render.render_sweep(render.load_sweep_json(str(sweep_path)),
                                       str(tmp_path / "f3.png"))
        for name in ("f1.png", "f2.png", "f3.png"):
            assert (tmp_path / name).stat().st_size > 0

        # cell-sum and diagonal fraction against primary-style recomputation
        assert meta_i["count"] == len(pairs)
        expect_fraction = sum(1 for a, b in pairs if b < a) / len(pairs)
        assert meta_s["diagonal_fraction"] == expect_fraction
        assert meta_i["diagonal_fraction"] == expect_fraction
    except BaseException:
        print("ACCEPTANCE plots component: FAIL")
        raise
    print("ACCEPTANCE plots component: PASS")
