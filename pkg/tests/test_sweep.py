import pytest

from trivance.cost import CostParams
from trivance.sweep import (COMPARE_COLUMNS, CSV_COLUMNS, SweepConfig, header_lines,
                            run_compare, run_sweep, size_grid, write_csv)

PAPER = CostParams(alpha=1.5e-6, beta=1e-11)


def test_default_size_grid():
    grid = size_grid()
    assert grid[0] == 32 and grid[-1] == 128 * 2 ** 20
    assert len(grid) == 12
    assert all(b == 4 * a for a, b in zip(grid, grid[1:]))


def test_bad_grids():
    with pytest.raises(ValueError):
        size_grid(64, 32)
    with pytest.raises(ValueError):
        size_grid(32, 64, 1)


def test_single_point():
    rows = run_sweep(SweepConfig(dims=(9,), algorithms=["trivance"], variants=["latency"],
                                 sizes=[1024], params=PAPER))
    assert len(rows) == 1
    assert rows[0]["status"] == "ok" and rows[0]["steps"] == 2


def test_rows_only_for_supported_algorithms():
    cfg = SweepConfig(dims=(27, 27), algorithms=["trivance", "bruck", "ring_bucket", "swing"],
                      sizes=[32, 1024], params=PAPER, verify=False)
    rows = run_sweep(cfg)
    assert {r["algo"] for r in rows} == {"trivance", "bruck", "ring_bucket"}
    # ring_bucket has no latency variant
    assert len(rows) == 2 * 2 * 2 + 2


def test_row_order_and_columns():
    cfg = SweepConfig(dims=(8,), sizes=[32, 128], params=PAPER)
    rows = run_sweep(cfg)
    keys = [(r["algo"], r["variant"], r["msize_bytes"]) for r in rows]
    assert keys == sorted(keys, key=lambda k: (["trivance", "bruck", "recdoub", "swing",
                                                 "ring_bucket"].index(k[0]),
                                                ["latency", "bandwidth"].index(k[1]), k[2]))
    text = write_csv(rows, CSV_COLUMNS, header_lines("sweep", cfg))
    lines = text.splitlines()
    assert lines[0].startswith("# ")
    assert lines[4] == ",".join(CSV_COLUMNS)


def test_auto_variant_picks_faster():
    cfg = SweepConfig(dims=(9,), algorithms=["trivance"], sizes=[32, 2 ** 27],
                      params=PAPER, auto_variant=True)
    rows = run_sweep(cfg)
    assert [r["variant"] for r in rows] == ["latency", "bandwidth"]


def test_self_comparison_is_zero():
    rows = run_compare("trivance", SweepConfig(dims=(9,), algorithms=["trivance", "bruck"],
                                               sizes=[32, 4096], params=PAPER))
    assert list(rows[0]) == COMPARE_COLUMNS
    assert all(float(r["improvement"]) == 0 for r in rows if r["other"] == "trivance")


def test_ring64_small_messages_favour_trivance():
    rows = run_compare("trivance", SweepConfig(dims=(64,), sizes=[32], params=PAPER,
                                               verify=False))
    by = {r["other"]: float(r["improvement"]) for r in rows}
    assert by["recdoub"] > 0 and by["swing"] > 0
