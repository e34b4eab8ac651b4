import math
import random

import pytest

from uansim.core import ConfigError
from uansim.propagation import (CoverageError, RangeModel, TableModel, ThorpModel,
                                load_arrival_table, propagation_delay,
                                thorp_absorption_db_per_km)

ORIGIN = (0.0, 0.0, 0.0)


def at(x, z=0.0):
    return (x, 0.0, z)


def absorption_oracle(f_khz):
    # four-term absorption evaluated independently, dB/km
    f2 = f_khz ** 2
    return 0.11 * f2 / (1 + f2) + 44 * f2 / (4100 + f2) + 2.75e-4 * f2 + 0.003


class TestRangeModel:
    def test_inside_threshold_no_loss(self):
        model = RangeModel(threshold_m=3000.0)
        assert model.loss(ORIGIN, at(2000.0), 10.0).tl_db == 0.0

    def test_outside_threshold_kills_source(self):
        model = RangeModel(threshold_m=3000.0)
        assert model.loss(ORIGIN, at(4000.0), 10.0).tl_db == 170.0

    def test_boundary_is_inclusive(self):
        model = RangeModel(threshold_m=3000.0)
        assert model.loss(ORIGIN, at(3000.0), 10.0).tl_db == 0.0

    def test_step_function_two_values_only(self):
        model = RangeModel(threshold_m=3000.0)
        values = {model.loss(ORIGIN, at(d), 10.0).tl_db for d in range(100, 8000, 37)}
        assert values == {0.0, 170.0}


class TestThorpModel:
    def test_absorption_matches_oracle(self):
        for f in (1.0, 5.0, 10.0, 20.0, 50.0):
            assert thorp_absorption_db_per_km(f) == pytest.approx(
                absorption_oracle(f), abs=1e-9)

    def test_example_value_10khz_1km(self):
        model = ThorpModel(spreading_k=1.5, a0_db=0.0)
        tl = model.loss(ORIGIN, at(1000.0), 10.0).tl_db
        # 10*1.5*log10(1000) + 1 km * alpha(10)
        assert tl == pytest.approx(45.0 + absorption_oracle(10.0), abs=1e-9)
        assert round(tl, 2) == 46.19

    def test_monotone_in_distance(self):
        model = ThorpModel()
        rng = random.Random(7)
        for _ in range(100):
            d = rng.uniform(1.0, 20000.0)
            f = rng.uniform(0.5, 100.0)
            tl0 = model.loss(ORIGIN, at(d), f).tl_db
            tl1 = model.loss(ORIGIN, at(d * 1.01), f).tl_db
            assert tl1 > tl0

    def test_absorption_monotone_in_frequency(self):
        rng = random.Random(11)
        for _ in range(100):
            f = rng.uniform(0.1, 99.0)
            assert thorp_absorption_db_per_km(f * 1.01) > thorp_absorption_db_per_km(f)

    def test_zero_distance_clamps_to_offset(self):
        model = ThorpModel(spreading_k=1.5, a0_db=3.0)
        assert model.loss(ORIGIN, ORIGIN, 10.0).tl_db == pytest.approx(3.0)

    def test_rejects_nonpositive_frequency(self):
        with pytest.raises(ConfigError):
            thorp_absorption_db_per_km(0.0)


class TestDelay:
    def test_fifteen_hundred_meters_is_one_second(self):
        assert propagation_delay(ORIGIN, at(1500.0)) == pytest.approx(1.0)

    def test_four_km_hop(self):
        assert propagation_delay(ORIGIN, at(4000.0)) == pytest.approx(4000.0 / 1500.0)

    def test_zero_distance(self):
        assert propagation_delay(ORIGIN, ORIGIN) == 0.0


def write_table(tmp_path, rows, freq=12.0):
    path = tmp_path / "table.csv"
    lines = [f"# frequency_khz = {freq}", "# label = synthetic-test",
             "range_m,tx_depth_m,rx_depth_m,tl_db,delay_s"]
    lines += [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def grid_rows():
    rows = []
    for r in (1000.0, 2000.0):
        for td in (10.0, 50.0):
            for xd in (10.0, 50.0):
                tl = 40.0 + r / 100.0 + td / 10.0 + xd / 5.0
                delay = r / 1480.0
                rows.append((r, td, xd, tl, delay))
    return rows


class TestTableModel:
    def test_grid_point_exact(self, tmp_path):
        model = TableModel(load_arrival_table(write_table(tmp_path, grid_rows())))
        loss = model.loss((0, 0, 10.0), (1000.0, 0, 50.0), 12.0)
        assert loss.tl_db == pytest.approx(40.0 + 10.0 + 1.0 + 10.0)
        assert loss.delay_s == pytest.approx(1000.0 / 1480.0)

    def test_midpoint_is_arithmetic_mean(self, tmp_path):
        model = TableModel(load_arrival_table(write_table(tmp_path, grid_rows())))
        lo = model.loss((0, 0, 10.0), (1000.0, 0, 10.0), 12.0).tl_db
        hi = model.loss((0, 0, 10.0), (2000.0, 0, 10.0), 12.0).tl_db
        mid = model.loss((0, 0, 10.0), (1500.0, 0, 10.0), 12.0).tl_db
        assert mid == pytest.approx((lo + hi) / 2.0)

    def test_out_of_hull_rejected(self, tmp_path):
        model = TableModel(load_arrival_table(write_table(tmp_path, grid_rows())))
        with pytest.raises(CoverageError):
            model.loss((0, 0, 10.0), (5000.0, 0, 10.0), 12.0)
        with pytest.raises(CoverageError):
            model.loss((0, 0, 80.0), (1000.0, 0, 10.0), 12.0)

    def test_frequency_mismatch_rejected(self, tmp_path):
        model = TableModel(load_arrival_table(write_table(tmp_path, grid_rows())))
        with pytest.raises(CoverageError):
            model.loss((0, 0, 10.0), (1000.0, 0, 10.0), 20.0)

    def test_interpolation_bounded_by_cell_extrema(self, tmp_path):
        model = TableModel(load_arrival_table(write_table(tmp_path, grid_rows())))
        rng = random.Random(3)
        corners = [model.loss((0, 0, td), (r, 0, xd), 12.0).tl_db
                   for r in (1000.0, 2000.0) for td in (10.0, 50.0) for xd in (10.0, 50.0)]
        lo, hi = min(corners), max(corners)
        for _ in range(50):
            r = rng.uniform(1000.0, 2000.0)
            td = rng.uniform(10.0, 50.0)
            xd = rng.uniform(10.0, 50.0)
            tl = model.loss((0, 0, td), (r, 0, xd), 12.0).tl_db
            assert lo - 1e-9 <= tl <= hi + 1e-9

    def test_incomplete_grid_rejected(self, tmp_path):
        rows = grid_rows()[:-1]
        with pytest.raises(ConfigError):
            load_arrival_table(write_table(tmp_path, rows))


def test_bundled_sample_table_query():
    from importlib import resources
    path = resources.files("uansim") / "data" / "arrival_table_sample.csv"
    model = TableModel(load_arrival_table(str(path)))
    d = 2000.0
    loss = model.loss((0.0, 0.0, 50.0), (d, 0.0, 50.0), 12.0)
    assert math.isfinite(loss.tl_db) and loss.tl_db > 0
    assert loss.delay_s >= d / 1550.0


def test_bundled_table_matches_its_generator():
    # grid points reproduce the generator script's own values exactly
    import importlib.util
    import sys
    from importlib import resources
    from pathlib import Path

    gen_path = Path(__file__).parent.parent / "tools" / "make_arrival_table.py"
    spec_ = importlib.util.spec_from_file_location("make_arrival_table", gen_path)
    generator = importlib.util.module_from_spec(spec_)
    sys.modules["make_arrival_table"] = spec_.loader.exec_module(generator) or generator

    table_path = resources.files("uansim") / "data" / "arrival_table_sample.csv"
    model = TableModel(load_arrival_table(str(table_path)))
    rng = random.Random(9)
    for _ in range(50):
        r = rng.choice(generator.RANGES)
        td = rng.choice(generator.DEPTHS)
        xd = rng.choice(generator.DEPTHS)
        loss = model.loss((0.0, 0.0, td), (r, 0.0, xd), generator.FREQ_KHZ)
        assert loss.tl_db == pytest.approx(generator.tl_db(r, td, xd), abs=1e-9)
        assert loss.delay_s == pytest.approx(generator.delay_s(r, td, xd), abs=1e-9)
