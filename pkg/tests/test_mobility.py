import math
import random

import pytest

from uansim.core import ConfigError
from uansim.mobility import (AuvMobility, StaticMobility, SteppedMobility, UgMobility,
                             WaveComponent, WaveModel, WgMobility, parse_instructions,
                             trajectory_rows)


def triangle_oracle(z0, vz, t, lo, hi):
    # fold z0 + vz*t into [lo, hi] by reflection
    span = hi - lo
    phase = (z0 - lo + vz * t) % (2 * span)
    return lo + (phase if phase <= span else 2 * span - phase)


class TestUg:
    def make(self, start_z=10.0, angle=90.0, speed=1.0, descending=True):
        return UgMobility(start=(0.0, 0.0, start_z), speed=speed, heading=(1.0, 0.0),
                          depth_min=10.0, depth_max=30.0, opening_angle_deg=angle,
                          descending=descending)

    def test_identity_at_t0(self):
        assert self.make().position(0.0) == (0.0, 0.0, 10.0)

    def test_depth_stays_in_band_random_parameters(self):
        rng = random.Random(1)
        for _ in range(200):
            model = self.make(start_z=rng.uniform(10.0, 30.0),
                              angle=rng.uniform(5.0, 175.0),
                              speed=rng.uniform(0.1, 5.0),
                              descending=rng.random() < 0.5)
            for _ in range(50):
                z = model.position(rng.uniform(0.0, 1e5))[2]
                assert 10.0 - 1e-9 <= z <= 30.0 + 1e-9

    def test_reaches_bottom_at_half_period(self):
        model = self.make()  # vz = sin(45 deg)
        t_bottom = 20.0 / math.sin(math.radians(45.0))
        assert t_bottom == pytest.approx(28.284271, abs=1e-5)
        assert model.position(t_bottom)[2] == pytest.approx(30.0, abs=1e-9)

    def test_matches_triangle_wave_oracle(self):
        model = self.make(start_z=22.0, angle=70.0, speed=2.0)
        vz = 2.0 * math.sin(math.radians(35.0))
        rng = random.Random(2)
        for _ in range(200):
            t = rng.uniform(0.0, 500.0)
            assert model.position(t)[2] == pytest.approx(
                triangle_oracle(22.0, vz, t, 10.0, 30.0), abs=1e-9)

    def test_horizontal_speed_projection(self):
        model = self.make()
        x = model.position(10.0)[0]
        assert x == pytest.approx(10.0 * math.cos(math.radians(45.0)))

    def test_start_outside_band_rejected(self):
        with pytest.raises(ConfigError):
            self.make(start_z=5.0)

    def test_ascending_start(self):
        model = self.make(start_z=20.0, descending=False)
        assert model.position(1.0)[2] < 20.0


class TestWg:
    def test_zero_amplitude_straight_line(self):
        model = WgMobility((0, 0, 0), 2.0, (0.0, 1.0), WaveModel([]))
        assert model.position(5.0) == (0.0, 10.0, 0.0)

    def test_stationary_single_component(self):
        wave = WaveModel([WaveComponent(1.0, 1.0, (0.0, 0.0), 0.0)])
        model = WgMobility((0, 0, 0), 0.0, (1.0, 0.0), wave)
        for t in (0.0, 0.5, 1.0, 2.0, math.pi):
            assert model.position(t)[2] == pytest.approx(-math.cos(t), abs=1e-12)

    def test_elevation_bounded_by_amplitude_sum(self):
        wave = WaveModel([WaveComponent(0.5, 0.7, (0.01, 0.0), 0.3),
                          WaveComponent(0.3, 1.3, (0.0, 0.02), 1.1)])
        model = WgMobility((0, 0, 0), 1.5, (1.0, 1.0), wave)
        rng = random.Random(3)
        for _ in range(2000):
            z = model.position(rng.uniform(0, 1e4))[2]
            assert abs(z) <= 0.8 + 1e-12


class TestAuvParsing:
    def test_basic_script(self):
        instrs = parse_instructions("# comment\nLINE 2 0 0 10\nCURVE 1.0 0.2 0.0 5\n")
        assert [i.mode for i in instrs] == ["line", "curve"]

    def test_error_carries_line_number(self):
        with pytest.raises(ConfigError, match=":3:"):
            parse_instructions("LINE 1 0 0 5\n\nLINE 1 0 oops 5\n", source="f")

    def test_zero_omega_curve_rejected(self):
        with pytest.raises(ConfigError, match="omega"):
            parse_instructions("CURVE 1 0 0 5")

    def test_nonpositive_duration_rejected(self):
        with pytest.raises(ConfigError):
            parse_instructions("LINE 1 0 0 0")


class TestAuvMotion:
    def test_line_displacement(self):
        model = AuvMobility((0, 0, 0), parse_instructions("LINE 2 0 0 10"))
        assert model.position(10.0) == pytest.approx((20.0, 0.0, 0.0))

    def test_half_circle_curve(self):
        # v = pi, omega = pi/10 over 10 s is a half circle of radius 10
        model = AuvMobility((0, 0, 0), parse_instructions(
            f"CURVE {math.pi} {math.pi / 10} 0 10"))
        assert model.position(10.0) == pytest.approx((0.0, 20.0, 0.0), abs=1e-9)

    def test_standby_after_final_instruction(self):
        model = AuvMobility((0, 0, 0), parse_instructions("LINE 1 0 0 4"))
        assert model.position(100.0) == pytest.approx((4.0, 0.0, 0.0))

    def test_continuity_across_boundaries(self):
        script = "LINE 1 1 0 5\nCURVE 2 0.5 0.1 8\nLINE 0 0 1 3"
        model = AuvMobility((5, 5, 20), parse_instructions(script))
        for boundary in (5.0, 13.0, 16.0):
            before = model.position(boundary - 1e-7)
            after = model.position(boundary + 1e-7)
            assert math.dist(before, after) < 1e-5

    def test_line_path_length_equals_speed_times_duration(self):
        model = AuvMobility((0, 0, 0), parse_instructions("LINE 3 4 0 7"))
        start = model.position(0.0)
        end = model.position(7.0)
        assert math.dist(start, end) == pytest.approx(5.0 * 7.0, abs=1e-9)

    def test_curve_preserves_speed(self):
        model = AuvMobility((0, 0, 0), parse_instructions("CURVE 2 0.3 0.2 10"))
        previous = model.position(0.0)
        for i in range(1, 101):
            current = model.position(i * 0.1)
            assert math.dist(previous, current) == pytest.approx(0.2, abs=1e-3)
            previous = current

    def test_pitch_changes_depth(self):
        model = AuvMobility((0, 0, 100), parse_instructions("CURVE 2 0.1 0.3 10"))
        assert model.position(10.0)[2] < 100.0  # positive pitch climbs

    def test_query_order_independence(self):
        model = AuvMobility((0, 0, 0), parse_instructions("LINE 1 0 0 5\nCURVE 1 0.2 0 10"))
        times = [0.0, 2.0, 7.0, 12.0, 16.0]
        forward = [model.position(t) for t in times]
        backward = [model.position(t) for t in reversed(times)]
        assert forward == backward[::-1]


class TestStepped:
    def test_piecewise_velocity(self):
        model = SteppedMobility((0, 0, 0))
        model.set_velocity(0.0, (1.0, 0.0, 0.0))
        assert model.position(2.0) == (2.0, 0.0, 0.0)
        model.set_velocity(2.0, (0.0, 2.0, 0.0))
        assert model.position(3.0) == (2.0, 2.0, 0.0)


def test_trajectory_rows_shape():
    rows = trajectory_rows(StaticMobility((1, 2, 3)), duration_s=2.0, dt_s=0.5)
    assert len(rows) == 5
    assert rows[0] == (0.0, 1.0, 2.0, 3.0)
    assert rows[-1][0] == 2.0
