import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lidarforest.error_model import DivergenceTable, ErrorOption
from lidarforest.motion import Pose
from lidarforest.rng import KeyedStream
from lidarforest.scene import Scene, generate_terrain
from lidarforest.sensor import (FrameSchedule, SensorConfig, advance_schedule, beam_direction,
                                column_azimuths, preset, scan_frame, sensor_origin)


@pytest.fixture(scope="module")
def flat():
    return Scene.from_primitives(generate_terrain(0, (80, 80), 0.0, 8.0))


def _frame(scene, config, pose, azimuths, frame=0, stream=None):
    cols = np.arange(len(azimuths))
    return scan_frame(scene, pose, config, cols, azimuths, frame, stream=stream)


class TestPresets:
    def test_beams16_spacing(self):
        c = preset("Beams16")
        assert c.beam_count == 16
        np.testing.assert_allclose(np.diff(c.vertical_angles), 2.0, atol=1e-12)
        assert c.vertical_angles[0] == -15.0 and c.vertical_angles[-1] == 15.0
        assert c.max_range == 100.0 and c.azimuth_resolution == 0.2

    def test_beams8_same_span(self):
        c = preset("Beams8")
        assert c.beam_count == 8
        assert (c.vertical_angles[0], c.vertical_angles[-1]) == (-15.0, 15.0)

    @pytest.mark.parametrize("name", ["Beams8", "Beams16", "Beams64", "Beams256"])
    def test_spin_rate(self, name):
        assert preset(name).spin_rate == 1200.0
        assert preset(name).beam_count == int(name[5:])

    def test_unknown_and_overrides(self):
        with pytest.raises(ValueError):
            preset("Beams32")
        assert preset("Beams8", max_range=30.0, divergence=DivergenceTable.zeros(30)).max_range == 30

    @pytest.mark.parametrize("kwargs", [
        dict(vertical_angles=()), dict(vertical_angles=(1.0, 0.0)),
        dict(vertical_angles=(0.0,), azimuth_resolution=0.0),
        dict(vertical_angles=(0.0,), spin_rate=-1.0),
        dict(vertical_angles=(0.0,), horizontal_fov=400.0),
        dict(vertical_angles=(0.0,), max_range=200.0),
    ])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            SensorConfig(**kwargs)


class TestDirections:
    def test_forward(self):
        np.testing.assert_allclose(beam_direction(Pose(np.zeros(3), 0.0), 0.0, 0.0), (1, 0, 0))

    def test_up(self):
        for az in (0.0, 37.0, 190.0):
            np.testing.assert_allclose(beam_direction(Pose(np.zeros(3), 1.1), az, 90.0), (0, 0, 1),
                                       atol=1e-15)

    def test_yaw_cancels_azimuth(self):
        np.testing.assert_allclose(beam_direction(Pose(np.zeros(3), math.pi / 2), -90.0, 0.0),
                                   (1, 0, 0), atol=1e-15)

    @settings(max_examples=100)
    @given(st.floats(-10, 10), st.floats(-720, 720), st.floats(-90, 90))
    def test_unit_length(self, yaw, az, el):
        d = beam_direction(Pose(np.zeros(3), yaw), az, el)
        assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-12)
        assert d[2] == pytest.approx(math.sin(math.radians(el)), abs=1e-12)


class TestSchedule:
    def test_timing_example(self):
        c = SensorConfig(vertical_angles=(0.0,), azimuth_resolution=45.0, spin_rate=1200)
        assert c.columns_per_second == 160
        s = FrameSchedule.for_sensor(c, 30)
        counts = []
        for _ in range(30):
            _, s = advance_schedule(s)
            counts.append(s.columns_this_frame)
        assert sum(counts) == 160
        assert s.column_cursor == 160

    def test_counts_match_integer_oracle(self):
        c = SensorConfig(vertical_angles=(0.0,), azimuth_resolution=45.0)
        s = FrameSchedule.for_sensor(c, 30)
        counts = []
        for _ in range(300):
            _, s = advance_schedule(s)
            counts.append(s.columns_this_frame)
        # closed form: cumulative columns after f frames = floor(160 f / 30)
        expected = [(160 * (f + 1)) // 30 - (160 * f) // 30 for f in range(300)]
        assert counts == expected
        assert set(counts) == {5, 6}
        assert counts[:30] == counts[30:60]

    def test_one_column_per_frame(self):
        c = SensorConfig(vertical_angles=(0.0,), azimuth_resolution=45.0)
        s = FrameSchedule.for_sensor(c, 160)
        for _ in range(500):
            _, s = advance_schedule(s)
            assert s.columns_this_frame == 1

    @settings(max_examples=60)
    @given(st.sampled_from([0.1, 0.2, 0.25, 0.4, 1.0, 45.0]), st.sampled_from([300, 600, 1200]),
           st.integers(1, 120))
    def test_one_second_window(self, res, rpm, fps):
        c = SensorConfig(vertical_angles=(0.0,), azimuth_resolution=res, spin_rate=rpm)
        s = FrameSchedule.for_sensor(c, fps)
        total = 0
        for _ in range(fps):
            _, s = advance_schedule(s)
            total += s.columns_this_frame
        assert abs(total - c.columns_per_second) < 1

    def test_azimuths_continue_and_wrap(self):
        c = SensorConfig(vertical_angles=(0.0,), azimuth_resolution=45.0)
        s = FrameSchedule.for_sensor(c, 30)
        seen = []
        for _ in range(4):
            az, s = advance_schedule(s)
            seen.extend(az)
        assert seen[:10] == [0, 45, 90, 135, 180, 225, 270, 315, 0, 45]
        assert s.azimuth_cursor == (s.column_cursor % 8) * 45.0

    def test_no_drift_after_many_columns(self):
        c = SensorConfig(vertical_angles=(0.0,), azimuth_resolution=0.2)
        s = FrameSchedule.for_sensor(c, 30)
        az = column_azimuths(s, [1800, 1800 * 1000 + 1])
        assert az[0] == 0.0
        assert az[1] == pytest.approx(0.2, abs=1e-9)

    def test_sector_fov(self):
        c = SensorConfig(vertical_angles=(0.0,), azimuth_resolution=10.0, horizontal_fov=90.0)
        s = FrameSchedule.for_sensor(c, 1)
        az = column_azimuths(s, np.arange(20))
        assert az.min() >= -45 and az.max() <= 45
        assert list(az[:3]) == [-45.0, -35.0, -25.0]

    def test_fps_is_exact(self):
        s = FrameSchedule.for_sensor(preset("Beams16"), 30)
        assert s.fps == Fraction(30) and s.columns_per_frame == 1200


class TestScanFrame:
    def test_empty_scene(self):
        cfg = preset("Beams16")
        out = _frame(Scene.empty(), cfg, Pose(np.zeros(3), 0.0), np.arange(0, 360, 1.0))
        assert len(out.records) == 0 and out.rays == 360 * 16

    def test_closed_form_ground_range(self, flat):
        cfg = SensorConfig(vertical_angles=(-15.0,), azimuth_resolution=1.0, mount_height=1.8)
        pose = Pose(np.array([2.0, -3.0, 0.0]), 0.7)
        out = _frame(flat, cfg, pose, np.arange(0, 360, 1.0)).records
        assert len(out) == 360
        r = np.sqrt(out["x"] ** 2 + out["y"] ** 2 + out["z"] ** 2)
        np.testing.assert_allclose(r, 1.8 / math.sin(math.radians(15)), atol=1e-6)
        assert r[0] == pytest.approx(6.954666, abs=1e-6)
        np.testing.assert_allclose(out["az"], 0.0, atol=1e-12)

    def test_deterministic(self, small_forest):
        cfg = preset("Beams16")
        pose = Pose(np.array([0.0, 0.0, 1.5]), 0.3)
        a = _frame(small_forest, cfg, pose, np.arange(0, 360, 0.5)).records
        b = _frame(small_forest, cfg, pose, np.arange(0, 360, 0.5)).records
        assert a.tobytes() == b.tobytes()

    @pytest.mark.parametrize("option", list(ErrorOption))
    def test_record_invariants(self, small_forest, option):
        cfg = preset("Beams16", error_option=option, max_range=30.0,
                     divergence=DivergenceTable([(30, 0.05, 0.03)]))
        pose = Pose(np.array([1.0, 2.0, 1.3]), -0.4)
        azimuths = np.arange(0, 360, 0.5)
        res = _frame(small_forest, cfg, pose, azimuths, frame=4, stream=KeyedStream(9, "beam_error"))
        out = res.records
        assert 0 < len(out) <= len(azimuths) * 16
        rel = np.column_stack([out["x"], out["y"], out["z"]])
        absolute = np.column_stack([out["ax"], out["ay"], out["az"]])
        c, s = math.cos(pose.yaw), math.sin(pose.yaw)
        back = np.column_stack([c * rel[:, 0] - s * rel[:, 1], s * rel[:, 0] + c * rel[:, 1], rel[:, 2]])
        np.testing.assert_allclose(back + sensor_origin(pose, cfg), absolute, atol=1e-6)
        bound = 30.0 + (0.05 if option is ErrorOption.COORDINATE_OFFSET else 0.0)
        assert np.linalg.norm(rel, axis=1).max() <= bound
        assert np.all(out["frame"] == 4)
        if option is ErrorOption.ANGLE_OFFSET:
            assert len(out) <= res.recasts
        else:
            assert res.recasts == 0

    def test_error_option_needs_stream(self, flat):
        cfg = preset("Beams8", error_option=ErrorOption.COORDINATE_OFFSET)
        with pytest.raises(ValueError):
            _frame(flat, cfg, Pose(np.array([0, 0, 1.0]), 0.0), [0.0])

    def test_zero_divergence_identity(self, small_forest):
        pose = Pose(np.array([0.0, 0.0, 1.5]), 0.3)
        azimuths = np.arange(0, 360, 1.0)
        base = _frame(small_forest, preset("Beams16", divergence=DivergenceTable.zeros(100)),
                      pose, azimuths).records
        for option in (ErrorOption.COORDINATE_OFFSET, ErrorOption.ANGLE_OFFSET):
            cfg = preset("Beams16", error_option=option, divergence=DivergenceTable.zeros(100))
            out = _frame(small_forest, cfg, pose, azimuths, stream=KeyedStream(1, "e")).records
            assert out.tobytes() == base.tobytes()

    def test_more_beams_more_records(self, small_forest):
        pose = Pose(np.array([0.0, 0.0, 1.5]), 0.0)
        counts = [len(_frame(small_forest, preset(n), pose, np.arange(0, 360, 2.0)).records)
                  for n in ("Beams8", "Beams16", "Beams64", "Beams256")]
        assert counts == sorted(counts)
