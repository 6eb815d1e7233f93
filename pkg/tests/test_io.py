import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lidarforest import io
from lidarforest.scene import LeafWood, Semantic


def _records(n, seed=0):
    rng = np.random.default_rng(seed)
    r = np.zeros(n, dtype=io.POINT_DTYPE)
    r["frame"] = rng.integers(0, 10_000, n)
    r["t"] = rng.uniform(0, 100, n)
    r["beam"] = rng.integers(0, 256, n)
    r["azimuth"] = rng.uniform(0, 360, n)
    for f in ("x", "y", "z", "ax", "ay", "az"):
        r[f] = rng.normal(scale=30, size=n)
    r["leaf_wood"] = rng.integers(0, 3, n)
    r["semantic"] = rng.integers(0, 4, n)
    r["instance"] = rng.integers(0, 2**32, n, dtype=np.uint64)
    # awkward floats
    awkward = [0.1, -0.0, 1e-300, 5e-324, 1.7976931348623157e308, 1 / 3]
    r["x"][:6] = awkward[:n]
    return r


def _assert_fields_equal(a, b, fields):
    for f in fields:
        assert a[f].tobytes() == b[f].tobytes(), f


def test_enum_values_are_frozen():
    assert [int(v) for v in Semantic] == [0, 1, 2, 3]
    assert [v.name for v in Semantic] == ["GROUND", "TREE", "STONE", "SHRUB"]
    assert [int(v) for v in LeafWood] == [0, 1, 2]
    assert [v.name for v in LeafWood] == ["NOT_APPLICABLE", "WOOD", "LEAF"]


@pytest.mark.parametrize("fmt", io.FORMATS)
@pytest.mark.parametrize("mode", io.FRAME_MODES)
def test_header_only(tmp_path, fmt, mode):
    path = tmp_path / f"p.{fmt}"
    io.write_points(io.empty_points(), path, fmt, mode)
    assert len(io.read_points(path, None if mode == "both" else mode)) == 0
    if fmt == "csv":
        assert path.read_text().splitlines() == [",".join(io.columns_for(mode))]


@pytest.mark.parametrize("fmt", io.FORMATS)
@pytest.mark.parametrize("mode", io.FRAME_MODES)
def test_round_trip(tmp_path, fmt, mode):
    records = _records(10_000)
    path = tmp_path / f"p.{fmt}"
    io.write_points(records, path, fmt, mode)
    back = io.read_points(path, mode if mode != "both" else None)
    assert len(back) == len(records)
    labels = ["frame", "t", "beam", "azimuth", "leaf_wood", "semantic", "instance"]
    _assert_fields_equal(back, records, labels)
    if mode in ("relative", "both"):
        _assert_fields_equal(back, records, ["x", "y", "z"])
    if mode in ("absolute", "both"):
        _assert_fields_equal(back, records, ["ax", "ay", "az"])
    missing = {"relative": "ax", "absolute": "x"}.get(mode)
    if missing:
        assert np.isnan(back[missing]).all()


def test_ply_knows_its_frame(tmp_path):
    records = _records(10)
    path = tmp_path / "p.ply"
    io.write_points(records, path, "ply", "absolute")
    back = io.read_points(path)
    _assert_fields_equal(back, records, ["ax", "ay", "az"])
    header = path.read_bytes().split(b"end_header")[0].decode()
    assert "binary_little_endian" in header
    assert "property uchar semantic" in header and "property uint instance" in header
    assert "semantic 0=Ground 1=Tree 2=Stone 3=Shrub" in header


def test_both_has_thirteen_columns(tmp_path):
    path = tmp_path / "p.csv"
    io.write_points(_records(3), path, "csv", "both")
    lines = path.read_text().splitlines()
    assert lines[0] == "frame,t,beam,azimuth,x,y,z,leaf_wood,semantic,instance,ax,ay,az"
    assert all(len(line.split(",")) == 13 for line in lines)
    assert len(io.columns_for("relative")) == 10


@settings(max_examples=200)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_csv_float_text_is_shortest_repr(x):
    text = io._format_column(np.array([x]), False)[0]
    assert float(text) == x
    assert len(text) <= len(repr(x)) + 2


def test_truncated_row(tmp_path):
    path = tmp_path / "p.csv"
    io.write_points(_records(5), path, "csv", "both")
    lines = path.read_text().splitlines()
    lines[3] = ",".join(lines[3].split(",")[:-2])
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(io.PointFileError, match="line 4"):
        io.read_points(path)


def test_bad_value_names_row(tmp_path):
    path = tmp_path / "p.csv"
    io.write_points(_records(5), path, "csv", "relative")
    lines = path.read_text().splitlines()
    parts = lines[2].split(",")
    parts[5] = "abc"
    lines[2] = ",".join(parts)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(io.PointFileError, match="line 3"):
        io.read_points(path)


def test_extra_column_rejected(tmp_path):
    path = tmp_path / "p.csv"
    io.write_points(_records(2), path, "csv", "relative")
    lines = path.read_text().splitlines()
    lines[0] += ",intensity"
    lines[1:] = [line + ",7" for line in lines[1:]]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(io.PointFileError, match="header"):
        io.read_points(path)


def test_truncated_ply(tmp_path):
    path = tmp_path / "p.ply"
    io.write_points(_records(20), path, "ply", "both")
    path.write_bytes(path.read_bytes()[:-7])
    with pytest.raises(io.PointFileError, match="vertex 19"):
        io.read_points(path)


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        io.write_points(_records(1), tmp_path / "p.las", "las")


class TestTrajectory:
    def test_header_only(self, tmp_path):
        path = tmp_path / "traj.csv"
        io.write_trajectory([], np.zeros((0, 3)), [], path)
        assert path.read_text() == "t,x,y,z,yaw\n"
        t, p, y = io.read_trajectory(path)
        assert len(t) == len(p) == len(y) == 0

    def test_round_trip(self, tmp_path, rng):
        t = np.cumsum(rng.uniform(0.01, 0.1, 500))
        p = rng.normal(size=(500, 3))
        yaw = rng.uniform(-np.pi, np.pi, 500)
        io.write_trajectory(t, p, yaw, tmp_path / "traj.csv")
        t2, p2, y2 = io.read_trajectory(tmp_path / "traj.csv")
        assert t2.tobytes() == t.tobytes()
        assert p2.tobytes() == p.tobytes()
        assert y2.tobytes() == yaw.tobytes()

    def test_requires_increasing_time(self, tmp_path):
        with pytest.raises(ValueError):
            io.write_trajectory([0.0, 0.0], np.zeros((2, 3)), [0, 0], tmp_path / "t.csv")
        with pytest.raises(ValueError):
            io.write_trajectory([1.0, 0.5], np.zeros((2, 3)), [0, 0], tmp_path / "t.csv")


def test_scene_round_trip(tmp_path, small_forest):
    path = tmp_path / "scene.txt"
    io.save_scene(small_forest, path)
    back = io.load_scene(path)
    assert back.primitives == small_forest.primitives
    assert back.packed.params.tobytes() == small_forest.packed.params.tobytes()
    assert sorted(back.instance_table) == sorted(small_forest.instance_table)
    for k, info in small_forest.instance_table.items():
        assert back.instance_table[k].semantic == info.semantic
        assert tuple(back.instance_table[k].root) == tuple(info.root)
    io.save_scene(back, tmp_path / "again.txt")
    assert (tmp_path / "again.txt").read_bytes() == path.read_bytes()


def test_scene_file_rejects_garbage(tmp_path):
    path = tmp_path / "scene.txt"
    path.write_text("not a scene\n")
    with pytest.raises(io.PointFileError):
        io.load_scene(path)


def test_write_json_sorted(tmp_path):
    io.write_json({"b": 1, "a": [1, 2]}, tmp_path / "m.json")
    text = (tmp_path / "m.json").read_text()
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [1, 2], "b": 1}
