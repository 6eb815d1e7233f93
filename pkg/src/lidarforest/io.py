"""Point, trajectory and scene files.

Point records are a numpy structured array (:data:`POINT_DTYPE`) holding
both coordinate frames; the writers select which frame(s) reach disk.

CSV layout (header row, then one row per point)::

    frame,t,beam,azimuth,x,y,z,leaf_wood,semantic,instance          relative / absolute
    frame,t,beam,azimuth,x,y,z,leaf_wood,semantic,instance,ax,ay,az  both

``x,y,z`` are sensor-frame coordinates in ``relative`` and ``both`` modes and
world coordinates in ``absolute`` mode.  Floats are written in shortest
round-trip form.  Label codes: semantic Ground=0 Tree=1 Stone=2 Shrub=3;
leaf_wood NotApplicable=0 Wood=1 Leaf=2.

PLY files are ``binary_little_endian`` with the same properties (doubles for
floats, ``uchar`` labels) and carry the frame mode in a header comment.
"""

import json
import os

import numpy as np

POINT_DTYPE = np.dtype([
    ("frame", "<i4"), ("t", "<f8"), ("beam", "<i4"), ("azimuth", "<f8"),
    ("x", "<f8"), ("y", "<f8"), ("z", "<f8"),
    ("ax", "<f8"), ("ay", "<f8"), ("az", "<f8"),
    ("leaf_wood", "u1"), ("semantic", "u1"), ("instance", "<u4"),
])

BASE_COLUMNS = ["frame", "t", "beam", "azimuth", "x", "y", "z", "leaf_wood", "semantic", "instance"]
ABS_COLUMNS = ["ax", "ay", "az"]
FRAME_MODES = ("relative", "absolute", "both")
FORMATS = ("csv", "ply")

_INT_FIELDS = {"frame", "beam", "leaf_wood", "semantic", "instance"}
_PLY_TYPES = {"<i4": "int", "<f8": "double", "|u1": "uchar", "<u4": "uint"}
_PLY_DTYPES = {v: k for k, v in _PLY_TYPES.items()}


class PointFileError(ValueError):
    pass


def empty_points(n=0):
    out = np.zeros(n, dtype=POINT_DTYPE)
    for name in ("x", "y", "z", "ax", "ay", "az"):
        out[name] = np.nan
    return out


def columns_for(frame_mode):
    if frame_mode not in FRAME_MODES:
        raise ValueError(f"unknown frame_mode {frame_mode!r}")
    return BASE_COLUMNS + (ABS_COLUMNS if frame_mode == "both" else [])


def _disk_view(frame_mode):
    """``(column names, record field per column)``."""
    cols = columns_for(frame_mode)
    return cols, _target_fields(cols, frame_mode)


def _format_column(values, integer):
    if integer:
        return values.astype(np.int64).astype(str)
    # numpy's float->str conversion is the shortest round-trip repr
    return values.astype(np.float64).astype(str)


def write_points(records, path, format="csv", frame_mode="both"):
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}")
    records = np.asarray(records, dtype=POINT_DTYPE)
    cols, src = _disk_view(frame_mode)
    if format == "csv":
        with open(path, "w", newline="") as fh:
            fh.write(",".join(cols) + "\n")
            chunk = 200_000
            for s in range(0, len(records), chunk):
                part = records[s:s + chunk]
                text = [_format_column(part[f], f in _INT_FIELDS).tolist() for f in src]
                fh.write("".join(",".join(row) + "\n" for row in zip(*text)))
        return
    dtype = np.dtype([(c, POINT_DTYPE[f]) for c, f in zip(cols, src)])
    data = np.empty(len(records), dtype=dtype)
    for c, f in zip(cols, src):
        data[c] = records[f]
    header = ["ply", "format binary_little_endian 1.0",
              "comment lidarforest points v1",
              f"comment frame_mode {frame_mode}",
              "comment leaf_wood 0=NotApplicable 1=Wood 2=Leaf",
              "comment semantic 0=Ground 1=Tree 2=Stone 3=Shrub",
              f"element vertex {len(records)}"]
    header += [f"property {_PLY_TYPES[dtype[c].str]} {c}" for c in cols]
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(data.tobytes())


def _target_fields(cols, frame_mode):
    src = list(cols)
    if frame_mode == "absolute":
        src[4:7] = ["ax", "ay", "az"]
    return src


def read_points(path, frame_mode=None):
    """Inverse of :func:`write_points`.

    The frame is fixed by the file for ``both`` CSVs and for PLY; a 10-column
    CSV needs ``frame_mode`` (default ``relative``).  Coordinates of a frame
    that is not stored come back as NaN.
    """
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == b"ply\n":
        return _read_ply(path)
    return _read_csv(path, frame_mode)


def _read_csv(path, frame_mode):
    with open(path, "r", newline="") as fh:
        header = fh.readline().rstrip("\r\n")
        cols = header.split(",")
        if cols == columns_for("both"):
            mode = "both"
        elif cols == BASE_COLUMNS:
            mode = frame_mode or "relative"
            if mode == "both":
                raise PointFileError(f"{path}: line 1: 10-column header cannot be frame_mode 'both'")
        else:
            raise PointFileError(f"{path}: line 1: unexpected CSV header {header!r}")
        src = _target_fields(cols, mode)
        lines = fh.read().splitlines()
    width = len(cols)
    rows = []
    for i, line in enumerate(lines):
        parts = line.split(",")
        if len(parts) != width:
            raise PointFileError(f"{path}: line {i + 2}: expected {width} fields, got {len(parts)}")
        rows.append(parts)
    out = empty_points(len(rows))
    for name, field, column in zip(cols, src, zip(*rows)):
        convert = int if field in _INT_FIELDS else float
        values = []
        for i, v in enumerate(column):
            try:
                values.append(convert(v))
            except ValueError as exc:
                raise PointFileError(f"{path}: line {i + 2}: column {name}: {exc}") from None
        out[field] = values
    return out


def _read_ply(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    end = blob.find(b"end_header\n")
    if end < 0:
        raise PointFileError(f"{path}: PLY header not terminated")
    lines = blob[:end].decode("ascii").splitlines()
    body = blob[end + len(b"end_header\n"):]
    if lines[:2] != ["ply", "format binary_little_endian 1.0"]:
        raise PointFileError(f"{path}: only binary_little_endian PLY is supported")
    mode, count, props = None, None, []
    for n, line in enumerate(lines[2:], start=3):
        words = line.split()
        if words[0] == "comment":
            if len(words) == 3 and words[1] == "frame_mode":
                mode = words[2]
        elif words[0] == "element":
            if words[1] != "vertex" or count is not None:
                raise PointFileError(f"{path}: header line {n}: unexpected element {line!r}")
            count = int(words[2])
        elif words[0] == "property" and len(words) == 3 and words[1] in _PLY_DTYPES:
            props.append((words[2], _PLY_DTYPES[words[1]]))
        else:
            raise PointFileError(f"{path}: header line {n}: cannot parse {line!r}")
    if mode not in FRAME_MODES or count is None:
        raise PointFileError(f"{path}: header lacks frame_mode comment or vertex count")
    names = [p[0] for p in props]
    if names != columns_for(mode):
        raise PointFileError(f"{path}: properties {names} do not match frame_mode {mode}")
    dtype = np.dtype(props)
    if len(body) != count * dtype.itemsize:
        complete = len(body) // dtype.itemsize
        raise PointFileError(f"{path}: vertex {complete} truncated "
                             f"({len(body)} bytes for {count} vertices)")
    data = np.frombuffer(body, dtype=dtype)
    out = empty_points(count)
    for name, field in zip(names, _target_fields(names, mode)):
        out[field] = data[name]
    return out


# ------------------------------------------------------------ trajectory

TRAJECTORY_COLUMNS = ["t", "x", "y", "z", "yaw"]


def write_trajectory(times, positions, yaws, path):
    """CSV ``t,x,y,z,yaw`` of sensor origins; ``t`` must strictly increase."""
    times = np.asarray(times, dtype=float).reshape(-1)
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    yaws = np.asarray(yaws, dtype=float).reshape(-1)
    if not len(times) == len(positions) == len(yaws):
        raise ValueError("times, positions and yaws differ in length")
    if np.any(np.diff(times) <= 0):
        raise ValueError("trajectory timestamps must be strictly increasing")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for t, p, yaw in zip(times, positions, yaws):
            fh.write(",".join(repr(float(v)) for v in (t, *p, yaw)) + "\n")


def read_trajectory(path):
    with open(path) as fh:
        header = fh.readline().strip()
        if header.split(",") != TRAJECTORY_COLUMNS:
            raise PointFileError(f"{path}: line 1: unexpected trajectory header {header!r}")
        rows = []
        for n, line in enumerate(fh, start=2):
            parts = line.strip().split(",")
            if len(parts) != 5:
                raise PointFileError(f"{path}: line {n}: expected 5 fields")
            rows.append([float(v) for v in parts])
    arr = np.array(rows, dtype=float).reshape(-1, 5)
    return arr[:, 0], arr[:, 1:4], arr[:, 4]


# ----------------------------------------------------------------- scene

SCENE_MAGIC = "lidarforest-scene"
SCENE_VERSION = 1
_KIND_CODES = {0: "T", 1: "C", 2: "D"}
_KIND_WIDTH = {"T": 9, "C": 8, "D": 7}


def save_scene(scene, path):
    """Text dump: magic/version line, one JSON metadata line, one line per primitive.

    Primitive lines are ``<T|C|D> leaf_wood semantic instance <params...>``
    with triangle ``v0 v1 v2``, cone ``base axis r0 r1``, disc ``center normal r``.
    """
    from dataclasses import asdict

    table = {}
    for k, info in sorted(scene.instance_table.items()):
        table[str(k)] = {"semantic": int(info.semantic),
                         "species": asdict(info.species) if info.species else None,
                         "root": [float(c) for c in info.root]}
    meta = {"instances": table, "metadata": scene.metadata}
    packed = scene.packed
    with open(path, "w") as fh:
        fh.write(f"{SCENE_MAGIC} {SCENE_VERSION}\n")
        fh.write(json.dumps(meta, sort_keys=True) + "\n")
        for kind, p, lw, sem, inst in zip(packed.kind, packed.params, packed.leaf_wood,
                                          packed.semantic, packed.instance):
            code = _KIND_CODES[int(kind)]
            nums = " ".join(repr(float(v)) for v in p[:_KIND_WIDTH[code]])
            fh.write(f"{code} {int(lw)} {int(sem)} {int(inst)} {nums}\n")


def load_scene(path):
    from .raycast import PrimitiveSet
    from .scene import InstanceInfo, Scene, Semantic, TreeSpec

    with open(path) as fh:
        first = fh.readline().split()
        if len(first) != 2 or first[0] != SCENE_MAGIC:
            raise PointFileError(f"{path}: not a scene file")
        if int(first[1]) != SCENE_VERSION:
            raise PointFileError(f"{path}: unsupported scene version {first[1]}")
        meta = json.loads(fh.readline())
        kinds, params, labels = [], [], []
        codes = {v: k for k, v in _KIND_CODES.items()}
        for n, line in enumerate(fh, start=3):
            parts = line.split()
            if not parts or parts[0] not in codes or len(parts) != 4 + _KIND_WIDTH[parts[0]]:
                raise PointFileError(f"{path}: line {n}: malformed primitive")
            kinds.append(codes[parts[0]])
            row = [float(v) for v in parts[4:]]
            params.append(row + [0.0] * (9 - len(row)))
            labels.append([int(v) for v in parts[1:4]])
    labels = np.array(labels, dtype=np.int64).reshape(-1, 3)
    packed = PrimitiveSet(kinds, np.array(params).reshape(-1, 9), labels[:, 0], labels[:, 1], labels[:, 2])
    table = {}
    for k, info in meta["instances"].items():
        spec = TreeSpec(**info["species"]) if info["species"] else None
        table[int(k)] = InstanceInfo(Semantic(info["semantic"]), spec, tuple(info["root"]))
    return Scene.from_primitives(packed.to_list(), table, meta["metadata"])


def write_json(obj, path):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
