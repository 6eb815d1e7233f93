"""Run configuration file (YAML or JSON).

Example::

    schema_version: 1
    seed: 7
    scene:
      extent: [40, 40]
      tree_count: [10, 20]
      species:
        - {preset: pine, weight: 2}
        - {name: aspen, trunk_height: 12, dbh: 0.25, taper: 0.4, canopy_radius: 2,
           canopy_base_height: 6, leaf_count: 200, leaf_radius: 0.08, weight: 1}
    sensor:
      preset: Beams16
      azimuth_resolution: 0.2
      mount_height: 1.8
      error_option: coordinate_offset      # none | coordinate_offset | angle_offset
      divergence: vlp16                    # vlp16 | zero | [[upper, h, v], ...]
    path:
      control_points: [[-15, 0, 0], [0, 5, 0], [15, 0, 0]]
      walk_speed: 1.0
    sway: {amp_vertical: 0.05, freq_vertical: 2, amp_lateral: 0.04, freq_lateral: 1}
    fps: 30
    duration: 10                           # seconds, or "full" for the whole path
    output: {directory: out, formats: [csv, ply], frame_mode: both}

``scene.file`` may point at a saved scene instead of describing one.  Unset
seeds are derived from the master ``seed`` per purpose, so e.g. changing
the sway never reshuffles the forest.
"""

import os
from dataclasses import dataclass, fields, replace

import yaml

from .error_model import DivergenceTable, ErrorOption
from .io import FORMATS, FRAME_MODES
from .motion import ScanPath, SwayConfig
from .rng import derive_seed
from .scene import SPECIES, SceneSpec, TreeSpec
from .sensor import PRESET_BEAMS, preset

SCHEMA_VERSION = 1
OUTPUT_ENV = "LIDARFOREST_OUTPUT_DIR"


class ConfigError(ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class RunConfig:
    seed: int
    scene_spec: object
    scene_file: object
    sensor: object
    path: object
    sway: object
    fps: float
    duration: object
    output_dir: str
    formats: tuple
    frame_mode: str
    raw: dict

    @property
    def error_seed(self):
        return derive_seed(self.seed, "error")

    def resolved_duration(self):
        return self.path.duration if self.duration is None else self.duration


def _section(raw, key, required=False):
    value = raw.get(key)
    if value is None:
        if required:
            raise ConfigError(key, "missing section")
        return {}
    if not isinstance(value, dict):
        raise ConfigError(key, "expected a mapping")
    return value


def _number(section, key, where, default=None, kind=float):
    if key not in section:
        if default is None:
            raise ConfigError(f"{where}.{key}", "required")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}", f"expected a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(f"{where}.{key}", "expected an integer")
    return kind(value)


def _pair(section, key, where, default):
    value = section.get(key, default)
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{where}.{key}", "expected a two-element list")
    return tuple(value)


def _guard(where, build):
    try:
        return build()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(where, str(exc)) from None


def _species(entries):
    if not isinstance(entries, list) or not entries:
        raise ConfigError("scene.species", "expected a non-empty list")
    mix = []
    names = {f.name for f in fields(TreeSpec)}
    for i, entry in enumerate(entries):
        where = f"scene.species[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(where, "expected a mapping")
        entry = dict(entry)
        weight = _number(entry, "weight", where, default=1.0)
        entry.pop("weight", None)
        if "preset" in entry:
            name = entry.pop("preset")
            if name not in SPECIES:
                raise ConfigError(f"{where}.preset", f"unknown species {name!r}")
            spec = _guard(where, lambda: replace(SPECIES[name], **entry))
        else:
            unknown = set(entry) - names - {"name"}
            if unknown:
                raise ConfigError(where, f"unknown keys {sorted(unknown)}")
            if "name" in entry:
                entry["species_name"] = entry.pop("name")
            spec = _guard(where, lambda: TreeSpec(**entry))
        mix.append((spec, weight))
    return tuple(mix)


def _scene(raw, master_seed, base_dir):
    sec = _section(raw, "scene", required=True)
    if "file" in sec:
        path = sec["file"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        return None, path
    seed = sec.get("seed", derive_seed(master_seed, "scene"))
    mix = _species(sec["species"]) if "species" in sec else SceneSpec.__dataclass_fields__["species_mix"].default
    spec = _guard("scene", lambda: SceneSpec(
        seed=int(seed),
        extent=_pair(sec, "extent", "scene", (40.0, 40.0)),
        tree_count_range=_pair(sec, "tree_count", "scene", (10, 20)),
        species_mix=mix,
        terrain_amplitude=_number(sec, "terrain_amplitude", "scene", 0.5),
        terrain_cell=_number(sec, "terrain_cell", "scene", 2.0),
        terrain_feature_size=_number(sec, "terrain_feature_size", "scene", 10.0),
        min_tree_spacing=_number(sec, "min_tree_spacing", "scene", 1.5),
        stone_count=_number(sec, "stones", "scene", 0, int),
        shrub_count=_number(sec, "shrubs", "scene", 0, int),
    ))
    return spec, None


def _divergence(value, max_range):
    if value is None or value == "vlp16":
        return DivergenceTable.vlp16(max_range)
    if value == "zero":
        return DivergenceTable.zeros(max_range)
    return _guard("sensor.divergence", lambda: DivergenceTable(tuple(tuple(r) for r in value)))


def _sensor(raw):
    sec = dict(_section(raw, "sensor"))
    name = sec.pop("preset", "Beams16")
    if name not in PRESET_BEAMS:
        raise ConfigError("sensor.preset", f"unknown preset {name!r}")
    overrides = {}
    for key in ("azimuth_resolution", "spin_rate", "horizontal_fov", "max_range", "mount_height"):
        if key in sec:
            overrides[key] = _number(sec, key, "sensor")
            sec.pop(key)
    if "vertical_angles" in sec:
        overrides["vertical_angles"] = tuple(sec.pop("vertical_angles"))
    if "error_option" in sec:
        option = sec.pop("error_option")
        try:
            overrides["error_option"] = ErrorOption(option)
        except ValueError:
            raise ConfigError("sensor.error_option", f"unknown option {option!r}") from None
    max_range = overrides.get("max_range", 100.0)
    overrides["divergence"] = _divergence(sec.pop("divergence", None), max_range)
    if sec:
        raise ConfigError("sensor", f"unknown keys {sorted(sec)}")
    return _guard("sensor", lambda: preset(name, **overrides))


def parse_config(raw, base_dir="."):
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")
    seed = _number(raw, "seed", "<root>", 0, int)
    if seed < 0:
        raise ConfigError("seed", "must be non-negative")
    scene_spec, scene_file = _scene(raw, seed, base_dir)
    sensor = _sensor(raw)

    psec = _section(raw, "path", required=True)
    if "control_points" not in psec:
        raise ConfigError("path.control_points", "required")
    path = _guard("path", lambda: ScanPath(psec["control_points"],
                                           _number(psec, "walk_speed", "path", 1.0),
                                           _number(psec, "samples_per_segment", "path", 64, int)))

    ssec = raw.get("sway", {})
    if ssec == "none":
        sway = SwayConfig.still()
    else:
        if not isinstance(ssec, dict):
            raise ConfigError("sway", "expected a mapping or 'none'")
        sway = _guard("sway", lambda: SwayConfig(**ssec))

    fps = _number(raw, "fps", "<root>", 30.0)
    if fps <= 0:
        raise ConfigError("fps", "must be positive")
    duration = raw.get("duration", "full")
    if duration == "full":
        duration = None
    else:
        duration = _number(raw, "duration", "<root>")
        if duration <= 0:
            raise ConfigError("duration", "must be positive")

    osec = _section(raw, "output")
    directory = os.environ.get(OUTPUT_ENV) or osec.get("directory", "out")
    formats = osec.get("formats", ["csv"])
    if isinstance(formats, str):
        formats = [formats]
    for f in formats:
        if f not in FORMATS:
            raise ConfigError("output.formats", f"unknown format {f!r}")
    frame_mode = osec.get("frame_mode", "both")
    if frame_mode not in FRAME_MODES:
        raise ConfigError("output.frame_mode", f"unknown frame mode {frame_mode!r}")

    return RunConfig(seed, scene_spec, scene_file, sensor, path, sway, fps, duration,
                     directory, tuple(formats), frame_mode, raw)


def load_config(path):
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("<file>", f"cannot parse {path}: {exc}") from None
    return parse_config(raw, base_dir=os.path.dirname(os.path.abspath(path)))
