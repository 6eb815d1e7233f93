"""Command-line front end: ``lidarforest {scene,simulate,metrics,presets}``.

Exit codes: 0 success, 1 configuration error, 2 I/O error.
"""

import argparse
import os
import sys

import numpy as np

from . import io
from .config import ConfigError, load_config
from .metrics import MetricsParams, RegionOfInterest, chamfer, infra_d, infra_nuc
from .scene import Semantic, generate_forest
from .sensor import PRESET_BEAMS, preset
from .simulation import simulate

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


def build_scene(config):
    if config.scene_file:
        return io.load_scene(config.scene_file)
    return generate_forest(config.scene_spec)


def scene_summary(scene):
    trees = scene.tree_ids()
    lines = [f"trees={len(trees)}", f"primitives={len(scene)}"]
    for k, info in sorted(scene.instance_table.items()):
        species = info.species.species_name if info.species else "-"
        x, y, z = info.root
        lines.append(f"instance {k}: {Semantic(info.semantic).name} {species} "
                     f"root=({x:.3f}, {y:.3f}, {z:.3f})")
    if scene.metadata.get("placement_truncated"):
        lines.append(f"warning: placed {scene.metadata['placed_trees']} of "
                     f"{scene.metadata['requested_trees']} requested trees")
    return "\n".join(lines)


def cmd_scene(config, out, stdout=sys.stdout):
    scene = build_scene(config)
    io.save_scene(scene, out)
    print(scene_summary(scene), file=stdout)
    return scene


def cmd_simulate(config, threads=1, output_dir=None):
    """Run the configured scan and write points, trajectory and manifest.

    Returns the manifest dict.
    """
    scene = build_scene(config)
    result = simulate(scene, config.sensor, config.path, config.sway, config.fps,
                      config.resolved_duration(), seed=config.error_seed, threads=threads)
    directory = output_dir or config.output_dir
    os.makedirs(directory, exist_ok=True)
    files = {}
    for fmt in config.formats:
        name = f"points.{fmt}"
        io.write_points(result.points, os.path.join(directory, name), fmt, config.frame_mode)
        files[fmt] = name
    io.write_trajectory(result.times, result.origins, result.yaws,
                        os.path.join(directory, "trajectory.csv"))
    files["trajectory"] = "trajectory.csv"
    manifest = {
        "schema_version": 1,
        "config": config.raw,
        "frame_mode": config.frame_mode,
        "frames": result.frames,
        "rays": result.rays,
        "rays_per_beam": result.rays_per_beam,
        "recasts": result.recasts,
        "hits": result.hits,
        "label_counts": result.label_counts(),
        "path_ended": result.path_ended,
        "scene": {"primitives": len(scene), "trees": len(scene.tree_ids()),
                  "metadata": scene.metadata},
        "files": files,
    }
    if result.path_ended:
        manifest["note"] = (f"path ended after {result.frames} frames; "
                            "requested duration was not reached")
    io.write_json(manifest, os.path.join(directory, "manifest.json"))
    return manifest


def _xyz(records):
    abs_xyz = np.column_stack([records["ax"], records["ay"], records["az"]])
    if len(records) and not np.isnan(abs_xyz).any():
        return abs_xyz
    return np.column_stack([records["x"], records["y"], records["z"]])


def cmd_metrics(points_file, region, params, reference=None, frame_mode=None):
    """Metric report as ``name=value`` lines.

    World coordinates are used when the file stores them, sensor-frame
    coordinates otherwise.
    """
    pts = _xyz(io.read_points(points_file, frame_mode))
    lines = [f"InfraD={infra_d(pts, region)!r}"]
    try:
        lines.append(f"InfraNUC={infra_nuc(pts, region, params)!r}")
    except ValueError as exc:
        lines.append(f"InfraNUC=nan  # {exc}")
    if reference is not None:
        ref = _xyz(io.read_points(reference, frame_mode))
        lines.append(f"Chamfer={chamfer(pts, ref)!r}")
    return "\n".join(lines)


def cmd_presets():
    rows = []
    for name in PRESET_BEAMS:
        c = preset(name)
        angles = ", ".join(f"{a:g}" for a in c.vertical_angles)
        rows.append(f"{name}: beams={c.beam_count} spin_rate={c.spin_rate:g}rpm "
                    f"azimuth_resolution={c.azimuth_resolution:g}deg "
                    f"horizontal_fov={c.horizontal_fov:g}deg max_range={c.max_range:g}m "
                    f"vertical_angles=[{angles}]")
    return "\n".join(rows)


def _parser():
    p = argparse.ArgumentParser(prog="lidarforest", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("scene", help="generate a forest scene and save it")
    s.add_argument("config")
    s.add_argument("-o", "--out", default="scene.txt")

    s = sub.add_parser("simulate", help="run a scan and write point files")
    s.add_argument("config")
    s.add_argument("-o", "--output-dir")
    s.add_argument("--threads", type=int, default=1)

    s = sub.add_parser("metrics", help="InfraD / InfraNUC / Chamfer report")
    s.add_argument("points")
    s.add_argument("--region", nargs=4, type=float, required=True,
                   metavar=("X0", "Y0", "WIDTH", "DEPTH"))
    s.add_argument("--disks", type=int, default=100)
    s.add_argument("--ratio", type=float, default=0.01)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--reference", help="second point file for Chamfer distance")
    s.add_argument("--frame-mode", choices=["relative", "absolute"],
                   help="meaning of x,y,z in 10-column CSV files")

    sub.add_parser("presets", help="list sensor presets")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "scene":
            cmd_scene(load_config(args.config), args.out)
        elif args.command == "simulate":
            if args.threads < 1:
                raise ConfigError("--threads", "must be >= 1")
            manifest = cmd_simulate(load_config(args.config), args.threads, args.output_dir)
            print(f"frames={manifest['frames']} rays={manifest['rays']} hits={manifest['hits']}")
        elif args.command == "metrics":
            region = RegionOfInterest(*args.region)
            params = MetricsParams(args.disks, args.ratio, args.seed)
            print(cmd_metrics(args.points, region, params, args.reference, args.frame_mode))
        else:
            print(cmd_presets())
    except (io.PointFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
