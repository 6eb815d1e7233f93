"""Run a full scan: schedule frames, walk the carrier, scan, and tally."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .io import POINT_DTYPE
from .motion import EndOfPath, pose_at
from .rng import KeyedStream
from .scene import LeafWood, Semantic
from .sensor import FrameSchedule, advance_schedule, scan_frame, sensor_origin


@dataclass
class FrameJob:
    index: int
    t: float
    pose: object
    columns: np.ndarray
    azimuths: np.ndarray


@dataclass
class SimulationResult:
    points: np.ndarray
    times: np.ndarray
    origins: np.ndarray
    yaws: np.ndarray
    frames: int
    rays: int
    recasts: int
    rays_per_beam: list
    path_ended: bool
    stats: dict = field(default_factory=dict)

    @property
    def hits(self):
        return len(self.points)

    def label_counts(self):
        sem = np.bincount(self.points["semantic"], minlength=len(Semantic))
        lw = np.bincount(self.points["leaf_wood"], minlength=len(LeafWood))
        return {"semantic": {s.name: int(sem[s]) for s in Semantic},
                "leaf_wood": {v.name: int(lw[v]) for v in LeafWood}}


def frame_count(duration, fps):
    return int(math.floor(duration * fps + 1e-9))


def plan_frames(path, sway_config, sensor, fps, duration):
    """Poses and column assignments for every frame, in order.

    Stops early (``path_ended``) if the carrier reaches the end of the path.
    """
    schedule = FrameSchedule.for_sensor(sensor, fps)
    jobs = []
    ended = False
    for f in range(frame_count(duration, fps)):
        t = f / fps
        try:
            pose = pose_at(path, sway_config, t)
        except EndOfPath:
            ended = True
            break
        azimuths, schedule = advance_schedule(schedule)
        first = schedule.column_cursor - schedule.columns_this_frame
        jobs.append(FrameJob(f, t, pose, np.arange(first, schedule.column_cursor), azimuths))
    return jobs, ended


def simulate(scene, sensor, path, sway_config, fps, duration, seed=0, threads=1):
    """Scan ``scene`` along ``path`` for ``duration`` seconds.

    Frames are independent once planned, so they may run on a thread pool;
    results are assembled in frame order and random draws are keyed by
    ``(frame, column, beam)``, making the output independent of ``threads``.
    """
    jobs, ended = plan_frames(path, sway_config, sensor, fps, duration)
    stream = KeyedStream(seed, "beam_error")

    def run(job):
        return scan_frame(scene, job.pose, sensor, job.columns, job.azimuths, job.index,
                          t=job.t, stream=stream)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    points = (np.concatenate([r.records for r in results]) if results
              else np.zeros(0, dtype=POINT_DTYPE))
    columns = sum(len(j.columns) for j in jobs)
    origins = np.array([sensor_origin(j.pose, sensor) for j in jobs]).reshape(-1, 3)
    return SimulationResult(
        points=points,
        times=np.array([j.t for j in jobs]),
        origins=origins,
        yaws=np.array([j.pose.yaw for j in jobs]),
        frames=len(jobs),
        rays=sum(r.rays for r in results),
        recasts=sum(r.recasts for r in results),
        rays_per_beam=[columns] * sensor.beam_count,
        path_ended=ended,
    )
