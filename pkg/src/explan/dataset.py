"""Teacher-data generation and the on-disk dataset format.

A teacher episode runs the uniform planner; at every sampling step the
local map is recorded together with the winners of 20 independent
repetitions of the 25-sample NBV selection (the rng seed of each
repetition is logged, so every stored target can be replayed exactly).
Records can be augmented with random negative poses labeled by their true
ray-cast gain, split world-wise into train/val, and streamed to a
versioned binary file whose meta block is readable without a full scan.
"""

from __future__ import annotations

import json
import logging
import math
import struct
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels, planning
from .grid import OccupancyGrid, WorldGenParams, generate_world, resolve_start
from .models import PoseTarget, SampleSet
from .planning import LocalMinimumMonitor, PlannerConfig
from .sim import (
    LocalMap,
    Pose,
    RobotModel,
    SensorModel,
    SimState,
    extract_local_map,
    make_sim,
    sense,
    step,
    traversal_time,
    wrap_angle,
)

log = logging.getLogger(__name__)


class DatasetFormatError(ValueError):
    """Raised for corrupt or incompatible dataset files."""


@dataclass
class DatasetRecord:
    local_map: np.ndarray
    robot_yaw: float
    targets: list[PoseTarget]
    is_negative: list[bool]
    world_id: int = 0
    step_index: int = 0
    rep_seeds: list[int] = field(default_factory=list)

    def positive_targets(self) -> list[PoseTarget]:
        return [t for t, neg in zip(self.targets, self.is_negative) if not neg]


@dataclass
class DatasetMeta:
    record_count: int = 0
    world_count: int = 0
    fractions: tuple[float, float] = (0.8, 0.2)
    seed: int = 0
    resolution: float = 0.2
    world_kind: str = "maze"
    version: int = 1

    def __post_init__(self):
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")


@dataclass
class Dataset:
    records: list[DatasetRecord]
    meta: DatasetMeta


@dataclass(frozen=True)
class TeacherConfig:
    n_samples: int = 25
    n_repetitions: int = 20
    max_steps: int = 400
    yaw_bins: int = 16
    seed: int = 0


def record_local_map(record: DatasetRecord, resolution: float) -> LocalMap:
    return LocalMap(
        cells=record.local_map,
        robot_yaw=record.robot_yaw,
        origin=(0.0, 0.0),
        resolution=resolution,
    )


def replay_state(record: DatasetRecord, resolution: float) -> SimState:
    """Synthetic sim state whose local map reproduces the stored one.

    The stored window becomes the whole belief with the robot at its
    center, so planner calls draw and score exactly as at record time.
    """
    belief = OccupancyGrid(record.local_map.copy(), resolution=resolution)
    n = record.local_map.shape[0]
    half = n // 2
    x = (half + 0.5) * resolution
    y = (half + 0.5) * resolution
    gt = OccupancyGrid(record.local_map.copy(), resolution=resolution)
    return SimState(ground_truth=gt, belief=belief, robot=Pose(x, y, record.robot_yaw))


def collect_teacher_samples(
    world: OccupancyGrid,
    start: Pose,
    teacher_cfg: TeacherConfig = TeacherConfig(),
    robot: RobotModel = RobotModel(),
    sensor: SensorModel = SensorModel(),
    world_id: int = 0,
) -> list[DatasetRecord]:
    """Run one uniform-planner episode, recording NBV selections.

    At every sampling step the 25-sample selection is repeated 20 times
    with independently seeded rng streams and each winner stored with its
    ray-cast gain; the episode then executes the first repetition's winner.
    Frontier-relocation steps are not recorded.
    """
    state = make_sim(world, start)
    sense(state, sensor)
    cfg = PlannerConfig(
        n_samples=teacher_cfg.n_samples, sampler="uniform", yaw_bins=teacher_cfg.yaw_bins
    )
    rng = np.random.default_rng(teacher_cfg.seed)
    monitor = LocalMinimumMonitor()
    records: list[DatasetRecord] = []
    res = world.resolution
    for step_index in range(teacher_cfg.max_steps):
        lm = extract_local_map(state, sensor)
        cells, dist, parent = planning._reachable_free_cells(lm, robot)
        stuck = monitor.tripped() or not kernels.has_visible_unknown(
            lm.cells, np.isfinite(dist).astype(np.uint8), sensor.range_m / res
        )
        if stuck or cells.shape[0] == 0:
            plan = planning.global_frontier_plan(
                state.belief, state.robot, robot, sensor, teacher_cfg.yaw_bins
            )
            if plan is None:
                break
            goal, path = plan
            step(state, goal, path, robot, sensor)
            monitor.consecutive_zero_gain_actions = 0
            continue

        rep_seeds = [int(s) for s in rng.integers(0, 2**63, size=teacher_cfg.n_repetitions)]
        targets = []
        executed = None
        for seed in rep_seeds:
            cands = planning.generate_candidates(
                state,
                cfg,
                robot,
                sensor,
                rng=np.random.default_rng(seed),
                _precomputed=(lm, cells, parent),
            )
            winner = cands[planning.select_nbv(cands)]
            if executed is None:
                executed = winner
            targets.append(
                PoseTarget(
                    x=winner.pose.x - lm.origin[0],
                    y=winner.pose.y - lm.origin[1],
                    yaw=winner.pose.yaw,
                    gain=winner.gain,
                )
            )
        records.append(
            DatasetRecord(
                local_map=lm.cells.copy(),
                robot_yaw=state.robot.yaw,
                targets=targets,
                is_negative=[False] * len(targets),
                world_id=world_id,
                step_index=step_index,
                rep_seeds=rep_seeds,
            )
        )
        step(state, executed.pose, executed.path, robot, sensor)
        monitor.record_step(executed.gain)
    return records


def collect_dataset(
    world_seeds,
    teacher_cfg: TeacherConfig = TeacherConfig(),
    world_params: WorldGenParams | None = None,
    robot: RobotModel = RobotModel(),
    sensor: SensorModel = SensorModel(),
) -> Dataset:
    """Teacher episodes over maze worlds, one per seed."""
    base = world_params or WorldGenParams()
    records: list[DatasetRecord] = []
    for world_id, wseed in enumerate(world_seeds):
        params = replace(base, seed=int(wseed), world_kind="maze")
        world = generate_world(params)
        start = resolve_start(world, params.start_xy)
        records.extend(
            collect_teacher_samples(
                world, Pose(start[0], start[1], 0.0), teacher_cfg, robot, sensor, world_id
            )
        )
    meta = DatasetMeta(
        record_count=len(records),
        world_count=len(world_seeds),
        seed=teacher_cfg.seed,
        resolution=base.resolution,
        world_kind="maze",
    )
    return Dataset(records=records, meta=meta)


def add_negatives(
    records: list[DatasetRecord],
    ratio: float,
    rng: np.random.Generator,
    robot: RobotModel = RobotModel(),
    sensor: SensorModel = SensorModel(),
    resolution: float = 0.2,
) -> list[DatasetRecord]:
    """Append ceil(ratio * N_X) random feasible poses per record.

    Negatives are uniform reachable free cells with uniform yaw, labeled
    with the true ray-cast gain on the stored map. Records without a
    reachable free cell keep their targets; a warning reports how many
    were skipped.
    """
    if ratio <= 0:
        raise ValueError("negative ratio must be > 0")
    skipped = 0
    for record in records:
        lm = record_local_map(record, resolution)
        cells, _, _ = planning._reachable_free_cells(lm, robot)
        if cells.shape[0] == 0:
            skipped += 1
            continue
        n_pos = sum(not neg for neg in record.is_negative)
        k = math.ceil(ratio * n_pos)
        for _ in range(k):
            r, c = cells[rng.integers(cells.shape[0])]
            x = (c + 0.5) * resolution
            y = (r + 0.5) * resolution
            yaw = float(rng.uniform(-np.pi, np.pi))
            gain = planning.compute_gain(lm, Pose(x, y, yaw), sensor)
            record.targets.append(PoseTarget(x=x, y=y, yaw=yaw, gain=float(gain)))
            record.is_negative.append(True)
    if skipped:
        log.warning("add_negatives skipped %d records with no reachable free cell", skipped)
    return records


def split(dataset: Dataset, fractions=(0.8, 0.2), seed: int = 0):
    """World-level train/val split: a world's records never straddle sides."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1")
    world_ids = sorted({r.world_id for r in dataset.records})
    if len(world_ids) < 2:
        raise DatasetFormatError("need at least 2 worlds to split")
    order = np.random.default_rng(seed).permutation(len(world_ids))
    n_train = int(round(fractions[0] * len(world_ids)))
    n_train = min(max(n_train, 1), len(world_ids) - 1)
    train_ids = {world_ids[i] for i in order[:n_train]}
    train_recs = [r for r in dataset.records if r.world_id in train_ids]
    val_recs = [r for r in dataset.records if r.world_id not in train_ids]

    def side(records, worlds):
        meta = replace(
            dataset.meta,
            record_count=len(records),
            world_count=worlds,
            fractions=tuple(fractions),
        )
        return Dataset(records=records, meta=meta)

    return side(train_recs, n_train), side(val_recs, len(world_ids) - n_train)


def target_utilities(
    record: DatasetRecord,
    robot: RobotModel = RobotModel(),
    sensor: SensorModel = SensorModel(),
    resolution: float = 0.2,
) -> np.ndarray:
    """gain/cost for each stored target, re-derived from the stored map."""
    lm = record_local_map(record, resolution)
    _, dist, _ = planning._reachable_free_cells(lm, robot)
    out = np.zeros(len(record.targets))
    for i, t in enumerate(record.targets):
        r = int(t.y / resolution)
        c = int(t.x / resolution)
        length = dist[r, c] * resolution
        if not np.isfinite(length):
            out[i] = 0.0
            continue
        cost = max(
            traversal_time(length, wrap_angle(t.yaw - record.robot_yaw), robot),
            resolution / robot.v_max,
        )
        out[i] = (0.0 if t.gain is None else t.gain) / cost
    return out


# ---------------------------------------------------------------------------
# training-set conversion

def cvae_samples(dataset: Dataset) -> SampleSet:
    """One row per positive teacher target (map repeated per target)."""
    maps, yaws, poses, gains = [], [], [], []
    for rec in dataset.records:
        for t in rec.positive_targets():
            maps.append(rec.local_map)
            yaws.append(rec.robot_yaw)
            poses.append((t.x, t.y, t.yaw))
            gains.append(t.gain if t.gain is not None else 0.0)
    if not maps:
        raise DatasetFormatError("dataset has no positive targets")
    return SampleSet(
        maps=np.stack(maps),
        robot_yaws=np.array(yaws),
        poses=np.array(poses),
        gains=np.array(gains),
        resolution=dataset.meta.resolution,
    )


def gain_samples(dataset: Dataset) -> SampleSet:
    """All targets (positives and negatives) with their gain labels."""
    maps, yaws, poses, gains = [], [], [], []
    for rec in dataset.records:
        for t in rec.targets:
            if t.gain is None:
                raise DatasetFormatError("gain training needs gain labels on every target")
            maps.append(rec.local_map)
            yaws.append(rec.robot_yaw)
            poses.append((t.x, t.y, t.yaw))
            gains.append(t.gain)
    if not maps:
        raise DatasetFormatError("dataset is empty")
    return SampleSet(
        maps=np.stack(maps),
        robot_yaws=np.array(yaws),
        poses=np.array(poses),
        gains=np.array(gains),
        resolution=dataset.meta.resolution,
    )


def imitation_samples(
    dataset: Dataset,
    robot: RobotModel = RobotModel(),
    sensor: SensorModel = SensorModel(),
) -> SampleSet:
    """One row per record: the stored target with the highest utility."""
    maps, yaws, poses = [], [], []
    res = dataset.meta.resolution
    for rec in dataset.records:
        pos_idx = [i for i, neg in enumerate(rec.is_negative) if not neg]
        if not pos_idx:
            continue
        utils = target_utilities(rec, robot, sensor, res)
        best = max(pos_idx, key=lambda i: utils[i])
        t = rec.targets[best]
        maps.append(rec.local_map)
        yaws.append(rec.robot_yaw)
        poses.append((t.x, t.y, t.yaw))
    if not maps:
        raise DatasetFormatError("dataset has no positive targets")
    return SampleSet(
        maps=np.stack(maps),
        robot_yaws=np.array(yaws),
        poses=np.array(poses),
        resolution=res,
    )


# ---------------------------------------------------------------------------
# file format

_D_MAGIC = b"EXPD"
_D_VERSION = 1
_HEAD = struct.Struct("<4sB")


def save_dataset(path, dataset: Dataset) -> None:
    meta = dataset.meta
    meta_doc = {
        "record_count": len(dataset.records),
        "world_count": meta.world_count,
        "fractions": list(meta.fractions),
        "seed": meta.seed,
        "resolution": meta.resolution,
        "world_kind": meta.world_kind,
        "version": meta.version,
    }
    meta_b = json.dumps(meta_doc, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(_D_MAGIC, _D_VERSION))
        fh.write(struct.pack("<I", len(meta_b)))
        fh.write(meta_b)
        fh.write(struct.pack("<I", len(dataset.records)))
        for rec in dataset.records:
            block = _pack_record(rec)
            fh.write(struct.pack("<I", len(block)))
            fh.write(block)
            fh.write(struct.pack("<I", zlib.crc32(block) & 0xFFFFFFFF))


def _pack_record(rec: DatasetRecord) -> bytes:
    side = rec.local_map.shape[0]
    out = bytearray()
    out += struct.pack("<IIdH", rec.world_id, rec.step_index, rec.robot_yaw, side)
    out += np.ascontiguousarray(rec.local_map, dtype=np.uint8).tobytes()
    out += struct.pack("<H", len(rec.targets))
    for t, neg in zip(rec.targets, rec.is_negative):
        gain = math.nan if t.gain is None else float(t.gain)
        out += struct.pack("<ddddB", t.x, t.y, t.yaw, gain, int(neg))
    out += struct.pack("<H", len(rec.rep_seeds))
    for s in rec.rep_seeds:
        out += struct.pack("<Q", s)
    return bytes(out)


def _unpack_record(block: bytes) -> DatasetRecord:
    off = 0

    def take(fmt):
        nonlocal off
        vals = struct.unpack_from(fmt, block, off)
        off += struct.calcsize(fmt)
        return vals

    world_id, step_index, robot_yaw, side = take("<IIdH")
    cells = np.frombuffer(block[off : off + side * side], dtype=np.uint8)
    off += side * side
    local_map = cells.reshape(side, side).copy()
    (n_targets,) = take("<H")
    targets, negs = [], []
    for _ in range(n_targets):
        x, y, yaw, gain, neg = take("<ddddB")
        targets.append(PoseTarget(x=x, y=y, yaw=yaw, gain=None if math.isnan(gain) else gain))
        negs.append(bool(neg))
    (n_seeds,) = take("<H")
    seeds = [take("<Q")[0] for _ in range(n_seeds)]
    return DatasetRecord(
        local_map=local_map,
        robot_yaw=robot_yaw,
        targets=targets,
        is_negative=negs,
        world_id=world_id,
        step_index=step_index,
        rep_seeds=seeds,
    )


def _read_header(fh):
    head = fh.read(_HEAD.size)
    if len(head) < _HEAD.size:
        raise DatasetFormatError("truncated dataset file")
    magic, version = _HEAD.unpack(head)
    if magic != _D_MAGIC:
        raise DatasetFormatError("not a dataset file (bad magic)")
    if version != _D_VERSION:
        raise DatasetFormatError(
            f"unsupported dataset version: expected {_D_VERSION}, found {version}"
        )
    raw = fh.read(4)
    if len(raw) < 4:
        raise DatasetFormatError("truncated dataset file")
    (meta_len,) = struct.unpack("<I", raw)
    meta_b = fh.read(meta_len)
    if len(meta_b) < meta_len:
        raise DatasetFormatError("truncated dataset file")
    doc = json.loads(meta_b.decode())
    meta = DatasetMeta(
        record_count=int(doc["record_count"]),
        world_count=int(doc["world_count"]),
        fractions=tuple(doc["fractions"]),
        seed=int(doc["seed"]),
        resolution=float(doc["resolution"]),
        world_kind=str(doc["world_kind"]),
        version=int(doc["version"]),
    )
    raw = fh.read(4)
    if len(raw) < 4:
        raise DatasetFormatError("truncated dataset file")
    (count,) = struct.unpack("<I", raw)
    return meta, count


def read_meta(path) -> DatasetMeta:
    """Meta block only; does not scan the record stream."""
    with open(path, "rb") as fh:
        meta, _ = _read_header(fh)
    return meta


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        meta, count = _read_header(fh)
        records = []
        for i in range(count):
            raw = fh.read(4)
            if len(raw) < 4:
                raise DatasetFormatError(f"record {i} truncated")
            (block_len,) = struct.unpack("<I", raw)
            block = fh.read(block_len)
            crc_raw = fh.read(4)
            if len(block) < block_len or len(crc_raw) < 4:
                raise DatasetFormatError(f"record {i} truncated")
            (stored,) = struct.unpack("<I", crc_raw)
            if zlib.crc32(block) & 0xFFFFFFFF != stored:
                raise DatasetFormatError(f"record {i} corrupted (checksum mismatch)")
            try:
                records.append(_unpack_record(block))
            except struct.error as exc:
                raise DatasetFormatError(f"record {i} corrupted: {exc}") from exc
    return Dataset(records=records, meta=meta)
