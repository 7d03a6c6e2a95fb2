"""Experiment harness: episode execution, benchmarks, Pareto reports, CLI.

An episode alternates one planning decision with one simulated motion until
the robot has covered the observable part of the world, the step budget runs
out, or the planner finds nothing left to do.  Coverage is measured against
a precomputed observable-cell set (everything visible from free space), so
unobservable wall interiors never count against completion.

The benchmark sweeps planner variants over worlds and start poses and
aggregates per-variant statistics into a fixed-column CSV; the Pareto report
reduces those rows to performance-versus-compute points.  All outputs are
machine readable (CSV / JSON lines) and deterministic for a given seed,
wall-clock timing fields excepted.
"""

import argparse
import concurrent.futures
import csv
import json
import logging
import math
import multiprocessing
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import dataset, kernels, models, nn, planning, sim
from .grid import (
    FREE,
    UNKNOWN,
    OccupancyGrid,
    WorldGenParams,
    generate_world,
    load_world,
    resolve_start,
    save_world,
)
from .models import CvaeParams, GainNetParams, ImitationParams, ModelBundle, TrainConfig
from .planning import ExplorationComplete, LocalMinimumMonitor, PlannerConfig, compute_gain
from .sim import Pose, RobotModel, SensorModel, extract_local_map

log = logging.getLogger(__name__)

EPISODE_SCHEMA_VERSION = 1

# wall-clock timing fields, excluded from determinism guarantees
WALL_CLOCK_STEP_FIELDS = ("compute_s",)
WALL_CLOCK_END_FIELDS = ("total_compute_s", "objective")
WALL_CLOCK_CSV_COLUMNS = ("step_compute_mean_s", "episode_compute_mean_s", "objective_mean")


class ConfigError(ValueError):
    """Bad run configuration, detected before any episode starts."""


# ---------------------------------------------------------------------------
# episode execution


@dataclass
class EpisodeLog:
    """Per-step exploration record plus one terminal status.

    The per-step lists run in lockstep; sim_time_s, coverage and distance_m
    are cumulative, compute_s is the wall-clock planning time of that step
    alone.  true_utility is the chosen action re-scored with the ray-cast
    oracle (None for global-planner relocations, which have no local gain).
    """

    sampler: str = "uniform"
    gain_mode: str = "raycast"
    n_samples: int = 0
    seed: int = 0
    world_label: str = ""
    start: tuple = (0.0, 0.0, 0.0)
    budget: int = 0
    completion_threshold: float = 0.99
    observable_cells: int = 0
    initial_coverage: float = 0.0
    terminal_status: str = "failed"
    sim_time_s: list = field(default_factory=list)
    compute_s: list = field(default_factory=list)
    coverage: list = field(default_factory=list)
    distance_m: list = field(default_factory=list)
    poses: list = field(default_factory=list)
    global_planner: list = field(default_factory=list)
    true_utility: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.sim_time_s)

    def time_to_coverage(self, target: float):
        """Earliest cumulative sim time at which coverage reached target."""
        if self.initial_coverage >= target:
            return 0.0
        for t, cov in zip(self.sim_time_s, self.coverage):
            if cov >= target:
                return t
        return None

    def total_compute_s(self) -> float:
        return float(sum(self.compute_s))

    def objective(self, gamma: float) -> float:
        """Total mission time plus gamma-weighted planner compute."""
        total_time = self.sim_time_s[-1] if self.sim_time_s else 0.0
        return float(total_time + gamma * self.total_compute_s())


def traversable_viewers(world: OccupancyGrid, robot: RobotModel) -> np.ndarray:
    """Free cells the robot can stand on, as a uint8 mask.

    Footprint inflation removes wall-hugging cells; keeping only the largest
    connected patch removes walled-off pockets no start pose could reach.
    """
    blocked = planning.inflate_occupancy(
        world.cells, robot.footprint_radius / world.resolution
    )
    ok = (world.cells == FREE) & (blocked == 0)
    best = np.zeros_like(ok)
    remaining = ok.copy()
    while remaining.any():
        r, c = np.argwhere(remaining)[0]
        dist, _ = kernels.dijkstra_grid(blocked, int(r), int(c))
        component = np.isfinite(dist) & ok
        if component.sum() > best.sum():
            best = component
        remaining &= ~component
    return best.astype(np.uint8)


def observable_cells(
    world: OccupancyGrid,
    sensor: SensorModel,
    robot: RobotModel | None = None,
) -> np.ndarray:
    """Boolean mask of cells observable from reachable sensor placements.

    The coverage denominator of every episode: what the robot could see if
    it visited every traversable cell.  Cells visible only from untraversable
    free space (too close to a wall, or inside a sealed pocket) are excluded,
    matching what exploration can actually achieve.
    """
    robot = robot or RobotModel()
    viewers = traversable_viewers(world, robot)
    mask = kernels.observable_mask(
        world.cells, sensor.range_m / world.resolution, viewers
    )
    return mask.astype(bool)


def coverage_fraction(belief: OccupancyGrid, observable: np.ndarray) -> float:
    n_obs = int(np.count_nonzero(observable))
    known = (belief.cells != UNKNOWN) & observable
    return float(np.count_nonzero(known)) / n_obs


def validate_models(config: PlannerConfig, bundle: ModelBundle | None) -> None:
    """Reject sampler/gain-mode combinations the bundle cannot serve."""
    needs_models = (
        config.sampler in ("cvae", "imitation")
        or config.gain_mode in ("learned_mlp", "learned_cnn", "joint")
    )
    if not needs_models:
        return
    if bundle is None:
        raise ConfigError(
            f"sampler {config.sampler!r} with gain_mode {config.gain_mode!r} requires models"
        )
    if config.sampler == "cvae" and not isinstance(bundle.sampler, CvaeParams):
        raise ConfigError("sampler 'cvae' requires a cvae model")
    if config.sampler == "imitation" and not isinstance(bundle.sampler, ImitationParams):
        raise ConfigError("sampler 'imitation' requires an imitation model")
    if config.gain_mode == "joint":
        if not (isinstance(bundle.sampler, CvaeParams) and bundle.sampler.joint_gain):
            raise ConfigError("gain_mode 'joint' requires a cvae model trained with joint gains")
    if config.gain_mode == "learned_mlp":
        if bundle.gain_net is None or bundle.gain_net.kind != "gain_mlp":
            raise ConfigError("gain_mode 'learned_mlp' requires a gain_mlp model")
    if config.gain_mode == "learned_cnn":
        if bundle.gain_net is None or bundle.gain_net.kind != "gain_cnn":
            raise ConfigError("gain_mode 'learned_cnn' requires a gain_cnn model")


def run_episode(
    world: OccupancyGrid,
    start,
    config: PlannerConfig,
    bundle: ModelBundle | None = None,
    seed: int = 0,
    *,
    robot: RobotModel | None = None,
    sensor: SensorModel | None = None,
    budget: int = 500,
    completion_threshold: float = 0.99,
    observable: np.ndarray | None = None,
    world_label: str = "",
) -> EpisodeLog:
    """Run one exploration episode and log every step.

    Deterministic given (world, start, config, bundle, seed) except for the
    wall-clock compute fields.  Only plan_step is timed; simulation and
    oracle re-scoring stay outside the measurement.
    """
    robot = robot or RobotModel()
    sensor = sensor or SensorModel()
    validate_models(config, bundle)
    if observable is None:
        observable = observable_cells(world, sensor, robot)
    start = Pose(*start) if not isinstance(start, Pose) else start
    state = sim.make_sim(world, start)
    sim.sense(state, sensor)
    rng = np.random.default_rng(seed)
    monitor = LocalMinimumMonitor()

    ep = EpisodeLog(
        sampler=config.sampler,
        gain_mode=config.gain_mode,
        n_samples=config.n_samples,
        seed=seed,
        world_label=world_label,
        start=(start.x, start.y, start.yaw),
        budget=budget,
        completion_threshold=completion_threshold,
        observable_cells=int(np.count_nonzero(observable)),
    )
    cov = coverage_fraction(state.belief, observable)
    ep.initial_coverage = cov
    prev_unknown = state.belief.unknown_count()

    while True:
        if cov >= completion_threshold:
            ep.terminal_status = "complete"
            break
        if ep.steps >= budget:
            ep.terminal_status = "budget_exhausted"
            break
        try:
            cand, compute = planning.plan_step(
                state, config, robot, sensor, bundle, rng, monitor
            )
        except ExplorationComplete:
            # nothing reachable left to observe, yet short of the threshold
            ep.terminal_status = "failed"
            break
        if cand.source == "frontier":
            true_utility = None
        else:
            lm = extract_local_map(state, sensor)
            true_utility = compute_gain(lm, cand.pose, sensor) / cand.cost
        sim.step(state, cand.pose, cand.path, robot, sensor)
        unknown = state.belief.unknown_count()
        monitor.record_step(prev_unknown - unknown)
        prev_unknown = unknown
        cov = coverage_fraction(state.belief, observable)

        ep.sim_time_s.append(float(state.elapsed_time))
        ep.compute_s.append(float(compute))
        ep.coverage.append(cov)
        ep.distance_m.append(float(state.distance_traveled))
        ep.poses.append((cand.pose.x, cand.pose.y, cand.pose.yaw))
        ep.global_planner.append(cand.source == "frontier")
        ep.true_utility.append(true_utility)
    return ep


# ---------------------------------------------------------------------------
# episode logs on disk (JSON lines)


def write_episode_jsonl(fh_or_path, ep: EpisodeLog, gamma: float = 1.0) -> None:
    """One meta line, one line per step, one terminal line."""

    def emit(fh):
        meta = {
            "type": "meta",
            "schema_version": EPISODE_SCHEMA_VERSION,
            "sampler": ep.sampler,
            "gain_mode": ep.gain_mode,
            "n_samples": ep.n_samples,
            "seed": ep.seed,
            "world": ep.world_label,
            "start": list(ep.start),
            "budget": ep.budget,
            "completion_threshold": ep.completion_threshold,
            "observable_cells": ep.observable_cells,
            "initial_coverage": ep.initial_coverage,
        }
        fh.write(json.dumps(meta, sort_keys=True) + "\n")
        for i in range(ep.steps):
            x, y, yaw = ep.poses[i]
            row = {
                "type": "step",
                "step": i,
                "sim_time_s": ep.sim_time_s[i],
                "compute_s": ep.compute_s[i],
                "coverage": ep.coverage[i],
                "distance_m": ep.distance_m[i],
                "x": x,
                "y": y,
                "yaw": yaw,
                "sampler": ep.sampler,
                "gain_mode": ep.gain_mode,
                "global_planner": ep.global_planner[i],
                "true_utility": ep.true_utility[i],
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")
        end = {
            "type": "end",
            "terminal_status": ep.terminal_status,
            "steps": ep.steps,
            "sim_time_s": ep.sim_time_s[-1] if ep.sim_time_s else 0.0,
            "distance_m": ep.distance_m[-1] if ep.distance_m else 0.0,
            "coverage": ep.coverage[-1] if ep.coverage else ep.initial_coverage,
            "total_compute_s": ep.total_compute_s(),
            "gamma": gamma,
            "objective": ep.objective(gamma),
        }
        fh.write(json.dumps(end, sort_keys=True) + "\n")

    if hasattr(fh_or_path, "write"):
        emit(fh_or_path)
    else:
        with open(fh_or_path, "w") as fh:
            emit(fh)


def read_episode_jsonl(path) -> EpisodeLog:
    ep = EpisodeLog()
    with open(path) as fh:
        for line in fh:
            row = json.loads(line)
            kind = row.get("type")
            if kind == "meta":
                ep.sampler = row["sampler"]
                ep.gain_mode = row["gain_mode"]
                ep.n_samples = row["n_samples"]
                ep.seed = row["seed"]
                ep.world_label = row["world"]
                ep.start = tuple(row["start"])
                ep.budget = row["budget"]
                ep.completion_threshold = row["completion_threshold"]
                ep.observable_cells = row["observable_cells"]
                ep.initial_coverage = row["initial_coverage"]
            elif kind == "step":
                ep.sim_time_s.append(row["sim_time_s"])
                ep.compute_s.append(row["compute_s"])
                ep.coverage.append(row["coverage"])
                ep.distance_m.append(row["distance_m"])
                ep.poses.append((row["x"], row["y"], row["yaw"]))
                ep.global_planner.append(row["global_planner"])
                ep.true_utility.append(row["true_utility"])
            elif kind == "end":
                ep.terminal_status = row["terminal_status"]
            else:
                raise ConfigError(f"unknown episode log line type: {kind!r}")
    return ep


# ---------------------------------------------------------------------------
# benchmark


@dataclass(frozen=True)
class Variant:
    sampler: str = "uniform"
    gain_mode: str = "raycast"
    n_samples: int = 10

    @property
    def label(self) -> str:
        return f"{self.sampler}-{self.gain_mode}"


@dataclass
class BenchmarkConfig:
    variants: list = field(default_factory=list)
    worlds: list = field(default_factory=list)  # WorldGenParams or world-file paths
    model_paths: dict = field(default_factory=dict)  # model kind -> file path
    repeats: int = 3
    starts_per_world: int = 1
    budget: int = 500
    coverage_targets: tuple = (0.90, 0.99)
    gamma: float = 1.0
    completion_threshold: float = 0.99
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.starts_per_world < 1:
            raise ValueError("starts_per_world must be >= 1")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not all(0.0 < t <= 1.0 for t in self.coverage_targets):
            raise ValueError("coverage targets must lie in (0, 1]")


@dataclass
class BenchmarkResults:
    columns: list
    rows: list  # one dict per (variant, N)
    episodes: list  # dicts: variant/world/start_index/repeat/log


def _required_model_kinds(variant: Variant) -> list:
    kinds = []
    if variant.sampler == "cvae" or variant.gain_mode == "joint":
        kinds.append("cvae")
    if variant.sampler == "imitation":
        kinds.append("imitation")
    if variant.gain_mode == "learned_mlp":
        kinds.append("gain_mlp")
    if variant.gain_mode == "learned_cnn":
        kinds.append("gain_cnn")
    return kinds


def load_bundles(config: BenchmarkConfig) -> dict:
    """One ModelBundle per variant index; missing artifacts fail as a batch."""
    needed = {}
    for i, v in enumerate(config.variants):
        needed[i] = _required_model_kinds(v)
    missing = []
    for kind in sorted({k for kinds in needed.values() for k in kinds}):
        path = config.model_paths.get(kind)
        if path is None:
            missing.append(f"{kind} (no path configured)")
        elif not Path(path).exists():
            missing.append(f"{kind} ({path})")
    if missing:
        raise ConfigError("missing model files: " + ", ".join(missing))

    loaded = {}
    for kind in {k for kinds in needed.values() for k in kinds}:
        expected = None if kind == "cvae" else kind
        params = models.load_model(config.model_paths[kind], expected)
        if kind == "cvae" and not isinstance(params, CvaeParams):
            raise ConfigError(f"expected a cvae model at {config.model_paths[kind]}")
        loaded[kind] = params

    bundles = {}
    for i, kinds in needed.items():
        if not kinds:
            bundles[i] = None
            continue
        sampler = None
        gain_net = None
        for kind in kinds:
            params = loaded[kind]
            if isinstance(params, (CvaeParams, ImitationParams)):
                sampler = params
            else:
                gain_net = params
        bundles[i] = ModelBundle(sampler=sampler, gain_net=gain_net)
    return bundles


def resolve_world(spec):
    """A WorldGenParams generates; anything else is a world-file path."""
    if isinstance(spec, WorldGenParams):
        return f"{spec.world_kind}{spec.seed}", generate_world(spec)
    path = Path(spec)
    return path.stem, load_world(path)


def episode_start(world: OccupancyGrid, robot: RobotModel, rng=None, xy=None):
    """A start pose the robot can actually plan from.

    Restricted to the traversable-viewer cells so the first planning step
    always has reachable candidates.  Deterministic without an rng (nearest
    such cell to xy or to the world center).
    """
    ok = traversable_viewers(world, robot).astype(bool)
    rows, cols = np.nonzero(ok)
    if rows.size == 0:
        raise ConfigError("world has no traversable free cell to start from")
    xs = world.origin[0] + (cols + 0.5) * world.resolution
    ys = world.origin[1] + (rows + 0.5) * world.resolution
    if rng is not None:
        i = int(rng.integers(rows.size))
        return float(xs[i]), float(ys[i])
    if xy is None:
        xy = (
            world.origin[0] + world.width_cells * world.resolution / 2,
            world.origin[1] + world.height_cells * world.resolution / 2,
        )
    d2 = (xs - xy[0]) ** 2 + (ys - xy[1]) ** 2
    i = int(np.argmin(d2))
    return float(xs[i]), float(ys[i])


def _target_label(target: float) -> str:
    return f"{100.0 * target:g}"


def benchmark_columns(coverage_targets) -> list:
    cols = ["sampler", "gain_mode", "n_samples", "episodes", "completed",
            "budget_exhausted", "failed"]
    for t in coverage_targets:
        lbl = _target_label(t)
        cols += [f"t{lbl}_mean_s", f"t{lbl}_std_s", f"t{lbl}_reached"]
    cols += [
        "dist_mean_m",
        "dist_std_m",
        "steps_mean",
        "true_utility_mean",
        "step_compute_mean_s",
        "episode_compute_mean_s",
        "objective_mean",
    ]
    return cols


_BENCH_CTX = None


def _bench_episode(task):
    vi, wi, si, rep, seed = task
    ctx = _BENCH_CTX
    start = ctx["starts"][wi][si]
    ep = run_episode(
        ctx["worlds"][wi][1],
        Pose(start[0], start[1], 0.0),
        ctx["configs"][vi],
        ctx["bundles"][vi],
        seed,
        robot=ctx["robot"],
        sensor=ctx["sensor"],
        budget=ctx["budget"],
        completion_threshold=ctx["threshold"],
        observable=ctx["masks"][wi],
        world_label=ctx["worlds"][wi][0],
    )
    return task, ep


def benchmark(
    config: BenchmarkConfig,
    robot: RobotModel | None = None,
    sensor: SensorModel | None = None,
) -> BenchmarkResults:
    """Run every (variant, world, start, repeat) episode and aggregate.

    Episode seeds depend on (config seed, world, start, repeat) but not on
    the variant, so every variant faces the same start poses with the same
    random streams.  Aggregation is order-independent; workers > 1 farms
    episodes out to forked processes (timing columns then overlap-polluted,
    keep workers=1 for compute measurements).
    """
    global _BENCH_CTX
    if not config.variants:
        raise ConfigError("benchmark needs at least one variant")
    if not config.worlds:
        raise ConfigError("benchmark needs at least one world")
    robot = robot or RobotModel()
    sensor = sensor or SensorModel()

    configs = [
        PlannerConfig(n_samples=v.n_samples, gain_mode=v.gain_mode, sampler=v.sampler)
        for v in config.variants
    ]
    bundles = load_bundles(config)
    for i, cfg in enumerate(configs):
        validate_models(cfg, bundles[i])

    worlds = [resolve_world(spec) for spec in config.worlds]
    masks = [observable_cells(w, sensor, robot) for _, w in worlds]
    starts = []
    for wi, (_, world) in enumerate(worlds):
        per_world = [episode_start(world, robot)]
        for k in range(1, config.starts_per_world):
            rng = np.random.default_rng([config.seed, wi, k])
            per_world.append(episode_start(world, robot, rng=rng))
        starts.append(per_world)

    tasks = []
    for vi in range(len(config.variants)):
        for wi in range(len(worlds)):
            for si in range(len(starts[wi])):
                for rep in range(config.repeats):
                    seed = int(
                        np.random.SeedSequence([config.seed, wi, si, rep]).generate_state(1)[0]
                    )
                    tasks.append((vi, wi, si, rep, seed))

    _BENCH_CTX = {
        "worlds": worlds,
        "masks": masks,
        "starts": starts,
        "configs": configs,
        "bundles": bundles,
        "robot": robot,
        "sensor": sensor,
        "budget": config.budget,
        "threshold": config.completion_threshold,
    }
    try:
        if config.workers > 1:
            ctx = multiprocessing.get_context("fork")
            with concurrent.futures.ProcessPoolExecutor(
                max_workers=config.workers, mp_context=ctx
            ) as ex:
                outcomes = list(ex.map(_bench_episode, tasks))
        else:
            outcomes = [_bench_episode(t) for t in tasks]
    finally:
        _BENCH_CTX = None

    episodes = [
        {
            "variant": config.variants[vi],
            "world": worlds[wi][0],
            "start_index": si,
            "repeat": rep,
            "log": ep,
        }
        for (vi, wi, si, rep, _), ep in outcomes
    ]

    columns = benchmark_columns(config.coverage_targets)
    rows = []
    for vi, v in enumerate(config.variants):
        eps = [ep for (tvi, *_), ep in outcomes if tvi == vi]
        row = {
            "sampler": v.sampler,
            "gain_mode": v.gain_mode,
            "n_samples": v.n_samples,
            "episodes": len(eps),
            "completed": sum(e.terminal_status == "complete" for e in eps),
            "budget_exhausted": sum(e.terminal_status == "budget_exhausted" for e in eps),
            "failed": sum(e.terminal_status == "failed" for e in eps),
        }
        for t in config.coverage_targets:
            lbl = _target_label(t)
            times = [e.time_to_coverage(t) for e in eps]
            times = [t_ for t_ in times if t_ is not None]
            row[f"t{lbl}_mean_s"] = float(np.mean(times)) if times else math.nan
            row[f"t{lbl}_std_s"] = float(np.std(times)) if times else math.nan
            row[f"t{lbl}_reached"] = len(times)
        dists = [e.distance_m[-1] if e.distance_m else 0.0 for e in eps]
        row["dist_mean_m"] = float(np.mean(dists))
        row["dist_std_m"] = float(np.std(dists))
        row["steps_mean"] = float(np.mean([e.steps for e in eps]))
        utilities = [u for e in eps for u in e.true_utility if u is not None]
        row["true_utility_mean"] = float(np.mean(utilities)) if utilities else math.nan
        step_times = [c for e in eps for c in e.compute_s]
        row["step_compute_mean_s"] = float(np.mean(step_times)) if step_times else math.nan
        row["episode_compute_mean_s"] = float(np.mean([e.total_compute_s() for e in eps]))
        row["objective_mean"] = float(np.mean([e.objective(config.gamma) for e in eps]))
        rows.append(row)
    return BenchmarkResults(columns=columns, rows=rows, episodes=episodes)


def write_benchmark_csv(path, results: BenchmarkResults) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=results.columns)
        writer.writeheader()
        for row in results.rows:
            writer.writerow(row)


def read_benchmark_csv(path) -> list:
    def convert(value):
        for cast in (int, float):
            try:
                return cast(value)
            except ValueError:
                continue
        return value

    with open(path, newline="") as fh:
        return [{k: convert(v) for k, v in row.items()} for row in csv.DictReader(fh)]


# ---------------------------------------------------------------------------
# Pareto report

PARETO_COLUMNS = [
    "variant",
    "sampler",
    "gain_mode",
    "n_samples",
    "coverage_target",
    "time_to_target_s",
    "step_compute_mean_s",
    "episode_compute_mean_s",
    "pareto",
    "performance_trend",
    "compute_trend",
]


def _trend(values, decreasing_word: str, increasing_word: str) -> str:
    if len(values) == 1:
        return "single"
    diffs = [b - a for a, b in zip(values, values[1:])]
    if all(d == 0 for d in diffs):
        return "flat"
    if all(d <= 0 for d in diffs):
        return decreasing_word
    if all(d >= 0 for d in diffs):
        return increasing_word
    return "mixed"


def pareto_report(rows, target: float = 0.90) -> list:
    """Performance-versus-compute points with dominance and trend flags.

    Performance is the mean time to reach the coverage target; compute is
    reported both per step and per episode (dominance uses the per-episode
    total).  Variants that never reached the target are dropped with a
    warning.
    """
    key = f"t{_target_label(target)}_mean_s"
    points = []
    for row in rows:
        if key not in row:
            raise ConfigError(f"benchmark results lack column {key!r}")
        perf = row[key]
        reached = row.get(f"t{_target_label(target)}_reached", 0)
        if not isinstance(perf, (int, float)) or math.isnan(perf) or reached == 0:
            log.warning(
                "variant %s-%s (N=%s) never reached %g coverage; excluded from Pareto report",
                row["sampler"], row["gain_mode"], row["n_samples"], target,
            )
            continue
        points.append(
            {
                "variant": f"{row['sampler']}-{row['gain_mode']}",
                "sampler": row["sampler"],
                "gain_mode": row["gain_mode"],
                "n_samples": row["n_samples"],
                "coverage_target": target,
                "time_to_target_s": perf,
                "step_compute_mean_s": row["step_compute_mean_s"],
                "episode_compute_mean_s": row["episode_compute_mean_s"],
            }
        )

    for p in points:
        dominated = any(
            q is not p
            and q["time_to_target_s"] <= p["time_to_target_s"]
            and q["episode_compute_mean_s"] <= p["episode_compute_mean_s"]
            and (
                q["time_to_target_s"] < p["time_to_target_s"]
                or q["episode_compute_mean_s"] < p["episode_compute_mean_s"]
            )
            for q in points
        )
        p["pareto"] = 0 if dominated else 1

    by_variant = {}
    for p in points:
        by_variant.setdefault(p["variant"], []).append(p)
    for group in by_variant.values():
        group.sort(key=lambda p: p["n_samples"])
        perf_trend = _trend([p["time_to_target_s"] for p in group], "improving", "worsening")
        compute_trend = _trend(
            [p["episode_compute_mean_s"] for p in group], "decreasing", "increasing"
        )
        for p in group:
            p["performance_trend"] = perf_trend
            p["compute_trend"] = compute_trend
    points.sort(key=lambda p: (p["variant"], p["n_samples"]))
    return points


def write_pareto_csv(path, points) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=PARETO_COLUMNS)
        writer.writeheader()
        for p in points:
            writer.writerow(p)


# ---------------------------------------------------------------------------
# one-shot utility probe (chosen-action quality on stored local maps)


def utility_probe(
    records,
    config: PlannerConfig,
    bundle: ModelBundle | None = None,
    *,
    robot: RobotModel | None = None,
    sensor: SensorModel | None = None,
    seed: int = 0,
    resolution: float = 0.2,
) -> float:
    """Mean ray-cast-oracle utility of the variant's chosen action per record.

    Each stored local map becomes a one-shot decision: draw candidates with
    the configured sampler, pick the utility argmax under the configured
    gain mode, then re-score that single choice with the exact gain.
    """
    robot = robot or RobotModel()
    sensor = sensor or SensorModel()
    validate_models(config, bundle)
    rng = np.random.default_rng(seed)
    utilities = []
    for rec in records:
        state = dataset.replay_state(rec, resolution)
        cands = planning.generate_candidates(state, config, robot, sensor, bundle, rng)
        best = cands[planning.select_nbv(cands)]
        lm = extract_local_map(state, sensor)
        utilities.append(compute_gain(lm, best.pose, sensor) / best.cost)
    if not utilities:
        raise ConfigError("utility probe needs at least one record")
    return float(np.mean(utilities))


# ---------------------------------------------------------------------------
# configuration files


def _load_toml(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    with open(p, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"bad config file {p}: {exc}") from exc


def _section(cfg: dict, dotted: str) -> dict:
    out = cfg
    for part in dotted.split("."):
        out = out.get(part, {})
        if not isinstance(out, dict):
            raise ConfigError(f"config section [{dotted}] must be a table")
    return out


def _merge_options(defaults: dict, file_vals: dict, args, section: str) -> dict:
    """defaults < config file < explicitly passed flags."""
    for key in file_vals:
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r} in [{section}]")
    merged = dict(defaults)
    merged.update(file_vals)
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return merged


def _parse_seeds(value) -> list:
    """Accepts [1, 2, 3], "1,2,3", or "lo:hi" (half-open)."""
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    text = str(value)
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi)))
    return [int(v) for v in text.split(",") if v.strip()]


def _parse_pair(text: str) -> tuple:
    parts = [float(v) for v in str(text).split(",")]
    if len(parts) != 2:
        raise ConfigError(f"expected two comma-separated numbers, got {text!r}")
    return tuple(parts)


def build_benchmark_config(cfg: dict, args) -> BenchmarkConfig:
    bench = _section(cfg, "benchmark")
    known = {
        "repeats", "starts_per_world", "budget", "coverage_targets", "gamma",
        "completion_threshold", "workers", "seed", "worlds", "models", "variants",
    }
    for key in bench:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r} in [benchmark]")

    worlds_cfg = bench.get("worlds", {})
    if "files" in worlds_cfg:
        worlds = [str(p) for p in worlds_cfg["files"]]
    else:
        try:
            seeds = _parse_seeds(worlds_cfg["seeds"])
        except KeyError:
            raise ConfigError("[benchmark.worlds] needs either 'files' or 'seeds'") from None
        worlds = [
            WorldGenParams(
                seed=s,
                world_kind=worlds_cfg.get("kind", "maze"),
                side_length_m=float(worlds_cfg.get("side_m", 20.0)),
                resolution=float(worlds_cfg.get("resolution", 0.2)),
                corridor_width_m=float(worlds_cfg.get("corridor_m", 1.0)),
                obstacle_count=int(worlds_cfg.get("obstacles", 10)),
            )
            for s in seeds
        ]

    variants = []
    for v in bench.get("variants", []):
        ns = v.get("n_samples", 10)
        ns_list = ns if isinstance(ns, list) else [ns]
        for n in ns_list:
            variants.append(
                Variant(
                    sampler=v.get("sampler", "uniform"),
                    gain_mode=v.get("gain_mode", "raycast"),
                    n_samples=int(n),
                )
            )

    def pick(name, default, cast):
        flag = getattr(args, name, None)
        if flag is not None:
            return cast(flag)
        return cast(bench.get(name, default))

    targets = bench.get("coverage_targets", [0.90, 0.99])
    return BenchmarkConfig(
        variants=variants,
        worlds=worlds,
        model_paths={k: str(v) for k, v in bench.get("models", {}).items()},
        repeats=pick("repeats", 3, int),
        starts_per_world=pick("starts_per_world", 1, int),
        budget=pick("budget", 500, int),
        coverage_targets=tuple(float(t) for t in targets),
        gamma=pick("gamma", 1.0, float),
        completion_threshold=pick("completion_threshold", 0.99, float),
        workers=pick("workers", 1, int),
        seed=pick("seed", 0, int),
    )


# ---------------------------------------------------------------------------
# CLI commands


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def cmd_worlds_generate(args) -> int:
    params = WorldGenParams(
        seed=args.seed if args.seed is not None else 0,
        world_kind=args.kind,
        side_length_m=args.side_m,
        resolution=args.resolution,
        corridor_width_m=args.corridor_m,
        obstacle_count=args.obstacles,
    )
    world = generate_world(params)
    save_world(world, args.out)
    _print_json(
        {
            "path": str(args.out),
            "kind": params.world_kind,
            "seed": params.seed,
            "side_cells": world.width_cells,
            "free_cells": int(np.count_nonzero(world.cells == FREE)),
        }
    )
    return 0


_COLLECT_DEFAULTS = {
    "world_seeds": "0:10",
    "samples": 25,
    "repetitions": 20,
    "max_steps": 400,
    "yaw_bins": 16,
    "seed": 0,
    "side_m": 10.0,
    "resolution": 0.2,
    "corridor_m": 1.0,
    "negatives": 0.0,
}


def cmd_dataset_collect(args) -> int:
    file_cfg = _section(_load_toml(args.config), "dataset.collect") if args.config else {}
    opt = _merge_options(_COLLECT_DEFAULTS, file_cfg, args, "dataset.collect")
    teacher_cfg = dataset.TeacherConfig(
        n_samples=int(opt["samples"]),
        n_repetitions=int(opt["repetitions"]),
        max_steps=int(opt["max_steps"]),
        yaw_bins=int(opt["yaw_bins"]),
        seed=int(opt["seed"]),
    )
    params = WorldGenParams(
        side_length_m=float(opt["side_m"]),
        resolution=float(opt["resolution"]),
        corridor_width_m=float(opt["corridor_m"]),
    )
    ds = dataset.collect_dataset(_parse_seeds(opt["world_seeds"]), teacher_cfg, params)
    if float(opt["negatives"]) > 0:
        dataset.add_negatives(
            ds.records, float(opt["negatives"]), np.random.default_rng([int(opt["seed"]), 1])
        )
    dataset.save_dataset(args.out, ds)
    _print_json(
        {
            "path": str(args.out),
            "records": ds.meta.record_count,
            "worlds": ds.meta.world_count,
            "targets": sum(len(r.targets) for r in ds.records),
        }
    )
    return 0


def cmd_dataset_split(args) -> int:
    ds = dataset.load_dataset(args.data)
    fractions = _parse_pair(args.fractions)
    train, val = dataset.split(ds, fractions, seed=args.seed if args.seed is not None else 0)
    dataset.save_dataset(args.train_out, train)
    dataset.save_dataset(args.val_out, val)
    _print_json(
        {
            "train_path": str(args.train_out),
            "train_records": train.meta.record_count,
            "train_worlds": train.meta.world_count,
            "val_path": str(args.val_out),
            "val_records": val.meta.record_count,
            "val_worlds": val.meta.world_count,
        }
    )
    return 0


def cmd_dataset_stats(args) -> int:
    ds = dataset.load_dataset(args.data)
    gains = [t.gain for r in ds.records for t in r.targets if t.gain is not None]
    negatives = sum(sum(r.is_negative) for r in ds.records)
    targets = sum(len(r.targets) for r in ds.records)
    _print_json(
        {
            "path": str(args.data),
            "records": ds.meta.record_count,
            "worlds": ds.meta.world_count,
            "world_kind": ds.meta.world_kind,
            "resolution": ds.meta.resolution,
            "seed": ds.meta.seed,
            "targets": targets,
            "positives": targets - negatives,
            "negatives": negatives,
            "gain_mean": float(np.mean(gains)) if gains else math.nan,
        }
    )
    return 0


_TRAIN_DEFAULTS = {
    "epochs": 40,
    "batch_size": 128,
    "lr": 1e-3,
    "latent_dim": 3,
    "hidden": 512,
    "depth": 4,
    "dropout": None,
    "lambda_reg": 1.0,
    "seed": 0,
}


def _train_config(args, section: str, joint_gain: bool = False) -> TrainConfig:
    file_cfg = _section(_load_toml(args.config), section) if args.config else {}
    opt = _merge_options(_TRAIN_DEFAULTS, file_cfg, args, section)
    return TrainConfig(
        epochs=int(opt["epochs"]),
        batch_size=int(opt["batch_size"]),
        lr=float(opt["lr"]),
        latent_dim=int(opt["latent_dim"]),
        joint_gain=joint_gain,
        lambda_reg=float(opt["lambda_reg"]),
        hidden=int(opt["hidden"]),
        depth=int(opt["depth"]),
        dropout=None if opt["dropout"] is None else float(opt["dropout"]),
        seed=int(opt["seed"]),
    )


def _finish_training(args, params, history) -> int:
    models.save_model(args.out, params)
    if args.history:
        with open(args.history, "w") as fh:
            json.dump(history, fh)
    _print_json(
        {
            "out": str(args.out),
            "kind": params.kind,
            "epochs": len(history),
            "best_val_loss": min(h["val_loss"] for h in history),
            "final_train_loss": history[-1]["train_loss"],
        }
    )
    return 0


def cmd_train_cvae(args) -> int:
    cfg = _train_config(args, "train.cvae", joint_gain=args.joint)
    train = dataset.cvae_samples(dataset.load_dataset(args.train))
    val = dataset.cvae_samples(dataset.load_dataset(args.val))
    params, history = models.train_cvae(train, val, cfg)
    return _finish_training(args, params, history)


def cmd_train_gain(args) -> int:
    cfg = _train_config(args, "train.gain")
    train = dataset.gain_samples(dataset.load_dataset(args.train))
    val = dataset.gain_samples(dataset.load_dataset(args.val))
    params, history = models.train_gain(train, val, cfg, encoder_kind=args.encoder)
    return _finish_training(args, params, history)


def cmd_train_imitation(args) -> int:
    cfg = _train_config(args, "train.imitation")
    train = dataset.imitation_samples(dataset.load_dataset(args.train))
    val = dataset.imitation_samples(dataset.load_dataset(args.val))
    params, history = models.train_imitation(train, val, cfg)
    return _finish_training(args, params, history)


def _bundle_from_args(args) -> ModelBundle | None:
    if args.cvae and args.imitation:
        raise ConfigError("give either --cvae or --imitation, not both")
    sampler = None
    gain_net = None
    if args.cvae:
        sampler = models.load_model(args.cvae)
        if not isinstance(sampler, CvaeParams):
            raise ConfigError(f"expected a cvae model at {args.cvae}")
    if args.imitation:
        sampler = models.load_model(args.imitation, "imitation")
    if args.gain_net:
        gain_net = models.load_model(args.gain_net)
        if not isinstance(gain_net, GainNetParams):
            raise ConfigError(f"expected a gain model at {args.gain_net}")
    if sampler is None and gain_net is None:
        return None
    return ModelBundle(sampler=sampler, gain_net=gain_net)


_EPISODE_DEFAULTS = {
    "sampler": "uniform",
    "gain_mode": "raycast",
    "n_samples": 10,
    "yaw_bins": 16,
    "budget": 500,
    "completion_threshold": 0.99,
    "seed": 0,
}


def cmd_eval_episode(args) -> int:
    file_cfg = _section(_load_toml(args.config), "eval.episode") if args.config else {}
    opt = _merge_options(_EPISODE_DEFAULTS, file_cfg, args, "eval.episode")
    world = load_world(args.world)
    config = PlannerConfig(
        n_samples=int(opt["n_samples"]),
        gain_mode=opt["gain_mode"],
        sampler=opt["sampler"],
        yaw_bins=int(opt["yaw_bins"]),
    )
    bundle = _bundle_from_args(args)
    robot = RobotModel()
    xy = _parse_pair(args.start) if args.start else None
    x, y = episode_start(world, robot, xy=xy)
    ep = run_episode(
        world,
        Pose(x, y, 0.0),
        config,
        bundle,
        int(opt["seed"]),
        robot=robot,
        budget=int(opt["budget"]),
        completion_threshold=float(opt["completion_threshold"]),
        world_label=Path(args.world).stem,
    )
    if args.out:
        write_episode_jsonl(args.out, ep)
        _print_json(
            {
                "out": str(args.out),
                "terminal_status": ep.terminal_status,
                "steps": ep.steps,
                "sim_time_s": ep.sim_time_s[-1] if ep.sim_time_s else 0.0,
                "coverage": ep.coverage[-1] if ep.coverage else ep.initial_coverage,
            }
        )
    else:
        write_episode_jsonl(sys.stdout, ep)
    return 0


def cmd_eval_benchmark(args) -> int:
    config = build_benchmark_config(_load_toml(args.config), args)
    results = benchmark(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "benchmark.csv"
    write_benchmark_csv(csv_path, results)
    ep_dir = out_dir / "episodes"
    ep_dir.mkdir(exist_ok=True)
    for entry in results.episodes:
        v = entry["variant"]
        name = (
            f"{v.sampler}-{v.gain_mode}-n{v.n_samples}"
            f"-{entry['world']}-s{entry['start_index']}-r{entry['repeat']}.jsonl"
        )
        write_episode_jsonl(ep_dir / name, entry["log"], gamma=config.gamma)
    _print_json(
        {
            "csv": str(csv_path),
            "episode_dir": str(ep_dir),
            "variants": len(results.rows),
            "episodes": len(results.episodes),
        }
    )
    return 0


def cmd_eval_pareto(args) -> int:
    rows = read_benchmark_csv(args.results)
    points = pareto_report(rows, target=args.target)
    write_pareto_csv(args.out, points)
    _print_json(
        {
            "out": str(args.out),
            "points": len(points),
            "pareto_optimal": sum(p["pareto"] for p in points),
        }
    )
    return 0


def cmd_inspect_model(args) -> int:
    kind, groups, meta = nn.load_weights(args.path)
    payload = {"path": str(args.path), "kind": kind, "metadata": meta, "groups": {}}
    for name, (specs, params) in groups.items():
        payload["groups"][name] = {
            "layers": [asdict(s) for s in specs],
            "parameters": int(sum(arr.size for layer in params for arr in layer.values())),
        }
    _print_json(payload)
    return 0


def cmd_inspect_dataset(args) -> int:
    meta = dataset.read_meta(args.path)
    _print_json(
        {
            "path": str(args.path),
            "records": meta.record_count,
            "worlds": meta.world_count,
            "world_kind": meta.world_kind,
            "resolution": meta.resolution,
            "seed": meta.seed,
            "version": meta.version,
        }
    )
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_seed(p):
    p.add_argument("--seed", type=int, default=None, help="master random seed (default 0)")


def _add_train_flags(p):
    p.add_argument("--train", required=True, help="training dataset file")
    p.add_argument("--val", required=True, help="validation dataset file")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--config", default=None, help="TOML config file")
    p.add_argument("--history", default=None, help="write per-epoch losses as JSON")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    _add_seed(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="explan",
        description="Exploration planning experiments: worlds, datasets, training, evaluation.",
    )
    groups = parser.add_subparsers(dest="group", metavar="group")

    worlds = groups.add_parser("worlds", help="world generation").add_subparsers(dest="cmd")
    gen = worlds.add_parser("generate", help="generate a world file")
    gen.add_argument("--kind", choices=("maze", "cluttered"), default="maze")
    gen.add_argument("--side-m", dest="side_m", type=float, default=20.0)
    gen.add_argument("--resolution", type=float, default=0.2)
    gen.add_argument("--corridor-m", dest="corridor_m", type=float, default=1.0)
    gen.add_argument("--obstacles", type=int, default=10)
    gen.add_argument("--out", required=True)
    _add_seed(gen)
    gen.set_defaults(func=cmd_worlds_generate)

    data = groups.add_parser("dataset", help="teacher data").add_subparsers(dest="cmd")
    collect = data.add_parser("collect", help="run teacher episodes over maze worlds")
    collect.add_argument("--out", required=True)
    collect.add_argument("--config", default=None, help="TOML config file")
    collect.add_argument("--world-seeds", dest="world_seeds", default=None,
                         help="'lo:hi' range or comma list")
    collect.add_argument("--samples", type=int, default=None)
    collect.add_argument("--repetitions", type=int, default=None)
    collect.add_argument("--max-steps", dest="max_steps", type=int, default=None)
    collect.add_argument("--yaw-bins", dest="yaw_bins", type=int, default=None)
    collect.add_argument("--side-m", dest="side_m", type=float, default=None)
    collect.add_argument("--resolution", type=float, default=None)
    collect.add_argument("--corridor-m", dest="corridor_m", type=float, default=None)
    collect.add_argument("--negatives", type=float, default=None,
                         help="negative-to-positive ratio (0 disables)")
    _add_seed(collect)
    collect.set_defaults(func=cmd_dataset_collect)

    dsplit = data.add_parser("split", help="world-level train/val split")
    dsplit.add_argument("--data", required=True)
    dsplit.add_argument("--train-out", dest="train_out", required=True)
    dsplit.add_argument("--val-out", dest="val_out", required=True)
    dsplit.add_argument("--fractions", default="0.8,0.2")
    _add_seed(dsplit)
    dsplit.set_defaults(func=cmd_dataset_split)

    stats = data.add_parser("stats", help="dataset summary as JSON")
    stats.add_argument("--data", required=True)
    stats.set_defaults(func=cmd_dataset_stats)

    train = groups.add_parser("train", help="model training").add_subparsers(dest="cmd")
    tcvae = train.add_parser("cvae", help="train the viewpoint sampler")
    _add_train_flags(tcvae)
    tcvae.add_argument("--latent-dim", dest="latent_dim", type=int, default=None)
    tcvae.add_argument("--lambda-reg", dest="lambda_reg", type=float, default=None)
    tcvae.add_argument("--joint", action="store_true",
                       help="predict gain jointly with the pose")
    tcvae.set_defaults(func=cmd_train_cvae)
    tgain = train.add_parser("gain", help="train a gain estimator")
    _add_train_flags(tgain)
    tgain.add_argument("--encoder", choices=("cnn", "pooling"), default="cnn")
    tgain.set_defaults(func=cmd_train_gain)
    timit = train.add_parser("imitation", help="train the one-pose baseline")
    _add_train_flags(timit)
    timit.set_defaults(func=cmd_train_imitation)

    ev = groups.add_parser("eval", help="episodes, benchmarks, Pareto reports")
    evsub = ev.add_subparsers(dest="cmd")
    episode = evsub.add_parser("episode", help="run one exploration episode")
    episode.add_argument("--world", required=True, help="world file")
    episode.add_argument("--config", default=None, help="TOML config file")
    episode.add_argument("--sampler", choices=("uniform", "cvae", "imitation"), default=None)
    episode.add_argument("--gain-mode", dest="gain_mode", default=None,
                         choices=("raycast", "learned_mlp", "learned_cnn", "joint"))
    episode.add_argument("-n", "--n-samples", dest="n_samples", type=int, default=None)
    episode.add_argument("--yaw-bins", dest="yaw_bins", type=int, default=None)
    episode.add_argument("--budget", type=int, default=None)
    episode.add_argument("--completion-threshold", dest="completion_threshold",
                         type=float, default=None)
    episode.add_argument("--start", default=None, help="'x,y' start hint in meters")
    episode.add_argument("--cvae", default=None, help="cvae model file")
    episode.add_argument("--gain-net", dest="gain_net", default=None, help="gain model file")
    episode.add_argument("--imitation", default=None, help="imitation model file")
    episode.add_argument("--out", default=None, help="episode log path (default stdout)")
    _add_seed(episode)
    episode.set_defaults(func=cmd_eval_episode)

    bench = evsub.add_parser("benchmark", help="sweep variants over worlds")
    bench.add_argument("--config", required=True, help="TOML config file")
    bench.add_argument("--out-dir", dest="out_dir", default="benchmark_out")
    bench.add_argument("--repeats", type=int, default=None)
    bench.add_argument("--starts-per-world", dest="starts_per_world", type=int, default=None)
    bench.add_argument("--budget", type=int, default=None)
    bench.add_argument("--gamma", type=float, default=None)
    bench.add_argument("--workers", type=int, default=None)
    _add_seed(bench)
    bench.set_defaults(func=cmd_eval_benchmark)

    pareto = evsub.add_parser("pareto", help="performance vs compute report")
    pareto.add_argument("--results", required=True, help="benchmark CSV")
    pareto.add_argument("--out", required=True, help="output CSV")
    pareto.add_argument("--target", type=float, default=0.90)
    pareto.set_defaults(func=cmd_eval_pareto)

    inspect = groups.add_parser("inspect", help="artifact metadata").add_subparsers(dest="cmd")
    imodel = inspect.add_parser("model", help="weight-file summary as JSON")
    imodel.add_argument("--path", required=True)
    imodel.set_defaults(func=cmd_inspect_model)
    idata = inspect.add_parser("dataset", help="dataset header as JSON")
    idata.add_argument("--path", required=True)
    idata.set_defaults(func=cmd_inspect_dataset)

    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage/help
        return int(exc.code or 0)
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
