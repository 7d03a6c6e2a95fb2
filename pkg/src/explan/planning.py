"""Sampling-based local NBV planning and the frontier-based global fallback.

A planning step samples candidate sensing poses in the robot's local map,
scores each with an information gain (ray-cast count or a learned estimate)
and a motion-time cost, and executes the best gain/cost ratio.  When the
local map holds no more reachable gain, a frontier search over the full
belief map relocates the robot to the nearest unexplored site.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import FREE, OCCUPIED, UNKNOWN, OccupancyGrid
from .sim import (
    LocalMap,
    Pose,
    RobotModel,
    SensorModel,
    SimState,
    extract_local_map,
    path_length_m,
    traversal_time,
    wrap_angle,
)

_TAU = 2.0 * math.pi


class InfeasiblePoseError(ValueError):
    """Raised when a gain or orientation query lands outside free space."""


class NoCandidateError(RuntimeError):
    """Raised when selection is attempted over an empty candidate list."""


class SamplingExhaustedError(RuntimeError):
    """Raised when no feasible sample exists in the local map."""


class ExplorationComplete(Exception):
    """Signal: no local gain and no reachable frontier remain."""


@dataclass
class Candidate:
    pose: Pose  # world frame
    gain: float
    cost: float
    path: list  # (row, col) cells of the grid the candidate was planned in
    source: str = "uniform"


@dataclass
class PlannerConfig:
    n_samples: int = 10
    gain_mode: str = "raycast"  # raycast | learned_mlp | learned_cnn | joint
    sampler: str = "uniform"  # uniform | cvae | imitation
    yaw_bins: int = 16
    max_resample_attempts: int | None = None  # default 10 * n_samples

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.yaw_bins < 4:
            raise ValueError("yaw_bins must be >= 4")
        if self.gain_mode not in ("raycast", "learned_mlp", "learned_cnn", "joint"):
            raise ValueError(f"unknown gain_mode: {self.gain_mode!r}")
        if self.sampler not in ("uniform", "cvae", "imitation"):
            raise ValueError(f"unknown sampler: {self.sampler!r}")
        if self.max_resample_attempts is None:
            self.max_resample_attempts = 10 * self.n_samples

    def resolved_n_samples(self) -> int:
        # imitation predicts the executed pose directly
        return 1 if self.sampler == "imitation" else self.n_samples


@dataclass
class LocalMinimumMonitor:
    """Counts consecutive actions that observed nothing new."""

    threshold: int = 5
    consecutive_zero_gain_actions: int = 0

    def record_step(self, newly_observed: int) -> None:
        if newly_observed > 0:
            self.consecutive_zero_gain_actions = 0
        else:
            self.consecutive_zero_gain_actions += 1

    def tripped(self) -> bool:
        return self.consecutive_zero_gain_actions >= self.threshold


def inflate_occupancy(cells: np.ndarray, radius_cells: float) -> np.ndarray:
    """Blocked mask: occupied cells dilated by a disk, plus unknown cells.

    Unknown cells are untraversable but not dilated; dilating them would
    swallow the frontier cells the global planner must be able to reach.
    """
    occ = cells == OCCUPIED
    blocked = occ.copy()
    r = int(math.floor(radius_cells))
    r2 = radius_cells * radius_cells
    h, w = cells.shape
    for dr in range(-r, r + 1):
        for dc in range(-r, r + 1):
            if dr == 0 and dc == 0:
                continue
            if dr * dr + dc * dc > r2:
                continue
            src_r0, src_r1 = max(0, -dr), min(h, h - dr)
            src_c0, src_c1 = max(0, -dc), min(w, w - dc)
            blocked[src_r0 + dr : src_r1 + dr, src_c0 + dc : src_c1 + dc] |= occ[
                src_r0:src_r1, src_c0:src_c1
            ]
    blocked |= cells == UNKNOWN
    return blocked.astype(np.uint8)


def _local_pose_cells(local_map: LocalMap, x: float, y: float) -> tuple[float, float]:
    px = (x - local_map.origin[0]) / local_map.resolution
    py = (y - local_map.origin[1]) / local_map.resolution
    n = local_map.size
    if not (0.0 <= px < n and 0.0 <= py < n):
        raise InfeasiblePoseError("pose outside local map")
    return px, py


def compute_gain(local_map: LocalMap, pose: Pose, sensor: SensorModel) -> int:
    """Number of unknown cells visible from the pose.

    A cell counts when its center is within sensor range and field of view
    and the straight line to it crosses only free cells; an unknown cell is
    countable at first contact but hides everything behind it.
    """
    px, py = _local_pose_cells(local_map, pose.x, pose.y)
    r, c = int(py), int(px)
    if local_map.cells[r, c] != FREE:
        raise InfeasiblePoseError("pose cell is not free")
    return kernels.visible_unknown_count(
        local_map.cells,
        px,
        py,
        pose.yaw,
        sensor.fov / 2.0,
        sensor.range_m / local_map.resolution,
    )


def orientation_gains(
    local_map: LocalMap, position: tuple[float, float], sensor: SensorModel, yaw_bins: int
) -> np.ndarray:
    """Gain of every yaw bin at a position; bin k is yaw 2*pi*k/yaw_bins."""
    px, py = _local_pose_cells(local_map, position[0], position[1])
    r, c = int(py), int(px)
    if local_map.cells[r, c] != FREE:
        raise InfeasiblePoseError("position cell is not free")
    return kernels.visibility_bin_gains(
        local_map.cells,
        px,
        py,
        sensor.range_m / local_map.resolution,
        sensor.fov / 2.0,
        int(yaw_bins),
    )


def bin_yaw(k: int, yaw_bins: int) -> float:
    return wrap_angle(_TAU * k / yaw_bins)


def optimize_orientation(
    local_map: LocalMap, position: tuple[float, float], sensor: SensorModel, yaw_bins: int = 16
) -> tuple[float, int]:
    """Best sensing yaw at a position over uniformly spaced bins.

    Ties break toward the smallest bin index; the returned gain equals
    compute_gain at the returned yaw exactly.
    """
    gains = orientation_gains(local_map, position, sensor, yaw_bins)
    k = int(np.argmax(gains))
    return bin_yaw(k, yaw_bins), int(gains[k])


_SQRT2 = math.sqrt(2.0)
_NEIGH8 = (
    (-1, -1, _SQRT2),
    (-1, 0, 1.0),
    (-1, 1, _SQRT2),
    (0, -1, 1.0),
    (0, 1, 1.0),
    (1, -1, _SQRT2),
    (1, 0, 1.0),
    (1, 1, _SQRT2),
)


def _astar(blocked: np.ndarray, start: tuple[int, int], goal: tuple[int, int]):
    """8-connected A* with octile heuristic over an unblocked mask.

    The start cell is always expandable (a robot standing inside the
    inflation margin may plan its way out).  Returns the cell path or None.
    """
    h, w = blocked.shape
    if blocked[goal]:
        return None
    if start == goal:
        return [start]

    def heur(r, c):
        dr = abs(r - goal[0])
        dc = abs(c - goal[1])
        return max(dr, dc) + (_SQRT2 - 1.0) * min(dr, dc)

    g = {start: 0.0}
    parent = {start: None}
    counter = 0
    frontier = [(heur(*start), counter, start)]
    closed = set()
    while frontier:
        _, _, cur = heapq.heappop(frontier)
        if cur == goal:
            path = []
            node = cur
            while node is not None:
                path.append(node)
                node = parent[node]
            path.reverse()
            return path
        if cur in closed:
            continue
        closed.add(cur)
        r, c = cur
        base = g[cur]
        for dr, dc, step_cost in _NEIGH8:
            nr, nc = r + dr, c + dc
            if nr < 0 or nr >= h or nc < 0 or nc >= w or blocked[nr, nc]:
                continue
            nxt = (nr, nc)
            ng = base + step_cost
            if ng < g.get(nxt, math.inf):
                g[nxt] = ng
                parent[nxt] = cur
                counter += 1
                heapq.heappush(frontier, (ng + heur(nr, nc), counter, nxt))
    return None


def reachable_path(
    local_map: LocalMap, start: Pose, goal: Pose, robot: RobotModel
):
    """Shortest collision-free cell path between two poses in the local map.

    Occupied cells are inflated by the footprint radius and unknown cells
    are untraversable.  Returns the (row, col) path including both endpoint
    cells, or None when the goal is unreachable.
    """
    spx, spy = _local_pose_cells(local_map, start.x, start.y)
    gpx, gpy = _local_pose_cells(local_map, goal.x, goal.y)
    blocked = inflate_occupancy(
        local_map.cells, robot.footprint_radius / local_map.resolution
    )
    return _astar(
        blocked, (int(spy), int(spx)), (int(gpy), int(gpx))
    )


def sample_uniform(
    local_map: LocalMap,
    rng: np.random.Generator,
    robot: RobotModel,
    sensor: SensorModel,
    yaw_bins: int = 16,
) -> Pose:
    """Uniform pose sample: position uniform over the free local-map cells
    reachable from the robot, yaw set by orientation optimization."""
    cells, _, _ = _reachable_free_cells(local_map, robot)
    if cells.shape[0] == 0:
        raise SamplingExhaustedError("no reachable free cell in local map")
    r, c = cells[rng.integers(cells.shape[0])]
    x = local_map.origin[0] + (c + 0.5) * local_map.resolution
    y = local_map.origin[1] + (r + 0.5) * local_map.resolution
    yaw, _ = optimize_orientation(local_map, (x, y), sensor, yaw_bins)
    return Pose(x, y, yaw)


def _reachable_free_cells(local_map: LocalMap, robot: RobotModel):
    """Row-major (n, 2) array of free cells reachable from the window
    center, plus the flood distance and parent grids used to find them."""
    blocked = inflate_occupancy(
        local_map.cells, robot.footprint_radius / local_map.resolution
    )
    rr, rc = local_map.robot_cell
    dist, parent = kernels.dijkstra_grid(blocked, rr, rc)
    mask = np.isfinite(dist) & (local_map.cells == FREE)
    return np.argwhere(mask), dist, parent


def select_nbv(candidates) -> int:
    """Index of the best gain/cost ratio; ties go to the lowest index."""
    if not candidates:
        raise NoCandidateError("no candidates to select from")
    best = -1
    best_u = -math.inf
    for i, cand in enumerate(candidates):
        if cand.cost <= 0:
            raise ValueError("candidate cost must be positive")
        u = cand.gain / cand.cost
        if u > best_u:
            best_u = u
            best = i
    return best


def detect_local_minimum(
    local_map: LocalMap,
    robot_pose: Pose,
    monitor: LocalMinimumMonitor,
    robot: RobotModel,
    sensor: SensorModel,
) -> bool:
    """True when the local map is exhausted.

    Either the zero-observation counter reached its threshold, or no
    reachable free cell in the window has line of sight to any unknown cell
    within sensor range (equivalently: max orientation-optimized gain over
    all reachable cells is zero)."""
    if monitor.tripped():
        return True
    blocked = inflate_occupancy(
        local_map.cells, robot.footprint_radius / local_map.resolution
    )
    rr, rc = local_map.robot_cell
    dist, _ = kernels.dijkstra_grid(blocked, rr, rc)
    reachable = np.isfinite(dist).astype(np.uint8)
    return not kernels.has_visible_unknown(
        local_map.cells, reachable, sensor.range_m / local_map.resolution
    )


def frontier_cells(belief: np.ndarray) -> np.ndarray:
    """Boolean mask of frontier cells: free and 4-adjacent to unknown."""
    free = belief == FREE
    unk = belief == UNKNOWN
    adj = np.zeros_like(unk)
    adj[1:, :] |= unk[:-1, :]
    adj[:-1, :] |= unk[1:, :]
    adj[:, 1:] |= unk[:, :-1]
    adj[:, :-1] |= unk[:, 1:]
    return free & adj


def _cluster_mask(mask: np.ndarray):
    """8-connected components of a boolean mask as a list of (n, 2) arrays."""
    h, w = mask.shape
    seen = np.zeros((h, w), dtype=bool)
    clusters = []
    rows, cols = np.nonzero(mask)
    for seed_r, seed_c in zip(rows, cols):
        if seen[seed_r, seed_c]:
            continue
        stack = [(int(seed_r), int(seed_c))]
        seen[seed_r, seed_c] = True
        members = []
        while stack:
            r, c = stack.pop()
            members.append((r, c))
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if dr == 0 and dc == 0:
                        continue
                    nr, nc = r + dr, c + dc
                    if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] and not seen[nr, nc]:
                        seen[nr, nc] = True
                        stack.append((nr, nc))
        clusters.append(np.array(sorted(members), dtype=np.int64))
    return clusters


def global_frontier_plan(
    belief: OccupancyGrid,
    robot_pose: Pose,
    robot: RobotModel,
    sensor: SensorModel,
    yaw_bins: int = 16,
):
    """Plan to the nearest frontier cluster; None when exploration is done.

    Frontier cells are clustered by 8-connectivity; the nearest cluster by
    path distance wins and the goal is its reachable cell closest to the
    cluster centroid.  The goal yaw is orientation-optimized on the belief.
    Returns (goal Pose, cell path) or None.
    """
    rr, rc = belief.world_to_cell(robot_pose.x, robot_pose.y)
    blocked = inflate_occupancy(belief.cells, robot.footprint_radius / belief.resolution)
    dist, parent = kernels.dijkstra_grid(blocked, rr, rc)
    mask = frontier_cells(belief.cells)
    if not mask.any():
        return None
    clusters = _cluster_mask(mask)
    best_cluster = None
    best_d = math.inf
    for cl in clusters:
        d = float(np.min(dist[cl[:, 0], cl[:, 1]]))
        if d < best_d:
            best_d = d
            best_cluster = cl
    if best_cluster is None or not math.isfinite(best_d):
        return None
    centroid = best_cluster.mean(axis=0)
    reach = np.isfinite(dist[best_cluster[:, 0], best_cluster[:, 1]])
    members = best_cluster[reach]
    d2 = (members[:, 0] - centroid[0]) ** 2 + (members[:, 1] - centroid[1]) ** 2
    gr, gc = members[int(np.argmin(d2))]
    path = _walk_parents(parent, belief.width_cells, (rr, rc), (int(gr), int(gc)))
    gx, gy = belief.cell_center(int(gr), int(gc))
    gains = kernels.visibility_bin_gains(
        belief.cells,
        (gx - belief.origin[0]) / belief.resolution,
        (gy - belief.origin[1]) / belief.resolution,
        sensor.range_m / belief.resolution,
        sensor.fov / 2.0,
        int(yaw_bins),
    )
    k = int(np.argmax(gains))
    return Pose(gx, gy, bin_yaw(k, yaw_bins)), path


def _walk_parents(parent: np.ndarray, width: int, start: tuple[int, int], goal: tuple[int, int]):
    flat_parent = parent.ravel()
    path = []
    idx = goal[0] * width + goal[1]
    start_idx = start[0] * width + start[1]
    while idx != -1:
        path.append((idx // width, idx % width))
        if idx == start_idx:
            break
        idx = int(flat_parent[idx])
    path.reverse()
    return path


def _gain_normalizer(sensor: SensorModel, resolution: float) -> float:
    # area of the sensing sector in cells: (fov/2) * r^2
    r = sensor.range_m / resolution
    return (sensor.fov / 2.0) * r * r


def plan_step(
    state: SimState,
    config: PlannerConfig,
    robot: RobotModel,
    sensor: SensorModel,
    models=None,
    rng: np.random.Generator | None = None,
    monitor: LocalMinimumMonitor | None = None,
):
    """One NBV planning decision.

    Draws candidates from the configured sampler inside the local map,
    scores gain (per gain_mode) and cost, and returns the utility argmax
    plus the wall-clock compute time.  When the local map is exhausted the
    frontier planner takes over; when that finds nothing either,
    ExplorationComplete is raised.  Candidate poses/paths are returned in
    world frame / belief-grid cells, ready for sim.step.
    """
    if rng is None:
        rng = np.random.default_rng()
    if monitor is None:
        monitor = LocalMinimumMonitor()
    t0 = time.perf_counter()
    lm = extract_local_map(state, sensor)
    res = lm.resolution
    cells, dist, parent = _reachable_free_cells(lm, robot)
    stuck = monitor.tripped() or not kernels.has_visible_unknown(
        lm.cells, np.isfinite(dist).astype(np.uint8), sensor.range_m / res
    )
    if stuck:
        plan = global_frontier_plan(state.belief, state.robot, robot, sensor, config.yaw_bins)
        if plan is None:
            raise ExplorationComplete("no local gain and no reachable frontier")
        goal, path = plan
        length = path_length_m(path, state.belief.resolution)
        dyaw = wrap_angle(goal.yaw - state.robot.yaw)
        cost = max(traversal_time(length, dyaw, robot), res / robot.v_max)
        cand = Candidate(pose=goal, gain=0.0, cost=cost, path=path, source="frontier")
        monitor.consecutive_zero_gain_actions = 0
        return cand, time.perf_counter() - t0

    candidates = generate_candidates(
        state, config, robot, sensor, models, rng, _precomputed=(lm, cells, parent)
    )
    best = select_nbv(candidates)
    return candidates[best], time.perf_counter() - t0


def generate_candidates(
    state: SimState,
    config: PlannerConfig,
    robot: RobotModel,
    sensor: SensorModel,
    models=None,
    rng: np.random.Generator | None = None,
    _precomputed=None,
):
    """Sample and score one batch of candidates (no selection, no fallback).

    Every candidate comes back execution-ready: world-frame pose, cost with
    the one-cell floor applied, and a belief-grid cell path from the robot
    to the pose cell.
    """
    if rng is None:
        rng = np.random.default_rng()
    if _precomputed is not None:
        lm, cells, parent = _precomputed
    else:
        lm = extract_local_map(state, sensor)
        cells, _, parent = _reachable_free_cells(lm, robot)
    if cells.shape[0] == 0:
        raise SamplingExhaustedError("no reachable free cell in local map")
    res = lm.resolution
    n = config.resolved_n_samples()
    draws = _draw_candidates(lm, cells, config, models, rng, n)
    yaws, gains = _score_candidates(lm, draws, config, models, sensor)

    rr, rc = lm.robot_cell
    candidates = []
    for i, d in enumerate(draws):
        r, c = d.cell
        lpath = _walk_parents(parent, lm.size, (rr, rc), (int(r), int(c)))
        length = path_length_m(lpath, res)
        dyaw = wrap_angle(yaws[i] - state.robot.yaw)
        cost = max(traversal_time(length, dyaw, robot), res / robot.v_max)
        x = lm.origin[0] + (c + 0.5) * res
        y = lm.origin[1] + (r + 0.5) * res
        candidates.append(
            Candidate(
                pose=Pose(float(x), float(y), float(yaws[i])),
                gain=float(gains[i]),
                cost=float(cost),
                path=_local_to_global_path(lpath, lm, state.belief),
                source=d.source,
            )
        )
    return candidates


def _local_to_global_path(path, lm: LocalMap, belief: OccupancyGrid):
    dr = int(round((lm.origin[1] - belief.origin[1]) / belief.resolution))
    dc = int(round((lm.origin[0] - belief.origin[0]) / belief.resolution))
    return [(r + dr, c + dc) for r, c in path]


@dataclass
class _Draw:
    cell: tuple[int, int]
    source: str
    yaw: float | None = None  # model-provided yaw; None -> optimize
    joint_gain: float | None = None  # decoder gain prediction (joint mode)


def _draw_candidates(lm, reachable_cells, config, models, rng, n):
    """Draw n feasible candidate cells from the configured sampler.

    Model draws that land outside the window, in non-free cells, or out of
    reach are re-drawn until max_resample_attempts is spent, after which the
    remainder is back-filled with uniform samples.
    """
    res = lm.resolution
    size = lm.size
    reach_set = {(int(r), int(c)) for r, c in reachable_cells}
    draws: list[_Draw] = []

    def add_uniform():
        r, c = reachable_cells[rng.integers(reachable_cells.shape[0])]
        draws.append(_Draw(cell=(int(r), int(c)), source="uniform"))

    if config.sampler == "uniform":
        for _ in range(n):
            add_uniform()
        return draws

    if models is None:
        raise ValueError(f"sampler {config.sampler!r} requires models")

    attempts_left = config.max_resample_attempts
    if config.sampler == "cvae":
        while len(draws) < n and attempts_left > 0:
            batch = min(n - len(draws), attempts_left)
            samples = models.sample_poses(lm, batch, rng)
            attempts_left -= batch
            for s in samples:
                x, y, yaw = float(s[0]), float(s[1]), float(s[2])
                c = int(math.floor(x / res))
                r = int(math.floor(y / res))
                if not (0 <= r < size and 0 <= c < size) or (r, c) not in reach_set:
                    continue
                jg = float(s[3]) if len(s) > 3 else None
                draws.append(_Draw(cell=(r, c), source="cvae", yaw=yaw, joint_gain=jg))
                if len(draws) == n:
                    break
    else:  # imitation
        while len(draws) < n and attempts_left > 0:
            x, y, yaw = models.predict_pose(lm)
            attempts_left -= 1
            c = int(math.floor(x / res))
            r = int(math.floor(y / res))
            if 0 <= r < size and 0 <= c < size and (r, c) in reach_set:
                draws.append(_Draw(cell=(r, c), source="imitation", yaw=float(yaw)))
    while len(draws) < n:
        add_uniform()
    return draws


def _score_candidates(lm, draws, config, models, sensor):
    """Final yaw and gain for every draw, per the configured gain mode.

    Draws without a model yaw get one from orientation optimization (over
    ray-cast gain, or over the learned estimator when one is configured);
    draws with a model yaw are scored at that yaw directly.
    """
    res = lm.resolution
    bins = config.yaw_bins
    yaws: list[float] = [0.0] * len(draws)
    gains: list[float] = [0.0] * len(draws)
    learned = config.gain_mode in ("learned_mlp", "learned_cnn")

    queries = []  # (draw index, x, y, yaw) for the learned estimator
    for i, d in enumerate(draws):
        r, c = d.cell
        x = (c + 0.5) * res
        y = (r + 0.5) * res
        if config.gain_mode == "joint" and d.joint_gain is not None:
            yaws[i] = d.yaw
            gains[i] = max(0.0, d.joint_gain)
        elif learned:
            if d.yaw is None:
                for k in range(bins):
                    queries.append((i, x, y, bin_yaw(k, bins)))
            else:
                queries.append((i, x, y, d.yaw))
        else:
            # ray-cast gain (also the fallback for joint-mode uniform fills)
            gx = lm.origin[0] + x
            gy = lm.origin[1] + y
            if d.yaw is None:
                yaws[i], gains[i] = optimize_orientation(lm, (gx, gy), sensor, bins)
            else:
                yaws[i] = d.yaw
                gains[i] = compute_gain(lm, Pose(gx, gy, d.yaw), sensor)
    if queries:
        arr = np.asarray([(q[1], q[2], q[3]) for q in queries], dtype=np.float64)
        preds = np.asarray(models.predict_gains(lm, arr), dtype=np.float64)
        by_draw: dict[int, list[tuple[float, float]]] = {}
        for (i, _, _, yaw), p in zip(queries, preds):
            by_draw.setdefault(i, []).append((yaw, float(p)))
        for i, pairs in by_draw.items():
            k = int(np.argmax([p for _, p in pairs]))
            yaws[i] = pairs[k][0]
            gains[i] = max(0.0, pairs[k][1])
    return yaws, gains
