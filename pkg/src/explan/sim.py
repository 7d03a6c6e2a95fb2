"""Robot and sensor simulation on occupancy grids.

The robot is an omnidirectional point with a footprint radius used only for
planning; motion is resolved kinematically (teleport along a planned path,
time charged as max of translation and rotation time).  The sensor is a
noise-free depth scanner: a fan of rays cast against ground truth, observed
cells copied into the belief map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .grid import FREE, OCCUPIED, UNKNOWN, OccupancyGrid, new_belief

wrap_angle = kernels.wrap_angle


class SimulationIntegrityError(RuntimeError):
    """Raised when the simulation reaches a physically invalid state."""


class ContractViolationError(RuntimeError):
    """Raised when a planner hands the simulator an invalid command."""


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))


@dataclass(frozen=True)
class RobotModel:
    v_max: float = 1.0
    omega_max: float = 1.0
    footprint_radius: float = 0.2

    def __post_init__(self):
        if self.v_max <= 0 or self.omega_max <= 0 or self.footprint_radius <= 0:
            raise ValueError("robot model parameters must be strictly positive")


@dataclass(frozen=True)
class SensorModel:
    fov: float = math.pi / 2
    range_m: float = 5.0
    rays_per_scan: int = 180

    def __post_init__(self):
        if not (0.0 < self.fov <= 2.0 * math.pi):
            raise ValueError("fov must be in (0, 2*pi]")
        if self.range_m <= 0:
            raise ValueError("range_m must be positive")
        if self.rays_per_scan < 2:
            raise ValueError("rays_per_scan must be at least 2")


@dataclass
class SimState:
    ground_truth: OccupancyGrid
    belief: OccupancyGrid
    robot: Pose
    elapsed_time: float = 0.0
    distance_traveled: float = 0.0


def make_sim(world: OccupancyGrid, start: Pose) -> SimState:
    """Fresh simulation: all-unknown belief, zero clocks."""
    r, c = world.world_to_cell(start.x, start.y)
    if world.cells[r, c] != FREE:
        raise ValueError("start pose not in free space")
    return SimState(ground_truth=world, belief=new_belief(world), robot=start)


@dataclass(frozen=True)
class RayResult:
    cells: np.ndarray  # (n, 2) int32 (row, col), traversal order
    hit: tuple[int, int] | None


def raycast(
    grid: OccupancyGrid,
    origin: tuple[float, float],
    angle: float,
    max_range: float,
    stop_unknown: bool = False,
) -> RayResult:
    """Exact grid traversal from a world point.

    Stops at the first occupied cell (and, when stop_unknown is set, at the
    first unknown cell, which is how gain rays treat belief maps) or at
    max_range.  The origin cell never stops the ray.
    """
    px = (origin[0] - grid.origin[0]) / grid.resolution
    py = (origin[1] - grid.origin[1]) / grid.resolution
    if not (0.0 <= px < grid.width_cells and 0.0 <= py < grid.height_cells):
        raise ValueError("ray origin outside grid")
    cells, hit = kernels.raycast_cells(
        grid.cells, px, py, angle, max_range / grid.resolution, True, stop_unknown
    )
    hit_cell = (int(cells[-1, 0]), int(cells[-1, 1])) if hit else None
    return RayResult(cells=cells, hit=hit_cell)


def sense(state: SimState, sensor: SensorModel) -> set[tuple[int, int]]:
    """Scan from the robot pose and fold the result into the belief map.

    Returns the set of cells whose belief changed from unknown.  Only cells
    whose center lies within range and field of view are marked (the cell
    under the robot always is); occupied cells terminate rays either way.
    """
    gt = state.ground_truth
    r, c = gt.world_to_cell(state.robot.x, state.robot.y)
    if gt.cells[r, c] != FREE:
        raise SimulationIntegrityError("robot is inside an occupied cell")
    px = (state.robot.x - gt.origin[0]) / gt.resolution
    py = (state.robot.y - gt.origin[1]) / gt.resolution
    newly = kernels.sense_scan(
        gt.cells,
        state.belief.cells,
        px,
        py,
        state.robot.yaw,
        sensor.fov / 2.0,
        sensor.range_m / gt.resolution,
        sensor.rays_per_scan,
    )
    return {(int(a), int(b)) for a, b in newly}


def traversal_time(
    path_length: float,
    delta_yaw: float,
    robot: RobotModel,
    combine: str = "max",
) -> float:
    """Estimated motion time for an omnidirectional robot.

    With combine="max" translation and rotation happen simultaneously;
    "sum" charges them sequentially (ablation).  Zero motion costs zero
    here; planners divide by this, so they apply a one-cell floor on top.
    """
    if path_length < 0:
        raise ValueError("path_length must be non-negative")
    t_lin = path_length / robot.v_max
    t_rot = abs(wrap_angle(delta_yaw)) / robot.omega_max
    if combine == "max":
        return max(t_lin, t_rot)
    if combine == "sum":
        return t_lin + t_rot
    raise ValueError(f"unknown combine mode: {combine!r}")


@dataclass(frozen=True)
class LocalMap:
    """Axis-aligned belief window centered on the robot cell.

    cells[half, half] is the robot cell (half = size // 2); origin holds the
    world coordinates of the window's (0, 0) cell corner.  Cells falling
    outside the world are filled occupied.
    """

    cells: np.ndarray
    robot_yaw: float
    origin: tuple[float, float]
    resolution: float

    @property
    def size(self) -> int:
        return self.cells.shape[0]

    @property
    def robot_cell(self) -> tuple[int, int]:
        return self.cells.shape[0] // 2, self.cells.shape[1] // 2


def local_map_size(sensor: SensorModel, resolution: float) -> int:
    # window spans twice the sensing range
    return int(round(2.0 * sensor.range_m / resolution))


def extract_local_map(state: SimState, sensor: SensorModel) -> LocalMap:
    belief = state.belief
    n = local_map_size(sensor, belief.resolution)
    half = n // 2
    r, c = belief.world_to_cell(state.robot.x, state.robot.y)
    window = np.full((n, n), OCCUPIED, dtype=np.uint8)
    r0 = r - half
    c0 = c - half
    src_r0 = max(r0, 0)
    src_c0 = max(c0, 0)
    src_r1 = min(r0 + n, belief.height_cells)
    src_c1 = min(c0 + n, belief.width_cells)
    if src_r0 < src_r1 and src_c0 < src_c1:
        window[src_r0 - r0 : src_r1 - r0, src_c0 - c0 : src_c1 - c0] = belief.cells[
            src_r0:src_r1, src_c0:src_c1
        ]
    origin = (
        belief.origin[0] + c0 * belief.resolution,
        belief.origin[1] + r0 * belief.resolution,
    )
    return LocalMap(
        cells=window,
        robot_yaw=state.robot.yaw,
        origin=origin,
        resolution=belief.resolution,
    )


def path_length_m(path, resolution: float) -> float:
    """Metric length of an 8-connected cell path."""
    total = 0.0
    for (r0, c0), (r1, c1) in zip(path, path[1:]):
        dr = abs(r1 - r0)
        dc = abs(c1 - c0)
        if dr > 1 or dc > 1:
            raise ContractViolationError("path cells are not 8-adjacent")
        total += math.sqrt(dr * dr + dc * dc) * resolution
    return total


def step(
    state: SimState,
    target: Pose,
    path,
    robot: RobotModel,
    sensor: SensorModel,
    combine: str = "max",
    sense_along_path: bool = False,
) -> SimState:
    """Move the robot along a planned cell path to target and sense there.

    The path must end at the target's cell and stay out of occupied belief
    cells (the planner's responsibility; violations raise).  Time is charged
    as traversal_time of the whole motion; sensing itself is instantaneous.
    """
    belief = state.belief
    tr, tc = belief.world_to_cell(target.x, target.y)
    path = list(path)
    if not path or tuple(path[-1]) != (tr, tc):
        raise ContractViolationError("path does not end at the target cell")
    for r, c in path:
        if belief.cells[r, c] == OCCUPIED:
            raise ContractViolationError("path crosses an occupied belief cell")
    length = path_length_m(path, belief.resolution)
    dyaw = wrap_angle(target.yaw - state.robot.yaw)
    state.elapsed_time += traversal_time(length, dyaw, robot, combine)
    state.distance_traveled += length
    if sense_along_path:
        for (r0, c0), (r1, c1) in zip(path, path[1:]):
            heading = math.atan2(r1 - r0, c1 - c0)
            x, y = belief.cell_center(r1, c1)
            state.robot = Pose(x, y, heading)
            sense(state, sensor)
    state.robot = target
    sense(state, sensor)
    return state
