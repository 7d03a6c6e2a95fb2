"""Occupancy-grid worlds and procedural generators.

Ground-truth worlds are 2D grids of {free, occupied, unknown} cells at a
fixed metric resolution.  Two generators are provided: a corridor maze
(recursive backtracker on a coarse lattice, carved at corridor width) and a
cluttered field of random convex obstacles.  Both guarantee a fully
4-connected free space and an occupied boundary ring.
"""

from __future__ import annotations

import math
import struct
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class VoxelState(IntEnum):
    FREE = 0
    OCCUPIED = 1
    UNKNOWN = 2


FREE = int(VoxelState.FREE)
OCCUPIED = int(VoxelState.OCCUPIED)
UNKNOWN = int(VoxelState.UNKNOWN)

# pooling priority: occupied beats unknown beats free
POOL_PRIORITY = {OCCUPIED: 2, UNKNOWN: 1, FREE: 0}


class WorldFormatError(ValueError):
    """Raised for corrupt or incompatible world files."""


class GenerationError(RuntimeError):
    """Raised when a world cannot be generated under the given parameters."""


@dataclass
class OccupancyGrid:
    """Row-major uint8 cell grid with metric resolution and origin.

    ``cells[r, c]`` holds a VoxelState value; the world-frame center of that
    cell is ``(origin[0] + (c + 0.5) * resolution,
    origin[1] + (r + 0.5) * resolution)``.
    """

    cells: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        if self.cells.ndim != 2 or self.cells.size == 0:
            raise ValueError("cells must be a non-empty 2D array")
        if not self.resolution > 0.0:
            raise ValueError("resolution must be positive")
        if not np.isin(self.cells, (FREE, OCCUPIED, UNKNOWN)).all():
            raise ValueError("cells contain values outside the voxel state set")

    @property
    def height_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def width_cells(self) -> int:
        return self.cells.shape[1]

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        """Map world coordinates to the (row, col) of the containing cell."""
        cx = (x - self.origin[0]) / self.resolution
        cy = (y - self.origin[1]) / self.resolution
        if not (0.0 <= cx < self.width_cells and 0.0 <= cy < self.height_cells):
            raise ValueError(f"point ({x}, {y}) outside grid")
        return int(math.floor(cy)), int(math.floor(cx))

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        if not (0 <= row < self.height_cells and 0 <= col < self.width_cells):
            raise ValueError(f"cell ({row}, {col}) outside grid")
        return (
            self.origin[0] + (col + 0.5) * self.resolution,
            self.origin[1] + (row + 0.5) * self.resolution,
        )

    def state_at(self, x: float, y: float) -> int:
        r, c = self.world_to_cell(x, y)
        return int(self.cells[r, c])

    def is_ground_truth(self) -> bool:
        return not (self.cells == UNKNOWN).any()

    def unknown_count(self) -> int:
        return int((self.cells == UNKNOWN).sum())

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.cells.copy(), self.resolution, self.origin)


def new_belief(world: OccupancyGrid) -> OccupancyGrid:
    """All-unknown belief grid matching a world's geometry."""
    cells = np.full_like(world.cells, UNKNOWN)
    return OccupancyGrid(cells, world.resolution, world.origin)


@dataclass
class WorldGenParams:
    seed: int = 0
    world_kind: str = "maze"
    side_length_m: float = 20.0
    resolution: float = 0.2
    corridor_width_m: float = 1.0
    obstacle_count: int = 10
    obstacle_size_range_m: tuple[float, float] = (1.0, 3.0)
    start_xy: tuple[float, float] | None = None

    def side_cells(self) -> int:
        n = self.side_length_m / self.resolution
        n_int = int(round(n))
        if n_int < 3 or abs(n_int * self.resolution - self.side_length_m) > 1e-9:
            raise ValueError(
                "side_length_m must be a positive integer multiple of resolution"
            )
        return n_int


def generate_world(params: WorldGenParams) -> OccupancyGrid:
    kind = params.world_kind.lower()
    if kind == "maze":
        return generate_maze(params)
    if kind == "cluttered":
        return generate_cluttered(params)
    raise ValueError(f"unknown world_kind: {params.world_kind!r}")


def generate_maze(params: WorldGenParams) -> OccupancyGrid:
    """Corridor maze via recursive backtracker on a coarse lattice.

    Lattice nodes are corridor_width-sized free blocks at twice that pitch;
    the DFS carves equally wide connections, so every free cell sits in a
    full-width band and free space is one component by construction.
    """
    n = params.side_cells()
    w = int(round(params.corridor_width_m / params.resolution))
    if w < 1:
        raise ValueError("corridor_width_m must be at least one cell")
    # nodes at rows/cols 1 + i*2w, blocks of w cells, all inside the border
    k = (n - 1 - w) // (2 * w) + 1
    if k < 2:
        raise ValueError("world too small for the requested corridor width")
    rng = np.random.Generator(np.random.PCG64(params.seed))
    cells = np.full((n, n), OCCUPIED, dtype=np.uint8)

    def carve_block(r0: int, c0: int):
        cells[r0 : r0 + w, c0 : c0 + w] = FREE

    def node_anchor(i: int, j: int) -> tuple[int, int]:
        return 1 + i * 2 * w, 1 + j * 2 * w

    visited = np.zeros((k, k), dtype=bool)
    stack = [(0, 0)]
    visited[0, 0] = True
    carve_block(*node_anchor(0, 0))
    directions = ((-1, 0), (1, 0), (0, -1), (0, 1))
    while stack:
        i, j = stack[-1]
        order = rng.permutation(4)
        advanced = False
        for d in order:
            di, dj = directions[d]
            ni, nj = i + di, j + dj
            if 0 <= ni < k and 0 <= nj < k and not visited[ni, nj]:
                visited[ni, nj] = True
                carve_block(*node_anchor(ni, nj))
                r0, c0 = node_anchor(i, j)
                r1, c1 = node_anchor(ni, nj)
                cells[min(r0, r1) : max(r0, r1) + w, min(c0, c1) : max(c0, c1) + w] = FREE
                stack.append((ni, nj))
                advanced = True
                break
        if not advanced:
            stack.pop()
    cells[0, :] = OCCUPIED
    cells[-1, :] = OCCUPIED
    cells[:, 0] = OCCUPIED
    cells[:, -1] = OCCUPIED
    return OccupancyGrid(cells, params.resolution)


def _free_connected(cells: np.ndarray) -> bool:
    free = cells == FREE
    total = int(free.sum())
    if total == 0:
        return False
    seed = np.argwhere(free)[0]
    h, w = cells.shape
    seen = np.zeros((h, w), dtype=bool)
    queue = deque([(int(seed[0]), int(seed[1]))])
    seen[seed[0], seed[1]] = True
    count = 0
    while queue:
        r, c = queue.popleft()
        count += 1
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < h and 0 <= nc < w and free[nr, nc] and not seen[nr, nc]:
                seen[nr, nc] = True
                queue.append((nr, nc))
    return count == total


def generate_cluttered(params: WorldGenParams) -> OccupancyGrid:
    """Open world with randomly placed rotated rectangles and ellipses.

    Each obstacle is resampled (bounded retries) if rasterizing it would
    split the free space or consume it entirely.
    """
    n = params.side_cells()
    lo, hi = params.obstacle_size_range_m
    if not (0.0 < lo <= hi):
        raise ValueError("obstacle_size_range_m must be increasing and positive")
    if params.obstacle_count < 0:
        raise ValueError("obstacle_count must be non-negative")
    rng = np.random.Generator(np.random.PCG64(params.seed))
    cells = np.full((n, n), FREE, dtype=np.uint8)
    cells[0, :] = OCCUPIED
    cells[-1, :] = OCCUPIED
    cells[:, 0] = OCCUPIED
    cells[:, -1] = OCCUPIED
    res = params.resolution
    side = n * res
    max_retries = 60
    # cell-center coordinate mesh, reused for every rasterization
    cyy, cxx = np.meshgrid(
        (np.arange(n) + 0.5) * res, (np.arange(n) + 0.5) * res, indexing="ij"
    )
    for _ in range(params.obstacle_count):
        placed = False
        for _ in range(max_retries):
            cx = rng.uniform(res, side - res)
            cy = rng.uniform(res, side - res)
            a = rng.uniform(lo, hi)
            b = rng.uniform(lo, hi)
            theta = rng.uniform(0.0, math.pi)
            is_rect = rng.random() < 0.5
            ct, st = math.cos(theta), math.sin(theta)
            u = (cxx - cx) * ct + (cyy - cy) * st
            v = -(cxx - cx) * st + (cyy - cy) * ct
            if is_rect:
                inside = (np.abs(u) <= a / 2) & (np.abs(v) <= b / 2)
            else:
                inside = (u / (a / 2)) ** 2 + (v / (b / 2)) ** 2 <= 1.0
            trial = cells.copy()
            trial[inside] = OCCUPIED
            if _free_connected(trial):
                cells = trial
                placed = True
                break
        if not placed:
            raise GenerationError(
                "could not place obstacle without disconnecting free space"
            )
    return OccupancyGrid(cells, params.resolution)


def resolve_start(world: OccupancyGrid, start_xy: tuple[float, float] | None = None):
    """Pick a start position in free space.

    Returns the given point when it lies in a free cell, otherwise the
    center of the free cell closest to it (or to the world center when no
    point was given).  Deterministic: distance ties break row-major.
    """
    if start_xy is not None:
        r, c = world.world_to_cell(*start_xy)
        if world.cells[r, c] == FREE:
            return float(start_xy[0]), float(start_xy[1])
        tx, ty = start_xy
    else:
        tx = world.origin[0] + world.width_cells * world.resolution / 2
        ty = world.origin[1] + world.height_cells * world.resolution / 2
    rows, cols = np.nonzero(world.cells == FREE)
    if rows.size == 0:
        raise ValueError("world has no free cells")
    xs = world.origin[0] + (cols + 0.5) * world.resolution
    ys = world.origin[1] + (rows + 0.5) * world.resolution
    d2 = (xs - tx) ** 2 + (ys - ty) ** 2
    best = int(np.argmin(d2))
    return float(xs[best]), float(ys[best])


_WORLD_MAGIC = b"EXPW"
_WORLD_VERSION = 1
_HEADER = struct.Struct("<4sBIIddd")


def save_world(world: OccupancyGrid, path) -> None:
    header = _HEADER.pack(
        _WORLD_MAGIC,
        _WORLD_VERSION,
        world.height_cells,
        world.width_cells,
        world.resolution,
        world.origin[0],
        world.origin[1],
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(world.cells.tobytes())


def load_world(path) -> OccupancyGrid:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise WorldFormatError("truncated world file header")
        magic, version, h, w, res, ox, oy = _HEADER.unpack(raw)
        if magic != _WORLD_MAGIC:
            raise WorldFormatError("not a world file (bad magic)")
        if version != _WORLD_VERSION:
            raise WorldFormatError(
                f"unsupported world file version: expected {_WORLD_VERSION}, found {version}"
            )
        payload = fh.read(h * w + 1)
    if len(payload) != h * w:
        raise WorldFormatError("world file payload size does not match header")
    cells = np.frombuffer(payload, dtype=np.uint8).reshape(h, w)
    try:
        return OccupancyGrid(cells.copy(), res, (ox, oy))
    except ValueError as exc:
        raise WorldFormatError(f"invalid world payload: {exc}") from exc
