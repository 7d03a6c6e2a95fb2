"""Pure-Python reference implementations of the grid kernels.

Every function here has a compiled twin in ``_core.pyx``.  The two backends
must produce bit-identical results: the math below is written with plain
C-double semantics (``math.remainder``, ``atan2``, explicit evaluation order)
so the compiled version can mirror it expression by expression.

Conventions shared by all kernels:

* grids are ``uint8`` arrays of shape (H, W), row-major, state values
  FREE=0, OCCUPIED=1, UNKNOWN=2
* positions are continuous cell coordinates: ``px`` along columns, ``py``
  along rows; the cell containing (px, py) is (floor(py), floor(px)) and the
  center of cell (r, c) is (c + 0.5, r + 0.5)
* angles are radians, wrapped to (-pi, pi]; distances are in cell units
"""

import heapq
import math

import numpy as np

FREE = 0
OCCUPIED = 1
UNKNOWN = 2

_TAU = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    w = math.remainder(a, _TAU)
    if w <= -math.pi:
        w += _TAU
    return w


def _los_clear(grid, h, w, px, py, tr, tc) -> bool:
    # Line of sight from (px, py) to the center of cell (tr, tc): true when
    # no cell strictly between them is occupied or unknown.  The origin cell
    # and the target cell themselves never block.
    ex = tc + 0.5
    ey = tr + 0.5
    dx = ex - px
    dy = ey - py
    c = int(math.floor(px))
    r = int(math.floor(py))
    if r == tr and c == tc:
        return True
    dist = math.sqrt(dx * dx + dy * dy)
    dirx = dx / dist
    diry = dy / dist
    if dirx > 0.0:
        step_c = 1
        tmax_x = ((c + 1) - px) / dirx
        tdelta_x = 1.0 / dirx
    elif dirx < 0.0:
        step_c = -1
        tmax_x = (c - px) / dirx
        tdelta_x = -1.0 / dirx
    else:
        step_c = 0
        tmax_x = math.inf
        tdelta_x = math.inf
    if diry > 0.0:
        step_r = 1
        tmax_y = ((r + 1) - py) / diry
        tdelta_y = 1.0 / diry
    elif diry < 0.0:
        step_r = -1
        tmax_y = (r - py) / diry
        tdelta_y = -1.0 / diry
    else:
        step_r = 0
        tmax_y = math.inf
        tdelta_y = math.inf
    while True:
        if tmax_x < tmax_y:
            tmax_x += tdelta_x
            c += step_c
        elif tmax_y < tmax_x:
            tmax_y += tdelta_y
            r += step_r
        else:
            # exact corner crossing: step diagonally, skipping the two
            # cells the ray merely touches
            tmax_x += tdelta_x
            tmax_y += tdelta_y
            c += step_c
            r += step_r
        if r < 0 or r >= h or c < 0 or c >= w:
            return False
        if r == tr and c == tc:
            return True
        if grid[r, c] != FREE:
            return False


def los_clear(grid: np.ndarray, px: float, py: float, tr: int, tc: int) -> bool:
    h, w = grid.shape
    return _los_clear(grid, h, w, px, py, int(tr), int(tc))


def _los_clear_robust(grid, h, w, px, py, tr, tc) -> bool:
    # Like _los_clear, but an exact corner crossing only passes when at
    # least one of the two cells flanking the corner is free.  A sensor ray
    # is an angle fed through cos/sin, so it can only thread a corner whose
    # flanks admit a nearby non-corner path; a diagonal gap between two
    # blocked flanks is invisible to every realizable ray.
    ex = tc + 0.5
    ey = tr + 0.5
    dx = ex - px
    dy = ey - py
    c = int(math.floor(px))
    r = int(math.floor(py))
    if r == tr and c == tc:
        return True
    dist = math.sqrt(dx * dx + dy * dy)
    dirx = dx / dist
    diry = dy / dist
    if dirx > 0.0:
        step_c = 1
        tmax_x = ((c + 1) - px) / dirx
        tdelta_x = 1.0 / dirx
    elif dirx < 0.0:
        step_c = -1
        tmax_x = (c - px) / dirx
        tdelta_x = -1.0 / dirx
    else:
        step_c = 0
        tmax_x = math.inf
        tdelta_x = math.inf
    if diry > 0.0:
        step_r = 1
        tmax_y = ((r + 1) - py) / diry
        tdelta_y = 1.0 / diry
    elif diry < 0.0:
        step_r = -1
        tmax_y = (r - py) / diry
        tdelta_y = -1.0 / diry
    else:
        step_r = 0
        tmax_y = math.inf
        tdelta_y = math.inf
    while True:
        if tmax_x < tmax_y:
            tmax_x += tdelta_x
            c += step_c
        elif tmax_y < tmax_x:
            tmax_y += tdelta_y
            r += step_r
        else:
            side_r = r + step_r
            side_c = c + step_c
            flank_open = (
                0 <= side_c < w and grid[r, side_c] == FREE
            ) or (
                0 <= side_r < h and grid[side_r, c] == FREE
            )
            if not flank_open:
                return False
            tmax_x += tdelta_x
            tmax_y += tdelta_y
            c = side_c
            r = side_r
        if r < 0 or r >= h or c < 0 or c >= w:
            return False
        if r == tr and c == tc:
            return True
        if grid[r, c] != FREE:
            return False


def raycast_cells(
    grid: np.ndarray,
    px: float,
    py: float,
    angle: float,
    max_range: float,
    stop_occupied: bool = True,
    stop_unknown: bool = False,
):
    """Exact grid traversal of a ray.

    Returns ``(cells, hit)`` where cells is an int32 array of (row, col)
    pairs in traversal order starting with the origin cell, and hit is True
    when the last cell was appended because its state matched a stop flag.
    The traversal also ends at max_range or at the grid boundary.  The
    origin cell is never treated as a stop cell.
    """
    h, w = grid.shape
    if not (0.0 <= px < w and 0.0 <= py < h):
        raise ValueError("ray origin outside grid")
    dirx = math.cos(angle)
    diry = math.sin(angle)
    c = int(math.floor(px))
    r = int(math.floor(py))
    if dirx > 0.0:
        step_c = 1
        tmax_x = ((c + 1) - px) / dirx
        tdelta_x = 1.0 / dirx
    elif dirx < 0.0:
        step_c = -1
        tmax_x = (c - px) / dirx
        tdelta_x = -1.0 / dirx
    else:
        step_c = 0
        tmax_x = math.inf
        tdelta_x = math.inf
    if diry > 0.0:
        step_r = 1
        tmax_y = ((r + 1) - py) / diry
        tdelta_y = 1.0 / diry
    elif diry < 0.0:
        step_r = -1
        tmax_y = (r - py) / diry
        tdelta_y = -1.0 / diry
    else:
        step_r = 0
        tmax_y = math.inf
        tdelta_y = math.inf
    cells = [(r, c)]
    hit = False
    while True:
        if tmax_x < tmax_y:
            t = tmax_x
            tmax_x += tdelta_x
            c += step_c
        elif tmax_y < tmax_x:
            t = tmax_y
            tmax_y += tdelta_y
            r += step_r
        else:
            t = tmax_x
            tmax_x += tdelta_x
            tmax_y += tdelta_y
            c += step_c
            r += step_r
        if t > max_range:
            break
        if r < 0 or r >= h or c < 0 or c >= w:
            break
        cells.append((r, c))
        state = grid[r, c]
        if (stop_occupied and state == OCCUPIED) or (stop_unknown and state == UNKNOWN):
            hit = True
            break
    return np.array(cells, dtype=np.int32).reshape(len(cells), 2), hit


def visible_unknown_count(
    grid: np.ndarray,
    px: float,
    py: float,
    yaw: float,
    half_fov: float,
    range_cells: float,
) -> int:
    """Count unknown cells whose center is within range and field of view of
    the pose and has line of sight from it."""
    h, w = grid.shape
    r2 = range_cells * range_cells
    r0 = max(0, int(math.floor(py - range_cells)) - 1)
    r1 = min(h - 1, int(math.floor(py + range_cells)) + 1)
    c0 = max(0, int(math.floor(px - range_cells)) - 1)
    c1 = min(w - 1, int(math.floor(px + range_cells)) + 1)
    count = 0
    for r in range(r0, r1 + 1):
        for c in range(c0, c1 + 1):
            if grid[r, c] != UNKNOWN:
                continue
            dx = (c + 0.5) - px
            dy = (r + 0.5) - py
            d2 = dx * dx + dy * dy
            if d2 > r2:
                continue
            delta = wrap_angle(math.atan2(dy, dx) - yaw)
            if abs(delta) > half_fov:
                continue
            if _los_clear(grid, h, w, px, py, r, c):
                count += 1
    return count


def visibility_bin_gains(
    grid: np.ndarray,
    px: float,
    py: float,
    range_cells: float,
    half_fov: float,
    n_bins: int,
) -> np.ndarray:
    """Per-orientation-bin visible-unknown counts.

    Bin k covers yaw wrap(2*pi*k/n_bins); entry k equals
    visible_unknown_count at that yaw.  Visibility is established once per
    cell and reused across bins.
    """
    h, w = grid.shape
    r2 = range_cells * range_cells
    r0 = max(0, int(math.floor(py - range_cells)) - 1)
    r1 = min(h - 1, int(math.floor(py + range_cells)) + 1)
    c0 = max(0, int(math.floor(px - range_cells)) - 1)
    c1 = min(w - 1, int(math.floor(px + range_cells)) + 1)
    yaws = [wrap_angle(_TAU * k / n_bins) for k in range(n_bins)]
    bins = np.zeros(n_bins, dtype=np.int64)
    for r in range(r0, r1 + 1):
        for c in range(c0, c1 + 1):
            if grid[r, c] != UNKNOWN:
                continue
            dx = (c + 0.5) - px
            dy = (r + 0.5) - py
            d2 = dx * dx + dy * dy
            if d2 > r2:
                continue
            if not _los_clear(grid, h, w, px, py, r, c):
                continue
            ang = math.atan2(dy, dx)
            for k in range(n_bins):
                delta = wrap_angle(ang - yaws[k])
                if abs(delta) <= half_fov:
                    bins[k] += 1
    return bins


def sense_scan(
    gt: np.ndarray,
    belief: np.ndarray,
    px: float,
    py: float,
    yaw: float,
    half_fov: float,
    range_cells: float,
    n_rays: int,
):
    """Cast a fan of rays through the ground truth and update the belief.

    Rays stop at occupied cells.  A traversed cell is copied into the belief
    only when its center lies within range and the field of view; the cell
    under the sensor is always marked.  Returns the newly observed cells as
    a sorted (row, col) int32 array.  Mutates belief in place.
    """
    h, w = gt.shape
    if not (0.0 <= px < w and 0.0 <= py < h):
        raise ValueError("sensor origin outside grid")
    r2 = range_cells * range_cells
    newly = []
    pr = int(math.floor(py))
    pc = int(math.floor(px))
    if belief[pr, pc] == UNKNOWN:
        belief[pr, pc] = gt[pr, pc]
        newly.append((pr, pc))
    span = 2.0 * half_fov
    for i in range(n_rays):
        a = yaw - half_fov + span * i / (n_rays - 1)
        dirx = math.cos(a)
        diry = math.sin(a)
        c = pc
        r = pr
        if dirx > 0.0:
            step_c = 1
            tmax_x = ((c + 1) - px) / dirx
            tdelta_x = 1.0 / dirx
        elif dirx < 0.0:
            step_c = -1
            tmax_x = (c - px) / dirx
            tdelta_x = -1.0 / dirx
        else:
            step_c = 0
            tmax_x = math.inf
            tdelta_x = math.inf
        if diry > 0.0:
            step_r = 1
            tmax_y = ((r + 1) - py) / diry
            tdelta_y = 1.0 / diry
        elif diry < 0.0:
            step_r = -1
            tmax_y = (r - py) / diry
            tdelta_y = -1.0 / diry
        else:
            step_r = 0
            tmax_y = math.inf
            tdelta_y = math.inf
        while True:
            if tmax_x < tmax_y:
                t = tmax_x
                tmax_x += tdelta_x
                c += step_c
            elif tmax_y < tmax_x:
                t = tmax_y
                tmax_y += tdelta_y
                r += step_r
            else:
                t = tmax_x
                tmax_x += tdelta_x
                tmax_y += tdelta_y
                c += step_c
                r += step_r
            if t > range_cells:
                break
            if r < 0 or r >= h or c < 0 or c >= w:
                break
            state = gt[r, c]
            dx = (c + 0.5) - px
            dy = (r + 0.5) - py
            in_view = dx * dx + dy * dy <= r2 and abs(
                wrap_angle(math.atan2(dy, dx) - yaw)
            ) <= half_fov
            if in_view and belief[r, c] == UNKNOWN:
                belief[r, c] = state
                newly.append((r, c))
            if state == OCCUPIED:
                break
    newly.sort()
    return np.array(newly, dtype=np.int32).reshape(len(newly), 2)


_NEIGH = (
    (-1, -1, math.sqrt(2.0)),
    (-1, 0, 1.0),
    (-1, 1, math.sqrt(2.0)),
    (0, -1, 1.0),
    (0, 1, 1.0),
    (1, -1, math.sqrt(2.0)),
    (1, 0, 1.0),
    (1, 1, math.sqrt(2.0)),
)


def dijkstra_grid(blocked: np.ndarray, sr: int, sc: int):
    """8-connected Dijkstra flood over the unblocked cells.

    Diagonal steps cost sqrt(2).  The start cell is expanded even if marked
    blocked, so a robot standing inside the inflation margin can still plan
    its way out.  Returns (dist, parent): float64 distances in cell units
    (inf where unreachable) and int32 flat predecessor indices (-1 at the
    start and at unreachable cells).  Ties pop in flat-index order.
    """
    h, w = blocked.shape
    n = h * w
    dist = np.full(n, np.inf, dtype=np.float64)
    parent = np.full(n, -1, dtype=np.int32)
    start = sr * w + sc
    dist[start] = 0.0
    heap = [(0.0, start)]
    while heap:
        d, idx = heapq.heappop(heap)
        if d > dist[idx]:
            continue
        r = idx // w
        c = idx - r * w
        for dr, dc, wt in _NEIGH:
            nr = r + dr
            nc = c + dc
            if nr < 0 or nr >= h or nc < 0 or nc >= w:
                continue
            if blocked[nr, nc]:
                continue
            nd = d + wt
            nidx = nr * w + nc
            if nd < dist[nidx]:
                dist[nidx] = nd
                parent[nidx] = idx
                heapq.heappush(heap, (nd, nidx))
    return dist.reshape(h, w), parent.reshape(h, w)


def has_visible_unknown(
    grid: np.ndarray,
    reachable: np.ndarray,
    range_cells: float,
) -> bool:
    """True when some reachable free cell center has an unknown cell within
    sensor range and line of sight (i.e. a sensing pose with positive gain
    exists)."""
    h, w = grid.shape
    r2 = range_cells * range_cells
    for ur in range(h):
        for uc in range(w):
            if grid[ur, uc] != UNKNOWN:
                continue
            r0 = max(0, int(math.floor(ur + 0.5 - range_cells)) - 1)
            r1 = min(h - 1, int(math.floor(ur + 0.5 + range_cells)) + 1)
            c0 = max(0, int(math.floor(uc + 0.5 - range_cells)) - 1)
            c1 = min(w - 1, int(math.floor(uc + 0.5 + range_cells)) + 1)
            for fr in range(r0, r1 + 1):
                for fc in range(c0, c1 + 1):
                    if not reachable[fr, fc] or grid[fr, fc] != FREE:
                        continue
                    dx = (uc + 0.5) - (fc + 0.5)
                    dy = (ur + 0.5) - (fr + 0.5)
                    if dx * dx + dy * dy > r2:
                        continue
                    if _los_clear(grid, h, w, fc + 0.5, fr + 0.5, ur, uc):
                        return True
    return False


def observable_mask(gt: np.ndarray, range_cells: float, viewer: np.ndarray) -> np.ndarray:
    """Mask of cells observable from the given viewer cells.

    Viewer cells (sensor placements, a subset of free space) observe
    themselves.  Any other cell is observable when some viewer center within
    sensor range has corner-robust line of sight to its center (see
    ``_los_clear_robust``); cells orthogonally adjacent to a viewer
    short-circuit that search.
    """
    h, w = gt.shape
    r2 = range_cells * range_cells
    mask = np.zeros((h, w), dtype=np.uint8)
    for r in range(h):
        for c in range(w):
            if viewer[r, c]:
                mask[r, c] = 1
                continue
            if range_cells >= 1.0:
                adjacent_viewer = False
                if r > 0 and viewer[r - 1, c]:
                    adjacent_viewer = True
                elif r < h - 1 and viewer[r + 1, c]:
                    adjacent_viewer = True
                elif c > 0 and viewer[r, c - 1]:
                    adjacent_viewer = True
                elif c < w - 1 and viewer[r, c + 1]:
                    adjacent_viewer = True
                if adjacent_viewer:
                    mask[r, c] = 1
                    continue
            r0 = max(0, int(math.floor(r + 0.5 - range_cells)) - 1)
            r1 = min(h - 1, int(math.floor(r + 0.5 + range_cells)) + 1)
            c0 = max(0, int(math.floor(c + 0.5 - range_cells)) - 1)
            c1 = min(w - 1, int(math.floor(c + 0.5 + range_cells)) + 1)
            found = False
            for fr in range(r0, r1 + 1):
                if found:
                    break
                for fc in range(c0, c1 + 1):
                    if not viewer[fr, fc]:
                        continue
                    dx = (c + 0.5) - (fc + 0.5)
                    dy = (r + 0.5) - (fr + 0.5)
                    if dx * dx + dy * dy > r2:
                        continue
                    if _los_clear_robust(gt, h, w, fc + 0.5, fr + 0.5, r, c):
                        found = True
                        break
            if found:
                mask[r, c] = 1
    return mask
