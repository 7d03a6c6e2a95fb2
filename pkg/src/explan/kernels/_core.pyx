# cython: language_level=3
"""Compiled grid kernels.

Mirror of ``pure.py``: same functions, same semantics, bit-identical
results.  Keep the floating-point expressions in the same order as the
reference when editing either file.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport M_PI, INFINITY, atan2, cos, sin, sqrt, floor, fabs, remainder

cnp.import_array()

cdef double TAU = 2.0 * M_PI

DEF FREE = 0
DEF OCCUPIED = 1
DEF UNKNOWN = 2

FREE_PY = FREE
OCCUPIED_PY = OCCUPIED
UNKNOWN_PY = UNKNOWN


cdef inline double _wrap(double a) nogil:
    cdef double w = remainder(a, TAU)
    if w <= -M_PI:
        w += TAU
    return w


def wrap_angle(double a):
    """Wrap an angle to the half-open interval (-pi, pi]."""
    return _wrap(a)


cdef bint _los(const unsigned char[:, ::1] grid, int h, int w,
               double px, double py, int tr, int tc) nogil:
    cdef double ex = tc + 0.5
    cdef double ey = tr + 0.5
    cdef double dx = ex - px
    cdef double dy = ey - py
    cdef int c = <int>floor(px)
    cdef int r = <int>floor(py)
    cdef double dist, dirx, diry, tmax_x, tmax_y, tdelta_x, tdelta_y
    cdef int step_c, step_r
    if r == tr and c == tc:
        return True
    dist = sqrt(dx * dx + dy * dy)
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
        tmax_x = INFINITY
        tdelta_x = INFINITY
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
        tmax_y = INFINITY
        tdelta_y = INFINITY
    while True:
        if tmax_x < tmax_y:
            tmax_x += tdelta_x
            c += step_c
        elif tmax_y < tmax_x:
            tmax_y += tdelta_y
            r += step_r
        else:
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


def los_clear(const unsigned char[:, ::1] grid, double px, double py, tr, tc):
    cdef int h = grid.shape[0]
    cdef int w = grid.shape[1]
    return bool(_los(grid, h, w, px, py, int(tr), int(tc)))


cdef bint _los_robust(const unsigned char[:, ::1] grid, int h, int w,
                      double px, double py, int tr, int tc) nogil:
    # Corner-robust variant of _los; see _los_clear_robust in the reference.
    cdef double ex = tc + 0.5
    cdef double ey = tr + 0.5
    cdef double dx = ex - px
    cdef double dy = ey - py
    cdef int c = <int>floor(px)
    cdef int r = <int>floor(py)
    cdef double dist, dirx, diry, tmax_x, tmax_y, tdelta_x, tdelta_y
    cdef int step_c, step_r, side_r, side_c
    cdef bint flank_open
    if r == tr and c == tc:
        return True
    dist = sqrt(dx * dx + dy * dy)
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
        tmax_x = INFINITY
        tdelta_x = INFINITY
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
        tmax_y = INFINITY
        tdelta_y = INFINITY
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


def raycast_cells(const unsigned char[:, ::1] grid, double px, double py,
                  double angle, double max_range,
                  bint stop_occupied=True, bint stop_unknown=False):
    """Exact grid traversal of a ray; see the reference implementation."""
    cdef int h = grid.shape[0]
    cdef int w = grid.shape[1]
    if not (0.0 <= px < w and 0.0 <= py < h):
        raise ValueError("ray origin outside grid")
    cdef double dirx = cos(angle)
    cdef double diry = sin(angle)
    cdef int c = <int>floor(px)
    cdef int r = <int>floor(py)
    cdef double tmax_x, tmax_y, tdelta_x, tdelta_y, t
    cdef int step_c, step_r
    cdef unsigned char state
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
        tmax_x = INFINITY
        tdelta_x = INFINITY
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
        tmax_y = INFINITY
        tdelta_y = INFINITY
    out = np.empty((h + w + 4, 2), dtype=np.int32)
    cdef int[:, ::1] cells = out
    cdef Py_ssize_t n = 0
    cells[n, 0] = r
    cells[n, 1] = c
    n += 1
    cdef bint hit = False
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
        cells[n, 0] = r
        cells[n, 1] = c
        n += 1
        state = grid[r, c]
        if (stop_occupied and state == OCCUPIED) or (stop_unknown and state == UNKNOWN):
            hit = True
            break
    return out[:n].copy(), bool(hit)


def visible_unknown_count(const unsigned char[:, ::1] grid, double px, double py,
                          double yaw, double half_fov, double range_cells):
    cdef int h = grid.shape[0]
    cdef int w = grid.shape[1]
    cdef double r2 = range_cells * range_cells
    cdef int r0 = <int>floor(py - range_cells) - 1
    cdef int r1 = <int>floor(py + range_cells) + 1
    cdef int c0 = <int>floor(px - range_cells) - 1
    cdef int c1 = <int>floor(px + range_cells) + 1
    if r0 < 0: r0 = 0
    if r1 > h - 1: r1 = h - 1
    if c0 < 0: c0 = 0
    if c1 > w - 1: c1 = w - 1
    cdef long count = 0
    cdef int r, c
    cdef double dx, dy, d2, delta
    with nogil:
        for r in range(r0, r1 + 1):
            for c in range(c0, c1 + 1):
                if grid[r, c] != UNKNOWN:
                    continue
                dx = (c + 0.5) - px
                dy = (r + 0.5) - py
                d2 = dx * dx + dy * dy
                if d2 > r2:
                    continue
                delta = _wrap(atan2(dy, dx) - yaw)
                if fabs(delta) > half_fov:
                    continue
                if _los(grid, h, w, px, py, r, c):
                    count += 1
    return int(count)


def visibility_bin_gains(const unsigned char[:, ::1] grid, double px, double py,
                         double range_cells, double half_fov, int n_bins):
    cdef int h = grid.shape[0]
    cdef int w = grid.shape[1]
    cdef double r2 = range_cells * range_cells
    cdef int r0 = <int>floor(py - range_cells) - 1
    cdef int r1 = <int>floor(py + range_cells) + 1
    cdef int c0 = <int>floor(px - range_cells) - 1
    cdef int c1 = <int>floor(px + range_cells) + 1
    if r0 < 0: r0 = 0
    if r1 > h - 1: r1 = h - 1
    if c0 < 0: c0 = 0
    if c1 > w - 1: c1 = w - 1
    yaws_arr = np.empty(n_bins, dtype=np.float64)
    cdef double[::1] yaws = yaws_arr
    cdef int k
    for k in range(n_bins):
        yaws[k] = _wrap((TAU * k) / n_bins)
    bins_arr = np.zeros(n_bins, dtype=np.int64)
    cdef long long[::1] bins = bins_arr
    cdef int r, c
    cdef double dx, dy, d2, ang, delta
    with nogil:
        for r in range(r0, r1 + 1):
            for c in range(c0, c1 + 1):
                if grid[r, c] != UNKNOWN:
                    continue
                dx = (c + 0.5) - px
                dy = (r + 0.5) - py
                d2 = dx * dx + dy * dy
                if d2 > r2:
                    continue
                if not _los(grid, h, w, px, py, r, c):
                    continue
                ang = atan2(dy, dx)
                for k in range(n_bins):
                    delta = _wrap(ang - yaws[k])
                    if fabs(delta) <= half_fov:
                        bins[k] += 1
    return bins_arr


def sense_scan(const unsigned char[:, ::1] gt, unsigned char[:, ::1] belief,
               double px, double py, double yaw, double half_fov,
               double range_cells, int n_rays):
    cdef int h = gt.shape[0]
    cdef int w = gt.shape[1]
    if not (0.0 <= px < w and 0.0 <= py < h):
        raise ValueError("sensor origin outside grid")
    cdef double r2 = range_cells * range_cells
    flat_arr = np.empty(h * w, dtype=np.int64)
    cdef long long[::1] flat = flat_arr
    cdef Py_ssize_t m = 0
    cdef int pr = <int>floor(py)
    cdef int pc = <int>floor(px)
    if belief[pr, pc] == UNKNOWN:
        belief[pr, pc] = gt[pr, pc]
        flat[m] = pr * w + pc
        m += 1
    cdef double span = 2.0 * half_fov
    cdef int i, r, c, step_c, step_r
    cdef double a, dirx, diry, tmax_x, tmax_y, tdelta_x, tdelta_y, t, dx, dy
    cdef unsigned char state
    cdef bint in_view
    with nogil:
        for i in range(n_rays):
            a = yaw - half_fov + (span * i) / (n_rays - 1)
            dirx = cos(a)
            diry = sin(a)
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
                tmax_x = INFINITY
                tdelta_x = INFINITY
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
                tmax_y = INFINITY
                tdelta_y = INFINITY
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
                in_view = dx * dx + dy * dy <= r2 and fabs(
                    _wrap(atan2(dy, dx) - yaw)) <= half_fov
                if in_view and belief[r, c] == UNKNOWN:
                    belief[r, c] = state
                    flat[m] = r * w + c
                    m += 1
                if state == OCCUPIED:
                    break
    used = np.sort(flat_arr[:m])
    out = np.empty((m, 2), dtype=np.int32)
    out[:, 0] = used // w
    out[:, 1] = used % w
    return out


cdef inline void _heap_push(double* hd, int* hi, Py_ssize_t* size,
                            double d, int idx) nogil:
    cdef Py_ssize_t i = size[0]
    cdef Py_ssize_t p
    size[0] += 1
    while i > 0:
        p = (i - 1) >> 1
        if hd[p] < d or (hd[p] == d and hi[p] <= idx):
            break
        hd[i] = hd[p]
        hi[i] = hi[p]
        i = p
    hd[i] = d
    hi[i] = idx


cdef inline void _heap_pop(double* hd, int* hi, Py_ssize_t* size,
                           double* d_out, int* i_out) nogil:
    d_out[0] = hd[0]
    i_out[0] = hi[0]
    size[0] -= 1
    cdef double d = hd[size[0]]
    cdef int idx = hi[size[0]]
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t child
    while True:
        child = 2 * i + 1
        if child >= size[0]:
            break
        if child + 1 < size[0] and (hd[child + 1] < hd[child] or
                                    (hd[child + 1] == hd[child] and hi[child + 1] < hi[child])):
            child += 1
        if hd[child] < d or (hd[child] == d and hi[child] < idx):
            hd[i] = hd[child]
            hi[i] = hi[child]
            i = child
        else:
            break
    hd[i] = d
    hi[i] = idx


def dijkstra_grid(const unsigned char[:, ::1] blocked, int sr, int sc):
    """8-connected Dijkstra flood; see the reference implementation."""
    cdef int h = blocked.shape[0]
    cdef int w = blocked.shape[1]
    cdef Py_ssize_t n = h * w
    dist_arr = np.full(n, np.inf, dtype=np.float64)
    parent_arr = np.full(n, -1, dtype=np.int32)
    cdef double[::1] dist = dist_arr
    cdef int[::1] parent = parent_arr
    heap_d_arr = np.empty(9 * n + 8, dtype=np.float64)
    heap_i_arr = np.empty(9 * n + 8, dtype=np.int32)
    cdef double[::1] heap_d = heap_d_arr
    cdef int[::1] heap_i = heap_i_arr
    cdef Py_ssize_t size = 0
    cdef int start = sr * w + sc
    cdef double SQ2 = sqrt(2.0)
    cdef int[8] ndr = [-1, -1, -1, 0, 0, 1, 1, 1]
    cdef int[8] ndc = [-1, 0, 1, -1, 1, -1, 0, 1]
    cdef double[8] nwt = [SQ2, 1.0, SQ2, 1.0, 1.0, SQ2, 1.0, SQ2]
    cdef double d, nd
    cdef int idx, r, c, j, nr, nc, nidx
    dist[start] = 0.0
    with nogil:
        _heap_push(&heap_d[0], &heap_i[0], &size, 0.0, start)
        while size > 0:
            _heap_pop(&heap_d[0], &heap_i[0], &size, &d, &idx)
            if d > dist[idx]:
                continue
            r = idx // w
            c = idx - r * w
            for j in range(8):
                nr = r + ndr[j]
                nc = c + ndc[j]
                if nr < 0 or nr >= h or nc < 0 or nc >= w:
                    continue
                if blocked[nr, nc]:
                    continue
                nd = d + nwt[j]
                nidx = nr * w + nc
                if nd < dist[nidx]:
                    dist[nidx] = nd
                    parent[nidx] = idx
                    _heap_push(&heap_d[0], &heap_i[0], &size, nd, nidx)
    return dist_arr.reshape(h, w), parent_arr.reshape(h, w)


def has_visible_unknown(const unsigned char[:, ::1] grid,
                        const unsigned char[:, ::1] reachable,
                        double range_cells):
    cdef int h = grid.shape[0]
    cdef int w = grid.shape[1]
    cdef double r2 = range_cells * range_cells
    cdef int ur, uc, fr, fc, r0, r1, c0, c1
    cdef double dx, dy
    cdef bint found = False
    with nogil:
        for ur in range(h):
            if found:
                break
            for uc in range(w):
                if found:
                    break
                if grid[ur, uc] != UNKNOWN:
                    continue
                r0 = <int>floor(ur + 0.5 - range_cells) - 1
                r1 = <int>floor(ur + 0.5 + range_cells) + 1
                c0 = <int>floor(uc + 0.5 - range_cells) - 1
                c1 = <int>floor(uc + 0.5 + range_cells) + 1
                if r0 < 0: r0 = 0
                if r1 > h - 1: r1 = h - 1
                if c0 < 0: c0 = 0
                if c1 > w - 1: c1 = w - 1
                for fr in range(r0, r1 + 1):
                    if found:
                        break
                    for fc in range(c0, c1 + 1):
                        if not reachable[fr, fc] or grid[fr, fc] != FREE:
                            continue
                        dx = (uc + 0.5) - (fc + 0.5)
                        dy = (ur + 0.5) - (fr + 0.5)
                        if dx * dx + dy * dy > r2:
                            continue
                        if _los(grid, h, w, fc + 0.5, fr + 0.5, ur, uc):
                            found = True
                            break
    return bool(found)


def observable_mask(const unsigned char[:, ::1] gt, double range_cells,
                    const unsigned char[:, ::1] viewer):
    cdef int h = gt.shape[0]
    cdef int w = gt.shape[1]
    cdef double r2 = range_cells * range_cells
    mask_arr = np.zeros((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] mask = mask_arr
    cdef int r, c, fr, fc, r0, r1, c0, c1
    cdef double dx, dy
    cdef bint adjacent_viewer, found
    with nogil:
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
                r0 = <int>floor(r + 0.5 - range_cells) - 1
                r1 = <int>floor(r + 0.5 + range_cells) + 1
                c0 = <int>floor(c + 0.5 - range_cells) - 1
                c1 = <int>floor(c + 0.5 + range_cells) + 1
                if r0 < 0: r0 = 0
                if r1 > h - 1: r1 = h - 1
                if c0 < 0: c0 = 0
                if c1 > w - 1: c1 = w - 1
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
                        if _los_robust(gt, h, w, fc + 0.5, fr + 0.5, r, c):
                            found = True
                            break
                if found:
                    mask[r, c] = 1
    return mask_arr
