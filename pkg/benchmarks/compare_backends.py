#!/usr/bin/env python3
"""Compare the pure-Python and compiled kernel backends.

Times every grid kernel on representative planning workloads (a mid-episode
belief over a generated maze) and verifies that both backends return
bit-identical results on the same inputs.  Run from a checkout with the
package installed:

    python3 benchmarks/compare_backends.py [--side-m 20] [--repeats 50]
"""

import argparse
import math
import sys
import time

import numpy as np

from explan import kernels, planning, sim
from explan.grid import WorldGenParams, generate_world
from explan.sim import Pose, RobotModel, SensorModel


def time_call(fn, repeats, budget_s=3.0):
    best = math.inf
    spent = 0.0
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        dt = time.perf_counter() - t0
        best = min(best, dt)
        spent += dt
        if spent >= budget_s:
            break
    return best


def mid_episode_state(world, robot, sensor, steps=8, seed=0):
    """A partially explored belief, so kernels see realistic unknown areas."""
    x, y = None, None
    free = np.argwhere(world.cells == 0)
    r, c = free[len(free) // 2]
    x = world.origin[0] + (c + 0.5) * world.resolution
    y = world.origin[1] + (r + 0.5) * world.resolution
    state = sim.make_sim(world, Pose(x, y, 0.0))
    sim.sense(state, sensor)
    rng = np.random.default_rng(seed)
    config = planning.PlannerConfig(n_samples=10)
    monitor = planning.LocalMinimumMonitor()
    for _ in range(steps):
        try:
            cand, _ = planning.plan_step(state, config, robot, sensor, None, rng, monitor)
        except planning.ExplorationComplete:
            break
        sim.step(state, cand.pose, cand.path, robot, sensor)
    return state


def build_cases(side_m, seed):
    robot = RobotModel()
    sensor = SensorModel()
    world = generate_world(WorldGenParams(seed=seed, world_kind="maze", side_length_m=side_m))
    state = mid_episode_state(world, robot, sensor)
    belief = state.belief.cells
    gt = world.cells
    res = world.resolution
    range_cells = sensor.range_m / res
    half_fov = sensor.fov / 2.0
    py, px = (v + 0.5 for v in state.belief.world_to_cell(state.robot.x, state.robot.y))
    rr, rc = state.belief.world_to_cell(state.robot.x, state.robot.y)
    blocked = planning.inflate_occupancy(belief, robot.footprint_radius / res)
    viewer = (gt == 0).astype(np.uint8)
    belief_template = belief.copy()
    work = belief.copy()

    def sense_case(k):
        work[:] = belief_template
        return k.sense_scan(gt, work, px, py, 0.7, half_fov, range_cells, sensor.rays_per_scan)

    return {
        "los_clear": lambda k: k.los_clear(belief, px, py, 2, 2),
        "raycast_cells": lambda k: k.raycast_cells(belief, px, py, 0.7, range_cells),
        "visible_unknown_count": lambda k: k.visible_unknown_count(
            belief, px, py, 0.7, half_fov, range_cells
        ),
        "visibility_bin_gains": lambda k: k.visibility_bin_gains(
            belief, px, py, range_cells, half_fov, 16
        ),
        "sense_scan": sense_case,
        "dijkstra_grid": lambda k: k.dijkstra_grid(blocked, rr, rc),
        "has_visible_unknown": lambda k: k.has_visible_unknown(
            belief, (blocked == 0).astype(np.uint8), range_cells
        ),
        "observable_mask": lambda k: k.observable_mask(gt, range_cells, viewer),
    }


def identical(a, b):
    if isinstance(a, tuple):
        return len(a) == len(b) and all(identical(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return a.dtype == b.dtype and a.shape == b.shape and np.array_equal(a, b)
    return a == b and type(a) is type(b)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--side-m", type=float, default=20.0, help="world side length")
    parser.add_argument("--seed", type=int, default=0, help="world seed")
    parser.add_argument("--repeats", type=int, default=30,
                        help="timing repetitions per kernel (best-of)")
    args = parser.parse_args(argv)

    pure = kernels.get_backend("pure")
    try:
        compiled = kernels.get_backend("compiled")
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    cases = build_cases(args.side_m, args.seed)
    side_cells = int(round(args.side_m / 0.2))
    print(f"maze seed {args.seed}, {side_cells}x{side_cells} cells, "
          f"best of {args.repeats} runs\n")
    print(f"{'kernel':<24} {'pure':>12} {'compiled':>12} {'speedup':>9}  match")
    print("-" * 68)

    all_match = True
    for name, case in cases.items():
        match = identical(case(pure), case(compiled))
        all_match &= match
        t_pure = time_call(lambda: case(pure), args.repeats)
        t_comp = time_call(lambda: case(compiled), args.repeats)
        print(
            f"{name:<24} {t_pure * 1e6:>10.1f}us {t_comp * 1e6:>10.1f}us "
            f"{t_pure / t_comp:>8.1f}x  {'yes' if match else 'NO'}"
        )

    print()
    if not all_match:
        print("backends disagree: results are NOT bit-identical", file=sys.stderr)
        return 1
    print("all kernel outputs bit-identical across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
