#!/usr/bin/env python3
"""Sweep the per-pixel emission rate of the generator and report how the
map sum, the edge-fill ratio A and the post-convergence error ratio B
respond. S should scale linearly with the rate while the convergence
behavior stays put."""

import numpy as np

from evtrack.synth import SceneScript, TrajectorySegment, generate
from evtrack.tracker import TrackerConfig, seed_bank


def edge_scene(epp, v=500.0):
    return SceneScript(
        contour=[(0, dy) for dy in range(-40, 41)],
        start=(60.0, 240.0),
        segments=[TrajectorySegment(0.0, v, 0.0)],
        duration=0.3,
        events_per_pixel=epp,
        jitter_us=100.0,
    )


def main():
    print(f"{'epp':>4} {'events':>8} {'S (time avg)':>13} {'A':>6} {'B avg %':>8}")
    for epp in (1, 2, 3, 5, 8, 12):
        scene = edge_scene(epp)
        stream, _ = generate(scene, seed=3)
        config = TrackerConfig(telemetry_stride=1, plan_updates=False)
        bank = seed_bank([(60.0, 240.0)], [(500.0, 0.0)], config, stream.geometry, 0.0)
        rows = bank.process(stream).rows
        late = rows[rows[:, 0] > 0.1]
        tau = 1.0 / 500.0
        dt = np.diff(late[:, 0])
        s_avg = np.sum(late[:-1, 6] * tau * (1 - np.exp(-dt / tau))) / (late[-1, 0] - late[0, 0])
        w = np.maximum(np.diff(late[:, 0], append=late[-1, 0]), 0)
        b_avg = np.average(late[:, 8], weights=w)
        print(f"{epp:>4} {len(stream):>8} {s_avg:>13.1f} {s_avg / config.R:>6.2f} "
              f"{100 * b_avg:>8.3f}")


if __name__ == "__main__":
    main()
