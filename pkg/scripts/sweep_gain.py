#!/usr/bin/env python3
"""Sweep the correction-scale constant dx and measure the displacement the
tracker needs to converge: the displacement should grow linearly with dx."""

import math

import numpy as np

from evtrack.synth import SceneScript, TrajectorySegment, generate
from evtrack.tracker import TrackerConfig, seed_bank


def corner_scene(arm=10, v=(750.0, 0.0), duration=0.45, epp=10, jitter_us=500.0):
    contour = [(-u, 0) for u in range(arm + 1)] + [(0, -u) for u in range(1, arm + 1)]
    return SceneScript(
        contour=sorted(contour),
        start=(100.0, 240.0),
        segments=[TrajectorySegment(0.0, v[0], v[1])],
        duration=duration,
        events_per_pixel=epp,
        jitter_us=jitter_us,
        features={0: (0.0, 0.0)},
    )


def convergence_displacement(dx, seed_v=(900.0, 100.0), threshold=0.02):
    scene = corner_scene()
    stream, _ = generate(scene, seed=0)
    config = TrackerConfig(dx=dx, plan_updates=False, telemetry_stride=1)
    bank = seed_bank([(95.25, 235.25)], [seed_v], config, stream.geometry, 0.0)
    rows = bank.process(stream).rows
    verr = np.hypot(rows[:, 2] - 750.0, rows[:, 3]) / 750.0
    hit = np.nonzero(verr < threshold)[0]
    return rows[hit[0], 0] * 750.0 if len(hit) else math.inf


def main():
    dxs = [7.5, 15.0, 30.0, 45.0, 60.0]
    print(f"{'dx':>6} {'convergence px':>15}")
    disps = []
    for dx in dxs:
        d = convergence_displacement(dx)
        disps.append(d)
        print(f"{dx:>6.1f} {d:>15.1f}")
    ok = [i for i, d in enumerate(disps) if math.isfinite(d)]
    A = np.vstack([[dxs[i] for i in ok], np.ones(len(ok))]).T
    y = [disps[i] for i in ok]
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    r2 = 1 - np.sum((y - fit) ** 2) / np.sum((y - np.mean(y)) ** 2)
    print(f"linear fit: displacement = {coef[0]:.2f} * dx + {coef[1]:.1f}  (R^2 = {r2:.3f})")


if __name__ == "__main__":
    main()
