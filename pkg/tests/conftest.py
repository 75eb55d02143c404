import numpy as np
import pytest

from evtrack.events import EventStream, SensorGeometry
from evtrack.synth import SceneScript, TrajectorySegment, generate, square_outline


def make_stream(rows, geometry=SensorGeometry()):
    """Build a stream from (t_us, x, y, p) tuples."""
    if not rows:
        return EventStream.empty(geometry)
    arr = np.array(rows, dtype=np.int64)
    return EventStream(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], geometry)


def random_stream(rng, n, geometry=SensorGeometry()):
    t = np.sort(rng.integers(0, 10_000_000, n))
    x = rng.integers(0, geometry.width, n)
    y = rng.integers(0, geometry.height, n)
    p = rng.choice(np.array([-1, 1], dtype=np.int8), n)
    return EventStream(t, x, y, p, geometry)


def horizontal_square_scene(
    side=100,
    start=(100.0, 240.0),
    v=(750.0, 0.0),
    duration=0.4,
    events_per_pixel=3,
    jitter_us=0.0,
    noise_rate=0.0,
):
    """Noiseless axis-aligned square under horizontal motion: emissions land
    exactly on pixel centers, so projections at the true velocity are exact."""
    half = side // 2
    return SceneScript(
        contour=square_outline(side),
        start=start,
        segments=[TrajectorySegment(0.0, v[0], v[1])],
        duration=duration,
        events_per_pixel=events_per_pixel,
        jitter_us=jitter_us,
        noise_rate=noise_rate,
        features={0: (half, half), 1: (-half, half), 2: (half, -half), 3: (-half, -half)},
    )


def corner_scene(
    arm=10,
    start=(100.0, 240.0),
    v=(750.0, 0.0),
    duration=0.4,
    events_per_pixel=5,
    jitter_us=100.0,
):
    """An L-shaped corner small enough to sit fully inside a 30 px window,
    so the mean-drift feedback is not attenuated by window clipping."""
    contour = [(-u, 0) for u in range(arm + 1)] + [(0, -u) for u in range(1, arm + 1)]
    return SceneScript(
        contour=sorted(contour),
        start=start,
        segments=[TrajectorySegment(0.0, v[0], v[1])],
        duration=duration,
        events_per_pixel=events_per_pixel,
        jitter_us=jitter_us,
        features={0: (0.0, 0.0)},
    )


@pytest.fixture(scope="session")
def warm_kernel():
    """Compile the numba kernel once so individual tests stay fast."""
    from evtrack.tracker import TrackerConfig, seed_bank

    scene = horizontal_square_scene(duration=0.02)
    stream, _ = generate(scene, seed=0)
    bank = seed_bank([(150.0, 290.0)], [(750.0, 0.0)], TrackerConfig(), stream.geometry, 0.0)
    bank.process(stream)
    return True
