import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evtrack.descriptor import (
    Descriptor,
    bhattacharyya_distance,
    capture,
    read_csv,
    resample,
    write_csv,
)
from evtrack.projection import Velocity
from evtrack.synth import generate
from evtrack.tracker import TrackerConfig, TrackerStatus, seed_bank

from conftest import corner_scene


def make_descriptor(grid, tracker_id=0, v=(500.0, 0.0), t=0.0):
    g = np.asarray(grid, dtype=np.float64)
    return Descriptor(g / g.sum(), tracker_id, Velocity(*v), t)


# --- capture ----------------------------------------------------------------

class _FakeState:
    def __init__(self, grid, status=TrackerStatus.TRACKING):
        self.map_values = np.asarray(grid, dtype=np.float64)
        self.status = status
        self.tracker_id = 7
        self.velocity = Velocity(600.0, 0.0)
        self.last_t = 0.25


def test_capture_normalizes():
    d = capture(_FakeState([[2.0, 2.0]]))
    assert d.grid.tolist() == [[0.5, 0.5]]


def test_capture_single_cell():
    d = capture(_FakeState([[0.0, 3.5], [0.0, 0.0]]))
    assert d.grid[0, 1] == 1.0
    assert d.grid.sum() == 1.0


def test_capture_rejects_empty_map():
    with pytest.raises(ValueError, match="empty"):
        capture(_FakeState(np.zeros((3, 3))))


def test_capture_rejects_non_tracking():
    with pytest.raises(ValueError, match="not tracking"):
        capture(_FakeState([[1.0]], status=TrackerStatus.WARMING))


def test_capture_scale_invariant():
    a = capture(_FakeState([[1.0, 3.0]]))
    b = capture(_FakeState([[2.5, 7.5]]))
    assert np.array_equal(a.grid, b.grid)


# --- Bhattacharyya distance ---------------------------------------------------

def test_distance_identical_is_exactly_zero():
    a = make_descriptor([[0.3, 0.7]])
    b = make_descriptor([[0.3, 0.7]])
    assert bhattacharyya_distance(a, b) == 0.0


def test_distance_disjoint_is_infinite():
    a = make_descriptor([[1.0, 0.0]])
    b = make_descriptor([[0.0, 1.0]])
    assert bhattacharyya_distance(a, b) == math.inf


def test_distance_closed_form():
    a = make_descriptor([[0.5, 0.5]])
    b = make_descriptor([[1.0, 0.0]])
    d = bhattacharyya_distance(a, b)
    assert d == pytest.approx(-math.log(math.sqrt(0.5)), rel=1e-12)
    assert d == pytest.approx(0.3466, abs=1e-4)


@given(st.lists(st.floats(0.01, 10.0), min_size=2, max_size=12),
       st.lists(st.floats(0.01, 10.0), min_size=2, max_size=12))
@settings(max_examples=50, deadline=None)
def test_distance_symmetric(wa, wb):
    n = min(len(wa), len(wb))
    a = make_descriptor([wa[:n]])
    b = make_descriptor([wb[:n]])
    assert bhattacharyya_distance(a, b) == bhattacharyya_distance(b, a)


@given(st.lists(st.floats(0.01, 10.0), min_size=2, max_size=12))
@settings(max_examples=50, deadline=None)
def test_distance_self_is_zero(w):
    a = make_descriptor([w])
    assert bhattacharyya_distance(a, a) == 0.0


def test_distance_resamples_unequal_shapes():
    a = make_descriptor(np.ones((2, 2)))
    b = make_descriptor(np.ones((4, 4)))
    # both uniform over the same extent: identical after resampling
    assert bhattacharyya_distance(a, b) == pytest.approx(0.0, abs=1e-12)


def test_resample_preserves_mass():
    rng = np.random.default_rng(1)
    g = rng.random((6, 9))
    out = resample(g, (4, 3))
    assert out.sum() == pytest.approx(g.sum(), rel=1e-12)


# --- persistence ---------------------------------------------------------------

def test_descriptor_csv_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    g = rng.random((5, 4))
    d = make_descriptor(g, tracker_id=3, v=(123.0, -45.0), t=1.5)
    p = tmp_path / "d.csv"
    write_csv(d, p)
    d2 = read_csv(p)
    assert np.array_equal(d.grid, d2.grid)
    assert d2.tracker_id == 3
    assert d2.velocity == Velocity(123.0, -45.0)
    assert d2.capture_t == 1.5


def test_descriptor_pgm_export(tmp_path):
    from evtrack.render import read_pgm, write_pgm

    d = make_descriptor([[0.0, 1.0], [3.0, 0.0]])
    p = tmp_path / "d.pgm"
    write_pgm(d.grid, p)
    img = read_pgm(p)
    assert img[1, 0] == 255  # max-normalized for display
    assert img[0, 1] == 85


# --- speed independence (end to end) -----------------------------------------

def capture_after_travel(speed_scale, travel_px=120.0):
    """Track the contained corner at a rescaled speed, capture after the same
    travel distance."""
    v = (750.0 * speed_scale, 0.0)
    vn = abs(v[0])
    scene = corner_scene(
        duration=travel_px / vn + 0.05 / speed_scale,
        v=v,
        events_per_pixel=10,
        jitter_us=100.0 / speed_scale,  # same jitter in pixel-traversal units
    )
    stream, _ = generate(scene, seed=11)
    config = TrackerConfig(plan_updates=False, telemetry_stride=0)
    bank = seed_bank([(95.25, 235.25)], [v], config, stream.geometry, 0.0)
    t_cut = travel_px / vn
    sel = stream.times_seconds() <= t_cut
    bank.process_arrays(
        stream.times_seconds()[sel],
        stream.x[sel].astype(np.float64),
        stream.y[sel].astype(np.float64),
    )
    return capture(bank.state(0))


def test_descriptor_speed_independence(warm_kernel):
    """The same contour streamed at full and 0.3x speed yields nearly the
    same descriptor: the decay constant scales with 1/||v||."""
    d_full = capture_after_travel(1.0)
    d_slow = capture_after_travel(0.3)
    assert bhattacharyya_distance(d_full, d_slow) < 0.05
