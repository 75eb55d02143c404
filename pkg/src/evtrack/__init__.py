"""Pure event-based feature detection and tracking.

Events from an event camera are projected along per-feature velocity
hypotheses onto a reference plane; a decaying accumulation map per
hypothesis yields a mean position whose drift feeds back into the velocity
estimate on every event. Converged maps double as Bayesian shape
descriptors. Includes a synthetic scene generator with exact ground truth
and a benchmark harness.
"""

from .decaying_map import DecayingMap, direct_map
from .descriptor import Descriptor, bhattacharyya_distance, capture
from .events import (
    Event,
    EventStream,
    EventStreamError,
    SensorGeometry,
    merge_sorted,
    read_binary,
    read_csv,
    write_binary,
    write_csv,
)
from .metrics import BenchmarkReport, FeatureResult, compare_to_truth
from .projection import (
    Contour,
    Pdf,
    ProjectionHistogram,
    Velocity,
    accumulate,
    bin_projection,
    make_histogram,
    project_event,
    recover_contour,
    threshold_contour,
    to_pdf,
)
from .synth import (
    GroundTruth,
    SceneScript,
    TrajectorySegment,
    diamond_outline,
    fig4_benchmark,
    generate,
    square_outline,
)
from .tracker import (
    Telemetry,
    TrackerBank,
    TrackerConfig,
    TrackerState,
    TrackerStatus,
    detection_ratios,
    gain,
    parse_config,
    seed_bank,
    speed_error,
    velocity_grid,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkReport",
    "Contour",
    "DecayingMap",
    "Descriptor",
    "Event",
    "EventStream",
    "EventStreamError",
    "FeatureResult",
    "GroundTruth",
    "Pdf",
    "ProjectionHistogram",
    "SceneScript",
    "SensorGeometry",
    "Telemetry",
    "TrackerBank",
    "TrackerConfig",
    "TrackerState",
    "TrackerStatus",
    "TrajectorySegment",
    "Velocity",
    "accumulate",
    "bhattacharyya_distance",
    "bin_projection",
    "capture",
    "compare_to_truth",
    "detection_ratios",
    "diamond_outline",
    "direct_map",
    "fig4_benchmark",
    "gain",
    "generate",
    "make_histogram",
    "merge_sorted",
    "parse_config",
    "project_event",
    "read_binary",
    "read_csv",
    "recover_contour",
    "seed_bank",
    "speed_error",
    "square_outline",
    "threshold_contour",
    "to_pdf",
    "velocity_grid",
    "write_binary",
    "write_csv",
]
