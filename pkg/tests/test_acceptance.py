"""Acceptance gate: each criterion prints one PASS/FAIL line with measured
numbers and is enforced at its stated tolerance."""

import math
import time
import tracemalloc

import numpy as np

from evtrack.decaying_map import DecayingMap, direct_map
from evtrack.descriptor import bhattacharyya_distance
from evtrack.events import read_binary, read_csv, write_binary, write_csv
from evtrack.metrics import compare_to_truth
from evtrack.projection import Velocity, recover_contour
from evtrack.synth import TrajectorySegment, fig4_benchmark, generate
from evtrack.tracker import TrackerConfig, TrackerStatus, seed_bank

from conftest import horizontal_square_scene, corner_scene, random_stream
from test_descriptor import capture_after_travel
from test_projection import expected_contour_cells, per_source_binned_spread

V_TH = (530.0, 530.0)
V_TH_N = math.hypot(*V_TH)


def criterion(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------

def test_criterion_1_decaying_map_oracle():
    rng = np.random.default_rng(20240101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(100, 10_001))
        w = int(rng.integers(4, 64))
        h = int(rng.integers(4, 64))
        speed = float(rng.uniform(2.0, 2000.0))
        tau = 1.0 / speed
        cx = rng.integers(0, w, n)
        cy = rng.integers(0, h, n)
        t = np.sort(rng.uniform(0.0, 30.0 * tau, n))
        m = DecayingMap(w, h, tau=tau)
        for i in range(n):
            m.update(int(cx[i]), int(cy[i]), float(t[i]))
        got = m.values()
        want = direct_map(cx, cy, t, tau, float(t[-1]), (h, w))
        nz = want > 0
        rel = np.abs(got[nz] - want[nz]) / want[nz]
        worst = max(worst, float(rel.max()))
        assert np.all(got[~nz] == 0.0)
    wall = time.perf_counter() - t0
    criterion(
        1,
        worst < 1e-9 and wall <= 10.0,
        f"incremental decaying map vs direct evaluation: worst rel err "
        f"{worst:.2e} (< 1e-9) over 100 sequences in {wall:.1f} s (<= 10 s)",
    )


def test_criterion_2_projection_invariance():
    scene = horizontal_square_scene(duration=0.2)
    stream, truth = generate(scene, seed=0)
    spreads = {}
    ok = True
    for s in (1, 4):
        spreads[s] = per_source_binned_spread(stream, truth, Velocity(750.0, 0.0), s)
        ok &= spreads[s] < 1.0 / s + 1e-6
    criterion(
        2,
        ok,
        f"per-source projection spread at v_th: s=1 {spreads[1]:.2e} (< 1), "
        f"s=4 {spreads[4]:.2e} (< 0.25)",
    )


def test_criterion_3_contour_recovery():
    scene = horizontal_square_scene(duration=0.1)  # 75 px travel >= 10 px
    stream, _ = generate(scene, seed=0)
    _, _, c1 = recover_contour(stream, Velocity(750.0, 0.0), t_ref=0.0, pi=0.5)
    exact = c1.cells == expected_contour_cells(scene, 0.0, 1)
    _, _, c4 = recover_contour(stream, Velocity(750.0, 0.0), t_ref=0.0, subpixel_scale=4, pi=0.5)
    cx, cy = c4.centroid()
    gx = float(np.mean([scene.start[0] + dx for dx, _ in scene.contour]))
    gy = float(np.mean([scene.start[1] + dy for _, dy in scene.contour]))
    cerr = math.hypot(cx - gx, cy - gy)
    criterion(
        3,
        exact and cerr < 0.25,
        f"contour at s=1 exact ({len(c1)} cells), s=4 centroid error {cerr:.3f} px (< 0.25)",
    )


def _run_fig4(config, seed=7, segments=None, noise_rate=0.0):
    script, stream, truth = fig4_benchmark(seed=seed, segments=segments, noise_rate=noise_rate)
    positions = [truth.feature_position(f, 0.0) for f in sorted(script.features)]
    bank = seed_bank(positions, None, config, stream.geometry, 0.0)
    t0 = time.perf_counter()
    telemetry = bank.process(stream)
    wall = time.perf_counter() - t0
    return script, stream, truth, bank, telemetry, wall


def test_criterion_4_fig4_convergence():
    # tracking-only protocol: the detection/plan machinery is disabled for
    # the convergence benchmark, as in the reference experiment
    t_begin = time.perf_counter()
    config = TrackerConfig(plan_updates=False, telemetry_stride=2)
    script, stream, truth, bank, telemetry, _ = _run_fig4(config)
    horizon_px = 3.0 * config.R
    worst_conv = 0.0
    worst_b = 0.0
    corners_ok = 0
    details = []
    def corner_is_tracked_content(rows, ci):
        # a corner tracker keeps the corner as its tracked content: the
        # report stays within R/4 of the corner for the whole run (mere box
        # containment also admits trackers surfing the square's passing
        # edges near the corner)
        if len(rows) < 10 or rows[-1, 0] < 0.9 * script.duration:
            return False
        tru = truth.feature_positions(ci, rows[:, 0])
        d = np.hypot(rows[:, 9] - tru[:, 0], rows[:, 10] - tru[:, 1])
        dt = rows[1:, 0] - rows[:-1, 0]
        rep_end = rows[:-1, 9:11] + rows[:-1, 2:4] * dt[:, None]
        tru2 = truth.feature_positions(ci, rows[1:, 0])
        d2 = np.hypot(rep_end[:, 0] - tru2[:, 0], rep_end[:, 1] - tru2[:, 1])
        return max(d.max(), d2.max() if len(d2) else 0.0) <= config.R / 4.0

    for ci in range(4):
        qualified = []
        for k in range(ci * 25, (ci + 1) * 25):
            rows = telemetry.for_tracker(k)
            if not corner_is_tracked_content(rows, ci):
                continue
            verr = np.hypot(rows[:, 2] - V_TH[0], rows[:, 3] - V_TH[1]) / V_TH_N
            conv = np.nonzero(verr < 0.02)[0]
            conv_px = rows[conv[0], 0] * V_TH_N if len(conv) else math.inf
            qualified.append((k, conv_px, rows, conv[0] if len(conv) else None))
        assert qualified, f"corner {ci}: no tracker kept the corner in view"
        all_conv = all(q[1] < horizon_px for q in qualified)
        b_vals = []
        for k, conv_px, rows, ci_row in qualified:
            if ci_row is None:
                continue
            tail = rows[ci_row:]
            w = np.maximum(np.diff(tail[:, 0], append=tail[-1, 0]), 0.0)
            b_vals.append(float(np.average(tail[:, 8], weights=w)) if w.sum() > 0 else float(tail[-1, 8]))
        assert b_vals, f"corner {ci}: no qualified tracker converged"
        worst_conv = max(worst_conv, max(q[1] for q in qualified))
        worst_b = max(worst_b, max(b_vals))
        corners_ok += int(all_conv and max(b_vals) < 0.01)
        details.append(f"c{ci}:{len(qualified)} trk, conv<={max(q[1] for q in qualified):.0f}px")
    wall = time.perf_counter() - t_begin
    criterion(
        4,
        corners_ok == 4 and wall < 60.0,
        f"every corner tracker < 2% within {worst_conv:.0f} px (< 90), "
        f"worst post-convergence B {100 * worst_b:.2f}% (< 1%), "
        f"runtime {wall:.1f} s (< 60); {'; '.join(details)}",
    )


def test_criterion_5_drift_metrics():
    scenes = {
        "translation": dict(),
        "velocity-change": dict(
            segments=[TrajectorySegment(0.0, 530.0, 530.0), TrajectorySegment(0.30, 630.0, 430.0)]
        ),
        "noisy": dict(noise_rate=0.10 * 400 * 3 * V_TH_N),
    }
    config = TrackerConfig(telemetry_stride=2)
    ok = True
    details = []
    for name, kw in scenes.items():
        script, stream, truth, bank, telemetry, _ = _run_fig4(config, **kw)
        report = compare_to_truth(telemetry, truth, bank)
        scene_ok = (
            len(report.features) == 4
            and report.mean_eps_over_L <= 0.02
            and report.sigma_eps_over_L <= 0.015
        )
        if name == "velocity-change":
            fired = all(r.plan_updates >= 1 for r in report.features)
            continuous = all(r.max_plan_jump < 1.0 for r in report.features)
            scene_ok &= fired and continuous
            details.append(
                f"{name}: e/L {100 * report.mean_eps_over_L:.2f}% "
                f"sigma {100 * report.sigma_eps_over_L:.2f}%, "
                f"plan updates {[r.plan_updates for r in report.features]}, "
                f"max jump {max(r.max_plan_jump for r in report.features):.2e} px"
            )
        else:
            details.append(
                f"{name}: e/L {100 * report.mean_eps_over_L:.2f}% "
                f"sigma {100 * report.sigma_eps_over_L:.2f}%"
            )
        ok &= scene_ok
    criterion(5, ok, "offset-compensated drift <= 2% (sigma <= 1.5%); " + "; ".join(details))


def test_criterion_6_gain_law():
    dxs = [15.0, 30.0, 60.0]
    disps = []
    for dx in dxs:
        scene = corner_scene(duration=0.45, events_per_pixel=10, jitter_us=500.0)
        stream, _ = generate(scene, seed=0)
        config = TrackerConfig(dx=dx, plan_updates=False, telemetry_stride=1)
        bank = seed_bank([(95.25, 235.25)], [(900.0, 100.0)], config, stream.geometry, 0.0)
        telemetry = bank.process(stream)
        rows = telemetry.rows
        verr = np.hypot(rows[:, 2] - 750.0, rows[:, 3]) / 750.0
        conv = np.nonzero(verr < 0.02)[0]
        assert len(conv), f"no convergence at dx={dx}"
        disps.append(rows[conv[0], 0] * 750.0)
    A = np.vstack([dxs, np.ones(3)]).T
    coef, *_ = np.linalg.lstsq(A, disps, rcond=None)
    fit = A @ coef
    ss_res = float(np.sum((disps - fit) ** 2))
    ss_tot = float(np.sum((disps - np.mean(disps)) ** 2))
    r2 = 1.0 - ss_res / ss_tot
    criterion(
        6,
        r2 > 0.9 and coef[0] > 0,
        f"convergence displacement {[round(d, 1) for d in disps]} px over dx {dxs}: "
        f"linear fit R^2 {r2:.3f} (> 0.9), slope {coef[0]:.2f} px per dx unit",
    )


def test_criterion_7_descriptor_speed_independence(warm_kernel):
    d_full = capture_after_travel(1.0)
    d_slow = capture_after_travel(0.3)
    dist = bhattacharyya_distance(d_full, d_slow)
    self_dist = bhattacharyya_distance(d_full, d_full)
    criterion(
        7,
        dist < 0.05 and self_dist == 0.0,
        f"descriptor distance across 1.0x/0.3x speeds {dist:.4f} (< 0.05), "
        f"identical-descriptor distance {self_dist} (== 0)",
    )


def test_criterion_8_detection_lifecycle(warm_kernel):
    from evtrack.synth import SceneScript

    # (a) event-free window: idle within 5 tau, A -> 0. Feeding only events
    # up to just past 5 tau shows the transition happens by then.
    scene = horizontal_square_scene(duration=0.1, jitter_us=100.0)
    stream, _ = generate(scene, seed=0)
    config = TrackerConfig(telemetry_stride=1)
    seed_v = (750.0, 0.0)
    tau = 1.0 / 750.0
    bank = seed_bank([(550.0, 100.0)], [seed_v], config, stream.geometry, 0.0)
    t_s = stream.times_seconds()
    cut = t_s <= 5.5 * tau
    bank.process_arrays(t_s[cut], stream.x[cut].astype(float), stream.y[cut].astype(float))
    st = bank.state(0)
    a_idle, _ = bank.detection_metrics(0)
    idle_ok = st.status == TrackerStatus.IDLE and a_idle == 0.0

    # (b) straight edge through the window: A in [0.5, 2]
    edge = SceneScript(
        contour=[(0, dy) for dy in range(-40, 41)],
        start=(60.0, 240.0),
        segments=[TrajectorySegment(0.0, 500.0, 0.0)],
        duration=0.3,
        events_per_pixel=1,
        jitter_us=100.0,
    )
    estream, _ = generate(edge, seed=3)
    ebank = seed_bank([(60.0, 240.0)], [(500.0, 0.0)], config, estream.geometry, 0.0)
    etel = ebank.process(estream)
    # steady A from the telemetry: S decays between corrections, so its time
    # average is reconstructed by integrating from each logged value
    rows = etel.rows[etel.rows[:, 0] > 0.1]
    tau_e = 1.0 / 500.0
    dt = np.diff(rows[:, 0])
    s_avg = float(
        np.sum(rows[:-1, 6] * tau_e * (1.0 - np.exp(-dt / tau_e))) / (rows[-1, 0] - rows[0, 0])
    )
    a_edge = s_avg / config.R
    edge_ok = 0.5 < a_edge < 2.0
    criterion(
        8,
        idle_ok and edge_ok,
        f"event-free window: status {st.status.name}, A {a_idle} (-> 0), "
        f"idle within 5 tau; straight edge A {a_edge:.2f} (in [0.5, 2])",
    )


def test_criterion_9_throughput(warm_kernel, tmp_path, capsys):
    from evtrack.cli import EXIT_OK, cli
    from evtrack.synth import write_script

    # a single labeled feature makes bench seed exactly one 5x5 bank
    script, stream, truth = fig4_benchmark(seed=7)
    solo = type(script)(
        contour=script.contour,
        start=script.start,
        segments=script.segments,
        duration=script.duration,
        events_per_pixel=script.events_per_pixel,
        jitter_us=script.jitter_us,
        features={0: script.features[0]},
    )
    script_p = tmp_path / "solo.txt"
    write_script(solo, script_p)
    rc = cli(["bench", "--script", str(script_p), "--seed", "7", "--check-alloc"])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    through_line = next(l for l in out.splitlines() if l.startswith("throughput:"))
    throughput = float(through_line.split("=")[1].split()[0].replace(",", ""))
    alloc_line = next(l for l in out.splitlines() if l.startswith("allocation:"))
    per_event = float(alloc_line.split(",")[1].split()[0])

    config = TrackerConfig(telemetry_stride=0)
    bank = seed_bank([truth.feature_position(0, 0.0)], None, config, stream.geometry, 0.0)
    n_trackers = bank.n_trackers
    criterion(
        9,
        n_trackers == 25 and throughput >= 1e6 and per_event < 0.01,
        f"bench: {throughput:,.0f} events/s through a {n_trackers}-tracker bank (>= 1e6), "
        f"{per_event:.4f} B allocated per event in the hot loop (~0)",
    )


def test_criterion_10_format_round_trip(tmp_path):
    rng = np.random.default_rng(55)
    big = random_stream(rng, 1_000_000)
    p1 = tmp_path / "big.evt"
    p2 = tmp_path / "big2.evt"
    write_binary(big, p1)
    back = read_binary(p1)
    identity = back == big
    write_binary(back, p2)
    byte_identical = p1.read_bytes() == p2.read_bytes()

    small = random_stream(rng, 10_000)
    pc = tmp_path / "small.csv"
    pb = tmp_path / "small.evt"
    write_csv(small, pc)
    write_binary(small, pb)
    cross = (read_csv(pc) == small) and (read_binary(pb) == read_csv(pc))
    criterion(
        10,
        identity and byte_identical and cross,
        f"binary round trip on {len(big):,} fuzzed events: identity {identity}, "
        f"rewrite byte-identical {byte_identical}, CSV/binary cross-consistency {cross}",
    )
