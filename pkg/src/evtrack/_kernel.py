"""Per-event hot loop over the tracker bank.

Plain-Python function compiled with numba when available; the fallback is
the same function object, so both paths share one set of semantics. The
loop performs no allocation: all state lives in preallocated arrays owned
by the bank, and telemetry lands in fixed-size buffers. When a buffer
fills, the kernel returns early and the caller flushes and resumes.

Status codes (status array): 0 warming, 1 tracking, 2 lost, 3 idle.
Return codes: 0 done, 1 buffer full (resume at returned index),
2 time regression at returned event index.
"""

from __future__ import annotations

import math

STATUS_WARMING = 0
STATUS_TRACKING = 1
STATUS_LOST = 2
STATUS_IDLE = 3

RET_DONE = 0
RET_BUFFER_FULL = 1
RET_TIME_REGRESSION = 2

TELEMETRY_COLUMNS = ("t_us", "tracker_id", "vx", "vy", "ex", "ey", "S", "A", "B", "cx", "cy", "status")

_TIME_TOL = 1e-6


def _run(
    # event arrays (float64 seconds / pixel coords), start index
    t_s, x_f, y_f, start_i,
    # per-tracker state
    status, t0, vx, vy, tau, cx, cy,
    S, Mx, My, ledger, last_t, ref_due, refx, refy,
    ex, ey, last_ok_t, b_ok_since, b_bad_since, detected, corr_count,
    # per-tracker grids
    maps, map_anchor,
    # scalar config
    R, sub, dx, k_plan, n_plan_px, b_detect, b_lost, a_idle, v_clamp, gate_px,
    plan_enabled, telem_stride,
    # output buffers and fill counts
    telem, telem_n, plan_log, plan_n,
):
    n_ev = t_s.shape[0]
    n_tr = status.shape[0]
    grid_n = maps.shape[1]
    half = R * 0.5
    telem_cap = telem.shape[0]
    plan_cap = plan_log.shape[0]
    tn = telem_n
    pn = plan_n
    idle_horizon = 5.0

    for i in range(start_i, n_ev):
        if tn + n_tr > telem_cap or pn + n_tr > plan_cap:
            return i, tn, pn, RET_BUFFER_FULL, 0
        t = t_s[i]
        x = x_f[i]
        y = y_f[i]
        for k in range(n_tr):
            if status[k] >= STATUS_LOST:
                continue
            # idle: the decayed window sum has not cleared a_idle * R for 5 tau
            if t - last_ok_t[k] > idle_horizon * tau[k]:
                status[k] = STATUS_IDLE
                continue
            dt0 = t - t0[k]
            px = x - vx[k] * dt0 - (cx[k] - half)
            py = y - vy[k] * dt0 - (cy[k] - half)
            cix = int(math.floor(px * sub + 0.5))
            ciy = int(math.floor(py * sub + 0.5))
            if cix < 0 or cix >= grid_n or ciy < 0 or ciy >= grid_n:
                continue
            dt = t - last_t[k]
            if dt < -_TIME_TOL:
                return i, tn, pn, RET_TIME_REGRESSION, k
            if dt > 0.0:
                decay = math.exp(-dt / tau[k])
                ledger[k] += dt / tau[k]
                last_t[k] = t
            else:
                decay = 1.0
            s_new = S[k] * decay + 1.0
            S[k] = s_new
            Mx[k] = Mx[k] * decay + cix
            My[k] = My[k] * decay + ciy
            g = ledger[k]
            maps[k, ciy, cix] = maps[k, ciy, cix] * math.exp(-(g - map_anchor[k, ciy, cix])) + 1.0
            map_anchor[k, ciy, cix] = g
            if s_new >= a_idle * R:
                last_ok_t[k] = t
            # mean in window coordinates (pixels from the window corner)
            mx = (Mx[k] / s_new) / sub
            my = (My[k] / s_new) / sub
            if status[k] == STATUS_WARMING:
                # strict: a burst exactly at the warm-up boundary accumulates
                # fully and the next event takes the reference
                if t > ref_due[k]:
                    refx[k] = mx
                    refy[k] = my
                    status[k] = STATUS_TRACKING
                continue
            if dt0 <= 0.0:
                continue
            # the drift estimate divides by the observation span; hold
            # corrections until the span covers a few pixels of travel,
            # the same validity condition the density map needs
            if dt0 * math.hypot(vx[k], vy[k]) < gate_px:
                continue
            epsx = (mx - refx[k]) / dt0
            epsy = (my - refy[k]) / dt0
            ex[k] = epsx
            ey[k] = epsy
            lam = 1.0 / (s_new * dx)
            vx[k] += lam * epsx
            vy[k] += lam * epsy
            vn = math.hypot(vx[k], vy[k])
            tau[k] = 1.0 / max(vn, v_clamp)
            en = math.hypot(epsx, epsy)
            b = en / vn if vn >= v_clamp else math.inf
            # detection: B below b_detect sustained over one tau
            if b < b_detect:
                if b_ok_since[k] != b_ok_since[k]:  # NaN check
                    b_ok_since[k] = t
                elif t - b_ok_since[k] >= tau[k]:
                    detected[k] = 1
            else:
                b_ok_since[k] = math.nan
            # lost: only a previously detected feature can be lost
            if detected[k] == 1 and b > b_lost:
                if b_bad_since[k] != b_bad_since[k]:
                    b_bad_since[k] = t
                elif t - b_bad_since[k] >= tau[k]:
                    status[k] = STATUS_LOST
                    continue
            else:
                b_bad_since[k] = math.nan
            corr_count[k] += 1
            if telem_stride > 0 and corr_count[k] % telem_stride == 0:
                telem[tn, 0] = t
                telem[tn, 1] = k
                telem[tn, 2] = vx[k]
                telem[tn, 3] = vy[k]
                telem[tn, 4] = epsx
                telem[tn, 5] = epsy
                telem[tn, 6] = s_new
                telem[tn, 7] = s_new / R
                telem[tn, 8] = b
                telem[tn, 9] = cx[k] + vx[k] * dt0
                telem[tn, 10] = cy[k] + vy[k] * dt0
                telem[tn, 11] = status[k]
                tn += 1
            # projection plan update: stable speed and enough displacement
            if plan_enabled == 1 and en <= k_plan * vn and dt0 > n_plan_px / vn:
                t0_new = t - 1.0 / vn
                shift = t0_new - t0[k]
                rep_x = cx[k] + vx[k] * dt0
                rep_y = cy[k] + vy[k] * dt0
                cx[k] += vx[k] * shift
                cy[k] += vy[k] * shift
                t0[k] = t0_new
                refx[k] = mx
                refy[k] = my
                jump_x = (cx[k] + vx[k] * (t - t0_new)) - rep_x
                jump_y = (cy[k] + vy[k] * (t - t0_new)) - rep_y
                plan_log[pn, 0] = t
                plan_log[pn, 1] = k
                plan_log[pn, 2] = math.hypot(jump_x, jump_y)
                pn += 1
    return n_ev, tn, pn, RET_DONE, 0


try:
    import numba

    run_events = numba.njit(cache=True, fastmath=False)(_run)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    run_events = _run
    HAVE_NUMBA = False
