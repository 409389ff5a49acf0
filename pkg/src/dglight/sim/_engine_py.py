"""Pure-Python tick kernel.

Reference implementation of one movement tick; the Cython kernel in
_engine_cy.pyx mirrors this code line for line and must produce bit-identical
results (same float64 operations in the same order).

Per lane (ascending index), vehicles advance front to back against the
leader's pre-tick position, so the update order inside a tick cannot change
the outcome.  Only the front vehicle of a lane may cross the stop line, and a
vehicle crosses at most one lane boundary per tick.
"""

from __future__ import annotations

HUGE = 1e18


def advance_tick(
    tick, dt, v_free, min_gap, speed_eps,
    pos, speed, wait,
    vlane, vrpos, vmoved,
    veh_route, routes_flat, route_off,
    lane_len, lane_open, lane_to_real,
    lane_q, lane_head, lane_cnt,
    scratch, exited_buf,
):
    """Advance every active vehicle by one tick.

    Returns (number of vehicles that left the network, queued-vehicle count).
    Exited vehicle ids are written to exited_buf[:n_exited]; their lane is set
    to -1 and remaining bookkeeping is left to the caller.
    """
    n_lanes = lane_len.shape[0]
    cap = lane_q.shape[1]
    n_exited = 0
    queued = 0

    for li in range(n_lanes):
        cnt0 = lane_cnt[li]
        if cnt0 == 0:
            continue
        head0 = lane_head[li]
        for j in range(cnt0):
            scratch[j] = lane_q[li, (head0 + j) % cap]
        llen = lane_len[li]
        is_open = lane_open[li]
        leader_old = HUGE

        for j in range(cnt0):
            vid = scratch[j]
            if vmoved[vid] == tick:
                continue
            old = pos[vid]
            limit = old + v_free * dt
            if leader_old != HUGE and limit > leader_old - min_gap:
                limit = leader_old - min_gap
            handled = False

            if limit > llen and is_open:
                r = veh_route[vid]
                rp = vrpos[vid]
                roff = route_off[r]
                rlen = route_off[r + 1] - roff
                if rp == rlen - 1:
                    # end of route: leave the network
                    exited_buf[n_exited] = vid
                    n_exited += 1
                    lane_head[li] = (lane_head[li] + 1) % cap
                    lane_cnt[li] -= 1
                    pos[vid] = llen
                    speed[vid] = v_free
                    vlane[vid] = -1
                    handled = True
                else:
                    nl = routes_flat[roff + rp + 1]
                    if lane_cnt[nl] == 0:
                        entry_limit = HUGE
                    else:
                        tail = lane_q[nl, (lane_head[nl] + lane_cnt[nl] - 1) % cap]
                        entry_limit = pos[tail] - min_gap
                    if entry_limit >= 0.0:
                        newp = limit - llen
                        nlen = lane_len[nl]
                        if newp > nlen:
                            newp = nlen
                        if newp > entry_limit:
                            newp = entry_limit
                        lane_head[li] = (lane_head[li] + 1) % cap
                        lane_cnt[li] -= 1
                        lane_q[nl, (lane_head[nl] + lane_cnt[nl]) % cap] = vid
                        lane_cnt[nl] += 1
                        vlane[vid] = nl
                        vrpos[vid] = rp + 1
                        speed[vid] = (llen - old + newp) / dt
                        pos[vid] = newp
                        handled = True
                    # else: next lane has no headroom; fall through and park

            if not handled:
                newp = limit
                if newp > llen:
                    newp = llen
                pos[vid] = newp
                speed[vid] = (newp - old) / dt

            vmoved[vid] = tick
            leader_old = old

            cur = vlane[vid]
            if cur >= 0 and lane_to_real[cur] and speed[vid] < speed_eps:
                wait[vid] += dt
                queued += 1

    return n_exited, queued
