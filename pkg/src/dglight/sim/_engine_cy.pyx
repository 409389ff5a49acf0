# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled tick kernel; a line-for-line twin of _engine_py.advance_tick.

Both kernels perform the same float64 operations in the same order, so the
backends produce bit-identical trajectories.
"""

cdef double HUGE = 1e18


def advance_tick(
    int tick, double dt, double v_free, double min_gap, double speed_eps,
    double[::1] pos, double[::1] speed, double[::1] wait,
    int[::1] vlane, int[::1] vrpos, int[::1] vmoved,
    int[::1] veh_route, int[::1] routes_flat, int[::1] route_off,
    double[::1] lane_len, unsigned char[::1] lane_open, unsigned char[::1] lane_to_real,
    int[:, ::1] lane_q, int[::1] lane_head, int[::1] lane_cnt,
    int[::1] scratch, int[::1] exited_buf,
):
    cdef int n_lanes = lane_len.shape[0]
    cdef int cap = lane_q.shape[1]
    cdef int n_exited = 0
    cdef int queued = 0
    cdef int li, cnt0, head0, j, vid, r, rp, roff, rlen, nl, tail, cur
    cdef double llen, leader_old, old, limit, entry_limit, newp, nlen
    cdef unsigned char is_open
    cdef bint handled

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
