"""Compiled block-stepping engine for long simulation runs.

Semantics are identical to fabric.TridentFabric (the readable reference
implementation); the equivalence is pinned by property tests that compare
departure streams slot for slot.  Here the whole per-slot pipeline runs
inside one numba kernel over flat integer arrays, stepping a block of
slots per call, so the Python-level cost is a handful of calls per few
thousand slots.

Cells live in an index pool with intrusive single links; every queue
(VIMOQ or crosspoint buffer) is a (head, tail, length) triple over that
pool.  The kernel returns early when the pool runs out of free cells and
the wrapper grows the pool and resumes mid-block.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .geometry import SwitchDims
from .metrics import RunMetrics

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


# stats slots
_FREE_TOP = 0
_INJECTED = 1
_DEPARTED = 2
_MAX_VQ = 3
_MAX_CB = 4


@njit(cache=True)
def _run_block(
    t0,
    width,
    k,
    m,
    n,
    N,
    cap,  # 0 = unbounded
    dest,  # (N, width), destination per input per slot, -1 = idle
    c_seq,
    c_arr,
    c_enq,
    c_s,
    c_next,
    free_stack,
    stats,
    seq_next,
    v_head,
    v_tail,
    v_len,
    vq_rr,
    b_head,
    b_tail,
    b_len,
    expected,
    ready,
    ready_r,
    ready_cnt,
    rr_out,
    pend_v,
    pend_u,
    pend_r,
    pend_seq,
    nd0,
    dep_slot,
    dep_u,
    dep_v,
    dep_seq,
    dep_arr,
    occupancy,  # (width,) when collect_occ else unused
    collect_occ,
):
    nd = nd0
    for w in range(width):
        t = t0 + w
        if stats[_FREE_TOP] < N:
            return nd, w  # pool exhausted; wrapper grows and resumes
        # inject + IM traversal
        t_mod = t % m
        na = 0
        for u in range(N):
            v = dest[u, w]
            if v < 0:
                continue
            na += 1
            s = u % k
            i = u // k
            jj = v // m
            d = v % m
            uv = u * N + v
            seq = seq_next[uv]
            seq_next[uv] = seq + 1
            top = stats[_FREE_TOP] - 1
            stats[_FREE_TOP] = top
            c = free_stack[top]
            c_seq[c] = seq
            c_arr[c] = t
            c_enq[c] = t
            c_s[c] = s
            c_next[c] = -1
            r = s + t_mod
            if r >= m:
                r -= m
            q = ((r * k + i) * k + jj) * n + d
            tail = v_tail[q]
            if tail == -1:
                v_head[q] = c
            else:
                c_next[tail] = c
            v_tail[q] = c
            vl = v_len[q] + 1
            v_len[q] = vl
            if vl > stats[_MAX_VQ]:
                stats[_MAX_VQ] = vl
        stats[_INJECTED] += na
        # CM traversal: one eligible head per link, round-robin over d
        ph = t % k
        n_pend = 0
        for r in range(m):
            for p in range(k):
                j = (p - ph + r) % k
                g = (r * k + p) * k + j
                qbase = g * n
                ptr = vq_rr[g]
                for off in range(n):
                    d = ptr + off
                    if d >= n:
                        d -= n
                    c = v_head[qbase + d]
                    if c == -1:
                        continue
                    if c_enq[c] >= t:
                        continue  # enqueued this slot
                    s = c_s[c]
                    u = p * k + s
                    v = j * m + d
                    fm = v * N + u
                    key = fm * k + r
                    if cap > 0 and b_len[key] >= cap:
                        continue  # credit gate: CB full
                    nxt = c_next[c]
                    v_head[qbase + d] = nxt
                    if nxt == -1:
                        v_tail[qbase + d] = -1
                    v_len[qbase + d] -= 1
                    vq_rr[g] = d + 1 if d + 1 < n else 0
                    c_next[c] = -1
                    c_enq[c] = t
                    btail = b_tail[key]
                    if btail == -1:
                        b_head[key] = c
                    else:
                        c_next[btail] = c
                    b_tail[key] = c
                    bl = b_len[key] + 1
                    b_len[key] = bl
                    if bl > stats[_MAX_CB]:
                        stats[_MAX_CB] = bl
                    pend_v[n_pend] = v
                    pend_u[n_pend] = u
                    pend_r[n_pend] = r
                    pend_seq[n_pend] = c_seq[c]
                    n_pend += 1
                    break
        # output arbitration: first ready flow from the round-robin pointer
        for v in range(N):
            if ready_cnt[v] == 0:
                continue
            ptr = rr_out[v]
            vN = v * N
            for off in range(N):
                u = ptr + off
                if u >= N:
                    u -= N
                fm = vN + u
                if ready[fm] == 0:
                    continue
                key = fm * k + ready_r[fm]
                c = b_head[key]
                nxt = c_next[c]
                b_head[key] = nxt
                if nxt == -1:
                    b_tail[key] = -1
                b_len[key] -= 1
                seq = c_seq[c]
                dep_slot[nd] = t
                dep_u[nd] = u
                dep_v[nd] = v
                dep_seq[nd] = seq
                dep_arr[nd] = c_arr[c]
                nd += 1
                stats[_DEPARTED] += 1
                top = stats[_FREE_TOP]
                free_stack[top] = c
                stats[_FREE_TOP] = top + 1
                want = seq + 1
                expected[fm] = want
                rr_out[v] = u + 1 if u + 1 < N else 0
                ready[fm] = 0
                ready_cnt[v] -= 1
                # re-arm if the next-expected cell already heads a CB
                base = fm * k
                for r2 in range(k):
                    h = b_head[base + r2]
                    if h != -1 and c_seq[h] == want:
                        if c_enq[h] < t:
                            ready[fm] = 1
                            ready_r[fm] = r2
                            ready_cnt[v] += 1
                        break
                break
        # arm flows whose cells reached a CB this slot (visible next slot)
        for idx in range(n_pend):
            v = pend_v[idx]
            fm = v * N + pend_u[idx]
            if expected[fm] == pend_seq[idx] and ready[fm] == 0:
                ready[fm] = 1
                ready_r[fm] = pend_r[idx]
                ready_cnt[v] += 1
        if collect_occ:
            occupancy[w] = stats[_INJECTED] - stats[_DEPARTED]
    return nd, width


@njit(cache=True)
def _metrics_block(dep_slot, dep_u, dep_v, dep_seq, dep_arr, N, w0, w1, last_seq, hist, acc):
    # acc: [violations, delivered, delay_sum, max_delay, total]
    for idx in range(dep_slot.size):
        fm = dep_v[idx] * N + dep_u[idx]
        seq = dep_seq[idx]
        if seq <= last_seq[fm]:
            acc[0] += 1
        last_seq[fm] = seq
        arr = dep_arr[idx]
        if w0 <= arr < w1:
            delay = dep_slot[idx] - arr
            acc[1] += 1
            acc[2] += delay
            hist[delay] += 1
            if delay > acc[3]:
                acc[3] = delay
    acc[4] += dep_slot.size


class BlockEngine:
    """Array-state switch stepped one block of slots at a time.

    Behaviour matches TridentFabric exactly; use the reference class for
    slot-by-slot inspection and this engine for throughput/delay runs.
    """

    def __init__(self, dims: SwitchDims, cb_capacity: Optional[int] = None):
        if not HAVE_NUMBA:
            raise RuntimeError("BlockEngine requires numba; use TridentFabric instead")
        if cb_capacity is not None and cb_capacity < 1:
            raise ValueError(f"cb_capacity must be >= 1 or None, got {cb_capacity}")
        self.dims = dims
        self.cb_capacity = cb_capacity
        n, k, m, N = dims.n, dims.k, dims.m, dims.N
        self.slot = 0
        self._cap = 0 if cb_capacity is None else cb_capacity
        pool = max(4 * N, 1 << 12)
        self._pool = pool
        self._c_seq = np.zeros(pool, np.int64)
        self._c_arr = np.zeros(pool, np.int64)
        self._c_enq = np.zeros(pool, np.int64)
        self._c_s = np.zeros(pool, np.int64)
        self._c_next = np.full(pool, -1, np.int64)
        self._free = np.arange(pool - 1, -1, -1, np.int64)  # stack, top at end
        self._stats = np.zeros(8, np.int64)
        self._stats[_FREE_TOP] = pool
        self._seq_next = np.ones(N * N, np.int64)
        self._v_head = np.full(N * N, -1, np.int64)
        self._v_tail = np.full(N * N, -1, np.int64)
        self._v_len = np.zeros(N * N, np.int64)
        self._vq_rr = np.zeros(m * k * k, np.int64)
        self._b_head = np.full(N * N * k, -1, np.int64)
        self._b_tail = np.full(N * N * k, -1, np.int64)
        self._b_len = np.zeros(N * N * k, np.int64)
        self._expected = np.ones(N * N, np.int64)
        self._ready = np.zeros(N * N, np.int64)
        self._ready_r = np.full(N * N, -1, np.int64)
        self._ready_cnt = np.zeros(N, np.int64)
        self._rr_out = np.zeros(N, np.int64)
        self._pend_v = np.zeros(N, np.int64)
        self._pend_u = np.zeros(N, np.int64)
        self._pend_r = np.zeros(N, np.int64)
        self._pend_seq = np.zeros(N, np.int64)

    def _grow_pool(self) -> None:
        old = self._pool
        new = old * 2
        for name in ("_c_seq", "_c_arr", "_c_enq", "_c_s"):
            arr = np.zeros(new, np.int64)
            arr[:old] = getattr(self, name)
            setattr(self, name, arr)
        nxt = np.full(new, -1, np.int64)
        nxt[:old] = self._c_next
        self._c_next = nxt
        free = np.zeros(new, np.int64)
        top = int(self._stats[_FREE_TOP])
        free[:top] = self._free[:top]
        free[top : top + old] = np.arange(new - 1, old - 1, -1, np.int64)
        self._free = free
        self._stats[_FREE_TOP] = top + old
        self._pool = new

    def run_block(self, dest_block: np.ndarray, occupancy_out: Optional[np.ndarray] = None):
        """Advance one slot per column of dest_block; return departure arrays.

        Returns (slots, u, v, seq, arrival) views valid until the next call.
        occupancy_out, when given, receives the post-slot resident count per
        column.
        """
        dims = self.dims
        N = dims.N
        width = dest_block.shape[1]
        need = N * width
        if not hasattr(self, "_dep_slot") or self._dep_slot.size < need:
            self._dep_slot = np.zeros(need, np.int64)
            self._dep_u = np.zeros(need, np.int64)
            self._dep_v = np.zeros(need, np.int64)
            self._dep_seq = np.zeros(need, np.int64)
            self._dep_arr = np.zeros(need, np.int64)
        collect = occupancy_out is not None
        occ = occupancy_out if collect else np.zeros(1, np.int64)
        nd = 0
        done = 0
        while done < width:
            nd, did = _run_block(
                self.slot,
                width - done,
                dims.k,
                dims.m,
                dims.n,
                N,
                self._cap,
                dest_block[:, done:],
                self._c_seq,
                self._c_arr,
                self._c_enq,
                self._c_s,
                self._c_next,
                self._free,
                self._stats,
                self._seq_next,
                self._v_head,
                self._v_tail,
                self._v_len,
                self._vq_rr,
                self._b_head,
                self._b_tail,
                self._b_len,
                self._expected,
                self._ready,
                self._ready_r,
                self._ready_cnt,
                self._rr_out,
                self._pend_v,
                self._pend_u,
                self._pend_r,
                self._pend_seq,
                nd,
                self._dep_slot,
                self._dep_u,
                self._dep_v,
                self._dep_seq,
                self._dep_arr,
                occ[done:] if collect else occ,
                collect,
            )
            done += did
            self.slot += did
            if done < width:
                self._grow_pool()
        return (
            self._dep_slot[:nd],
            self._dep_u[:nd],
            self._dep_v[:nd],
            self._dep_seq[:nd],
            self._dep_arr[:nd],
        )

    @property
    def injected(self) -> int:
        return int(self._stats[_INJECTED])

    @property
    def departed(self) -> int:
        return int(self._stats[_DEPARTED])

    @property
    def resident_cells(self) -> int:
        return self.injected - self.departed

    @property
    def max_vimoq_occ(self) -> int:
        return int(self._stats[_MAX_VQ])

    @property
    def max_cb_occ(self) -> int:
        return int(self._stats[_MAX_CB])


class BlockRecorder:
    """Array-path counterpart of metrics.DepartureRecorder.

    Windowed streaming only; finalize() returns the same RunMetrics shape.
    delay_bound must exceed any possible sojourn (run length + drain).
    """

    def __init__(self, n_ports: int, window: tuple[int, int], delay_bound: int):
        self.n_ports = n_ports
        self.window = window
        self._last_seq = np.zeros(n_ports * n_ports, np.int64)
        self._hist = np.zeros(delay_bound + 1, np.int64)
        self._acc = np.zeros(5, np.int64)
        self._acc[3] = -1

    def record_block(self, dep_slot, dep_u, dep_v, dep_seq, dep_arr) -> None:
        _metrics_block(
            dep_slot,
            dep_u,
            dep_v,
            dep_seq,
            dep_arr,
            self.n_ports,
            self.window[0],
            self.window[1],
            self._last_seq,
            self._hist,
            self._acc,
        )

    @property
    def violations(self) -> int:
        return int(self._acc[0])

    @property
    def delivered_in_window(self) -> int:
        return int(self._acc[1])

    def finalize(
        self,
        warmup_slots: int,
        measure_slots: int,
        *,
        offered_cells: int,
        max_vimoq_occ: int = 0,
        max_cb_occ: int = 0,
    ) -> RunMetrics:
        if measure_slots <= 0:
            raise ValueError(f"measurement window must be nonempty, got {measure_slots} slots")
        if self.window != (warmup_slots, warmup_slots + measure_slots):
            raise ValueError(
                f"finalize window {(warmup_slots, warmup_slots + measure_slots)} "
                f"differs from streaming window {self.window}"
            )
        delivered = int(self._acc[1])
        if delivered:
            rank = -(-99 * delivered // 100)
            cum = np.cumsum(self._hist)
            p99 = int(np.searchsorted(cum, rank))
            mean = float(self._acc[2]) / delivered
            max_delay = int(self._acc[3])
        else:
            p99 = None
            mean = None
            max_delay = None
        return RunMetrics(
            offered_cells=offered_cells,
            delivered_cells=delivered,
            throughput=(delivered / offered_cells) if offered_cells else None,
            mean_delay=mean,
            p99_delay=p99,
            max_delay=max_delay,
            max_vimoq_occ=max_vimoq_occ,
            max_cb_occ=max_cb_occ,
            violations=int(self._acc[0]),
        )
