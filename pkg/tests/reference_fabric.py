"""Plain-dict switch model used as a behavioral oracle in tests.

Implements the per-slot semantics as literally as possible: no bitmasks,
no readiness caches, no index flattening.  The production fabric and the
compiled block engine must reproduce its departure stream exactly, slot
for slot.
"""

from collections import deque


class OracleFabric:
    def __init__(self, dims, cb_capacity=None):
        self.dims = dims
        self.cap = cb_capacity
        self.slot = 0
        self.vimoq = {}  # (r, i, j, d) -> deque of cell dicts
        self.cb = {}  # (r, j, d, i, s) -> deque
        self.expected = {}  # (v, u) -> next in-order tag
        self.rr_out = {}  # v -> round-robin pointer over flows
        self.vq_rr = {}  # (r, p, j) -> round-robin pointer over d
        self.seq = {}  # (u, v) -> next tag to assign
        self.injected = 0
        self.departed = 0

    def step(self, arrivals):
        n, k, m, N = self.dims.n, self.dims.k, self.dims.m, self.dims.N
        t = self.slot
        # inject + IM traversal
        seen = set()
        for u, v in arrivals:
            assert 0 <= u < N and 0 <= v < N and u not in seen
            seen.add(u)
            i, s = divmod(u, k)
            j, d = divmod(v, m)
            tag = self.seq.get((u, v), 1)
            self.seq[(u, v)] = tag + 1
            r = (s + t) % m
            cell = {"seq": tag, "arr": t, "s": s, "enq": t}
            self.vimoq.setdefault((r, i, j, d), deque()).append(cell)
            self.injected += 1
        # CM traversal: per link, first eligible head round-robin over d
        for r in range(m):
            for p in range(k):
                j = (p - t + r) % k
                ptr = self.vq_rr.get((r, p, j), 0)
                for off in range(n):
                    d = (ptr + off) % n
                    q = self.vimoq.get((r, p, j, d))
                    if not q:
                        continue
                    cell = q[0]
                    if cell["enq"] >= t:
                        continue
                    s = cell["s"]
                    cbq = self.cb.get((r, j, d, p, s))
                    if self.cap is not None and cbq is not None and len(cbq) >= self.cap:
                        continue
                    q.popleft()
                    self.vq_rr[(r, p, j)] = (d + 1) % n
                    moved = {"seq": cell["seq"], "arr": cell["arr"], "enq": t}
                    self.cb.setdefault((r, j, d, p, s), deque()).append(moved)
                    break
        # output arbitration: first flow (round-robin) whose expected cell
        # heads one of its CBs and is old enough
        departures = []
        for v in range(N):
            j, d = divmod(v, m)
            ptr = self.rr_out.get(v, 0)
            for off in range(N):
                u = (ptr + off) % N
                i, s = divmod(u, k)
                want = self.expected.get((v, u), 1)
                hit = None
                for r in range(m):
                    q = self.cb.get((r, j, d, i, s))
                    if q and q[0]["seq"] == want and q[0]["enq"] < t:
                        hit = q
                        break
                if hit is None:
                    continue
                cell = hit.popleft()
                departures.append((u, v, cell["seq"], cell["arr"]))
                self.expected[(v, u)] = want + 1
                self.rr_out[v] = (u + 1) % N
                self.departed += 1
                break
        self.slot += 1
        return departures
