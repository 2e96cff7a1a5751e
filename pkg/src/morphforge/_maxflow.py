"""Dinic max-flow on sparse graphs with float capacities.

Small, dependency-free solver sized for polar seam grids (a few thousand
nodes). Capacities may be math.inf for hard source/sink attachments.
"""

from __future__ import annotations

from collections import deque


class FlowNetwork:
    def __init__(self, num_nodes):
        self.n = num_nodes
        self.head = [[] for _ in range(num_nodes)]  # node -> list of edge ids
        self.to = []
        self.cap = []

    def add_edge(self, u, v, cap_uv, cap_vu=0.0):
        """Add an arc u->v and its reverse arc v->u."""
        self.head[u].append(len(self.to))
        self.to.append(v)
        self.cap.append(float(cap_uv))
        self.head[v].append(len(self.to))
        self.to.append(u)
        self.cap.append(float(cap_vu))

    def max_flow(self, s, t):
        """Run Dinic; afterwards min_cut_side() reads off the partition."""
        flow = 0.0
        to, cap, head = self.to, self.cap, self.head
        n = self.n
        while True:
            # BFS level graph on the residual network
            level = [-1] * n
            level[s] = 0
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for eid in head[u]:
                    v = to[eid]
                    if cap[eid] > 0.0 and level[v] < 0:
                        level[v] = level[u] + 1
                        queue.append(v)
            if level[t] < 0:
                self._level = level
                return flow
            it = [0] * n  # current-arc pointers
            # iterative blocking-flow DFS
            while True:
                path = []
                u = s
                while True:
                    if u == t:
                        pushed = min(cap[eid] for eid in path)
                        for eid in path:
                            cap[eid] -= pushed
                            cap[eid ^ 1] += pushed
                        flow += pushed
                        # retreat to the first saturated edge on the path
                        for i, eid in enumerate(path):
                            if cap[eid] <= 0.0:
                                path = path[:i]
                                break
                        u = s if not path else to[path[-1]]
                        continue
                    advanced = False
                    while it[u] < len(head[u]):
                        eid = head[u][it[u]]
                        v = to[eid]
                        if cap[eid] > 0.0 and level[v] == level[u] + 1:
                            path.append(eid)
                            u = v
                            advanced = True
                            break
                        it[u] += 1
                    if advanced:
                        continue
                    # dead end: block this node and retreat
                    level[u] = -1
                    if not path:
                        break
                    eid = path.pop()
                    u = to[eid ^ 1]
                    it[u] += 1
                if level[s] < 0 or it[s] >= len(head[s]):
                    break

    def min_cut_side(self, s):
        """Source-side reachability in the residual graph after max_flow."""
        side = [False] * self.n
        side[s] = True
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for eid in self.head[u]:
                v = self.to[eid]
                if self.cap[eid] > 0.0 and not side[v]:
                    side[v] = True
                    queue.append(v)
        return side
