"""Exact minimum-weight perfect matching of syndrome defects.

The decoding graph lives on detector indices plus one boundary node.  A
syndrome is decoded by pairing every flipped detector with another flipped
detector or with the boundary, minimizing total path weight in the graph
metric.  Defects are grouped by the connected component of the interior
graph (boundary edges never merge components, and routing a pair through
the boundary never beats sending both endpoints to the boundary), then each
component is solved exactly: a Dijkstra pass per defect gives the metric,
and the pairing is optimized by bitmask dynamic programming for up to 16
defects per component, with an exact blossom solve on a mirrored graph
beyond that.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field


class DisconnectedDefectError(Exception):
    pass


@dataclass
class MatchingGraph:
    """Weighted decoding graph; node ``n_detectors`` is the boundary."""

    n_detectors: int
    edges: list[tuple[int, int, float, bool]]
    _adj: dict[int, list[tuple[int, float, bool]]] | None = field(
        default=None, repr=False
    )

    @property
    def boundary(self) -> int:
        return self.n_detectors

    def adjacency(self) -> dict[int, list[tuple[int, float, bool]]]:
        if self._adj is None:
            adj: dict[int, list[tuple[int, float, bool]]] = {}
            for u, v, w, obs in self.edges:
                adj.setdefault(u, []).append((v, w, obs))
                adj.setdefault(v, []).append((u, w, obs))
            self._adj = adj
        return self._adj


@dataclass(frozen=True)
class Syndrome:
    flipped: frozenset[int]

    @classmethod
    def from_bits(cls, bits) -> "Syndrome":
        return cls(frozenset(int(i) for i in range(len(bits)) if bits[i]))


_DP_LIMIT = 16


def _components(graph: MatchingGraph) -> dict[int, int]:
    """Union-find labels over interior nodes (boundary excluded)."""
    parent: dict[int, int] = {}

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    b = graph.boundary
    for u, v, _, _ in graph.edges:
        for n in (u, v):
            if n != b and n not in parent:
                parent[n] = n
        if u != b and v != b:
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[ru] = rv
    return {n: find(n) for n in parent}


def _dijkstra(graph: MatchingGraph, source: int, targets: set[int]):
    """Distances and path observable-parities from one defect.

    The boundary is treated as a sink: paths never continue through it.
    """
    boundary = graph.boundary
    adj = graph.adjacency()
    dist: dict[int, float] = {source: 0.0}
    opar: dict[int, bool] = {source: False}
    done: set[int] = set()
    heap = [(0.0, source)]
    pending = set(targets)
    while heap and pending:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        pending.discard(u)
        if u == boundary:
            continue
        for v, w, obs in adj.get(u, ()):
            nd = d + w
            if nd < dist.get(v, float("inf")) - 1e-15:
                dist[v] = nd
                opar[v] = opar[u] ^ obs
                heapq.heappush(heap, (nd, v))
    return dist, opar


def _pair_defects_dp(n, w_pair, w_bound, obs_pair, obs_bound):
    """Exact min-weight pairing with optional boundary, O(2^n n)."""
    inf = float("inf")
    size = 1 << n
    best = [inf] * size
    choice: list[tuple[int, int] | None] = [None] * size
    best[0] = 0.0
    for mask in range(size):
        base = best[mask]
        if base == inf:
            continue
        low = None
        for i in range(n):
            if not (mask >> i) & 1:
                low = i
                break
        if low is None:
            continue
        m2 = mask | (1 << low)
        if w_bound[low] + base < best[m2]:
            best[m2] = w_bound[low] + base
            choice[m2] = (low, -1)
        for j in range(low + 1, n):
            if (mask >> j) & 1:
                continue
            w = w_pair[low][j]
            if w + base < best[m2 | (1 << j)]:
                best[m2 | (1 << j)] = w + base
                choice[m2 | (1 << j)] = (low, j)
    if best[size - 1] == inf:
        raise DisconnectedDefectError("some defects cannot be matched")
    obs = False
    total = best[size - 1]
    mask = size - 1
    while mask:
        i, j = choice[mask]
        if j < 0:
            obs ^= obs_bound[i]
            mask &= ~(1 << i)
        else:
            obs ^= obs_pair[i][j]
            mask &= ~((1 << i) | (1 << j))
    return total, obs


def _pair_defects_blossom(n, w_pair, w_bound, obs_pair, obs_bound):
    """Exact pairing via max-weight matching on the mirrored graph."""
    import networkx as nx

    inf = float("inf")
    g = nx.Graph()
    finite = [w for row in w_pair for w in row if w < inf] + [
        w for w in w_bound if w < inf
    ]
    scale = max(finite) if finite else 1.0
    big = 4.0 * scale * (n + 1) + 1.0

    for i in range(n):
        for j in range(i + 1, n):
            if w_pair[i][j] < inf:
                g.add_edge(("d", i), ("d", j), weight=big - w_pair[i][j])
        if w_bound[i] < inf:
            g.add_edge(("d", i), ("b", i), weight=big - w_bound[i])
        for j in range(i + 1, n):
            g.add_edge(("b", i), ("b", j), weight=big)

    mate = nx.max_weight_matching(g, maxcardinality=True)
    matched = {}
    for a, b in mate:
        matched[a] = b
        matched[b] = a
    total, obs = 0.0, False
    for i in range(n):
        partner = matched.get(("d", i))
        if partner is None:
            raise DisconnectedDefectError("some defects cannot be matched")
        if partner[0] == "b":
            total += w_bound[i]
            obs ^= obs_bound[i]
        elif partner[1] > i:
            total += w_pair[i][partner[1]]
            obs ^= obs_pair[i][partner[1]]
    return total, obs


def decode_detail(graph: MatchingGraph, syndrome: Syndrome) -> tuple[float, int]:
    """Minimum matched weight and predicted observable bit."""
    defects = sorted(syndrome.flipped)
    if not defects:
        return 0.0, 0
    labels = _components(graph)
    boundary = graph.boundary
    for d in defects:
        if d not in labels:
            raise DisconnectedDefectError(f"defect {d} touches no graph edge")

    by_comp: dict[int, list[int]] = {}
    for d in defects:
        by_comp.setdefault(labels[d], []).append(d)

    total, obs = 0.0, False
    inf = float("inf")
    for comp_defects in by_comp.values():
        n = len(comp_defects)
        targets = set(comp_defects) | {boundary}
        w_pair = [[inf] * n for _ in range(n)]
        w_bound = [inf] * n
        obs_pair = [[False] * n for _ in range(n)]
        obs_bound = [False] * n
        for i, d in enumerate(comp_defects):
            dist, opar = _dijkstra(graph, d, targets)
            for j in range(i + 1, n):
                dj = comp_defects[j]
                if dj in dist:
                    w_pair[i][j] = w_pair[j][i] = dist[dj]
                    obs_pair[i][j] = obs_pair[j][i] = opar[dj]
            if boundary in dist:
                w_bound[i] = dist[boundary]
                obs_bound[i] = opar[boundary]
        pair_fn = _pair_defects_dp if n <= _DP_LIMIT else _pair_defects_blossom
        t, o = pair_fn(n, w_pair, w_bound, obs_pair, obs_bound)
        total += t
        obs ^= o
    return total, int(obs)


def decode(graph: MatchingGraph, syndrome: Syndrome) -> int:
    """Predicted observable flip for a syndrome (exact MWPM)."""
    return decode_detail(graph, syndrome)[1]
