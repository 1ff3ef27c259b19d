"""Loss graph and a-posteriori loss-location inference.

Nodes are heralded losses.  A node-node edge is drawn for every CZ site
that could have lost both endpoints at once (prior ``p_l * p_c``); the LDU
teleport sites connect a data slot's consecutive heralds across rounds.
When single losses are possible (``p_c < 1``) each node also gets one
aggregate vacuum edge carrying the total single-loss mass of its window.

Three estimators fill the posteriors:

* ``independent_posterior`` ignores the graph and spreads each node's mass
  over its window by the a-priori per-site loss mass (for this model that
  is uniform);
* ``accurate_posterior`` enumerates every k-matching of a connected
  component at the smallest feasible multiplicity k and scores edges by
  the probability-weighted fraction of solutions containing them;
* ``fast_posterior`` is the local update
  ``p~ = p_e / (S_1 * S_2 + p_e)`` with ``S_i`` the summed priors of the
  other edges at endpoint ``i`` (a vacuum endpoint contributes factor 1),
  independent per edge and parallelizable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .circuit import Circuit, CzSiteId, HeraldKey
from .dem import node_window, wire_sites, herald_wire
from .noise import NoiseParams

VACUUM = -1

_log = logging.getLogger(__name__)


class KMatchingCapExceeded(Exception):
    """No k-matching covers the component within the multiplicity cap."""


@dataclass
class Edge:
    n1: int  # node index
    n2: int  # node index, or VACUUM
    site_index: int  # circuit CZ site; -1 for vacuum edges
    site: CzSiteId | None
    prior: float
    posterior: float | None = None

    @property
    def is_vacuum(self) -> bool:
        return self.n2 == VACUUM


@dataclass
class LossGraph:
    circuit: Circuit
    nodes: list[HeraldKey]
    edges: list[Edge]
    windows: list[list[int]]  # per node: candidate site indices
    params: NoiseParams
    incident: list[list[int]] = field(default_factory=list)  # node -> edge ids

    def __post_init__(self):
        if not self.incident:
            self.incident = [[] for _ in self.nodes]
            for e_id, e in enumerate(self.edges):
                self.incident[e.n1].append(e_id)
                if not e.is_vacuum:
                    self.incident[e.n2].append(e_id)

    def node_index(self, key: HeraldKey) -> int:
        return self.nodes.index(key)


@dataclass(frozen=True)
class KMatchingSolution:
    edge_multiset: tuple[int, ...]  # edge ids, repeated per use
    k: int
    p_s: float


@dataclass
class Component:
    node_ids: tuple[int, ...]
    edge_ids: tuple[int, ...]
    graph: LossGraph


def node_reach(c: Circuit, node: HeraldKey) -> list[int]:
    """Sites at which this node can participate in a pair mechanism.

    For data heralds this is the causal window.  A lost ancilla stays dark
    until its reload, so its dark-round gates can still force-lose their
    partners: its reach covers the wire's sites across the dark span.
    """
    if node.kind != "ancilla":
        return node_window(c, node)
    from .dem import herald_wire, wire_sites
    from .noise import ANCILLA_DARK_ROUNDS

    w = herald_wire(c, node)
    lo, hi = node.round, node.round + ANCILLA_DARK_ROUNDS
    return [k for k in wire_sites(c).get(w, []) if lo <= c.site_ids[k].round < hi]


def build_loss_graph(c: Circuit, heralds, params: NoiseParams) -> LossGraph:
    nodes = list(heralds)
    windows = []
    site_owner: dict[int, list[int]] = {}
    for idx, node in enumerate(nodes):
        win = node_window(c, node)
        if not win:
            raise ValueError(f"herald {node} has no CZ in its causal window")
        windows.append(win)
        for s in node_reach(c, node):
            site_owner.setdefault(s, []).append(idx)

    edges: list[Edge] = []
    p_pair = params.p_l * params.p_c
    if p_pair > 0.0:
        for s, owners in sorted(site_owner.items()):
            if len(owners) == 2:
                n1, n2 = owners
                edges.append(Edge(n1, n2, s, c.site_ids[s], p_pair))
    p_single = params.p_l * (1.0 - params.p_c) / 2.0
    if p_single > 0.0:
        for idx in range(len(nodes)):
            edges.append(Edge(idx, VACUUM, -1, None, p_single * len(windows[idx])))
    return LossGraph(c, nodes, edges, windows, params)


def connected_components(g: LossGraph) -> list[Component]:
    """Partition by node-node edges; vacuum edges do not connect."""
    parent = list(range(len(g.nodes)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in g.edges:
        if not e.is_vacuum:
            r1, r2 = find(e.n1), find(e.n2)
            if r1 != r2:
                parent[r1] = r2
    groups: dict[int, list[int]] = {}
    for idx in range(len(g.nodes)):
        groups.setdefault(find(idx), []).append(idx)
    comps = []
    for members in groups.values():
        mset = set(members)
        e_ids = tuple(
            i
            for i, e in enumerate(g.edges)
            if e.n1 in mset or (not e.is_vacuum and e.n2 in mset)
        )
        comps.append(Component(tuple(sorted(members)), e_ids, g))
    comps.sort(key=lambda comp: comp.node_ids)
    return comps


def _sorted_component_edges(comp: Component) -> list[int]:
    g = comp.graph

    def key(e_id):
        e = g.edges[e_id]
        return (e.is_vacuum, e.site_index, e.n1, e.n2)

    return sorted(comp.edge_ids, key=key)


def enumerate_k_matchings(comp: Component, k: int) -> list[KMatchingSolution]:
    """All edge multisets covering every component node, with total excess
    incidence exactly k.  Exhaustive: meant for the small components this
    decoder sees; exactness is mandatory, cost is accepted."""
    g = comp.graph
    nodes = comp.node_ids
    n_pos = {n: i for i, n in enumerate(nodes)}
    edge_ids = _sorted_component_edges(comp)
    n = len(nodes)
    budget = n + k  # total incidence across nodes

    inc_of: list[tuple[int, ...]] = []
    for e_id in edge_ids:
        e = g.edges[e_id]
        if e.is_vacuum:
            inc_of.append((n_pos[e.n1],))
        else:
            inc_of.append((n_pos[e.n1], n_pos[e.n2]))

    solutions: list[KMatchingSolution] = []
    counts = [0] * n

    def remaining_coverable(e_pos: int, uncovered: int) -> bool:
        cover = set()
        for j in range(e_pos, len(edge_ids)):
            cover.update(inc_of[j])
        for i in range(n):
            if counts[i] == 0 and i not in cover:
                return False
        return True

    def rec(e_pos: int, used: list[int], inc_total: int, p: float):
        if e_pos == len(edge_ids):
            if inc_total == budget and all(c > 0 for c in counts):
                solutions.append(KMatchingSolution(tuple(used), k, p))
            return
        if inc_total > budget:
            return
        if not remaining_coverable(e_pos, inc_total):
            return
        touch = inc_of[e_pos]
        step = len(touch)
        max_use = (budget - inc_total) // step
        e_id = edge_ids[e_pos]
        prior = g.edges[e_id].prior
        for use in range(max_use + 1):
            if use:
                for i in touch:
                    counts[i] += use
                rec(
                    e_pos + 1,
                    used + [e_id] * use,
                    inc_total + step * use,
                    p * prior**use,
                )
                for i in touch:
                    counts[i] -= use
            else:
                rec(e_pos + 1, used, inc_total, p)

    rec(0, [], 0, 1.0)
    return solutions


def minimum_feasible_k(comp: Component) -> int:
    """Smallest k to try: parity of the node count without vacuum edges,
    zero once vacuum edges exist."""
    g = comp.graph
    if any(g.edges[e].is_vacuum for e in comp.edge_ids):
        return 0
    return len(comp.node_ids) % 2


def accurate_posterior(comp: Component, k_cap: int | None = None) -> dict[int, float]:
    """Exact per-edge posteriors of one component (sum over k-matchings at
    the smallest feasible multiplicity)."""
    g = comp.graph
    if k_cap is None:
        k_cap = len(comp.node_ids)
    k = minimum_feasible_k(comp)
    solutions: list[KMatchingSolution] = []
    while k <= k_cap:
        solutions = enumerate_k_matchings(comp, k)
        if solutions:
            break
        k += 2
    if not solutions:
        raise KMatchingCapExceeded(
            f"no k-matching up to k={k_cap} covers nodes {comp.node_ids}"
        )
    z = sum(s.p_s for s in solutions)
    posts = {e_id: 0.0 for e_id in comp.edge_ids}
    for s in solutions:
        members = set(s.edge_multiset)
        for e_id in members:
            posts[e_id] += s.p_s
    return {e_id: p / z for e_id, p in posts.items()}


def fast_posterior(g: LossGraph) -> list[float]:
    """Local-update posteriors for every edge (independent per edge)."""
    tot = [0.0] * len(g.nodes)
    for e in g.edges:
        tot[e.n1] += e.prior
        if not e.is_vacuum:
            tot[e.n2] += e.prior
    out = []
    for e in g.edges:
        if e.prior <= 0.0:
            out.append(0.0)
            continue
        s1 = tot[e.n1] - e.prior
        s2 = 1.0 if e.is_vacuum else tot[e.n2] - e.prior
        out.append(e.prior / (s1 * s2 + e.prior))
    return out


def independent_posterior(g: LossGraph) -> dict[int, dict[int, float]]:
    """Per-node location weights ignoring correlations entirely.

    Every window site carries the same a-priori single-plus-pair loss mass,
    so the weights are uniform over the window.
    """
    out: dict[int, dict[int, float]] = {}
    for idx, win in enumerate(g.windows):
        w = 1.0 / len(win)
        out[idx] = {s: w for s in win}
    return out


def posterior_to_location_weights(
    g: LossGraph, posteriors: list[float] | dict[int, float]
) -> dict[int, dict[int, float]]:
    """Convert edge posteriors into a per-node location distribution.

    Node-node posterior mass lands on the edge's unique site; vacuum mass
    spreads over the node's window in proportion to the single-loss priors
    (uniform here).  Mass on a site outside the node's own window (a dark
    ancilla forcing a partner loss in a later round) says nothing about
    where that ancilla was lost, so it also spreads over the window.  Per
    node the weights normalize to one; a node with no mass at all falls
    back to the uniform window distribution.
    """
    if isinstance(posteriors, dict):
        post = posteriors
    else:
        post = dict(enumerate(posteriors))
    weights: dict[int, dict[int, float]] = {
        idx: {s: 0.0 for s in win} for idx, win in enumerate(g.windows)
    }
    vacuum_mass = [0.0] * len(g.nodes)
    pair_mass = [0.0] * len(g.nodes)

    def land(idx: int, site: int, p: float) -> None:
        wmap = weights[idx]
        if site in wmap:
            wmap[site] += p
        else:
            share = p / len(g.windows[idx])
            for s in g.windows[idx]:
                wmap[s] += share

    for e_id, e in enumerate(g.edges):
        p = post.get(e_id)
        if p is None or p <= 0.0:
            continue
        if e.is_vacuum:
            vacuum_mass[e.n1] += p
            share = p / len(g.windows[e.n1])
            for s in g.windows[e.n1]:
                weights[e.n1][s] += share
        else:
            pair_mass[e.n1] += p
            pair_mass[e.n2] += p
            land(e.n1, e.site_index, p)
            land(e.n2, e.site_index, p)
    out: dict[int, dict[int, float]] = {}
    for idx, wmap in weights.items():
        if pair_mass[idx] == 0.0:
            # pure-vacuum (or massless) node: by definition the single-loss
            # prior distribution, which is uniform over the window
            if vacuum_mass[idx] == 0.0:
                _log.debug("node %d has no posterior mass; uniform fallback", idx)
            u = 1.0 / len(g.windows[idx])
            out[idx] = {s: u for s in g.windows[idx]}
        else:
            z = sum(wmap.values())
            out[idx] = {s: v / z for s, v in wmap.items()}
    return out


def dump(g: LossGraph) -> str:
    """Structured text dump for debugging and golden tests."""
    lines = [f"# loss graph: {len(g.nodes)} nodes, {len(g.edges)} edges"]
    for idx, node in enumerate(g.nodes):
        win = ",".join(str(g.circuit.site_ids[s]) for s in g.windows[idx])
        lines.append(f"node {idx} {node.kind} slot={node.slot} round={node.round} window={win}")
    for e in g.edges:
        if e.is_vacuum:
            lines.append(f"edge {e.n1} vacuum prior={e.prior:.9g} post={e.posterior}")
        else:
            lines.append(
                f"edge {e.n1} {e.n2} site={e.site} prior={e.prior:.9g} post={e.posterior}"
            )
    return "\n".join(lines) + "\n"
