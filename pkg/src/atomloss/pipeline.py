"""Per-shot decoding: heralds -> loss graph -> posteriors -> mixed DEM ->
matching graph -> predicted observable.

A ShotDecoder precomputes everything that does not depend on the shot: the
per-(node, location) loss DEM library, the static Pauli DEM of the
depolarizing channel, and the elementary-edge library used to break
hyperedges into chains.  Decoding a shot then only scales with the number
of heralds and defects.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .circuit import Circuit, HeraldKey
from .dem import (
    UndecomposableMechanismError,
    build_loss_dem,
    build_pauli_dem,
    decompose_to_graph,
    fault_basis,
    node_window,
    DetectorErrorModel,
    ErrorMechanism,
    xor_probability,
)
from .lossgraph import (
    KMatchingCapExceeded,
    build_loss_graph,
    connected_components,
    accurate_posterior,
    fast_posterior,
    independent_posterior,
    posterior_to_location_weights,
)
from .matching import DisconnectedDefectError, Syndrome, decode
from .noise import NoiseParams

DECODERS = ("independent", "fast", "accurate")


def first_heralds(heralds) -> tuple[HeraldKey, ...]:
    """Drop the repeat heralds of a dark ancilla.

    A lost ancilla reads "lost" for its whole dark span; only the first
    herald of each span carries information.
    """
    from .noise import ANCILLA_DARK_ROUNDS

    out = []
    last_round: dict[int, int] = {}
    for h in heralds:
        if h.kind == "ancilla":
            prev = last_round.get(h.slot)
            if prev is not None and h.round < prev + ANCILLA_DARK_ROUNDS:
                continue
            last_round[h.slot] = h.round
        out.append(h)
    return tuple(out)


@dataclass
class DecodeOutcome:
    predicted: int
    failure: bool
    t_graph_us: float
    t_post_us: float
    n_nodes: int
    n_edges: int


class ShotDecoder:
    def __init__(
        self,
        circuit: Circuit,
        params: NoiseParams,
        decoder: str = "fast",
        k_cap: int | None = None,
    ):
        if decoder not in DECODERS:
            raise ValueError(f"unknown decoder {decoder!r}")
        self.circuit = circuit
        self.params = params
        self.decoder = decoder
        self.k_cap = k_cap
        self.edge_library = fault_basis(circuit).edge_library()

        pauli = build_pauli_dem(circuit, params)
        self._static = {
            (m.detectors, m.flips_observable): m.probability for m in pauli.mechanisms
        }

        # Loss DEM library over every potential herald and window site.
        self._lib: dict[HeraldKey, dict[int, list[tuple[float, tuple, bool]]]] = {}
        lay = circuit.layout
        keys = [
            HeraldKey("data", q, r)
            for q in range(lay.n_data)
            for r in range(circuit.rounds + 1)
        ]
        keys += [
            HeraldKey("ancilla", s.index, r)
            for s in lay.stabilizers
            for r in range(circuit.rounds)
        ]
        for key in keys:
            per_site = {}
            for s in node_window(circuit, key):
                part = build_loss_dem(circuit, key, circuit.site_ids[s], params)
                per_site[s] = [
                    (m.probability, m.detectors, m.flips_observable)
                    for m in part.dem.mechanisms
                ]
            self._lib[key] = per_site

    def decode_shot(self, detector_bits, heralds) -> DecodeOutcome:
        p = self.params
        acc: dict[tuple, float] = dict(self._static)
        heralds = first_heralds(heralds)
        n_nodes = len(heralds)
        n_edges = 0
        t_graph = 0.0
        t_post = 0.0
        if heralds:
            t0 = time.perf_counter()
            g = build_loss_graph(self.circuit, heralds, p)
            t1 = time.perf_counter()
            t_graph = (t1 - t0) * 1e6
            n_edges = len(g.edges)
            try:
                if self.decoder == "independent":
                    weights = independent_posterior(g)
                elif self.decoder == "fast":
                    weights = posterior_to_location_weights(g, fast_posterior(g))
                else:
                    post: dict[int, float] = {}
                    for comp in connected_components(g):
                        post.update(accurate_posterior(comp, self.k_cap))
                    weights = posterior_to_location_weights(g, post)
            except KMatchingCapExceeded:
                return DecodeOutcome(0, True, t_graph, 0.0, n_nodes, n_edges)
            for idx, site_weights in weights.items():
                per_site = self._lib[g.nodes[idx]]
                for s, w in site_weights.items():
                    if w <= 0.0:
                        continue
                    for prob, dets, obs in per_site[s]:
                        key = (dets, obs)
                        acc[key] = xor_probability(acc.get(key, 0.0), prob * w)
            t_post = (time.perf_counter() - t1) * 1e6

        mechanisms = [
            ErrorMechanism(prob, dets, obs)
            for (dets, obs), prob in acc.items()
            if 0.0 < prob < 1.0
        ]
        dem = DetectorErrorModel(mechanisms, self.circuit.n_detectors)
        try:
            graph = decompose_to_graph(dem, self.edge_library)
            predicted = decode(graph, Syndrome.from_bits(detector_bits))
        except (DisconnectedDefectError, UndecomposableMechanismError):
            return DecodeOutcome(0, True, t_graph, t_post, n_nodes, n_edges)
        return DecodeOutcome(predicted, False, t_graph, t_post, n_nodes, n_edges)
