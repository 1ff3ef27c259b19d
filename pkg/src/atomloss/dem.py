"""Detector error models: Pauli DEM, per-location loss DEMs, mixing,
merging, and reduction to a matching graph.

Fault basis
-----------
Every mechanism this module produces is a XOR of *elementary* faults: a
single-qubit X or Z injected on one operand of one CZ site, either just
before or just after the gate.  One vectorized Pauli-frame pass through the
reference circuit computes the detector/observable signature of every
elementary fault; mechanism signatures are then symmetric differences of
those rows.  Signs never matter for detector flips, so frames carry no
phase.

Loss DEM recipe
---------------
A loss of atom ``w`` hypothesized at site ``s`` is realized by independent
probability-1/2 mechanisms:

* X and Z injected on ``w`` just *before* the lossy gate, propagated
  through the full reference circuit.  This is the maximally mixed state of
  the erased atom; crossing the reference CZs deposits the dephasing that
  every partner of the absent atom picks up, with the correct correlations,
  and crossing the teleport reproduces the fresh |0> replacement.
* a flip of the heralding measurement's recorded bit (the "lost" outcome is
  replaced by a fair coin, independent of the state).

When the loss model allows the gate partner to survive (``p_c < 1``), the
survivor's twirled re-excitation channel is added as independent X (1/4)
and Z (1/2) faults weighted by the conditional survival probability
``(1-p_c)/(1+p_c)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, CzSiteId, HeraldKey, OpKind

_PAULI2 = tuple((i, j) for i in range(4) for j in range(4) if (i, j) != (0, 0))

P_MIN = 1e-12


class UndecomposableMechanismError(Exception):
    pass


def xor_probability(p1: float, p2: float) -> float:
    return p1 + p2 - 2.0 * p1 * p2


@dataclass(frozen=True)
class ErrorMechanism:
    probability: float
    detectors: tuple[int, ...]
    flips_observable: bool


@dataclass
class DetectorErrorModel:
    mechanisms: list[ErrorMechanism]
    detector_count: int
    observable_count: int = 1

    def __post_init__(self):
        for m in self.mechanisms:
            if not 0.0 < m.probability < 1.0:
                raise ValueError(f"mechanism probability out of (0,1): {m}")
            if m.detectors and max(m.detectors) >= self.detector_count:
                raise ValueError("detector index out of range")

    def to_text(self) -> str:
        lines = []
        for m in sorted(self.mechanisms, key=lambda m: (m.detectors, m.flips_observable)):
            parts = [f"error {m.probability:.12g}"]
            parts += [f"D{d}" for d in m.detectors]
            if m.flips_observable:
                parts.append("L0")
            lines.append(" ".join(parts))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, detector_count: int) -> "DetectorErrorModel":
        mechanisms = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if fields[0] != "error":
                raise ValueError(f"unknown line: {line}")
            p = float(fields[1])
            dets = tuple(int(f[1:]) for f in fields[2:] if f.startswith("D"))
            obs = any(f == "L0" for f in fields[2:])
            mechanisms.append(ErrorMechanism(p, dets, obs))
        return cls(mechanisms, detector_count)


@dataclass
class LossLocationDem:
    node: HeraldKey
    location: CzSiteId
    dem: DetectorErrorModel


class FaultBasis:
    """Signatures of elementary faults for one circuit.

    Basis id layout: ``((site*2 + side)*2 + pos)*2 + pauli`` with
    side 0/1 = first/second CZ operand, pos 0/1 = before/after the gate,
    pauli 0/1 = X/Z.
    """

    def __init__(self, c: Circuit):
        self.circuit = c
        n_sites = c.n_sites
        n_basis = n_sites * 8
        n_wires = c.n_wires
        fx = np.zeros((n_basis, n_wires), dtype=bool)
        fz = np.zeros((n_basis, n_wires), dtype=bool)
        mflip = np.zeros((n_basis, c.n_measurements), dtype=bool)

        inject_before: dict[int, list[tuple[int, int, int]]] = {}
        inject_after: dict[int, list[tuple[int, int, int]]] = {}
        for k in range(n_sites):
            op_idx = c.site_ops[k]
            a, b = c.site_operands(k)
            for side, wire in ((0, a), (1, b)):
                for pos, sched in ((0, inject_before), (1, inject_after)):
                    for pauli, w_ in ((0, wire), (1, wire)):
                        bid = ((k * 2 + side) * 2 + pos) * 2 + pauli
                        sched.setdefault(op_idx, []).append((bid, wire, pauli))

        def apply_injections(entries):
            for bid, wire, pauli in entries:
                if pauli == 0:
                    fx[bid, wire] ^= True
                else:
                    fz[bid, wire] ^= True

        m = 0
        for i, op in enumerate(c.operations):
            if i in inject_before:
                apply_injections(inject_before[i])
            kind = op.kind
            if kind in (OpKind.PREP_0, OpKind.PREP_PLUS):
                w = op.operands[0]
                fx[:, w] = False
                fz[:, w] = False
            elif kind is OpKind.HADAMARD:
                w = op.operands[0]
                tmp = fx[:, w].copy()
                fx[:, w] = fz[:, w]
                fz[:, w] = tmp
            elif kind is OpKind.CZ:
                a, b = op.operands
                fz[:, a] ^= fx[:, b]
                fz[:, b] ^= fx[:, a]
            elif kind is OpKind.MEASURE_Z:
                mflip[:, m] = fx[:, op.operands[0]]
                m += 1
            else:  # MEASURE_X / LDU_MEASURE: X-basis readout of operand 0
                mflip[:, m] = fz[:, op.operands[0]]
                m += 1
            if i in inject_after:
                apply_injections(inject_after[i])

        n_det = c.n_detectors
        det_mat = np.zeros((n_basis, n_det), dtype=bool)
        for k, det in enumerate(c.detectors):
            col = mflip[:, det.measurement_refs[0]].copy()
            for ref in det.measurement_refs[1:]:
                col ^= mflip[:, ref]
            det_mat[:, k] = col
        obs = mflip[:, c.observable.measurement_refs[0]].copy()
        for ref in c.observable.measurement_refs[1:]:
            obs ^= mflip[:, ref]

        self.det_mat = det_mat
        self.obs = obs
        self.det_sets: list[tuple[int, ...]] = [
            tuple(np.nonzero(det_mat[b])[0]) for b in range(n_basis)
        ]

    def basis_id(self, site_index: int, side: int, pos: int, pauli: int) -> int:
        return ((site_index * 2 + side) * 2 + pos) * 2 + pauli

    def signature(self, basis_ids) -> tuple[tuple[int, ...], bool]:
        """Detector set and observable flip of a XOR of elementary faults."""
        dets: set[int] = set()
        obs = False
        for bid in basis_ids:
            dets.symmetric_difference_update(self.det_sets[bid])
            obs ^= bool(self.obs[bid])
        return tuple(sorted(dets)), obs

    def edge_library(self) -> dict[tuple[int, ...], set[bool]]:
        """All distinct <=2-detector elementary signatures, for hyperedge
        decomposition into chains of plausible graph edges."""
        lib: dict[tuple[int, ...], set[bool]] = {}
        for b, dets in enumerate(self.det_sets):
            if 0 < len(dets) <= 2:
                lib.setdefault(dets, set()).add(bool(self.obs[b]))
        return lib


_basis_cache: dict[int, FaultBasis] = {}


def fault_basis(c: Circuit) -> FaultBasis:
    fb = _basis_cache.get(id(c))
    if fb is None or fb.circuit is not c:
        fb = FaultBasis(c)
        _basis_cache[id(c)] = fb
    return fb


class _MechanismAccumulator:
    """XOR-probability merge of mechanisms keyed by (detectors, observable)."""

    def __init__(self):
        self.table: dict[tuple[tuple[int, ...], bool], float] = {}

    def add(self, dets: tuple[int, ...], obs: bool, p: float) -> None:
        if p <= 0.0:
            return
        if not dets and not obs:
            return
        key = (dets, obs)
        old = self.table.get(key, 0.0)
        self.table[key] = xor_probability(old, p)

    def to_dem(self, detector_count: int) -> DetectorErrorModel:
        mechanisms = [
            ErrorMechanism(p, dets, obs)
            for (dets, obs), p in sorted(self.table.items())
            if 0.0 < p < 1.0
        ]
        return DetectorErrorModel(mechanisms, detector_count)


def _pauli_component_ids(fb: FaultBasis, site_index: int, side: int, pauli: int, pos: int):
    """Elementary basis ids of a one-qubit Pauli (1=X, 2=Y, 3=Z)."""
    ids = []
    if pauli in (1, 2):
        ids.append(fb.basis_id(site_index, side, pos, 0))
    if pauli in (2, 3):
        ids.append(fb.basis_id(site_index, side, pos, 1))
    return ids


def build_pauli_dem(c: Circuit, params) -> DetectorErrorModel:
    """Hyperedges of the two-qubit depolarizing channel after every CZ."""
    acc = _MechanismAccumulator()
    if params.p_d > 0.0:
        fb = fault_basis(c)
        p_each = params.p_d / 15.0
        for k in range(c.n_sites):
            for pa, pb in _PAULI2:
                ids = _pauli_component_ids(fb, k, 0, pa, 1)
                ids += _pauli_component_ids(fb, k, 1, pb, 1)
                dets, obs = fb.signature(ids)
                acc.add(dets, obs, p_each)
    return acc.to_dem(c.n_detectors)


_wire_sites_cache: dict[int, tuple[Circuit, dict[int, list[int]]]] = {}


def wire_sites(c: Circuit) -> dict[int, list[int]]:
    """Ordered CZ site indices per wire (cached per circuit)."""
    hit = _wire_sites_cache.get(id(c))
    if hit is not None and hit[0] is c:
        return hit[1]
    out: dict[int, list[int]] = {}
    for k in range(c.n_sites):
        a, b = c.site_operands(k)
        out.setdefault(a, []).append(k)
        out.setdefault(b, []).append(k)
    _wire_sites_cache[id(c)] = (c, out)
    return out


def herald_wire(c: Circuit, node: HeraldKey) -> int:
    """The wire measured by a herald: the atom whose loss it signals."""
    if node.kind == "ancilla":
        return c.n_data + node.slot
    return c.data_wire(node.slot, node.round)


_herald_meas_cache: dict[int, tuple[Circuit, dict[HeraldKey, int]]] = {}


def herald_measurement(c: Circuit, node: HeraldKey) -> int:
    """Measurement index at which this herald would be reported."""
    hit = _herald_meas_cache.get(id(c))
    if hit is None or hit[0] is not c:
        hit = (c, {key: m for m, key in enumerate(c.herald_keys)})
        _herald_meas_cache[id(c)] = hit
    try:
        return hit[1][node]
    except KeyError:
        raise ValueError(f"no measurement heralds {node}") from None


_meas_sig_cache: dict[int, tuple[Circuit, dict]] = {}


def _measurement_signature(c: Circuit, m: int) -> tuple[tuple[int, ...], bool]:
    """Detectors (and observable) referencing measurement ``m``."""
    hit = _meas_sig_cache.get(id(c))
    if hit is None or hit[0] is not c:
        table: dict[int, tuple[list[int], bool]] = {}
        for k, det in enumerate(c.detectors):
            for ref in det.measurement_refs:
                table.setdefault(ref, ([], False))[0].append(k)
        sig = {}
        obs_refs = set(c.observable.measurement_refs)
        for ref, (dets, _) in table.items():
            sig[ref] = (tuple(dets), ref in obs_refs)
        for ref in obs_refs:
            if ref not in sig:
                sig[ref] = ((), True)
        hit = (c, sig)
        _meas_sig_cache[id(c)] = hit
    return hit[1].get(m, ((), False))


_site_index_cache: dict[int, tuple[Circuit, dict[CzSiteId, int]]] = {}


def _site_index(c: Circuit, site: CzSiteId) -> int:
    hit = _site_index_cache.get(id(c))
    if hit is None or hit[0] is not c:
        hit = (c, {s: k for k, s in enumerate(c.site_ids)})
        _site_index_cache[id(c)] = hit
    return hit[1][site]


def node_window(c: Circuit, node: HeraldKey) -> list[int]:
    """Candidate loss sites: every CZ of the heralded atom since its
    previous LDU (for ancillas, its re-preparation)."""
    w = herald_wire(c, node)
    sites = wire_sites(c).get(w, [])
    if node.kind == "ancilla":
        sites = [k for k in sites if c.site_ids[k].round == node.round]
    return sites


def build_loss_dem(
    c: Circuit,
    node: HeraldKey,
    location: CzSiteId,
    params=None,
) -> LossLocationDem:
    """Per-location DEM of one heralded loss.

    ``params`` enables the conditional survivor-channel faults on the loss
    site's partner; omit it for the bare erasure recipe.
    """
    fb = fault_basis(c)
    site_index = _site_index(c, location)
    w = herald_wire(c, node)
    a, b = c.site_operands(site_index)
    if w not in (a, b):
        raise ValueError(f"site {location} does not involve the heralded atom")
    if site_index not in node_window(c, node):
        raise ValueError(f"site {location} outside the causal window of {node}")
    side = 0 if w == a else 1
    partner_side = 1 - side

    acc = _MechanismAccumulator()
    # Erased atom is depolarized at the loss time; the reference-frame
    # propagation carries the partner dephasing and the |0> replacement.
    for pauli in (0, 1):
        dets, obs = fb.signature([fb.basis_id(site_index, side, 0, pauli)])
        acc.add(dets, obs, 0.5)
    # Heralded measurements record information-free fair coins.  A data slot
    # heralds once (the LDU replaces the atom); a lost ancilla stays dark
    # until its reload, so each dark round's stabilizer reading is a coin.
    if node.kind == "ancilla":
        from .noise import ANCILLA_DARK_ROUNDS

        for r in range(node.round, min(node.round + ANCILLA_DARK_ROUNDS, c.rounds)):
            dets, obs = _measurement_signature(
                c, herald_measurement(c, HeraldKey("ancilla", node.slot, r))
            )
            acc.add(dets, obs, 0.5)
    else:
        dets, obs = _measurement_signature(c, herald_measurement(c, node))
        acc.add(dets, obs, 0.5)
    # Survivor channel on the loss-site partner, when it can survive.
    if params is not None and params.p_c < 1.0:
        w_surv = (1.0 - params.p_c) / (1.0 + params.p_c)
        dets, obs = fb.signature([fb.basis_id(site_index, partner_side, 1, 0)])
        acc.add(dets, obs, 0.25 * w_surv)
        dets, obs = fb.signature([fb.basis_id(site_index, partner_side, 1, 1)])
        acc.add(dets, obs, 0.5 * w_surv)
    return LossLocationDem(node, location, acc.to_dem(c.n_detectors))


def mix_loss_dems(parts) -> DetectorErrorModel:
    """Posterior-weighted mixture of per-location loss DEMs.

    Each constituent mechanism's probability is scaled by its location
    weight, then duplicates merge by the XOR rule.
    """
    parts = list(parts)
    total = sum(wt for _, wt in parts)
    if any(wt < 0 for _, wt in parts):
        raise ValueError("negative location weight")
    if total > 1.0 + 1e-9:
        raise ValueError(f"location weights sum to {total} > 1")
    live = [(part, wt) for part, wt in parts if wt > 0.0]
    if len(live) == 1 and abs(live[0][1] - 1.0) < 1e-15:
        return live[0][0].dem
    detector_count = live[0][0].dem.detector_count if live else 0
    acc = _MechanismAccumulator()
    for part, wt in live:
        for m in part.dem.mechanisms:
            acc.add(m.detectors, m.flips_observable, m.probability * wt)
    return acc.to_dem(detector_count)


def merge(dems) -> DetectorErrorModel:
    """Concatenate DEMs, merging identical mechanisms by the XOR rule."""
    dems = list(dems)
    counts = {d.detector_count for d in dems if d.mechanisms}
    if len(counts) > 1:
        raise ValueError(f"detector_count mismatch: {sorted(counts)}")
    acc = _MechanismAccumulator()
    detector_count = 0
    for d in dems:
        detector_count = max(detector_count, d.detector_count)
        for m in d.mechanisms:
            acc.add(m.detectors, m.flips_observable, m.probability)
    return acc.to_dem(detector_count)


def _decompose_dets(
    dets: tuple[int, ...],
    obs: bool,
    library: dict[tuple[int, ...], set[bool]],
) -> list[tuple[tuple[int, ...], bool]]:
    """Partition a hyperedge's detectors into library det-sets whose
    observable parities XOR to the hyperedge's; raises if impossible."""
    n = len(dets)
    full = (1 << n) - 1
    pos = {d: i for i, d in enumerate(dets)}

    # Candidate parts: library entries fully inside the hyperedge support.
    parts: list[tuple[int, tuple[int, ...], bool]] = []
    for sub, obs_set in library.items():
        if all(d in pos for d in sub):
            mask = 0
            for d in sub:
                mask |= 1 << pos[d]
            for ob in obs_set:
                parts.append((mask, sub, ob))

    # DP over detector subsets, tracking achievable observable parities.
    reach: dict[tuple[int, bool], tuple] = {(0, False): ()}
    frontier = [(0, False)]
    for mask, ob in frontier:
        low = None
        rest = full & ~mask
        if rest == 0:
            continue
        low = (rest & -rest).bit_length() - 1
        for pmask, sub, pob in parts:
            if pmask & mask or not (pmask >> low) & 1:
                continue
            state = (mask | pmask, ob ^ pob)
            if state not in reach:
                reach[state] = (reach[(mask, ob)], (sub, pob))
                frontier.append(state)
    goal = reach.get((full, obs))
    if goal is None:
        raise UndecomposableMechanismError(
            f"cannot decompose mechanism D{list(dets)} obs={obs}"
        )
    out = []
    node = goal
    while node:
        prev, part = node
        out.append(part)
        node = prev
    return out


def decompose_to_graph(dem: DetectorErrorModel, library=None):
    """Reduce a DEM to a matching graph.

    Mechanisms on <=2 detectors become edges directly (single-detector ones
    attach to the boundary).  Wider mechanisms are split into chains of
    existing edges; their probability folds into each chain edge by the XOR
    rule.  ``library`` supplies additional candidate edge signatures (the
    circuit's elementary-fault library); mechanisms that cannot be written
    as a chain raise UndecomposableMechanismError.
    """
    from .matching import MatchingGraph

    lib: dict[tuple[int, ...], set[bool]] = {}
    for m in dem.mechanisms:
        if 0 < len(m.detectors) <= 2:
            lib.setdefault(m.detectors, set()).add(m.flips_observable)
    if library:
        for dets, obs_set in library.items():
            lib.setdefault(dets, set()).update(obs_set)

    boundary = dem.detector_count
    edges: dict[tuple[int, int, bool], float] = {}

    def add_edge(dets: tuple[int, ...], obs: bool, p: float) -> None:
        if len(dets) == 2:
            u, v = dets
        elif len(dets) == 1:
            u, v = dets[0], boundary
        else:
            return  # observable-only mechanism: invisible to matching
        key = (u, v, obs)
        edges[key] = xor_probability(edges.get(key, 0.0), p)

    for m in dem.mechanisms:
        if len(m.detectors) <= 2:
            add_edge(m.detectors, m.flips_observable, m.probability)
        else:
            for dets, obs in _decompose_dets(m.detectors, m.flips_observable, lib):
                add_edge(dets, obs, m.probability)

    # Parallel edges with opposite observable effect: keep the likelier one.
    best: dict[tuple[int, int], tuple[float, bool]] = {}
    for (u, v, obs), p in edges.items():
        cur = best.get((u, v))
        if cur is None or p > cur[0]:
            best[(u, v)] = (p, obs)
    out_edges = []
    for (u, v), (p, obs) in sorted(best.items()):
        p = min(max(p, P_MIN), 1.0 - P_MIN)
        weight = math.log((1.0 - p) / p)
        out_edges.append((u, v, weight, obs))
    return MatchingGraph(dem.detector_count, out_edges)


def graph_to_text(graph) -> str:
    """Edge list dump: ``<n1> <n2|boundary> <weight> <obs_flip>``."""
    lines = []
    for u, v, w, obs in graph.edges:
        name_v = "boundary" if v == graph.n_detectors else str(v)
        lines.append(f"{u} {name_v} {w:.12g} {int(obs)}")
    return "\n".join(lines) + ("\n" if lines else "")
