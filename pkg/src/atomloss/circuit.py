"""Circuit IR for the distance-d memory experiment with per-round
teleportation loss-detection units (LDUs).

Wire model
----------
Every atom that ever participates gets its own wire id:

* data slots ``0 .. n_data-1`` hold the initial data atoms,
* ancilla wires ``n_data .. n_data+n_anc-1`` are reused every round
  (measured, then re-prepared at the next round start),
* fresh wires ``n_data+n_anc + r*n_data + q`` hold the teleport target of
  slot ``q``'s LDU in round ``r``; that wire *is* slot ``q``'s atom during
  round ``r+1``.

One LDU is: ``prep_plus(f); cz(old, f); hadamard(f); ldu_measure(old, f)``.
A one-bit teleport leaves ``Z^m`` on the fresh atom, where ``m`` is the
X-basis outcome of the old atom.  That byproduct is never corrected by
feedforward; instead each X-stabilizer detector of the following round also
references the LDU outcomes of the stabilizer's support, which cancels the
byproduct parity.  When the old atom is absent the measurement reads "lost"
and the simulator re-initializes the fresh atom in |0> (if it is present).

Detectors compare consecutive stabilizer outcomes; first-round Z detectors
compare against the deterministic |0..0> preparation and a final layer of
Z detectors compares the transversal readout against the last Z outcomes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .layout import Layout


class OpKind(enum.Enum):
    PREP_0 = "prep_0"
    PREP_PLUS = "prep_plus"
    HADAMARD = "hadamard"
    CZ = "cz"
    MEASURE_Z = "measure_z"
    MEASURE_X = "measure_x"
    LDU_MEASURE = "ldu_measure"


class QubitRole(enum.Enum):
    DATA = "data"
    ANCILLA = "ancilla"
    FRESH = "fresh"


class SiteContext(enum.Enum):
    SYNDROME = "syndrome_extraction"
    LDU = "ldu_teleport"


@dataclass(frozen=True)
class QubitId:
    index: int
    role: QubitRole


@dataclass(frozen=True)
class CzSiteId:
    round: int
    gate_index: int
    context: SiteContext

    def __str__(self) -> str:
        tag = "S" if self.context is SiteContext.SYNDROME else "L"
        return f"{tag}{self.round}.{self.gate_index}"


@dataclass(frozen=True)
class Operation:
    kind: OpKind
    operands: tuple[int, ...]
    time_step: int
    cz_site: CzSiteId | None = None


@dataclass(frozen=True)
class DetectorDef:
    measurement_refs: tuple[int, ...]


@dataclass(frozen=True)
class ObservableDef:
    measurement_refs: tuple[int, ...]


@dataclass(frozen=True)
class HeraldKey:
    """Identity of a heralded-loss event: which slot, seen at which round.

    ``kind`` is "data" for LDU / final-readout heralds (slot = data index,
    round = R for the final transversal measurement) and "ancilla" for
    ancilla-measurement heralds (slot = stabilizer index).
    """

    kind: str
    slot: int
    round: int


@dataclass
class Circuit:
    """Built memory-experiment circuit plus derived lookup tables."""

    distance: int
    rounds: int
    operations: list[Operation]
    detectors: list[DetectorDef]
    observable: ObservableDef
    n_wires: int
    wire_roles: list[QubitRole]
    layout: Layout
    # measurement index -> op index, and the herald identity of that measurement
    measure_ops: list[int] = field(default_factory=list)
    herald_keys: list[HeraldKey | None] = field(default_factory=list)
    # cz site id -> (op index, operand wires); ordered by time
    site_ops: list[int] = field(default_factory=list)
    site_ids: list[CzSiteId] = field(default_factory=list)

    @property
    def n_data(self) -> int:
        return self.distance * self.distance

    @property
    def n_detectors(self) -> int:
        return len(self.detectors)

    @property
    def n_measurements(self) -> int:
        return len(self.measure_ops)

    @property
    def n_sites(self) -> int:
        return len(self.site_ops)

    def data_wire(self, slot: int, round: int) -> int:
        """Wire holding data slot ``slot`` during round ``round`` (0..rounds)."""
        if round == 0:
            return slot
        lay = self.layout
        return lay.n_data + lay.n_stabilizers + (round - 1) * lay.n_data + slot

    def site_operands(self, site_index: int) -> tuple[int, int]:
        op = self.operations[self.site_ops[site_index]]
        return op.operands[0], op.operands[1]


def build_memory_circuit(d: int, rounds: int) -> Circuit:
    """Build the |0>_L memory experiment: ``rounds`` cycles of (syndrome
    extraction, one LDU per data slot), then transversal Z readout."""
    if d < 3 or d % 2 == 0:
        raise ValueError(f"distance must be an odd integer >= 3, got {d}")
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")

    lay = Layout(d)
    n_data, n_anc = lay.n_data, lay.n_stabilizers
    anc_wire = lambda s: n_data + s  # noqa: E731 - tiny local alias
    n_wires = n_data + n_anc + rounds * n_data
    roles = (
        [QubitRole.DATA] * n_data
        + [QubitRole.ANCILLA] * n_anc
        + [QubitRole.FRESH] * (rounds * n_data)
    )

    ops: list[Operation] = []
    t = 0

    def emit(kind, operands, site=None):
        ops.append(Operation(kind, tuple(operands), t, site))

    # Initial data preparation in |0..0>.
    for q in range(n_data):
        emit(OpKind.PREP_0, (q,))
    t += 1

    meas_of_anc: dict[tuple[int, int], int] = {}
    meas_of_ldu: dict[tuple[int, int], int] = {}
    meas_of_final: dict[int, int] = {}
    measure_ops: list[int] = []
    herald_keys: list[HeraldKey | None] = []

    def emit_measure(kind, operands, herald, registry, key):
        registry[key] = len(measure_ops)
        measure_ops.append(len(ops))
        herald_keys.append(herald)
        emit(kind, operands)

    fresh0 = n_data + n_anc
    data_wire = lambda q, r: q if r == 0 else fresh0 + (r - 1) * n_data + q  # noqa: E731

    for r in range(rounds):
        gate_index = 0
        # Ancilla (re-)preparation; restores atoms lost in earlier rounds.
        for s in lay.stabilizers:
            emit(OpKind.PREP_PLUS, (anc_wire(s.index),))
        t += 1

        # X-stabilizer phase: H on data, four CZ steps, H on data.
        for q in range(n_data):
            emit(OpKind.HADAMARD, (data_wire(q, r),))
        t += 1
        for step in range(4):
            for s in lay.x_stabs:
                for q, st in zip(s.support, s.steps):
                    if st == step:
                        site = CzSiteId(r, gate_index, SiteContext.SYNDROME)
                        gate_index += 1
                        emit(OpKind.CZ, (anc_wire(s.index), data_wire(q, r)), site)
            t += 1
        for q in range(n_data):
            emit(OpKind.HADAMARD, (data_wire(q, r),))
        t += 1

        # Z-stabilizer phase: plain CZ steps.
        for step in range(4):
            for s in lay.z_stabs:
                for q, st in zip(s.support, s.steps):
                    if st == step:
                        site = CzSiteId(r, gate_index, SiteContext.SYNDROME)
                        gate_index += 1
                        emit(OpKind.CZ, (anc_wire(s.index), data_wire(q, r)), site)
            t += 1

        # Ancilla readout (X basis; ancillas were prepared in |+>).
        for s in lay.stabilizers:
            emit_measure(
                OpKind.MEASURE_X,
                (anc_wire(s.index),),
                HeraldKey("ancilla", s.index, r),
                meas_of_anc,
                (s.index, r),
            )
        t += 1

        # LDU layer: teleport every data slot onto a fresh atom.
        for q in range(n_data):
            old, fresh = data_wire(q, r), data_wire(q, r + 1)
            emit(OpKind.PREP_PLUS, (fresh,))
            emit(OpKind.CZ, (old, fresh), CzSiteId(r, q, SiteContext.LDU))
            emit(OpKind.HADAMARD, (fresh,))
            emit_measure(
                OpKind.LDU_MEASURE,
                (old, fresh),
                HeraldKey("data", q, r),
                meas_of_ldu,
                (q, r),
            )
        t += 1

    # Transversal Z readout of the surviving atoms.
    for q in range(n_data):
        emit_measure(
            OpKind.MEASURE_Z,
            (data_wire(q, rounds),),
            HeraldKey("data", q, rounds),
            meas_of_final,
            q,
        )
    t += 1

    # Detectors.  Order: round-0 Z, then per round (Z, X), then final Z.
    detectors: list[DetectorDef] = []
    for s in lay.z_stabs:
        detectors.append(DetectorDef((meas_of_anc[(s.index, 0)],)))
    for r in range(1, rounds):
        for s in lay.z_stabs:
            detectors.append(
                DetectorDef((meas_of_anc[(s.index, r)], meas_of_anc[(s.index, r - 1)]))
            )
        for s in lay.x_stabs:
            refs = [meas_of_anc[(s.index, r)], meas_of_anc[(s.index, r - 1)]]
            refs += [meas_of_ldu[(q, r - 1)] for q in s.support]
            detectors.append(DetectorDef(tuple(refs)))
    for s in lay.z_stabs:
        refs = [meas_of_anc[(s.index, rounds - 1)]]
        refs += [meas_of_final[q] for q in s.support]
        detectors.append(DetectorDef(tuple(refs)))

    observable = ObservableDef(tuple(meas_of_final[q] for q in lay.logical_z_support()))

    circ = Circuit(
        distance=d,
        rounds=rounds,
        operations=ops,
        detectors=detectors,
        observable=observable,
        n_wires=n_wires,
        wire_roles=roles,
        layout=lay,
        measure_ops=measure_ops,
        herald_keys=herald_keys,
    )
    for i, op in enumerate(ops):
        if op.kind is OpKind.CZ:
            circ.site_ops.append(i)
            circ.site_ids.append(op.cz_site)
    return circ


def enumerate_cz_sites(c: Circuit) -> list[tuple[CzSiteId, tuple[int, int]]]:
    """All CZ sites in execution order with their operand wires."""
    return [(c.site_ids[k], c.site_operands(k)) for k in range(c.n_sites)]


def validate(c: Circuit) -> list[str]:
    """Diagnostic pass; returns a list of human-readable problems."""
    problems: list[str] = []
    n_meas = c.n_measurements
    seen_sites: set[CzSiteId] = set()
    for i, op in enumerate(c.operations):
        if op.kind is OpKind.CZ:
            if len(op.operands) != 2 or op.operands[0] == op.operands[1]:
                problems.append(f"op {i}: cz needs two distinct operands")
            if op.cz_site is None:
                problems.append(f"op {i}: cz without a site id")
            elif op.cz_site in seen_sites:
                problems.append(f"op {i}: duplicate cz site {op.cz_site}")
            else:
                seen_sites.add(op.cz_site)
        elif op.cz_site is not None:
            problems.append(f"op {i}: cz_site set on non-cz op")
        for w in op.operands:
            if not 0 <= w < c.n_wires:
                problems.append(f"op {i}: operand wire {w} out of range")
    for k, det in enumerate(c.detectors):
        if not det.measurement_refs:
            problems.append(f"detector {k}: empty")
        for ref in det.measurement_refs:
            if not 0 <= ref < n_meas:
                problems.append(f"detector {k}: dangling measurement ref {ref}")
    for ref in c.observable.measurement_refs:
        if not 0 <= ref < n_meas:
            problems.append(f"observable: dangling measurement ref {ref}")
    if not problems:
        from .sim import run_batch  # local import: sim depends on circuit

        from .noise import NoiseParams

        records = run_batch(c, NoiseParams(0.0, 0.0, 0.0), n_shots=4, seed=7)
        for rec in records:
            if any(rec.detectors) or rec.observable:
                problems.append("noiseless run produced nonzero detectors/observable")
                break
    return problems


def serialize(c: Circuit) -> str:
    """Line-oriented text form, one operation per line; stable field order."""
    lines = [f"# atomloss circuit d={c.distance} rounds={c.rounds}"]
    for op in c.operations:
        site = str(op.cz_site) if op.cz_site else "-"
        operands = ",".join(str(w) for w in op.operands)
        lines.append(f"{op.kind.value} {operands} {op.time_step} {site}")
    for det in c.detectors:
        lines.append("detector " + ",".join(str(r) for r in det.measurement_refs))
    lines.append("observable " + ",".join(str(r) for r in c.observable.measurement_refs))
    return "\n".join(lines) + "\n"
