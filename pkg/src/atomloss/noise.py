"""Correlated-loss and Pauli noise channels for CZ-gate circuits.

Loss model, sampled gate by gate in time order:

* with probability ``p_l`` a loss event occurs at a CZ gate;
* when both atoms are present, the first-lost atom is chosen uniformly and
  the partner is also lost with conditional probability ``p_c``;
* when exactly one operand is already absent, a loss event hits the
  remaining atom with certainty (a "forced" loss: the victim choice is
  deterministic, the event probability stays ``p_l``).  With both operands
  absent nothing can be lost;
* when the partner of a lost atom survives (the ``p_c`` coin fails), the
  survivor picks up the twirled re-excitation channel
  (3/8 I, 1/8 X, 1/8 Y, 3/8 Z) instead of the depolarizing fault;
* CZ gates with both atoms present and no loss event get the standard
  two-qubit depolarizing channel of strength ``p_d`` (15 Paulis, each
  ``p_d/15``).  Idles, single-qubit gates and measurements are noiseless.

Data slots recover from a loss because the LDU hands them a fresh atom
(re-initialized in |0> when the loss is heralded).  A lost ancilla has no
LDU: its loss is heralded by its end-of-round measurement, and the reload
takes a full cycle to stage, so the ancilla stays dark for the round of the
loss plus ``ANCILLA_DARK_ROUNDS - 1`` further rounds before its
re-preparation acts again.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, CzSiteId, OpKind

# Two-qubit Pauli table for the depolarizing channel: index 0..14 -> (pa, pb),
# 0=I, 1=X, 2=Y, 3=Z, excluding (0, 0).
_PAULI2 = tuple((i, j) for i in range(4) for j in range(4) if (i, j) != (0, 0))

SURVIVOR_PROBS = (3 / 8, 1 / 8, 1 / 8, 3 / 8)  # I, X, Y, Z

# Rounds a lost ancilla stays dark (its own loss round counts as the first).
ANCILLA_DARK_ROUNDS = 2


@dataclass(frozen=True)
class NoiseParams:
    p_l: float
    p_c: float
    p_d: float

    def __post_init__(self):
        for name in ("p_l", "p_c", "p_d"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class PauliChannel:
    p_i: float
    p_x: float
    p_y: float
    p_z: float

    def __post_init__(self):
        probs = (self.p_i, self.p_x, self.p_y, self.p_z)
        if min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"invalid Pauli channel {probs}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p_i, self.p_x, self.p_y, self.p_z)


@dataclass(frozen=True)
class LossEvent:
    site: CzSiteId
    site_index: int
    lost: tuple[int, ...]  # wires lost at this site
    first_lost: int | None  # triggering wire; None for forced losses
    forced: bool


@dataclass
class LossConfig:
    events: list[LossEvent]
    absent_at: dict[int, tuple[int, int]]  # wire -> (first absent op, end op)
    fingerprint: tuple = ()
    # kernel-ready views: ops at which wires become absent / present again
    ev_op: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    ev_wire: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    rs_op: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    rs_wire: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    # per-site status as seen by the sampler: 0 = clean (both present),
    # 1 = loss event with both atoms present, 2 = an operand was already
    # absent (no event), 3 = forced loss of the remaining atom
    site_status: np.ndarray = field(default_factory=lambda: np.empty(0, np.int8))

    def to_records(self) -> list[dict]:
        """Serializable per-event records for debugging dumps."""
        return [
            {
                "site": str(e.site),
                "lost": list(e.lost),
                "first_lost": e.first_lost,
                "forced": e.forced,
            }
            for e in self.events
        ]


@dataclass
class FaultAssignment:
    """Sampled Pauli faults: parallel arrays sorted by op index."""

    op: np.ndarray
    wire: np.ndarray
    pauli: np.ndarray  # 1=X, 2=Y, 3=Z
    fingerprint: tuple = ()


def marginal_loss_probability(p_l: float, p_c: float) -> float:
    """Per-atom, per-gate loss probability when both atoms start present."""
    return p_l * (1.0 + p_c) / 2.0


def remaining_atom_channel() -> PauliChannel:
    """Twirled channel on the surviving atom of an uncorrelated loss."""
    return PauliChannel(*SURVIVOR_PROBS)


_PAULIS_1Q = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def pauli_twirl(kraus) -> PauliChannel:
    """Project a single-qubit channel onto its Pauli-diagonal part.

    ``p_sigma = sum_k |Tr(sigma K_k)|^2 / 4`` for sigma in {I, X, Y, Z}.
    Raises ValueError if the Kraus set is not trace preserving.
    """
    ks = [np.asarray(k, dtype=complex) for k in kraus]
    total = sum(k.conj().T @ k for k in ks)
    if not np.allclose(total, np.eye(2), atol=1e-9):
        raise ValueError("Kraus set is not trace preserving")
    probs = [
        sum(abs(np.trace(sigma @ k)) ** 2 for k in ks) / 4.0 for sigma in _PAULIS_1Q
    ]
    return PauliChannel(*probs)


def decay_kraus() -> list[np.ndarray]:
    """Kraus operators of the re-excited atom's decay, with the Rydberg
    level identified with |1>: a 50/50 branching back into |0> / |1>."""
    ii, xx, yy, zz = _PAULIS_1Q
    k1 = (ii + zz) / 2.0
    k2 = (xx + 1j * yy) / (2.0 * np.sqrt(2.0))
    k3 = (ii - zz) / (2.0 * np.sqrt(2.0))
    return [k1, k2, k3]


def shot_rng(seed: int, shot: int) -> np.random.Generator:
    """Counter-based per-shot stream: independent, reproducible, parallel-safe."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed) << np.uint64(16), counter=[0, 0, 0, shot]))


def _circuit_fingerprint(c: Circuit) -> tuple:
    return (c.distance, c.rounds, c.n_sites, c.n_measurements)


def sample_losses(c: Circuit, params: NoiseParams, rng) -> LossConfig:
    """Sample loss events for one shot, walking CZ sites in time order.

    ``rng`` is either a numpy Generator or an integer seed.
    """
    if isinstance(rng, (int, np.integer)):
        rng = shot_rng(int(rng), 0)
    n_sites = c.n_sites
    u_event = rng.random(n_sites)
    u_which = rng.random(n_sites)
    u_corr = rng.random(n_sites)

    present = np.ones(c.n_wires, dtype=bool)
    events: list[LossEvent] = []
    ev_op: list[int] = []
    ev_wire: list[int] = []
    rs_op: list[int] = []
    rs_wire: list[int] = []
    lost_round = np.full(c.n_wires, -(10**9), dtype=np.int64)
    op_rounds = _op_rounds(c)
    n_anc = c.layout.n_stabilizers
    status = np.zeros(n_sites, dtype=np.int8)

    site_iter = 0
    for i, op in enumerate(c.operations):
        kind = op.kind
        if kind in (OpKind.PREP_0, OpKind.PREP_PLUS):
            w = op.operands[0]
            if (
                not present[w]
                and c.n_data <= w < c.n_data + n_anc
                and op_rounds[i] >= lost_round[w] + ANCILLA_DARK_ROUNDS
            ):
                present[w] = True
                rs_op.append(i)
                rs_wire.append(w)
        elif kind is OpKind.CZ:
            k = site_iter
            site_iter += 1
            a, b = op.operands
            pa, pb = present[a], present[b]
            if pa and pb:
                if u_event[k] < params.p_l:
                    status[k] = 1
                    first = a if u_which[k] < 0.5 else b
                    partner = b if first == a else a
                    if u_corr[k] < params.p_c:
                        lost = (first, partner)
                    else:
                        lost = (first,)
                    events.append(LossEvent(op.cz_site, k, lost, first, False))
                    for w in lost:
                        present[w] = False
                        lost_round[w] = op.cz_site.round
                        ev_op.append(i)
                        ev_wire.append(w)
            elif pa != pb:
                if u_event[k] < params.p_l:
                    status[k] = 3
                    victim = a if pa else b
                    events.append(LossEvent(op.cz_site, k, (victim,), None, True))
                    present[victim] = False
                    lost_round[victim] = op.cz_site.round
                    ev_op.append(i)
                    ev_wire.append(victim)
                else:
                    status[k] = 2
            else:
                status[k] = 2
        # Measurements do not change presence; heralding resets are handled
        # by the simulator and do not create or clear loss intervals here.

    absent_at = _absence_intervals(c, events)
    return LossConfig(
        events=events,
        absent_at=absent_at,
        fingerprint=_circuit_fingerprint(c),
        ev_op=np.asarray(ev_op, dtype=np.int32),
        ev_wire=np.asarray(ev_wire, dtype=np.int32),
        rs_op=np.asarray(rs_op, dtype=np.int32),
        rs_wire=np.asarray(rs_wire, dtype=np.int32),
        site_status=status,
    )


_op_rounds_cache: dict[int, tuple[Circuit, np.ndarray]] = {}


def _op_rounds(c: Circuit) -> np.ndarray:
    """Round index per operation (final-readout ops get ``rounds``)."""
    hit = _op_rounds_cache.get(id(c))
    if hit is not None and hit[0] is c:
        return hit[1]
    rounds = np.full(len(c.operations), c.rounds, dtype=np.int64)
    current = 0
    pending: list[int] = []
    for i, op in enumerate(c.operations):
        if op.kind is OpKind.CZ:
            current = op.cz_site.round
            for j in pending:
                rounds[j] = current
            pending.clear()
            rounds[i] = current
        else:
            pending.append(i)
    # ops after the last CZ: measurements of the last round then the final
    # transversal readout; both only need to be ordered after every prep,
    # so the default value ``c.rounds`` is fine for them.
    hit = (c, rounds)
    _op_rounds_cache[id(c)] = hit
    return rounds


def _absence_intervals(c: Circuit, events: list[LossEvent]) -> dict[int, tuple[int, int]]:
    """Per lost wire: (loss site op, eventual heralding measurement op).

    The herald is the wire's next measurement.  Data slots recover there via
    the LDU replacement; a lost ancilla stays dark afterwards and heralds
    again every remaining round.
    """
    wire_meas: dict[int, list[int]] = {}
    for op_idx in c.measure_ops:
        w = c.operations[op_idx].operands[0]
        wire_meas.setdefault(w, []).append(op_idx)
    intervals: dict[int, tuple[int, int]] = {}
    for e in events:
        start = c.site_ops[e.site_index]
        for w in e.lost:
            later = [m for m in wire_meas.get(w, []) if m > start]
            end = later[0] if later else len(c.operations)
            intervals[w] = (start, end)
    return intervals


def sample_pauli_faults(
    c: Circuit, params: NoiseParams, loss: LossConfig, rng
) -> FaultAssignment:
    """Depolarizing faults on clean CZ sites plus survivor-channel faults.

    Must be called with the LossConfig sampled from the same circuit.
    """
    if loss.fingerprint != _circuit_fingerprint(c):
        raise ValueError("loss config was sampled from a different circuit")
    if isinstance(rng, (int, np.integer)):
        rng = shot_rng(int(rng), 0)
    n_sites = c.n_sites
    u_dep = rng.random(n_sites)
    idx_dep = rng.integers(0, 15, size=n_sites)
    u_surv = rng.random(n_sites)

    # Sites losing exactly one atom non-forced: survivor channel on partner.
    survivor_at: dict[int, int] = {}
    for e in loss.events:
        if not e.forced and len(e.lost) == 1:
            a, b = c.site_operands(e.site_index)
            survivor_at[e.site_index] = b if e.lost[0] == a else a

    status = loss.site_status
    out_op: list[int] = []
    out_wire: list[int] = []
    out_pauli: list[int] = []
    cum = np.cumsum(SURVIVOR_PROBS)
    for k in range(n_sites):
        op_idx = c.site_ops[k]
        if k in survivor_at:
            u = u_surv[k]
            pauli = int(np.searchsorted(cum, u, side="right"))
            if pauli > 0:
                out_op.append(op_idx)
                out_wire.append(survivor_at[k])
                out_pauli.append(pauli)
        elif status[k] == 0 and params.p_d > 0 and u_dep[k] < params.p_d:
            pa, pb = _PAULI2[idx_dep[k]]
            a, b = c.site_operands(k)
            if pa:
                out_op.append(op_idx)
                out_wire.append(a)
                out_pauli.append(pa)
            if pb:
                out_op.append(op_idx)
                out_wire.append(b)
                out_pauli.append(pb)
    return FaultAssignment(
        op=np.asarray(out_op, dtype=np.int32),
        wire=np.asarray(out_wire, dtype=np.int32),
        pauli=np.asarray(out_pauli, dtype=np.int32),
        fingerprint=_circuit_fingerprint(c),
    )
