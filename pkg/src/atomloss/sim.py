"""Shot execution: circuit + sampled losses + Pauli faults -> ShotRecord.

Semantics of absence: a wire marked lost takes no further part in any gate
(a CZ with an absent operand is the identity on the present one; all
back-action on survivors comes from the sampled survivor channel).  A
measurement of an absent wire records "lost", heralds it, and substitutes a
fair coin for the bit that feeds detectors.  A heralded LDU re-initializes
the incoming fresh atom in |0> when that atom is present; if the fresh atom
was itself lost during the teleport CZ the slot stays empty until the next
LDU heralds it again.  Lost ancillas are never reloaded: their stabilizer
stays dark (heralded again every round) until the experiment ends, and
their re-preparation ops act on nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .circuit import Circuit, HeraldKey, OpKind
from .noise import (
    FaultAssignment,
    LossConfig,
    NoiseParams,
    sample_losses,
    sample_pauli_faults,
    shot_rng,
)
from .tableau import cz_gate, h_gate, init_tableau, measure_z, pauli_gate, reset_zero

_OPC = {
    OpKind.PREP_0: 0,
    OpKind.PREP_PLUS: 1,
    OpKind.HADAMARD: 2,
    OpKind.CZ: 3,
    OpKind.MEASURE_Z: 4,
    OpKind.MEASURE_X: 5,
    OpKind.LDU_MEASURE: 6,
}


@dataclass
class CompiledCircuit:
    """Array form of a Circuit consumed by the numba executor."""

    circuit: Circuit
    kinds: np.ndarray
    opa: np.ndarray
    opb: np.ndarray
    meas_idx: np.ndarray  # per op: measurement index or -1
    det_flat: np.ndarray
    det_offsets: np.ndarray
    obs_refs: np.ndarray
    n_wires: int
    nw: int
    n_meas: int
    n_coins: int

    @classmethod
    def from_circuit(cls, c: Circuit) -> "CompiledCircuit":
        n_ops = len(c.operations)
        kinds = np.zeros(n_ops, dtype=np.int8)
        opa = np.zeros(n_ops, dtype=np.int32)
        opb = np.full(n_ops, -1, dtype=np.int32)
        meas_idx = np.full(n_ops, -1, dtype=np.int32)
        n_preps = 0
        m = 0
        for i, op in enumerate(c.operations):
            kinds[i] = _OPC[op.kind]
            opa[i] = op.operands[0]
            if len(op.operands) > 1:
                opb[i] = op.operands[1]
            if op.kind in (OpKind.MEASURE_Z, OpKind.MEASURE_X, OpKind.LDU_MEASURE):
                meas_idx[i] = m
                m += 1
            elif op.kind in (OpKind.PREP_0, OpKind.PREP_PLUS):
                n_preps += 1
        det_flat = np.concatenate(
            [np.asarray(d.measurement_refs, dtype=np.int64) for d in c.detectors]
        )
        det_offsets = np.zeros(len(c.detectors), dtype=np.int64)
        pos = 0
        for k, d in enumerate(c.detectors):
            det_offsets[k] = pos
            pos += len(d.measurement_refs)
        obs_refs = np.asarray(c.observable.measurement_refs, dtype=np.int64)
        return cls(
            circuit=c,
            kinds=kinds,
            opa=opa,
            opb=opb,
            meas_idx=meas_idx,
            det_flat=det_flat,
            det_offsets=det_offsets,
            obs_refs=obs_refs,
            n_wires=c.n_wires,
            nw=(c.n_wires + 63) // 64,
            n_meas=m,
            n_coins=m + n_preps + 8,
        )


_compiled_cache: dict[int, CompiledCircuit] = {}


def compiled(c: Circuit) -> CompiledCircuit:
    key = id(c)
    cc = _compiled_cache.get(key)
    if cc is None or cc.circuit is not c:
        cc = CompiledCircuit.from_circuit(c)
        _compiled_cache[key] = cc
    return cc


@njit(cache=True)
def _run_program(
    kinds,
    opa,
    opb,
    meas_idx,
    ev_op,
    ev_wire,
    rs_op,
    rs_wire,
    fl_op,
    fl_wire,
    fl_pauli,
    coins,
    xs,
    zs,
    rr,
    present,
    touched,
    n,
    nw,
    meas_bits,
    lost_mask,
):
    n2 = 2 * n
    ep = 0
    rp = 0
    fp = 0
    cp = 0  # coin pointer
    ne = ev_op.shape[0]
    nr = rs_op.shape[0]
    nf = fl_op.shape[0]
    for i in range(kinds.shape[0]):
        while ep < ne and ev_op[ep] == i:
            present[ev_wire[ep]] = False
            ep += 1
        while rp < nr and rs_op[rp] == i:
            present[rs_wire[rp]] = True
            rp += 1
        k = kinds[i]
        a = opa[i]
        if k == 0 or k == 1:  # prep_0 / prep_plus (no effect on a lost atom)
            if present[a]:
                if touched[a]:
                    reset_zero(xs, zs, rr, n, nw, a, coins[cp])
                    cp += 1
                touched[a] = True
                if k == 1:
                    h_gate(xs, zs, rr, n2, a)
        elif k == 2:  # hadamard
            if present[a]:
                h_gate(xs, zs, rr, n2, a)
        elif k == 3:  # cz
            b = opb[i]
            if present[a] and present[b]:
                cz_gate(xs, zs, rr, n2, a, b)
        elif k == 4 or k == 5:  # measure_z / measure_x
            mi = meas_idx[i]
            if present[a]:
                if k == 5:
                    h_gate(xs, zs, rr, n2, a)
                meas_bits[mi] = measure_z(xs, zs, rr, n, nw, a, coins[cp])
                cp += 1
            else:
                meas_bits[mi] = coins[cp]
                cp += 1
                lost_mask[mi] = 1
        else:  # ldu_measure(old, fresh)
            b = opb[i]
            mi = meas_idx[i]
            if present[a]:
                h_gate(xs, zs, rr, n2, a)
                meas_bits[mi] = measure_z(xs, zs, rr, n, nw, a, coins[cp])
                cp += 1
            else:
                meas_bits[mi] = coins[cp]
                cp += 1
                lost_mask[mi] = 1
                if present[b]:
                    reset_zero(xs, zs, rr, n, nw, b, coins[cp])
                    cp += 1
        while fp < nf and fl_op[fp] == i:
            if present[fl_wire[fp]]:
                pauli_gate(xs, zs, rr, n2, fl_wire[fp], fl_pauli[fp])
            fp += 1
    return cp


@dataclass
class ShotRecord:
    detectors: np.ndarray  # uint8 per detector
    observable: int
    loss_syndrome: tuple[HeraldKey, ...]
    raw_measurements: np.ndarray  # uint8 bits (coin-substituted where lost)
    lost_mask: np.ndarray


class _ShotWorkspace:
    """Reusable tableau buffers for one executor thread."""

    def __init__(self, cc: CompiledCircuit):
        n = cc.n_wires
        self.xs = np.zeros((2 * n, cc.nw), dtype=np.uint64)
        self.zs = np.zeros((2 * n, cc.nw), dtype=np.uint64)
        self.rr = np.zeros(2 * n, dtype=np.uint8)
        self.present = np.zeros(n, dtype=np.bool_)
        self.touched = np.zeros(n, dtype=np.bool_)


_ws_cache: dict[int, _ShotWorkspace] = {}


def _workspace(cc: CompiledCircuit) -> _ShotWorkspace:
    ws = _ws_cache.get(id(cc))
    if ws is None:
        ws = _ShotWorkspace(cc)
        _ws_cache[id(cc)] = ws
    return ws


_EMPTY_I32 = np.empty(0, dtype=np.int32)


def execute(
    cc: CompiledCircuit,
    ev_op: np.ndarray,
    ev_wire: np.ndarray,
    faults: FaultAssignment,
    coins: np.ndarray,
    rs_op: np.ndarray = _EMPTY_I32,
    rs_wire: np.ndarray = _EMPTY_I32,
) -> tuple[np.ndarray, np.ndarray]:
    """Run one shot through the compiled program; returns (bits, lost_mask)."""
    ws = _workspace(cc)
    init_tableau(ws.xs, ws.zs, ws.rr, cc.n_wires)
    ws.present[:] = True  # losses are the only thing that removes an atom
    ws.touched[:] = False
    meas_bits = np.zeros(cc.n_meas, dtype=np.uint8)
    lost_mask = np.zeros(cc.n_meas, dtype=np.uint8)
    order = np.argsort(faults.op, kind="stable")
    _run_program(
        cc.kinds,
        cc.opa,
        cc.opb,
        cc.meas_idx,
        ev_op,
        ev_wire,
        rs_op,
        rs_wire,
        faults.op[order],
        faults.wire[order],
        faults.pauli[order],
        coins,
        ws.xs,
        ws.zs,
        ws.rr,
        ws.present,
        ws.touched,
        cc.n_wires,
        cc.nw,
        meas_bits,
        lost_mask,
    )
    return meas_bits, lost_mask


def detector_bits(cc: CompiledCircuit, meas_bits: np.ndarray) -> np.ndarray:
    return np.bitwise_xor.reduceat(meas_bits[cc.det_flat], cc.det_offsets)


def observable_bit(cc: CompiledCircuit, meas_bits: np.ndarray) -> int:
    return int(np.bitwise_xor.reduce(meas_bits[cc.obs_refs]))


def heralds(cc: CompiledCircuit, lost_mask: np.ndarray) -> tuple[HeraldKey, ...]:
    keys = cc.circuit.herald_keys
    return tuple(keys[m] for m in np.nonzero(lost_mask)[0])


def run_shot(c: Circuit, loss: LossConfig, faults: FaultAssignment, rng=None) -> ShotRecord:
    """Execute a single shot with the given loss and fault assignment."""
    cc = compiled(c)
    fp = (c.distance, c.rounds, c.n_sites, c.n_measurements)
    if loss.fingerprint != fp or faults.fingerprint != fp:
        raise ValueError("loss/fault assignment does not belong to this circuit")
    if rng is None:
        rng = shot_rng(0, 0)
    elif isinstance(rng, (int, np.integer)):
        rng = shot_rng(int(rng), 0)
    coins = rng.integers(0, 2, size=cc.n_coins, dtype=np.uint8)
    bits, lost = execute(
        cc, loss.ev_op, loss.ev_wire, faults, coins, loss.rs_op, loss.rs_wire
    )
    return ShotRecord(
        detectors=detector_bits(cc, bits),
        observable=observable_bit(cc, bits),
        loss_syndrome=heralds(cc, lost),
        raw_measurements=bits,
        lost_mask=lost,
    )


def run_batch(c: Circuit, params: NoiseParams, n_shots: int, seed: int) -> list[ShotRecord]:
    """Independent shots; record i depends only on (seed, i)."""
    out = []
    for shot in range(n_shots):
        rng = shot_rng(seed, shot)
        loss = sample_losses(c, params, rng)
        faults = sample_pauli_faults(c, params, loss, rng)
        out.append(run_shot(c, loss, faults, rng))
    return out


def write_records_csv(records: list[ShotRecord], path) -> None:
    """One row per shot: detector bits (hex), observable, heralds."""
    with open(path, "w") as f:
        f.write("detectors_hex,observable,heralds\n")
        for rec in records:
            packed = np.packbits(rec.detectors).tobytes().hex()
            hs = ";".join(f"{h.kind[0]}{h.slot}@{h.round}" for h in rec.loss_syndrome)
            f.write(f"{packed},{rec.observable},{hs}\n")
