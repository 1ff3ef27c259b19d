"""Bit-packed stabilizer tableau (Aaronson-Gottesman CHP scheme).

The tableau holds 2n generators (n destabilizers, n stabilizers) over n
qubits.  X and Z bits are packed 64 per word; ``rr`` holds the sign bit of
each generator.  All kernels are numba-compiled; the shot executor in
``sim.py`` drives them through a compiled op program.

Gate update rules follow the CHP paper; the CZ rule is native:
``z_a ^= x_b; z_b ^= x_a; sign ^= x_a & x_b & (z_a ^ z_b)`` with pre-update
bits on the right-hand side.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

U64_1 = np.uint64(1)

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


@njit(uint64(uint64), cache=True, inline="always")
def _popcount(v):
    v = v - ((v >> np.uint64(1)) & _M1)
    v = (v & _M2) + ((v >> np.uint64(2)) & _M2)
    v = (v + (v >> np.uint64(4))) & _M4
    return (v * _H01) >> np.uint64(56)


@njit(cache=True)
def init_tableau(xs, zs, rr, n):
    """Reset to |0...0>: destabilizer i = X_i, stabilizer i = Z_i."""
    xs[:] = 0
    zs[:] = 0
    rr[:] = 0
    for i in range(n):
        xs[i, i >> 6] |= U64_1 << np.uint64(i & 63)
        zs[n + i, i >> 6] |= U64_1 << np.uint64(i & 63)


@njit(cache=True, inline="always")
def h_gate(xs, zs, rr, n2, q):
    w, b = q >> 6, U64_1 << np.uint64(q & 63)
    for i in range(n2):
        xb = xs[i, w] & b
        zb = zs[i, w] & b
        if xb and zb:
            rr[i] ^= 1
        d = xb ^ zb
        xs[i, w] ^= d
        zs[i, w] ^= d


@njit(cache=True, inline="always")
def cz_gate(xs, zs, rr, n2, a, b):
    wa, ba = a >> 6, U64_1 << np.uint64(a & 63)
    wb, bb = b >> 6, U64_1 << np.uint64(b & 63)
    for i in range(n2):
        xa = xs[i, wa] & ba
        xb = xs[i, wb] & bb
        za = zs[i, wa] & ba
        zb = zs[i, wb] & bb
        if xa and xb and ((za != 0) != (zb != 0)):
            rr[i] ^= 1
        if xb:
            zs[i, wa] ^= ba
        if xa:
            zs[i, wb] ^= bb


@njit(cache=True, inline="always")
def pauli_gate(xs, zs, rr, n2, q, pauli):
    """Apply X (1), Y (2) or Z (3): flip signs of anticommuting generators."""
    w, b = q >> 6, U64_1 << np.uint64(q & 63)
    for i in range(n2):
        xb = xs[i, w] & b
        zb = zs[i, w] & b
        if pauli == 1:
            if zb:
                rr[i] ^= 1
        elif pauli == 3:
            if xb:
                rr[i] ^= 1
        else:
            if (xb != 0) != (zb != 0):
                rr[i] ^= 1


@njit(cache=True, inline="always")
def _g_sum(xs, zs, i, h, nw):
    """Phase exponent sum of multiplying row i's Pauli into row h's."""
    total = 0
    for w in range(nw):
        x1 = xs[i, w]
        z1 = zs[i, w]
        x2 = xs[h, w]
        z2 = zs[h, w]
        my = x1 & z1
        mx = x1 & ~z1
        mz = ~x1 & z1
        plus = (my & z2 & ~x2) | (mx & x2 & z2) | (mz & x2 & ~z2)
        minus = (my & x2 & ~z2) | (mx & z2 & ~x2) | (mz & x2 & z2)
        total += int(_popcount(plus)) - int(_popcount(minus))
    return total


@njit(cache=True, inline="always")
def _rowsum(xs, zs, rr, h, i, nw):
    phase = (2 * rr[h] + 2 * rr[i] + _g_sum(xs, zs, i, h, nw)) % 4
    rr[h] = np.uint8(phase >> 1)
    for w in range(nw):
        xs[h, w] ^= xs[i, w]
        zs[h, w] ^= zs[i, w]


@njit(cache=True)
def measure_z(xs, zs, rr, n, nw, q, coin):
    """Measure Z_q; ``coin`` supplies the outcome when it is random.

    Returns 0 or 1.
    """
    w, b = q >> 6, U64_1 << np.uint64(q & 63)
    p = -1
    for i in range(n, 2 * n):
        if xs[i, w] & b:
            p = i
            break
    if p >= 0:
        for i in range(2 * n):
            if i != p and (xs[i, w] & b):
                _rowsum(xs, zs, rr, i, p, nw)
        dp = p - n
        for ww in range(nw):
            xs[dp, ww] = xs[p, ww]
            zs[dp, ww] = zs[p, ww]
            xs[p, ww] = 0
            zs[p, ww] = 0
        rr[dp] = rr[p]
        zs[p, w] = b
        rr[p] = coin
        return coin
    # Deterministic outcome: accumulate the relevant stabilizer product.
    sx = np.zeros(nw, dtype=np.uint64)
    sz = np.zeros(nw, dtype=np.uint64)
    sr = 0
    for i in range(n):
        if xs[i, w] & b:
            phase = 2 * sr + 2 * rr[n + i]
            total = 0
            for ww in range(nw):
                x1 = xs[n + i, ww]
                z1 = zs[n + i, ww]
                x2 = sx[ww]
                z2 = sz[ww]
                my = x1 & z1
                mx = x1 & ~z1
                mz = ~x1 & z1
                plus = (my & z2 & ~x2) | (mx & x2 & z2) | (mz & x2 & ~z2)
                minus = (my & x2 & ~z2) | (mx & z2 & ~x2) | (mz & x2 & z2)
                total += int(_popcount(plus)) - int(_popcount(minus))
                sx[ww] ^= x1
                sz[ww] ^= z1
            sr = np.uint8(((phase + total) % 4) >> 1)
    return sr


@njit(cache=True)
def reset_zero(xs, zs, rr, n, nw, q, coin):
    """Project wire q to |0> (measure, then X-correct if needed)."""
    m = measure_z(xs, zs, rr, n, nw, q, coin)
    if m:
        pauli_gate(xs, zs, rr, 2 * n, q, 1)


class Tableau:
    """Thin python wrapper used by tests and the reference (slow) path."""

    def __init__(self, n: int, seed: int = 0):
        self.n = n
        self.nw = (n + 63) // 64
        self.xs = np.zeros((2 * n, self.nw), dtype=np.uint64)
        self.zs = np.zeros((2 * n, self.nw), dtype=np.uint64)
        self.rr = np.zeros(2 * n, dtype=np.uint8)
        self._rng = np.random.Generator(np.random.Philox(key=seed))
        init_tableau(self.xs, self.zs, self.rr, n)

    def h(self, q: int) -> None:
        h_gate(self.xs, self.zs, self.rr, 2 * self.n, q)

    def cz(self, a: int, b: int) -> None:
        cz_gate(self.xs, self.zs, self.rr, 2 * self.n, a, b)

    def x(self, q: int) -> None:
        pauli_gate(self.xs, self.zs, self.rr, 2 * self.n, q, 1)

    def y(self, q: int) -> None:
        pauli_gate(self.xs, self.zs, self.rr, 2 * self.n, q, 2)

    def z(self, q: int) -> None:
        pauli_gate(self.xs, self.zs, self.rr, 2 * self.n, q, 3)

    def measure(self, q: int) -> int:
        coin = np.uint8(self._rng.integers(0, 2))
        return int(measure_z(self.xs, self.zs, self.rr, self.n, self.nw, q, coin))

    def reset(self, q: int) -> None:
        coin = np.uint8(self._rng.integers(0, 2))
        reset_zero(self.xs, self.zs, self.rr, self.n, self.nw, q, coin)
