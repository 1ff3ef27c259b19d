"""Rotated surface-code lattice geometry.

Data qubits sit on a d x d grid, indexed row-major.  Stabilizers live on the
cells of the dual grid: weight-4 plaquettes in the bulk and weight-2
half-plaquettes on the boundary.  X-type half-plaquettes sit on the top and
bottom edges, Z-type on the left and right edges, so a horizontal row of Z
operators is a logical Z and a vertical column of X operators is a logical X.

Each stabilizer carries a CZ schedule: the step (0..3) at which each support
qubit interacts with the ancilla.  A mid-extraction ancilla fault (or an
erased ancilla) deposits its own Pauli type onto the data qubits of the
remaining steps, so the final step pair must lie perpendicular to the
logical operator of that Pauli type: X plaquettes end on a horizontal pair
(logical X runs vertically) and Z plaquettes end on a vertical pair
(logical Z runs horizontally).
"""

from __future__ import annotations

from dataclasses import dataclass


# Relative corner offsets of a cell (i, j): data qubit (i-1+dr, j-1+dc).
_CORNERS = {"NW": (0, 0), "NE": (0, 1), "SW": (1, 0), "SE": (1, 1)}
_Z_ORDER = ("NW", "SW", "NE", "SE")  # ends on the vertical pair {NE, SE}
_X_ORDER = ("NW", "NE", "SW", "SE")  # ends on the horizontal pair {SW, SE}


@dataclass(frozen=True)
class Stabilizer:
    """One X- or Z-type stabilizer of the rotated layout.

    ``support`` holds data-qubit indices ordered by schedule step, and
    ``steps`` the matching CZ step (0..3) for each.
    """

    index: int
    kind: str  # "X" or "Z"
    cell: tuple[int, int]
    support: tuple[int, ...]
    steps: tuple[int, ...]


class Layout:
    """Geometry of a distance-d rotated surface code."""

    def __init__(self, distance: int):
        if distance < 3 or distance % 2 == 0:
            raise ValueError(f"distance must be an odd integer >= 3, got {distance}")
        self.distance = distance
        self.n_data = distance * distance
        self.z_stabs: list[Stabilizer] = []
        self.x_stabs: list[Stabilizer] = []
        self._build()

    def data_index(self, row: int, col: int) -> int:
        return row * self.distance + col

    def _cell_support(self, i: int, j: int, order: tuple[str, ...]):
        d = self.distance
        support, steps = [], []
        for step, corner in enumerate(order):
            dr, dc = _CORNERS[corner]
            r, c = i - 1 + dr, j - 1 + dc
            if 0 <= r < d and 0 <= c < d:
                support.append(self.data_index(r, c))
                steps.append(step)
        return tuple(support), tuple(steps)

    def _build(self) -> None:
        d = self.distance
        for i in range(d + 1):
            for j in range(d + 1):
                interior = 1 <= i <= d - 1 and 1 <= j <= d - 1
                if interior:
                    kind = "Z" if (i + j) % 2 == 0 else "X"
                elif i == 0 and 1 <= j <= d - 1 and j % 2 == 1:
                    kind = "X"
                elif i == d and 1 <= j <= d - 1 and (d + j) % 2 == 1:
                    kind = "X"
                elif j == 0 and 1 <= i <= d - 1 and i % 2 == 0:
                    kind = "Z"
                elif j == d and 1 <= i <= d - 1 and (i + d) % 2 == 0:
                    kind = "Z"
                else:
                    continue
                order = _Z_ORDER if kind == "Z" else _X_ORDER
                support, steps = self._cell_support(i, j, order)
                stab = Stabilizer(0, kind, (i, j), support, steps)
                (self.z_stabs if kind == "Z" else self.x_stabs).append(stab)
        # Stable indexing: all Z stabilizers first, then X.
        self.z_stabs = [
            Stabilizer(k, s.kind, s.cell, s.support, s.steps)
            for k, s in enumerate(sorted(self.z_stabs, key=lambda s: s.cell))
        ]
        off = len(self.z_stabs)
        self.x_stabs = [
            Stabilizer(off + k, s.kind, s.cell, s.support, s.steps)
            for k, s in enumerate(sorted(self.x_stabs, key=lambda s: s.cell))
        ]

    @property
    def stabilizers(self) -> list[Stabilizer]:
        return self.z_stabs + self.x_stabs

    @property
    def n_stabilizers(self) -> int:
        return len(self.z_stabs) + len(self.x_stabs)

    def logical_z_support(self) -> tuple[int, ...]:
        """Data qubits of a horizontal logical-Z string (row 0)."""
        return tuple(self.data_index(0, c) for c in range(self.distance))
