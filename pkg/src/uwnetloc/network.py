"""Node layout, anchor partition and radius-based neighbourhoods."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from uwnetloc.errors import InvalidAnchor, UnknownNode

REF_ROWS = 3
REF_COLS = 9
REF_SPACING = 5.0
REF_COMM_RADIUS = 10.0
REF_SENSE_RADIUS = 8.0


@dataclass(frozen=True)
class Scenario:
    """Ground-truth world: ``positions[i]`` is node ``i`` (ids are 0..N-1)."""

    positions: np.ndarray
    anchors: frozenset
    comm_radius: float
    sense_radius: float
    _dist: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        anchors = frozenset(int(a) for a in self.anchors)
        bad = [a for a in anchors if a < 0 or a >= len(pos)]
        if bad:
            raise InvalidAnchor(f"anchor ids out of range: {sorted(bad)}")
        object.__setattr__(self, "anchors", anchors)
        if not self.comm_radius > 0 or not self.sense_radius > 0:
            raise ValueError("radii must be > 0")
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        dist.setflags(write=False)
        object.__setattr__(self, "_dist", dist)

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def unknowns(self) -> list[int]:
        return [i for i in range(self.n_nodes) if i not in self.anchors]

    @property
    def anchor_mask(self) -> np.ndarray:
        m = np.zeros(self.n_nodes, dtype=bool)
        m[list(self.anchors)] = True
        return m

    @property
    def distances(self) -> np.ndarray:
        return self._dist

    def check_node(self, i: int) -> None:
        if not 0 <= i < self.n_nodes:
            raise UnknownNode(i)

    def edges(self) -> list[tuple[int, int]]:
        """Unordered neighbour pairs ``(i, j)`` with ``i < j``."""
        adj = self.adjacency()
        ii, jj = np.nonzero(np.triu(adj, k=1))
        return list(zip(ii.tolist(), jj.tolist()))

    def adjacency(self) -> np.ndarray:
        adj = self._dist <= self.comm_radius
        np.fill_diagonal(adj, False)
        return adj

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            np.array_equal(self.positions, other.positions)
            and self.anchors == other.anchors
            and self.comm_radius == other.comm_radius
            and self.sense_radius == other.sense_radius
        )

    __hash__ = None


def build_grid(
    rows: int,
    cols: int,
    spacing: float,
    anchor_ids: Iterable[int],
    comm_radius: float,
    sense_radius: float,
) -> Scenario:
    """Rectangular grid; node ``r * cols + c`` sits at ``(c * spacing, r * spacing)``."""
    if rows < 1 or cols < 1:
        raise ValueError("grid needs at least one row and column")
    if not spacing > 0:
        raise ValueError("spacing must be > 0")
    anchor_ids = set(anchor_ids)
    n = rows * cols
    bad = sorted(a for a in anchor_ids if not 0 <= a < n)
    if bad:
        raise InvalidAnchor(f"anchor ids {bad} outside 0..{n - 1}")
    r, c = np.divmod(np.arange(n), cols)
    pos = np.column_stack([c * spacing, r * spacing]).astype(float)
    return Scenario(pos, frozenset(anchor_ids), comm_radius, sense_radius)


def corner_ids(rows: int, cols: int) -> set[int]:
    return {0, cols - 1, (rows - 1) * cols, rows * cols - 1}


def reference_scenario() -> Scenario:
    """27-node 3x9 grid, 5 m spacing, corner anchors, 10 m links, 8 m sensing."""
    return build_grid(
        REF_ROWS,
        REF_COLS,
        REF_SPACING,
        corner_ids(REF_ROWS, REF_COLS),
        REF_COMM_RADIUS,
        REF_SENSE_RADIUS,
    )


def pairwise_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return float(np.hypot(p[0] - q[0], p[1] - q[1]))


def neighbors(s: Scenario, i: int) -> set[int]:
    s.check_node(i)
    row = s.distances[i] <= s.comm_radius
    row[i] = False
    return set(np.flatnonzero(row).tolist())


def in_sensing_range(s: Scenario, target) -> set[int]:
    t = np.asarray(target, dtype=float)
    d = np.hypot(s.positions[:, 0] - t[0], s.positions[:, 1] - t[1])
    return set(np.flatnonzero(d <= s.sense_radius).tolist())
