"""Distributed self-positioning by successive convex approximation.

Every unknown node ``i`` minimises, in its own coordinate only, the convex
majoriser of its share of the squared-range stress::

    f_i(x) = sum_j ||x - x_j||^4 - 4 d_ij^2 (p_i - x_j)' x + tau/2 ||x - p_i||^2

where ``p_i`` is the node's current estimate (the pivot) and ``x_j`` are the
neighbour estimates it last received. Rounds are synchronous: all nodes
solve against round-start values, then broadcast. A broadcast is lost for
every neighbour at once with probability ``packet_loss_prob`` and receivers
keep the previous value.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional

import numpy as np

from uwnetloc import rng as rngmod
from uwnetloc.errors import MissingMeasurement, NoNeighbors
from uwnetloc.network import Scenario

ARMIJO_C = 1e-4
MAX_BACKTRACKS = 30


@dataclass(frozen=True)
class Measurements:
    """One symmetric range per unordered neighbour pair, keyed ``(min, max)``."""

    ranges: Mapping[tuple[int, int], float]

    def __post_init__(self):
        clean = {}
        for (i, j), d in self.ranges.items():
            if i == j:
                raise ValueError("self-range")
            if not d > 0:
                raise ValueError(f"range for edge {(i, j)} must be > 0")
            clean[(min(i, j), max(i, j))] = float(d)
        object.__setattr__(self, "ranges", clean)

    def get(self, i: int, j: int) -> float:
        try:
            return self.ranges[(min(i, j), max(i, j))]
        except KeyError:
            raise MissingMeasurement((i, j)) from None

    def __len__(self):
        return len(self.ranges)

    @classmethod
    def exact(cls, scenario: Scenario) -> "Measurements":
        D = scenario.distances
        return cls({(i, j): float(D[i, j]) for i, j in scenario.edges()})


@dataclass(frozen=True)
class SelfLocConfig:
    max_iters: int = 50
    inner_tol: float = 1e-9
    inner_max_iters: int = 50
    packet_loss_prob: float = 0.0
    proximal_tau: float = 0.0
    init_box: Optional[tuple[float, float, float, float]] = None  # xmin, xmax, ymin, ymax
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.packet_loss_prob <= 1.0:
            raise ValueError("packet_loss_prob must lie in [0, 1]")
        if self.proximal_tau < 0:
            raise ValueError("proximal_tau must be >= 0")
        if self.max_iters < 0 or self.inner_max_iters < 1:
            raise ValueError("iteration counts must be nonnegative")
        if self.init_box is not None:
            box = tuple(float(v) for v in self.init_box)
            if len(box) != 4 or box[0] > box[1] or box[2] > box[3]:
                raise ValueError("init_box must be (xmin, xmax, ymin, ymax)")
            object.__setattr__(self, "init_box", box)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class SelfLocState:
    estimates: np.ndarray  # (N, 2)
    last_known: np.ndarray  # (N, N, 2): what i last heard from j, NaN off-neighbourhood
    iteration: int = 0

    def heard_by(self, i: int) -> dict[int, np.ndarray]:
        row = self.last_known[i]
        ok = np.flatnonzero(~np.isnan(row[:, 0]))
        return {int(j): row[j].copy() for j in ok}


@dataclass
class ExperimentTrace:
    estimates: np.ndarray  # (iters + 1, N, 2); row 0 is the initialisation
    mae: np.ndarray
    objective: np.ndarray
    config: SelfLocConfig
    seed: int
    unknowns: list = field(default_factory=list)

    @property
    def n_iterations(self) -> int:
        return len(self.mae) - 1


class Topology:
    """Padded per-unknown neighbour tables shared by all rounds of a run."""

    def __init__(self, scenario: Scenario, measurements: Measurements):
        self.scenario = scenario
        self.unknowns = np.array(scenario.unknowns, dtype=int)
        adj = scenario.adjacency()
        nbrs = [np.flatnonzero(adj[i]) for i in self.unknowns]
        k = max((len(n) for n in nbrs), default=0)
        m = len(self.unknowns)
        self.nbr_idx = np.zeros((m, max(k, 1)), dtype=int)
        self.mask = np.zeros((m, max(k, 1)), dtype=bool)
        self.d2 = np.zeros((m, max(k, 1)))
        for row, (i, nb) in enumerate(zip(self.unknowns, nbrs)):
            self.nbr_idx[row, :len(nb)] = nb
            self.mask[row, :len(nb)] = True
            for col, j in enumerate(nb):
                self.d2[row, col] = measurements.get(int(i), int(j)) ** 2
        self.adj = adj


def _local_value(x, pivot, P, d2, mask, tau):
    diff = x[:, None, :] - P
    r2 = np.sum(diff * diff, axis=-1)
    lin = 4.0 * np.sum(np.where(mask, d2, 0.0)[..., None] * (pivot[:, None, :] - P), axis=1)
    quart = np.sum(np.where(mask, r2 * r2, 0.0), axis=1)
    return quart - np.sum(lin * x, axis=1) + 0.5 * tau * np.sum((x - pivot) ** 2, axis=1)


def solve_local_batch(pivot, P, d2, mask, tau=0.0, tol=1e-9, max_iters=50):
    """Damped Newton on ``f_i`` for many nodes at once.

    ``pivot`` is (M, 2), ``P`` the fixed neighbour positions (M, K, 2),
    ``d2`` squared ranges (M, K) and ``mask`` marks real entries of the
    padded neighbour axis. Returns the (M, 2) minimisers.
    """
    pivot = np.asarray(pivot, dtype=float)
    P = np.where(mask[..., None], P, 0.0)
    w = mask.astype(float)
    lin = 4.0 * np.sum((w * d2)[..., None] * (pivot[:, None, :] - P), axis=1)
    x = pivot.copy()
    active = np.ones(len(x), dtype=bool)

    def value(xa, idx):
        diff = xa[:, None, :] - P[idx]
        r2 = np.sum(diff * diff, axis=-1)
        return (np.sum(w[idx] * r2 * r2, axis=1) - np.sum(lin[idx] * xa, axis=1)
                + 0.5 * tau * np.sum((xa - pivot[idx]) ** 2, axis=1))

    for _ in range(max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa = x[idx]
        diff = xa[:, None, :] - P[idx]
        wr2 = w[idx] * np.sum(diff * diff, axis=-1)
        g = 4.0 * np.sum(wr2[..., None] * diff, axis=1) - lin[idx] + tau * (xa - pivot[idx])
        gnorm = np.hypot(g[:, 0], g[:, 1])
        conv = gnorm <= tol
        # Hessian: sum 4 r^2 I + 8 v v' + tau I
        wd = w[idx][..., None] * diff
        h00 = 4.0 * wr2.sum(1) + 8.0 * np.sum(wd[..., 0] * diff[..., 0], 1) + tau
        h11 = 4.0 * wr2.sum(1) + 8.0 * np.sum(wd[..., 1] * diff[..., 1], 1) + tau
        h01 = 8.0 * np.sum(wd[..., 0] * diff[..., 1], 1)
        det = h00 * h11 - h01 * h01
        scale = np.maximum(np.abs(h00) + np.abs(h11), 1e-300)
        good = det > 1e-14 * scale * scale
        safe_det = np.where(good, det, 1.0)
        p0 = np.where(good, -(h11 * g[:, 0] - h01 * g[:, 1]) / safe_det, -g[:, 0])
        p1 = np.where(good, -(-h01 * g[:, 0] + h00 * g[:, 1]) / safe_det, -g[:, 1])
        p = np.column_stack([p0, p1])
        slope = np.sum(g * p, axis=1)
        f0 = value(xa, idx)
        # inside the quadratic region the decrease is below roundoff; take the full step
        tiny = -slope <= 1e-13 * (1.0 + np.abs(f0))
        t = np.ones(len(idx))
        accepted = tiny | conv
        for _ in range(MAX_BACKTRACKS):
            todo = ~accepted
            if not todo.any():
                break
            sub = np.flatnonzero(todo)
            trial = xa[sub] + t[sub, None] * p[sub]
            ok = value(trial, idx[sub]) <= f0[sub] + ARMIJO_C * t[sub] * slope[sub]
            accepted[sub[ok]] = True
            t[sub[~ok]] *= 0.5
        failed = ~accepted
        step = np.where((accepted & ~conv)[:, None], t[:, None] * p, 0.0)
        x[idx] = xa + step
        stepnorm = np.hypot(step[:, 0], step[:, 1])
        stalled = stepnorm <= 1e-15 * (1.0 + np.hypot(xa[:, 0], xa[:, 1]))
        active[idx[conv | failed | (stalled & ~conv)]] = False
    return x


def local_subproblem_solve(
    i: int,
    pivot_i,
    neighbor_positions: Mapping[int, object],
    ranges: Mapping[int, float],
    cfg: SelfLocConfig,
) -> np.ndarray:
    """Minimiser of node ``i``'s convex surrogate with neighbours held fixed."""
    if not neighbor_positions:
        raise NoNeighbors(f"node {i} has no neighbours")
    ids = sorted(neighbor_positions)
    missing = [j for j in ids if j not in ranges]
    if missing:
        raise MissingMeasurement((i, missing[0]))
    P = np.array([np.asarray(neighbor_positions[j], dtype=float) for j in ids])[None]
    d2 = np.array([float(ranges[j]) ** 2 for j in ids])[None]
    mask = np.ones_like(d2, dtype=bool)
    pivot = np.asarray(pivot_i, dtype=float).reshape(1, 2)
    out = solve_local_batch(pivot, P, d2, mask, cfg.proximal_tau, cfg.inner_tol, cfg.inner_max_iters)
    return out[0]


def local_objective(x, pivot_i, neighbor_positions, ranges, tau=0.0) -> float:
    """Value of node ``i``'s surrogate ``f_i`` at ``x``."""
    ids = sorted(neighbor_positions)
    P = np.array([neighbor_positions[j] for j in ids], dtype=float)[None]
    d2 = np.array([float(ranges[j]) ** 2 for j in ids])[None]
    mask = np.ones_like(d2, dtype=bool)
    x = np.asarray(x, dtype=float).reshape(1, 2)
    pivot = np.asarray(pivot_i, dtype=float).reshape(1, 2)
    return float(_local_value(x, pivot, P, d2, mask, tau)[0])


def objective_value(estimates, measurements: Measurements, scenario: Scenario) -> float:
    """Stress summed over unknown nodes and their neighbours (shared edges count twice)."""
    x = np.asarray(estimates, dtype=float)
    topo = measurements if isinstance(measurements, Topology) else Topology(scenario, measurements)
    return _objective(x, topo)


def _objective(x, topo: Topology) -> float:
    diff = x[topo.unknowns][:, None, :] - x[topo.nbr_idx]
    r2 = np.sum(diff * diff, axis=-1)
    t = topo.d2 - r2
    return float(np.sum(np.where(topo.mask, t * t, 0.0)))


def surrogate_value(x, pivot, measurements: Measurements, scenario: Scenario) -> float:
    x = np.asarray(x, dtype=float)
    pivot = np.asarray(pivot, dtype=float)
    topo = Topology(scenario, measurements)
    u = topo.unknowns
    diff = x[u][:, None, :] - x[topo.nbr_idx]
    r2 = np.sum(diff * diff, axis=-1)
    pdiff = pivot[u][:, None, :] - pivot[topo.nbr_idx]
    lin = np.sum(pdiff * x[u][:, None, :], axis=-1)
    terms = topo.d2 ** 2 + r2 * r2 - 4.0 * topo.d2 * lin
    return float(np.sum(np.where(topo.mask, terms, 0.0)))


def mean_absolute_error(estimates, truth, unknown_set) -> float:
    idx = np.array(sorted(unknown_set), dtype=int)
    if idx.size == 0:
        return 0.0
    e = np.asarray(estimates, dtype=float)[idx] - np.asarray(truth, dtype=float)[idx]
    return float(np.mean(np.hypot(e[:, 0], e[:, 1])))


def default_init_box(scenario: Scenario) -> tuple[float, float, float, float]:
    a = scenario.positions[sorted(scenario.anchors)]
    r = scenario.comm_radius
    return (a[:, 0].min() - r, a[:, 0].max() + r, a[:, 1].min() - r, a[:, 1].max() + r)


def initial_state(scenario: Scenario, cfg: SelfLocConfig) -> SelfLocState:
    """Random unknown estimates in the init box; round-0 handshake is lossless."""
    if not scenario.anchors:
        raise ValueError("localization needs at least one anchor")
    box = cfg.init_box or default_init_box(scenario)
    gen = rngmod.stream(cfg.seed, "selfloc-init")
    est = scenario.positions.copy()
    unknowns = scenario.unknowns
    est[unknowns, 0] = gen.uniform(box[0], box[1], size=len(unknowns))
    est[unknowns, 1] = gen.uniform(box[2], box[3], size=len(unknowns))
    adj = scenario.adjacency()
    last_known = np.where(adj[..., None], est[None, :, :], np.nan)
    return SelfLocState(est, last_known, 0)


def run_round(
    state: SelfLocState,
    scenario: Scenario,
    measurements,
    cfg: SelfLocConfig,
    rng: np.random.Generator,
) -> SelfLocState:
    """One synchronous solve-then-broadcast round."""
    topo = measurements if isinstance(measurements, Topology) else Topology(scenario, measurements)
    u = topo.unknowns
    est = state.estimates.copy()
    if u.size:
        if not topo.mask.any(axis=1).all():
            lonely = int(u[~topo.mask.any(axis=1)][0])
            raise NoNeighbors(f"node {lonely} has no neighbours")
        P = state.last_known[u[:, None], topo.nbr_idx]
        est[u] = solve_local_batch(
            state.estimates[u], P, topo.d2, topo.mask,
            cfg.proximal_tau, cfg.inner_tol, cfg.inner_max_iters,
        )
    # one uniform per node in id order; anchors draw too so indices stay aligned
    delivered = rng.random(scenario.n_nodes) >= cfg.packet_loss_prob
    last_known = state.last_known.copy()
    cols = np.flatnonzero(delivered)
    upd = topo.adj[:, cols]
    last_known[:, cols, :] = np.where(upd[..., None], est[cols][None, :, :], last_known[:, cols, :])
    return SelfLocState(est, last_known, state.iteration + 1)


def run(scenario: Scenario, measurements: Measurements, cfg: SelfLocConfig) -> ExperimentTrace:
    topo = Topology(scenario, measurements)
    state = initial_state(scenario, cfg)
    truth = scenario.positions
    unknowns = scenario.unknowns
    snaps = [state.estimates.copy()]
    mae = [mean_absolute_error(state.estimates, truth, unknowns)]
    obj = [_objective(state.estimates, topo)]
    for k in range(cfg.max_iters):
        state = run_round(state, scenario, topo, cfg, rngmod.stream(cfg.seed, "selfloc-loss", k))
        snaps.append(state.estimates.copy())
        mae.append(mean_absolute_error(state.estimates, truth, unknowns))
        obj.append(_objective(state.estimates, topo))
    return ExperimentTrace(np.array(snaps), np.array(mae), np.array(obj), cfg, cfg.seed, list(unknowns))
