"""Monte-Carlo reproduction of the self-localization and tracking studies."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from uwnetloc import rng as rngmod
from uwnetloc import selfloc, srls
from uwnetloc.channel_model import (
    D_MIN,
    DEFAULT_P_TX,
    ChannelModel,
    sample_distance,
    sample_distance_db,
)
from uwnetloc.errors import NumericalError
from uwnetloc.network import Scenario, in_sensing_range
from uwnetloc.selfloc import ExperimentTrace, Measurements, SelfLocConfig

REFERENCE_STEP = 0.5

__all__ = [
    "ExperimentTrace",
    "TrackingRun",
    "generate_measurements",
    "make_trajectory",
    "reference_trajectory",
    "run_selfloc_experiment",
    "run_tracking",
]


@dataclass
class TrackingRun:
    truth: np.ndarray  # (S, 2)
    estimates: np.ndarray  # (S, 2), NaN where flagged
    n_inrange: np.ndarray  # (S,)
    flagged: np.ndarray  # (S,) bool
    seed: int

    @property
    def errors(self) -> np.ndarray:
        e = self.estimates - self.truth
        return np.hypot(e[:, 0], e[:, 1])

    @property
    def mae(self) -> Optional[float]:
        ok = ~self.flagged
        if not ok.any():
            return None
        return float(np.mean(self.errors[ok]))


def generate_measurements(scenario: Scenario, sigma_d: float, seed: int) -> Measurements:
    """One noisy range per neighbour edge, drawn once."""
    edges = scenario.edges()
    gen = rngmod.stream(seed, "measurements")
    true = np.array([scenario.distances[i, j] for i, j in edges])
    noisy = sample_distance(true, sigma_d, gen) if edges else np.zeros(0)
    return Measurements({e: float(d) for e, d in zip(edges, np.atleast_1d(noisy))})


def run_selfloc(scenario: Scenario, sigma_d: float, cfg: SelfLocConfig) -> ExperimentTrace:
    """Draw measurements from ``cfg.seed`` and run the distributed solver."""
    meas = generate_measurements(scenario, sigma_d, cfg.seed)
    return selfloc.run(scenario, meas, cfg)


def run_selfloc_experiment(
    scenario: Scenario,
    loss_levels: Sequence[float],
    n_seeds: int,
    cfg: SelfLocConfig,
    sigma_d: float = 0.63,
    first_seed: Optional[int] = None,
) -> dict[float, np.ndarray]:
    """Per-iteration MAE averaged over seeds, one curve per loss level.

    Seeds ``first_seed .. first_seed + n_seeds - 1`` (default ``cfg.seed``)
    are shared across loss levels, so every level sees the same ranges,
    initialisation and loss uniforms.
    """
    for p in loss_levels:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"loss level {p} outside [0, 1]")
    base = cfg.seed if first_seed is None else first_seed
    curves = {}
    for p in loss_levels:
        acc = np.zeros(cfg.max_iters + 1)
        for s in range(base, base + n_seeds):
            run_cfg = replace(cfg, packet_loss_prob=float(p), seed=s)
            acc += run_selfloc(scenario, sigma_d, run_cfg).mae
        curves[float(p)] = acc / n_seeds
    return curves


def make_trajectory(waypoints, step: float) -> list[np.ndarray]:
    """Samples every ``step`` metres of arc length along the polyline, endpoints kept."""
    pts = np.asarray(waypoints, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        raise ValueError("need at least two waypoints")
    if not step > 0:
        raise ValueError("step must be > 0")
    seg = np.diff(pts, axis=0)
    seglen = np.hypot(seg[:, 0], seg[:, 1])
    keep = seglen > 0
    pts = np.vstack([pts[:1], pts[1:][keep]])
    seglen = seglen[keep]
    if len(pts) < 2:
        return [pts[0].copy()]
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    total = cum[-1]
    n = int(np.floor(total / step + 1e-9))
    s = np.arange(n + 1) * step
    if total - s[-1] > 1e-9 * max(1.0, total):
        s = np.append(s, total)
    else:
        s[-1] = total
    k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seglen) - 1)
    frac = (s - cum[k]) / seglen[k]
    out = pts[k] + frac[:, None] * (pts[k + 1] - pts[k])
    return [p for p in out]


def reference_waypoints(scenario: Scenario) -> np.ndarray:
    """Serpentine along the midlines between grid rows, alternating direction.

    Turns happen on the first and last column midlines so the path stays
    strictly inside the grid.
    """
    xs = np.unique(np.round(scenario.positions[:, 0], 9))
    ys = np.unique(np.round(scenario.positions[:, 1], 9))
    if len(ys) < 2 or len(xs) < 2:
        raise ValueError("serpentine needs at least two grid rows and columns")
    mids = 0.5 * (ys[:-1] + ys[1:])
    x0, x1 = 0.5 * (xs[0] + xs[1]), 0.5 * (xs[-2] + xs[-1])
    pts = []
    for k, y in enumerate(mids):
        a, b = (x0, x1) if k % 2 == 0 else (x1, x0)
        pts += [(a, y), (b, y)]
    return np.array(pts)


def reference_trajectory(scenario: Scenario, step: float = REFERENCE_STEP) -> list[np.ndarray]:
    return make_trajectory(reference_waypoints(scenario), step)


def run_tracking(
    scenario: Scenario,
    trajectory,
    sigma_d: float,
    seed: int,
    mode: str = "distance",
    model: Optional[ChannelModel] = None,
    p_tx: float = DEFAULT_P_TX,
    eps: float = srls.DEFAULT_EPS,
) -> TrackingRun:
    """Localise a moving target from noisy ranges to in-range nodes.

    ``mode="distance"`` adds Gaussian error with std ``sigma_d`` to each
    range; ``mode="db"`` samples a noisy gain from ``model`` and inverts it.
    Samples with fewer than three non-collinear nodes in range are flagged.
    """
    if mode not in ("distance", "db"):
        raise ValueError(f"unknown ranging mode {mode!r}")
    model = model or ChannelModel()
    truth = np.asarray(trajectory, dtype=float).reshape(-1, 2)
    est = np.full_like(truth, np.nan)
    n_in = np.zeros(len(truth), dtype=int)
    flagged = np.zeros(len(truth), dtype=bool)
    for k, t in enumerate(truth):
        ids = sorted(in_sensing_range(scenario, t))
        n_in[k] = len(ids)
        if len(ids) < 3:
            flagged[k] = True
            continue
        anchors = scenario.positions[ids]
        d_true = np.hypot(anchors[:, 0] - t[0], anchors[:, 1] - t[1])
        gen = rngmod.stream(seed, "tracking", k)
        if mode == "distance":
            ranges = sample_distance(d_true, sigma_d, gen)
        else:
            ranges = sample_distance_db(model, np.maximum(d_true, D_MIN), gen, p_tx)
        try:
            est[k] = srls.solve(srls.SrlsInput(anchors, ranges), eps)
        except NumericalError:
            flagged[k] = True
    return TrackingRun(truth, est, n_in, flagged, seed)
