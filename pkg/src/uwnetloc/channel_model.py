"""Linear dB path-loss model: calibration, inversion and noisy sampling.

Gain is the received-minus-transmitted power in dB and is modelled as a
straight line in distance plus zero-mean Gaussian noise::

    g = a * d + b + eps,    eps ~ N(0, noise_var)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from uwnetloc.errors import DegenerateFit, InvalidDistance

DEFAULT_SLOPE_A = -8.5  # dB/m
DEFAULT_INTERCEPT_B = -54.85  # dB
DEFAULT_NOISE_VAR = 1.15  # dB^2
DEFAULT_P_TX = 20.0  # dBm
DEFAULT_SIGMA_D = 0.63  # m
D_MIN = 0.01  # m, floor for sampled ranges


@dataclass(frozen=True)
class ChannelModel:
    slope_a: float = DEFAULT_SLOPE_A
    intercept_b: float = DEFAULT_INTERCEPT_B
    noise_var: float = DEFAULT_NOISE_VAR

    def __post_init__(self):
        if not np.isfinite(self.slope_a) or self.slope_a == 0:
            raise ValueError("slope_a must be finite and nonzero")
        if not np.isfinite(self.intercept_b):
            raise ValueError("intercept_b must be finite")
        if not np.isfinite(self.noise_var) or self.noise_var < 0:
            raise ValueError("noise_var must be finite and >= 0")


@dataclass(frozen=True)
class GainSample:
    distance: float
    gain: float

    def __post_init__(self):
        if not self.distance > 0:
            raise InvalidDistance(f"distance must be > 0, got {self.distance}")


def _as_arrays(samples: Sequence[GainSample]) -> tuple[np.ndarray, np.ndarray]:
    d = np.array([s.distance for s in samples], dtype=float)
    g = np.array([s.gain for s in samples], dtype=float)
    return d, g


def fit_linear_model(samples: Sequence[GainSample]) -> ChannelModel:
    """Least-squares line through ``(distance, gain)`` pairs.

    Solves ``min ||A x - y||^2`` with ``A = [d, 1]`` and ``x = (a, b)``; the
    noise variance is the mean squared residual of the fit.
    """
    if len(samples) < 2:
        raise DegenerateFit("need at least two samples")
    d, g = _as_arrays(samples)
    if np.ptp(d) == 0:
        raise DegenerateFit("all samples share one distance")
    A = np.column_stack([d, np.ones_like(d)])
    coef, *_ = np.linalg.lstsq(A, g, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    model = ChannelModel(slope, intercept, 0.0)
    return ChannelModel(slope, intercept, estimate_noise_variance(samples, model))


def estimate_noise_variance(samples: Sequence[GainSample], model: ChannelModel) -> float:
    if len(samples) == 0:
        raise ValueError("no samples")
    d, g = _as_arrays(samples)
    resid = model.slope_a * d + model.intercept_b - g
    return float(np.mean(resid * resid))


def gain_at(model: ChannelModel, d: float) -> float:
    if not d > 0:
        raise InvalidDistance(f"distance must be > 0, got {d}")
    return model.slope_a * d + model.intercept_b


def estimate_distance(model: ChannelModel, p_tx: float, p_rx: float) -> float:
    """Invert the gain line: ``d = ((p_rx - p_tx) - b) / a``.

    May return a nonpositive value for implausible powers; callers clamp.
    """
    return ((p_rx - p_tx) - model.intercept_b) / model.slope_a


def sample_gain(model: ChannelModel, d, rng: np.random.Generator):
    """Noisy gain at distance ``d`` (scalar or array)."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr <= 0):
        raise InvalidDistance("distance must be > 0")
    g = model.slope_a * d_arr + model.intercept_b
    g = g + rng.normal(0.0, np.sqrt(model.noise_var), size=d_arr.shape)
    return float(g) if g.ndim == 0 else g


def sample_distance(d_true, sigma_d: float, rng: np.random.Generator, d_min: float = D_MIN):
    """Range with additive Gaussian error, floored at ``d_min``.

    The floor never exceeds the true range, so a zero-noise draw is exact.
    """
    if sigma_d < 0:
        raise ValueError("sigma_d must be >= 0")
    d_arr = np.asarray(d_true, dtype=float)
    noisy = d_arr + rng.normal(0.0, sigma_d, size=d_arr.shape)
    out = np.maximum(noisy, np.minimum(d_min, d_arr))
    return float(out) if out.ndim == 0 else out


def sample_distance_db(
    model: ChannelModel,
    d_true,
    rng: np.random.Generator,
    p_tx: float = DEFAULT_P_TX,
    d_min: float = D_MIN,
):
    """Range obtained by inverting a noisy received power."""
    p_rx = p_tx + np.asarray(sample_gain(model, d_true, rng))
    d_hat = ((p_rx - p_tx) - model.intercept_b) / model.slope_a
    out = np.maximum(d_hat, d_min)
    return float(out) if np.ndim(out) == 0 else out
