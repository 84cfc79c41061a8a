"""Squared-range least-squares (SR-LS) localization solved to global optimality.

The target position ``u`` minimises ``sum_i (r_i^2 - ||a_i - u||^2)^2`` over
anchors ``a_i`` and ranges ``r_i``. Writing ``y = (u, alpha)`` with
``alpha = ||u||^2`` turns this into ``min ||B y - c||^2`` subject to the
single quadratic constraint ``y' D y + 2 f' y = 0``. The optimal multiplier
is the root of the monotone secular function ``phi`` on the interval where
``B'B + lambda D`` is positive definite, and is located by bisection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular

from uwnetloc.errors import NearSingular, NoBracket, RankDeficient

D_MAT = np.diag([1.0, 1.0, 0.0])
F_VEC = np.array([0.0, 0.0, -0.5])
RANK_TOL = 1e-10
PIVOT_TOL = 1e-12
DEFAULT_EPS = 1e-7
LAMBDA_UPPER_START = 100.0
MAX_DOUBLINGS = 60


@dataclass(frozen=True)
class SrlsInput:
    anchors: np.ndarray
    ranges: np.ndarray

    def __post_init__(self):
        a = np.array(self.anchors, dtype=float).reshape(-1, 2)
        r = np.array(self.ranges, dtype=float).reshape(-1)
        if len(a) != len(r):
            raise ValueError("one range per anchor required")
        if len(a) < 3:
            raise RankDeficient("need at least 3 anchors in 2D")
        if np.any(r < 0):
            raise ValueError("ranges must be >= 0")
        object.__setattr__(self, "anchors", a)
        object.__setattr__(self, "ranges", r)


@dataclass(frozen=True)
class SrlsMatrices:
    B: np.ndarray
    c: np.ndarray
    D: np.ndarray = field(default_factory=lambda: D_MAT.copy())
    f: np.ndarray = field(default_factory=lambda: F_VEC.copy())
    BtB: np.ndarray = field(init=False)
    Btc: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "BtB", self.B.T @ self.B)
        object.__setattr__(self, "Btc", self.B.T @ self.c)


@dataclass
class SrlsResult:
    position: np.ndarray
    lambda_star: float
    phi_residual: float
    n_bisections: int


def assemble(inp: SrlsInput) -> SrlsMatrices:
    a = inp.anchors
    B = np.column_stack([-2.0 * a, np.ones(len(a))])
    c = inp.ranges ** 2 - np.sum(a * a, axis=1)
    m = SrlsMatrices(B, c)
    # scale-aware rank test: smallest singular value of B relative to largest
    sv = np.linalg.svd(B, compute_uv=False)
    if sv[-1] <= RANK_TOL * max(sv[0], 1.0):
        raise RankDeficient("anchors are collinear or coincident")
    return m


def _factor(m: SrlsMatrices, lam: float):
    K = m.BtB + lam * m.D
    try:
        fac = cho_factor(K, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise NearSingular(f"B'B + lambda D not positive definite at lambda={lam}") from exc
    if np.min(np.abs(np.diag(fac[0]))) < PIVOT_TOL:
        raise NearSingular(f"Cholesky pivot below {PIVOT_TOL} at lambda={lam}")
    return fac


def y_hat(lam: float, m: SrlsMatrices) -> np.ndarray:
    """``(B'B + lam D)^-1 (B'c - lam f)``."""
    fac = _factor(m, lam)
    return cho_solve(fac, m.Btc - lam * m.f, check_finite=False)


def phi(lam: float, m: SrlsMatrices) -> float:
    y = y_hat(lam, m)
    return float(y @ m.D @ y + 2.0 * m.f @ y)


def max_generalized_eig(m: SrlsMatrices) -> float:
    """Largest ``mu`` with ``D v = mu B'B v``, via Cholesky whitening."""
    try:
        L = np.linalg.cholesky(m.BtB)
    except np.linalg.LinAlgError as exc:
        raise RankDeficient("B'B is not positive definite") from exc
    Linv_D = solve_triangular(L, m.D, lower=True)
    W = solve_triangular(L, Linv_D.T, lower=True)
    W = 0.5 * (W + W.T)
    return float(np.linalg.eigvalsh(W)[-1])


def lambda_lower(m: SrlsMatrices) -> float:
    return -1.0 / max_generalized_eig(m)


def solve_detailed(
    inp: SrlsInput,
    eps: float = DEFAULT_EPS,
    on_step: Optional[Callable[[float, float], None]] = None,
) -> SrlsResult:
    """Bisection on ``phi``; ``on_step(lo, hi)`` is called at every bracket update."""
    m = assemble(inp)
    lo = lambda_lower(m)
    lo = lo + 1e-9 * (1.0 + abs(lo))
    hi = LAMBDA_UPPER_START
    doublings = 0
    while phi(hi, m) >= 0:
        hi *= 2.0
        doublings += 1
        if doublings > MAX_DOUBLINGS:
            raise NoBracket("secular function stayed nonnegative")
    lam = 0.5 * (lo + hi)
    steps = 0
    if on_step is not None:
        on_step(lo, hi)
    while hi - lo >= eps:
        lam = 0.5 * (lo + hi)
        if phi(lam, m) >= 0:
            lo = lam
        else:
            hi = lam
        steps += 1
        if on_step is not None:
            on_step(lo, hi)
    # final secant step inside the bracket; phi is smooth and monotone there
    p_lo, p_hi = phi(lo, m), phi(hi, m)
    lam = lo + (hi - lo) * p_lo / (p_lo - p_hi) if p_lo > p_hi else 0.5 * (lo + hi)
    y = y_hat(lam, m)
    return SrlsResult(y[:2].copy(), lam, float(y @ m.D @ y + 2.0 * m.f @ y), steps)


def solve(inp: SrlsInput, eps: float = DEFAULT_EPS) -> np.ndarray:
    return solve_detailed(inp, eps).position


def objective(inp: SrlsInput, u) -> float:
    u = np.asarray(u, dtype=float)
    sq = np.sum((inp.anchors - u) ** 2, axis=1)
    return float(np.sum((inp.ranges ** 2 - sq) ** 2))


def brute_force_oracle(inp: SrlsInput, bounds, resolution: float) -> np.ndarray:
    """Exhaustive grid minimiser of the squared-range objective.

    ``bounds = (xmin, xmax, ymin, ymax)``; candidates are the centres of
    cells no wider than ``resolution``. Ties go to the smallest x, then y.
    """
    if not resolution > 0:
        raise ValueError("resolution must be > 0")
    xmin, xmax, ymin, ymax = map(float, bounds)
    nx = max(1, int(np.ceil((xmax - xmin) / resolution - 1e-9)))
    ny = max(1, int(np.ceil((ymax - ymin) / resolution - 1e-9)))
    xs = xmin + (np.arange(nx) + 0.5) * ((xmax - xmin) / nx)
    ys = ymin + (np.arange(ny) + 0.5) * ((ymax - ymin) / ny)
    r2 = inp.ranges ** 2
    best_val, best = np.inf, None
    chunk = max(1, 2_000_000 // ny)
    for start in range(0, nx, chunk):
        X = xs[start:start + chunk, None]
        total = np.zeros((len(X), ny))
        for (ax, ay), rr in zip(inp.anchors, r2):
            t = rr - ((X - ax) ** 2 + (ys[None, :] - ay) ** 2)
            total += t * t
        k = int(np.argmin(total))
        v = total.flat[k]
        if v < best_val:
            best_val = v
            ix, iy = divmod(k, ny)
            best = np.array([xs[start + ix], ys[iy]])
    return best
