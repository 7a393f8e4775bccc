"""Convergence diagnostics for simulation traces."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractViolation

DEFAULT_SLOPE_TOL = 1e-7
MIN_FIT_POINTS = 20


def estimate_error(world) -> float:
    """Sum over (estimator i, target j) of ``|v^i_j - f_j|_2``."""
    diff = world.estimates - world.freq[None, :, :]
    return float(np.linalg.norm(diff, axis=2).sum())


def lift_ne_set(ne_set: Iterable, sizes: Sequence[int]) -> np.ndarray:
    """Stack pure profiles as padded one-hot arrays of shape ``(K, n, max|A_i|)``."""
    profiles = sorted(tuple(p) for p in ne_set)
    if not profiles:
        raise ContractViolation("empty equilibrium set")
    n, width = len(sizes), max(sizes)
    out = np.zeros((len(profiles), n, width))
    for k, a in enumerate(profiles):
        if len(a) != n:
            raise ContractViolation(f"profile {a} has {len(a)} entries, expected {n}")
        out[k, np.arange(n), a] = 1.0
    return out


def ne_distance(freq, ne_set, sizes: Sequence[int] | None = None) -> float:
    """Distance from the frequency profile to the closest equilibrium in ``ne_set``.

    ``freq`` is a world (anything with ``.freq``) or an ``(n, width)`` array;
    ``ne_set`` is a lifted array or an iterable of pure profiles.
    """
    f = np.asarray(getattr(freq, "freq", freq), dtype=float)
    if isinstance(ne_set, np.ndarray):
        lifted = ne_set
    else:
        lifted = lift_ne_set(ne_set, sizes or [f.shape[1]] * f.shape[0])
    if lifted.shape[0] == 0:
        raise ContractViolation("empty equilibrium set")
    if lifted.shape[1:] != f.shape:
        raise ContractViolation(f"frequency shape {f.shape} vs equilibria {lifted.shape[1:]}")
    return float(np.linalg.norm(lifted - f[None], axis=2).sum(axis=1).min())


@dataclass(frozen=True)
class RateFit:
    """``error(t) ~ C log(t) / t`` summary over ``[t_min, t_max]``."""

    C: float
    slope: float
    t_min: int
    t_max: int
    slope_tol: float = DEFAULT_SLOPE_TOL

    @property
    def passes(self) -> bool:
        return self.slope <= self.slope_tol

    def to_dict(self) -> dict:
        return {"C": self.C, "slope": self.slope, "t_min": self.t_min, "t_max": self.t_max,
                "slope_tol": self.slope_tol, "passes": self.passes}


def fit_rate(series, t_min: int = 10, t_max: int | None = None,
             slope_tol: float = DEFAULT_SLOPE_TOL) -> RateFit:
    """Fit the normalized error ``error(t) * t / log t`` against ``t``.

    ``C`` is the largest normalized value in the window; the slope is the
    least-squares trend of the normalized series. A slope at or below
    ``slope_tol`` means the error decays at least as fast as ``log t / t``.
    """
    if t_min < 10:
        raise ContractViolation("t_min must be >= 10")
    pts = [(int(t), float(e)) for t, e in series
           if t >= t_min and (t_max is None or t <= t_max)]
    if len(pts) < MIN_FIT_POINTS:
        raise ContractViolation(f"{len(pts)} points in window, need {MIN_FIT_POINTS}")
    t = np.array([p[0] for p in pts], dtype=float)
    err = np.array([p[1] for p in pts])
    norm = err * t / np.log(t)
    tc = t - t.mean()
    slope = float(np.dot(tc, norm - norm.mean()) / np.dot(tc, tc))
    return RateFit(float(norm.max()), slope, int(t.min()), int(t.max()), slope_tol)


def ne_hit_time(trace, ne_set) -> int | None:
    """First recorded t from which every recorded action profile is in ``ne_set``."""
    ne = {tuple(p) for p in ne_set}
    records = trace.records if hasattr(trace, "records") else trace
    hit = None
    for rec in reversed(records):
        if tuple(rec.actions) not in ne:
            break
        hit = rec.t
    return hit


def normalized_error(t: int, error: float) -> float:
    return error * t / math.log(t)
