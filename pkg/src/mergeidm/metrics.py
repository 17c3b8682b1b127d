"""Calibration cost and summary statistics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

POST_MERGE = 3.0


@dataclass(frozen=True)
class EvalWindow:
    t_start: float
    t_end: float

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError(f"empty window [{self.t_start}, {self.t_end}]")

    def mask(self, times: np.ndarray) -> np.ndarray:
        eps = 1e-9
        times = np.asarray(times)
        return (times >= self.t_start - eps) & (times <= self.t_end + eps)


def eval_window(event, post_merge: float = POST_MERGE) -> EvalWindow:
    """From the first instant the MA matters to ``post_merge`` s after the merge.

    Both ends are clipped to the TA's recording.
    """
    if event.merge_time is None or event.interaction_start is None:
        raise ValueError(f"event {event.event_id} has no merge timing")
    ta = event.ta
    lo = max(event.interaction_start, ta.t_start)
    hi = min(event.merge_time + post_merge, ta.t_end)
    return EvalWindow(lo, hi)


def theil_u(sim_profile: Sequence[float], raw_profile: Sequence[float], full_output: bool = False):
    """Theil's inequality coefficient between a simulated and a raw profile.

    Args:
        sim_profile: simulated series A.
        raw_profile: observed series B, same length.
        full_output: also return a flag telling whether both series were all
            zero (then the coefficient is defined as 0).

    Returns:
        U in [0, 1]; 0 means identical series. ``(U, degenerate)`` with
        ``full_output``.
    """
    a = np.asarray(sim_profile, dtype=float)
    b = np.asarray(raw_profile, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("profiles must be non-empty 1-d series of equal length")
    num = np.sqrt(np.mean((a - b) ** 2))
    den = np.sqrt(np.mean(a * a)) + np.sqrt(np.mean(b * b))
    degenerate = bool(den == 0.0)
    u = 0.0 if degenerate else float(min(num / den, 1.0))
    return (u, degenerate) if full_output else u


def summarize_errors(results: Sequence[float]) -> dict:
    """Mean, median, sample std, quartiles and range of per-event errors.

    Quartiles interpolate linearly between order statistics.
    """
    x = np.asarray(list(results), dtype=float)
    if x.size == 0:
        raise ValueError("no results to summarize")
    q1, median, q3 = np.percentile(x, [25, 50, 75])
    return {
        "n": int(x.size),
        "mean": float(x.mean()),
        "median": float(median),
        "std": float(x.std(ddof=1)) if x.size > 1 else 0.0,
        "q1": float(q1),
        "q3": float(q3),
        "min": float(x.min()),
        "max": float(x.max()),
    }
