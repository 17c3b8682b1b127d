"""Lane-based projection and visual-angle math.

The visual angle is the angle a leading vehicle's rear face (width ``W``)
subtends at the traffic actor's driver location. The effective distance is
how far straight ahead a vehicle of the same width would sit to subtend the
same angle, so a laterally offset vehicle maps to a longer, but finite,
equivalent gap.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

DS_MIN = 0.1


class StPosition(NamedTuple):
    s: float
    t: float
    extrapolated: bool = False


def polyline_arclength(centerline: np.ndarray) -> np.ndarray:
    """Cumulative arc length at each polyline vertex."""
    pts = np.asarray(centerline, dtype=float)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    return np.concatenate(([0.0], np.cumsum(seg)))


def xy_to_st(point, centerline) -> StPosition:
    """Project a planar point onto a centerline polyline.

    Args:
        point: (x, y) in meters.
        centerline: (n, 2) polyline, direction of travel from first to last point.

    Returns:
        StPosition with arc length ``s`` of the closest point on the polyline
        and signed perpendicular offset ``t`` (left of travel positive).
        ``extrapolated`` is set when the closest point is a polyline end and
        the point lies beyond it.
    """
    s, t, ext = xy_to_st_many(np.asarray(point, dtype=float)[None, :], centerline)
    return StPosition(float(s[0]), float(t[0]), bool(ext[0]))


def xy_to_st_many(points: np.ndarray, centerline) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`xy_to_st` over an (m, 2) array of points."""
    pts = np.asarray(centerline, dtype=float)
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    a = pts[:-1]
    d = pts[1:] - pts[:-1]
    seg_len2 = np.einsum("ij,ij->i", d, d)
    cum = polyline_arclength(pts)

    # (m, k) projection parameter of every point on every segment
    w = p[:, None, :] - a[None, :, :]
    u_raw = np.einsum("mkj,kj->mk", w, d) / seg_len2
    u = np.clip(u_raw, 0.0, 1.0)
    foot = a[None, :, :] + u[..., None] * d[None, :, :]
    dist2 = np.sum((p[:, None, :] - foot) ** 2, axis=2)

    # argmin returns the first minimum, i.e. the smaller s on ties
    k = np.argmin(dist2, axis=1)
    rows = np.arange(len(p))
    uk = u[rows, k]
    dk = d[k]
    seg_len = np.sqrt(seg_len2[k])
    s = cum[k] + uk * seg_len
    wk = w[rows, k]
    cross = dk[:, 0] * wk[:, 1] - dk[:, 1] * wk[:, 0]
    t = cross / seg_len

    extrapolated = ((k == 0) & (u_raw[rows, 0] < 0.0)) | (
        (k == len(d) - 1) & (u_raw[rows, -1] > 1.0)
    )
    # when the foot is clamped to a vertex (outer corner or polyline end)
    # the perpendicular offset is ill-defined; use the signed distance to it
    clamped = (u_raw[rows, k] < 0.0) | (u_raw[rows, k] > 1.0)
    if np.any(clamped):
        dist = np.sqrt(dist2[rows, k])
        t = np.where(clamped, np.copysign(dist, cross), t)
    return s, t, extrapolated


def _corner_distances(ds: float, dt: float, width: float) -> tuple[float, float]:
    dt = abs(dt)
    half = 0.5 * width
    return math.hypot(ds, dt + half), math.hypot(ds, dt - half)


def _check(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError("invalid geometry input")


def visual_angle(ds: float, dt: float, width: float) -> float:
    """Angle (rad) subtended at the driver by a rear face of ``width``.

    ``ds`` is clamped to :data:`DS_MIN`. Evaluated as the angle between the
    two sight lines to the rear corners, which equals the law-of-cosines
    form on (d1, d2, W) without its loss of precision at small angles.
    """
    _check(ds, dt, width)
    if width <= 0:
        raise ValueError("invalid geometry input")
    ds = max(ds, DS_MIN)
    return math.atan2(width * ds, ds * ds + dt * dt - 0.25 * width * width)


def effective_distance_checked(
    ds: float, dt: float, width: float, zeta: float = 1.0
) -> tuple[float, bool]:
    """Effective distance plus a flag telling whether the floor was used.

    The lateral offset is scaled by ``zeta`` before the corner distances are
    formed. If the denominator collapses numerically the clamped absolute
    distance is returned (the effective distance never falls below it).
    """
    _check(ds, dt, width, zeta)
    if width <= 0 or zeta <= 0:
        raise ValueError("invalid geometry input")
    ds = max(ds, DS_MIN)
    dt_scaled = zeta * abs(dt)
    d1, d2 = _corner_distances(ds, dt_scaled, width)
    w2 = width * width
    total = d1 + d2
    # d1 - d2 == (d1^2 - d2^2) / (d1 + d2) == 2 dt W / (d1 + d2)
    diff = 2.0 * dt_scaled * width / total
    num = total * total - w2
    den = w2 - diff * diff
    if not (den > 0.0 and num > 0.0):
        return ds, True
    value = 0.5 * width * math.sqrt(num / den)
    if not math.isfinite(value):
        return ds, True
    return max(value, ds), False


def effective_distance(ds: float, dt: float, width: float, zeta: float = 1.0) -> float:
    return effective_distance_checked(ds, dt, width, zeta)[0]


def visual_angle_rate(theta_now: float, theta_prev, dt_step: float) -> float:
    """Backward-difference rate of the visual angle (rad/s).

    ``theta_prev`` is ``None`` on the first step an actor is seen, which
    yields a zero rate.
    """
    if dt_step <= 0:
        raise ValueError("dt_step must be positive")
    if theta_prev is None:
        return 0.0
    return (theta_now - theta_prev) / dt_step
