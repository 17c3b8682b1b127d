"""Event files, corpus filtering and synthetic scenario generation.

An event file is one JSON document (``*.event.json``)::

    {
      "schema_version": 1,
      "event_id": "...",
      "geometry": {"centerline": [[x, y], ...], "lane_width": 3.7,
                   "ramp_lane_id": -1, "hard_nose_s": 150.0, "ramp_end_s": 400.0},
      "actors": [
        {"actor_id": "ta", "kind": "TA", "length": 4.8, "width": 1.9,
         "columns": ["time", "s", "t", "speed", "accel", "lane_id"],
         "samples": [[0.0, 100.0, 0.0, 25.0, 0.0, 0], ...]},
        ...
      ],
      "meta": {...}
    }

``accel`` and ``lane_id`` columns are optional. Planar tracks may give
``x``/``y`` instead of ``s``/``t``; they are projected onto the centerline.
Lane ids are always recomputed from the lateral offset, and merge timing is
always derived, so the file never has the last word on either.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .association import resolve_associations
from .core import (
    SAMPLE_INTERVAL,
    SAMPLE_TOLERANCE,
    ActorKind,
    ActorTrack,
    MergeEvent,
    ModelKind,
    ModelParams,
    RoadGeometry,
    lane_boundary,
    lanes_of,
    validate_event,
)
from .geometry import xy_to_st_many

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EVENT_SUFFIX = ".event.json"


class EventFormatError(ValueError):
    pass


# --------------------------------------------------------------------------
# building events


def merge_time_of(ma: ActorTrack, ta_lane: int, geometry: RoadGeometry) -> Optional[float]:
    """First instant the MA center crosses into the TA lane (interpolated)."""
    inside = np.flatnonzero(ma.lane_id == ta_lane)
    if inside.size == 0:
        return None
    i = int(inside[0])
    if i == 0:
        return ma.t_start
    line = lane_boundary(ta_lane, int(ma.lane_id[i - 1]), geometry.lane_width)
    t_prev, t_next = float(ma.t[i - 1]), float(ma.t[i])
    frac = (line - t_prev) / (t_next - t_prev) if t_next != t_prev else 1.0
    frac = min(max(frac, 0.0), 1.0)
    return float(ma.time[i - 1] + frac * (ma.time[i] - ma.time[i - 1]))


def interaction_start_of(event: MergeEvent, ma_id: str, until: float) -> Optional[float]:
    """First TA sample time at which ``ma_id`` is the TA's relevant MA."""
    ta = event.ta
    for time in ta.time:
        time = float(time)
        if time > until + 1e-9:
            break
        if resolve_associations(event, time).ma_id == ma_id:
            return time
    return None


def build_event(event_id: str, tracks: Sequence[ActorTrack], geometry: RoadGeometry, meta=None) -> MergeEvent:
    """Assemble an event and derive its merge timing."""
    event = MergeEvent(event_id, tuple(tracks), geometry, meta=dict(meta or {}))
    ta, ma = event.track(ActorKind.TA), event.track(ActorKind.MA)
    if ta is None or ma is None:
        return event
    merge_time = merge_time_of(ma, int(ta.lane_id[0]), geometry)
    if merge_time is None:
        return event
    start = interaction_start_of(event, ma.actor_id, merge_time)
    return MergeEvent(event_id, event.tracks, geometry, merge_time, start, meta=event.meta)


def make_track(
    actor_id: str,
    kind,
    length: float,
    width: float,
    time,
    s,
    t,
    speed,
    accel=None,
    lane_width: float = 3.7,
    interval: float = SAMPLE_INTERVAL,
) -> ActorTrack:
    """Build a track, resampling onto a uniform grid when needed.

    Missing accelerations are derived from speed by centered differences.
    Lane ids come from the lateral offset.
    """
    time = np.asarray(time, dtype=float)
    cols = [np.asarray(c, dtype=float) for c in (s, t, speed)]
    acc = None if accel is None else np.asarray(accel, dtype=float)
    if len(time) >= 2:
        steps = np.diff(time)
        uniform = np.all(steps > 0) and np.all(np.abs(steps - interval) <= SAMPLE_TOLERANCE * interval)
        if not uniform:
            if np.any(steps <= 0):
                raise EventFormatError(f"track {actor_id}: time must be strictly increasing")
            n = int(math.floor((time[-1] - time[0]) / interval + 1e-6)) + 1
            grid = time[0] + interval * np.arange(n)
            cols = [np.interp(grid, time, c) for c in cols]
            if acc is not None:
                acc = np.interp(grid, time, acc)
            time = grid
    s_, t_, v_ = cols
    if acc is None:
        acc = np.gradient(v_, time) if len(time) >= 2 else np.zeros_like(v_)
    return ActorTrack(
        actor_id=str(actor_id),
        kind=ActorKind(kind),
        length=float(length),
        width=float(width),
        time=time,
        s=s_,
        t=t_,
        speed=v_,
        accel=acc,
        lane_id=lanes_of(t_, lane_width),
        interval=interval,
    )


# --------------------------------------------------------------------------
# JSON


def geometry_to_dict(geometry: RoadGeometry) -> dict:
    return {
        "centerline": geometry.centerline.tolist(),
        "lane_width": geometry.lane_width,
        "ramp_lane_id": geometry.ramp_lane_id,
        "hard_nose_s": geometry.hard_nose_s,
        "ramp_end_s": geometry.ramp_end_s if math.isfinite(geometry.ramp_end_s) else None,
    }


def geometry_from_dict(d: dict) -> RoadGeometry:
    ramp_end = d.get("ramp_end_s")
    return RoadGeometry(
        centerline=d["centerline"],
        lane_width=float(d.get("lane_width", 3.7)),
        ramp_lane_id=int(d.get("ramp_lane_id", -1)),
        hard_nose_s=float(d.get("hard_nose_s", 0.0)),
        ramp_end_s=math.inf if ramp_end is None else float(ramp_end),
    )


def event_to_dict(event: MergeEvent) -> dict:
    actors = []
    for tr in event.tracks:
        rows = np.column_stack([tr.time, tr.s, tr.t, tr.speed, tr.accel]).tolist()
        lanes = tr.lane_id.tolist()
        actors.append(
            {
                "actor_id": tr.actor_id,
                "kind": tr.kind.value,
                "length": tr.length,
                "width": tr.width,
                "columns": ["time", "s", "t", "speed", "accel", "lane_id"],
                "samples": [row + [lane] for row, lane in zip(rows, lanes)],
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "event_id": event.event_id,
        "geometry": geometry_to_dict(event.geometry),
        "merge_time": event.merge_time,
        "interaction_start": event.interaction_start,
        "actors": actors,
        "meta": event.meta,
    }


def _track_from_dict(d: dict, geometry: RoadGeometry) -> ActorTrack:
    try:
        actor_id = d["actor_id"]
        columns = list(d["columns"])
        data = np.asarray(d["samples"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise EventFormatError(f"actor record malformed: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(columns):
        raise EventFormatError(f"track {actor_id}: samples do not match columns {columns}")
    col = {name: data[:, i] for i, name in enumerate(columns)}
    if "time" not in col or "speed" not in col:
        raise EventFormatError(f"track {actor_id}: needs time and speed columns")
    if "s" in col and "t" in col:
        s, t = col["s"], col["t"]
    elif "x" in col and "y" in col:
        s, t, _ = xy_to_st_many(np.column_stack([col["x"], col["y"]]), geometry.centerline)
    else:
        raise EventFormatError(f"track {actor_id}: needs s/t or x/y columns")
    try:
        return make_track(
            actor_id,
            d.get("kind", "OTHER"),
            d["length"],
            d["width"],
            col["time"],
            s,
            t,
            col["speed"],
            col.get("accel"),
            lane_width=geometry.lane_width,
        )
    except KeyError as exc:
        raise EventFormatError(f"track {actor_id}: missing field {exc}") from None
    except ValueError as exc:
        raise EventFormatError(str(exc)) from None


def event_from_dict(d: dict) -> MergeEvent:
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise EventFormatError(f"unsupported schema_version {version!r}")
    try:
        geometry = geometry_from_dict(d["geometry"])
    except (KeyError, TypeError, ValueError) as exc:
        raise EventFormatError(f"bad geometry: {exc}") from None
    tracks = [_track_from_dict(a, geometry) for a in d.get("actors", [])]
    if not tracks:
        raise EventFormatError("event has no actors")
    return build_event(str(d.get("event_id", "")), tracks, geometry, d.get("meta"))


def save_event(event: MergeEvent, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(event_to_dict(event)))
    return path


def load_event(path) -> MergeEvent:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise EventFormatError(f"invalid JSON: {exc}") from None
    return event_from_dict(d)


def save_corpus(events: Sequence[MergeEvent], directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [save_event(ev, directory / f"{ev.event_id}{EVENT_SUFFIX}") for ev in events]


def load_corpus(path) -> tuple[list[MergeEvent], list[str]]:
    """Load every event file under ``path`` (a directory or a single file).

    Returns the events that parsed plus one diagnostic line per rejected file.
    """
    path = Path(path)
    files = [path] if path.is_file() else sorted(path.glob(f"*{EVENT_SUFFIX}"))
    events, diagnostics = [], []
    for f in files:
        try:
            events.append(load_event(f))
        except (OSError, EventFormatError) as exc:
            diagnostics.append(f"{f.name}: {exc}")
    return events, diagnostics


# --------------------------------------------------------------------------
# filtering


@dataclass
class FilterResult:
    valid: list
    rejected: list
    tallies: Counter = field(default_factory=Counter)
    violations: dict = field(default_factory=dict)


def filter_corpus(events: Sequence[MergeEvent]) -> FilterResult:
    """Split events into usable and rejected ones and tally the reasons.

    An event breaking several rules counts once in each category.
    """
    result = FilterResult([], [], Counter())
    for ev in events:
        found = validate_event(ev)
        if found:
            result.rejected.append(ev)
            result.violations[ev.event_id] = [str(v) for v in found]
            result.tallies.update(v.code for v in found)
        else:
            result.valid.append(ev)
    return result


# --------------------------------------------------------------------------
# synthetic scenarios


class ScenarioError(ValueError):
    pass


STANDARD_MERGE = {
    "duration": 20.0,
    "geometry": {"length": 1000.0, "lane_width": 3.7, "hard_nose_s": 80.0, "ramp_end_s": 400.0},
    "ta": {"s": 100.0, "speed": 25.0},
    "la": {"s": 165.0, "speed": {"from": 25.0, "to": 23.5, "start": 6.0, "duration": 4.0}},
    "ma": {
        "s": 92.0,
        "speed": {"from": 29.0, "to": 22.5, "start": 4.0, "duration": 6.0},
        "lane_change": {"start": 9.0, "duration": 4.0},
    },
    "generator": {"model": "MR_IDM", "params": {}, "randomize": 0.0},
    "jitter": {},
}

DEFAULT_LENGTH = 4.8
DEFAULT_WIDTH = 1.9


def _speed_profile(spec, grid: np.ndarray, name: str) -> np.ndarray:
    """Speed series from a constant, a list of knots, or a cosine transition."""
    if isinstance(spec, (int, float)):
        v = np.full_like(grid, float(spec))
    elif isinstance(spec, dict):
        try:
            v1, v2 = float(spec["from"]), float(spec["to"])
            start, dur = float(spec["start"]), float(spec["duration"])
        except KeyError as exc:
            raise ScenarioError(f"{name}.speed transition needs {exc}") from None
        if dur <= 0:
            raise ScenarioError(f"{name}.speed transition duration must be positive")
        u = np.clip((grid - start) / dur, 0.0, 1.0)
        v = v1 + (v2 - v1) * 0.5 * (1.0 - np.cos(np.pi * u))
    else:
        knots = np.asarray(spec, dtype=float)
        if knots.ndim != 2 or knots.shape[1] != 2 or len(knots) < 1:
            raise ScenarioError(f"{name}.speed must be a number or [[time, speed], ...]")
        if np.any(np.diff(knots[:, 0]) <= 0):
            raise ScenarioError(f"{name}.speed knot times must increase")
        v = np.interp(grid, knots[:, 0], knots[:, 1])
    if np.any(v < 0):
        raise ScenarioError(f"{name}.speed must be non-negative")
    return v


def _positions(s0: float, v: np.ndarray, dt: float) -> np.ndarray:
    return s0 + np.concatenate(([0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * dt)))


def _jitter(rng, jitter: dict, key: str) -> float:
    amp = float(jitter.get(key, 0.0))
    return float(rng.uniform(-amp, amp)) if amp > 0 else 0.0


def generator_params(spec: dict, rng) -> ModelParams:
    gen = spec.get("generator", {})
    kind = ModelKind(gen.get("model", "MR_IDM"))
    params = ModelParams.defaults(kind, **gen.get("params", {}))
    spread = float(gen.get("randomize", 0.0))
    if spread > 0:
        values = {}
        for name, val in params.values.items():
            lo, hi = params.bounds[name]
            values[name] = float(np.clip(val * rng.uniform(1 - spread, 1 + spread), lo, hi))
        params = ModelParams(kind, values, params.bounds)
    return params


def generate_synthetic_event(spec: dict, seed: int = 0, event_id: Optional[str] = None) -> MergeEvent:
    """Build a merge event whose TA is driven by a known generator model.

    LA, MA and any ``others`` follow parametric speed profiles; the MA drives
    along the ramp-lane center and shifts into the main lane with a cosine
    lateral profile. The TA is rolled forward by the generator model, so its
    recorded track is exactly what that model with those parameters does.
    """
    from .simulate import SimConfig, simulate_event
    from .metrics import EvalWindow

    rng = np.random.default_rng(seed)
    jitter = spec.get("jitter", {})
    duration = float(spec.get("duration", 20.0))
    interval = float(spec.get("interval", SAMPLE_INTERVAL))
    if duration <= interval:
        raise ScenarioError("duration must exceed the sample interval")
    g = spec.get("geometry", {})
    lane_width = float(g.get("lane_width", 3.7))
    ramp_lane = int(g.get("ramp_lane_id", -1))
    hard_nose = float(g.get("hard_nose_s", 150.0))
    ramp_end = float(g.get("ramp_end_s", 400.0))
    if not hard_nose < ramp_end:
        raise ScenarioError("geometry: hard_nose_s must lie before ramp_end_s")
    if lane_width <= 0:
        raise ScenarioError("geometry: lane_width must be positive")
    geometry = RoadGeometry.straight(
        float(g.get("length", 1000.0)),
        lane_width=lane_width,
        ramp_lane_id=ramp_lane,
        hard_nose_s=hard_nose,
        ramp_end_s=ramp_end,
    )

    n = int(round(duration / interval)) + 1
    grid = interval * np.arange(n)
    speed_offset = _jitter(rng, jitter, "speed")
    tracks = []

    def actor(name, d, lane, default_s):
        s0 = float(d.get("s", default_s)) + _jitter(rng, jitter, f"{name}_s")
        v = _speed_profile(d.get("speed", 25.0), grid, name) + speed_offset
        if np.any(v < 0):
            raise ScenarioError(f"{name}.speed must be non-negative")
        t = np.full(n, lane * lane_width)
        return s0, v, t

    if "ta" not in spec or "la" not in spec:
        raise ScenarioError("scenario needs 'ta' and 'la' entries")
    ta_spec, la_spec = spec["ta"], spec["la"]
    ta_s0 = float(ta_spec.get("s", 100.0)) + _jitter(rng, jitter, "ta_s")
    ta_v0 = float(ta_spec.get("speed", 25.0)) + _jitter(rng, jitter, "ta_speed")
    if ta_v0 < 0:
        raise ScenarioError("ta.speed must be non-negative")

    la_s0, la_v, la_t = actor("la", la_spec, 0, ta_s0 + 60.0)
    if la_s0 <= ta_s0 + DEFAULT_LENGTH:
        raise ScenarioError("la.s must lie ahead of ta.s")
    tracks.append(
        make_track("la", "LA", la_spec.get("length", DEFAULT_LENGTH), la_spec.get("width", DEFAULT_WIDTH),
                   grid, _positions(la_s0, la_v, interval), la_t, la_v, lane_width=lane_width)
    )

    ma_spec = spec.get("ma")
    if ma_spec:
        ma_s0, ma_v, ma_t = actor("ma", ma_spec, ramp_lane, hard_nose)
        lc = ma_spec.get("lane_change", {"start": duration / 2, "duration": 4.0})
        lc_start = float(lc.get("start")) + _jitter(rng, jitter, "lane_change_start")
        lc_dur = float(lc.get("duration", 4.0))
        if lc_dur <= 0 or not 0 <= lc_start < duration:
            raise ScenarioError("ma.lane_change must start inside the event with positive duration")
        u = np.clip((grid - lc_start) / lc_dur, 0.0, 1.0)
        ma_t = ramp_lane * lane_width * (1.0 - 0.5 * (1.0 - np.cos(np.pi * u)))
        tracks.append(
            make_track("ma", "MA", ma_spec.get("length", DEFAULT_LENGTH), ma_spec.get("width", DEFAULT_WIDTH),
                       grid, _positions(ma_s0, ma_v, interval), ma_t, ma_v, lane_width=lane_width)
        )

    for j, other in enumerate(spec.get("others", [])):
        name = other.get("actor_id", f"other{j}")
        o_s0, o_v, o_t = actor(name, other, int(other.get("lane", 0)), ta_s0 + 100.0)
        tracks.append(
            make_track(name, "OTHER", other.get("length", DEFAULT_LENGTH), other.get("width", DEFAULT_WIDTH),
                       grid, _positions(o_s0, o_v, interval), o_t, o_v, lane_width=lane_width)
        )

    ta_len = float(ta_spec.get("length", DEFAULT_LENGTH))
    ta_wid = float(ta_spec.get("width", DEFAULT_WIDTH))
    stub_v = np.full(n, ta_v0)
    stub = make_track("ta", "TA", ta_len, ta_wid, grid, _positions(ta_s0, stub_v, interval),
                      np.zeros(n), stub_v, np.zeros(n), lane_width=lane_width)
    params = generator_params(spec, rng)
    draft = MergeEvent("draft", (stub, *tracks), geometry)
    sim = simulate_event(draft, SimConfig(params=params, step=interval, window=EvalWindow(grid[0], grid[-1])))
    ta = make_track("ta", "TA", ta_len, ta_wid, grid, sim.ta_s_profile, np.zeros(n),
                    sim.ta_speed_profile, sim.accel_profile, lane_width=lane_width)

    meta = {
        "generator": {"model": params.model_kind.value, "params": params.values},
        "seed": int(seed),
        "fallback_steps": int(sim.fallback_mask.sum()),
    }
    return build_event(event_id or f"synthetic-{seed}", [ta, *tracks], geometry, meta)
