"""Domain types shared across the toolkit.

Positions are lane-based: ``s`` is arc length along the road centerline and
``t`` the signed lateral offset (left positive). The centerline is the center
of the main lane the traffic actor drives in, so that lane has index 0 and
the on-ramp lane to its right has index -1.

A track's ``s`` refers to the vehicle's geometric center; bumpers sit at
``s +/- length / 2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

import numpy as np

SAMPLE_INTERVAL = 0.1
SAMPLE_TOLERANCE = 0.01
DRIVER_OFFSET = 1.5
MIN_EVENT_DURATION = 10.0


class ActorKind(str, enum.Enum):
    TA = "TA"
    LA = "LA"
    MA = "MA"
    FA = "FA"
    OTHER = "OTHER"


class ModelKind(str, enum.Enum):
    IDM = "IDM"
    IDM_MSA = "IDM_MSA"
    IDM_CAH = "IDM_CAH"
    LOOMING = "LOOMING"
    LOOMING_MOD = "LOOMING_MOD"
    IDM_LOOMING = "IDM_LOOMING"
    MR_IDM = "MR_IDM"


def lane_of(t: float, lane_width: float) -> int:
    """Lane index for a lateral offset; lane 0 is centered on the centerline."""
    return int(math.floor(t / lane_width + 0.5))


def lanes_of(t: np.ndarray, lane_width: float) -> np.ndarray:
    return np.floor(np.asarray(t, dtype=float) / lane_width + 0.5).astype(int)


def lane_boundary(lane_a: int, lane_b: int, lane_width: float) -> float:
    """Lateral offset of the line separating two adjacent lanes."""
    return 0.5 * (lane_a + lane_b) * lane_width


class TrajectorySample(NamedTuple):
    time: float
    s: float
    t: float
    speed: float
    accel: float
    lane_id: int


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ActorTrack:
    """Time-indexed kinematic record of one vehicle.

    Samples are stored column-wise; ``samples`` yields row views.
    """

    actor_id: str
    kind: ActorKind
    length: float
    width: float
    time: np.ndarray
    s: np.ndarray
    t: np.ndarray
    speed: np.ndarray
    accel: np.ndarray
    lane_id: np.ndarray
    interval: float = SAMPLE_INTERVAL

    def __post_init__(self):
        object.__setattr__(self, "kind", ActorKind(self.kind))
        for name in ("time", "s", "t", "speed", "accel"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "lane_id", _frozen(self.lane_id, dtype=int))

        if not (self.length > 0 and self.width > 0):
            raise ValueError(f"track {self.actor_id}: length and width must be positive")
        n = len(self.time)
        if n < 2:
            raise ValueError(f"track {self.actor_id}: needs at least 2 samples")
        for name in ("s", "t", "speed", "accel", "lane_id"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"track {self.actor_id}: column {name!r} has wrong length")
        for name in ("time", "s", "t", "speed", "accel"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"track {self.actor_id}: non-finite values in {name!r}")
        if np.any(self.speed < 0):
            raise ValueError(f"track {self.actor_id}: negative speed")
        steps = np.diff(self.time)
        if np.any(steps <= 0):
            raise ValueError(f"track {self.actor_id}: time must be strictly increasing")
        if np.any(np.abs(steps - self.interval) > SAMPLE_TOLERANCE * self.interval):
            raise ValueError(f"track {self.actor_id}: sampling interval is not uniform")

    def __eq__(self, other):
        if not isinstance(other, ActorTrack):
            return NotImplemented
        return (
            self.actor_id == other.actor_id
            and self.kind == other.kind
            and self.length == other.length
            and self.width == other.width
            and self.interval == other.interval
            and all(
                np.array_equal(getattr(self, c), getattr(other, c))
                for c in ("time", "s", "t", "speed", "accel", "lane_id")
            )
        )

    __hash__ = object.__hash__

    def __len__(self) -> int:
        return len(self.time)

    @property
    def t_start(self) -> float:
        return float(self.time[0])

    @property
    def t_end(self) -> float:
        return float(self.time[-1])

    @property
    def samples(self) -> list[TrajectorySample]:
        return list(self.iter_samples())

    def iter_samples(self) -> Iterator[TrajectorySample]:
        for i in range(len(self.time)):
            yield TrajectorySample(
                float(self.time[i]),
                float(self.s[i]),
                float(self.t[i]),
                float(self.speed[i]),
                float(self.accel[i]),
                int(self.lane_id[i]),
            )

    def covers(self, time: float) -> bool:
        eps = 1e-6 * self.interval
        return self.t_start - eps <= time <= self.t_end + eps

    def index_at(self, time: float) -> int:
        """Zero-order-hold sample index for ``time`` (clipped to the track)."""
        k = int(math.floor((time - self.t_start) / self.interval + 1e-6))
        return min(max(k, 0), len(self.time) - 1)

    def sample_at(self, time: float) -> TrajectorySample:
        i = self.index_at(time)
        return TrajectorySample(
            float(self.time[i]),
            float(self.s[i]),
            float(self.t[i]),
            float(self.speed[i]),
            float(self.accel[i]),
            int(self.lane_id[i]),
        )


@dataclass(frozen=True, eq=False)
class RoadGeometry:
    centerline: np.ndarray
    lane_width: float = 3.7
    ramp_lane_id: int = -1
    hard_nose_s: float = 0.0
    ramp_end_s: float = math.inf

    def __post_init__(self):
        pts = _frozen(self.centerline)
        object.__setattr__(self, "centerline", pts)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ValueError("centerline must be an (n >= 2, 2) array of points")
        if np.any(np.hypot(*np.diff(pts, axis=0).T) == 0):
            raise ValueError("centerline has repeated consecutive points")
        if not self.lane_width > 0:
            raise ValueError("lane_width must be positive")
        if not self.hard_nose_s < self.ramp_end_s:
            raise ValueError("hard_nose_s must lie before ramp_end_s")

    def __eq__(self, other):
        if not isinstance(other, RoadGeometry):
            return NotImplemented
        return (
            np.array_equal(self.centerline, other.centerline)
            and self.lane_width == other.lane_width
            and self.ramp_lane_id == other.ramp_lane_id
            and self.hard_nose_s == other.hard_nose_s
            and self.ramp_end_s == other.ramp_end_s
        )

    __hash__ = object.__hash__

    @classmethod
    def straight(cls, length: float = 1000.0, **kwargs) -> "RoadGeometry":
        return cls(centerline=[[0.0, 0.0], [length, 0.0]], **kwargs)


@dataclass(frozen=True)
class MergeEvent:
    """One recorded merge: actor tracks, road geometry and merge timing.

    ``merge_time`` and ``interaction_start`` are derived at ingestion
    (see :func:`mergeidm.dataio.build_event`) and may be ``None`` for events
    that never merge; such events fail validation.
    """

    event_id: str
    tracks: tuple[ActorTrack, ...]
    geometry: RoadGeometry
    merge_time: Optional[float] = None
    interaction_start: Optional[float] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))

    def tracks_of(self, kind: ActorKind) -> list[ActorTrack]:
        return [tr for tr in self.tracks if tr.kind == kind]

    def track(self, kind: ActorKind) -> Optional[ActorTrack]:
        found = self.tracks_of(kind)
        return found[0] if len(found) == 1 else None

    def by_id(self, actor_id: str) -> ActorTrack:
        for tr in self.tracks:
            if tr.actor_id == actor_id:
                return tr
        raise KeyError(actor_id)

    @property
    def ta(self) -> ActorTrack:
        ta = self.track(ActorKind.TA)
        if ta is None:
            raise ValueError(f"event {self.event_id} has no unique TA")
        return ta

    @property
    def t_start(self) -> float:
        return min(tr.t_start for tr in self.tracks)

    @property
    def t_end(self) -> float:
        return max(tr.t_end for tr in self.tracks)

    def key_actor_span(self) -> tuple[float, float]:
        """Time span during which TA, LA and MA are all recorded.

        Falls back to the span of whichever of them exist.
        """
        key = [self.track(k) for k in (ActorKind.TA, ActorKind.LA, ActorKind.MA)]
        key = [tr for tr in key if tr is not None] or list(self.tracks)
        return max(tr.t_start for tr in key), min(tr.t_end for tr in key)


class Violation(NamedTuple):
    """An event-level validity failure.

    ``code`` is a stable tally key, ``detail`` is human readable.
    """

    code: str
    detail: str

    def __str__(self) -> str:
        return self.detail


DURATION = "duration"
MISSING_ACTOR = "missing_actor"
LANE_CHANGE = "lane_change"
MERGE_TIMING = "merge_timing"


def validate_event(event: MergeEvent, min_duration: float = MIN_EVENT_DURATION) -> list[Violation]:
    """Check an event against the data filters a simulation needs.

    Returns an empty list for a usable event. Each rule contributes at most
    one violation, so one event can land in several tally categories.
    """
    out: list[Violation] = []

    missing = []
    for kind in (ActorKind.TA, ActorKind.MA, ActorKind.LA):
        n = len(event.tracks_of(kind))
        if n == 0:
            missing.append(f"no {kind.value}")
        elif n > 1:
            missing.append(f"{n} {kind.value} tracks")
    if missing:
        out.append(Violation(MISSING_ACTOR, "missing actor: " + ", ".join(missing)))

    lo, hi = event.key_actor_span()
    if hi - lo < min_duration - 1e-9:
        out.append(Violation(DURATION, f"duration < {min_duration:g} s"))

    changers = [
        tr.actor_id
        for tr in event.tracks
        if tr.kind != ActorKind.MA and np.any(tr.lane_id != tr.lane_id[0])
    ]
    if changers:
        out.append(Violation(LANE_CHANGE, "non-MA lane change: " + ", ".join(changers)))

    if not missing:
        mt = event.merge_time
        if mt is None:
            out.append(Violation(MERGE_TIMING, "merge timing: MA never enters the TA lane"))
        elif not all(
            event.track(k).covers(mt) for k in (ActorKind.TA, ActorKind.MA, ActorKind.LA)
        ):
            out.append(Violation(MERGE_TIMING, "merge timing: merge outside TA/MA/LA tracks"))
        elif event.interaction_start is None:
            out.append(Violation(MERGE_TIMING, "merge timing: MA never relevant to TA"))
        elif event.interaction_start > mt:
            out.append(Violation(MERGE_TIMING, "merge timing: interaction starts after merge"))
    return out


IDM_NAMES = ("v0", "T", "a", "b", "s0")
LOOMING_MOD_NAMES = ("v_des", "k_v", "k_la", "k_ma", "rate_sat")
LOOMING_STATE2_NAMES = ("k_v2", "k_ma2", "lat_th")

PARAM_NAMES: dict[ModelKind, tuple[str, ...]] = {
    ModelKind.IDM: IDM_NAMES,
    ModelKind.IDM_MSA: IDM_NAMES + ("p", "da_th"),
    ModelKind.IDM_CAH: IDM_NAMES,
    ModelKind.LOOMING: LOOMING_MOD_NAMES + LOOMING_STATE2_NAMES,
    ModelKind.LOOMING_MOD: LOOMING_MOD_NAMES,
    ModelKind.IDM_LOOMING: IDM_NAMES + LOOMING_MOD_NAMES,
    ModelKind.MR_IDM: IDM_NAMES + ("zeta",),
}

# Coolness factor: fixed by default, calibratable only if a caller adds it.
OPTIONAL_NAMES: dict[ModelKind, tuple[str, ...]] = {
    ModelKind.IDM_CAH: ("c",),
    ModelKind.IDM_LOOMING: ("c",),
    ModelKind.MR_IDM: ("c",),
}
COOLNESS = 0.99

DEFAULT_VALUES: dict[str, float] = {
    "v0": 30.0,
    "T": 1.5,
    "a": 1.4,
    "b": 2.0,
    "s0": 2.0,
    "c": COOLNESS,
    "zeta": 1.0,
    "p": 0.5,
    "da_th": 0.3,
    "v_des": 30.0,
    "k_v": 0.3,
    "k_la": 100.0,
    "k_ma": 100.0,
    "rate_sat": 0.02,
    "k_v2": 0.3,
    "k_ma2": 100.0,
    "lat_th": 0.5,
}

DEFAULT_BOUNDS: dict[str, tuple[float, float]] = {
    "v0": (5.0, 45.0),
    "T": (0.3, 4.0),
    "a": (0.3, 4.0),
    "b": (0.5, 5.0),
    "s0": (0.5, 10.0),
    "c": (0.8, 1.0),
    "zeta": (0.1, 3.0),
    "p": (0.0, 1.0),
    "da_th": (0.05, 1.0),
    "v_des": (5.0, 45.0),
    "k_v": (0.01, 2.0),
    "k_la": (0.0, 500.0),
    "k_ma": (0.0, 500.0),
    "rate_sat": (0.001, 0.1),
    "k_v2": (0.01, 2.0),
    "k_ma2": (0.0, 500.0),
    "lat_th": (0.05, 3.0),
}


@dataclass(frozen=True)
class ModelParams:
    """Parameter set for one acceleration law.

    ``values`` must hold exactly the names the model needs (plus optional
    extras such as the coolness factor); every value must lie in its bounds.
    """

    model_kind: ModelKind
    values: dict
    bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = ModelKind(self.model_kind)
        object.__setattr__(self, "model_kind", kind)
        values = {k: float(v) for k, v in self.values.items()}
        required = PARAM_NAMES[kind]
        allowed = set(required) | set(OPTIONAL_NAMES.get(kind, ()))
        missing = [n for n in required if n not in values]
        if missing:
            raise ValueError(f"{kind.value}: missing parameters {missing}")
        extra = sorted(set(values) - allowed)
        if extra:
            raise ValueError(f"{kind.value}: unknown parameters {extra}")
        bounds = {n: DEFAULT_BOUNDS[n] for n in values}
        bounds.update({k: (float(lo), float(hi)) for k, (lo, hi) in self.bounds.items()})
        for name, v in values.items():
            lo, hi = bounds[name]
            if not lo <= v <= hi:
                raise ValueError(f"{kind.value}: {name}={v} outside [{lo}, {hi}]")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def defaults(cls, kind, **overrides) -> "ModelParams":
        kind = ModelKind(kind)
        values = {n: DEFAULT_VALUES[n] for n in PARAM_NAMES[kind]}
        values.update(overrides)
        return cls(kind, values)

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def get(self, name: str, default=None):
        return self.values.get(name, default)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.values)

    def replace(self, **values) -> "ModelParams":
        merged = dict(self.values)
        merged.update(values)
        return ModelParams(self.model_kind, merged, self.bounds)


@dataclass(frozen=True, slots=True)
class LeaderView:
    """What the TA perceives of one actor ahead at one step.

    ``ds`` runs from the TA driver location to the actor's rear bumper;
    ``dt`` is the lateral offset between the two vehicle centers.
    """

    ds: float
    dt: float
    v_l: float
    a_l: float
    width: float
