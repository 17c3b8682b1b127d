"""Per-step leader / merging-actor resolution for a traffic actor."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

from .core import DRIVER_OFFSET, ActorKind, MergeEvent, RoadGeometry

MA_RANGE = 40.0


class ActorState(NamedTuple):
    """Snapshot of one actor at one instant (``s`` at the vehicle center)."""

    actor_id: str
    kind: ActorKind
    s: float
    t: float
    speed: float
    accel: float
    lane_id: int
    length: float
    width: float

    @property
    def front(self) -> float:
        return self.s + 0.5 * self.length

    @property
    def rear(self) -> float:
        return self.s - 0.5 * self.length


@dataclass(frozen=True)
class ActorAssociation:
    ta_id: str
    la_id: Optional[str] = None
    ma_id: Optional[str] = None
    fa_id: Optional[str] = None

    def __post_init__(self):
        ids = [i for i in (self.ta_id, self.la_id, self.ma_id, self.fa_id) if i is not None]
        if len(set(ids)) != len(ids):
            raise ValueError(f"association ids must be distinct: {ids}")


def driver_location(ta: ActorState, driver_offset: float = DRIVER_OFFSET) -> float:
    return ta.front - driver_offset


def _ma_relevant(
    ma: ActorState,
    ta: ActorState,
    la: Optional[ActorState],
    la_leader: Optional[ActorState],
    geometry: RoadGeometry,
    driver_ref: float,
    ma_range: float,
) -> bool:
    if ma.lane_id != geometry.ramp_lane_id:
        return False
    rear = ma.rear
    if abs(rear - driver_ref) > ma_range:
        return False
    if not ma.s > geometry.hard_nose_s:
        return False
    if not rear > driver_ref:
        return False
    if la is None or rear < la.rear:
        return True
    if ma.speed < la.speed:
        return la_leader is None or rear < la_leader.rear
    return False


def associate(
    ta: ActorState,
    others: Sequence[ActorState],
    geometry: RoadGeometry,
    driver_offset: float = DRIVER_OFFSET,
    ma_range: float = MA_RANGE,
) -> ActorAssociation:
    """Resolve LA, FA and the relevant MA for ``ta`` in one snapshot.

    LA / FA are the nearest actors (by center position) ahead / behind in
    the TA's lane. An MA must sit in the ramp lane, past the hard nose, with
    its rear bumper ahead of the TA driver location and at most
    ``ma_range`` meters from it, and must be behind the LA's rear bumper, or
    when slower than the LA, behind the rear bumper of the LA's leader.
    Among several qualifying ramp actors the nearest one wins.
    """
    lane = ta.lane_id
    la = fa = None
    for o in others:
        if o.actor_id == ta.actor_id or o.lane_id != lane:
            continue
        if o.s > ta.s:
            if la is None or o.s < la.s:
                la = o
        elif fa is None or o.s > fa.s:
            fa = o

    la_leader = None
    if la is not None:
        for o in others:
            if o.lane_id == lane and o.s > la.s and o.actor_id != ta.actor_id:
                if la_leader is None or o.s < la_leader.s:
                    la_leader = o

    driver_ref = ta.front - driver_offset
    ma = None
    for o in others:
        if o.actor_id == ta.actor_id:
            continue
        if _ma_relevant(o, ta, la, la_leader, geometry, driver_ref, ma_range):
            if ma is None or o.rear < ma.rear:
                ma = o

    return ActorAssociation(
        ta_id=ta.actor_id,
        la_id=la.actor_id if la else None,
        ma_id=ma.actor_id if ma else None,
        fa_id=fa.actor_id if fa else None,
    )


def snapshot(event: MergeEvent, time: float) -> list[ActorState]:
    """Recorded state of every actor covering ``time`` (zero-order hold)."""
    out = []
    for tr in event.tracks:
        if not tr.covers(time):
            continue
        i = tr.index_at(time)
        out.append(
            ActorState(
                tr.actor_id,
                tr.kind,
                float(tr.s[i]),
                float(tr.t[i]),
                float(tr.speed[i]),
                float(tr.accel[i]),
                int(tr.lane_id[i]),
                tr.length,
                tr.width,
            )
        )
    return out


def resolve_associations(
    event: MergeEvent,
    time: float,
    ta_state: Optional[ActorState] = None,
    driver_offset: float = DRIVER_OFFSET,
) -> ActorAssociation:
    """Associations of the event's TA at ``time``.

    ``ta_state`` replaces the recorded TA state, which is how a simulation
    asks about its simulated actor.
    """
    ta_id = event.ta.actor_id
    states = snapshot(event, time)
    if ta_state is None:
        found = [st for st in states if st.actor_id == ta_id]
        if not found:
            raise ValueError(f"time {time} outside the TA track of event {event.event_id}")
        ta_state = found[0]
    return associate(ta_state, states, event.geometry, driver_offset)
