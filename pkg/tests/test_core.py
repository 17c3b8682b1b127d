import math

import numpy as np
import pytest

from mergeidm.core import (
    DEFAULT_BOUNDS,
    PARAM_NAMES,
    ActorKind,
    ActorTrack,
    MergeEvent,
    ModelKind,
    ModelParams,
    RoadGeometry,
    lane_boundary,
    lane_of,
    validate_event,
)
from mergeidm.dataio import build_event

from conftest import const_track, simple_merge


def _track(**kw):
    base = dict(
        actor_id="x", kind="TA", length=4.8, width=1.9,
        time=[0.0, 0.1, 0.2], s=[0, 1, 2], t=[0, 0, 0],
        speed=[10, 10, 10], accel=[0, 0, 0], lane_id=[0, 0, 0],
    )
    base.update(kw)
    return ActorTrack(**base)


def test_track_columns_are_read_only():
    tr = _track()
    with pytest.raises(ValueError):
        tr.s[0] = 5.0
    assert tr.kind is ActorKind.TA
    assert len(tr) == 3


@pytest.mark.parametrize(
    "kw",
    [
        dict(time=[0.0, 0.1, 0.25]),
        dict(time=[0.0, 0.2, 0.1]),
        dict(speed=[10, -1, 10]),
        dict(s=[0, np.nan, 2]),
        dict(length=0.0),
        dict(accel=[0, 0]),
        dict(time=[0.0], s=[0], t=[0], speed=[1], accel=[0], lane_id=[0]),
    ],
)
def test_track_rejects_bad_columns(kw):
    with pytest.raises(ValueError):
        _track(**kw)


def test_track_sampling_and_equality():
    tr = _track()
    assert tr.sample_at(0.15).s == 1.0
    assert tr.sample_at(-3).s == 0.0
    assert tr.sample_at(99).s == 2.0
    assert tr.covers(0.2) and not tr.covers(0.3)
    assert tr == _track()
    assert tr != _track(s=[0, 1, 3])
    assert [smp.s for smp in tr.samples] == [0.0, 1.0, 2.0]


def test_lane_indexing():
    assert lane_of(0.0, 3.7) == 0
    assert lane_of(-3.7, 3.7) == -1
    assert lane_of(-1.84, 3.7) == 0
    assert lane_of(-1.86, 3.7) == -1
    assert lane_boundary(0, -1, 3.7) == pytest.approx(-1.85)


def test_geometry_validation():
    with pytest.raises(ValueError):
        RoadGeometry(centerline=[[0, 0]])
    with pytest.raises(ValueError):
        RoadGeometry(centerline=[[0, 0], [0, 0], [1, 0]])
    with pytest.raises(ValueError):
        RoadGeometry.straight(100.0, hard_nose_s=50.0, ramp_end_s=40.0)
    assert RoadGeometry.straight(10.0) == RoadGeometry.straight(10.0)


def test_param_counts():
    counts = {k: len(v) for k, v in PARAM_NAMES.items()}
    assert counts == {
        ModelKind.IDM: 5,
        ModelKind.IDM_MSA: 7,
        ModelKind.IDM_CAH: 5,
        ModelKind.LOOMING: 8,
        ModelKind.LOOMING_MOD: 5,
        ModelKind.IDM_LOOMING: 10,
        ModelKind.MR_IDM: 6,
    }


def test_model_params_defaults_and_validation():
    p = ModelParams.defaults(ModelKind.MR_IDM, zeta=0.5)
    assert p["zeta"] == 0.5
    assert p.get("c") is None
    assert set(p.names) == set(PARAM_NAMES[ModelKind.MR_IDM])
    with pytest.raises(ValueError):
        ModelParams(ModelKind.IDM, {"v0": 30, "T": 1.5, "a": 1.4, "b": 2.0})
    with pytest.raises(ValueError):
        ModelParams.defaults(ModelKind.IDM, T=99.0)
    with pytest.raises(ValueError):
        ModelParams.defaults(ModelKind.IDM, zeta=1.0)
    # the coolness factor may be opted in for calibration
    with_c = ModelParams.defaults(ModelKind.IDM_CAH, c=0.95)
    assert with_c["c"] == 0.95


def test_default_values_inside_bounds():
    for kind in ModelKind:
        p = ModelParams.defaults(kind)
        for name in p.names:
            lo, hi = DEFAULT_BOUNDS[name]
            assert lo <= p[name] <= hi


def test_valid_event_has_no_violations():
    assert validate_event(simple_merge()) == []


def test_short_event():
    found = validate_event(simple_merge(duration=8.0))
    assert [str(v) for v in found if v.code == "duration"] == ["duration < 10 s"]


def test_missing_ma():
    found = validate_event(simple_merge(ma=False))
    assert [v.code for v in found] == ["missing_actor"]
    assert "no MA" in str(found[0])


def test_la_lane_change_detected(geometry):
    t = np.where(np.arange(201) < 100, 0.0, 3.7)
    tracks = [
        const_track("ta", ActorKind.TA, 100.0, 25.0),
        const_track("la", ActorKind.LA, 160.0, 25.0, t=t),
    ]
    ev = simple_merge()
    ev = build_event("lc", [ev.ta, tracks[1], ev.track(ActorKind.MA)], ev.geometry)
    found = validate_event(ev)
    assert [str(v) for v in found if v.code == "lane_change"] == ["non-MA lane change: la"]


def test_event_accessors():
    ev = simple_merge()
    assert ev.ta.actor_id == "ta"
    assert ev.by_id("la").kind is ActorKind.LA
    with pytest.raises(KeyError):
        ev.by_id("nope")
    assert ev.key_actor_span() == (0.0, pytest.approx(20.0))
    two_tas = MergeEvent("x", (ev.ta, ev.ta), ev.geometry)
    with pytest.raises(ValueError):
        _ = two_tas.ta
    assert math.isclose(ev.t_end, 20.0)
