import pytest

from mergeidm.association import ActorAssociation, ActorState, associate, resolve_associations, snapshot
from mergeidm.core import ActorKind

from conftest import simple_merge

L = 4.8


def actor(actor_id, s, lane=0, speed=25.0, kind=ActorKind.OTHER):
    return ActorState(actor_id, kind, s, lane * 3.7, speed, 0.0, lane, L, 1.9)


# TA center at 100 m: front 102.4, driver at 100.9
TA = actor("ta", 100.0, kind=ActorKind.TA)


def test_leader_and_follower_are_nearest_in_lane(geometry):
    others = [actor("far", 200.0), actor("near", 150.0), actor("back", 80.0), actor("left", 120.0, lane=1)]
    assoc = associate(TA, others, geometry)
    assert (assoc.la_id, assoc.fa_id, assoc.ma_id) == ("near", "back", None)


def test_ma_in_gap_is_relevant(geometry):
    assoc = associate(TA, [actor("la", 160.0), actor("ma", 120.0, lane=-1)], geometry)
    assert assoc.ma_id == "ma"


def test_ma_out_of_range(geometry):
    # rear bumper 45 m ahead of the driver
    ma = actor("ma", 100.9 + 45.0 + L / 2, lane=-1)
    assert associate(TA, [actor("la", 200.0), ma], geometry).ma_id is None


def test_ma_before_hard_nose(geometry):
    ma = actor("ma", 120.0, lane=-1)
    assoc = associate(TA, [actor("la", 160.0), ma], geometry.__class__.straight(1000.0, hard_nose_s=130.0))
    assert assoc.ma_id is None


def test_ma_behind_driver_ignored(geometry):
    assoc = associate(TA, [actor("la", 160.0), actor("ma", 101.0, lane=-1)], geometry)
    assert assoc.ma_id is None


def test_ma_ahead_of_la_only_when_slower_and_behind_la_leader(geometry):
    la = actor("la", 120.0, speed=25.0)
    la_leader = actor("lead2", 150.0)
    # MA rear bumper 5 m ahead of the LA's rear bumper
    slower = actor("ma", 125.0, lane=-1, speed=22.0)
    assert associate(TA, [la, la_leader, slower], geometry).ma_id == "ma"
    faster = slower._replace(speed=27.0)
    assert associate(TA, [la, la_leader, faster], geometry).ma_id is None
    # slower but already past the LA's leader
    beyond = actor("ma", 139.0, lane=-1, speed=22.0)
    assert associate(TA, [la, actor("lead2", 130.0), beyond], geometry).ma_id is None
    # slower with no LA leader at all
    assert associate(TA, [la, slower], geometry).ma_id == "ma"


def test_nearest_of_two_ramp_vehicles_wins(geometry):
    others = [actor("la", 170.0), actor("m2", 130.0, lane=-1), actor("m1", 115.0, lane=-1)]
    assert associate(TA, others, geometry).ma_id == "m1"


def test_no_la_does_not_block_ma(geometry):
    assoc = associate(TA, [actor("ma", 115.0, lane=-1)], geometry)
    assert (assoc.la_id, assoc.ma_id) == (None, "ma")


def test_association_ids_distinct():
    with pytest.raises(ValueError):
        ActorAssociation("a", la_id="a")


def test_resolve_on_event():
    ev = simple_merge()
    assert resolve_associations(ev, 2.0) == ActorAssociation("ta", la_id="la", ma_id="ma")
    # after the merge the MA sits in the TA lane and becomes the leader
    assert resolve_associations(ev, 15.0).la_id == "ma"
    assert len(snapshot(ev, 3.0)) == 3
    with pytest.raises(ValueError):
        resolve_associations(ev, 99.0)


def test_resolve_with_substituted_ta():
    ev = simple_merge()
    moved = actor("ta", 170.0, kind=ActorKind.TA)
    assert resolve_associations(ev, 2.0, ta_state=moved).ma_id is None


def test_ma_range_boundary(geometry):
    la = actor("la", 200.0)
    at_limit = actor("ma", 100.9 + 40.0 + L / 2, lane=-1)
    assert associate(TA, [la, at_limit], geometry).ma_id == "ma"
    beyond = at_limit._replace(s=at_limit.s + 0.01)
    assert associate(TA, [la, beyond], geometry).ma_id is None
