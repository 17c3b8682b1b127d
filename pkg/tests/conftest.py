import numpy as np
import pytest

from mergeidm.core import ActorKind, LeaderView, RoadGeometry
from mergeidm.dataio import STANDARD_MERGE, build_event, generate_synthetic_event, make_track


def const_track(actor_id, kind, s0, v, lane=0, duration=20.0, t0=0.0, lane_width=3.7, length=4.8, t=None):
    """Constant-speed track along a lane center."""
    n = int(round(duration / 0.1)) + 1
    time = t0 + 0.1 * np.arange(n)
    lateral = np.full(n, lane * lane_width) if t is None else np.asarray(t, dtype=float)
    return make_track(actor_id, kind, length, 1.9, time, s0 + v * (time - t0), lateral,
                      np.full(n, float(v)), np.zeros(n), lane_width=lane_width)


def merging_track(actor_id, s0, v, start, duration=20.0, lc_duration=4.0, t0=0.0, lane_width=3.7):
    """Constant-speed ramp vehicle that changes into lane 0 at ``start``."""
    n = int(round(duration / 0.1)) + 1
    time = t0 + 0.1 * np.arange(n)
    u = np.clip((time - start) / lc_duration, 0.0, 1.0)
    lateral = -lane_width * (1.0 - 0.5 * (1.0 - np.cos(np.pi * u)))
    return const_track(actor_id, ActorKind.MA, s0, v, duration=duration, t0=t0,
                       lane_width=lane_width, t=lateral)


def simple_merge(event_id="ev", duration=20.0, ma=True, la=True, extra=(), hard_nose=50.0):
    """TA at 100 m / 25 m/s, LA 60 m ahead, MA on the ramp merging at 8 s."""
    geometry = RoadGeometry.straight(1000.0, hard_nose_s=hard_nose, ramp_end_s=500.0)
    tracks = [const_track("ta", ActorKind.TA, 100.0, 25.0, duration=duration)]
    if la:
        tracks.append(const_track("la", ActorKind.LA, 160.0, 25.0, duration=duration))
    if ma:
        tracks.append(merging_track("ma", 115.0, 25.0, start=6.0, duration=duration))
    tracks.extend(extra)
    return build_event(event_id, tracks, geometry)


@pytest.fixture
def geometry():
    return RoadGeometry.straight(1000.0, hard_nose_s=50.0, ramp_end_s=500.0)


@pytest.fixture(scope="session")
def standard_event():
    return generate_synthetic_event(STANDARD_MERGE, seed=0)


def view(ds, dt=0.0, v_l=20.0, a_l=0.0, width=1.9):
    return LeaderView(ds=ds, dt=dt, v_l=v_l, a_l=a_l, width=width)


# acceptance reporting: one line per criterion at the end of the run

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    n, title = marker.args
    ok = call.excinfo is None
    prev = _ACCEPTANCE.get(n)
    _ACCEPTANCE[n] = (title, ok and (prev is None or prev[1]))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")
