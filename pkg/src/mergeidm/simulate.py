"""Replay a merge event with the TA driven by a car-following model.

All actors other than the TA replay their recorded tracks (zero-order hold
on the step grid). The TA's speed and position evolve under the chosen model
with forward Euler. Whenever the TA has no usable leader, or the model
cannot act, the TA follows its recorded speed increments instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .association import ActorAssociation, ActorState, associate
from .core import DRIVER_OFFSET, ActorKind, LeaderView, MergeEvent, ModelParams, lane_boundary
from .geometry import visual_angle
from .metrics import EvalWindow, eval_window
from .models import MODEL_FUNCTIONS, MergeGeometry, ModelDomainError, ModelInput

RAW_PROFILE = "RAW_PROFILE"


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    step: float = 0.1
    fallback_policy: str = RAW_PROFILE
    window: Optional[EvalWindow] = None
    driver_offset: float = DRIVER_OFFSET

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.fallback_policy != RAW_PROFILE:
            raise ValueError(f"unknown fallback policy {self.fallback_policy!r}")

    @property
    def model_kind(self):
        return self.params.model_kind


@dataclass(frozen=True)
class StepDiagnostics:
    association: ActorAssociation
    state: int
    clamped: bool
    fallback: Optional[str]


@dataclass(frozen=True, eq=False)
class SimResult:
    times: np.ndarray
    ta_speed_profile: np.ndarray
    ta_s_profile: np.ndarray
    accel_profile: np.ndarray
    raw_speed_profile: np.ndarray
    diagnostics: list = field(default_factory=list)

    @property
    def fallback_mask(self) -> np.ndarray:
        return np.array([d.fallback is not None for d in self.diagnostics], dtype=bool)

    @property
    def fallback_fraction(self) -> float:
        return float(self.fallback_mask.mean()) if self.diagnostics else 0.0


class _Replay:
    """Recorded track as plain lists for fast per-step lookup."""

    __slots__ = ("track", "t0", "n", "s", "t", "v", "a", "lane")

    def __init__(self, track):
        self.track = track
        self.t0 = track.t_start
        self.n = len(track)
        self.s = track.s.tolist()
        self.t = track.t.tolist()
        self.v = track.speed.tolist()
        self.a = track.accel.tolist()
        self.lane = track.lane_id.tolist()

    def index(self, time: float, interval: float) -> int:
        """Sample index for ``time``, or -1 outside the recording."""
        k = int(math.floor((time - self.t0) / interval + 1e-6))
        return k if 0 <= k < self.n else -1

    def clipped(self, time: float, interval: float) -> int:
        k = int(math.floor((time - self.t0) / interval + 1e-6))
        return min(max(k, 0), self.n - 1)

    def state(self, k: int) -> ActorState:
        tr = self.track
        return ActorState(
            tr.actor_id, tr.kind, self.s[k], self.t[k], self.v[k], self.a[k],
            self.lane[k], tr.length, tr.width,
        )


def default_window(event: MergeEvent) -> EvalWindow:
    """Evaluation window when merge timing is known, else the TA's span."""
    if event.merge_time is not None and event.interaction_start is not None:
        return eval_window(event)
    ta = event.ta
    return EvalWindow(ta.t_start, ta.t_end)


def leader_view(ta: ActorState, other: ActorState, driver_offset: float = DRIVER_OFFSET) -> LeaderView:
    return LeaderView(
        ds=other.rear - (ta.front - driver_offset),
        dt=other.t - ta.t,
        v_l=other.speed,
        a_l=other.accel,
        width=other.width,
    )


class Rollout:
    """An event prepared for repeated simulation.

    Everything that does not depend on the TA's simulated state (step grid,
    recorded states of the other actors, raw TA profile) is computed once,
    so calibration can evaluate many parameter sets cheaply.
    """

    def __init__(
        self,
        event: MergeEvent,
        window: Optional[EvalWindow] = None,
        step: float = 0.1,
        driver_offset: float = DRIVER_OFFSET,
    ):
        if not step > 0:
            raise ValueError("step must be positive")
        window = window or default_window(event)
        ta_track = event.ta
        interval = ta_track.interval
        first = int(math.ceil((window.t_start - ta_track.t_start) / interval - 1e-6))
        first = min(max(first, 0), len(ta_track) - 1)
        t0 = float(ta_track.time[first])
        t1 = min(window.t_end, ta_track.t_end)
        n = int(math.floor((t1 - t0) / step + 1e-6)) + 1
        if n < 1:
            raise ValueError("empty simulation window")

        self.event = event
        self.step = step
        self.driver_offset = driver_offset
        self.window = window
        self.times = t0 + step * np.arange(n)
        self.ta_track = ta_track
        self.ta_lane = int(ta_track.lane_id[first])
        geometry = event.geometry
        self.line_t = lane_boundary(self.ta_lane, geometry.ramp_lane_id, geometry.lane_width)

        ta_replay = _Replay(ta_track)
        others = [_Replay(tr) for tr in event.tracks if tr.actor_id != ta_track.actor_id]
        self.v0 = float(ta_track.speed[first])
        self.s0 = float(ta_track.s[first])
        self.raw_speed = np.empty(n)
        self.raw_dv = np.empty(n)
        self.ta_t: list[float] = []
        self.scene: list[list[ActorState]] = []
        for k in range(n):
            tk = float(self.times[k])
            kt = ta_replay.clipped(tk, interval)
            kn = ta_replay.clipped(tk + step, interval)
            self.raw_speed[k] = ta_replay.v[kt]
            # last step: no next sample to difference against, use recorded accel
            self.raw_dv[k] = ta_replay.v[kn] - ta_replay.v[kt] if k + 1 < n else ta_replay.a[kt] * step
            self.ta_t.append(ta_replay.t[kt])
            states = []
            for rep in others:
                i = rep.index(tk, rep.track.interval)
                if i >= 0:
                    states.append(rep.state(i))
            self.scene.append(states)

    def __len__(self) -> int:
        return len(self.times)

    def run(self, params: ModelParams) -> SimResult:
        n = len(self.times)
        step = self.step
        geometry = self.event.geometry
        offset = self.driver_offset
        line_t = self.line_t
        ta_id = self.ta_track.actor_id
        ta_len, ta_wid = self.ta_track.length, self.ta_track.width
        ta_lane = self.ta_lane
        model = MODEL_FUNCTIONS[params.model_kind]

        speed = np.empty(n)
        pos = np.empty(n)
        accel = np.empty(n)
        diags: list[StepDiagnostics] = []
        v, s = self.v0, self.s0
        theta_prev: dict[str, float] = {}

        for k in range(n):
            speed[k] = v
            pos[k] = s
            ta = ActorState(ta_id, ActorKind.TA, s, self.ta_t[k], v, 0.0, ta_lane, ta_len, ta_wid)
            states = self.scene[k]
            assoc = associate(ta, states, geometry, offset)
            la = ma = None
            for st in states:
                if st.actor_id == assoc.la_id:
                    la = st
                elif st.actor_id == assoc.ma_id:
                    ma = st

            fallback = None
            a_k = 0.0
            state = -1
            clamped = False
            theta_now: dict[str, float] = {}
            if la is None:
                fallback = "no leader"
            elif ta.front > la.rear:
                fallback = "passed leader"
            else:
                la_view = leader_view(ta, la, offset)
                theta_now[la.actor_id] = visual_angle(la_view.ds, la_view.dt, la_view.width)
                ma_view = ma_geo = None
                if ma is not None:
                    ma_view = leader_view(ta, ma, offset)
                    theta_now[ma.actor_id] = visual_angle(ma_view.ds, ma_view.dt, ma_view.width)
                    overlap = min(ma.front, la.rear) - max(ma.rear, ta.front)
                    ma_geo = MergeGeometry(
                        ma_length=ma.length,
                        gap_overlap=max(0.0, min(overlap, ma.length)),
                        dt_to_lane_line=abs(ma.t - line_t),
                        lane_width=geometry.lane_width,
                        dist_ma_to_ramp_end=geometry.ramp_end_s - ma.front,
                        theta_ma_prev=theta_prev.get(ma.actor_id),
                        theta_la_prev=theta_prev.get(la.actor_id),
                    )
                inp = ModelInput(v, la_view, ma_view, ma_geo, step)
                try:
                    out = model(inp, params)
                    a_k = out.accel
                    state = out.diagnostics.get("state", -1)
                    clamped = out.diagnostics.get("clamped", False)
                except ModelDomainError as exc:
                    fallback = str(exc)
            theta_prev = theta_now

            if fallback is None:
                v_next = v + a_k * step
            else:
                dv = self.raw_dv[k]
                a_k = dv / step
                v_next = v + dv
            accel[k] = a_k
            diags.append(StepDiagnostics(assoc, state, clamped, fallback))
            s = s + v * step
            v = v_next if v_next > 0.0 else 0.0

        return SimResult(
            times=self.times,
            ta_speed_profile=speed,
            ta_s_profile=pos,
            accel_profile=accel,
            raw_speed_profile=self.raw_speed,
            diagnostics=diags,
        )


def simulate_event(event: MergeEvent, config: SimConfig) -> SimResult:
    """Roll the TA forward through ``event`` under ``config.params``.

    The rollout starts on the TA's recorded state at the first sample inside
    the window (by default the evaluation window) and covers every step up to
    the window end; a trailing partial step is dropped.
    """
    rollout = Rollout(event, config.window, config.step, config.driver_offset)
    return rollout.run(config.params)
