"""Longitudinal acceleration laws for a traffic actor facing a merge.

Every model maps one :class:`ModelInput` (the TA's speed plus what it sees of
its leader and of a relevant merging actor) and a :class:`ModelParams` to a
:class:`ModelOutput`. Models hold no state; the only memory a looming model
needs, the previous visual angles, travels inside the input.

Public ``*_accel`` functions clamp their result to
[``ACCEL_FLOOR``, ``ACCEL_CEIL``] and report the unclamped value in the
diagnostics. The lowercase helpers without the suffix return raw floats and
are what the composite models build on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .core import COOLNESS, LeaderView, ModelKind, ModelParams
from .geometry import DS_MIN, effective_distance, visual_angle, visual_angle_rate

ACCEL_FLOOR = -9.81
ACCEL_CEIL = 4.0

# values of the "state" diagnostic
STATE_FOLLOW = 0
STATE_BLEND_1 = 1
STATE_BLEND_2 = 2
STATE_MA_ONLY = 3


class ModelDomainError(ValueError):
    """Raised when a model is asked to act outside its operating domain."""


@dataclass(frozen=True, slots=True)
class MergeGeometry:
    """Scene quantities beyond the two leader views.

    Attributes:
        ma_length: MA length (m).
        gap_overlap: length of the MA lying inside the TA-LA gap (m).
        dt_to_lane_line: lateral distance from the MA center to the line
            between the ramp lane and the TA lane (m, >= 0 while on the ramp).
        lane_width: lane width (m).
        dist_ma_to_ramp_end: distance from the MA front bumper to the ramp end (m).
        theta_ma_prev: MA visual angle at the previous step, or None.
        theta_la_prev: LA visual angle at the previous step, or None.
    """

    ma_length: float
    gap_overlap: float
    dt_to_lane_line: float
    lane_width: float
    dist_ma_to_ramp_end: float
    theta_ma_prev: Optional[float] = None
    theta_la_prev: Optional[float] = None


@dataclass(frozen=True, slots=True)
class ModelInput:
    v: float
    la_view: Optional[LeaderView] = None
    ma_view: Optional[LeaderView] = None
    ma_geometry: Optional[MergeGeometry] = None
    step: float = 0.1

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not self.v >= 0:
            raise ValueError("speed must be non-negative")


@dataclass(frozen=True)
class ModelOutput:
    accel: float
    diagnostics: dict = field(default_factory=dict)


def clamp_output(raw: float, **diagnostics) -> ModelOutput:
    if not math.isfinite(raw):
        raise ModelDomainError(f"non-finite acceleration {raw}")
    accel = min(max(raw, ACCEL_FLOOR), ACCEL_CEIL)
    diagnostics["raw_accel"] = raw
    diagnostics["clamped"] = accel != raw
    return ModelOutput(accel, diagnostics)


def _leader(view: Optional[LeaderView]) -> LeaderView:
    if view is None:
        raise ModelDomainError("no leader")
    return view


# --------------------------------------------------------------------------
# IDM


def desired_gap(v: float, v_l: float, T: float, a: float, b: float, s0: float) -> float:
    # dynamic part floored at 0 so a fast-receding leader never commands braking
    return s0 + max(0.0, v * T + v * (v - v_l) / (2.0 * math.sqrt(a * b)))


def idm(v: float, s: float, v_l: float, v0: float, T: float, a: float, b: float, s0: float) -> float:
    """Raw IDM acceleration for gap ``s`` (clamped to ``DS_MIN``)."""
    s = max(s, DS_MIN)
    s_star = desired_gap(v, v_l, T, a, b, s0)
    return a * (1.0 - (v / v0) ** 4 - (s_star / s) ** 2)


def _idm_p(v: float, s: float, v_l: float, p: ModelParams) -> float:
    return idm(v, s, v_l, p["v0"], p["T"], p["a"], p["b"], p["s0"])


def idm_accel(inp: ModelInput, params: ModelParams) -> ModelOutput:
    la = _leader(inp.la_view)
    raw = _idm_p(inp.v, la.ds, la.v_l, params)
    return clamp_output(raw, state=STATE_FOLLOW)


# --------------------------------------------------------------------------
# IDM-MSA


def mobil_incentive_ratio(da_ma: float, da_ta: float, p: float, da_th: float) -> float:
    """Share of the MOBIL lane-change threshold the MA has reached, in [0, 1]."""
    if not da_th > 0:
        raise ValueError("da_th must be positive")
    r = (da_ma + p * da_ta) / da_th
    return min(max(r, 0.0), 1.0)


def msa_ratio(inp: ModelInput, params: ModelParams) -> float:
    """Blend ratio for IDM-MSA from the current scene.

    The MA's incentive compares its IDM acceleration behind the LA with that
    behind the ramp end (a standing obstacle); the TA's disadvantage compares
    following the MA with following the LA. Both use the TA's parameters.
    """
    la, ma, geo = inp.la_view, inp.ma_view, inp.ma_geometry
    v_ma = ma.v_l
    gap_ma_la = la.ds - ma.ds - geo.ma_length
    da_ma = _idm_p(v_ma, gap_ma_la, la.v_l, params) - _idm_p(
        v_ma, geo.dist_ma_to_ramp_end, 0.0, params
    )
    da_ta = _idm_p(inp.v, ma.ds, ma.v_l, params) - _idm_p(inp.v, la.ds, la.v_l, params)
    return mobil_incentive_ratio(da_ma, da_ta, params["p"], params["da_th"])


def idm_msa(v: float, la: LeaderView, ma: LeaderView, r: float, p: ModelParams) -> float:
    T, a, b, s0 = p["T"], p["a"], p["b"], p["s0"]
    gap_la = (desired_gap(v, la.v_l, T, a, b, s0) / max(la.ds, DS_MIN)) ** 2
    gap_ma = (desired_gap(v, ma.v_l, T, a, b, s0) / max(ma.ds, DS_MIN)) ** 2
    return a * (1.0 - (v / p["v0"]) ** 4 - (r * gap_ma + (1.0 - r) * gap_la))


def idm_msa_accel(inp: ModelInput, params: ModelParams) -> ModelOutput:
    la = _leader(inp.la_view)
    if inp.ma_view is None or inp.ma_geometry is None:
        return clamp_output(_idm_p(inp.v, la.ds, la.v_l, params), state=STATE_FOLLOW, r=0.0)
    r = msa_ratio(inp, params)
    raw = idm_msa(inp.v, la, inp.ma_view, r, params)
    return clamp_output(raw, state=STATE_BLEND_1, r=r)


# --------------------------------------------------------------------------
# CAH and IDM-CAH


def cah(v: float, s: float, v_l: float, a_l: float, a: float) -> float:
    """Constant-acceleration-heuristic acceleration."""
    s = max(s, DS_MIN)
    a_eff = min(a_l, a)
    if v_l * (v - v_l) <= -2.0 * s * a_eff:
        den = v_l * v_l - 2.0 * s * a_eff
        # den >= v * v_l on this branch; it only vanishes when v or v_l is 0
        return v * v * a_eff / den if den > 0.0 else a_eff
    dv = v - v_l
    heaviside = 1.0 if dv > 0.0 else 0.0
    return a_eff - dv * dv * heaviside / (2.0 * s)


def cah_accel(inp: ModelInput, params: ModelParams) -> float:
    la = _leader(inp.la_view)
    return cah(inp.v, la.ds, la.v_l, la.a_l, params["a"])


def blend_cah(a_idm: float, a_cah: float, b: float, c: float = COOLNESS) -> float:
    if a_idm >= a_cah:
        return a_idm
    return (1.0 - c) * a_idm + c * (a_cah + b * math.tanh((a_idm - a_cah) / b))


def idm_cah(v: float, s: float, view: LeaderView, p: ModelParams) -> float:
    """Raw IDM-CAH acceleration toward ``view`` using gap ``s``."""
    a_idm = _idm_p(v, s, view.v_l, p)
    a_cah = cah(v, s, view.v_l, view.a_l, p["a"])
    return blend_cah(a_idm, a_cah, p["b"], p.get("c", COOLNESS))


def idm_cah_accel(inp: ModelInput, params: ModelParams) -> ModelOutput:
    la = _leader(inp.la_view)
    return clamp_output(idm_cah(inp.v, la.ds, la, params), state=STATE_FOLLOW)


# --------------------------------------------------------------------------
# Looming
#
# The putative-follower law is reconstructed as a linear stimulus-response:
#   state 1 (LA and MA): k_v (v_des - v) + k_la q(LA) + k_ma q(MA)
#   state 2 (MA only):   k_v2 (v_des - v) + k_ma2 q(MA)
# with q the opening rate -d(theta)/dt saturated to +/- rate_sat. q is
# positive when an actor pulls away and negative when the TA closes in.
# State 2 engages once the MA is within lat_th of the lane line.


def opening_rate(view: LeaderView, theta_prev: Optional[float], step: float) -> tuple[float, float]:
    """Return (theta, -dtheta/dt) for ``view``."""
    theta = visual_angle(view.ds, view.dt, view.width)
    return theta, -visual_angle_rate(theta, theta_prev, step)


def _sat(x: float, limit: float) -> float:
    return min(max(x, -limit), limit)


def looming(inp: ModelInput, params: ModelParams, modified: bool) -> tuple[float, dict]:
    ma, geo = inp.ma_view, inp.ma_geometry
    if ma is None or geo is None:
        raise ModelDomainError("outside looming domain")
    sat = params["rate_sat"]
    _, q_ma = opening_rate(ma, geo.theta_ma_prev, inp.step)
    q_ma = _sat(q_ma, sat)
    speed_term_1 = params["k_v"] * (params["v_des"] - inp.v)

    if modified:
        la = _leader(inp.la_view)
        _, q_la = opening_rate(la, geo.theta_la_prev, inp.step)
        ma_term = params["k_ma"] * min(0.0, q_ma)
        la_term = params["k_la"] * _sat(q_la, sat)
        return speed_term_1 + la_term + ma_term, {"state": STATE_BLEND_1, "ma_term": ma_term}

    la = inp.la_view
    if la is None or geo.dt_to_lane_line < params["lat_th"]:
        ma_term = params["k_ma2"] * q_ma
        speed_term = params["k_v2"] * (params["v_des"] - inp.v)
        return speed_term + ma_term, {"state": STATE_MA_ONLY, "ma_term": ma_term}
    _, q_la = opening_rate(la, geo.theta_la_prev, inp.step)
    ma_term = params["k_ma"] * q_ma
    la_term = params["k_la"] * _sat(q_la, sat)
    return speed_term_1 + la_term + ma_term, {"state": STATE_BLEND_1, "ma_term": ma_term}


def looming_accel(inp: ModelInput, params: ModelParams, modified: bool = False) -> ModelOutput:
    """Looming response to the LA and MA.

    With ``modified`` the MA-only state is dropped and the MA stimulus can
    only slow the TA down (a passing MA contributes nothing).
    """
    raw, diag = looming(inp, params, modified)
    return clamp_output(raw, **diag)


def looming_mod_accel(inp: ModelInput, params: ModelParams) -> ModelOutput:
    return looming_accel(inp, params, modified=True)


# --------------------------------------------------------------------------
# IDM-Looming


def idm_looming_accel(inp: ModelInput, params: ModelParams) -> ModelOutput:
    """IDM-CAH while car following, phased into Looming-Mod during the merge.

    * MA absent or not yet in the TA-LA gap: IDM-CAH toward the LA.
    * MA partly in the gap: ``r`` IDM-CAH(LA) + (1 - r) Looming-Mod, with
      ``r`` the share of the MA's length outside the gap.
    * MA wholly in the gap: ``r`` Looming-Mod + (1 - r) IDM-CAH(MA), with
      ``r`` the MA's lateral distance to the lane line over half a lane.
    """
    la = _leader(inp.la_view)
    ma, geo = inp.ma_view, inp.ma_geometry
    if ma is None or geo is None or geo.gap_overlap <= 0.0:
        return clamp_output(idm_cah(inp.v, la.ds, la, params), state=STATE_FOLLOW, r=1.0)

    a_loom, _ = looming(inp, params, modified=True)
    inside = min(geo.gap_overlap, geo.ma_length)
    if inside < geo.ma_length:
        r = (geo.ma_length - inside) / geo.ma_length
        raw = r * idm_cah(inp.v, la.ds, la, params) + (1.0 - r) * a_loom
        return clamp_output(raw, state=STATE_BLEND_1, r=r)
    r = min(max(geo.dt_to_lane_line / (0.5 * geo.lane_width), 0.0), 1.0)
    raw = r * a_loom + (1.0 - r) * idm_cah(inp.v, ma.ds, ma, params)
    return clamp_output(raw, state=STATE_BLEND_2, r=r)


# --------------------------------------------------------------------------
# MR-IDM


def mr_idm_branch(v: float, view: LeaderView, p: ModelParams) -> float:
    s_eff = effective_distance(view.ds, view.dt, view.width, p["zeta"])
    return idm_cah(v, s_eff, view, p)


def mr_idm_accel(inp: ModelInput, params: ModelParams) -> ModelOutput:
    """IDM-CAH toward both the LA and the MA on effective distances.

    The stronger of the two decelerations wins.
    """
    la = _leader(inp.la_view)
    a_la = mr_idm_branch(inp.v, la, params)
    if inp.ma_view is None:
        return clamp_output(a_la, state=STATE_FOLLOW, a_la=a_la)
    a_ma = mr_idm_branch(inp.v, inp.ma_view, params)
    state = STATE_BLEND_2 if a_ma < a_la else STATE_FOLLOW
    return clamp_output(min(a_la, a_ma), state=state, a_la=a_la, a_ma=a_ma)


MODEL_FUNCTIONS: dict[ModelKind, Callable[[ModelInput, ModelParams], ModelOutput]] = {
    ModelKind.IDM: idm_accel,
    ModelKind.IDM_MSA: idm_msa_accel,
    ModelKind.IDM_CAH: idm_cah_accel,
    ModelKind.LOOMING: looming_accel,
    ModelKind.LOOMING_MOD: looming_mod_accel,
    ModelKind.IDM_LOOMING: idm_looming_accel,
    ModelKind.MR_IDM: mr_idm_accel,
}


def compute_accel(inp: ModelInput, params: ModelParams) -> ModelOutput:
    """Dispatch on ``params.model_kind``."""
    return MODEL_FUNCTIONS[params.model_kind](inp, params)
