"""Car-following models for highway on-ramp merges.

The package replays recorded merge events with the main-lane vehicle driven
by an IDM-family law and calibrates each law per event by minimizing Theil's
U between simulated and recorded speed.
"""

from .calibrate import FitResult, OptimizerConfig, fit_corpus, fit_event
from .core import (
    ActorKind,
    ActorTrack,
    LeaderView,
    MergeEvent,
    ModelKind,
    ModelParams,
    RoadGeometry,
    validate_event,
)
from .dataio import filter_corpus, generate_synthetic_event, load_corpus, load_event, save_event
from .geometry import effective_distance, visual_angle, xy_to_st
from .metrics import EvalWindow, theil_u
from .models import ModelInput, ModelOutput, compute_accel
from .simulate import SimConfig, SimResult, simulate_event

__version__ = "0.1.0"

__all__ = [
    "ActorKind", "ActorTrack", "EvalWindow", "FitResult", "LeaderView", "MergeEvent",
    "ModelInput", "ModelKind", "ModelOutput", "ModelParams", "OptimizerConfig",
    "RoadGeometry", "SimConfig", "SimResult", "compute_accel", "effective_distance",
    "filter_corpus", "fit_corpus", "fit_event", "generate_synthetic_event", "load_corpus",
    "load_event", "save_event", "simulate_event", "theil_u", "validate_event",
    "visual_angle", "xy_to_st",
]
