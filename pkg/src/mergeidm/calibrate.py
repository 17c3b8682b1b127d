"""Per-event parameter calibration against the recorded TA speed profile.

Bounded parameters are mapped onto unbounded ones with
``x = lo + (hi - lo) * sin(y)**2`` and the unconstrained problem is solved
by Nelder-Mead, so every evaluated point respects the bounds exactly.
"""

from __future__ import annotations

import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import DEFAULT_BOUNDS, MergeEvent, ModelKind, ModelParams
from .metrics import summarize_errors, theil_u
from .simulate import Rollout

log = logging.getLogger(__name__)

FALLBACK_PENALTY_SHARE = 0.5


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    """Nelder-Mead settings.

    Attributes:
        max_iter: iteration cap per start.
        ftol: cost-spread tolerance across the simplex.
        xtol: optional simplex-size tolerance in the transformed space; when
            set, iteration stops only once both tolerances are met.
        restarts: extra starts from jittered defaults after the first one.
        jitter: start jitter as a fraction of each parameter's range.
        initial_step: simplex edge in the transformed (angle) space.
        seed: seed for the start jitter.
    """

    max_iter: int = 500
    ftol: float = 1e-4
    xtol: Optional[float] = None
    restarts: int = 3
    jitter: float = 0.1
    initial_step: float = 0.15
    seed: int = 0
    reflect: float = 1.0
    expand: float = 2.0
    contract: float = 0.5
    shrink: float = 0.5


@dataclass
class NelderMeadResult:
    y: np.ndarray
    fun: float
    iterations: int
    converged: bool
    best_trace: list = field(default_factory=list)


def nelder_mead(
    fun: Callable[[np.ndarray], float],
    y0: np.ndarray,
    config: OptimizerConfig = OptimizerConfig(),
) -> NelderMeadResult:
    """Minimize ``fun`` from ``y0`` with the classic simplex moves.

    ``best_trace`` records the best cost after every iteration.
    """
    y0 = np.asarray(y0, dtype=float)
    n = y0.size
    simplex = np.vstack([y0] + [y0 + config.initial_step * e for e in np.eye(n)])
    costs = np.array([fun(y) for y in simplex])
    trace = []
    converged = False
    it = 0
    while it < config.max_iter:
        order = np.argsort(costs, kind="stable")
        simplex, costs = simplex[order], costs[order]
        trace.append(float(costs[0]))
        if not np.isfinite(costs[0]):
            break  # nothing finite to improve on
        if (
            costs[-1] - costs[0] <= config.ftol
            and (config.xtol is None or np.max(np.abs(simplex[1:] - simplex[0])) <= config.xtol)
        ):
            converged = True
            break
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        yr = centroid + config.reflect * (centroid - worst)
        fr = fun(yr)
        if fr < costs[0]:
            ye = centroid + config.expand * (yr - centroid)
            fe = fun(ye)
            if fe < fr:
                simplex[-1], costs[-1] = ye, fe
            else:
                simplex[-1], costs[-1] = yr, fr
        elif fr < costs[-2]:
            simplex[-1], costs[-1] = yr, fr
        else:
            if fr < costs[-1]:
                yc = centroid + config.contract * (yr - centroid)
                fc = fun(yc)
                accept = fc <= fr
            else:
                yc = centroid + config.contract * (worst - centroid)
                fc = fun(yc)
                accept = fc < costs[-1]
            if accept:
                simplex[-1], costs[-1] = yc, fc
            else:
                best = simplex[0]
                simplex[1:] = best + config.shrink * (simplex[1:] - best)
                costs[1:] = [fun(y) for y in simplex[1:]]
    order = np.argsort(costs, kind="stable")
    if not converged:
        trace.append(float(costs[order[0]]))
    return NelderMeadResult(simplex[order[0]].copy(), float(costs[order[0]]), it, converged, trace)


class BoundTransform:
    """Sine-squared map between box-bounded x and unbounded y."""

    def __init__(self, lo: Sequence[float], hi: Sequence[float]):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if np.any(~np.isfinite(self.lo)) or np.any(~np.isfinite(self.hi)):
            raise ValueError("bounds must be finite")
        if np.any(self.lo >= self.hi):
            raise ValueError("every bound needs lo < hi")

    def to_x(self, y: np.ndarray) -> np.ndarray:
        x = self.lo + (self.hi - self.lo) * np.sin(y) ** 2
        return np.clip(x, self.lo, self.hi)

    def to_y(self, x: np.ndarray) -> np.ndarray:
        u = np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        return np.arcsin(np.sqrt(u))


@dataclass
class BoundedResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    restarts_used: int
    best_trace: list


def minimize_bounded(
    fun: Callable[[np.ndarray], float],
    x0: Sequence[float],
    bounds: Sequence[tuple[float, float]],
    config: OptimizerConfig = OptimizerConfig(),
    rng: Optional[np.random.Generator] = None,
) -> BoundedResult:
    """Bounded Nelder-Mead with restarts from jittered copies of ``x0``.

    Starts whose initial simplex holds no finite cost are re-jittered; if no
    start ever yields a finite cost a :class:`CalibrationError` is raised.
    """
    lo, hi = np.array(bounds, dtype=float).reshape(-1, 2).T
    tf = BoundTransform(lo, hi)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    x0 = np.clip(np.asarray(x0, dtype=float), lo, hi)

    def wrapped(y):
        c = fun(tf.to_x(y))
        return c if np.isfinite(c) else math.inf

    best: Optional[NelderMeadResult] = None
    iterations = 0
    converged = False
    trace: list = []
    starts = 0
    attempts = 0
    while starts <= config.restarts and attempts <= 2 * (config.restarts + 1):
        attempts += 1
        if starts == 0 and attempts == 1:
            xs = x0
        else:
            xs = np.clip(x0 + rng.uniform(-1, 1, size=x0.size) * config.jitter * (hi - lo), lo, hi)
        res = nelder_mead(wrapped, tf.to_y(xs), config)
        if not np.isfinite(res.fun):
            continue
        starts += 1
        iterations += res.iterations
        for c in res.best_trace:
            trace.append(min(c, trace[-1]) if trace else c)
        if best is None or res.fun < best.fun:
            best = res
            converged = res.converged
    if best is None:
        raise CalibrationError("unfittable event: no finite cost from any start")
    return BoundedResult(tf.to_x(best.y), best.fun, iterations, converged, starts - 1, trace)


# --------------------------------------------------------------------------
# fitting events


@dataclass(frozen=True)
class FitResult:
    event_id: str
    model_kind: ModelKind
    fitted_params: Optional[ModelParams]
    cost: float
    iterations: int
    converged: bool
    restarts_used: int
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def rollout_cost(rollout: Rollout, params: ModelParams) -> float:
    """Theil's U of the simulated vs. raw TA speed over the rollout window.

    Rollouts that spend more than half the window on the raw-profile
    fallback cost 1.
    """
    result = rollout.run(params)
    mask = result.fallback_mask
    if mask.mean() > FALLBACK_PENALTY_SHARE:
        return 1.0
    return theil_u(result.ta_speed_profile, result.raw_speed_profile)


def _bounds_for(kind: ModelKind, bounds: Optional[dict]) -> dict:
    template = ModelParams.defaults(kind)
    merged = {n: DEFAULT_BOUNDS[n] for n in template.names}
    for name, (lo, hi) in (bounds or {}).items():
        merged[name] = (float(lo), float(hi))
    for name, (lo, hi) in merged.items():
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"bounds for {name} must be finite with lo < hi, got [{lo}, {hi}]")
    return merged


def fit_event(
    event: MergeEvent,
    model_kind,
    bounds: Optional[dict] = None,
    optimizer_config: OptimizerConfig = OptimizerConfig(),
    initial: Optional[dict] = None,
    window=None,
    step: float = 0.1,
) -> FitResult:
    """Calibrate one model on one event by minimizing Theil's U.

    Args:
        event: a valid merge event.
        model_kind: which acceleration law to fit.
        bounds: per-parameter (lo, hi) overrides of the default bounds.
        optimizer_config: Nelder-Mead settings and seed.
        initial: starting values overriding the model defaults.
        window: evaluation window override.
        step: simulation step (s).
    """
    kind = ModelKind(model_kind)
    box = _bounds_for(kind, bounds)
    names = list(box)
    start = ModelParams.defaults(kind).values
    start.update(initial or {})
    x0 = np.array([start[n] for n in names])
    lo_hi = [box[n] for n in names]
    rollout = Rollout(event, window, step)

    def cost(x):
        return rollout_cost(rollout, ModelParams(kind, dict(zip(names, x)), box))

    res = minimize_bounded(cost, x0, lo_hi, optimizer_config)
    fitted = ModelParams(kind, dict(zip(names, res.x.tolist())), box)
    return FitResult(
        event_id=event.event_id,
        model_kind=kind,
        fitted_params=fitted,
        cost=res.fun,
        iterations=res.iterations,
        converged=res.converged,
        restarts_used=res.restarts_used,
    )


def fit_seed(seed: int, event_id: str, kind: ModelKind) -> int:
    """Per-fit seed that depends only on the inputs, never on scheduling."""
    return zlib.crc32(f"{seed}|{event_id}|{kind.value}".encode()) & 0x7FFFFFFF


def _fit_task(args) -> FitResult:
    event, kind, bounds, config = args
    try:
        return fit_event(event, kind, bounds, config)
    except Exception as exc:  # one bad event must not sink the batch
        log.warning("fit failed for %s / %s: %s", event.event_id, kind.value, exc)
        return FitResult(event.event_id, kind, None, math.nan, 0, False, 0, error=str(exc))


@dataclass
class CorpusFit:
    results: list
    summary: dict


def fit_corpus(
    events: Sequence[MergeEvent],
    model_kinds: Sequence,
    config: OptimizerConfig = OptimizerConfig(),
    bounds: Optional[dict] = None,
    jobs: int = 1,
) -> CorpusFit:
    """Fit every (event, model) pair and summarize the costs per model.

    Results are sorted by (event_id, model_kind) whatever the worker count.
    """
    if not events or not model_kinds:
        raise ValueError("need at least one event and one model")
    kinds = [ModelKind(k) for k in model_kinds]
    tasks = []
    for ev in events:
        for kind in kinds:
            cfg = OptimizerConfig(**{**config.__dict__, "seed": fit_seed(config.seed, ev.event_id, kind)})
            tasks.append((ev, kind, bounds, cfg))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_fit_task, tasks))
    else:
        results = [_fit_task(t) for t in tasks]
    results.sort(key=lambda r: (r.event_id, r.model_kind.value))

    summary = {}
    for kind in kinds:
        costs = [r.cost for r in results if r.model_kind == kind and r.ok]
        summary[kind.value] = summarize_errors(costs) if costs else None
    return CorpusFit(results, summary)
