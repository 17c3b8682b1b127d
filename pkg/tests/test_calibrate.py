import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mergeidm.calibrate import (
    BoundTransform,
    CalibrationError,
    OptimizerConfig,
    fit_corpus,
    fit_event,
    fit_seed,
    minimize_bounded,
    nelder_mead,
)
from mergeidm.core import ModelKind
from mergeidm.dataio import STANDARD_MERGE, generate_synthetic_event

RANDOM_MERGE = copy.deepcopy(STANDARD_MERGE)
RANDOM_MERGE["generator"]["randomize"] = 0.3
RANDOM_MERGE["jitter"] = {"ta_s": 3.0, "ta_speed": 1.0, "la_s": 5.0, "ma_s": 2.0, "speed": 1.0}

QUICK = OptimizerConfig(restarts=0, seed=4)


@pytest.fixture(scope="module")
def random_events():
    return [generate_synthetic_event(RANDOM_MERGE, seed=s, event_id=f"r{s}") for s in (1, 2)]


def test_quadratic_minimum():
    res = minimize_bounded(lambda x: (x[0] - 0.3) ** 2, [0.5], [(0.0, 1.0)], OptimizerConfig(xtol=1e-6))
    assert res.x[0] == pytest.approx(0.3, abs=1e-4)


def test_quadratic_default_tolerance_meets_cost_spread():
    res = minimize_bounded(lambda x: (x[0] - 0.3) ** 2, [0.5], [(0.0, 1.0)])
    assert res.fun < 1e-4 and res.converged


def test_unbounded_rosenbrock():
    def rosen(y):
        return (1 - y[0]) ** 2 + 100 * (y[1] - y[0] ** 2) ** 2

    res = nelder_mead(rosen, np.array([-1.0, 1.5]), OptimizerConfig(max_iter=2000, ftol=1e-12, xtol=1e-8))
    np.testing.assert_allclose(res.y, [1.0, 1.0], atol=1e-4)
    assert all(b <= a for a, b in zip(res.best_trace, res.best_trace[1:]))


def test_minimum_on_a_bound():
    res = minimize_bounded(lambda x: x[0] + x[1], [3.0, 3.0], [(1.0, 5.0), (2.0, 4.0)])
    np.testing.assert_allclose(res.x, [1.0, 2.0], atol=1e-3)
    assert np.all(res.x >= [1.0, 2.0])


def test_degenerate_bounds_rejected():
    with pytest.raises(ValueError):
        minimize_bounded(lambda x: x[0], [2.0], [(2.0, 2.0)])
    with pytest.raises(ValueError):
        BoundTransform([0.0], [math.inf])


def test_unfittable_cost():
    with pytest.raises(CalibrationError, match="unfittable event"):
        minimize_bounded(lambda x: math.nan, [0.5], [(0.0, 1.0)])


def test_best_trace_monotone():
    rng = np.random.default_rng(0)
    noise = rng.normal(size=1000)

    def bumpy(x):
        return float(np.sum((x - 0.7) ** 2) + 0.01 * noise[int(x[0] * 999)])

    res = minimize_bounded(bumpy, [0.2, 0.2], [(0, 1), (0, 1)])
    assert all(b <= a for a, b in zip(res.best_trace, res.best_trace[1:]))


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(0.01, 10), st.floats(0, 1))
def test_transform_round_trip(lo, width, frac):
    tf = BoundTransform([lo], [lo + width])
    x = np.array([lo + frac * width])
    np.testing.assert_allclose(tf.to_x(tf.to_y(x)), x, atol=1e-9 * max(1, abs(lo) + width))


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e3, 1e3))
def test_transform_stays_in_bounds(y):
    tf = BoundTransform([-2.0], [3.0])
    x = tf.to_x(np.array([y]))
    assert -2.0 <= x[0] <= 3.0


def test_fit_recovers_generator(random_events):
    ev = random_events[0]
    res = fit_event(ev, ModelKind.MR_IDM, optimizer_config=QUICK)
    assert res.ok and res.cost < 0.01
    for name in res.fitted_params.names:
        lo, hi = res.fitted_params.bounds[name]
        assert lo <= res.fitted_params[name] <= hi


def test_fit_event_bad_bounds(random_events):
    with pytest.raises(ValueError):
        fit_event(random_events[0], ModelKind.IDM, bounds={"T": (2.0, 2.0)})


def test_fit_corpus_counts_and_order(random_events):
    out = fit_corpus(random_events[:1], [ModelKind.IDM], QUICK)
    assert len(out.results) == 1
    assert out.summary["IDM"]["n"] == 1


def test_fit_corpus_ordering_and_determinism(random_events):
    kinds = [ModelKind.MR_IDM, ModelKind.IDM]
    first = fit_corpus(random_events, kinds, QUICK)
    again = fit_corpus(random_events, kinds, QUICK, jobs=2)
    assert [(r.event_id, r.model_kind.value) for r in first.results] == [
        ("r1", "IDM"), ("r1", "MR_IDM"), ("r2", "IDM"), ("r2", "MR_IDM"),
    ]
    assert first.results == again.results
    assert first.summary["MR_IDM"]["mean"] < first.summary["IDM"]["mean"]


def test_fit_corpus_records_failures(random_events):
    out = fit_corpus(random_events[:1], [ModelKind.IDM], QUICK, bounds={"T": (3.0, 1.0)})
    assert not out.results[0].ok
    assert out.summary["IDM"] is None


def test_fit_seed_is_stable():
    assert fit_seed(0, "a", ModelKind.IDM) == fit_seed(0, "a", ModelKind.IDM)
    assert fit_seed(0, "a", ModelKind.IDM) != fit_seed(1, "a", ModelKind.IDM)
