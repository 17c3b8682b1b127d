import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mergeidm.metrics import EvalWindow, eval_window, summarize_errors, theil_u

from conftest import simple_merge


def test_theil_anchors():
    assert theil_u([3.0, 4.0, 5.0], [3.0, 4.0, 5.0]) == 0.0
    assert theil_u([10.0, 10.0], [0.0, 0.0]) == 1.0
    assert theil_u([10, 10, 10], [8, 10, 12]) == pytest.approx(0.08111246603748304, rel=1e-12)


def test_theil_degenerate():
    assert theil_u([0.0, 0.0], [0.0, 0.0], full_output=True) == (0.0, True)
    assert theil_u([1.0], [2.0], full_output=True)[1] is False


def test_theil_shape_errors():
    with pytest.raises(ValueError):
        theil_u([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        theil_u([], [])


profiles = st.lists(st.floats(-50, 50), min_size=1, max_size=30)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_theil_properties(data):
    a = np.array(data.draw(profiles))
    b = np.array(data.draw(st.lists(st.floats(-50, 50), min_size=len(a), max_size=len(a))))
    u = theil_u(a, b)
    assert 0.0 <= u <= 1.0
    assert theil_u(b, a) == u


def test_summary_simple_cases():
    s = summarize_errors([0.1, 0.1, 0.1])
    assert s["mean"] == pytest.approx(0.1) and s["std"] == pytest.approx(0.0, abs=1e-15)
    s = summarize_errors([0.0, 1.0])
    assert s["mean"] == 0.5 and s["median"] == 0.5
    assert summarize_errors([2.0])["std"] == 0.0
    with pytest.raises(ValueError):
        summarize_errors([])


def _sorted_quartile(values, q):
    # linear interpolation between order statistics at rank q * (n - 1)
    x = sorted(values)
    pos = q * (len(x) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(x) - 1)
    return x[lo] + (pos - lo) * (x[hi] - x[lo])


def test_summary_quartiles_match_sorted_oracle():
    rng = np.random.default_rng(5)
    for n in (1, 2, 5, 17, 40):
        vals = rng.uniform(0, 1, n).tolist()
        s = summarize_errors(vals)
        assert s["q1"] == pytest.approx(_sorted_quartile(vals, 0.25), rel=1e-12)
        assert s["median"] == pytest.approx(_sorted_quartile(vals, 0.5), rel=1e-12)
        assert s["q3"] == pytest.approx(_sorted_quartile(vals, 0.75), rel=1e-12)
        assert (s["min"], s["max"], s["n"]) == (min(vals), max(vals), n)


def test_eval_window():
    ev = simple_merge()
    w = eval_window(ev)
    assert (w.t_start, w.t_end) == (0.0, pytest.approx(11.0))
    assert w.mask(np.array([-1.0, 0.0, 5.0, 11.0, 11.5])).tolist() == [False, True, True, True, False]
    with pytest.raises(ValueError):
        EvalWindow(2.0, 2.0)


def test_eval_window_needs_merge():
    with pytest.raises(ValueError):
        eval_window(simple_merge(ma=False))
