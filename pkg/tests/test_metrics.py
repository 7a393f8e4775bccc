import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfp.engine import SimTrace, TraceRecord
from dfp.errors import ContractViolation
from dfp.metrics import (
    estimate_error, fit_rate, lift_ne_set, ne_distance, ne_hit_time, normalized_error,
)


class FakeWorld:
    def __init__(self, freq, estimates):
        self.freq = np.asarray(freq, dtype=float)
        self.estimates = np.asarray(estimates, dtype=float)


def exact_world():
    freq = np.array([[1.0, 0.0], [0.5, 0.5], [0.25, 0.75]])
    return FakeWorld(freq, np.repeat(freq[None], 3, axis=0))


def trace_of(actions):
    return SimTrace([TraceRecord(t, a, 0.0, 0.0, 0.0) for t, a in enumerate(actions, start=1)])


def test_estimate_error_examples():
    w = exact_world()
    assert estimate_error(w) == 0.0
    w.estimates[2, 1] += [0.5, -0.5]
    assert estimate_error(w) == pytest.approx(math.sqrt(0.5))


def test_ne_distance_examples():
    assert ne_distance(np.array([[0, 1.0], [1.0, 0]]), {(1, 0)}) == 0.0
    assert ne_distance(np.array([[0.5, 0.5]]), {(0,), (1,)}) == pytest.approx(math.sqrt(0.5))
    with pytest.raises(ContractViolation):
        ne_distance(np.array([[0.5, 0.5]]), set())
    with pytest.raises(ContractViolation):
        ne_distance(np.array([[0.5, 0.5]]), {(0, 1)})


def test_ne_distance_accepts_lifted_and_padded():
    lifted = lift_ne_set({(0, 2)}, (2, 3))
    f = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert ne_distance(f, lifted) == 0.0
    assert ne_distance(f, {(0, 2)}, sizes=(2, 3)) == 0.0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 6))
def test_adding_profiles_never_increases_distance(seed, k):
    rng = np.random.default_rng(seed)
    f = rng.dirichlet(np.ones(3), size=4)
    profiles = {tuple(int(x) for x in rng.integers(0, 3, 4)) for _ in range(k)}
    extra = tuple(int(x) for x in rng.integers(0, 3, 4))
    assert ne_distance(f, profiles | {extra}) <= ne_distance(f, profiles)


def test_fit_rate_exact_model():
    series = [(t, 3 * math.log(t) / t) for t in range(10, 2000)]
    fit = fit_rate(series)
    assert abs(fit.C - 3) <= 1e-9
    assert abs(fit.slope) <= 1e-12
    assert fit.passes


def test_fit_rate_sqrt_decay_fails():
    fit = fit_rate([(t, 1 / math.sqrt(t)) for t in range(10, 2000)])
    assert fit.slope > 1e-7 and not fit.passes


def test_fit_rate_zero_series():
    fit = fit_rate([(t, 0.0) for t in range(10, 40)])
    assert fit.C == 0.0 and fit.passes


def test_fit_rate_preconditions():
    with pytest.raises(ContractViolation):
        fit_rate([(t, 1.0) for t in range(5, 100)], t_min=5)
    with pytest.raises(ContractViolation):
        fit_rate([(t, 1.0) for t in range(10, 25)])
    fit = fit_rate([(t, 1.0 / t) for t in range(1, 500)], t_min=100, t_max=300)
    assert (fit.t_min, fit.t_max) == (100, 300)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(0.01, 100), t0=st.integers(10, 200))
def test_fit_rate_recovers_constant(c, t0):
    fit = fit_rate([(t, c * math.log(t) / t) for t in range(t0, t0 + 300)], t_min=t0)
    assert abs(fit.C - c) <= 1e-9 * max(1.0, c)
    assert abs(fit.slope) <= 1e-12 * max(1.0, c)


def test_ne_hit_time_examples():
    ne = {(0, 1), (1, 0)}
    assert ne_hit_time(trace_of([(0, 1)] * 10), ne) == 1
    assert ne_hit_time(trace_of([(0, 0)] * 10), ne) is None
    acts = [(0, 0)] * 49 + [(1, 0)] * 30
    assert ne_hit_time(trace_of(acts), ne) == 50
    acts = [(0, 1)] * 5 + [(1, 1)] + [(1, 0)] * 4
    assert ne_hit_time(trace_of(acts), ne) == 7


@settings(max_examples=100, deadline=None)
@given(bits=st.lists(st.booleans(), min_size=1, max_size=60), cut=st.integers(1, 60))
def test_hit_time_under_tail_truncation(bits, cut):
    # dropping late records removes constraints, so the hit can only move earlier
    ne = {(1,)}
    acts = [(int(b),) for b in bits]
    full = ne_hit_time(trace_of(acts), ne)
    short = ne_hit_time(trace_of(acts[:cut]), ne)
    if full is not None:
        if cut >= full:
            assert short is not None and short <= full
        else:
            assert short is None or short < full


@settings(max_examples=100, deadline=None)
@given(bits=st.lists(st.booleans(), min_size=1, max_size=60), start=st.integers(0, 70))
def test_hit_time_under_head_truncation(bits, start):
    ne = {(1,)}
    trace = trace_of([(int(b),) for b in bits])
    full = ne_hit_time(trace, ne)
    late = ne_hit_time(SimTrace(trace.records[start:]), ne)
    if full is None:
        assert late is None
    else:
        assert late is None or late >= full


def test_normalized_error():
    assert normalized_error(100, 0.5) == pytest.approx(0.5 * 100 / math.log(100))
