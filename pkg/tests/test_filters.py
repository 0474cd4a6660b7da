import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_di.errors import DomainError, ParameterError
from adaptive_di.filters import (
    FilterSpec,
    exp_filter_weight,
    exp_recursive_update,
    normalized_weights,
    smoothed_value,
    uniform_filter_weight,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)
alphas = st.floats(1e-3, 1.0)


class TestWeights:
    def test_exp_weight_at_horizon_is_alpha(self):
        assert exp_filter_weight(0.1, 7, 7, 0) == 0.1

    def test_exp_weight_one_step_back(self):
        assert exp_filter_weight(0.1, 6, 7, 0) == pytest.approx(0.09, abs=1e-15)

    def test_exp_weight_before_birth_is_zero(self):
        assert exp_filter_weight(0.1, 4, 9, 5) == 0.0

    @pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5, math.nan])
    def test_exp_rejects_bad_alpha(self, alpha):
        with pytest.raises(ParameterError):
            exp_filter_weight(alpha, 1, 1, 0)

    def test_uniform_single_sample(self):
        assert uniform_filter_weight(1, 1, 1) == 1.0

    @pytest.mark.parametrize("t", range(5, 10))
    def test_uniform_over_five(self, t):
        assert uniform_filter_weight(t, 9, 5) == pytest.approx(0.2)

    def test_uniform_before_birth(self):
        assert uniform_filter_weight(4, 9, 5) == 0.0

    def test_spec_validation(self):
        with pytest.raises(ParameterError):
            FilterSpec("exp", 2.0)
        with pytest.raises(ParameterError):
            FilterSpec("triangle")
        with pytest.raises(ParameterError):
            FilterSpec("unif", 0.3)

    @pytest.mark.parametrize("text,kind,alpha", [
        ("exp(0.1)", "exp", 0.1), (" EXP( 0.25 ) ", "exp", 0.25), ("unif", "unif", None),
    ])
    def test_parse(self, text, kind, alpha):
        spec = FilterSpec.parse(text)
        assert (spec.kind, spec.alpha) == (kind, alpha)
        assert FilterSpec.parse(str(spec)) == spec

    @pytest.mark.parametrize("text", ["exp()", "exp(x)", "gauss(1)", "exp(0)"])
    def test_parse_rejects(self, text):
        with pytest.raises(ParameterError):
            FilterSpec.parse(text)

    @given(alpha=alphas, birth=st.integers(0, 50), span=st.integers(0, 200))
    def test_normalized_weights_are_probability_vector(self, alpha, birth, span):
        for spec in (FilterSpec.exponential(alpha, birth), FilterSpec.uniform(birth)):
            w = normalized_weights(spec, birth + span)
            assert w.size == span + 1
            assert np.all(w >= 0)
            assert abs(w.sum() - 1.0) <= 1e-12


class TestSmoothedValue:
    def test_uniform_mean(self):
        assert smoothed_value(FilterSpec.uniform(), [1, 2, 3]) == 2.0

    def test_exponential_hand_value(self):
        # raw weights 0.125, 0.25, 0.5 over the three samples, renormalized
        v = smoothed_value(FilterSpec.exponential(0.5, birth=1), [0, 0, 1])
        assert v == pytest.approx(4 / 7, abs=1e-15)

    def test_empty_series(self):
        with pytest.raises(DomainError):
            smoothed_value(FilterSpec.uniform(), [])

    @given(c=finite, n=st.integers(1, 60), alpha=alphas)
    def test_constant_series(self, c, n, alpha):
        for spec in (FilterSpec.exponential(alpha), FilterSpec.uniform()):
            assert smoothed_value(spec, [c] * n) == pytest.approx(c, rel=1e-12, abs=1e-9)

    @given(xs=st.lists(finite, min_size=1, max_size=80), alpha=alphas)
    def test_within_range(self, xs, alpha):
        v = smoothed_value(FilterSpec.exponential(alpha), xs)
        tol = 1e-9 * max(1.0, max(abs(x) for x in xs))
        assert min(xs) - tol <= v <= max(xs) + tol

    @given(xs=st.lists(finite, min_size=1, max_size=60),
           bumps=st.lists(st.floats(0, 1e3), min_size=60, max_size=60), alpha=alphas)
    def test_monotone(self, xs, bumps, alpha):
        ys = [x + b for x, b in zip(xs, bumps)]
        spec = FilterSpec.exponential(alpha)
        assert smoothed_value(spec, ys) >= smoothed_value(spec, xs) - 1e-9


def recursive_normalized(series, alpha):
    """Numerator and normalizer each follow the plain exponential recursion."""
    num = den = 0.0
    for x in series:
        num = exp_recursive_update(num, x, alpha)
        den = exp_recursive_update(den, 1.0, alpha)
    return num / den


class TestRecursion:
    def test_fixed_point(self):
        assert exp_recursive_update(3.5, 3.5, 0.3) == 3.5

    def test_substitution(self):
        assert exp_recursive_update(0.0, 1.0, 0.2) == pytest.approx(0.2)

    def test_first_sample_initialization(self):
        # plain recursion seeded with the first sample: 0 -> 0 -> 0.5
        v = 0.0
        for x in [0.0, 1.0]:
            v = exp_recursive_update(v, x, 0.5)
        assert v == 0.5

    def test_normalized_recursion_matches_hand_value(self):
        assert recursive_normalized([0, 0, 1], 0.5) == pytest.approx(4 / 7, abs=1e-12)

    @settings(max_examples=200)
    @given(xs=st.lists(st.floats(-100, 100), min_size=1, max_size=200), alpha=alphas,
           birth=st.integers(0, 30))
    def test_matches_batch(self, xs, alpha, birth):
        batch = smoothed_value(FilterSpec.exponential(alpha, birth), xs)
        assert recursive_normalized(xs, alpha) == pytest.approx(batch, abs=1e-10)
