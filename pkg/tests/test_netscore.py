import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from attonet import MetricConfig, MetricInputs, indicator, netscore
from attonet.errors import MetricDomainError

from reference import NETSCORE_ROWS

positive = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)
accuracy = st.floats(min_value=1.0, max_value=100.0, allow_nan=False)


class TestScoreReproduction:
    @pytest.mark.parametrize("name,acc,params_m,macs_b,expected", NETSCORE_ROWS)
    def test_reference_rows_within_tolerance(self, name, acc, params_m, macs_b, expected):
        score = netscore(MetricInputs(acc, params_m, macs_b))
        assert score == pytest.approx(expected, abs=0.05), name

    def test_raw_count_conversion(self):
        # raw parameter/mult-add counts convert to millions/billions
        direct = netscore(MetricInputs(65.0, 1.32, 0.1401))
        from_raw = netscore(MetricInputs.from_raw_counts(65.0, 1_320_000, 140_100_000))
        assert from_raw == pytest.approx(direct, abs=1e-12)


class TestScoreProperties:
    @given(accuracy, positive, positive, st.floats(min_value=1.01, max_value=1.5))
    def test_monotone_in_accuracy(self, acc, p, m, bump):
        if acc * bump > 100:
            acc = 100 / bump
        lo = netscore(MetricInputs(acc, p, m))
        hi = netscore(MetricInputs(min(100.0, acc * bump), p, m))
        assert hi > lo

    @given(accuracy, positive, positive, st.floats(min_value=1.01, max_value=10))
    def test_monotone_decreasing_in_complexity(self, acc, p, m, bump):
        base = netscore(MetricInputs(acc, p, m))
        assert netscore(MetricInputs(acc, p * bump, m)) < base
        assert netscore(MetricInputs(acc, p, m * bump)) < base

    @given(accuracy, positive, positive, st.integers(min_value=1, max_value=4))
    def test_param_scale_identity(self, acc, p, m, k):
        # multiplying params by 10^(k/beta) lowers the score by exactly 20*k
        cfg = MetricConfig()
        base = netscore(MetricInputs(acc, p, m), cfg)
        scaled = netscore(MetricInputs(acc, p * 10 ** (k / cfg.beta), m), cfg)
        assert scaled == pytest.approx(base - 20 * k, abs=1e-8)

    @given(accuracy, positive, positive)
    def test_zero_complexity_exponents_reduce_to_accuracy_term(self, acc, p, m):
        cfg = MetricConfig(beta=0.0, gamma=0.0)
        score = netscore(MetricInputs(acc, p, m), cfg)
        assert score == pytest.approx(20 * cfg.alpha * math.log10(acc), abs=1e-9)


class TestDomain:
    @pytest.mark.parametrize("acc,p,m", [
        (0.0, 1.0, 1.0), (-5.0, 1.0, 1.0), (101.0, 1.0, 1.0),
        (50.0, 0.0, 1.0), (50.0, 1.0, -2.0),
    ])
    def test_out_of_domain_inputs_rejected(self, acc, p, m):
        with pytest.raises(MetricDomainError):
            MetricInputs(acc, p, m)

    def test_negative_exponents_rejected(self):
        with pytest.raises(MetricDomainError):
            MetricConfig(alpha=-1)


class TestIndicator:
    def test_floor_is_inclusive(self):
        assert indicator(65.0) is True

    def test_just_below_floor(self):
        assert indicator(64.99) is False

    def test_comfortably_above(self):
        assert indicator(73.00) is True

    def test_custom_floor(self):
        cfg = MetricConfig(accuracy_floor=80.0)
        assert indicator(79.9, cfg) is False
        assert indicator(80.0, cfg) is True

    def test_out_of_range_accuracy_rejected(self):
        with pytest.raises(MetricDomainError):
            indicator(120.0)
