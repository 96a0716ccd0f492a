import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import bsds_binning_inner_oracle, mp_d, mp_h
from dhtexp.bsds import (
    BsdsParams,
    ProductBsdsParams,
    RateSplit,
    bsds_critical_rate,
    bsds_exponent,
    componentwise_sequential_exponent,
    product_bsds_critical_rate,
    product_bsds_exponent,
    product_inner_check,
    sequential_critical_rate,
    sequential_exponent,
    split_sweep,
)
from dhtexp.errors import RateError, ValidationError
from dhtexp.prob import binary_entropy as h, binary_kl as d_bin, conditional_entropy, kl_divergence
from dhtexp.sha import critical_rate_bound_sha, sha_binning_exponent

# 40-digit mpmath values, frozen.
H_01 = 0.3250829733914482
H_03 = 0.6108643020548935
D_01_03 = 0.1163217565860045
D_03_01 = 0.15366358680379865
CRIT_01_03 = 0.4414047299774527
PRODUCT_CRIT = 1.2059326188361449
SEQUENTIAL_CRIT = 1.0522690320323462
PRODUCT_CAP = 0.26998534338980315

half_side = st.floats(0.02, 0.48)


class TestFrozenValues:
    def test_against_mpmath(self):
        assert H_01 == pytest.approx(float(mp_h(0.1)), abs=1e-16)
        assert CRIT_01_03 == pytest.approx(float(mp_h(0.1) + mp_d(0.1, 0.3)), abs=1e-16)
        assert PRODUCT_CRIT == pytest.approx(float(mp_h(0.3) + mp_h(0.1) + mp_d(0.3, 0.1) + mp_d(0.1, 0.3)), abs=1e-15)
        assert SEQUENTIAL_CRIT == pytest.approx(float(mp_h(0.3) + mp_h(0.1) + mp_d(0.1, 0.3)), abs=1e-15)


class TestParams:
    @pytest.mark.parametrize("p,q", [(0.0, 0.3), (0.1, 1.0), (-0.1, 0.3)])
    def test_open_interval(self, p, q):
        with pytest.raises(ValidationError):
            BsdsParams(p, q)

    def test_equal_rejected(self):
        with pytest.raises(ValidationError, match="p ≠ q required"):
            BsdsParams(0.2, 0.2)

    def test_alignment_enforced(self):
        with pytest.raises(ValidationError):
            ProductBsdsParams(0.3, 0.1, 0.2, 0.3, reverse_aligned=True)
        with pytest.raises(ValidationError):
            ProductBsdsParams.aligned(0.3, 0.3)

    def test_product_pair_is_kronecker(self):
        hp = ProductBsdsParams.aligned(0.3, 0.1).pair()
        assert hp.p.cards == (4, 4)
        assert hp.p.probs[0b10, 0b11] == pytest.approx((1 - 0.3) / 2 * 0.1 / 2, abs=1e-16)
        assert kl_divergence(hp.p, hp.q) == pytest.approx(D_03_01 + D_01_03, abs=1e-14)

    def test_equal_conditional_entropies(self):
        hp = ProductBsdsParams.aligned(0.3, 0.1).pair()
        a = conditional_entropy(hp.p, "X", "Y")
        b = conditional_entropy(hp.q, "X", "Y")
        assert a == pytest.approx(b, abs=1e-14)

    def test_negative_split(self):
        with pytest.raises(ValidationError):
            RateSplit(-0.1, 0.2)


class TestBsdsExponent:
    def test_high_entropy_branch(self):
        assert bsds_exponent(BsdsParams(0.3, 0.1), H_03) == pytest.approx(D_03_01, abs=1e-15)

    def test_cap(self):
        assert bsds_exponent(BsdsParams(0.1, 0.3), H_01 + D_01_03) == pytest.approx(D_01_03, abs=1e-15)

    def test_threshold(self):
        assert bsds_exponent(BsdsParams(0.1, 0.3), H_01) == pytest.approx(0.0, abs=1e-15)

    def test_rate_below_threshold(self):
        with pytest.raises(RateError):
            bsds_exponent(BsdsParams(0.1, 0.3), H_01 - 1e-6)

    @settings(max_examples=60, deadline=None)
    @given(half_side, half_side, st.floats(0.0, 1.5))
    def test_matches_numeric_bound(self, p, q, extra):
        assume(abs(p - q) > 1e-3)
        params = BsdsParams(p, q)
        rate = h(p) + extra
        assert abs(bsds_exponent(params, rate) - sha_binning_exponent(params.pair(), rate)) < 1e-6

    @settings(max_examples=60, deadline=None)
    @given(half_side, half_side)
    def test_range_and_monotone(self, p, q):
        assume(abs(p - q) > 1e-3)
        params = BsdsParams(p, q)
        values = [bsds_exponent(params, h(p) + r) for r in np.linspace(0, 1, 21)]
        assert all(0 <= v <= d_bin(p, q) + 1e-9 for v in values)
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_mixed_sides_overstates(self):
        # With q past the mirror point 1 - p, the crossover 1 - p is feasible
        # and closer to q, so at R = h(p) the numeric bound falls below the
        # closed form.
        params = BsdsParams(0.3, 0.9)
        numeric = sha_binning_exponent(params.pair(), h(0.3))
        assert numeric == pytest.approx(bsds_binning_inner_oracle(0.3, 0.9), abs=1e-8)
        assert numeric == pytest.approx(d_bin(0.7, 0.9), abs=1e-9)
        assert bsds_exponent(params, h(0.3)) == pytest.approx(d_bin(0.3, 0.9), abs=1e-15)
        assert numeric < bsds_exponent(params, h(0.3)) - 0.5


class TestBsdsCriticalRate:
    def test_mixed_sides_understates(self):
        params = BsdsParams(0.3, 0.9)
        numeric = critical_rate_bound_sha(params.pair()).value
        expect = h(0.3) + d_bin(0.3, 0.9) - d_bin(0.7, 0.9)
        assert numeric == pytest.approx(expect, abs=2e-8)
        assert numeric > bsds_critical_rate(params) + 0.5

    def test_low_entropy_branch(self):
        assert bsds_critical_rate(BsdsParams(0.1, 0.3)) == pytest.approx(CRIT_01_03, abs=1e-15)

    def test_high_entropy_branch(self):
        assert bsds_critical_rate(BsdsParams(0.3, 0.1)) == pytest.approx(H_03, abs=1e-15)

    @given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    def test_mirror_symmetry(self, p, q):
        assume(abs(p - q) > 1e-6 and abs(h(p) - h(q)) > 1e-9)
        a = bsds_critical_rate(BsdsParams(p, q))
        b = bsds_critical_rate(BsdsParams(p, q).mirrored())
        assert a == pytest.approx(b, abs=1e-12)


class TestProduct:
    def test_threshold(self):
        params = ProductBsdsParams.aligned(0.3, 0.1)
        assert product_bsds_exponent(params, H_03 + H_01) == pytest.approx(0.0, abs=1e-15)

    def test_cap(self):
        params = ProductBsdsParams.aligned(0.3, 0.1)
        assert product_bsds_exponent(params, PRODUCT_CRIT + 0.1) == pytest.approx(PRODUCT_CAP, abs=1e-15)
        assert params.stein_exponent() == pytest.approx(PRODUCT_CAP, abs=1e-15)

    def test_not_aligned(self):
        with pytest.raises(ValidationError):
            product_bsds_exponent(ProductBsdsParams(0.3, 0.1, 0.2, 0.4), 2.0)

    def test_critical_rate(self):
        params = ProductBsdsParams.aligned(0.3, 0.1)
        assert product_bsds_critical_rate(params) == pytest.approx(PRODUCT_CRIT, abs=1e-15)
        assert product_bsds_critical_rate(params.swapped()) == pytest.approx(PRODUCT_CRIT, abs=1e-15)

    def test_limit_toward_equal_crossovers(self):
        vals = [product_bsds_critical_rate(ProductBsdsParams.aligned(0.3, 0.3 - e)) for e in (1e-2, 1e-3, 1e-4)]
        gaps = [v - h(0.3) - h(0.3 - e) for v, e in zip(vals, (1e-2, 1e-3, 1e-4))]
        assert gaps[0] > gaps[1] > gaps[2] > 0
        assert gaps[2] < 1e-6

    @pytest.mark.parametrize("p1,q1", [(0.3, 0.1), (0.15, 0.6), (0.85, 0.4)])
    def test_inner_minimizer_is_q(self, p1, q1):
        params = ProductBsdsParams.aligned(p1, q1)
        inner = product_inner_check(params)
        assert inner.value < 1e-8
        hp = params.pair()
        for rate in np.linspace(h(p1) + h(q1), product_bsds_critical_rate(params) + 0.3, 6):
            assert abs(sha_binning_exponent(hp, rate) - product_bsds_exponent(params, rate)) < 1e-4


class TestSequential:
    def test_threshold_split(self):
        params = ProductBsdsParams.aligned(0.3, 0.1)
        assert sequential_exponent(params, RateSplit(H_03, H_01)) == pytest.approx(D_03_01, abs=1e-15)

    def test_stein_split_reaches_stein(self):
        params = ProductBsdsParams.aligned(0.3, 0.1)
        split = RateSplit.stein_split(params)
        assert split.total == pytest.approx(SEQUENTIAL_CRIT, abs=1e-15)
        assert sequential_exponent(params, split) == pytest.approx(PRODUCT_CAP, abs=1e-15)

    def test_critical_rate(self):
        params = ProductBsdsParams.aligned(0.3, 0.1)
        seq = sequential_critical_rate(params)
        assert seq == pytest.approx(SEQUENTIAL_CRIT, abs=1e-15)
        assert product_bsds_critical_rate(params) - seq == pytest.approx(D_03_01, abs=1e-12)

    @settings(max_examples=100)
    @given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    def test_improvement_is_positive(self, a, b):
        assume(abs(h(a) - h(b)) > 1e-9)
        p1, q1 = (a, b) if h(b) < h(a) else (b, a)
        params = ProductBsdsParams.aligned(p1, q1)
        gap = product_bsds_critical_rate(params) - sequential_critical_rate(params)
        assert gap > 0
        assert abs(gap - d_bin(p1, q1)) < 1e-12

    def test_improvement_vanishes_in_limit(self):
        gaps = [
            product_bsds_critical_rate(ProductBsdsParams.aligned(0.3, 0.3 - e))
            - sequential_critical_rate(ProductBsdsParams.aligned(0.3, 0.3 - e))
            for e in (1e-2, 1e-3)
        ]
        assert gaps[1] < gaps[0] and gaps[1] < 1e-5

    def test_entropy_condition(self):
        params = ProductBsdsParams.aligned(0.1, 0.3)
        with pytest.raises(ValidationError, match="swapped"):
            sequential_critical_rate(params)
        assert sequential_critical_rate(params.swapped()) == pytest.approx(SEQUENTIAL_CRIT, abs=1e-15)

    def test_split_too_small(self):
        params = ProductBsdsParams.aligned(0.3, 0.1)
        with pytest.raises(RateError):
            sequential_exponent(params, RateSplit(H_03 - 0.01, H_01))

    def test_componentwise_sum(self):
        params = ProductBsdsParams.aligned(0.3, 0.1)
        split = RateSplit.stein_split(params)
        assert componentwise_sequential_exponent(params, split) == (pytest.approx(PRODUCT_CAP, abs=1e-15), True)
        value, backed = componentwise_sequential_exponent(params.swapped(), RateSplit(H_01 + D_01_03, H_03))
        assert not backed
        assert value == pytest.approx(PRODUCT_CAP, abs=1e-15)

    def test_split_sweep(self):
        params = ProductBsdsParams.aligned(0.3, 0.1)
        sweep = split_sweep(params, SEQUENTIAL_CRIT, num=11)
        assert len(sweep) == 11
        assert all(abs(s.total - SEQUENTIAL_CRIT) < 1e-12 for s, _ in sweep)
        values = [v for _, v in sweep]
        # Every rate beyond h(p2) is best spent on the second component.
        assert values[0] == pytest.approx(PRODUCT_CAP, abs=1e-12)
        assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))
        assert values[-1] == pytest.approx(D_03_01, abs=1e-12)

    def test_sequential_beats_joint_below_joint_critical_rate(self):
        params = ProductBsdsParams.aligned(0.3, 0.1)
        rate = SEQUENTIAL_CRIT
        joint = product_bsds_exponent(params, rate)
        seq = sequential_exponent(params, RateSplit.stein_split(params))
        assert seq > joint
        assert math.isclose(joint, rate - H_03 - H_01, abs_tol=1e-15)
