import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

import mthorder.mellin as ml
from mthorder.lcfun import NonIntegrableError, Profile

EULER_GAMMA = 0.5772156649015329

POSITIVE_GRID = [0.25, 0.5, 1.0, 2.0, 3.0, 4.5, 6.0]
NEGATIVE_GRID = [-0.9, -0.7, -0.5, -0.3, -0.1]


def gaussian_collapse(p):
    # closed form for (p M(e^{-t^2/2})(p) / Gamma(1+p))^(1/p)
    lg = special.gammaln
    return math.exp((0.5 * p * math.log(2.0) + lg(1.0 + 0.5 * p) - lg(1.0 + p)) / p)


class TestProfiles:
    def test_exponential_fields(self):
        psi = ml.exponential()
        assert psi.psi0 == 1.0
        assert psi.sup == 1.0
        assert psi.support_radius == math.inf
        assert psi.slope0 == -1.0
        assert psi.value(0.0) == 1.0
        assert psi.value(1.0) == pytest.approx(math.exp(-1.0), rel=1e-15)

    def test_drop_is_cancellation_free(self):
        psi = ml.exponential()
        assert psi.drop(1e-18) == pytest.approx(-1e-18, rel=1e-12)
        assert ml.gaussian().drop(1e-9) == pytest.approx(-5e-19, rel=1e-10)

    def test_power_support_and_values(self):
        lin = ml.power(1.0)
        assert lin.value(0.25) == pytest.approx(0.75)
        assert lin.value(2.0) == 0.0
        assert lin.drop(2.0) == -1.0
        quad = ml.power(0.5)
        assert quad.value(0.25) == pytest.approx(0.5625)
        assert quad.slope0 == -2.0

    def test_indicator_carries_an_atom(self):
        psi = ml.indicator(2.0)
        assert psi.atoms == ((2.0, 1.0),)
        assert psi.neg_derivative(0.7) == 0.0
        assert psi.value(1.9) == 1.0 and psi.value(2.1) == 0.0

    def test_scale_and_amplitude(self):
        psi = ml.exponential(alpha=2.0, amplitude=3.0)
        assert psi.sup == 3.0
        assert psi.value(2.0) == pytest.approx(3.0 * math.exp(-1.0), rel=1e-15)
        assert psi.slope0 == -1.5

    def test_pfamily_zero_rejected(self):
        with pytest.raises(NonIntegrableError):
            ml.from_profile(Profile("pfamily", 0.0, ambient_dim=2))

    def test_pfamily_tail_restriction(self):
        psi = ml.from_profile(Profile("pfamily", 0.5, ambient_dim=1))
        assert psi.min_p == -0.5
        with pytest.raises(NonIntegrableError):
            ml.mellin(psi, -0.7)

    def test_from_table_matches_samples(self):
        ts = np.linspace(0.0, 40.0, 2001)
        psi = ml.from_table(ts, np.exp(-ts))
        assert psi.psi0 == 1.0
        assert psi.support_radius == 40.0
        assert psi.value(1.3) == pytest.approx(math.exp(-1.3), rel=1e-8)
        assert psi.value(41.0) == 0.0

    @pytest.mark.parametrize("ts, vals", [
        ([0.0, 1.0, 2.0], [1.0, 0.5, 0.1]),                 # too few nodes
        ([0.1, 1.0, 2.0, 3.0], [1.0, 0.5, 0.2, 0.1]),       # does not start at 0
        ([0.0, 1.0, 1.0, 2.0], [1.0, 0.5, 0.3, 0.1]),       # not strictly increasing
        ([0.0, 1.0, 2.0, 3.0], [1.0, -0.5, 0.2, 0.1]),      # negative value
        ([0.0, 1.0, 2.0, 3.0], [0.0, 0.5, 0.2, 0.1]),       # zero at the origin
    ])
    def test_from_table_validation(self, ts, vals):
        with pytest.raises(ValueError):
            ml.from_table(ts, vals)


class TestMellinTransform:
    @pytest.mark.parametrize("p", [0.5, 1.0, 1.5, 2.0, 3.0])
    def test_exponential_matches_gamma(self, p):
        assert ml.mellin(ml.exponential(), p) == pytest.approx(math.gamma(p), rel=1e-9)

    def test_exponential_at_two_is_one(self):
        assert ml.mellin(ml.exponential(), 2.0) == pytest.approx(1.0, rel=1e-11)

    @pytest.mark.parametrize("p", [0.5, 1.0, 2.0, 3.5])
    def test_gaussian_moments(self, p):
        expected = 2.0 ** (0.5 * p) * math.gamma(1.0 + 0.5 * p)
        assert p * ml.mellin(ml.gaussian(), p) == pytest.approx(expected, rel=1e-9)

    def test_gaussian_at_two(self):
        assert 2.0 * ml.mellin(ml.gaussian(), 2.0) == pytest.approx(2.0, rel=1e-10)

    def test_exponential_negative_branch(self):
        assert ml.mellin(ml.exponential(), -0.5) == pytest.approx(
            -2.0 * math.sqrt(math.pi), rel=1e-8)

    @pytest.mark.parametrize("p", [-0.9, -0.5, -0.25, -0.049])
    def test_negative_branch_continues_gamma(self, p):
        assert ml.mellin(ml.exponential(), p) == pytest.approx(math.gamma(p), rel=1e-7)

    def test_power_negative_branch(self):
        assert ml.mellin(ml.power(1.0), -0.5) == pytest.approx(-4.0, rel=1e-9)

    @pytest.mark.parametrize("p", [0.5, 3.0, -0.5])
    def test_indicator_closed_form(self, p):
        assert ml.mellin(ml.indicator(2.0), p) == pytest.approx(2.0 ** p / p, rel=1e-10)

    def test_small_positive_exponents_are_stable(self):
        # both sides of the branch threshold agree with Gamma(p)
        for p in (0.049, 0.051, 0.001):
            assert ml.mellin(ml.exponential(), p) == pytest.approx(math.gamma(p), rel=1e-8)

    def test_pfamily_matches_moment_formula(self):
        prof = Profile("pfamily", 1.5, ambient_dim=2)
        psi = ml.from_profile(prof)
        for p in (0.5, 2.0):
            assert ml.mellin(psi, p) == pytest.approx(prof.moment(p - 1.0), rel=1e-8)

    def test_table_profile_transform(self):
        ts = np.linspace(0.0, 40.0, 2001)
        psi = ml.from_table(ts, np.exp(-ts))
        assert ml.mellin(psi, 1.5) == pytest.approx(math.gamma(1.5), rel=1e-7)
        assert ml.mellin(psi, -0.5) == pytest.approx(-2.0 * math.sqrt(math.pi), rel=1e-4)

    @pytest.mark.parametrize("p", [0.0, 1e-9, -1e-7, -1.0, -2.0, math.inf, math.nan])
    def test_domain_errors(self, p):
        with pytest.raises(ValueError):
            ml.mellin(ml.exponential(), p)

    def test_route_disagreement_raises(self):
        psi = ml.exponential()
        broken = dataclasses.replace(
            psi, pmellin=None,
            neg_derivative=lambda t: 1.5 * psi.neg_derivative(t))
        with pytest.raises(ArithmeticError):
            ml.mellin(broken, 1.0)

    def test_subtracted_branch_needs_peak_at_zero(self):
        ts = np.array([0.0, 0.5, 1.0, 1.5, 2.0])
        bumped = ml.from_table(ts, np.array([0.5, 1.0, 0.8, 0.4, 0.1]))
        with pytest.raises(ValueError):
            ml.mellin(bumped, -0.5)

    @settings(max_examples=25, deadline=None)
    @given(alpha=st.floats(0.25, 4.0), amplitude=st.floats(0.5, 3.0),
           p=st.floats(0.2, 4.0))
    def test_scaling_covariance(self, alpha, amplitude, p):
        value = ml.mellin(ml.exponential(alpha=alpha, amplitude=amplitude), p)
        assert value == pytest.approx(amplitude * alpha ** p * math.gamma(p), rel=1e-7)


class TestIp:
    @pytest.mark.parametrize("p", [-0.9, -0.5, 0.0, 0.5, 1.0, 5.0])
    def test_indicator_is_its_radius(self, p):
        assert ml.i_p(ml.indicator(2.0), p) == pytest.approx(2.0, rel=1e-9)

    def test_exponential_values(self):
        psi = ml.exponential()
        assert ml.i_p(psi, 1.0) == pytest.approx(1.0, rel=1e-10)
        assert ml.i_p(psi, -0.5) == pytest.approx(1.0 / math.pi, rel=1e-8)
        assert ml.i_p(psi, 0.0) == pytest.approx(math.exp(-EULER_GAMMA), rel=1e-9)

    def test_zero_window_routing_and_continuity(self):
        psi = ml.exponential()
        at_zero = ml.i_p(psi, 0.0)
        assert ml.i_p(psi, 1e-7) == at_zero
        assert ml.i_p(psi, -1e-7) == at_zero
        assert ml.i_p(psi, 2e-6) == pytest.approx(at_zero, rel=1e-4)
        assert ml.i_p(psi, -2e-6) == pytest.approx(at_zero, rel=1e-4)

    def test_gaussian_log_mean(self):
        expected = math.exp(0.5 * (math.log(2.0) - EULER_GAMMA))
        assert ml.i_p(ml.gaussian(), 0.0) == pytest.approx(expected, rel=1e-9)

    def test_gaussian_p2(self):
        assert ml.i_p(ml.gaussian(), 2.0) == pytest.approx(math.sqrt(2.0), rel=1e-9)

    @pytest.mark.parametrize("p", [-0.5, 0.0, 2.0])
    def test_amplitude_invariance(self, p):
        assert ml.i_p(ml.exponential(amplitude=7.0), p) == pytest.approx(
            ml.i_p(ml.exponential(), p), rel=1e-10)

    @pytest.mark.parametrize("make", [ml.gaussian, ml.exponential, lambda: ml.power(0.5)],
                             ids=["gaussian", "exponential", "quadratic"])
    def test_strictly_increasing_in_p(self, make):
        psi = make()
        grid = NEGATIVE_GRID + [0.0] + POSITIVE_GRID
        values = [ml.i_p(psi, p) for p in grid]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_table_profile_log_mean(self):
        ts = np.linspace(0.0, 40.0, 2001)
        psi = ml.from_table(ts, np.exp(-ts))
        assert ml.i_p(psi, 0.0) == pytest.approx(math.exp(-EULER_GAMMA), rel=1e-6)

    @pytest.mark.parametrize("p", [50.0, 200.0])
    def test_finite_support_limit(self, p):
        value = ml.i_p(ml.indicator(2.0), p)
        assert abs(value - 2.0) <= 2.0 * math.log(p) / p
        assert value == pytest.approx(2.0, rel=1e-9)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            ml.i_p(ml.exponential(), -1.0)

    @settings(max_examples=25, deadline=None)
    @given(pair=st.tuples(st.floats(-0.9, 6.0), st.floats(-0.9, 6.0)))
    def test_monotone_between_random_exponents(self, pair):
        lo, hi = sorted(pair)
        psi = ml.gaussian()
        assert ml.i_p(psi, lo) <= ml.i_p(psi, hi) * (1.0 + 1e-9)


class TestBerwald:
    def test_binomial_values(self):
        assert ml.binom_gen(2.0, 1.0) == pytest.approx(3.0, rel=1e-12)
        assert ml.binom_gen(1.0, 0.0) == pytest.approx(1.0, rel=1e-12)
        assert ml.binom_gen(-0.5, 0.0) == pytest.approx(1.0 / math.sqrt(math.pi), rel=1e-12)
        assert ml.binom_gen(2.0, 0.5) == pytest.approx(6.0, rel=1e-12)
        assert ml.binom_gen(1.0, 1e-3) == pytest.approx(1001.0, rel=1e-10)

    def test_binomial_domain(self):
        with pytest.raises(ValueError):
            ml.binom_gen(-1.5, 1.0)
        with pytest.raises(ValueError):
            ml.binom_gen(1.0, -0.1)

    def test_c_const(self):
        assert ml.c_const(0.5) == 2.0
        assert ml.c_const(0.0) == 1.0
        assert ml.c_const(2.0) == 0.5
        with pytest.raises(ValueError):
            ml.c_const(-1.0)

    @pytest.mark.parametrize("p", [-0.5, 0.0, 1.0, 2.0, 5.0])
    def test_exponential_family_is_flat(self, p):
        assert abs(ml.berwald_g(ml.exponential(), p, 0.0) - 1.0) <= 1e-9

    @pytest.mark.parametrize("p", [-0.5, 0.0, 1.0, 2.0, 5.0])
    def test_linear_family_is_flat(self, p):
        assert abs(ml.berwald_g(ml.power(1.0), p, 1.0) - 1.0) <= 1e-9

    @pytest.mark.parametrize("p", [-0.5, 0.0, 1.0, 2.0, 5.0])
    def test_quadratic_family_is_flat(self, p):
        assert abs(ml.berwald_g(ml.power(0.5), p, 0.5) - 1.0) <= 1e-9

    def test_flat_families_scale_to_alpha(self):
        # the equality value is the scale parameter, not always 1
        for p in (-0.5, 0.0, 2.0):
            assert ml.berwald_g(ml.exponential(alpha=1.5), p, 0.0) == pytest.approx(
                1.5, rel=1e-9)

    @pytest.mark.parametrize("p", [0.5, 1.0, 2.0, 4.0])
    def test_gaussian_matches_closed_form(self, p):
        assert ml.berwald_g(ml.gaussian(), p, 0.0) == pytest.approx(
            gaussian_collapse(p), rel=1e-8)

    def test_gaussian_strictly_decreasing(self):
        grid = [-0.5, -0.1, 0.0, 0.5, 1.0, 2.0, 4.0, 6.0]
        values = [ml.berwald_g(ml.gaussian(), p, 0.0) for p in grid]
        assert all(b < a for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("make, s", [
        (ml.gaussian, 0.0),
        (ml.exponential, 0.0),
        (lambda: ml.power(1.0), 1.0),
        (lambda: ml.power(0.5), 0.5),
        (lambda: ml.power(0.5), 0.0),     # weaker concavity index still admissible
    ], ids=["gaussian", "exponential", "linear", "quadratic", "quadratic-log"])
    def test_nonincreasing_on_grid(self, make, s):
        psi = make()
        grid = NEGATIVE_GRID + [0.0] + POSITIVE_GRID
        values = [ml.berwald_g(psi, p, s) for p in grid]
        assert all(b <= a * (1.0 + 1e-9) for a, b in zip(values, values[1:]))

    def test_collapse_toward_zero(self):
        values = [ml.berwald_g(ml.gaussian(), p, 0.0) for p in (20.0, 50.0, 100.0)]
        assert values[0] > values[1] > values[2] > 0.0
        assert values[2] < 0.2
        for p, value in zip((20.0, 50.0, 100.0), values):
            assert value == pytest.approx(gaussian_collapse(p), rel=1e-7)

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_fractional_derivative_limit(self, k):
        q = 10.0 ** -k
        value = q * ml.mellin(ml.exponential(), q)
        assert abs(value - 1.0) <= 10.0 * 10.0 ** -k
        assert value == pytest.approx(math.gamma(1.0 + q), rel=1e-7)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            ml.berwald_g(ml.exponential(), 1.0, -0.5)
        with pytest.raises(ValueError):
            ml.berwald_g(ml.exponential(), -1.2, 0.0)
