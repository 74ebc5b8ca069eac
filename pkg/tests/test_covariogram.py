import math

import numpy as np
import pytest

from mthorder import convexcore as cc
from mthorder.covariogram import (
    MVector,
    as_mvector,
    cov_radial_derivative,
    covariogram_body,
    covariogram_body_many,
    covariogram_fn,
    dm_body,
    dm_support_membership,
    dm_support_membership_fn,
    dm_support_radius,
    dm_support_radius_fn,
)
from mthorder.lcfun import LogConcaveFunction, NonIntegrableError, Profile
from mthorder.numerics import combine_sigma, make_rng


def interval01():
    return cc.from_vertices([[0.0], [1.0]])


def expfun(K, shift=None, A=1.0):
    shift = np.zeros(K.dim) if shift is None else np.asarray(shift, float)
    return LogConcaveFunction(Profile("exponential"), K, shift, A)


class TestMVector:
    def test_flat_roundtrip(self):
        xb = as_mvector([1.0, 2.0, 3.0, 4.0], 2)
        assert xb.m == 2 and xb.n == 2 and xb.total_dim == 4
        assert np.allclose(xb.flat, [1, 2, 3, 4])

    def test_bad_split(self):
        with pytest.raises(ValueError):
            as_mvector([1.0, 2.0, 3.0], 2)

    def test_unit_and_scaled(self):
        xb = as_mvector([[3.0, 4.0]], 2)
        assert xb.unit().norm() == pytest.approx(1.0)
        assert xb.scaled(2.0).norm() == pytest.approx(10.0)
        with pytest.raises(ValueError):
            MVector(np.zeros((1, 2))).unit()


class TestBodyCovariogram:
    def test_interval_m1(self):
        assert covariogram_body(interval01(), [0.5]).value == pytest.approx(0.5)

    def test_interval_m2(self):
        est = covariogram_body(interval01(), [0.5, -0.25])
        assert est.value == pytest.approx(0.25)

    def test_square_overlap(self):
        est = covariogram_body(cc.cube(2, 1.0), [1.0, 1.0])
        assert est.value == pytest.approx(1.0)

    def test_empty(self):
        assert covariogram_body(interval01(), [1.5]).value == 0.0

    @pytest.mark.parametrize("K", [
        lambda: interval01(),
        lambda: cc.cube(2, 1.0),
        lambda: cc.simplex(2, "centered"),
        lambda: cc.ball(2, 1.5),
    ])
    def test_value_at_origin_is_volume(self, K):
        K = K()
        xb = np.zeros((2, K.dim))
        assert covariogram_body(K, xb).value == pytest.approx(
            cc.volume(K).value, rel=1e-12)

    def test_dilation_identity(self):
        K = cc.simplex(2, "centered")
        gen = make_rng(5, 0)
        for _ in range(10):
            xb = gen.normal(size=(2, 2)) * 0.3
            s = 1.0 + gen.random() * 2.0
            lhs = covariogram_body(cc.scale(K, s), xb).value
            rhs = s ** 2 * covariogram_body(K, xb / s).value
            assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)

    def test_box_fast_path_matches_general_route(self):
        K = cc.cube(2, 1.0)
        gen = make_rng(7, 0)
        for _ in range(20):
            xb = gen.normal(size=(2, 2))
            fast = covariogram_body(K, xb).value
            body = cc.intersect_translates(K, xb)
            slow = 0.0 if body is None else cc.volume(body).value
            assert fast == pytest.approx(slow, abs=1e-9)

    def test_evenness_m1(self):
        K = cc.simplex(2, "corner")
        gen = make_rng(11, 0)
        for _ in range(10):
            x = gen.normal(size=(1, 2)) * 0.4
            a = covariogram_body(K, x).value
            b = covariogram_body(K, -x).value
            assert a == pytest.approx(b, rel=1e-12, abs=1e-12)

    def test_many_matches_loop(self):
        K = cc.simplex(2, "centered")
        gen = make_rng(13, 0)
        B = gen.normal(size=(15, 2, 2)) * 0.3
        vals, sigs = covariogram_body_many(K, B)
        assert np.allclose(sigs, 0.0)
        for xb, v in zip(B, vals):
            assert v == pytest.approx(covariogram_body(K, xb).value, rel=1e-12)

    def test_cube3_axis_path_is_exact(self):
        est = covariogram_body(cc.cube(3, 1.0), [1.0, 1.0, 1.0])
        assert est.std_error == 0.0
        assert est.value == pytest.approx(1.0, rel=1e-12)

    def test_simplex3_origin(self):
        K = cc.simplex(3, "corner")
        est = covariogram_body(K, np.zeros((1, 3)), seed=4)
        assert abs(est.value - 1.0 / 6.0) <= 3 * est.std_error + 1e-3


class TestBallCovariogram:
    def test_disk_lens_vs_mc_oracle(self):
        val = covariogram_body(cc.ball(2, 1.0), [1.0, 0.0]).value
        gen = np.random.default_rng(0)
        Y = gen.random((400_000, 2)) * [1.0, 2.0] + [0.0, -1.0]
        p = np.mean((np.sum(Y ** 2, 1) <= 1) & (np.sum((Y - [1, 0]) ** 2, 1) <= 1))
        oracle = 2.0 * p
        sigma = 2.0 * math.sqrt(p * (1 - p) / 400_000)
        assert abs(val - oracle) <= 3 * sigma

    def test_sphere_lens_closed_form(self):
        val = covariogram_body(cc.ball(3, 1.0), [1.0, 0.0, 0.0]).value
        assert val == pytest.approx(5.0 * math.pi / 12.0, rel=1e-12)
        gen = np.random.default_rng(1)
        Y = gen.random((400_000, 3)) * [1.0, 2.0, 2.0] + [0.0, -1.0, -1.0]
        p = np.mean((np.sum(Y ** 2, 1) <= 1) & (np.sum((Y - [1, 0, 0]) ** 2, 1) <= 1))
        assert abs(val - 4.0 * p) <= 4.0 * 3 * math.sqrt(p * (1 - p) / 400_000)

    def test_duplicate_translate_reduces_to_lens(self):
        lens = covariogram_body(cc.ball(2, 1.0), [[1.0, 0.0]]).value
        est = covariogram_body(cc.ball(2, 1.0), [[1.0, 0.0], [1.0, 0.0]], seed=2)
        assert abs(est.value - lens) <= 3 * est.std_error

    def test_far_translates_empty(self):
        assert covariogram_body(cc.ball(2, 1.0), [[3.0, 0.0], [0.0, 0.1]]).value == 0.0

    def test_determinism(self):
        a = covariogram_body(cc.ball(2, 1.0), [[0.5, 0.2], [0.1, 0.4]], seed=9)
        b = covariogram_body(cc.ball(2, 1.0), [[0.5, 0.2], [0.1, 0.4]], seed=9)
        assert a.value == b.value


class TestFunctionCovariogram:
    def test_one_sided_exponential_closed_form(self):
        f = expfun(interval01())
        est = covariogram_fn(f, [0.7], method="levelset")
        assert est.value == pytest.approx(math.exp(-0.7), rel=1e-6)

    def test_two_sided_exponential_closed_form(self):
        f = expfun(cc.cube(1, 1.0))
        est = covariogram_fn(f, [1.0], method="levelset")
        assert est.value == pytest.approx(2.0 * math.exp(-0.5), rel=1e-6)

    @pytest.mark.parametrize("f", [
        lambda: expfun(interval01()),
        lambda: LogConcaveFunction(Profile("gaussian"), cc.cube(2, 1.0), np.zeros(2), 1.3),
        lambda: LogConcaveFunction(Profile("power", 0.5), cc.simplex(2, "centered"), np.zeros(2)),
        lambda: LogConcaveFunction(Profile("pfamily", 1.5, ambient_dim=2), cc.ball(2, 1.0), np.zeros(2)),
    ])
    def test_value_at_origin_is_mass(self, f):
        f = f()
        xb = np.zeros((2, f.dim))
        est = covariogram_fn(f, xb, method="levelset")
        assert est.value == pytest.approx(f.mass(), rel=1e-7)

    def test_indicator_reduces_to_body(self):
        f = LogConcaveFunction(Profile("indicator"), cc.cube(2, 1.0), np.zeros(2), 2.0)
        est = covariogram_fn(f, [0.5, 0.5], method="levelset")
        assert est.value == pytest.approx(2.0 * 1.5 * 1.5, rel=1e-12)
        assert est.std_error == 0.0

    def test_direct_mc_on_exponential(self):
        f = expfun(interval01())
        est = covariogram_fn(f, [0.7], method="direct_mc", seed=3)
        assert abs(est.value - math.exp(-0.7)) <= 3 * est.std_error

    def test_levelset_shift_invariance_exact(self):
        f0 = expfun(cc.cube(1, 1.0))
        f1 = expfun(cc.cube(1, 1.0), shift=[2.5])
        a = covariogram_fn(f0, [0.8], method="levelset").value
        b = covariogram_fn(f1, [0.8], method="levelset").value
        assert a == pytest.approx(b, rel=1e-12)

    def test_direct_mc_shift_invariance(self):
        f0 = LogConcaveFunction(Profile("gaussian"), cc.cube(1, 1.0), np.zeros(1))
        f1 = LogConcaveFunction(Profile("gaussian"), cc.cube(1, 1.0), np.array([1.5]))
        a = covariogram_fn(f0, [0.6], method="direct_mc", seed=1)
        b = covariogram_fn(f1, [0.6], method="direct_mc", seed=2)
        assert abs(a.value - b.value) <= 3 * combine_sigma(a.std_error, b.std_error)

    def test_noisy_levelset_branch_agrees_with_direct(self):
        f = expfun(cc.ball(2, 1.0))
        xb = np.array([[0.3, 0.0], [0.0, 0.3]])
        ls = covariogram_fn(f, xb, method="levelset", seed=5, samples=300_000)
        mc = covariogram_fn(f, xb, method="direct_mc", seed=6)
        assert ls.std_error > 0.0
        assert abs(ls.value - mc.value) <= 3 * combine_sigma(ls.std_error, mc.std_error)

    def test_duplicate_blocks_keep_exact_levelset(self):
        f = expfun(cc.ball(2, 1.0))
        est = covariogram_fn(f, np.zeros((2, 2)), method="levelset")
        assert est.value == pytest.approx(f.mass(), rel=1e-7)

    def test_p0_profile_rejected(self):
        f = LogConcaveFunction(Profile("pfamily", 0.0, ambient_dim=1),
                               cc.cube(1, 1.0), np.zeros(1))
        with pytest.raises(NonIntegrableError):
            covariogram_fn(f, [0.1])

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            covariogram_fn(expfun(interval01()), [0.1], method="grid")


def _random_cases(count):
    """Deterministic catalog of (f, xbar) pairs across kinds and orders."""
    gen = make_rng(2024, 0)
    bodies = [
        interval01(),
        cc.cube(1, 1.0),
        cc.from_vertices([[-0.3], [0.7]]),
        cc.cube(2, 1.0),
        cc.simplex(2, "centered"),
        cc.from_vertices([[0.9, 0.1], [-0.4, 0.8], [-0.7, -0.5], [0.3, -0.9]]),
    ]
    profiles = [
        Profile("exponential"),
        Profile("gaussian"),
        Profile("power", 0.5),
        Profile("power", 2.0),
        Profile("indicator"),
    ]
    cases = []
    for j in range(count):
        K = bodies[j % len(bodies)]
        n = K.dim
        prof = profiles[j % len(profiles)]
        if j % 7 == 0:
            prof = Profile("pfamily", 1.5 if j % 2 else -0.5, ambient_dim=n)
        m = 1 + j % (2 if n == 2 else 3)
        shift = gen.normal(size=n) * 0.3
        A = 0.5 + gen.random() * 2.0
        f = LogConcaveFunction(prof, K, shift, A)
        xb = gen.normal(size=(m, n)) * 0.35
        cases.append((f, xb))
    return cases


class TestMethodAgreement:
    @pytest.mark.parametrize("case_id", range(50))
    def test_levelset_vs_direct(self, case_id):
        f, xb = _random_cases(50)[case_id]
        ls = covariogram_fn(f, xb, method="levelset", seed=case_id)
        mc = covariogram_fn(f, xb, method="direct_mc", seed=case_id)
        tol = 3 * combine_sigma(ls.std_error, mc.std_error) + 1e-9
        assert abs(ls.value - mc.value) <= tol


class TestLogConcavityOfCovariogram:
    def test_indicator_on_square(self):
        f = LogConcaveFunction(Profile("indicator"), cc.cube(2, 1.0), np.zeros(2))
        gen = make_rng(31, 0)
        X = gen.normal(size=(1000, 1, 2)) * 0.8
        Y = gen.normal(size=(1000, 1, 2)) * 0.8
        gx = np.array([covariogram_fn(f, x).value for x in X])
        gy = np.array([covariogram_fn(f, y).value for y in Y])
        gm = np.array([covariogram_fn(f, z).value for z in 0.5 * (X + Y)])
        assert np.all(gm + 1e-9 >= np.sqrt(gx * gy) * (1 - 1e-9))

    def test_exponential_interval_m2(self):
        f = expfun(interval01())
        gen = make_rng(37, 0)
        X = gen.normal(size=(1000, 2, 1)) * 0.5
        Y = gen.normal(size=(1000, 2, 1)) * 0.5
        gx = np.array([covariogram_fn(f, x).value for x in X])
        gy = np.array([covariogram_fn(f, y).value for y in Y])
        gm = np.array([covariogram_fn(f, z).value for z in 0.5 * (X + Y)])
        assert np.all(gm + 1e-9 >= np.sqrt(gx * gy) * (1 - 1e-7))


def test_integral_of_classical_covariogram_is_volume_squared():
    K = cc.cube(2, 1.0)
    gen = make_rng(41, 0)
    X = gen.random((200_000, 1, 2)) * 4.0 - 2.0
    vals, _ = covariogram_body_many(K, X)
    integral = 16.0 * float(vals.mean())
    assert integral == pytest.approx(cc.volume(K).value ** 2, rel=1e-2)


class TestRadialDerivative:
    def test_one_sided_exponential(self):
        f = expfun(interval01())
        assert cov_radial_derivative(f, 1, [1.0], h=1e-3) == pytest.approx(-1.0, abs=1e-6)

    def test_indicator_interval(self):
        f = LogConcaveFunction(Profile("indicator"), interval01(), np.zeros(1))
        assert cov_radial_derivative(f, 1, [1.0], h=1e-3) == pytest.approx(-1.0, abs=1e-9)

    def test_indicator_square(self):
        f = LogConcaveFunction(Profile("indicator"), cc.cube(2, 1.0), np.zeros(2))
        d = cov_radial_derivative(f, 1, [1.0, 0.0], h=1e-3)
        assert d == pytest.approx(-2.0, abs=1e-9)

    def test_invalid_step(self):
        f = expfun(interval01())
        with pytest.raises(ValueError):
            cov_radial_derivative(f, 1, [1.0], h=0.0)

    def test_block_count_mismatch(self):
        f = expfun(interval01())
        with pytest.raises(ValueError):
            cov_radial_derivative(f, 2, [1.0], h=1e-3)


class TestDmSupport:
    def test_membership_examples(self):
        K = interval01()
        assert dm_support_membership(K, [0.5, -0.25])
        assert not dm_support_membership(K, [1.5])

    def test_membership_ball(self):
        B = cc.ball(2, 1.0)
        assert dm_support_membership(B, [1.99, 0.0])
        assert not dm_support_membership(B, [2.01, 0.0])

    def test_radius_examples(self):
        assert dm_support_radius(interval01(), [1.0]) == pytest.approx(1.0, abs=1e-9)
        assert dm_support_radius(cc.cube(2, 1.0), [1.0, 0.0]) == pytest.approx(2.0, abs=1e-9)
        assert dm_support_radius(cc.ball(2, 1.0), [1.0, 0.0]) == pytest.approx(2.0)
        half = 1.0 / math.sqrt(2.0)
        assert dm_support_radius(cc.ball(2, 1.0), [[half, 0.0], [half, 0.0]]) \
            == pytest.approx(2.0 * math.sqrt(2.0))

    def test_radius_interval_m2(self):
        K = interval01()
        assert dm_support_radius(K, [1.0, 0.0]) == pytest.approx(1.0, abs=1e-9)
        s = 1.0 / math.sqrt(2.0)
        assert dm_support_radius(K, [s, s]) == pytest.approx(math.sqrt(2.0), abs=1e-9)
        assert dm_support_radius(K, [s, -s]) == pytest.approx(s, abs=1e-9)

    def test_radius_is_support_boundary(self):
        gen = make_rng(43, 0)
        K = cc.simplex(2, "centered")
        for _ in range(8):
            th = gen.normal(size=(2, 2))
            th /= np.linalg.norm(th)
            rho = dm_support_radius(K, th)
            assert dm_support_membership(K, th * (0.999 * rho))
            assert not dm_support_membership(K, th * (1.001 * rho))

    def test_function_form(self):
        f = LogConcaveFunction(Profile("indicator"), interval01(), np.zeros(1))
        assert dm_support_membership_fn(f, [0.5, -0.25])
        assert not dm_support_membership_fn(f, [1.5, 0.0])
        g = expfun(interval01())
        assert dm_support_membership_fn(g, [99.0])
        assert dm_support_radius_fn(g, [1.0]) == math.inf
        assert dm_support_radius_fn(f, [1.0]) == pytest.approx(1.0, abs=1e-9)


class TestDmBody:
    def test_difference_body_of_simplex(self):
        D = dm_body(cc.simplex(2, "corner"), 1)
        assert cc.volume(D).value == pytest.approx(3.0, rel=1e-9)
        assert len(D.vertices) == 6

    def test_interval_m2_volume_is_three(self):
        D = dm_body(interval01(), 2)
        assert cc.volume(D).value == pytest.approx(3.0, rel=1e-12)

    def test_interval_m2_grid_oracle(self):
        xs = np.linspace(-1.049, 1.049, 1500)
        G = np.stack(np.meshgrid(xs, xs), axis=-1).reshape(-1, 2, 1)
        vals, _ = covariogram_body_many(interval01(), G)
        area = (vals > 0).mean() * (2.098) ** 2
        assert area == pytest.approx(3.0, rel=1e-2)

    def test_ball(self):
        D = dm_body(cc.ball(2, 1.5), 1)
        assert D.kind == "ball" and D.radius == pytest.approx(3.0)

    def test_membership_consistency(self):
        D = dm_body(interval01(), 3)
        gen = make_rng(47, 0)
        X = gen.normal(size=(40, 3)) * 0.8
        for x in X:
            member = dm_support_membership(interval01(), x.reshape(3, 1))
            assert member == bool(cc.contains(D, x)[0])

    def test_unsupported(self):
        with pytest.raises(NotImplementedError):
            dm_body(cc.simplex(2, "corner"), 2)
