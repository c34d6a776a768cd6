import math

import numpy as np
import pytest

from ddpm_lowdim.errors import InvalidParameterError, StepIndexError
from ddpm_lowdim.schedules import Schedule, build_linear_schedule
from ddpm_lowdim.targets import (
    DegenerateGaussian,
    PointMixture,
    exact_oracle,
    exact_score,
    forward_marginal_sample,
    load_point_mixture_csv,
    log_density,
    make_perturbed_oracle,
    posterior_mean,
    sample_x0,
)


def fd_gradient(f, x, h=1e-5):
    grad = np.empty_like(x)
    for j in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[j] = h
        grad[:, j] = (f(x + e) - f(x - e)) / (2 * h)
    return grad


def random_mixture(seed, m=5, d=8):
    g = np.random.default_rng(seed)
    w = g.uniform(0.5, 1.5, m)
    return PointMixture(g.normal(size=(m, d)), w / w.sum())


SYMMETRIC = PointMixture(np.array([[-1.0], [1.0]]), np.array([0.5, 0.5]))


class TestSampling:
    def test_degenerate_column_variances(self):
        x = sample_x0(DegenerateGaussian(2, 5), 1000, seed=3)
        np.testing.assert_allclose(x[:, :2].var(axis=0), 1.0, atol=5 * math.sqrt(2 / 1000))
        np.testing.assert_array_equal(x[:, 2:], 0.0)

    def test_single_atom_rows_are_zero(self):
        x = sample_x0(PointMixture(np.zeros((1, 3)), np.ones(1)), 50, seed=0)
        np.testing.assert_array_equal(x, 0.0)

    def test_symmetric_pair_mean(self):
        x = sample_x0(SYMMETRIC, 100_000, seed=11)
        assert abs(x.mean()) < 5 / math.sqrt(100_000)

    def test_same_seed_same_draws(self):
        t = random_mixture(0)
        np.testing.assert_array_equal(sample_x0(t, 20, 9), sample_x0(t, 20, 9))


class TestForwardMarginal:
    def test_on_support_variance_is_one(self):
        s = build_linear_schedule(100)
        x = forward_marginal_sample(DegenerateGaussian(3, 6), s, 40, 50_000, seed=2)
        se = math.sqrt(2 / 50_000)
        np.testing.assert_allclose(x[:, :3].var(axis=0), 1.0, atol=5 * se)
        np.testing.assert_allclose(x[:, 3:].var(axis=0), s.omab(40), atol=5 * se * s.omab(40))

    def test_terminal_is_near_standard_normal(self):
        s = build_linear_schedule(1000)
        x = forward_marginal_sample(DegenerateGaussian(2, 4), s, 1000, 50_000, seed=5)
        np.testing.assert_allclose(np.cov(x.T), np.eye(4), atol=0.03)

    def test_single_atom_mean(self):
        s = build_linear_schedule(100)
        atom = np.array([[1.0, -2.0, 0.5]])
        x = forward_marginal_sample(PointMixture(atom, np.ones(1)), s, 30, 20_000, seed=1)
        se = math.sqrt(s.omab(30) / 20_000)
        np.testing.assert_allclose(x.mean(axis=0), math.sqrt(s.ab(30)) * atom[0], atol=5 * se)

    def test_step_range(self):
        s = build_linear_schedule(10)
        with pytest.raises(StepIndexError):
            forward_marginal_sample(DegenerateGaussian(1, 2), s, 11, 5, 0)


class TestLogDensity:
    def test_full_rank_at_origin(self):
        s = build_linear_schedule(50)
        d = 6
        assert log_density(DegenerateGaussian(d, d), s, 20, np.zeros(d)) == pytest.approx(-0.5 * d * math.log(2 * math.pi))

    def test_single_atom_half_noise(self):
        s = Schedule(np.array([0.5, 0.5]))
        point = PointMixture(np.zeros((1, 1)), np.ones(1))
        assert log_density(point, s, 1, np.zeros(1)) == pytest.approx(-0.5 * math.log(math.pi), rel=1e-14)

    def test_symmetric_pair(self):
        s = build_linear_schedule(100)
        xs = np.linspace(-3, 3, 13)[:, None]
        np.testing.assert_allclose(log_density(SYMMETRIC, s, 10, xs), log_density(SYMMETRIC, s, 10, -xs), atol=1e-12)

    def test_degenerate_has_no_density_at_zero(self):
        with pytest.raises(StepIndexError):
            log_density(DegenerateGaussian(1, 3), build_linear_schedule(10), 0, np.zeros(3))

    def test_dimension_check(self):
        with pytest.raises(InvalidParameterError):
            log_density(random_mixture(0), build_linear_schedule(10), 3, np.zeros(5))


class TestPosteriorMean:
    def test_single_atom(self):
        atom = np.array([[0.3, -1.2]])
        x = np.random.default_rng(0).normal(size=(7, 2))
        got = posterior_mean(PointMixture(atom, np.ones(1)), build_linear_schedule(100), 50, x)
        np.testing.assert_array_equal(got, np.repeat(atom, 7, axis=0))

    def test_symmetric_pair(self):
        s = build_linear_schedule(100)
        assert posterior_mean(SYMMETRIC, s, 50, np.zeros(1))[0] == 0.0
        # ab_t = 0.99: tanh(sqrt(0.99) / 0.01) rounds to 1
        s99 = Schedule(np.array([0.01, 0.01]))
        m = posterior_mean(SYMMETRIC, s99, 1, np.ones(1))[0]
        assert 0.0 < m <= 1.0
        assert m == pytest.approx(math.tanh(math.sqrt(0.99) / 0.01), abs=1e-15)

    def test_pair_matches_tanh_at_moderate_noise(self):
        s = Schedule(np.array([0.5, 0.5]))
        xs = np.linspace(-2, 2, 9)[:, None]
        np.testing.assert_allclose(posterior_mean(SYMMETRIC, s, 1, xs)[:, 0], np.tanh(math.sqrt(0.5) * xs[:, 0] / 0.5), rtol=1e-13)


class TestExactScore:
    def test_degenerate_origin(self):
        s = build_linear_schedule(20)
        np.testing.assert_array_equal(exact_score(DegenerateGaussian(2, 5), s, 7, np.zeros(5)), 0.0)

    def test_degenerate_substitution(self):
        s = Schedule(np.array([0.25, 0.25]))  # ab_1 = 0.75
        np.testing.assert_allclose(exact_score(DegenerateGaussian(1, 2), s, 1, np.array([2.0, 2.0])), [-2.0, -8.0], rtol=1e-15)

    @pytest.mark.parametrize("t", [2, 50, 100])
    def test_mixture_matches_finite_difference(self, t):
        s = build_linear_schedule(100)
        target = random_mixture(1)
        x = math.sqrt(s.ab(t)) * target.atoms[np.random.default_rng(t).integers(0, 5, 100)]
        x = x + math.sqrt(s.omab(t)) * np.random.default_rng(t + 1).normal(size=x.shape)
        fd = fd_gradient(lambda y: log_density(target, s, t, y), x)
        got = exact_score(target, s, t, x)
        rel = np.linalg.norm(got - fd, axis=1) / np.maximum(np.linalg.norm(fd, axis=1), 1e-300)
        assert rel.max() < 1e-5

    def test_degenerate_off_support_matches_finite_difference(self):
        s = build_linear_schedule(100)
        target = DegenerateGaussian(2, 6)
        x = forward_marginal_sample(target, s, 50, 100, seed=4)
        fd = fd_gradient(lambda y: log_density(target, s, 50, y), x)
        np.testing.assert_allclose(exact_score(target, s, 50, x)[:, 2:], fd[:, 2:], rtol=1e-5)

    def test_tweedie_identity(self):
        s = build_linear_schedule(100)
        target = random_mixture(2)
        x = np.random.default_rng(3).normal(size=(30, 8))
        t = 60
        via_mean = -(x - math.sqrt(s.ab(t)) * posterior_mean(target, s, t, x)) / s.omab(t)
        np.testing.assert_allclose(exact_score(target, s, t, x), via_mean, rtol=1e-10, atol=1e-12)


class TestPerturbedOracle:
    def test_zero_eps_is_exact(self):
        s = build_linear_schedule(30)
        target = DegenerateGaussian(2, 4)
        x = np.random.default_rng(0).normal(size=(10, 4))
        a = make_perturbed_oracle(target, s, 0.0, seed=5)
        b = exact_oracle(target, s)
        for t in (1, 15, 30):
            np.testing.assert_array_equal(a(t, x), b(t, x))

    @pytest.mark.parametrize("model", ["constant-bias", "random-field"])
    def test_error_norm_is_eps_pointwise(self, model):
        s = build_linear_schedule(30)
        target = DegenerateGaussian(2, 4)
        oracle = make_perturbed_oracle(target, s, 0.1, model=model, seed=8)
        x = np.random.default_rng(1).normal(size=(200, 4))
        for t in (1, 10, 30):
            exact = exact_score(target, s, t, x)
            err = np.linalg.norm(oracle(t, x) - exact, axis=1)
            # subtraction loses digits relative to |exact|
            tol = 1e-15 * (1 + np.abs(exact).max()) * 10
            np.testing.assert_allclose(err, 0.1, atol=tol)

    def test_mc_score_error_estimate(self):
        s = build_linear_schedule(100)
        target = random_mixture(4, d=3)
        oracle = make_perturbed_oracle(target, s, 0.1, model="random-field", seed=2)
        x = forward_marginal_sample(target, s, 40, 10_000, seed=6)
        sq = np.sum((oracle(40, x) - exact_score(target, s, 40, x)) ** 2, axis=1)
        se = sq.std(ddof=1) / math.sqrt(sq.size) + 1e-15
        assert abs(math.sqrt(sq.mean()) - 0.1) <= 3 * se

    def test_random_field_flips_with_side(self):
        s = build_linear_schedule(10)
        target = DegenerateGaussian(1, 3)
        oracle = make_perturbed_oracle(target, s, 1.0, model="random-field", seed=0)
        x = np.random.default_rng(0).normal(size=(1, 3))
        e_plus = oracle(5, x) - exact_score(target, s, 5, x)
        e_minus = oracle(5, -x) - exact_score(target, s, 5, -x)
        np.testing.assert_allclose(e_plus, -e_minus)

    def test_rejects_bad_input(self):
        s = build_linear_schedule(10)
        with pytest.raises(InvalidParameterError):
            make_perturbed_oracle(DegenerateGaussian(1, 2), s, -0.1)
        with pytest.raises(InvalidParameterError):
            make_perturbed_oracle(DegenerateGaussian(1, 2), s, 0.1, model="gaussian")


class TestTargetsValidation:
    def test_degenerate_dims(self):
        for k, d in [(0, 3), (4, 3)]:
            with pytest.raises(InvalidParameterError):
                DegenerateGaussian(k, d)

    def test_mixture_weights(self):
        with pytest.raises(InvalidParameterError):
            PointMixture(np.zeros((2, 1)), np.array([0.5, 0.6]))
        with pytest.raises(InvalidParameterError):
            PointMixture(np.zeros((2, 1)), np.array([1.0, 0.0]))

    def test_mixture_properties(self):
        m = PointMixture(np.array([[3.0, 4.0], [0.0, 1.0]]), np.array([0.25, 0.75]))
        assert (m.k, m.d, m.R) == (2, 2, 5.0)


class TestMixtureCsv:
    def test_roundtrip_with_header(self, tmp_path):
        path = tmp_path / "atoms.csv"
        path.write_text("weight,x1,x2\n# comment\n0.25,1,2\n0.75,-1,0.5\n")
        m = load_point_mixture_csv(path)
        np.testing.assert_array_equal(m.weights, [0.25, 0.75])
        np.testing.assert_array_equal(m.atoms, [[1, 2], [-1, 0.5]])

    def test_normalize(self, tmp_path):
        path = tmp_path / "atoms.csv"
        path.write_text("1,0\n3,1\n")
        with pytest.raises(InvalidParameterError):
            load_point_mixture_csv(path)
        np.testing.assert_allclose(load_point_mixture_csv(path, normalize=True).weights, [0.25, 0.75])

    def test_empty(self, tmp_path):
        path = tmp_path / "atoms.csv"
        path.write_text("# nothing\n")
        with pytest.raises(InvalidParameterError):
            load_point_mixture_csv(path)
