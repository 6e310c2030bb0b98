import numpy as np
import pytest

from pmvr.benchmarks import (
    PortfolioData,
    SingleIndexConfig,
    mean_deviation_direct,
    mean_deviation_problem,
    mean_variance_problem,
    quadratic_distance_problem,
    single_index_problem,
    synthetic_portfolio_data,
)
from pmvr.checks import finite_difference_gradient, relative_error
from pmvr.problems import exact_gradient, objective
from pmvr.rng import RandomSource
from pmvr.sets import Simplex


@pytest.fixture(scope="module")
def toy_data():
    return PortfolioData(np.array([[0.01, 0.0], [0.0, 0.01]]))


@pytest.fixture(scope="module")
def synth_data():
    return synthetic_portfolio_data(d=5, periods=60, data_seed=1)


class TestMeanVariance:
    def test_hand_value(self):
        # equal weights on anti-correlated periods: variance term vanishes
        data = PortfolioData(np.array([[1.0, 0.0], [0.0, 1.0]]))
        problem = mean_variance_problem(data, 1.0)
        assert objective(problem, np.array([0.5, 0.5])) == pytest.approx(-0.5)

    def test_risk_off_limit_is_linear(self, synth_data):
        problem = mean_variance_problem(synth_data, 0.0)
        x = np.full(5, 0.2)
        assert objective(problem, x) == pytest.approx(-float(synth_data.rbar @ x))
        assert np.allclose(exact_gradient(problem, x), -synth_data.rbar, atol=1e-15)

    def test_gradient_matches_finite_differences(self, synth_data):
        problem = mean_variance_problem(synth_data, 1.0)
        fset = Simplex(5)
        gen = np.random.default_rng(2)
        for _ in range(5):
            x = fset.project(gen.normal(0.2, 0.5, size=5))
            fd = finite_difference_gradient(lambda p: objective(problem, p), x)
            assert relative_error(exact_gradient(problem, x), fd) <= 1e-5

    def test_composition_equals_direct_formula(self, synth_data):
        problem = mean_variance_problem(synth_data, 2.5)
        r = synth_data.returns
        gen = np.random.default_rng(3)
        fset = Simplex(5)
        for _ in range(20):
            x = fset.project(gen.normal(0.2, 0.5, size=5))
            port = r @ x
            direct = -port.mean() + 2.5 * port.var()
            assert objective(problem, x) == pytest.approx(direct, abs=1e-12)

    def test_midpoint_convexity(self, synth_data):
        problem = mean_variance_problem(synth_data, 1.0)
        gen = np.random.default_rng(4)
        fset = Simplex(5)
        for _ in range(20):
            a = fset.project(gen.normal(0.2, 0.5, size=5))
            b = fset.project(gen.normal(0.2, 0.5, size=5))
            mid = objective(problem, 0.5 * (a + b))
            assert mid <= 0.5 * (objective(problem, a) + objective(problem, b)) + 1e-12

    def test_stochastic_oracles_average_to_exact(self, toy_data):
        problem = mean_variance_problem(toy_data, 1.0)
        gen = np.random.default_rng(5)
        for level in problem.levels:
            for _ in range(5):
                point = gen.normal(0.3, 0.4, size=level.in_dim)
                avg = np.mean(
                    [level.value(point, t) for t in range(toy_data.periods)], axis=0
                )
                assert np.abs(avg - level.exact_value(point)).max() <= 1e-12

    def test_rejects_negative_risk_weight(self, toy_data):
        with pytest.raises(ValueError):
            mean_variance_problem(toy_data, -0.1)


class TestMeanDeviation:
    def test_zero_variance_data(self):
        data = PortfolioData(np.tile(np.array([0.02, 0.01]), (4, 1)))
        problem = mean_deviation_problem(data, 1.0)
        x = np.array([0.5, 0.5])
        assert objective(problem, x) == pytest.approx(-0.015, abs=1e-5)

    def test_hand_value(self):
        data = PortfolioData(np.array([[1.0, 0.0], [0.0, 1.0]]))
        problem = mean_deviation_problem(data, 1.0)
        assert objective(problem, np.array([0.5, 0.5])) == pytest.approx(-0.5, abs=1e-6)

    def test_composition_matches_direct_formula(self, synth_data):
        problem = mean_deviation_problem(synth_data, 1.5)
        gen = np.random.default_rng(6)
        fset = Simplex(5)
        for _ in range(20):
            x = fset.project(gen.normal(0.2, 0.5, size=5))
            direct = mean_deviation_direct(synth_data, 1.5, x)
            assert abs(objective(problem, x) - direct) <= 1e-6

    def test_gradient_matches_finite_differences(self, synth_data):
        problem = mean_deviation_problem(synth_data, 1.0)
        fset = Simplex(5)
        gen = np.random.default_rng(7)
        for _ in range(5):
            x = fset.project(gen.normal(0.2, 0.5, size=5))
            fd = finite_difference_gradient(lambda p: objective(problem, p), x)
            assert relative_error(exact_gradient(problem, x), fd) <= 1e-5

    def test_stochastic_oracles_average_to_exact(self, synth_data):
        problem = mean_deviation_problem(synth_data, 1.0)
        gen = np.random.default_rng(8)
        for level in problem.levels:
            point = np.abs(gen.normal(0.3, 0.2, size=level.in_dim)) + 0.05
            avg = np.mean(
                [level.value(point, t) for t in range(synth_data.periods)], axis=0
            )
            assert np.abs(avg - level.exact_value(point)).max() <= 1e-12

    def test_composed_gradient_matches_direct_formula_fd(self, synth_data):
        # gradient of the level decomposition vs finite differences of the
        # single-formula objective (independent of the chain path)
        problem = mean_deviation_problem(synth_data, 1.5)
        fset = Simplex(5)
        gen = np.random.default_rng(12)
        for _ in range(5):
            x = fset.project(gen.normal(0.2, 0.5, size=5))
            fd = finite_difference_gradient(
                lambda p: mean_deviation_direct(synth_data, 1.5, p), x
            )
            assert relative_error(exact_gradient(problem, x), fd) <= 1e-4

    def test_tracker_domain_extension_is_finite_and_c1(self, synth_data):
        # the square-root level accepts (transient) negative variance inputs
        problem = mean_deviation_problem(synth_data, 1.0)
        g3 = problem.levels[2]
        below = g3.exact_value(np.array([0.1, -1e-6]))
        assert np.isfinite(below).all()
        jac_below = g3.exact_jacobian(np.array([0.1, -1e-6]))
        jac_zero = g3.exact_jacobian(np.array([0.1, 0.0]))
        assert np.isfinite(jac_below).all()
        assert jac_below[1, 0] == pytest.approx(jac_zero[1, 0], rel=1e-6)


class TestSingleIndex:
    def test_target_has_unit_nuclear_norm(self):
        problem, _ = single_index_problem(SingleIndexConfig(m=6, n=6, sigma=0.0))
        sig = np.linalg.svd(problem.b_star, compute_uv=False)
        assert sig.sum() == pytest.approx(1.0, abs=1e-9)
        assert (sig > 1e-12).sum() == 1  # rank one by construction

    def test_perfect_recovery_no_noise(self):
        problem, _ = single_index_problem(SingleIndexConfig(m=5, n=5, sigma=0.0))
        b_star = problem.b_star
        # every stochastic loss sample vanishes at the target
        gen = RandomSource(1).split(1).generator
        samples = problem.levels[0].samples.draw(gen, 50)
        for s in samples:
            val = problem.levels[0].value(b_star.reshape(-1), s)
            assert abs(val[0]) <= 1e-20
        assert objective(problem, b_star) == pytest.approx(0.0, abs=1e-10)

    def test_f_star_is_noise_floor(self):
        problem, _ = single_index_problem(SingleIndexConfig(m=4, n=4, sigma=0.3))
        assert problem.metadata.f_star == pytest.approx(0.09)
        assert objective(problem, problem.b_star) == pytest.approx(0.09, abs=1e-12)
        grad = exact_gradient(problem, problem.b_star)
        assert np.abs(grad).max() <= 1e-10  # target is stationary

    def test_stochastic_gradient_fd_on_fixed_sample(self):
        problem, ball = single_index_problem(SingleIndexConfig(m=4, n=3, sigma=0.1))
        level = problem.levels[0]
        gen = RandomSource(2).split(3).generator
        sample = level.samples.draw(gen, 1)[0]
        b = ball.project(gen.standard_normal((4, 3))).reshape(-1)
        grad = level.jacobian(b, sample).reshape(-1)
        fd = finite_difference_gradient(
            lambda p: float(level.value(p.reshape(-1), sample)[0]), b
        ).reshape(-1)
        assert relative_error(grad, fd) <= 1e-5

    def test_exact_oracle_matches_monte_carlo(self):
        problem, ball = single_index_problem(SingleIndexConfig(m=3, n=3, sigma=0.2))
        level = problem.levels[0]
        gen = RandomSource(3).split(4).generator
        b = ball.project(gen.standard_normal((3, 3)))
        flat = b.reshape(-1)
        samples = level.samples.draw(gen, 200_000)
        vals = np.array([level.value(flat, s)[0] for s in samples])
        grads = np.stack([level.jacobian(flat, s).reshape(-1) for s in samples])
        want_val = level.exact_value(flat)[0]
        se = vals.std() / np.sqrt(len(vals))
        assert abs(vals.mean() - want_val) <= 5 * se
        want_grad = level.exact_jacobian(flat).reshape(-1)
        grad_se = grads.std(axis=0) / np.sqrt(len(vals))
        assert np.all(np.abs(grads.mean(axis=0) - want_grad) <= 5 * grad_se + 1e-12)

    def test_exact_gradient_matches_finite_differences(self):
        problem, ball = single_index_problem(SingleIndexConfig(m=4, n=4, sigma=0.1))
        gen = np.random.default_rng(9)
        for _ in range(5):
            b = ball.project(gen.standard_normal((4, 4)))
            fd = finite_difference_gradient(lambda p: objective(problem, p), b)
            assert relative_error(exact_gradient(problem, b), fd) <= 1e-5

    def test_rectangular_identity_generation(self):
        problem, _ = single_index_problem(SingleIndexConfig(m=5, n=3, sigma=0.0))
        gen = RandomSource(4).split(5).generator
        (a, _), = problem.levels[0].samples.draw(gen, 1)
        assert a.shape == (5, 3)


class TestQuadraticDistanceToy:
    def test_f_star_from_projection(self):
        fset = Simplex(2)
        problem = quadratic_distance_problem(np.array([0.2, 0.4]), fset, noise=0.0)
        assert problem.metadata.f_star == pytest.approx(0.08)
        assert problem.metadata.strong_convexity == 2.0

    def test_noise_is_unbiased(self):
        fset = Simplex(3)
        problem = quadratic_distance_problem(np.array([1.0, 0.0, -1.0]), fset, noise=0.2)
        level = problem.levels[0]
        gen = RandomSource(5).split(6).generator
        samples = level.samples.draw(gen, 50_000)
        x = np.array([0.3, 0.3, 0.4])
        vals = np.array([level.value(x, s)[0] for s in samples])
        want = level.exact_value(x)[0]
        assert abs(vals.mean() - want) <= 5 * vals.std() / np.sqrt(len(vals))


def test_portfolio_data_validation():
    with pytest.raises(ValueError):
        PortfolioData(np.empty((0, 3)))
    with pytest.raises(ValueError):
        PortfolioData(np.array([[np.nan, 1.0]]))
