# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

import numpy as np
import pytest
from pydantic import ValidationError

from exceptions import InvalidArgumentError, OptimizationError
from optimizer import (
    OptimizerConfig,
    central_difference_gradient,
    minimize_local,
    minimize_refine,
    multi_start,
    uniform_seeds,
)
from state_prep import REFERENCE_STEPS, so2_transfer_fidelity
from tests.unit.fixtures import SnapSynthUnitTestFixtures


def quadratic(x):
    return (x[0] - 1.0) ** 2 + 10.0 * (x[1] + 2.0) ** 2


def rosenbrock(x):
    return (1.0 - x[0]) ** 2 + 100.0 * (x[1] - x[0] ** 2) ** 2


def multi_well(x):
    return float(np.cos(3 * x[0]) + x[0] ** 2 / 10)


class TestOptimizerConfig(SnapSynthUnitTestFixtures):
    def test_given_no_arguments_when_optimizer_config_then_defaults_are_used(self):
        config = OptimizerConfig()

        assert config.max_evals == 4000
        assert config.seed == 0
        assert config.workers == 1

    @pytest.mark.parametrize(
        "settings", [{"max_evals": 0}, {"xtol": 0.0}, {"workers": 0}, {"unknown": 1}]
    )
    def test_given_invalid_settings_when_optimizer_config_then_validation_error_is_raised(
        self, settings
    ):
        with pytest.raises(ValidationError):
            OptimizerConfig(**settings)

    def test_given_config_when_modified_then_validation_error_is_raised(self):
        with pytest.raises(ValidationError):
            self.config.seed = 3  # type: ignore[misc]


class TestMinimizeLocal(SnapSynthUnitTestFixtures):
    def test_given_quadratic_when_minimize_local_then_minimizer_is_found(self):
        result = minimize_local(quadratic, [0.0, 0.0], self.config)

        assert result.x == pytest.approx([1.0, -2.0], abs=1e-4)
        assert result.fval < 1e-8
        assert result.converged

    def test_given_rosenbrock_from_standard_start_when_minimize_local_then_minimum_is_reached_within_budget(  # noqa: E501
        self,
    ):
        result = minimize_local(rosenbrock, [-1.2, 1.0], OptimizerConfig(max_evals=2000))

        assert result.fval < 1e-6
        assert result.evals <= 2000
        assert result.x == pytest.approx([1.0, 1.0], abs=1e-2)

    def test_given_rounded_lowest_transfer_displacements_when_minimize_local_then_reference_infidelity_is_reached(  # noqa: E501
        self,
    ):
        alphas, reference = REFERENCE_STEPS[0]

        result = minimize_local(
            lambda x: 1.0 - so2_transfer_fidelity(0, x), np.round(alphas, 1), self.config
        )

        assert result.fval <= reference + 2e-4
        assert result.fval <= 1e-3

    def test_given_result_when_objective_reevaluated_at_best_point_then_stored_value_is_reproduced(  # noqa: E501
        self,
    ):
        result = minimize_local(rosenbrock, [-1.2, 1.0], self.config)

        assert rosenbrock(result.x) == result.fval

    def test_given_run_when_inspecting_history_then_best_value_never_increases(self):
        result = minimize_local(rosenbrock, [-1.2, 1.0], self.config)

        assert len(result.history) == result.evals
        assert all(later <= earlier for earlier, later in zip(result.history, result.history[1:]))
        assert result.history[-1] == result.fval

    def test_given_small_budget_when_minimize_local_then_best_point_is_returned_unconverged(
        self,
    ):
        config = OptimizerConfig(max_evals=10)

        result = minimize_local(rosenbrock, [-1.2, 1.0], config)

        assert not result.converged
        assert result.evals <= 10
        assert result.fval <= rosenbrock(np.array([-1.2, 1.0]))

    def test_given_objective_not_finite_at_start_when_minimize_local_then_invalid_argument_error_is_raised(  # noqa: E501
        self,
    ):
        with pytest.raises(InvalidArgumentError):
            minimize_local(lambda x: np.nan, [0.0], self.config)

    def test_given_objective_with_non_finite_region_when_minimize_local_then_region_is_avoided(
        self,
    ):
        def guarded(x):
            return np.nan if x[0] > 2.0 else (x[0] - 1.0) ** 2

        result = minimize_local(guarded, [0.0], self.config)

        assert np.isfinite(result.fval)
        assert result.x[0] == pytest.approx(1.0, abs=1e-4)

    def test_given_no_parameters_when_minimize_local_then_invalid_argument_error_is_raised(self):
        with pytest.raises(InvalidArgumentError):
            minimize_local(quadratic, [], self.config)


class TestMinimizeRefine(SnapSynthUnitTestFixtures):
    def test_given_quadratic_when_minimize_refine_then_minimizer_is_found_and_converged(self):
        result = minimize_refine(quadratic, [3.0, 1.0], self.config)

        assert result.x == pytest.approx([1.0, -2.0], abs=1e-6)
        assert result.converged

    def test_given_refined_result_when_objective_reevaluated_then_stored_value_is_reproduced(
        self,
    ):
        result = minimize_refine(rosenbrock, [-1.2, 1.0], self.config)

        assert rosenbrock(result.x) == result.fval
        assert result.evals <= self.config.max_evals

    def test_given_quadratic_minimizer_when_central_difference_gradient_then_gradient_vanishes(
        self,
    ):
        step = self.config.fd_step

        gradient = central_difference_gradient(quadratic, np.array([1.0, -2.0]), step)

        assert np.max(np.abs(gradient)) <= 10 * step**2

    def test_given_quadratic_form_when_central_difference_gradient_then_analytic_gradient_is_matched(  # noqa: E501
        self,
    ):
        a = np.array([[2.0, 0.5], [0.5, 1.0]])
        x = np.array([1.0, 2.0])

        gradient = central_difference_gradient(lambda v: float(v @ a @ v), x, 1e-6)

        assert gradient == pytest.approx(2 * a @ x, abs=1e-6)


class TestMultiStart(SnapSynthUnitTestFixtures):
    def test_given_multi_well_objective_when_multi_start_then_global_basin_is_found(self):
        grid = np.linspace(-4.0, 4.0, 800001)
        values = np.cos(3 * grid) + grid**2 / 10
        best = int(np.argmin(values))

        result = multi_start(multi_well, [[-2.0], [0.0], [2.0]], self.config)

        assert result.fval <= values[best] + 1e-8
        assert abs(result.x[0]) == pytest.approx(abs(grid[best]), abs=1e-3)

    def test_given_identical_seeds_when_multi_start_then_evaluations_are_summed(self):
        single = minimize_local(quadratic, [0.0, 0.0], self.config)

        result = multi_start(quadratic, [[0.0, 0.0], [0.0, 0.0]], self.config)

        assert result.evals == 2 * single.evals
        assert result.fval == single.fval
        assert np.array_equal(result.x, single.x)

    def test_given_several_workers_when_multi_start_then_result_matches_sequential_run(self):
        seeds = uniform_seeds(2, 4, self.config, -3.0, 3.0)
        parallel = self.config.model_copy(update={"workers": 3})

        sequential_result = multi_start(rosenbrock, seeds, self.config)
        parallel_result = multi_start(rosenbrock, seeds, parallel)

        assert parallel_result.fval == sequential_result.fval
        assert np.array_equal(parallel_result.x, sequential_result.x)
        assert parallel_result.evals == sequential_result.evals

    def test_given_every_seed_failing_when_multi_start_then_optimization_error_lists_each_seed(
        self,
    ):
        with pytest.raises(OptimizationError) as e:
            multi_start(lambda x: np.inf, [[0.0], [1.0], [2.0]], self.config)

        assert len(e.value.diagnostics) == 3

    def test_given_no_seeds_when_multi_start_then_invalid_argument_error_is_raised(self):
        with pytest.raises(InvalidArgumentError):
            multi_start(quadratic, [], self.config)

    def test_given_same_config_seed_when_uniform_seeds_then_points_are_reproduced_within_bounds(
        self,
    ):
        first = uniform_seeds(3, 5, self.config, -0.5, 0.5)
        second = uniform_seeds(3, 5, self.config, -0.5, 0.5)

        assert len(first) == 5
        assert all(np.array_equal(a, b) for a, b in zip(first, second))
        assert all(np.all(np.abs(point) <= 0.5) for point in first)

    def test_given_five_random_seeds_when_multi_start_on_level_two_transfer_then_reference_quality_is_reached(  # noqa: E501
        self,
    ):
        scale = 1.0 / np.sqrt(3)
        seeds = uniform_seeds(3, 5, self.config, -scale, scale)

        result = multi_start(lambda x: 1.0 - so2_transfer_fidelity(2, x), seeds, self.config)

        assert result.fval <= 1e-3
        assert result.evals <= 5 * self.config.max_evals
