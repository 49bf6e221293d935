# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

import math
from unittest.mock import patch

import numpy as np
import pytest

from exceptions import FoldingBudgetError, InvalidArgumentError, StepOptimizationError
from fock_core import (
    Displacement,
    Snap,
    apply_sequence,
    basis_state,
    coherent_state,
    state_fidelity,
)
from optimizer import OptimResult
from state_prep import (
    SO2_FIDELITY_FLOOR,
    FoldBlock,
    SweepRow,
    TargetState,
    compile_fock_state,
    compile_fock_sublinear,
    compile_state_prep,
    fit_power_law,
    fold_band,
    gate_count_sweep,
    ideal_ladder_state,
    ladder_amplitudes,
    minimum_fold_blocks,
    optimize_so2_step,
    phase_unroll,
    so2_step_gates,
    so2_transfer_fidelity,
    sublinear_cutoff,
)
from tests.unit.fixtures import (
    CompilerMockFixtures,
    SnapSynthUnitTestFixtures,
    example_plan,
    identity_run,
)


class TestTargetState(SnapSynthUnitTestFixtures):
    def test_given_unnormalized_coefficients_when_target_state_then_invalid_argument_error_is_raised(  # noqa: E501
        self,
    ):
        with pytest.raises(InvalidArgumentError):
            TargetState(np.array([0.6, 0.6]))

    def test_given_level_when_fock_then_single_unit_coefficient_is_stored(self):
        target = TargetState.fock(3)

        assert target.top_level == 3
        assert list(target.coeffs) == [0, 0, 0, 1]

    def test_given_size_when_uniform_then_coefficients_are_equal_and_normalized(self):
        target = TargetState.uniform(3)

        assert target.coeffs == pytest.approx([0.5] * 4)

    def test_given_trailing_zero_coefficients_when_trimmed_then_they_are_dropped(self):
        target = TargetState(np.array([0.6, 0.8, 0.0, 0.0]))

        assert target.trimmed().top_level == 1

    def test_given_target_when_as_state_then_coefficients_are_padded_to_cutoff(self):
        state = TargetState(np.array([0.6, 0.8])).as_state(5)

        assert state.cutoff == 5
        assert state.amps == pytest.approx([0.6, 0.8, 0, 0, 0])


class TestLadder(SnapSynthUnitTestFixtures):
    def test_given_complex_target_when_phase_unroll_then_snap_restores_original_from_magnitudes(
        self,
    ):
        target = TargetState(np.array([0.6, 0.48j, -0.64]))

        snap, magnitudes = phase_unroll(target)

        assert magnitudes.coeffs == pytest.approx([0.6, 0.48, 0.64])
        restored = snap.diagonal(3) * magnitudes.coeffs
        assert restored == pytest.approx(target.coeffs, abs=1e-12)

    def test_given_zero_coefficient_when_phase_unroll_then_its_phase_is_zero(self):
        snap, _ = phase_unroll(TargetState(np.array([0.0, 1j])))

        assert snap.phases == pytest.approx((0.0, math.pi / 2))

    def test_given_uniform_target_when_ladder_amplitudes_then_residuals_and_angles_follow_closed_form(  # noqa: E501
        self,
    ):
        residual, theta = ladder_amplitudes(TargetState.uniform(3))

        expected = np.sqrt((4 - np.arange(4)) / 4)
        assert residual == pytest.approx(expected, abs=1e-12)
        assert theta == pytest.approx(np.arcsin(expected[1:] / expected[:-1]), abs=1e-12)

    def test_given_negative_coefficient_when_ladder_amplitudes_then_invalid_argument_error_is_raised(  # noqa: E501
        self,
    ):
        with pytest.raises(InvalidArgumentError):
            ladder_amplitudes(TargetState(np.array([0.6, -0.8])))

    def test_given_random_nonnegative_targets_when_exact_rotations_are_chained_then_target_is_reproduced(  # noqa: E501
        self,
    ):
        for _ in range(100):
            size = int(self.rng.integers(1, 9))
            magnitudes = 0.1 + self.rng.random(size)
            magnitudes /= np.linalg.norm(magnitudes)
            _, theta = ladder_amplitudes(TargetState(magnitudes.astype(complex)))

            amps = ideal_ladder_state(theta, size + 4)

            assert np.max(np.abs(amps[:size] - magnitudes)) <= 1e-12
            assert np.max(np.abs(amps[size:])) <= 1e-12

    def test_given_level_when_so2_step_gates_then_five_gates_alternate_with_pi_flips(self):
        gates = so2_step_gates(2, (0.1, 0.2, 0.3))

        assert gates[0] == Displacement(0.1)
        assert gates[2] == Displacement(0.2)
        assert gates[4] == Displacement(0.3)
        assert gates[1] == gates[3] == Snap((math.pi,) * 3)

    def test_given_zero_displacements_when_so2_transfer_fidelity_then_no_population_moves(self):
        assert so2_transfer_fidelity(1, (0.0, 0.0, 0.0)) == pytest.approx(0.0, abs=1e-12)

    def test_given_unknown_convention_when_so2_transfer_fidelity_then_invalid_argument_error_is_raised(  # noqa: E501
        self,
    ):
        with pytest.raises(InvalidArgumentError):
            so2_transfer_fidelity(0, (0.1, 0.2, 0.3), convention="middle")


class TestSO2Step(SnapSynthUnitTestFixtures):
    def test_given_zero_angle_when_optimize_so2_step_then_identity_step_is_returned(self):
        step = optimize_so2_step(3, 0.0, config=self.config)

        assert step.alphas == (0.0, 0.0, 0.0)
        assert step.fidelity == 1.0

    def test_given_partial_rotation_when_optimize_so2_step_then_fidelity_floor_is_reached(self):
        step = optimize_so2_step(1, math.pi / 6, config=self.config)

        assert step.n == 1
        assert step.theta == pytest.approx(math.pi / 6)
        assert step.fidelity >= SO2_FIDELITY_FLOOR

    @pytest.mark.parametrize("theta", [-0.1, math.pi])
    def test_given_angle_outside_quarter_turn_when_optimize_so2_step_then_invalid_argument_error_is_raised(  # noqa: E501
        self, theta
    ):
        with pytest.raises(InvalidArgumentError):
            optimize_so2_step(0, theta, config=self.config)

    def test_given_level_at_top_of_cutoff_when_optimize_so2_step_then_invalid_argument_error_is_raised(  # noqa: E501
        self,
    ):
        with pytest.raises(InvalidArgumentError):
            optimize_so2_step(9, 0.5, cutoff=10, config=self.config)

    def test_given_optimizer_stuck_below_floor_when_optimize_so2_step_then_error_carries_best_step(  # noqa: E501
        self,
    ):
        stuck = OptimResult(x=np.zeros(3), fval=0.5, evals=1, converged=False)

        with patch("state_prep.multi_start", return_value=stuck):
            with pytest.raises(StepOptimizationError) as e:
                optimize_so2_step(0, 1.0, config=self.config)

        assert e.value.best.fidelity == pytest.approx(0.5)
        assert e.value.best.alphas == (0.0, 0.0, 0.0)


class TestCompileStatePrep(SnapSynthUnitTestFixtures):
    def test_given_vacuum_target_when_compile_state_prep_then_empty_sequence_is_returned(self):
        plan = compile_state_prep(TargetState.fock(0), config=self.config)

        assert len(plan.sequence) == 0
        assert plan.fidelity == pytest.approx(1.0)
        assert plan.snap_count == 0

    def test_given_two_level_superposition_when_compile_state_prep_then_plan_reaches_high_fidelity(  # noqa: E501
        self,
    ):
        plan = compile_state_prep(TargetState.uniform(1), config=self.config)

        assert 1.0 - plan.fidelity <= 1e-4
        assert plan.snap_count == 2
        assert plan.displacement_count <= 3
        assert plan.scheme == "linear"
        assert len(plan.stages) == 1

    def test_given_compiled_plan_when_sequence_is_resimulated_then_stored_fidelity_is_reproduced(  # noqa: E501
        self,
    ):
        plan = compile_state_prep(TargetState.uniform(1), config=self.config)
        nc = plan.sequence.cutoff

        final = apply_sequence(plan.sequence, basis_state(0, nc))

        fidelity = state_fidelity(final, plan.target.as_state(nc))
        assert fidelity == pytest.approx(plan.fidelity, abs=1e-10)

    def test_given_compiled_plan_when_comparing_stages_then_refinement_never_degrades(self):
        plan = compile_state_prep(TargetState.uniform(1), config=self.config)

        assert plan.fidelity >= plan.trace["stage1_fidelity"] - 1e-12

    def test_given_target_with_phases_when_compile_state_prep_then_phase_snap_comes_last(self):
        target = TargetState(np.array([0.6, 0.8j]))

        plan = compile_state_prep(target, config=self.config)

        last = plan.sequence.gates[-1]
        assert isinstance(last, Snap)
        assert last.phases == pytest.approx((0.0, math.pi / 2))
        assert plan.fidelity >= 0.999

    def test_given_cutoff_without_buffer_when_compile_state_prep_then_invalid_argument_error_is_raised(  # noqa: E501
        self,
    ):
        with pytest.raises(InvalidArgumentError):
            compile_state_prep(TargetState.uniform(5), cutoff=12, config=self.config)


class TestSublinear(SnapSynthUnitTestFixtures):
    def test_given_level_when_sublinear_cutoff_and_fold_band_then_band_covers_three_root_n(self):
        assert sublinear_cutoff(16) == 43
        assert fold_band(16, 43) == (4, 28)
        assert fold_band(1, 19) == (0, 4)

    def test_given_level_when_displacing_vacuum_by_root_n_then_population_is_poisson_weight(
        self,
    ):
        n = 9

        population = coherent_state(math.sqrt(n), 40).populations()[n]

        assert population == pytest.approx(math.exp(-n) * n**n / math.factorial(n), abs=1e-10)

    @pytest.mark.parametrize(
        "n,blocks", [(1, 4), (2, 8), (4, 8), (8, 12), (16, 16), (20, 20)]
    )
    def test_given_level_when_minimum_fold_blocks_then_four_blocks_per_root_n_are_required(
        self, n, blocks
    ):
        assert minimum_fold_blocks(n) == blocks

    def test_given_linear_snap_counts_when_compared_with_fold_floor_then_crossover_lies_between_five_and_twelve(  # noqa: E501
        self,
    ):
        undercut = [n for n in range(1, 21) if minimum_fold_blocks(n) < 2 * n]

        assert 5 <= min(undercut) <= 12
        assert 4 not in undercut
        assert 16 in undercut

    @pytest.mark.parametrize(
        "n,target_fidelity,cutoff",
        [(0, 0.99, None), (4, 1.0, None), (4, 0.9, None), (4, 0.99, 20)],
    )
    def test_given_bad_arguments_when_compile_fock_sublinear_then_invalid_argument_error_is_raised(  # noqa: E501
        self, n, target_fidelity, cutoff
    ):
        with pytest.raises(InvalidArgumentError):
            compile_fock_sublinear(n, target_fidelity, cutoff, self.config)

    def test_given_optimizer_that_never_moves_when_compile_fock_sublinear_then_every_block_count_is_tried(  # noqa: E501
        self,
    ):
        with patch("state_prep.minimize_refine", side_effect=identity_run) as refine:
            with pytest.raises(FoldingBudgetError) as e:
                compile_fock_sublinear(4, 0.999, config=self.config)

        assert refine.call_count == 1 + 2 * 8
        best = e.value.best
        assert best.scheme == "sublinear"
        assert best.sequence.gates[0] == Displacement(2.0)
        tried = [entry["blocks"] for entry in best.trace["folding"]]
        assert tried == list(range(8, 17))
        assert all(isinstance(block, FoldBlock) for block in best.stages)
        assert all(len(block.phases) == 11 for block in best.stages)
        assert best.snap_count == len(best.stages)


class TestFockSchemeChoice(CompilerMockFixtures):
    def test_given_unknown_scheme_when_compile_fock_state_then_invalid_argument_error_is_raised(
        self,
    ):
        with pytest.raises(InvalidArgumentError):
            compile_fock_state(4, 0.999, scheme="quadratic")

    def test_given_negative_level_when_compile_fock_state_then_invalid_argument_error_is_raised(
        self,
    ):
        with pytest.raises(InvalidArgumentError):
            compile_fock_state(-1, 0.999)

    def test_given_low_level_when_compile_fock_state_in_auto_mode_then_linear_plan_is_kept(self):
        linear = example_plan(2, snap_count=4)
        self.mock_compile_state_prep.return_value = linear

        plan = compile_fock_state(2, 0.999, config=self.config)

        assert plan is linear
        self.mock_compile_fock_sublinear.assert_not_called()

    def test_given_fold_floor_equal_to_linear_count_when_compile_fock_state_in_auto_mode_then_folding_is_not_compiled(  # noqa: E501
        self,
    ):
        linear = example_plan(4, snap_count=8)
        self.mock_compile_state_prep.return_value = linear

        assert compile_fock_state(4, 0.999, config=self.config) is linear
        self.mock_compile_fock_sublinear.assert_not_called()

    def test_given_fold_floor_below_linear_count_when_compile_fock_state_in_auto_mode_then_folding_is_compiled(  # noqa: E501
        self,
    ):
        linear = example_plan(7, snap_count=14)
        self.mock_compile_state_prep.return_value = linear
        folded = example_plan(7, snap_count=12, scheme="sublinear")
        self.mock_compile_fock_sublinear.return_value = folded

        assert compile_fock_state(7, 0.999, config=self.config) is folded

    def test_given_high_level_and_cheaper_folding_when_compile_fock_state_in_auto_mode_then_folding_is_chosen(  # noqa: E501
        self,
    ):
        self.mock_compile_state_prep.return_value = example_plan(16, snap_count=32)
        folded = example_plan(16, snap_count=9, scheme="sublinear")
        self.mock_compile_fock_sublinear.return_value = folded

        plan = compile_fock_state(16, 0.999, config=self.config)

        assert plan is folded
        self.mock_compile_fock_sublinear.assert_called_once_with(16, 0.999, None, self.config)

    def test_given_folding_not_cheaper_when_compile_fock_state_in_auto_mode_then_linear_plan_is_kept(  # noqa: E501
        self,
    ):
        linear = example_plan(8, snap_count=16)
        self.mock_compile_state_prep.return_value = linear
        self.mock_compile_fock_sublinear.return_value = example_plan(8, snap_count=16)

        assert compile_fock_state(8, 0.999, config=self.config) is linear

    def test_given_folding_out_of_budget_when_compile_fock_state_in_auto_mode_then_linear_plan_is_kept(  # noqa: E501
        self,
    ):
        linear = example_plan(12, snap_count=24)
        self.mock_compile_state_prep.return_value = linear
        self.mock_compile_fock_sublinear.side_effect = FoldingBudgetError("short", best=None)

        assert compile_fock_state(12, 0.999, config=self.config) is linear

    def test_given_sublinear_scheme_when_compile_fock_state_then_linear_scheme_is_not_compiled(
        self,
    ):
        folded = example_plan(3, snap_count=2, scheme="sublinear")
        self.mock_compile_fock_sublinear.return_value = folded

        plan = compile_fock_state(3, 0.99, scheme="sublinear", cutoff=30, config=self.config)

        assert plan is folded
        self.mock_compile_state_prep.assert_not_called()
        self.mock_compile_fock_sublinear.assert_called_once_with(3, 0.99, 30, self.config)


class TestGateCountSweep(CompilerMockFixtures):
    def test_given_levels_and_fidelities_when_sweeping_then_one_row_per_level_scheme_and_fidelity(  # noqa: E501
        self,
    ):
        self.mock_compile_state_prep.side_effect = lambda target, *_: example_plan(
            target.top_level, snap_count=2 * target.top_level
        )
        self.mock_compile_fock_sublinear.side_effect = lambda n, *_: example_plan(
            n, snap_count=n // 2, scheme="sublinear"
        )

        rows = list(gate_count_sweep([4, 8], [0.99, 0.999], config=self.config))

        assert len(rows) == 8
        assert self.mock_compile_state_prep.call_count == 2
        assert [(row.n, row.scheme) for row in rows[:4]] == [
            (4, "linear"),
            (4, "sublinear"),
            (4, "linear"),
            (4, "sublinear"),
        ]
        assert [row.snap_count for row in rows if row.scheme == "linear"] == [8, 8, 16, 16]
        assert not any(row.missing for row in rows)

    def test_given_failing_folding_when_sweeping_then_cell_is_recorded_as_missing(self):
        self.mock_compile_state_prep.return_value = example_plan(4, snap_count=8)
        best = example_plan(4, snap_count=5, fidelity=0.98, scheme="sublinear")
        self.mock_compile_fock_sublinear.side_effect = FoldingBudgetError("short", best=best)

        rows = list(gate_count_sweep([4], [0.999], config=self.config))

        folded = rows[1]
        assert folded.missing
        assert folded.error == "short"
        assert folded.cutoff == best.sequence.cutoff
        assert folded.achieved_fidelity is None

    def test_given_empty_levels_when_sweeping_then_invalid_argument_error_is_raised(self):
        with pytest.raises(InvalidArgumentError):
            list(gate_count_sweep([], [0.999]))


class TestPowerLaw(SnapSynthUnitTestFixtures):
    def test_given_square_root_counts_when_fit_power_law_then_exponent_and_prefactor_are_recovered(  # noqa: E501
        self,
    ):
        ns = [4, 9, 16, 25]

        exponent, prefactor = fit_power_law(ns, [3 * math.sqrt(n) for n in ns])

        assert exponent == pytest.approx(0.5, abs=1e-10)
        assert prefactor == pytest.approx(3.0, abs=1e-9)

    @pytest.mark.parametrize("ns,counts", [([4], [2]), ([4, 9], [2, 0]), ([4, 9], [2])])
    def test_given_unusable_points_when_fit_power_law_then_invalid_argument_error_is_raised(
        self, ns, counts
    ):
        with pytest.raises(InvalidArgumentError):
            fit_power_law(ns, counts)

    def test_given_row_without_counts_when_missing_then_true_is_returned(self):
        row = SweepRow(n=4, scheme="sublinear", target_fidelity=0.999, cutoff=25)

        assert row.missing
