# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

from typing import List
from unittest.mock import patch

import numpy as np
import pytest

from fock_core import Displacement, Gate, GateSequence, Snap
from optimizer import OptimizerConfig, OptimResult
from state_prep import PrepPlan, TargetState


class SnapSynthUnitTestFixtures:
    @pytest.fixture(autouse=True)
    def setup(self):
        self.rng = np.random.default_rng(1234)
        self.config = OptimizerConfig(max_evals=2000, seed=7)
        yield


class CompilerMockFixtures(SnapSynthUnitTestFixtures):
    patcher_compile_state_prep = patch("state_prep.compile_state_prep")
    patcher_compile_fock_sublinear = patch("state_prep.compile_fock_sublinear")

    @pytest.fixture(autouse=True)
    def mocks(self, request):
        self.mock_compile_state_prep = CompilerMockFixtures.patcher_compile_state_prep.start()
        self.mock_compile_fock_sublinear = (
            CompilerMockFixtures.patcher_compile_fock_sublinear.start()
        )
        yield
        request.addfinalizer(self.teardown)

    @staticmethod
    def teardown() -> None:
        patch.stopall()


class CLIUnitTestFixtures(SnapSynthUnitTestFixtures):
    patcher_compile_fock_state = patch("cli.compile_fock_state")
    patcher_compile_unitary = patch("cli.compile_unitary")
    patcher_gate_count_sweep = patch("cli.gate_count_sweep")

    @pytest.fixture(autouse=True)
    def mocks(self, request, tmp_path):
        self.tmp_path = tmp_path
        self.mock_compile_fock_state = CLIUnitTestFixtures.patcher_compile_fock_state.start()
        self.mock_compile_unitary = CLIUnitTestFixtures.patcher_compile_unitary.start()
        self.mock_gate_count_sweep = CLIUnitTestFixtures.patcher_gate_count_sweep.start()
        yield
        request.addfinalizer(self.teardown)

    @staticmethod
    def teardown() -> None:
        patch.stopall()


def example_plan(
    n: int, snap_count: int, fidelity: float = 0.9995, scheme: str = "linear"
) -> PrepPlan:
    """Return a placeholder plan for |n⟩ with the given counts, for mocked compilers."""
    gates: List[Gate] = [Displacement(0.1)]
    for _ in range(snap_count):
        gates += [Snap((np.pi,)), Displacement(0.1)]
    sequence = GateSequence(gates=tuple(gates), cutoff=max(2 * (n + 1), n + 16))
    return PrepPlan(
        sequence=sequence,
        fidelity=fidelity,
        snap_count=sequence.snap_count,
        displacement_count=sequence.displacement_count,
        target=TargetState.fock(n),
        scheme=scheme,
    )


def identity_run(objective, x0, config=None) -> OptimResult:
    """Stand in for an optimizer run that stops at its starting point."""
    x = np.asarray(x0, dtype=float)
    value = float(objective(x))
    return OptimResult(x=x, fval=value, evals=1, converged=False, history=[value])
