# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Errors raised by the gate-synthesis library."""

from typing import Any, List, Optional


class InvalidArgumentError(ValueError):
    """Raised when an operation receives an argument outside its domain."""


class OptimizationError(RuntimeError):
    """Raised when every start of a multi-start optimization failed."""

    def __init__(self, message: str, diagnostics: Optional[List[str]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class SynthesisError(RuntimeError):
    """Raised when a compiler cannot reach its quality floor.

    The best result found so far is kept in ``best`` so that callers can still
    report or emit it.
    """

    def __init__(self, message: str, best: Any = None):
        super().__init__(message)
        self.best = best


class StepOptimizationError(SynthesisError):
    """Raised when an SO(2) step stays below its fidelity floor."""


class FoldingBudgetError(SynthesisError):
    """Raised when the sublinear Fock scheme exhausts its block budget."""


class RotationCalibrationError(SynthesisError):
    """Raised when a rotation angle cannot be realized by the calibrated gate."""

    def __init__(self, message: str, bracket: tuple[float, float], best: Any = None):
        super().__init__(message, best=best)
        self.bracket = bracket


class UnitarySynthesisError(SynthesisError):
    """Raised when a stage of unitary synthesis fails; ``best`` holds the partial report."""
