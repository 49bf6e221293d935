# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""JSON wire formats for gate sequences, target matrices, sweep specs and reports.

Canonical gate-sequence document (gates in application order, index 0 first)::

    {
        "cutoff": 30,
        "gates": [
            {"type": "displacement", "alpha": [0.5, 0.0]},
            {"type": "snap", "phases": [0.0, 3.141592653589793]}
        ]
    }

Target matrix document (row-major, entries as [re, im])::

    {"dim": 2, "matrix": [[[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]}

Sweep specification document::

    {"n_values": [4, 8, 16], "fidelities": [0.999]}
"""

import dataclasses
import json
import logging
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from exceptions import InvalidArgumentError
from fock_core import Displacement, Gate, GateSequence, Snap
from state_prep import LadderStep, PrepPlan, SweepRow, TargetState
from unitary_synth import SynthReport

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = (
    "n",
    "scheme",
    "target_fidelity",
    "snap_count",
    "displacement_count",
    "achieved_fidelity",
    "cutoff",
)


class _WireModel(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class DisplacementModel(_WireModel):
    """Displacement gate entry."""

    type: Literal["displacement"]
    alpha: Tuple[float, float] = Field(
        description="Real and imaginary part of the displacement amplitude",
        examples=[[0.5, 0.0]],
    )


class SnapModel(_WireModel):
    """SNAP gate entry."""

    type: Literal["snap"]
    phases: List[float] = Field(
        description="Phase in radians for levels 0, 1, …; missing levels get phase 0",
        examples=[[0.0, 3.141592653589793]],
    )


GateModel = Annotated[Union[DisplacementModel, SnapModel], Field(discriminator="type")]


class GateSequenceModel(_WireModel):
    """Canonical gate sequence."""

    cutoff: int = Field(ge=2, description="Cutoff dimension used at synthesis", examples=[30])
    gates: List[GateModel] = Field(description="Gates in application order")


class MatrixModel(_WireModel):
    """Square complex matrix, row-major, entries as [re, im] pairs."""

    dim: int = Field(ge=1, description="Matrix dimension d", examples=[2])
    matrix: List[List[Tuple[float, float]]] = Field(
        description="d rows of d [re, im] pairs",
        examples=[[[[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]],
    )

    @model_validator(mode="after")
    def check_shape(self):
        """Check that the matrix has ``dim`` rows of ``dim`` entries."""
        if len(self.matrix) != self.dim or any(len(row) != self.dim for row in self.matrix):
            raise ValueError(f"matrix must be {self.dim}×{self.dim}")
        return self


class SweepSpecModel(_WireModel):
    """Levels and target fidelities of a gate-count sweep."""

    n_values: List[Annotated[int, Field(ge=0)]] = Field(
        min_length=1, description="Fock levels to prepare", examples=[[4, 8, 16]]
    )
    fidelities: List[Annotated[float, Field(gt=0.9, lt=1.0)]] = Field(
        min_length=1, description="Target fidelities", examples=[[0.999]]
    )


class StateSpecModel(_WireModel):
    """Target coefficients, each a real number or a [re, im] pair."""

    coefficients: List[Union[float, Tuple[float, float]]] = Field(
        min_length=1, examples=[[0.6, 0.8], [[0.0, 0.70710678], [0.70710678, 0.0]]]
    )


def _validate(model, data: Any, what: str):
    try:
        return model.model_validate(data)
    except ValidationError as e:
        logger.error("Invalid %s: %s", what, e)
        raise InvalidArgumentError(f"Invalid {what}: {e}") from e


def _pair(value: complex) -> List[float]:
    return [float(value.real), float(value.imag)]


def gate_to_dict(gate: Gate) -> Dict[str, Any]:
    """Return the wire form of a single gate."""
    if isinstance(gate, Snap):
        return {"type": "snap", "phases": list(gate.phases)}
    return {"type": "displacement", "alpha": _pair(gate.alpha)}


def sequence_to_dict(seq: GateSequence) -> Dict[str, Any]:
    """Return the canonical wire form of ``seq``."""
    return {"cutoff": seq.cutoff, "gates": [gate_to_dict(gate) for gate in seq.gates]}


def sequence_from_dict(data: Any) -> GateSequence:
    """Parse a canonical gate-sequence document.

    Raises:
        InvalidArgumentError: if the document does not match the schema.
    """
    model = _validate(GateSequenceModel, data, "gate sequence")
    gates: List[Gate] = []
    for entry in model.gates:
        if isinstance(entry, SnapModel):
            gates.append(Snap(tuple(entry.phases)))
        else:
            gates.append(Displacement(complex(*entry.alpha)))
    return GateSequence(gates=tuple(gates), cutoff=model.cutoff)


def document_sequence(data: Any) -> GateSequence:
    """Return the gate sequence of a sequence, plan or report document."""
    if isinstance(data, dict) and "sequence" in data and "gates" not in data:
        return sequence_from_dict(data["sequence"])
    return sequence_from_dict(data)


def matrix_to_dict(matrix: np.ndarray) -> Dict[str, Any]:
    """Return the wire form of a square complex matrix."""
    matrix = np.asarray(matrix)
    return {
        "dim": int(matrix.shape[0]),
        "matrix": [[_pair(entry) for entry in row] for row in matrix],
    }


def matrix_from_dict(data: Any) -> np.ndarray:
    """Parse a target matrix document.

    Raises:
        InvalidArgumentError: if the document does not match the schema.
    """
    model = _validate(MatrixModel, data, "matrix")
    pairs = np.array(model.matrix, dtype=float).reshape(model.dim, model.dim, 2)
    return pairs[..., 0] + 1j * pairs[..., 1]


def coefficients_from_list(data: Any) -> np.ndarray:
    """Parse a coefficient list of real numbers or [re, im] pairs.

    Raises:
        InvalidArgumentError: if the list does not match the schema.
    """
    model = _validate(StateSpecModel, {"coefficients": data}, "state coefficients")
    return np.array(
        [complex(*c) if isinstance(c, tuple) else complex(c) for c in model.coefficients]
    )


def coefficients_to_list(coeffs: np.ndarray) -> List[List[float]]:
    """Return coefficients as [re, im] pairs."""
    return [_pair(c) for c in np.asarray(coeffs)]


def sweep_spec_from_dict(data: Any) -> SweepSpecModel:
    """Parse a sweep specification document.

    Raises:
        InvalidArgumentError: if the document does not match the schema.
    """
    return _validate(SweepSpecModel, data, "sweep specification")


def _stage_to_dict(stage) -> Dict[str, Any]:
    kind = "so2_step" if isinstance(stage, LadderStep) else "fold_block"
    return {"kind": kind, **dataclasses.asdict(stage)}


def plan_to_dict(plan: PrepPlan, seed: int) -> Dict[str, Any]:
    """Return the report document of a state-preparation plan."""
    return {
        "kind": "prep_plan",
        "scheme": plan.scheme,
        "seed": seed,
        "fidelity": plan.fidelity,
        "snap_count": plan.snap_count,
        "displacement_count": plan.displacement_count,
        "cutoff_converged": plan.cutoff_converged,
        "target": coefficients_to_list(plan.target.coeffs),
        "stages": [_stage_to_dict(stage) for stage in plan.stages],
        "trace": plan.trace,
        "sequence": sequence_to_dict(plan.sequence),
    }


def report_to_dict(report: SynthReport) -> Dict[str, Any]:
    """Return the report document of a unitary synthesis."""
    return {
        "kind": "synth_report",
        "seed": report.seed,
        "f_unitary_full": report.f_unitary_full,
        "f_unitary_block": report.f_unitary_block,
        "rotation_count": report.rotation_count,
        "snap_count": report.snap_count,
        "total_snap_count": report.total_snap_count,
        "displacement_count": report.displacement_count,
        "rounds": report.rounds,
        "target": matrix_to_dict(report.target.block),
        "sequence": sequence_to_dict(report.sequence),
    }


def document_target(data: Any) -> Optional[Union[TargetState, np.ndarray]]:
    """Return the target embedded in a plan or report document, if any."""
    if not isinstance(data, dict) or "target" not in data:
        return None
    if data.get("kind") == "synth_report":
        return matrix_from_dict(data["target"])
    return TargetState(coefficients_from_list(data["target"]))


def sweep_row_to_dict(row: SweepRow) -> Dict[str, Any]:
    """Return a sweep row keyed by CSV column; missing values are empty strings."""
    values = {
        "n": row.n,
        "scheme": row.scheme,
        "target_fidelity": row.target_fidelity,
        "snap_count": row.snap_count,
        "displacement_count": row.displacement_count,
        "achieved_fidelity": row.achieved_fidelity,
        "cutoff": row.cutoff,
    }
    return {key: "" if value is None else value for key, value in values.items()}


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def dumps(document: Any) -> str:
    """Serialize a document; floats keep their shortest round-trip representation."""
    return json.dumps(document, allow_nan=False, indent=2, default=_plain) + "\n"
