# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Compile a unitary on span{|0⟩ … |d−1⟩} into SNAP and displacement gates.

The compiler works on W = U_target⁻¹ embedded in the cutoff space. Column by
column, from the last one down, a SNAP makes the column real and non-negative,
then adjacent-level rotations V̂ₖ(α) = D(α) R̂ₖ(π) D(−2α) R̂ₖ(π) D(α) walk its
weight onto the diagonal. The gates applied to W, in the order they are
applied, build U_construct ≈ U_target.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy.optimize import brentq, minimize_scalar
from scipy.stats import unitary_group

from exceptions import (
    InvalidArgumentError,
    RotationCalibrationError,
    SynthesisError,
    UnitarySynthesisError,
)
from fock_core import (
    DEFAULT_BUFFER,
    Displacement,
    Gate,
    GateSequence,
    Operator,
    Snap,
    cutoff_for_dimension,
    displacement_operator,
    drop_trivial_snaps,
    kerr_phases,
    merge_displacements,
    r_phases,
    sequence_unitary,
    unitary_fidelity,
    validate_cutoff,
)
from optimizer import OptimizerConfig, minimize_refine

logger = logging.getLogger(__name__)

UNITARITY_TOLERANCE = 1e-10
CALIBRATION_POINTS = 41
CALIBRATION_RANGE = 1.0
ROTATION_SKIP_TOLERANCE = 1e-12
ZERO_ENTRY_TOLERANCE = 1e-15
# ⟨1|V̂₀(α)|0⟩ = 4α·exp(−3α²) peaks at 0.990, so quarter-turn columns keep
# residuals of a few 1e-2 until the global round.
DEFLATION_TOLERANCE = 0.1
COLUMN_COST_TOLERANCE = 1e-2
UNITARY_CUTOFF_PER_LEVEL = 32
KERR_PRESET_CHI = 0.1


def unitary_cutoff(dim: int) -> int:
    """Return the default cutoff for a d-level unitary target.

    Full-mode fidelity divides the trace deficit of the realized rotations by
    the cutoff, so unitary targets get 32 levels per target level on top of
    :func:`fock_core.cutoff_for_dimension`.
    """
    return max(cutoff_for_dimension(dim), UNITARY_CUTOFF_PER_LEVEL * dim)


@dataclass(frozen=True, eq=False)
class TargetUnitary:
    """A d×d unitary block embedded as block ⊕ I in a cutoff-``cutoff`` space.

    The cutoff defaults to :func:`unitary_cutoff`.
    """

    block: Operator
    cutoff: Optional[int] = None
    tolerance: float = UNITARITY_TOLERANCE

    def __post_init__(self):
        block = np.array(self.block, dtype=np.complex128)
        if block.ndim != 2 or block.shape[0] != block.shape[1] or block.shape[0] < 1:
            raise InvalidArgumentError(f"Target must be a square matrix, got shape {block.shape}")
        if not np.all(np.isfinite(block)):
            raise InvalidArgumentError("Target entries must be finite")
        dim = block.shape[0]
        deviation = float(np.max(np.abs(block.conj().T @ block - np.eye(dim))))
        if deviation > self.tolerance:
            raise InvalidArgumentError(
                f"Target is not unitary: max |U†U − I| = {deviation:.3e}"
            )
        nc = validate_cutoff(self.cutoff if self.cutoff is not None else unitary_cutoff(dim))
        if dim > nc - DEFAULT_BUFFER:
            raise InvalidArgumentError(
                f"Target of dimension {dim} needs a cutoff of at least {dim + DEFAULT_BUFFER}"
            )
        block.setflags(write=False)
        object.__setattr__(self, "block", block)
        object.__setattr__(self, "cutoff", nc)

    @property
    def dim(self) -> int:
        """Return d."""
        return self.block.shape[0]

    def embedded(self) -> Operator:
        """Return block ⊕ I at the target cutoff."""
        matrix = np.eye(self.cutoff, dtype=np.complex128)
        matrix[: self.dim, : self.dim] = self.block
        return matrix


@dataclass
class SynthReport:
    """Result of :func:`compile_unitary`.

    ``snap_count`` counts the per-column phase SNAPs that were emitted;
    ``total_snap_count`` also counts the R̂ₖ(π) gates inside rotations.
    """

    sequence: GateSequence
    target: TargetUnitary
    f_unitary_full: float
    f_unitary_block: float
    rotation_count: int
    snap_count: int
    total_snap_count: int
    displacement_count: int
    rounds: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0


class ColumnElimination(NamedTuple):
    """Gates emitted for one column, the working matrix after them, and their rotations."""

    gates: List[Gate]
    matrix: Operator
    rotations: List[Tuple[int, float]]
    cost: float


def fourier_unitary(d: int) -> Operator:
    """Return the d-point discrete Fourier matrix ω^{jk}/√d."""
    levels = np.arange(d)
    return np.exp(2j * np.pi * np.outer(levels, levels) / d) / np.sqrt(d)


def permutation_unitary(d: int) -> Operator:
    """Return the cyclic shift |j⟩ → |j+1 mod d⟩."""
    return np.roll(np.eye(d, dtype=np.complex128), 1, axis=0)


def random_unitary(d: int, seed: int = 0) -> Operator:
    """Return a Haar-random d×d unitary drawn with ``seed``."""
    if d == 1:
        return np.exp(2j * np.pi * np.random.default_rng(seed).random()) * np.ones((1, 1))
    return np.asarray(unitary_group.rvs(d, random_state=seed), dtype=np.complex128)


def kerr_unitary(d: int, chi: float = KERR_PRESET_CHI) -> Operator:
    """Return the diagonal Kerr evolution exp(iχn²) on the lowest d levels."""
    return np.diag(np.exp(1j * np.array(kerr_phases(chi, max(d, 2))[:d])))


def ideal_rotation(k: int, theta: float, cutoff: int) -> Operator:
    """Return the identity with block [[cos θ, −sin θ], [sin θ, cos θ]] on levels k, k+1."""
    matrix = np.eye(cutoff, dtype=np.complex128)
    c, s = math.cos(theta), math.sin(theta)
    matrix[k : k + 2, k : k + 2] = [[c, -s], [s, c]]
    return matrix


def rotation_gates(k: int, alpha: float) -> List[Gate]:
    """Return V̂ₖ(α) as gates in application order."""
    flip = Snap(r_phases(k, np.pi))
    return [Displacement(alpha), flip, Displacement(-2 * alpha), flip, Displacement(alpha)]


def rotation_operator(k: int, alpha: float, cutoff: int) -> Operator:
    """Return the matrix of V̂ₖ(α)."""
    outer = displacement_operator(alpha, cutoff)
    inner = displacement_operator(-2 * alpha, cutoff)
    flip = np.ones(cutoff)
    flip[: k + 1] = -1
    return outer @ (flip[:, None] * (inner @ (flip[:, None] * outer)))


def realized_angle(k: int, alpha: float, cutoff: int) -> float:
    """Return the rotation angle V̂ₖ(α) realizes on {|k⟩, |k+1⟩}."""
    block = rotation_operator(k, alpha, cutoff)[k : k + 2, k : k + 2]
    return math.atan2((block[1, 0] - block[0, 1]).real, (block[0, 0] + block[1, 1]).real)


@lru_cache(maxsize=None)
def _calibration_table(k: int, cutoff: int) -> Tuple[npt.NDArray, npt.NDArray]:
    alphas = np.linspace(-CALIBRATION_RANGE, CALIBRATION_RANGE, CALIBRATION_POINTS)
    angles = np.array([realized_angle(k, alpha, cutoff) for alpha in alphas])
    low = high = CALIBRATION_POINTS // 2
    while low > 0 and angles[low - 1] < angles[low]:
        low -= 1
    while high < CALIBRATION_POINTS - 1 and angles[high + 1] > angles[high]:
        high += 1
    logger.debug(
        "Calibrated V_%d at cutoff %d: θ ∈ [%.4f, %.4f]", k, cutoff, angles[low], angles[high]
    )
    return alphas[low : high + 1], angles[low : high + 1]


def calibrate_rotation(
    k: int, theta: float, cutoff: int, config: Optional[OptimizerConfig] = None
) -> float:
    """Return the α for which V̂ₖ(α) best realizes the rotation by ``theta``.

    A 41-point table of θ(α) on α ∈ [−1, 1] seeds a bracketing root search on
    the realized angle, and a bounded scalar search then maximizes the
    full-mode fidelity against the ideal rotation between the table points
    on either side of the root bracket.

    Raises:
        InvalidArgumentError: if ``k`` leaves no room for level k+1.
        RotationCalibrationError: if ``theta`` is outside the calibrated range.
    """
    config = config or OptimizerConfig()
    cutoff = validate_cutoff(cutoff)
    if not 0 <= k < cutoff - 1:
        raise InvalidArgumentError(f"Rotation level {k} needs k < {cutoff - 1}")
    if abs(theta) < ROTATION_SKIP_TOLERANCE:
        return 0.0
    alphas, angles = _calibration_table(k, cutoff)
    if not angles[0] <= theta <= angles[-1]:
        raise RotationCalibrationError(
            f"Angle {theta:.6f} outside the range V_{k} reaches at cutoff {cutoff}",
            bracket=(float(angles[0]), float(angles[-1])),
        )
    upper = int(np.clip(np.searchsorted(angles, theta), 1, angles.size - 1))
    bracket = (float(alphas[upper - 1]), float(alphas[upper]))
    try:
        root = brentq(
            lambda alpha: realized_angle(k, alpha, cutoff) - theta,
            *bracket,
            xtol=config.xtol * 1e-3,
        )
    except (ValueError, RuntimeError) as e:
        raise RotationCalibrationError(
            f"Root search for θ={theta:.6f} on V_{k} failed: {e}", bracket=bracket
        ) from e

    ideal = ideal_rotation(k, theta, cutoff)

    def infidelity(alpha):
        return 1.0 - unitary_fidelity(rotation_operator(k, alpha, cutoff), ideal)

    bounds = (float(alphas[max(upper - 2, 0)]), float(alphas[min(upper + 1, alphas.size - 1)]))
    polished = minimize_scalar(
        infidelity,
        bounds=bounds,
        method="bounded",
        options={"xatol": config.xtol},
    )
    if polished.success and polished.fun < infidelity(root):
        return float(polished.x)
    return float(root)


def column_phase_snap(w: Operator, col: int, block_dim: Optional[int] = None) -> Snap:
    """Return the SNAP that makes column ``col`` real and non-negative on the block.

    Rows below ``block_dim`` (all rows of ``w`` by default) get phase
    −arg w[r, col], zero entries and the rows past the block get phase 0.

    Raises:
        InvalidArgumentError: if ``col`` lies outside the block.
    """
    w = np.asarray(w)
    block_dim = w.shape[0] if block_dim is None else block_dim
    if not 0 <= col < block_dim <= w.shape[0]:
        raise InvalidArgumentError(f"Column {col} outside a block of {block_dim} rows")
    entries = w[:block_dim, col]
    phases = np.where(np.abs(entries) > ZERO_ENTRY_TOLERANCE, -np.angle(entries), 0.0)
    return Snap(tuple(phases))


def off_diagonal_cost(
    m: Operator, active_block_dim: int, limit: Optional[int] = None
) -> float:
    """Return Σ|m[i, j]| over i ≠ j, leaving out pairs inside the top-left block.

    Args:
        m: square matrix.
        active_block_dim: size d′ of the excluded top-left block.
        limit: only rows and columns below ``limit`` enter; the whole matrix by default.
    """
    m = np.asarray(m)
    dim = m.shape[0]
    if not 0 <= active_block_dim <= dim:
        raise InvalidArgumentError(f"Block dimension {active_block_dim} outside 0..{dim}")
    limit = dim if limit is None else min(dim, limit)
    magnitudes = np.abs(m[:limit, :limit])
    np.fill_diagonal(magnitudes, 0.0)
    magnitudes[:active_block_dim, :active_block_dim] = 0.0
    return float(np.sum(magnitudes))


def _rotate(w: Operator, rotations: Sequence[Tuple[int, float]]) -> Operator:
    for level, alpha in rotations:
        w = rotation_operator(level, alpha, w.shape[0]) @ w
    return w


def eliminate_column(
    w: Operator, col: int, cutoff: int, config: Optional[OptimizerConfig] = None
) -> ColumnElimination:
    """Rotate the weight of column ``col`` onto the diagonal.

    Entries 0 … col−1 are cleared from the top: entry r is rotated into r+1
    with the angle given by the exact 2×2 arithmetic on the current entries,
    and each rotation is realized as a calibrated V̂ᵣ. A second round refines
    the col displacement parameters together against :func:`off_diagonal_cost`.

    Args:
        w: working matrix whose column ``col`` is already real and non-negative.
        col: column being eliminated.
        cutoff: cutoff dimension of ``w``.
        config: optimizer settings.

    Returns:
        ColumnElimination: gates in application order, the reduced matrix, the
        (level, α) rotations and the column cost after the second round.
    """
    config = config or OptimizerConfig()
    before = np.array(w, dtype=np.complex128)
    w = before
    limit = cutoff - DEFAULT_BUFFER
    rotations: List[Tuple[int, float]] = []
    for r in range(col):
        theta = math.atan2(w[r, col].real, w[r + 1, col].real)
        if abs(theta) < ROTATION_SKIP_TOLERANCE:
            continue
        alpha = calibrate_rotation(r, theta, cutoff, config)
        rotations.append((r, alpha))
        w = rotation_operator(r, alpha, cutoff) @ w
        logger.debug("Column %d, rotation %d: θ=%.6f, α=%.6f", col, r, theta, alpha)

    cost = off_diagonal_cost(w, col, limit)
    if rotations:
        levels = [level for level, _ in rotations]

        def column_cost(alphas):
            return off_diagonal_cost(_rotate(before, list(zip(levels, alphas))), col, limit)

        refined = minimize_refine(column_cost, [alpha for _, alpha in rotations], config)
        if refined.fval < cost:
            rotations = list(zip(levels, (float(a) for a in refined.x)))
            w = _rotate(before, rotations)
            logger.debug("Column %d cost %.3e → %.3e", col, cost, refined.fval)
            cost = refined.fval

    gates: List[Gate] = []
    for level, alpha in rotations:
        gates += rotation_gates(level, alpha)
    return ColumnElimination(gates=gates, matrix=w, rotations=rotations, cost=cost)


Program = List[Union[Snap, int]]


def _program_gates(program: Program, levels: Sequence[int], alphas: Sequence[float]):
    gates: List[Gate] = []
    for item in program:
        if isinstance(item, Snap):
            gates.append(item)
        else:
            gates += rotation_gates(levels[item], alphas[item])
    return drop_trivial_snaps(merge_displacements(gates))


def _program_unitary(program: Program, levels, alphas, cutoff: int) -> Operator:
    unitary = np.eye(cutoff, dtype=np.complex128)
    for item in program:
        if isinstance(item, Snap):
            unitary = item.diagonal(cutoff)[:, None] * unitary
        else:
            unitary = rotation_operator(levels[item], alphas[item], cutoff) @ unitary
    return unitary


def _report(
    target: TargetUnitary,
    program: Program,
    levels: Sequence[int],
    alphas: Sequence[float],
    rounds: Dict[str, Any],
    config: OptimizerConfig,
) -> SynthReport:
    seq = GateSequence(gates=tuple(_program_gates(program, levels, alphas)), cutoff=target.cutoff)
    realized = sequence_unitary(seq)
    ideal = target.embedded()
    column_snaps = sum(isinstance(item, Snap) and not item.is_trivial() for item in program)
    return SynthReport(
        sequence=seq,
        target=target,
        f_unitary_full=unitary_fidelity(realized, ideal),
        f_unitary_block=unitary_fidelity(realized, ideal, block_dim=target.dim),
        rotation_count=len(levels),
        snap_count=column_snaps,
        total_snap_count=seq.snap_count,
        displacement_count=seq.displacement_count,
        rounds=rounds,
        seed=config.seed,
    )


def compile_unitary(
    target: TargetUnitary,
    config: Optional[OptimizerConfig] = None,
    refine_globally: bool = True,
    deflation_tolerance: float = DEFLATION_TOLERANCE,
) -> SynthReport:
    """Compile ``target`` into SNAP and displacement gates.

    Columns d−1 … 0 each get a phase SNAP over the still active rows 0 … col
    and, from column 1 upwards, the rotations of :func:`eliminate_column`.
    Adjacent displacements are merged and zero-phase SNAPs dropped. With
    ``refine_globally`` every rotation parameter is then refined jointly
    against the full-mode fidelity; the refinement is kept only if it
    improves it.

    Args:
        target: block and cutoff to compile.
        config: optimizer settings.
        refine_globally: run the joint refinement after the column rounds.
        deflation_tolerance: largest deviation of a processed column from the
            unit vector before the global round.

    Raises:
        UnitarySynthesisError: if a stage fails or a column stays above
            ``deflation_tolerance``; ``best`` holds the partial report.
    """
    config = config or OptimizerConfig()
    nc = target.cutoff
    w = target.embedded().conj().T
    program: Program = []
    levels: List[int] = []
    alphas: List[float] = []
    columns = []
    rounds: Dict[str, Any] = {"columns": columns}
    try:
        for col in range(target.dim - 1, -1, -1):
            snap = column_phase_snap(w, col, block_dim=col + 1)
            program.append(snap)
            w = snap.diagonal(nc)[:, None] * w
            if col == 0:
                continue
            elimination = eliminate_column(w, col, nc, config)
            w = elimination.matrix
            for level, alpha in elimination.rotations:
                program.append(len(levels))
                levels.append(level)
                alphas.append(alpha)
            residual = max(
                float(np.max(np.abs(w[:col, col]), initial=0.0)), abs(abs(w[col, col]) - 1.0)
            )
            columns.append(
                {
                    "column": col,
                    "rotations": len(elimination.rotations),
                    "cost": elimination.cost,
                    "residual": residual,
                }
            )
            if residual > deflation_tolerance:
                raise SynthesisError(
                    f"Column {col} left residual {residual:.3e} above {deflation_tolerance:.1e}"
                )
            if elimination.cost > COLUMN_COST_TOLERANCE * target.dim:
                logger.warning("Column %d cost %.2e", col, elimination.cost)
    except (SynthesisError, InvalidArgumentError, ArithmeticError) as e:
        partial = _report(target, program, levels, alphas, rounds, config)
        raise UnitarySynthesisError(f"Unitary synthesis failed: {e}", best=partial) from e

    ideal = target.embedded()

    def infidelity(params):
        return 1.0 - unitary_fidelity(_program_unitary(program, levels, params, nc), ideal)

    column_fidelity = 1.0 - infidelity(alphas)
    rounds["fidelity_after_columns"] = column_fidelity
    logger.info("Column rounds for d=%d: F=%.8f", target.dim, column_fidelity)
    if refine_globally and alphas:
        refined = minimize_refine(infidelity, alphas, config)
        rounds["global_evals"] = refined.evals
        if refined.fval < 1.0 - column_fidelity:
            alphas = [float(a) for a in refined.x]
        rounds["fidelity_after_global"] = 1.0 - min(refined.fval, 1.0 - column_fidelity)
        logger.info("Global round: F=%.10f", rounds["fidelity_after_global"])
    return _report(target, program, levels, alphas, rounds, config)


def ideal_construct_unitary(block: Operator) -> Operator:
    """Return U_construct built with exact 2×2 rotations in place of every V̂ₖ.

    Only the decomposition logic enters, so U_construct·U⁻¹ equals the
    identity to round-off.
    """
    block = np.asarray(block, dtype=np.complex128)
    dim = block.shape[0]
    w = block.conj().T
    construct = np.eye(dim, dtype=np.complex128)
    for col in range(dim - 1, -1, -1):
        phases = column_phase_snap(w, col, block_dim=col + 1).diagonal(dim)
        w = phases[:, None] * w
        construct = phases[:, None] * construct
        for r in range(col):
            rotation = ideal_rotation(r, math.atan2(w[r, col].real, w[r + 1, col].real), dim)
            w = rotation @ w
            construct = rotation @ construct
    return construct
