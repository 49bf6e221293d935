# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Compile oscillator state preparations into displacement and SNAP sequences.

Two schemes are offered. The linear scheme walks the amplitude of a target up
the number ladder one SO(2) step at a time, each step being
``[D(α₁), R̂ₙ(π), D(α₂), R̂ₙ(π), D(α₃)]`` in application order, merges the
boundary displacements and refines every displacement jointly. The sublinear
scheme starts from the coherent state D(√n)|0⟩ and folds it onto |n⟩ with
O(√n) SNAP and displacement blocks.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from exceptions import (
    FoldingBudgetError,
    InvalidArgumentError,
    StepOptimizationError,
    SynthesisError,
)
from fock_core import (
    DEFAULT_BUFFER,
    Displacement,
    Gate,
    GateSequence,
    Snap,
    TruncatedState,
    apply_sequence,
    basis_state,
    cutoff_for_dimension,
    displace_vector,
    r_phases,
    state_fidelity,
    state_from_coefficients,
    validate_cutoff,
)
from optimizer import (
    OptimizerConfig,
    minimize_local,
    minimize_refine,
    multi_start,
    uniform_seeds,
)

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-12
TRIM_TOLERANCE = 1e-14
SO2_FIDELITY_FLOOR = 0.999
CUTOFF_CHECK_MARGIN = 5
CUTOFF_CHECK_TOLERANCE = 1e-6
FOLD_BETA0 = 0.5
FOLD_PHASE_SPREAD = 0.1
FOLD_EVALS_PER_PARAMETER = 600
FOLD_SNAPS_PER_SPREAD = 4
FOLD_BUDGET_FACTOR = 2

# Reference transfer |n⟩ → |n+1⟩: level, (α₁, α₂, α₃), infidelity 1−F.
REFERENCE_STEPS: Dict[int, Tuple[Tuple[float, float, float], float]] = {
    0: ((-0.575, 0.682, -0.371), 8.3e-4),
    1: ((-0.313, 0.539, -0.316), 6.4e-4),
    2: ((-0.256, 0.441, -0.258), 5.2e-4),
    3: ((-0.222, 0.382, -0.223), 4.9e-4),
    4: ((-0.198, 0.341, -0.200), 4.7e-4),
    5: ((-0.181, 0.312, -0.182), 4.6e-4),
}

# Reference preparation |0⟩ → uniform superposition over N+1 levels: N, infidelity 1−F.
REFERENCE_UNIFORM_INFIDELITIES: Dict[int, float] = {
    1: 2.7e-5,
    2: 1.8e-5,
    3: 1.1e-5,
    4: 7.2e-6,
    5: 5.2e-6,
    6: 4.0e-6,
}


@dataclass(frozen=True, eq=False)
class TargetState:
    """Normalized target |ψ⟩ = Σₙ cₙ|n⟩ over levels 0 … N."""

    coeffs: npt.NDArray[np.complex128]

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.complex128).reshape(-1)
        if coeffs.size == 0:
            raise InvalidArgumentError("Target needs at least one coefficient")
        if not np.all(np.isfinite(coeffs)):
            raise InvalidArgumentError("Target coefficients must be finite")
        norm = float(np.linalg.norm(coeffs))
        if abs(norm - 1.0) > NORMALIZATION_TOLERANCE:
            raise InvalidArgumentError(f"Target is not normalized: norm {norm!r}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def fock(cls, n: int) -> "TargetState":
        """Return the number state |n⟩."""
        if n < 0:
            raise InvalidArgumentError(f"Fock level must be non-negative, got {n}")
        coeffs = np.zeros(n + 1, dtype=np.complex128)
        coeffs[n] = 1.0
        return cls(coeffs)

    @classmethod
    def uniform(cls, n: int) -> "TargetState":
        """Return the equal superposition of |0⟩ … |n⟩."""
        if n < 0:
            raise InvalidArgumentError(f"Superposition size must be non-negative, got {n}")
        return cls(np.full(n + 1, 1 / np.sqrt(n + 1), dtype=np.complex128))

    @property
    def top_level(self) -> int:
        """Return N, the highest level with a stored coefficient."""
        return self.coeffs.size - 1

    def trimmed(self) -> "TargetState":
        """Return the target without trailing zero coefficients."""
        nonzero = np.flatnonzero(np.abs(self.coeffs) >= TRIM_TOLERANCE)
        last = int(nonzero[-1]) if nonzero.size else 0
        coeffs = self.coeffs[: last + 1]
        return TargetState(coeffs / np.linalg.norm(coeffs))

    def as_state(self, nc: int) -> TruncatedState:
        """Return the target padded to cutoff ``nc``."""
        return state_from_coefficients(self.coeffs, nc)


@dataclass(frozen=True)
class LadderStep:
    """One SO(2) step of the linear scheme.

    ``alphas`` are in application order, α₁ acting first.
    """

    n: int
    theta: float
    alphas: Tuple[float, float, float]
    fidelity: float


@dataclass(frozen=True)
class FoldBlock:
    """One folding block: SNAP phases on the band, then the displacement β."""

    phases: Tuple[float, ...]
    beta: float


@dataclass
class PrepPlan:
    """Result of a state-preparation compile.

    ``fidelity`` is re-simulated from ``sequence`` acting on |0⟩.
    """

    sequence: GateSequence
    fidelity: float
    snap_count: int
    displacement_count: int
    target: TargetState
    scheme: str = "linear"
    stages: List[Union[LadderStep, FoldBlock]] = field(default_factory=list)
    trace: Dict[str, Any] = field(default_factory=dict)
    cutoff_converged: bool = True


@dataclass(frozen=True)
class SweepRow:
    """One cell of the gate-count sweep; ``None`` counts mark a failed compile."""

    n: int
    scheme: str
    target_fidelity: float
    cutoff: int
    snap_count: Optional[int] = None
    displacement_count: Optional[int] = None
    achieved_fidelity: Optional[float] = None
    error: Optional[str] = None

    @property
    def missing(self) -> bool:
        """Return whether the cell failed to compile."""
        return self.snap_count is None


def phase_unroll(target: TargetState) -> Tuple[Snap, TargetState]:
    """Split a target into its phases and its magnitudes.

    Returns:
        The SNAP S̃ with phases angle(cₙ) (0 where cₙ = 0) and the target with
        c̃ₙ = |cₙ|, such that S̃|ψ̃⟩ = |ψ⟩.
    """
    magnitudes = np.abs(target.coeffs)
    phases = np.where(magnitudes > 0, np.angle(target.coeffs), 0.0)
    return Snap(tuple(phases)), TargetState(magnitudes.astype(np.complex128))


def ladder_amplitudes(
    target: TargetState,
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Return the residual amplitudes d̃ₙ and the step angles θₙ of a real target.

    Args:
        target: target with real non-negative coefficients.

    Returns:
        ``(d, theta)`` where d̃ₙ = sqrt(Σ_{n'≥n} c̃²_{n'}) for n = 0 … N and
        θₙ = arcsin(d̃_{n+1}/d̃ₙ) for n = 0 … N−1, with θₙ = 0 when d̃ₙ = 0.

    Raises:
        InvalidArgumentError: if a coefficient is negative or complex.
    """
    coeffs = target.coeffs
    if np.any(np.abs(coeffs.imag) > 0) or np.any(coeffs.real < 0):
        raise InvalidArgumentError("Ladder amplitudes need real non-negative coefficients")
    weights = coeffs.real**2
    residual = np.sqrt(np.cumsum(weights[::-1])[::-1])
    residual = residual / residual[0]
    residual[0] = 1.0
    ratio = np.divide(
        residual[1:], residual[:-1], out=np.zeros(residual.size - 1), where=residual[:-1] > 0
    )
    theta = np.arcsin(np.clip(ratio, 0.0, 1.0))
    return residual, theta


def ideal_ladder_state(thetas: Sequence[float], nc: int) -> npt.NDArray[np.float64]:
    """Return the amplitudes reached from |0⟩ by exact rotations θₙ on {|n⟩, |n+1⟩}."""
    amps = np.zeros(validate_cutoff(nc))
    amps[0] = 1.0
    for n, theta in enumerate(thetas):
        amps[n], amps[n + 1] = (
            math.cos(theta) * amps[n] - math.sin(theta) * amps[n + 1],
            math.sin(theta) * amps[n] + math.cos(theta) * amps[n + 1],
        )
    return amps


def so2_step_gates(n: int, alphas: Sequence[float]) -> List[Gate]:
    """Return ``[D(α₁), R̂ₙ(π), D(α₂), R̂ₙ(π), D(α₃)]``."""
    flip = Snap(r_phases(n, np.pi))
    a1, a2, a3 = alphas
    return [Displacement(a1), flip, Displacement(a2), flip, Displacement(a3)]


def _apply_so2(
    n: int, alphas: Sequence[float], amps: npt.NDArray[np.complex128]
) -> npt.NDArray[np.complex128]:
    a1, a2, a3 = alphas
    amps = displace_vector(a1, amps)
    amps[: n + 1] *= -1
    amps = displace_vector(a2, amps)
    amps[: n + 1] *= -1
    return displace_vector(a3, amps)


def so2_transfer_fidelity(
    n: int,
    alphas: Sequence[float],
    convention: str = "first",
    cutoff: Optional[int] = None,
) -> float:
    """Return |⟨n+1|Û|n⟩| for the three-displacement step with the given α.

    Args:
        n: level the transfer starts from.
        alphas: (α₁, α₂, α₃).
        convention: ``"first"`` applies α₁ first, ``"last"`` applies it last.
        cutoff: cutoff dimension; defaults to 2(n+2)+15.
    """
    if convention not in ("first", "last"):
        raise InvalidArgumentError(f"Unknown order convention {convention!r}")
    nc = validate_cutoff(cutoff if cutoff is not None else 2 * (n + 2) + 15)
    alphas = tuple(alphas) if convention == "first" else tuple(reversed(alphas))
    seq = GateSequence(gates=tuple(so2_step_gates(n, alphas)), cutoff=nc)
    final = apply_sequence(seq, basis_state(n, nc))
    return state_fidelity(final, basis_state(n + 1, nc))


def _so2_seeds(n: int, theta: float) -> List[npt.NDArray[np.float64]]:
    base = np.array([-0.5, 0.6, -0.3]) / math.sqrt(n + 1)
    scaled = base * (2 * theta / np.pi)
    half = theta / (4 * math.sqrt(n + 1))
    symmetric = np.array([-half, 2 * half, -half])
    return [scaled, -scaled, symmetric, -symmetric, base]


def optimize_so2_step(
    n: int,
    theta: float,
    cutoff: Optional[int] = None,
    config: Optional[OptimizerConfig] = None,
) -> LadderStep:
    """Optimize (α₁, α₂, α₃) so the step maps |n⟩ to cos θ|n⟩ + sin θ|n+1⟩.

    Five neutral seeds are tried first; if the best stays below the fidelity
    floor, five random seeds follow.

    Raises:
        InvalidArgumentError: if ``n`` or ``theta`` is out of range.
        StepOptimizationError: if the floor is not reached; ``best`` holds the step.
    """
    config = config or OptimizerConfig()
    nc = validate_cutoff(cutoff if cutoff is not None else cutoff_for_dimension(n + 2))
    if not 0 <= n < nc - 1:
        raise InvalidArgumentError(f"Step level {n} needs n < {nc - 1}")
    if not -TRIM_TOLERANCE <= theta <= np.pi / 2 + TRIM_TOLERANCE:
        raise InvalidArgumentError(f"Step angle {theta} outside [0, π/2]")
    if theta <= 0:
        return LadderStep(n=n, theta=0.0, alphas=(0.0, 0.0, 0.0), fidelity=1.0)

    initial = basis_state(n, nc).amps
    goal = np.zeros(nc, dtype=np.complex128)
    goal[n], goal[n + 1] = math.cos(theta), math.sin(theta)

    def infidelity(alphas):
        return 1.0 - abs(np.vdot(goal, _apply_so2(n, alphas, initial.copy())))

    result = multi_start(infidelity, _so2_seeds(n, theta), config)
    if 1.0 - result.fval < SO2_FIDELITY_FLOOR:
        logger.info(
            "Step %d: neutral seeds reached F=%.6f, trying random seeds", n, 1 - result.fval
        )
        scale = 1.0 / math.sqrt(n + 1)
        fallback = multi_start(infidelity, uniform_seeds(3, 5, config, -scale, scale), config)
        if fallback.fval < result.fval:
            result = fallback

    step = LadderStep(
        n=n,
        theta=float(theta),
        alphas=tuple(float(a) for a in result.x),
        fidelity=1.0 - result.fval,
    )
    if step.fidelity < SO2_FIDELITY_FLOOR:
        raise StepOptimizationError(
            f"SO(2) step at level {n} reached F={step.fidelity:.6f} < {SO2_FIDELITY_FLOOR}",
            best=step,
        )
    logger.debug("Step %d, θ=%.4f: F=%.8f at %s", n, theta, step.fidelity, step.alphas)
    return step


def _ladder_gates(params: npt.NDArray[np.float64], levels: int) -> List[Gate]:
    gates: List[Gate] = []
    for n in range(levels):
        flip = Snap(r_phases(n, np.pi))
        gates += [Displacement(params[2 * n]), flip, Displacement(params[2 * n + 1]), flip]
    gates.append(Displacement(params[2 * levels]))
    return [gate for gate in gates if not (isinstance(gate, Displacement) and gate.alpha == 0)]


def _ladder_state(params: npt.NDArray[np.float64], levels: int, nc: int):
    amps = np.zeros(nc, dtype=np.complex128)
    amps[0] = 1.0
    for n in range(levels):
        amps = displace_vector(params[2 * n], amps)
        amps[: n + 1] *= -1
        amps = displace_vector(params[2 * n + 1], amps)
        amps[: n + 1] *= -1
    return displace_vector(params[2 * levels], amps)


def _merge_steps(steps: Sequence[LadderStep]) -> npt.NDArray[np.float64]:
    params = np.zeros(2 * len(steps) + 1)
    for n, step in enumerate(steps):
        a1, a2, a3 = step.alphas
        params[2 * n] += a1
        params[2 * n + 1] = a2
        params[2 * n + 2] += a3
    return params


def _intermediate_target(magnitudes, residual, n: int, nc: int) -> npt.NDArray[np.complex128]:
    amps = np.zeros(nc, dtype=np.complex128)
    amps[:n] = magnitudes[:n]
    amps[n] = residual[n]
    return amps


def _finish_plan(
    gates: List[Gate], target: TargetState, nc: int, **fields: Any
) -> PrepPlan:
    seq = GateSequence(gates=tuple(gates), cutoff=nc)
    fidelity = state_fidelity(apply_sequence(seq, basis_state(0, nc)), target.as_state(nc))
    check_nc = nc + CUTOFF_CHECK_MARGIN
    check = state_fidelity(
        apply_sequence(seq.with_cutoff(check_nc), basis_state(0, check_nc)),
        target.as_state(check_nc),
    )
    converged = abs(check - fidelity) < CUTOFF_CHECK_TOLERANCE
    if not converged:
        logger.warning(
            "Fidelity moved by %.2e between cutoff %d and %d", abs(check - fidelity), nc, check_nc
        )
    return PrepPlan(
        sequence=seq,
        fidelity=fidelity,
        snap_count=seq.snap_count,
        displacement_count=seq.displacement_count,
        target=target,
        cutoff_converged=converged,
        **fields,
    )


def _check_cutoff(dim: int, cutoff: Optional[int]) -> int:
    nc = validate_cutoff(cutoff if cutoff is not None else cutoff_for_dimension(dim))
    if dim > nc - DEFAULT_BUFFER:
        raise InvalidArgumentError(
            f"Target spans {dim} levels; cutoff {nc} leaves fewer than {DEFAULT_BUFFER} spare"
        )
    return nc


def compile_state_prep(
    target: TargetState,
    cutoff: Optional[int] = None,
    config: Optional[OptimizerConfig] = None,
) -> PrepPlan:
    """Compile ``target`` with the linear amplitude-unrolling scheme.

    Stage 1 optimizes every SO(2) step against the state actually reached by
    the previous steps. Stage 2 merges each step's last displacement with the
    next step's first one, leaving 2N+1 displacements around 2N R̂(π) gates.
    Stage 3 refines all 2N+1 displacements jointly and is kept only if it
    improves on stage 1. The phase SNAP from :func:`phase_unroll` comes last.

    Raises:
        InvalidArgumentError: if the cutoff leaves no buffer above the target.
        StepOptimizationError: if an SO(2) step cannot be optimized.
    """
    config = config or OptimizerConfig()
    target = target.trimmed()
    levels = target.top_level
    nc = _check_cutoff(levels + 1, cutoff)
    phase_snap, magnitude_target = phase_unroll(target)
    magnitudes = magnitude_target.coeffs.real
    residual, thetas = ladder_amplitudes(magnitude_target)
    tail = [] if phase_snap.is_trivial() else [phase_snap]
    if levels == 0:
        return _finish_plan(tail, target, nc, trace={"stage1_fidelity": 1.0})

    amps = basis_state(0, nc).amps.copy()
    steps: List[LadderStep] = []
    for n, theta in enumerate(thetas):
        isolated = optimize_so2_step(n, float(theta), nc, config)
        goal = _intermediate_target(magnitudes, residual, n + 1, nc)

        def chained(alphas, n=n, start=amps, goal=goal):
            return 1.0 - abs(np.vdot(goal, _apply_so2(n, alphas, start.copy())))

        polished = minimize_local(chained, isolated.alphas, config)
        amps = _apply_so2(n, polished.x, amps.copy())
        steps.append(
            LadderStep(
                n=n,
                theta=float(theta),
                alphas=tuple(float(a) for a in polished.x),
                fidelity=1.0 - polished.fval,
            )
        )

    goal = magnitude_target.as_state(nc).amps

    def infidelity(params):
        return 1.0 - abs(np.vdot(goal, _ladder_state(params, levels, nc)))

    merged = _merge_steps(steps)
    stage1 = 1.0 - infidelity(merged)
    logger.info("Stage 1 chained fidelity for N=%d: %.10f", levels, stage1)
    refined = minimize_refine(infidelity, merged, config)
    params = refined.x if refined.fval < 1.0 - stage1 else merged
    logger.info(
        "Stage 3 refinement over %d displacements: F=%.10f after %d evaluations",
        params.size,
        1.0 - refined.fval,
        refined.evals,
    )
    return _finish_plan(
        _ladder_gates(params, levels) + tail,
        target,
        nc,
        scheme="linear",
        stages=list(steps),
        trace={
            "stage1_fidelity": stage1,
            "stage3_fidelity": 1.0 - refined.fval,
            "stage3_evals": refined.evals,
            "stage3_converged": refined.converged,
        },
    )


def sublinear_cutoff(n: int) -> int:
    """Return the smallest cutoff the folding scheme accepts for |n⟩."""
    return math.ceil(n + 3 * math.sqrt(n) + 15)


def minimum_fold_blocks(n: int) -> int:
    """Return the fewest folding blocks tried for |n⟩, 4·ceil(√n).

    A fold round of the SO(2) gate model, D R̂(π) D R̂(π) D, carries two SNAPs
    and clears one level on one side of |n⟩. Clearing ceil(√n) levels, one
    standard deviation of the coherent seed, on both sides takes this many SNAPs.
    """
    return FOLD_SNAPS_PER_SPREAD * math.ceil(math.sqrt(n))


def fold_band(n: int, nc: int) -> Tuple[int, int]:
    """Return the level band [n−Δn, n+Δn], Δn = ceil(3√n), clipped to the cutoff."""
    spread = math.ceil(3 * math.sqrt(n))
    return max(0, n - spread), min(nc - 1, n + spread)


class _Folding:
    """Parameter layout and fast simulation of D(√n) followed by K folding blocks."""

    def __init__(self, n: int, nc: int):
        self.n = n
        self.nc = nc
        self.low, self.high = fold_band(n, nc)
        self.width = self.high - self.low + 1
        start = np.zeros(nc, dtype=np.complex128)
        start[0] = 1.0
        self.seed_state = displace_vector(math.sqrt(n), start)

    def split(self, params: npt.NDArray[np.float64]):
        blocks = params.reshape(-1, self.width + 1)
        return blocks[:, : self.width], blocks[:, self.width]

    def state(self, params: npt.NDArray[np.float64]) -> npt.NDArray[np.complex128]:
        amps = self.seed_state.copy()
        for phases, beta in zip(*self.split(params)):
            amps[self.low : self.high + 1] *= np.exp(1j * phases)
            amps = displace_vector(beta, amps)
        return amps

    def infidelity(self, params: npt.NDArray[np.float64]) -> float:
        return 1.0 - abs(self.state(params)[self.n])

    def blocks(self, params: npt.NDArray[np.float64]) -> List[FoldBlock]:
        return [
            FoldBlock(phases=tuple(float(p) for p in phases), beta=float(beta))
            for phases, beta in zip(*self.split(params))
        ]

    def gates(self, params: npt.NDArray[np.float64]) -> List[Gate]:
        gates: List[Gate] = [Displacement(math.sqrt(self.n))]
        for block in self.blocks(params):
            phases = np.zeros(self.high + 1)
            phases[self.low :] = block.phases
            gates += [Snap(tuple(phases)), Displacement(block.beta)]
        return gates


def _fresh_fold_seed(folding: _Folding, blocks: int, rng: np.random.Generator):
    seed = np.empty((blocks, folding.width + 1))
    for k in range(blocks):
        seed[k, : folding.width] = rng.normal(0.0, FOLD_PHASE_SPREAD, folding.width)
        seed[k, folding.width] = (-1) ** k * FOLD_BETA0 / 2**k
    return seed.reshape(-1)


def compile_fock_sublinear(
    n: int,
    target_fidelity: float,
    cutoff: Optional[int] = None,
    config: Optional[OptimizerConfig] = None,
) -> PrepPlan:
    """Prepare |n⟩ by folding the coherent state D(√n)|0⟩.

    The sequence is ``D(√n)`` followed by K blocks ``[Snap(φ⃗ₖ), D(βₖ)]`` whose
    SNAP phases are free on the band [n−Δn, n+Δn]. K starts at
    :func:`minimum_fold_blocks` and grows by one up to twice that until the
    re-simulated fidelity reaches ``target_fidelity``. For every K a warm
    start (the previous best plus one near-identity block) and a fresh start
    are refined and the better kept.

    Raises:
        InvalidArgumentError: on n < 1, a target fidelity outside (0.9, 1) or a small cutoff.
        FoldingBudgetError: if the largest K falls short; ``best`` holds the best plan.
    """
    config = config or OptimizerConfig()
    if n < 1:
        raise InvalidArgumentError(f"Folding needs n ≥ 1, got {n}")
    if not 0.9 < target_fidelity < 1.0:
        raise InvalidArgumentError(f"Target fidelity {target_fidelity} outside (0.9, 1)")
    minimum = sublinear_cutoff(n)
    nc = validate_cutoff(
        cutoff if cutoff is not None else max(minimum, cutoff_for_dimension(n + 1))
    )
    if nc < minimum:
        raise InvalidArgumentError(f"Folding |{n}⟩ needs cutoff ≥ {minimum}, got {nc}")

    target = TargetState.fock(n)
    folding = _Folding(n, nc)
    rng = np.random.default_rng(config.seed)
    first = minimum_fold_blocks(n)
    last = FOLD_BUDGET_FACTOR * first
    best_params: Optional[npt.NDArray[np.float64]] = None
    best_plan: Optional[PrepPlan] = None
    history = []
    for blocks in range(first, last + 1):
        parameters = blocks * (folding.width + 1)
        budget = config.model_copy(
            update={"max_evals": max(config.max_evals, FOLD_EVALS_PER_PARAMETER * parameters)}
        )
        starts = [_fresh_fold_seed(folding, blocks, rng)]
        if best_params is not None:
            extra = np.zeros(folding.width + 1)
            extra[: folding.width] = rng.normal(0.0, FOLD_PHASE_SPREAD, folding.width)
            starts.insert(0, np.concatenate([best_params, extra]))
        runs = [minimize_refine(folding.infidelity, start, budget) for start in starts]
        run = min(runs, key=lambda result: result.fval)
        plan = _finish_plan(
            folding.gates(run.x),
            target,
            nc,
            scheme="sublinear",
            stages=list(folding.blocks(run.x)),
        )
        history.append({"blocks": blocks, "fidelity": plan.fidelity, "evals": run.evals})
        plan.trace = {"folding": list(history)}
        logger.info("Folding |%d⟩ with K=%d blocks: F=%.6f", n, blocks, plan.fidelity)
        best_params = run.x
        if best_plan is None or plan.fidelity > best_plan.fidelity:
            best_plan = plan
        if plan.fidelity >= target_fidelity:
            return plan
    raise FoldingBudgetError(
        f"Folding |{n}⟩ reached F={best_plan.fidelity:.6f} < {target_fidelity} "
        f"with up to {last} blocks",
        best=best_plan,
    )


def compile_fock_state(
    n: int,
    target_fidelity: float,
    scheme: str = "auto",
    cutoff: Optional[int] = None,
    config: Optional[OptimizerConfig] = None,
) -> PrepPlan:
    """Prepare |n⟩ with the ``linear``, ``sublinear`` or ``auto`` scheme.

    ``auto`` compiles both schemes and keeps the folded plan only if it
    reaches ``target_fidelity`` with strictly fewer SNAP gates than the linear
    plan. Folding is skipped when even :func:`minimum_fold_blocks` SNAPs
    would not undercut the linear plan.
    """
    if scheme not in ("linear", "sublinear", "auto"):
        raise InvalidArgumentError(f"Unknown scheme {scheme!r}")
    if n < 0:
        raise InvalidArgumentError(f"Fock level must be non-negative, got {n}")
    if n == 0:
        return compile_state_prep(TargetState.fock(0), cutoff, config)
    if scheme == "sublinear":
        return compile_fock_sublinear(n, target_fidelity, cutoff, config)
    linear = compile_state_prep(TargetState.fock(n), cutoff, config)
    if scheme == "linear":
        return linear
    if minimum_fold_blocks(n) >= linear.snap_count:
        logger.info(
            "Folding |%d⟩ needs at least %d SNAPs, keeping the linear plan with %d",
            n,
            minimum_fold_blocks(n),
            linear.snap_count,
        )
        return linear
    try:
        folded = compile_fock_sublinear(n, target_fidelity, None, config)
    except SynthesisError as e:
        logger.info("Folding |%d⟩ failed, keeping the linear plan: %s", n, e)
        return linear
    if folded.snap_count < linear.snap_count:
        logger.info("Chose folding for |%d⟩: %d SNAPs", n, folded.snap_count)
        return folded
    return linear


def gate_count_sweep(
    n_values: Sequence[int],
    fidelities: Sequence[float],
    cutoff: Optional[int] = None,
    config: Optional[OptimizerConfig] = None,
) -> Iterator[SweepRow]:
    """Yield one row per (n, scheme, target fidelity) comparing SNAP counts of both schemes.

    The linear plan does not depend on the target fidelity and is compiled once
    per level. A failed compile yields a row without counts.

    Raises:
        InvalidArgumentError: if either list is empty.
    """
    if not n_values or not fidelities:
        raise InvalidArgumentError("Sweep needs at least one level and one target fidelity")
    linear_plans: Dict[int, Union[PrepPlan, Exception]] = {}
    for n in n_values:
        for target_fidelity in fidelities:
            if n not in linear_plans:
                try:
                    linear_plans[n] = compile_state_prep(TargetState.fock(n), cutoff, config)
                except (SynthesisError, InvalidArgumentError) as e:
                    linear_plans[n] = e
            yield _sweep_row(n, "linear", target_fidelity, linear_plans[n], cutoff)
            try:
                outcome: Union[PrepPlan, Exception] = compile_fock_sublinear(
                    n, target_fidelity, cutoff, config
                )
            except (SynthesisError, InvalidArgumentError) as e:
                outcome = e
            yield _sweep_row(n, "sublinear", target_fidelity, outcome, cutoff)


def _sweep_row(n, scheme, target_fidelity, outcome, cutoff) -> SweepRow:
    if isinstance(outcome, PrepPlan):
        return SweepRow(
            n=n,
            scheme=scheme,
            target_fidelity=target_fidelity,
            cutoff=outcome.sequence.cutoff,
            snap_count=outcome.snap_count,
            displacement_count=outcome.displacement_count,
            achieved_fidelity=outcome.fidelity,
        )
    logger.warning("Sweep cell n=%d %s F=%s failed: %s", n, scheme, target_fidelity, outcome)
    best = getattr(outcome, "best", None)
    return SweepRow(
        n=n,
        scheme=scheme,
        target_fidelity=target_fidelity,
        cutoff=best.sequence.cutoff if isinstance(best, PrepPlan) else (cutoff or 0),
        error=str(outcome),
    )


def fit_power_law(ns: Sequence[float], counts: Sequence[float]) -> Tuple[float, float]:
    """Fit counts ≈ A·n^q by least squares in log-log space.

    Returns:
        ``(q, A)``.

    Raises:
        InvalidArgumentError: with fewer than two points or non-positive values.
    """
    ns = np.asarray(ns, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if ns.size < 2 or ns.size != counts.size:
        raise InvalidArgumentError("Power-law fit needs at least two paired points")
    if np.any(ns <= 0) or np.any(counts <= 0):
        raise InvalidArgumentError("Power-law fit needs positive levels and counts")
    slope, intercept = np.polyfit(np.log(ns), np.log(counts), 1)
    return float(slope), float(np.exp(intercept))
