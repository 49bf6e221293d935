# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Truncated Fock-space states, displacement and SNAP gates, and fidelity measures.

All matrices live on the number basis |0⟩ … |nc−1⟩. Gate sequences are stored in
application order: the gate at index 0 acts first, so for a sequence
``[G0, G1, …, Gk]`` the realized operator is ``Gk ··· G1 G0``. Operator products
written the usual way read right-to-left; keep the two apart when translating.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy.linalg import expm

from exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

MIN_CUTOFF = 2
DEFAULT_BUFFER = 10
DEFAULT_LEAK_TOLERANCE = 1e-6
NORM_ROUNDING_TOLERANCE = 1e-9
ZERO_PHASE_TOLERANCE = 1e-12

Operator = npt.NDArray[np.complex128]


def validate_cutoff(nc: int) -> int:
    """Return ``nc`` as an int after checking it is a usable cutoff dimension.

    Raises:
        InvalidArgumentError: if ``nc`` is not an integer of at least 2.
    """
    if isinstance(nc, bool) or int(nc) != nc:
        raise InvalidArgumentError(f"Cutoff must be an integer, got {nc!r}")
    if nc < MIN_CUTOFF:
        raise InvalidArgumentError(f"Cutoff must be at least {MIN_CUTOFF}, got {nc}")
    return int(nc)


def cutoff_for_dimension(dim: int) -> int:
    """Return the default cutoff for a target spanning ``dim`` number levels.

    Args:
        dim (int): number of levels the target touches (N+1 for |0⟩…|N⟩).

    Returns:
        int: max(2·dim, dim + 15).
    """
    return max(2 * dim, dim + 15)


def wrap_phase(phases: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Reduce phases to the interval (−π, π]; values already inside are returned untouched."""
    phases = np.asarray(phases, dtype=float)
    wrapped = np.pi - np.mod(np.pi - phases, 2 * np.pi)
    inside = (phases > -np.pi) & (phases <= np.pi)
    return np.where(inside, phases, wrapped)


@dataclass(frozen=True)
class Displacement:
    """Displacement gate D(α) = exp(α â† − α* â)."""

    alpha: complex

    def __post_init__(self):
        alpha = complex(self.alpha)
        if not np.isfinite(alpha.real) or not np.isfinite(alpha.imag):
            raise InvalidArgumentError(f"Displacement amplitude must be finite, got {alpha}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def is_real(self) -> bool:
        """Return whether α lies on the real axis."""
        return self.alpha.imag == 0.0


@dataclass(frozen=True)
class Snap:
    """SNAP gate S(θ⃗) = Σₙ e^{iθₙ}|n⟩⟨n|; levels past the phase vector get phase 0."""

    phases: Tuple[float, ...]

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float).reshape(-1)
        if not np.all(np.isfinite(phases)):
            raise InvalidArgumentError("SNAP phases must be finite")
        object.__setattr__(self, "phases", tuple(float(p) for p in wrap_phase(phases)))

    def is_trivial(self) -> bool:
        """Return whether every phase is zero within ZERO_PHASE_TOLERANCE."""
        return all(abs(phase) < ZERO_PHASE_TOLERANCE for phase in self.phases)

    def diagonal(self, nc: int) -> npt.NDArray[np.complex128]:
        """Return the diagonal e^{iθₙ} of the gate at cutoff ``nc``.

        Raises:
            InvalidArgumentError: if the phase vector is longer than ``nc``.
        """
        if len(self.phases) > nc:
            raise InvalidArgumentError(
                f"SNAP has {len(self.phases)} phases but the cutoff is {nc}"
            )
        phases = np.zeros(nc)
        phases[: len(self.phases)] = self.phases
        return np.exp(1j * phases)


Gate = Union[Displacement, Snap]


@dataclass(frozen=True)
class GateSequence:
    """Gates in application order together with the cutoff used to synthesize them."""

    gates: Tuple[Gate, ...]
    cutoff: int

    def __post_init__(self):
        object.__setattr__(self, "cutoff", validate_cutoff(self.cutoff))
        gates = tuple(self.gates)
        for gate in gates:
            if not isinstance(gate, (Displacement, Snap)):
                raise InvalidArgumentError(f"Unknown gate {gate!r}")
            if isinstance(gate, Snap) and len(gate.phases) > self.cutoff:
                raise InvalidArgumentError(
                    f"SNAP has {len(gate.phases)} phases but the cutoff is {self.cutoff}"
                )
        object.__setattr__(self, "gates", gates)

    def __len__(self) -> int:
        return len(self.gates)

    @property
    def snap_count(self) -> int:
        """Return the number of SNAP gates."""
        return sum(isinstance(gate, Snap) for gate in self.gates)

    @property
    def displacement_count(self) -> int:
        """Return the number of displacement gates."""
        return sum(isinstance(gate, Displacement) for gate in self.gates)

    def with_cutoff(self, nc: int) -> "GateSequence":
        """Return the same gates re-targeted to cutoff ``nc``."""
        return GateSequence(gates=self.gates, cutoff=nc)


@dataclass(frozen=True, eq=False)
class TruncatedState:
    """Complex amplitudes over |0⟩ … |nc−1⟩.

    ``leaked`` is set by :func:`apply_sequence` when the truncation leak of the
    result exceeded the configured tolerance. The squared norm must lie in
    [1 − DEFAULT_LEAK_TOLERANCE, 1] up to rounding; leaked states may fall
    below it.
    """

    amps: npt.NDArray[np.complex128]
    leaked: bool = False

    def __post_init__(self):
        amps = np.array(self.amps, dtype=np.complex128).reshape(-1)
        validate_cutoff(amps.size)
        if not np.all(np.isfinite(amps)):
            raise InvalidArgumentError("State amplitudes must be finite")
        norm_squared = float(np.vdot(amps, amps).real)
        floor = 0.0 if self.leaked else 1.0 - DEFAULT_LEAK_TOLERANCE
        if not floor - NORM_ROUNDING_TOLERANCE <= norm_squared <= 1.0 + NORM_ROUNDING_TOLERANCE:
            raise InvalidArgumentError(f"State is not normalized: ‖ψ‖² = {norm_squared:.12g}")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def cutoff(self) -> int:
        """Return the cutoff dimension of the state."""
        return self.amps.size

    @property
    def norm(self) -> float:
        """Return the 2-norm of the amplitudes."""
        return float(np.linalg.norm(self.amps))

    def populations(self) -> npt.NDArray[np.float64]:
        """Return |cₙ|² for every level."""
        return np.abs(self.amps) ** 2


def basis_state(n: int, nc: int) -> TruncatedState:
    """Return the number state |n⟩ at cutoff ``nc``."""
    nc = validate_cutoff(nc)
    if not 0 <= n < nc:
        raise InvalidArgumentError(f"Level {n} outside cutoff {nc}")
    amps = np.zeros(nc, dtype=np.complex128)
    amps[n] = 1.0
    return TruncatedState(amps)


def state_from_coefficients(coeffs: Sequence[complex], nc: int) -> TruncatedState:
    """Return the state Σ cₙ|n⟩ padded with zeros to cutoff ``nc``."""
    nc = validate_cutoff(nc)
    coeffs = np.asarray(coeffs, dtype=np.complex128).reshape(-1)
    if coeffs.size > nc:
        raise InvalidArgumentError(f"{coeffs.size} coefficients do not fit cutoff {nc}")
    amps = np.zeros(nc, dtype=np.complex128)
    amps[: coeffs.size] = coeffs
    return TruncatedState(amps)


@lru_cache(maxsize=None)
def _annihilation(nc: int) -> npt.NDArray[np.complex128]:
    matrix = np.diag(np.sqrt(np.arange(1, nc, dtype=float)), k=1).astype(np.complex128)
    matrix.setflags(write=False)
    return matrix


def annihilation_operator(nc: int) -> Operator:
    """Return â with ⟨n−1|â|n⟩ = √n, truncated at ``nc``."""
    return _annihilation(validate_cutoff(nc)).copy()


def momentum_generator(cutoff: int) -> Operator:
    """Return p̂ = −i(â† − â), the generator of real displacements."""
    a = _annihilation(validate_cutoff(cutoff))
    return -1j * (a.conj().T - a)


def projector_q(n: int, cutoff: int) -> Operator:
    """Return Q̂ₙ = Σ_{n'≤n} |n'⟩⟨n'|.

    Raises:
        InvalidArgumentError: if ``n`` is not a level below the cutoff.
    """
    cutoff = validate_cutoff(cutoff)
    if not 0 <= n < cutoff:
        raise InvalidArgumentError(f"Level {n} outside cutoff {cutoff}")
    diagonal = np.zeros(cutoff, dtype=np.complex128)
    diagonal[: n + 1] = 1.0
    return np.diag(diagonal)


def coupling_j(n: int, cutoff: int) -> Operator:
    """Return Ĵₙ = √(n+1)(|n⟩⟨n+1| + |n+1⟩⟨n|) from its closed form.

    Raises:
        InvalidArgumentError: unless 0 ≤ n < cutoff − 1.
    """
    cutoff = validate_cutoff(cutoff)
    if not 0 <= n < cutoff - 1:
        raise InvalidArgumentError(f"Coupling level {n} needs n < {cutoff - 1}")
    matrix = np.zeros((cutoff, cutoff), dtype=np.complex128)
    matrix[n, n + 1] = matrix[n + 1, n] = np.sqrt(n + 1)
    return matrix


@lru_cache(maxsize=None)
def _momentum_eigensystem(nc: int) -> Tuple[npt.NDArray[np.float64], Operator]:
    eigenvalues, eigenvectors = np.linalg.eigh(momentum_generator(nc))
    eigenvalues.setflags(write=False)
    eigenvectors.setflags(write=False)
    return eigenvalues, eigenvectors


def displacement_operator(alpha: complex, cutoff: int) -> Operator:
    """Return D(α) = exp(α â† − α* â) on the truncated basis.

    Real amplitudes use the cached eigendecomposition of p̂ (D(r) = exp(i r p̂));
    complex ones use scaling-and-squaring on the truncated generator. Both are
    unitary to machine precision.

    Raises:
        InvalidArgumentError: on a bad cutoff or non-finite α.
    """
    cutoff = validate_cutoff(cutoff)
    alpha = Displacement(alpha).alpha
    if alpha == 0:
        return np.eye(cutoff, dtype=np.complex128)
    if alpha.imag == 0.0:
        eigenvalues, eigenvectors = _momentum_eigensystem(cutoff)
        return (eigenvectors * np.exp(1j * alpha.real * eigenvalues)) @ eigenvectors.conj().T
    a = _annihilation(cutoff)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def displace_vector(alpha: float, amps: npt.NDArray[np.complex128]) -> npt.NDArray[np.complex128]:
    """Apply a real displacement D(α) to an amplitude vector without forming the matrix."""
    eigenvalues, eigenvectors = _momentum_eigensystem(amps.size)
    return eigenvectors @ (np.exp(1j * alpha * eigenvalues) * (eigenvectors.conj().T @ amps))


def snap_operator(phases: Sequence[float], cutoff: int) -> Operator:
    """Return the diagonal unitary S(θ⃗).

    Raises:
        InvalidArgumentError: if the phase vector is longer than the cutoff.
    """
    return np.diag(Snap(tuple(phases)).diagonal(validate_cutoff(cutoff)))


def r_phases(n: int, eps: float) -> Tuple[float, ...]:
    """Return the SNAP phases (ε, …, ε) of R̂ₙ(ε), n+1 entries."""
    return (float(eps),) * (n + 1)


def r_gate(n: int, eps: float, cutoff: int) -> Operator:
    """Return R̂ₙ(ε) = e^{iQ̂ₙε}.

    Raises:
        InvalidArgumentError: if ``n`` is not below the cutoff.
    """
    cutoff = validate_cutoff(cutoff)
    if not 0 <= n < cutoff:
        raise InvalidArgumentError(f"Level {n} outside cutoff {cutoff}")
    return snap_operator(r_phases(n, eps), cutoff)


def coherent_state(alpha: complex, nc: int) -> TruncatedState:
    """Return D(α)|0⟩ at cutoff ``nc``."""
    return TruncatedState(displacement_operator(alpha, nc)[:, 0])


def kerr_phases(chi: float, nc: int) -> Tuple[float, ...]:
    """Return SNAP phases θₙ = χn², the number-conserving action of a Kerr term."""
    levels = np.arange(validate_cutoff(nc), dtype=float)
    return tuple(float(p) for p in chi * levels**2)


def gate_operator(gate: Gate, cutoff: int) -> Operator:
    """Return the matrix realizing ``gate`` at ``cutoff``."""
    if isinstance(gate, Snap):
        return np.diag(gate.diagonal(cutoff))
    return displacement_operator(gate.alpha, cutoff)


def truncation_leak(amps: npt.NDArray[np.complex128]) -> float:
    """Return the norm deficit plus the population sitting on the top level."""
    deficit = max(0.0, 1.0 - float(np.vdot(amps, amps).real))
    return deficit + float(abs(amps[-1]) ** 2)


def apply_sequence(
    seq: GateSequence,
    state: TruncatedState,
    leak_tolerance: float = DEFAULT_LEAK_TOLERANCE,
) -> TruncatedState:
    """Apply the gates of ``seq`` to ``state`` in sequence order.

    Args:
        seq (GateSequence): gates in application order.
        state (TruncatedState): input state at the sequence cutoff.
        leak_tolerance (float): truncation leak above which the result is flagged.

    Returns:
        TruncatedState: the output state, ``leaked`` set when the leak exceeds tolerance.

    Raises:
        InvalidArgumentError: if the cutoffs differ.
    """
    if seq.cutoff != state.cutoff:
        raise InvalidArgumentError(
            f"Sequence cutoff {seq.cutoff} does not match state cutoff {state.cutoff}"
        )
    amps = np.array(state.amps)
    for gate in seq.gates:
        if isinstance(gate, Snap):
            amps = gate.diagonal(seq.cutoff) * amps
        elif gate.is_real:
            amps = displace_vector(gate.alpha.real, amps)
        else:
            amps = displacement_operator(gate.alpha, seq.cutoff) @ amps
    leak = truncation_leak(amps)
    leaked = leak > leak_tolerance
    if leaked:
        logger.warning(
            "Truncation leak %.3e exceeds tolerance %.1e at cutoff %d",
            leak,
            leak_tolerance,
            seq.cutoff,
        )
    return TruncatedState(amps, leaked=leaked)


def sequence_unitary(seq: GateSequence) -> Operator:
    """Return the product of the gate matrices, the index-0 gate rightmost."""
    unitary = np.eye(seq.cutoff, dtype=np.complex128)
    for gate in seq.gates:
        if isinstance(gate, Snap):
            unitary = gate.diagonal(seq.cutoff)[:, None] * unitary
        else:
            unitary = displacement_operator(gate.alpha, seq.cutoff) @ unitary
    return unitary


def state_fidelity(a: TruncatedState, b: TruncatedState) -> float:
    """Return |⟨a|b⟩|.

    Raises:
        InvalidArgumentError: if the cutoffs differ.
    """
    if a.cutoff != b.cutoff:
        raise InvalidArgumentError(f"Cutoff mismatch: {a.cutoff} vs {b.cutoff}")
    return float(min(1.0, abs(np.vdot(a.amps, b.amps))))


def unitary_fidelity(u: Operator, u_ideal: Operator, block_dim: Optional[int] = None) -> float:
    """Return the normalized trace overlap |Tr(U† U_ideal)| / dim.

    With ``block_dim`` unset the trace runs over the whole cutoff and is divided
    by it. With ``block_dim = d`` only the top-left d×d block enters and the
    result is divided by d.

    Raises:
        InvalidArgumentError: on mismatched shapes or a block larger than the matrices.
    """
    u = np.asarray(u)
    u_ideal = np.asarray(u_ideal)
    if u.shape != u_ideal.shape or u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise InvalidArgumentError(
            f"Cannot compare operators of shapes {u.shape}, {u_ideal.shape}"
        )
    dim = u.shape[0]
    if block_dim is not None:
        if not 1 <= block_dim <= dim:
            raise InvalidArgumentError(f"Block dimension {block_dim} outside 1..{dim}")
        u = u[:block_dim, :block_dim]
        u_ideal = u_ideal[:block_dim, :block_dim]
        dim = block_dim
    return float(abs(np.sum(u.conj() * u_ideal)) / dim)


def decompose_complex_displacement(alpha: complex, cutoff: int) -> GateSequence:
    """Return ``[Snap(−θ⃗), Displacement(r), Snap(θ⃗)]``, θₙ = nφ, realizing D(re^{iφ}).

    The identity S(θ⃗) â† S(−θ⃗) = e^{iφ} â† holds exactly on the truncated basis,
    so the sequence equals ``displacement_operator(alpha, cutoff)``.
    """
    cutoff = validate_cutoff(cutoff)
    alpha = Displacement(alpha).alpha
    r, phi = abs(alpha), float(np.angle(alpha))
    theta = np.arange(cutoff) * phi
    return GateSequence(
        gates=(Snap(tuple(-theta)), Displacement(r), Snap(tuple(theta))),
        cutoff=cutoff,
    )


def group_commutator(n: int, eps: float, cutoff: int) -> Operator:
    """Return D(ε) R̂ₙ(ε) D(−ε) R̂ₙ(−ε) ≈ exp(i Ĵₙ ε²) as a matrix product."""
    cutoff = validate_cutoff(cutoff)
    if not 0 <= n < cutoff - 1:
        raise InvalidArgumentError(f"Commutator level {n} needs n < {cutoff - 1}")
    return (
        displacement_operator(eps, cutoff)
        @ r_gate(n, eps, cutoff)
        @ displacement_operator(-eps, cutoff)
        @ r_gate(n, -eps, cutoff)
    )


def merge_displacements(gates: Iterable[Gate]) -> List[Gate]:
    """Merge adjacent real displacements by α-addition.

    Real displacements commute, so D(β)D(α) = D(α+β) exactly. A merge that sums
    to zero drops out of the list.
    """
    merged: List[Gate] = []
    for gate in gates:
        previous = merged[-1] if merged else None
        if (
            isinstance(gate, Displacement)
            and isinstance(previous, Displacement)
            and gate.is_real
            and previous.is_real
        ):
            total = previous.alpha.real + gate.alpha.real
            merged.pop()
            if total != 0.0:
                merged.append(Displacement(total))
            continue
        merged.append(gate)
    return merged


def drop_trivial_snaps(gates: Iterable[Gate]) -> List[Gate]:
    """Return the gates without SNAPs whose phases are all zero."""
    return [gate for gate in gates if not (isinstance(gate, Snap) and gate.is_trivial())]
