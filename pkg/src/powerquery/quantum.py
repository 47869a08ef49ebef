"""State-vector simulation over a control register tensored with a target space.

States live on C^(2^c) (x) C^n with the target axis expressed in the
eigenbasis of the discretized operator, so that a controlled power of the
propagator is a single diagonal phase multiplication.  Conversion to the
standard basis happens only when a measurement asks for it.

Control bits are numbered 1..c with bit 1 the most significant bit of the
control index, matching the top-to-bottom wire order of the usual phase
estimation circuit and making the binary-fraction decoding a direct bit read.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import EigenSystem
from .errors import SimulationLimitError, ValidationError

DEFAULT_AMPLITUDE_LIMIT = 2 ** 24
FULL_UNITARY_LIMIT = 4096
NORM_TOL = 1e-12
UNITARY_TOL = 1e-10

TARGET_EIGENBASIS = "target-eigenbasis"
TARGET_STANDARD = "target-standard"


@dataclass(frozen=True)
class RegisterLayout:
    """Register shape: c control qubits and an n-dimensional target."""

    control_qubits: int
    target_dim: int
    amplitude_limit: int = DEFAULT_AMPLITUDE_LIMIT

    def __post_init__(self):
        if self.control_qubits < 0:
            raise ValidationError(f"control qubit count must be >= 0, got {self.control_qubits}")
        if self.target_dim < 1:
            raise ValidationError(f"target dimension must be >= 1, got {self.target_dim}")
        if self.control_dim * self.target_dim > self.amplitude_limit:
            raise SimulationLimitError(
                f"state of {self.control_dim * self.target_dim} amplitudes exceeds "
                f"the limit of {self.amplitude_limit}"
            )

    @property
    def control_dim(self) -> int:
        return 1 << self.control_qubits

    def bit_value(self, k, bit: int):
        """Value of control bit `bit` (1 = most significant) in control index k."""
        if not 1 <= bit <= self.control_qubits:
            raise ValidationError(
                f"control bit {bit} outside register of {self.control_qubits} qubits"
            )
        return (k >> (self.control_qubits - bit)) & 1


@dataclass(frozen=True)
class StateVector:
    """Amplitudes indexed by (control index, target index), unit norm."""

    layout: RegisterLayout
    amplitudes: np.ndarray  # shape (2^c, n), complex
    basis: str = TARGET_EIGENBASIS

    def __post_init__(self):
        expected = (self.layout.control_dim, self.layout.target_dim)
        if self.amplitudes.shape != expected:
            raise ValidationError(
                f"amplitude array shape {self.amplitudes.shape} does not match layout {expected}"
            )
        if self.basis not in (TARGET_EIGENBASIS, TARGET_STANDARD):
            raise ValidationError(f"unknown basis tag {self.basis!r}")
        norm = float(np.linalg.norm(self.amplitudes))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"state norm {norm!r} deviates from 1 beyond {NORM_TOL:g}")

    def _replace_amplitudes(self, amplitudes: np.ndarray, basis: str | None = None) -> "StateVector":
        return StateVector(layout=self.layout, amplitudes=amplitudes,
                           basis=self.basis if basis is None else basis)

    def debug_dump(self) -> dict:
        """Layout header plus amplitudes as [re, im] pairs, for JSON debugging."""
        flat = self.amplitudes.reshape(-1)
        return {
            "control_qubits": self.layout.control_qubits,
            "target_dim": self.layout.target_dim,
            "basis": self.basis,
            "amplitudes": [[float(a.real), float(a.imag)] for a in flat],
        }


def init_state(layout: RegisterLayout, target_amplitudes, basis: str = TARGET_EIGENBASIS) -> StateVector:
    """All-zeros control register tensored with the given target amplitudes."""
    target = np.asarray(target_amplitudes, dtype=complex)
    if target.shape != (layout.target_dim,):
        raise ValidationError(
            f"target amplitudes have shape {target.shape}, expected ({layout.target_dim},)"
        )
    norm = float(np.linalg.norm(target))
    if abs(norm - 1.0) > 1e-10:
        raise ValidationError(f"target amplitudes have norm {norm!r}, expected 1 within 1e-10")
    amp = np.zeros((layout.control_dim, layout.target_dim), dtype=complex)
    amp[0, :] = target
    return StateVector(layout=layout, amplitudes=amp, basis=basis)


# --------------------------------------------------------------------------
# Unitary specifications
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class UnitarySpec:
    """A fixed unitary: a named gate, a control-register matrix, or a full-space matrix."""

    kind: str
    matrix: np.ndarray | None = None

    IDENTITY = "identity"
    HADAMARD_LAYER = "hadamard-layer"
    INVERSE_QFT = "inverse-qft"
    CONTROL_DENSE = "control-dense"
    FULL_DENSE = "full-dense"

    @staticmethod
    def identity() -> "UnitarySpec":
        return UnitarySpec(kind=UnitarySpec.IDENTITY)

    @staticmethod
    def hadamard_layer() -> "UnitarySpec":
        return UnitarySpec(kind=UnitarySpec.HADAMARD_LAYER)

    @staticmethod
    def inverse_qft() -> "UnitarySpec":
        return UnitarySpec(kind=UnitarySpec.INVERSE_QFT)

    @staticmethod
    def control_dense(matrix) -> "UnitarySpec":
        return UnitarySpec(kind=UnitarySpec.CONTROL_DENSE, matrix=_checked_unitary(matrix))

    @staticmethod
    def full_dense(matrix) -> "UnitarySpec":
        m = np.asarray(matrix, dtype=complex)
        if m.ndim == 2 and m.shape[0] > FULL_UNITARY_LIMIT:
            raise SimulationLimitError(
                f"full-space unitaries are limited to {FULL_UNITARY_LIMIT} dimensions, "
                f"got {m.shape[0]}"
            )
        return UnitarySpec(kind=UnitarySpec.FULL_DENSE, matrix=_checked_unitary(m))


def _checked_unitary(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"unitary matrix must be square, got shape {m.shape}")
    dev = float(np.abs(m.conj().T @ m - np.eye(m.shape[0])).max())
    if dev > UNITARY_TOL:
        raise ValidationError(f"matrix is not unitary (deviation {dev:.3e} > {UNITARY_TOL:g})")
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class QueryStep:
    """One power query followed by a fixed unitary."""

    control_bit: int
    power: int
    unitary: UnitarySpec


@dataclass(frozen=True)
class AlgorithmSchedule:
    """A power-query algorithm: U_0, then alternating queries and unitaries.

    Running the schedule applies ``initial_unitary`` to ``initial_state`` and
    then, for each step j, the controlled power (bit l_j, power p_j) followed
    by that step's unitary.  ``decoder`` maps a measured control outcome to an
    eigenvalue estimate and may be None for schedules that are not decoded.
    """

    layout: RegisterLayout
    initial_state: StateVector
    initial_unitary: UnitarySpec
    steps: tuple[QueryStep, ...]
    decoder: object | None = None

    def __post_init__(self):
        for j, step in enumerate(self.steps, start=1):
            if not 1 <= step.control_bit <= self.layout.control_qubits:
                raise ValidationError(
                    f"step {j}: control bit {step.control_bit} outside register "
                    f"of {self.layout.control_qubits} qubits"
                )
            if step.power < 1:
                raise ValidationError(f"step {j}: power must be >= 1, got {step.power}")

    @property
    def query_count(self) -> int:
        return len(self.steps)

    @property
    def powers(self) -> tuple[int, ...]:
        return tuple(step.power for step in self.steps)

    @property
    def final_unitary(self) -> UnitarySpec:
        return self.steps[-1].unitary if self.steps else self.initial_unitary


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------

def apply_power_query(state: StateVector, control_bit: int, power: int,
                      eig: EigenSystem) -> StateVector:
    """Multiply amplitudes with control bit set by exp(i * power * eigenvalue_s / 2)."""
    if state.basis != TARGET_EIGENBASIS:
        raise ValidationError(
            "power queries require the target axis in the eigenbasis; "
            f"state is tagged {state.basis!r}"
        )
    if power < 1:
        raise ValidationError(f"power must be >= 1, got {power}")
    layout = state.layout
    if eig.n != layout.target_dim:
        raise ValidationError(
            f"eigensystem dimension {eig.n} does not match target dimension {layout.target_dim}"
        )
    k = np.arange(layout.control_dim)
    rows = layout.bit_value(k, control_bit) == 1
    phases = np.exp(0.5j * power * eig.eigenvalues)
    amp = state.amplitudes.copy()
    amp[rows, :] *= phases[None, :]
    return state._replace_amplitudes(amp)


def _walsh_hadamard_rows(mat: np.ndarray) -> np.ndarray:
    """Normalized fast Walsh-Hadamard transform of the row index of a 2-D array."""
    rows, cols = mat.shape
    out = mat.copy()
    block = 1
    while block < rows:
        view = out.reshape(rows // (2 * block), 2, block, cols)
        top = view[:, 0] + view[:, 1]
        bottom = view[:, 0] - view[:, 1]
        view[:, 0] = top
        view[:, 1] = bottom
        block *= 2
    out *= 1.0 / np.sqrt(rows)
    return out


def apply_hadamard_layer(state: StateVector) -> StateVector:
    if state.layout.control_qubits == 0:
        return state
    return state._replace_amplitudes(_walsh_hadamard_rows(state.amplitudes))


def apply_inverse_qft(state: StateVector, first_bit: int = 1,
                      last_bit: int | None = None) -> StateVector:
    """Inverse Fourier transform of the control index over a contiguous bit range.

    The forward transform maps |j> to 2^(-T/2) sum_k exp(2 pi i jk / 2^T) |k>;
    this applies its inverse.  The default range is the whole control register.
    """
    c = state.layout.control_qubits
    if last_bit is None:
        last_bit = c
    if not (1 <= first_bit <= last_bit <= c):
        raise ValidationError(f"bit range {first_bit}..{last_bit} outside register of {c} qubits")
    span = last_bit - first_bit + 1
    size = 1 << span
    high = 1 << (first_bit - 1)
    amp = state.amplitudes.reshape(high, size, -1)
    out = np.fft.fft(amp, axis=1) / np.sqrt(size)
    return state._replace_amplitudes(out.reshape(state.amplitudes.shape))


def _eigen_to_standard(amp: np.ndarray, eig: EigenSystem) -> np.ndarray:
    return amp @ eig.eigenvectors.T


def _standard_to_eigen(amp: np.ndarray, eig: EigenSystem) -> np.ndarray:
    return amp @ eig.eigenvectors


def apply_unitary(state: StateVector, spec: UnitarySpec,
                  eig: EigenSystem | None = None) -> StateVector:
    """Apply a fixed unitary: named gate, control matrix (x) identity, or full matrix.

    Full-space matrices act in the standard basis; an eigensystem is required
    to conjugate them when the state is stored in the eigenbasis.
    """
    if spec.kind == UnitarySpec.IDENTITY:
        return state
    if spec.kind == UnitarySpec.HADAMARD_LAYER:
        return apply_hadamard_layer(state)
    if spec.kind == UnitarySpec.INVERSE_QFT:
        return apply_inverse_qft(state)
    if spec.kind == UnitarySpec.CONTROL_DENSE:
        if spec.matrix.shape[0] != state.layout.control_dim:
            raise ValidationError(
                f"control matrix of dimension {spec.matrix.shape[0]} does not match "
                f"register dimension {state.layout.control_dim}"
            )
        return state._replace_amplitudes(spec.matrix @ state.amplitudes)
    if spec.kind == UnitarySpec.FULL_DENSE:
        dim = state.layout.control_dim * state.layout.target_dim
        if spec.matrix.shape[0] != dim:
            raise ValidationError(
                f"full-space matrix of dimension {spec.matrix.shape[0]} does not match "
                f"state dimension {dim}"
            )
        amp = state.amplitudes
        if state.basis == TARGET_EIGENBASIS:
            if eig is None:
                raise ValidationError(
                    "full-space unitaries on eigenbasis states need the eigensystem"
                )
            amp = _eigen_to_standard(amp, eig)
        flat = spec.matrix @ amp.reshape(dim)
        amp = flat.reshape(state.amplitudes.shape)
        if state.basis == TARGET_EIGENBASIS:
            amp = _standard_to_eigen(amp, eig)
        return state._replace_amplitudes(amp)
    raise ValidationError(f"unknown unitary kind {spec.kind!r}")


def run_schedule(schedule: AlgorithmSchedule, eig: EigenSystem) -> StateVector:
    """Evaluate the full algorithm product on the schedule's initial state."""
    if eig.n != schedule.layout.target_dim:
        raise ValidationError(
            f"eigensystem dimension {eig.n} does not match schedule target dimension "
            f"{schedule.layout.target_dim}"
        )
    state = apply_unitary(schedule.initial_state, schedule.initial_unitary, eig)
    for step in schedule.steps:
        state = apply_power_query(state, step.control_bit, step.power, eig)
        state = apply_unitary(state, step.unitary, eig)
    return state


# --------------------------------------------------------------------------
# Measurement
# --------------------------------------------------------------------------

CONTROL_ONLY = "control-only"
JOINT_STANDARD = "joint-standard-basis"


@dataclass(frozen=True)
class MeasurementDistribution:
    """Exact outcome probabilities with integer outcome labels."""

    probabilities: np.ndarray
    labels: np.ndarray
    scope: str

    def __post_init__(self):
        if np.any(self.probabilities < -1e-12):
            raise ValidationError("negative probability in measurement distribution")
        total = float(self.probabilities.sum())
        if abs(total - 1.0) > 1e-10:
            raise ValidationError(f"probabilities sum to {total!r}, expected 1 within 1e-10")

    def dump_csv(self) -> str:
        """Two-column dump: outcome label and probability at full precision."""
        lines = ["outcome,probability"]
        for label, p in zip(self.labels, self.probabilities):
            lines.append(f"{int(label)},{format(float(p), '.17g')}")
        return "\n".join(lines) + "\n"


def measurement_distribution(state: StateVector, scope: str = CONTROL_ONLY,
                             eig: EigenSystem | None = None) -> MeasurementDistribution:
    """Exact measurement statistics of the state.

    control-only marginalizes the target register; joint-standard-basis
    rotates the target axis to the standard basis first and reports one
    probability per (control, target) pair, flattened as k * n + x.
    """
    amp = state.amplitudes
    if scope == CONTROL_ONLY:
        probs = np.abs(amp) ** 2
        probs = probs.sum(axis=1)
        labels = np.arange(state.layout.control_dim)
    elif scope == JOINT_STANDARD:
        if state.basis == TARGET_EIGENBASIS:
            if eig is None:
                raise ValidationError("joint standard-basis measurement needs the eigensystem")
            amp = _eigen_to_standard(amp, eig)
        probs = (np.abs(amp) ** 2).reshape(-1)
        labels = np.arange(probs.size)
    else:
        raise ValidationError(f"unknown measurement scope {scope!r}")
    return MeasurementDistribution(probabilities=probs, labels=labels, scope=scope)


def _splitmix64_uniform(seed: int, count: int) -> np.ndarray:
    """`count` doubles in [0,1) from the splitmix64 stream started at `seed`."""
    mask = (1 << 64) - 1
    base = np.uint64(seed & mask)
    steps = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = base + steps * np.uint64(0x9E3779B97F4A7C15)
        z = x
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def sample_outcomes(dist: MeasurementDistribution, count: int, seed: int) -> np.ndarray:
    """Deterministic i.i.d. outcome labels drawn from the distribution."""
    if count < 1:
        raise ValidationError(f"sample count must be >= 1, got {count}")
    u = _splitmix64_uniform(seed, count)
    edges = np.cumsum(dist.probabilities)
    edges[-1] = max(edges[-1], 1.0)
    idx = np.searchsorted(edges, u, side="right")
    return dist.labels[np.minimum(idx, dist.labels.size - 1)]
