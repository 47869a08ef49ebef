"""Trigonometric-polynomial structure of power-query algorithms with constant potential.

For a constant potential the final-state amplitudes are trigonometric
polynomials in the potential value: a table of complex coefficients indexed
by (outcome, eigenvector, frequency), with the frequency set growing by one
doubling per query.  Measurement probabilities of outcome blocks are then
trigonometric polynomials over the difference-frequency set, with a universal
bound on their coefficients.  This module tracks both expansions exactly and
cross-checks them by least-squares fitting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import EigenSystem
from .errors import (ConditioningError, NumericalError, SimulationLimitError,
                     ValidationError)
from .quantum import (AlgorithmSchedule, RegisterLayout, StateVector,
                      UnitarySpec, _walsh_hadamard_rows, apply_unitary)

DEFAULT_ENTRY_LIMIT = 2 ** 22
PRUNE_TOL = 1e-15
NORM_DRIFT_TOL = 1e-12
BLOCK_BOUND_TOL = 1e-10
CONDITION_LIMIT = 1e12
BASIS_PERIOD = 4.0 * np.pi  # every basis function exp(i l q / 2) has this period in q
BRUTE_FORCE_PAIR_LIMIT = 2 ** 22


# --------------------------------------------------------------------------
# Frequency sets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencySet:
    """Amplitude frequencies (m_set) and probability frequencies (l_set) of a power sequence."""

    powers: tuple[int, ...]
    m_set: tuple[int, ...]
    l_set: tuple[int, ...]

    @property
    def query_count(self) -> int:
        return len(self.powers)

    @property
    def sharp(self) -> bool:
        """Whether l_set reaches its maximal cardinality 3^T."""
        return len(self.l_set) == 3 ** len(self.powers)


def frequency_sets(powers) -> FrequencySet:
    """Build both frequency sets by their recursions.

    m_set doubles by shifted union (m -> {m, m + p}); l_set grows by
    l -> {l, l + p, l - p}.  The recursion result for l_set is verified
    against the brute-force difference set of m_set whenever that is cheap.
    """
    powers = tuple(int(p) for p in powers)
    if not powers:
        raise ValidationError("the power sequence must be nonempty")
    if any(p < 1 for p in powers):
        raise ValidationError(f"powers must be positive integers, got {powers}")
    m_set = {0}
    l_set = {0}
    for p in powers:
        m_set |= {m + p for m in m_set}
        l_set = {x for l in l_set for x in (l, l + p, l - p)}
    if len(m_set) ** 2 <= BRUTE_FORCE_PAIR_LIMIT:
        diffs = {m1 - m2 for m1 in m_set for m2 in m_set}
        if diffs != l_set:
            raise NumericalError(
                "difference-frequency recursion disagrees with the brute-force "
                f"difference set for powers {powers}"
            )
    return FrequencySet(powers=powers, m_set=tuple(sorted(m_set)), l_set=tuple(sorted(l_set)))


def probability_frequencies(powers) -> tuple[int, ...]:
    """l_set of a power sequence, including the zero-query base case {0}."""
    return frequency_sets(powers).l_set if powers else (0,)


# --------------------------------------------------------------------------
# Symbolic coefficient propagation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrigCoefficients:
    """Frequency expansion of a final state: table[m_index, control, eigenvector].

    The amplitude at (control k, eigenvector s) for potential value q is
    sum_m table[m][k, s] * exp(i m q / 2).  The total squared magnitude is 1
    and is recorded after every propagation step in ``norm_history``.
    """

    powers: tuple[int, ...]
    m_values: tuple[int, ...]
    table: np.ndarray  # complex, shape (len(m_values), 2^c, n)
    norm_history: tuple[float, ...]

    @property
    def control_dim(self) -> int:
        return int(self.table.shape[1])

    @property
    def target_dim(self) -> int:
        return int(self.table.shape[2])

    @property
    def outcome_count(self) -> int:
        """Joint outcomes (control index, eigenvector index) flattened as k * n + s0."""
        return self.control_dim * self.target_dim

    def entries(self, tol: float = 0.0) -> dict:
        """Sparse view {(control, eigen index 1-based, frequency): coefficient}."""
        out = {}
        for mi, m in enumerate(self.m_values):
            ks, ss = np.nonzero(np.abs(self.table[mi]) > tol)
            for k, s0 in zip(ks, ss):
                out[(int(k), int(s0) + 1, int(m))] = complex(self.table[mi, k, s0])
        return out

    def squared_norm(self) -> float:
        return float(np.sum(np.abs(self.table) ** 2))

    def joint_table(self) -> np.ndarray:
        """Coefficients reshaped to (joint outcome, m index)."""
        return self.table.transpose(1, 2, 0).reshape(self.outcome_count, len(self.m_values))


def _apply_unitary_to_table(table: np.ndarray, spec: UnitarySpec,
                            eig: EigenSystem) -> np.ndarray:
    """Apply a fixed unitary to every frequency slice of the coefficient table."""
    m_count, control_dim, target_dim = table.shape
    if spec.kind == UnitarySpec.IDENTITY:
        return table
    if spec.kind == UnitarySpec.HADAMARD_LAYER:
        moved = np.moveaxis(table, 1, 0).reshape(control_dim, m_count * target_dim)
        out = _walsh_hadamard_rows(moved)
        return np.moveaxis(out.reshape(control_dim, m_count, target_dim), 0, 1)
    if spec.kind == UnitarySpec.INVERSE_QFT:
        return np.fft.fft(table, axis=1) / np.sqrt(control_dim)
    if spec.kind == UnitarySpec.CONTROL_DENSE:
        if spec.matrix.shape[0] != control_dim:
            raise ValidationError(
                f"control matrix of dimension {spec.matrix.shape[0]} does not match "
                f"register dimension {control_dim}"
            )
        return np.einsum("ab,mbn->man", spec.matrix, table)
    if spec.kind == UnitarySpec.FULL_DENSE:
        dim = control_dim * target_dim
        if spec.matrix.shape[0] != dim:
            raise ValidationError(
                f"full-space matrix of dimension {spec.matrix.shape[0]} does not match "
                f"state dimension {dim}"
            )
        std = table @ eig.eigenvectors.T
        flat = std.reshape(m_count, dim) @ spec.matrix.T
        return flat.reshape(m_count, control_dim, target_dim) @ eig.eigenvectors
    raise ValidationError(f"unknown unitary kind {spec.kind!r}")


def symbolic_run(schedule: AlgorithmSchedule, eig: EigenSystem,
                 entry_limit: int = DEFAULT_ENTRY_LIMIT,
                 prune_tol: float = PRUNE_TOL) -> TrigCoefficients:
    """Propagate the frequency expansion through the whole schedule.

    A power query moves the coefficients of control rows with the queried bit
    set up by its power while multiplying in the eigenvector's unit phase
    factor; fixed unitaries mix coefficients within each frequency slice.
    Entries below ``prune_tol`` in magnitude are zeroed after each unitary.
    The squared-coefficient sum must stay at 1 throughout; any drift beyond
    1e-12 raises.
    """
    if eig.constant_q is None or eig.phase_factors is None:
        raise ValidationError(
            "symbolic propagation needs an eigensystem from a constant-potential family"
        )
    layout = schedule.layout
    if eig.n != layout.target_dim:
        raise ValidationError(
            f"eigensystem dimension {eig.n} does not match schedule target dimension "
            f"{layout.target_dim}"
        )
    kinetic = eig.kinetic_eigenvalues

    start = apply_unitary(schedule.initial_state, schedule.initial_unitary, eig)
    if start.basis != "target-eigenbasis":
        raise ValidationError("symbolic propagation requires an eigenbasis initial state")
    m_values = [0]
    table = start.amplitudes[None, :, :].astype(complex)
    history = [float(np.sum(np.abs(table) ** 2))]

    control = np.arange(layout.control_dim)
    for step_index, step in enumerate(schedule.steps, start=1):
        p = step.power
        new_values = sorted(set(m_values) | {m + p for m in m_values})
        if len(new_values) * layout.control_dim * layout.target_dim > entry_limit:
            raise SimulationLimitError(
                f"step {step_index}: coefficient table of "
                f"{len(new_values) * layout.control_dim * layout.target_dim} entries "
                f"exceeds the limit of {entry_limit}"
            )
        position = {m: i for i, m in enumerate(new_values)}
        hold = layout.bit_value(control, step.control_bit) == 0
        shift = ~hold
        phase = np.exp(0.5j * p * kinetic)
        new_table = np.zeros((len(new_values), layout.control_dim, layout.target_dim),
                             dtype=complex)
        for mi, m in enumerate(m_values):
            new_table[position[m]][hold] += table[mi][hold]
            new_table[position[m + p]][shift] += table[mi][shift] * phase[None, :]
        m_values = new_values
        table = new_table
        history.append(float(np.sum(np.abs(table) ** 2)))

        table = _apply_unitary_to_table(table, step.unitary, eig)
        if prune_tol > 0:
            table[np.abs(table) < prune_tol] = 0
        history.append(float(np.sum(np.abs(table) ** 2)))

    for step_number, value in enumerate(history):
        if abs(value - 1.0) > NORM_DRIFT_TOL:
            raise NumericalError(
                f"coefficient normalization drifted to {value!r} at propagation step "
                f"{step_number}"
            )
    return TrigCoefficients(
        powers=schedule.powers,
        m_values=tuple(m_values),
        table=table,
        norm_history=tuple(history),
    )


def evaluate_symbolic(coeffs: TrigCoefficients, q: float) -> StateVector:
    """Evaluate the frequency expansion at a potential value in [0,1)."""
    if not 0.0 <= q < 1.0:
        raise ValidationError(f"potential value must lie in [0,1), got {q}")
    phases = np.exp(0.5j * q * np.asarray(coeffs.m_values, dtype=float))
    amp = np.tensordot(phases, coeffs.table, axes=([0], [0]))
    layout = RegisterLayout(control_qubits=(coeffs.control_dim - 1).bit_length(),
                            target_dim=coeffs.target_dim)
    return StateVector(layout=layout, amplitudes=amp)


# --------------------------------------------------------------------------
# Block probability coefficients
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BetaCoefficients:
    """Trigonometric coefficients of block measurement probabilities.

    ``table[b, i]`` is the coefficient of exp(i l_values[i] q / 2) in the
    probability of measuring an outcome from block b.  For every frequency
    the block magnitudes sum to at most 1, and opposite frequencies carry
    conjugate coefficients, keeping the probabilities real.
    """

    l_values: tuple[int, ...]
    table: np.ndarray  # complex, shape (num_blocks, len(l_values))
    block_sizes: tuple[int, ...]

    @property
    def block_count(self) -> int:
        return int(self.table.shape[0])

    def entries(self, tol: float = 0.0) -> dict:
        out = {}
        for b in range(self.block_count):
            for i, l in enumerate(self.l_values):
                if abs(self.table[b, i]) > tol:
                    out[(b, l)] = complex(self.table[b, i])
        return out

    def block_probability(self, block: int, q) -> np.ndarray | float:
        """Probability of the block as a function of the potential value."""
        qs = np.atleast_1d(np.asarray(q, dtype=float))
        phases = np.exp(0.5j * np.outer(qs, np.asarray(self.l_values, dtype=float)))
        vals = (phases @ self.table[block]).real
        return float(vals[0]) if np.ndim(q) == 0 else vals


def beta_coefficients(coeffs: TrigCoefficients, partition) -> BetaCoefficients:
    """Difference-frequency coefficients of every block of a joint-outcome partition.

    Blocks are sets of flattened joint outcomes (control * n + eigenindex).
    The coefficient for block B at frequency l collects conj(c_m) * c_{m+l}
    over the block's outcomes, computed by FFT autocorrelation along the
    frequency axis.
    """
    blocks = [np.asarray(sorted(block), dtype=int) for block in partition]
    total = coeffs.outcome_count
    seen = np.concatenate(blocks) if blocks else np.array([], dtype=int)
    in_range = seen[(seen >= 0) & (seen < total)]
    if seen.size != total or in_range.size != seen.size or \
            np.unique(seen).size != seen.size:
        counts = np.bincount(in_range, minlength=total)
        missing = np.nonzero(counts == 0)[0][:8].tolist()
        doubled = np.nonzero(counts > 1)[0][:8].tolist()
        raise ValidationError(
            f"blocks do not partition the {total} outcomes "
            f"(missing {missing}, duplicated {doubled})"
        )

    m = np.asarray(coeffs.m_values)
    span = int(m.max() - m.min() + 1)
    dense = np.zeros((total, span), dtype=complex)
    dense[:, m - m.min()] = coeffs.joint_table()
    nfft = 2 * span
    spectrum = np.abs(np.fft.fft(dense, nfft, axis=1)) ** 2
    correlation = np.fft.ifft(spectrum, axis=1)

    l_values = probability_frequencies(coeffs.powers)
    cols = np.asarray(l_values) % nfft
    table = np.empty((len(blocks), len(l_values)), dtype=complex)
    for b, block in enumerate(blocks):
        table[b] = correlation[block][:, cols].sum(axis=0)

    sums = np.abs(table).sum(axis=0)
    if sums.max() > 1.0 + BLOCK_BOUND_TOL:
        worst = int(np.argmax(sums))
        raise NumericalError(
            f"block coefficient magnitudes sum to {sums[worst]!r} at frequency "
            f"{l_values[worst]}, above 1"
        )
    flipped = {l: i for i, l in enumerate(l_values)}
    mirror = [flipped[-l] for l in l_values]
    if np.abs(table - np.conj(table[:, mirror])).max() > BLOCK_BOUND_TOL:
        raise NumericalError("block coefficients are not conjugate-symmetric in frequency")
    return BetaCoefficients(l_values=l_values, table=table,
                            block_sizes=tuple(len(b) for b in blocks))


def control_partition(coeffs: TrigCoefficients, control_blocks) -> list[np.ndarray]:
    """Expand a partition of control outcomes to joint outcomes (all eigenvectors)."""
    n = coeffs.target_dim
    out = []
    for block in control_blocks:
        ks = np.asarray(sorted(block), dtype=int)
        out.append((ks[:, None] * n + np.arange(n)[None, :]).reshape(-1))
    return out


# --------------------------------------------------------------------------
# Least-squares confirmation of the frequency support
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    frequencies: tuple[int, ...]
    coefficients: np.ndarray
    residual: float
    condition: float
    rank: int

    def evaluate(self, q) -> np.ndarray:
        qs = np.asarray(q, dtype=float)
        basis = np.exp(0.5j * np.outer(qs, np.asarray(self.frequencies, dtype=float)))
        return basis @ self.coefficients


def fit_sample_grid(count: int = 1024) -> np.ndarray:
    """Uniform sample positions covering one full period of the basis."""
    if count < 1:
        raise ValidationError(f"grid size must be >= 1, got {count}")
    return np.arange(count) * (BASIS_PERIOD / count)


def fit_trig_poly(samples, frequencies) -> FitResult:
    """Least-squares fit of probability samples against exp(i l q / 2) basis functions.

    ``samples`` is a sequence of (q, p) pairs with q anywhere within one basis
    period; ``frequencies`` is an integer frequency list (or a FrequencySet,
    whose l_set is used).  The residual is the root-mean-square misfit.
    """
    if isinstance(frequencies, FrequencySet):
        frequencies = frequencies.l_set
    freqs = tuple(int(l) for l in frequencies)
    if not freqs:
        raise ValidationError("the frequency support must be nonempty")
    pairs = [(float(q), float(p)) for q, p in samples]
    if len(pairs) < 2 * len(freqs):
        raise ValidationError(
            f"need at least {2 * len(freqs)} samples for {len(freqs)} frequencies, "
            f"got {len(pairs)}"
        )
    qs = np.array([q for q, _ in pairs])
    ps = np.array([p for _, p in pairs], dtype=complex)
    if np.unique(qs).size != qs.size:
        raise ValidationError("sample positions must be distinct")
    basis = np.exp(0.5j * np.outer(qs, np.asarray(freqs, dtype=float)))
    coeff, _, rank, singular = np.linalg.lstsq(basis, ps, rcond=None)
    condition = float("inf") if singular[-1] == 0 else float(singular[0] / singular[-1])
    if condition > CONDITION_LIMIT:
        raise ConditioningError(
            f"basis condition estimate {condition:.3e} exceeds {CONDITION_LIMIT:.0e}; "
            "use a denser or wider sample grid"
        )
    residual = float(np.sqrt(np.mean(np.abs(ps - basis @ coeff) ** 2)))
    return FitResult(frequencies=freqs, coefficients=coeff, residual=residual,
                     condition=condition, rank=int(rank))
