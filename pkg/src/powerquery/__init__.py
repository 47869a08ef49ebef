"""Power-query phase estimation for the Sturm-Liouville ground-state problem.

A state-vector simulator for algorithms built from controlled powers of the
discretized propagator, the phase-estimation schedule on top of it, the exact
trigonometric-polynomial expansion of its outcome statistics, and a numerical
audit of the query-count lower bound.
"""

from .discretization import (EigenSystem, ErrorStudyRow, PotentialSpec,
                             TridiagonalSystem, build_matrix,
                             constant_eigensystem, continuum_eigenvalue,
                             discretization_error_study, parse_potential,
                             smallest_eigenvalue, solve_eigensystem)
from .errors import (ConditioningError, NumericalError, SimulationLimitError,
                     ValidationError)
from .frequency import (BetaCoefficients, FrequencySet, TrigCoefficients,
                        beta_coefficients, control_partition, evaluate_symbolic,
                        fit_sample_grid, fit_trig_poly, frequency_sets,
                        probability_frequencies, symbolic_run)
from .lowerbound import (GapAudit, gap_audit, grid_size_for_accuracy,
                         lower_bound_audit, matched_epsilon,
                         project_frequencies)
from .phase_estimation import (ErrorReport, OutcomeDecoder, PEConfig, PEResult,
                               ScalingRow, build_pe_schedule, decode_eigenvalue,
                               decode_phase, default_q_grid,
                               query_count_scaling, run_phase_estimation,
                               worst_case_error_sweep)
from .quantum import (AlgorithmSchedule, MeasurementDistribution, QueryStep,
                      RegisterLayout, StateVector, UnitarySpec,
                      apply_hadamard_layer, apply_inverse_qft,
                      apply_power_query, apply_unitary, init_state,
                      measurement_distribution, run_schedule, sample_outcomes)
from .reports import __version__

__all__ = [
    "AlgorithmSchedule",
    "BetaCoefficients",
    "ConditioningError",
    "EigenSystem",
    "ErrorReport",
    "ErrorStudyRow",
    "FrequencySet",
    "GapAudit",
    "MeasurementDistribution",
    "NumericalError",
    "OutcomeDecoder",
    "PEConfig",
    "PEResult",
    "PotentialSpec",
    "QueryStep",
    "RegisterLayout",
    "ScalingRow",
    "SimulationLimitError",
    "StateVector",
    "TridiagonalSystem",
    "TrigCoefficients",
    "UnitarySpec",
    "ValidationError",
    "__version__",
    "apply_hadamard_layer",
    "apply_inverse_qft",
    "apply_power_query",
    "apply_unitary",
    "beta_coefficients",
    "build_matrix",
    "build_pe_schedule",
    "constant_eigensystem",
    "continuum_eigenvalue",
    "control_partition",
    "decode_eigenvalue",
    "decode_phase",
    "default_q_grid",
    "discretization_error_study",
    "evaluate_symbolic",
    "fit_sample_grid",
    "fit_trig_poly",
    "frequency_sets",
    "gap_audit",
    "grid_size_for_accuracy",
    "init_state",
    "lower_bound_audit",
    "matched_epsilon",
    "measurement_distribution",
    "parse_potential",
    "probability_frequencies",
    "project_frequencies",
    "query_count_scaling",
    "run_phase_estimation",
    "run_schedule",
    "sample_outcomes",
    "smallest_eigenvalue",
    "solve_eigensystem",
    "symbolic_run",
    "worst_case_error_sweep",
]
