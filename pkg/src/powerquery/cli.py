"""Command-line front end: reproducible runs with CSV/JSON payloads on stdout.

Exit codes: 0 success, 1 validation or usage error, 2 premise failure in the
lower-bound audit, 3 internal numerical or I/O failure.  All randomness is
seeded (default 0), progress and timings go to stderr, and identical
invocations produce byte-identical payloads.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .discretization import (build_matrix, constant_eigensystem,
                             discretization_error_study, parse_potential,
                             solve_eigensystem)
from .errors import NumericalError, ValidationError
from .frequency import frequency_sets, symbolic_run
from .lowerbound import (LAMBDA_MAP_CONTINUUM, LAMBDA_MAP_DISCRETE,
                         lower_bound_audit, matched_epsilon)
from .phase_estimation import (MODE_EXACT, MODE_PERTURBED, PEConfig,
                               build_pe_schedule, default_q_grid,
                               run_phase_estimation, worst_case_error_sweep)
from .quantum import sample_outcomes
from .reports import PhaseTimer, RunReport, emit_report, render_csv

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PREMISE = 2
EXIT_NUMERICAL = 3


class _CliParser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{message}\n{self.format_usage().rstrip()}")


def _build_parser() -> _CliParser:
    parser = _CliParser(prog="powerquery", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    def add_common(p):
        p.add_argument("--config", help="JSON file with flag defaults (flags override)")
        p.add_argument("--output", help="write the payload to this path instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default=None)

    p = sub.add_parser("discretize", help="build the finite-difference matrix or an error study")
    p.add_argument("--q", dest="potential", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--n-list", dest="n_list", default=None,
                   help="comma-separated grid sizes for the error study")
    add_common(p)

    p = sub.add_parser("eigensolve", help="solve the full eigensystem")
    p.add_argument("--q", dest="potential", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--vectors", action="store_true", help="include eigenvectors in JSON output")
    add_common(p)

    p = sub.add_parser("phase-estimate", help="run phase estimation for one configuration")
    p.add_argument("--q", dest="potential", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--T", dest="queries", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--mode", default=None, help="exact or perturbed:OVERLAP")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    add_common(p)

    p = sub.add_parser("error-sweep", help="worst-case error estimates over a range of T")
    p.add_argument("--T-range", dest="t_range", default=None, help="inclusive range A:B")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--grid", type=int, default=None, help="number of potential grid points")
    p.add_argument("--threshold", type=float, default=None)
    add_common(p)

    p = sub.add_parser("freq-audit", help="frequency sets of a power sequence")
    p.add_argument("--powers", default=None, help="comma-separated positive integers")
    p.add_argument("--pe-T", dest="pe_queries", type=int, default=None,
                   help="audit the T-query phase-estimation power sequence instead")
    p.add_argument("--n", type=int, default=None,
                   help="target dimension for --dump-coefficients")
    p.add_argument("--dump-coefficients", dest="dump_coefficients", default=None,
                   help="write the symbolic coefficient table (k,s,m,re,im) to this CSV path")
    add_common(p)

    p = sub.add_parser("lowerbound-audit", help="verify the lower-bound inequality chain")
    p.add_argument("--T", dest="queries", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--epsilon", default=None, help="'auto' for 4*pi*2^-T, or a number")
    p.add_argument("--lambda-map", dest="lambda_map",
                   choices=(LAMBDA_MAP_DISCRETE, LAMBDA_MAP_CONTINUUM), default=None)
    p.add_argument("--report", default=None, help="alias for --output")
    add_common(p)

    return parser


# config-file keys use the flag spellings; map them to parser destinations
_KEY_ALIASES = {
    "q": "potential",
    "T": "queries",
    "pe_T": "pe_queries",
    "T_range": "t_range",
}

_FLAG_NAMES = {
    "potential": "--q",
    "queries": "--T",
    "pe_queries": "--pe-T",
    "t_range": "--T-range",
}


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")
    out = {}
    for key, value in data.items():
        key = str(key).replace("-", "_")
        out[_KEY_ALIASES.get(key, key)] = value
    return out


def _resolve(args, config, key, default=None, required=False, cast=None):
    value = getattr(args, key, None)
    if value is None or value is False:  # store_true flags default to False
        value = config.get(key, default if value is None else value)
    if value is None and required:
        flag = _FLAG_NAMES.get(key, "--" + key.replace("_", "-"))
        raise ValidationError(f"missing required parameter {flag}")
    if cast is not None and value is not None:
        try:
            value = cast(value)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad value for {key}: {exc}") from None
    return value


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in str(text).split(",") if tok.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad integer list {text!r}: {exc}") from None


# --------------------------------------------------------------------------
# Subcommand handlers
# --------------------------------------------------------------------------

def _cmd_discretize(args, config) -> RunReport:
    timer = PhaseTimer()
    potential_text = _resolve(args, config, "potential", required=True, cast=str)
    potential = parse_potential(potential_text)
    n_list_text = _resolve(args, config, "n_list")
    timer.lap("setup")
    if n_list_text:
        if potential.kind != "constant":
            raise ValidationError("the error study is defined for constant potentials")
        n_list = _parse_int_list(n_list_text)
        rows = discretization_error_study(potential.value, n_list)
        timer.lap("compute")
        return RunReport(
            command="discretize",
            config={"q": potential_text, "n_list": n_list},
            results={"rows": [
                {"n": r.n, "lambda_continuum": r.lambda_continuum,
                 "lambda_discrete": r.lambda_discrete, "error": r.error,
                 "scaled_error": r.scaled_error}
                for r in rows
            ]},
            csv_header=["n", "lambda_continuum", "lambda_discrete", "error", "scaled_error"],
            csv_rows=[[r.n, r.lambda_continuum, r.lambda_discrete, r.error, r.scaled_error]
                      for r in rows],
            timings=timer.timings,
        )
    n = _resolve(args, config, "n", required=True, cast=int)
    system = build_matrix(potential, n)
    timer.lap("compute")
    return RunReport(
        command="discretize",
        config={"q": potential_text, "n": n},
        results={"n": n, "diag": list(system.diag), "offdiag": system.offdiag},
        csv_header=["j", "diag", "offdiag"],
        csv_rows=[[j + 1, system.diag[j], system.offdiag] for j in range(n)],
        timings=timer.timings,
    )


def _cmd_eigensolve(args, config) -> RunReport:
    timer = PhaseTimer()
    potential_text = _resolve(args, config, "potential", required=True, cast=str)
    potential = parse_potential(potential_text)
    n = _resolve(args, config, "n", required=True, cast=int)
    tol = _resolve(args, config, "tol", default=1e-12, cast=float)
    want_vectors = bool(_resolve(args, config, "vectors", default=False))
    system = build_matrix(potential, n)
    timer.lap("setup")
    eig = solve_eigensystem(system, tol=tol)
    gram_dev = float(np.abs(eig.eigenvectors.T @ eig.eigenvectors - np.eye(n)).max())
    residual = float(np.abs(system.matvec(eig.eigenvectors)
                            - eig.eigenvectors * eig.eigenvalues[None, :]).max()) / system.scale
    timer.lap("compute")
    results = {
        "n": n,
        "tol": tol,
        "eigenvalues": list(eig.eigenvalues),
        "orthonormality_deviation": gram_dev,
        "relative_residual": residual,
    }
    if want_vectors:
        results["eigenvectors"] = [list(eig.eigenvectors[:, s]) for s in range(n)]
    return RunReport(
        command="eigensolve",
        config={"q": potential_text, "n": n, "tol": tol},
        results=results,
        csv_header=["s", "eigenvalue"],
        csv_rows=[[s + 1, eig.eigenvalues[s]] for s in range(n)],
        timings=timer.timings,
    )


def _parse_mode(text: str) -> tuple[str, float]:
    if text in (None, "", "exact", MODE_EXACT):
        return MODE_EXACT, 1.0
    if text == MODE_PERTURBED:
        raise ValidationError("perturbed mode needs an overlap: use perturbed:OVERLAP")
    if text.startswith("perturbed:"):
        try:
            return MODE_PERTURBED, float(text.split(":", 1)[1])
        except ValueError as exc:
            raise ValidationError(f"bad overlap in mode {text!r}: {exc}") from None
    raise ValidationError(f"unknown mode {text!r} (use exact or perturbed:OVERLAP)")


def _cmd_phase_estimate(args, config) -> RunReport:
    timer = PhaseTimer()
    potential_text = _resolve(args, config, "potential", required=True, cast=str)
    potential = parse_potential(potential_text)
    n = _resolve(args, config, "n", required=True, cast=int)
    queries = _resolve(args, config, "queries", required=True, cast=int)
    epsilon = _resolve(args, config, "epsilon", required=True, cast=float)
    mode_text = _resolve(args, config, "mode", default="exact", cast=str)
    seed = _resolve(args, config, "seed", default=0, cast=int)
    samples = _resolve(args, config, "samples", default=0, cast=int)
    mode, overlap = _parse_mode(mode_text)
    cfg = PEConfig(queries=queries, grid_size=n, potential=potential,
                   epsilon=epsilon, mode=mode, overlap=overlap)
    timer.lap("setup")
    result = run_phase_estimation(cfg)
    probs = result.distribution.probabilities
    counts = np.zeros(probs.size, dtype=int)
    drawn = []
    if samples > 0:
        drawn = sample_outcomes(result.distribution, samples, seed)
        counts = np.bincount(drawn, minlength=probs.size)
    timer.lap("compute")
    outcome_rows = [
        {"outcome": int(k), "lambda_estimate": float(result.lambda_estimates[k]),
         "probability": float(probs[k])}
        for k in range(probs.size)
    ]
    results = {
        "lambda_true": result.lambda_true,
        "phase": result.phase,
        "epsilon": epsilon,
        "success_probability": result.success_probability,
        "outcomes": outcome_rows,
    }
    if samples > 0:
        results["samples"] = [int(v) for v in drawn]
    header = ["outcome", "lambda_estimate", "probability"]
    rows = [[k, result.lambda_estimates[k], probs[k]] for k in range(probs.size)]
    if samples > 0:
        header.append("sample_count")
        for k in range(probs.size):
            rows[k].append(int(counts[k]))
    return RunReport(
        command="phase-estimate",
        config={"q": potential_text, "n": n, "T": queries, "epsilon": epsilon,
                "mode": mode_text, "seed": seed, "samples": samples},
        results=results,
        csv_header=header,
        csv_rows=rows,
        timings=timer.timings,
    )


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(tok) for tok in str(text).split(":"))
    except ValueError:
        raise ValidationError(f"bad range {text!r}, expected A:B") from None
    if lo < 1 or hi < lo:
        raise ValidationError(f"bad range {text!r}: need 1 <= A <= B")
    return lo, hi


def _cmd_error_sweep(args, config) -> RunReport:
    timer = PhaseTimer()
    t_range = _resolve(args, config, "t_range", required=True, cast=str)
    lo, hi = _parse_range(t_range)
    n = _resolve(args, config, "n", default=16, cast=int)
    grid = _resolve(args, config, "grid", default=64, cast=int)
    threshold = _resolve(args, config, "threshold", default=0.75, cast=float)
    q_values = default_q_grid(grid)
    timer.lap("setup")
    rows = []
    for queries in range(lo, hi + 1):
        report = worst_case_error_sweep(queries, n, q_values, threshold)
        rows.append([queries, report.epsilon_achieved, report.success_probability_min])
        print(f"progress error-sweep T={queries} done", file=sys.stderr)
    timer.lap("compute")
    return RunReport(
        command="error-sweep",
        config={"T_range": [lo, hi], "n": n, "grid": grid, "threshold": threshold},
        results={"rows": [
            {"T": r[0], "epsilon_achieved": r[1], "min_success_prob": r[2]} for r in rows
        ]},
        csv_header=["T", "epsilon_achieved", "min_success_prob"],
        csv_rows=rows,
        timings=timer.timings,
    )


def _cmd_freq_audit(args, config) -> RunReport:
    timer = PhaseTimer()
    powers_text = _resolve(args, config, "powers")
    pe_queries = _resolve(args, config, "pe_queries", cast=int)
    if (powers_text is None) == (pe_queries is None):
        raise ValidationError("give exactly one of --powers or --pe-T")
    if pe_queries is not None:
        if pe_queries < 1:
            raise ValidationError(f"--pe-T must be >= 1, got {pe_queries}")
        powers = [1 << j for j in range(pe_queries)]
    else:
        powers = _parse_int_list(powers_text)
    fs = frequency_sets(powers)
    timer.lap("compute")

    dump_path = _resolve(args, config, "dump_coefficients")
    if dump_path:
        if pe_queries is None:
            raise ValidationError("--dump-coefficients needs --pe-T (a concrete schedule)")
        n = _resolve(args, config, "n", required=True, cast=int)
        schedule = build_pe_schedule(pe_queries, n)
        coeffs = symbolic_run(schedule, constant_eigensystem(0.0, n))
        rows = []
        for mi, m in enumerate(coeffs.m_values):
            ks, ss = np.nonzero(np.abs(coeffs.table[mi]) > 0)
            for k, s0 in zip(ks, ss):
                value = coeffs.table[mi, k, s0]
                rows.append([int(k), int(s0) + 1, int(m), value.real, value.imag])
        rows.sort(key=lambda r: (r[0], r[1], r[2]))
        with open(dump_path, "w", newline="") as fh:
            fh.write(render_csv(["k", "s", "m", "re", "im"], rows))
        timer.lap("dump")

    t = len(fs.powers)
    return RunReport(
        command="freq-audit",
        config={"powers": list(fs.powers)},
        results={
            "powers": list(fs.powers),
            "m_set": list(fs.m_set),
            "l_set": list(fs.l_set),
            "m_cardinality": len(fs.m_set),
            "l_cardinality": len(fs.l_set),
            "l_cardinality_bound": 3 ** t,
            "sharp": fs.sharp,
        },
        csv_header=["set", "index", "value"],
        csv_rows=([["m", i, v] for i, v in enumerate(fs.m_set)]
                  + [["l", i, v] for i, v in enumerate(fs.l_set)]),
        timings=timer.timings,
    )


def _cmd_lowerbound_audit(args, config) -> RunReport:
    timer = PhaseTimer()
    queries = _resolve(args, config, "queries", required=True, cast=int)
    n = _resolve(args, config, "n", required=True, cast=int)
    eps_text = _resolve(args, config, "epsilon", default="auto", cast=str)
    lambda_map = _resolve(args, config, "lambda_map", default=LAMBDA_MAP_DISCRETE, cast=str)
    if eps_text == "auto":
        epsilon = matched_epsilon(queries)
    else:
        try:
            epsilon = float(eps_text)
        except ValueError:
            raise ValidationError(f"bad epsilon {eps_text!r}: use 'auto' or a number") from None
    schedule = build_pe_schedule(queries, n)
    timer.lap("setup")
    audit = lower_bound_audit(
        schedule,
        lambda q: constant_eigensystem(q, n),
        epsilon,
        lambda_map=lambda_map,
    )
    timer.lap("compute")
    dft = None
    if audit.dft_values is not None:
        dft = [[[v.real, v.imag] for v in row] for row in audit.dft_values]
    results = {
        "grid_size": audit.grid_size,
        "epsilon": audit.epsilon,
        "lambda_map": audit.lambda_map,
        "premise_ok": audit.premise_ok,
        "all_passed": audit.all_passed,
        "verdicts": dict(audit.verdicts),
        "r_below_census": audit.r_below_census,
        "frequency_count": audit.frequency_count,
        "max_gap_width": audit.max_gap_width,
        "chosen_k": audit.chosen_k,
        "x_points": list(audit.x_points),
        "lambda_targets": list(audit.lambda_targets),
        "answer_sets": [list(a) for a in audit.answer_sets],
        "success_diagonal": list(audit.success_diagonal),
        "stray_mass": list(audit.stray_mass),
        "projected_frequencies": list(audit.projected),
        "dft_deviation": audit.dft_deviation,
        "dft": dft,
    }
    report = RunReport(
        command="lowerbound-audit",
        config={"T": queries, "n": n, "epsilon": epsilon, "lambda_map": lambda_map},
        results=results,
        timings=timer.timings,
    )
    report.exit_code = EXIT_OK if audit.premise_ok else EXIT_PREMISE
    return report


_HANDLERS = {
    "discretize": _cmd_discretize,
    "eigensolve": _cmd_eigensolve,
    "phase-estimate": _cmd_phase_estimate,
    "error-sweep": _cmd_error_sweep,
    "freq-audit": _cmd_freq_audit,
    "lowerbound-audit": _cmd_lowerbound_audit,
}

_DEFAULT_FORMATS = {
    "discretize": "json",
    "eigensolve": "json",
    "phase-estimate": "json",
    "error-sweep": "csv",
    "freq-audit": "json",
    "lowerbound-audit": "json",
}


def parse_and_dispatch(argv) -> RunReport:
    """Validate, execute, and emit one subcommand; returns the run report."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        raise ValidationError(parser.format_usage().rstrip())
    config = _load_config(getattr(args, "config", None))
    report = _HANDLERS[args.command](args, config)
    fmt = _resolve(args, config, "format", default=_DEFAULT_FORMATS[args.command], cast=str)
    output = _resolve(args, config, "output", cast=str)
    if args.command == "lowerbound-audit" and output is None:
        output = _resolve(args, config, "report", cast=str)
    emit_report(report, fmt, output)
    return report


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        report = parse_and_dispatch(argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return getattr(report, "exit_code", EXIT_OK)


if __name__ == "__main__":
    sys.exit(main())
