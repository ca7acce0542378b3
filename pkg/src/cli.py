#!/usr/bin/env python3
"""
Command-line Surface

Subcommands:

    propagator              grid of two-point values with cross-representation deltas
    cluster                 cluster-function scan, decay fit, bound and KMS checks
    kms correct             first/second-order corrections and van Hove sweeps
    kms thermal-mass        c(beta)
    kms check shift|reorder|profiles
    verify                  prove and replay the scattering identity corpus

Configuration is layered as defaults < config file < environment < flags.
Keys of the ``run`` section of the config file mirror the flag names.

Exit codes: 0 ok, 2 domain error, 3 numerical/capacity failure,
4 proof failure or failed check.
"""

import argparse
import logging
import math
import re
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO

# Handle both direct execution and package imports
try:
    from .cluster_decay import (
        ClusterScan, bound_from_samples, fit_decay, kms_rearrangement_check, sample_scan,
    )
    from .config import VALID_OUTPUT_FORMATS, Config
    from .exceptions import (
        CapacityError, DomainError, NumericalError, ProofFailure, ThermalConfigError,
    )
    from .exports import (
        PROPAGATOR_COLUMNS, SCAN_COLUMNS, render_csv, render_json, with_metadata, write_text,
    )
    from .kms_perturbation import (
        InteractionSpec, KMSSettings, TimeSmearing, VanHoveProfile, first_order_correction,
        parse_index_range, profile_independence_check, second_order_correction, t_shift_invariance,
        thermal_mass, van_hove_limit, wick_reordering_check,
    )
    from .propagators import (
        ComplexTimeDisplacement, FieldParams, kms_two_point, two_point, vac_two_point_quadrature,
    )
    from .quadrature import QuadratureConfig
    from .scattering import (
        SOUND_RULES, cocycle_check, corrupted_rule_table, identity_corpus, verify_corpus,
    )
except ImportError:
    from cluster_decay import (
        ClusterScan, bound_from_samples, fit_decay, kms_rearrangement_check, sample_scan,
    )
    from config import VALID_OUTPUT_FORMATS, Config
    from exceptions import (
        CapacityError, DomainError, NumericalError, ProofFailure, ThermalConfigError,
    )
    from exports import (
        PROPAGATOR_COLUMNS, SCAN_COLUMNS, render_csv, render_json, with_metadata, write_text,
    )
    from kms_perturbation import (
        InteractionSpec, KMSSettings, TimeSmearing, VanHoveProfile, first_order_correction,
        parse_index_range, profile_independence_check, second_order_correction, t_shift_invariance,
        thermal_mass, van_hove_limit, wick_reordering_check,
    )
    from propagators import (
        ComplexTimeDisplacement, FieldParams, kms_two_point, two_point, vac_two_point_quadrature,
    )
    from quadrature import QuadratureConfig
    from scattering import (
        SOUND_RULES, cocycle_check, corrupted_rule_table, identity_corpus, verify_corpus,
    )

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_NUMERICAL = 3
EXIT_PROOF = 4

PROPAGATOR_GRIDS = {
    "default": {"u": [0.2, 1.0, 3.0], "r": [0.0, 1.0, 5.0], "t": [0.0]},
    "small": {"u": [0.5], "r": [0.0, 1.0], "t": [0.0]},
}
DEFAULT_RADII = "5,6,7,8,9,10"

# Leading-minus values such as -1/8 or -0.3,-0.2 are arguments, not flags
NEGATIVE_VALUE = re.compile(r"^-(\d+\.?\d*|\.\d+)(/\d+)?(,-?(\d+\.?\d*|\.\d+)(/\d+)?)*$")


class CheckFailed(Exception):
    """A verification ran to completion and reported failure."""

    def __init__(self, message: str, document: Any = None):
        super().__init__(message)
        self.document = document


# --- Parsing helpers -------------------------------------------------------

def float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in str(text).split(",") if part.strip()]
    except ValueError as e:
        raise DomainError(f"Expected comma-separated numbers, got {text!r}") from e


def int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in str(text).split(",") if part.strip()]
    except ValueError as e:
        raise DomainError(f"Expected comma-separated integers, got {text!r}") from e


def monomial_power(text: str) -> int:
    """'phi4' -> 4, '1' -> 0."""
    text = str(text).strip().lower()
    if text in ("1", "one", "identity"):
        return 0
    match = re.fullmatch(r"phi\^?(\d+)", text)
    if not match:
        raise DomainError(f"Expected a monomial like phi4 or 1, got {text!r}")
    return int(match.group(1))


def vanhove_indices(text: str) -> List[int]:
    text = str(text)
    if ".." in text:
        return parse_index_range(text)
    return [int(text)]


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_")


# --- Parser ----------------------------------------------------------------

def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON configuration file (default: config.json)")
    common.add_argument("--tolerance", type=float, help="Relative tolerance for certified results")
    common.add_argument("--reproducible", action="store_true",
                        help="Suppress run metadata so repeated runs are byte-identical")
    common.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--output", help="Output file; '-' or omitted writes to standard output")
    common.add_argument("--format", choices=sorted(VALID_OUTPUT_FORMATS), help="Output format")
    common.add_argument("--mass", type=float, help="Field mass m")
    common.add_argument("--beta", help="Inverse temperature; omit or 'inf' for the vacuum")
    return common


def _accept_negative_values(*parsers: argparse.ArgumentParser) -> None:
    for parser in parsers:
        parser._negative_number_matcher = NEGATIVE_VALUE


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="thermal-kms",
        description="Free-field propagators, cluster decay, perturbative KMS states and "
                    "scattering-identity proofs.",
        parents=[common],
    )
    commands = parser.add_subparsers(dest="command", required=True)

    propagator = commands.add_parser("propagator", parents=[common], help="Two-point function grid")
    propagator.add_argument("--grid", choices=sorted(PROPAGATOR_GRIDS), default=argparse.SUPPRESS)
    propagator.add_argument("--u", default=argparse.SUPPRESS, help="Comma-separated imaginary times")
    propagator.add_argument("--r", default=argparse.SUPPRESS, help="Comma-separated radii")
    propagator.add_argument("--t", default=argparse.SUPPRESS, help="Comma-separated real times")
    propagator.set_defaults(handler=cmd_propagator)

    cluster = commands.add_parser("cluster", parents=[common], help="Cluster-function decay scan")
    cluster.add_argument("--powers", default=argparse.SUPPRESS, help="Wick powers a_0,...,a_n (default 2,2)")
    cluster.add_argument("--u", default=argparse.SUPPRESS, help="Imaginary times u_1,...,u_n")
    cluster.add_argument("--radii", default=argparse.SUPPRESS, help=f"Scale parameters (default {DEFAULT_RADII})")
    cluster.add_argument("--ray", choices=["spatial", "imaginary_time"], default=argparse.SUPPRESS)
    cluster.add_argument("--rate", type=float, default=argparse.SUPPRESS,
                         help="Bound rate (default m / sqrt(n))")
    cluster.add_argument("--fit-output", dest="fit_output", default=argparse.SUPPRESS,
                         help="Where to write the fit JSON in csv mode")
    cluster.add_argument("--negative-control", dest="negative_control", action="store_true",
                         default=argparse.SUPPRESS,
                         help="Check the bound at a rate above the fitted one; must report a violation")
    cluster.set_defaults(handler=cmd_cluster)

    kms = commands.add_parser("kms", parents=[common], help="Perturbative KMS corrections")
    kms_commands = kms.add_subparsers(dest="kms_command", required=True)

    correct = kms_commands.add_parser("correct", parents=[common], help="Corrections and van Hove sweeps")
    correct.add_argument("--obs", default=argparse.SUPPRESS, help="Observable monomial (default phi4)")
    correct.add_argument("--int", dest="interaction", default=argparse.SUPPRESS,
                         help="Interaction monomial (default from kms.interaction_power)")
    correct.add_argument("--order", type=int, choices=[1, 2], default=argparse.SUPPRESS)
    correct.add_argument("--vanhove", default=argparse.SUPPRESS, help="Index n or inclusive range n1..n2")
    correct.add_argument("--epsilon", type=float, default=argparse.SUPPRESS)
    correct.add_argument("--profile", choices=["poly2", "poly3", "delta"], default=argparse.SUPPRESS)
    correct.set_defaults(handler=cmd_kms_correct)

    mass = kms_commands.add_parser("thermal-mass", parents=[common], help="Thermal mass c(beta)")
    mass.set_defaults(handler=cmd_kms_thermal_mass)

    check = kms_commands.add_parser("check", parents=[common], help="Consistency checks")
    check.add_argument("check", choices=["shift", "reorder", "profiles"])
    check.add_argument("--obs", default=argparse.SUPPRESS)
    check.add_argument("--int", dest="interaction", default=argparse.SUPPRESS)
    check.add_argument("--shifts", default=argparse.SUPPRESS,
                       help="Negative shifts, e.g. --shifts -0.3,-0.2,-0.15")
    check.add_argument("--profiles", default=argparse.SUPPRESS, help="e.g. poly2,poly3,delta")
    check.add_argument("--power", type=int, default=argparse.SUPPRESS, help="Reordering power k")
    check.add_argument("--vanhove", default=argparse.SUPPRESS, help="Cutoff index n")
    check.add_argument("--epsilon", type=float, default=argparse.SUPPRESS)
    check.set_defaults(handler=cmd_kms_check)

    verify = commands.add_parser("verify", parents=[common], help="Prove the identity corpus")
    verify.add_argument("--epsilon", default=argparse.SUPPRESS, help="Rational slice half width")
    verify.add_argument("--depth", type=int, default=argparse.SUPPRESS)
    verify.add_argument("--t", default=argparse.SUPPRESS, help="Co-cycle first time (rational)")
    verify.add_argument("--s", default=argparse.SUPPRESS, help="Co-cycle second time (rational)")
    verify.add_argument("--trace-dir", dest="trace_dir", default=argparse.SUPPRESS,
                        help="Directory for one trace file per identity")
    verify.add_argument("--corrupt-rules", dest="corrupt_rules", action="store_true",
                        default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    verify.set_defaults(handler=cmd_verify)

    _accept_negative_values(parser, propagator, cluster, kms, correct, mass, check, verify)
    return parser


# --- Configuration layering ------------------------------------------------

FLAG_CONFIG_KEYS = {
    "mass": "field.mass",
    "beta": "field.beta",
    "format": "output.format",
    "reproducible": "output.reproducible",
    "log_level": "server.log_level",
}


def load_config(args: argparse.Namespace) -> Config:
    """Defaults < file < environment < flags; ``run`` keys fill flags left unset."""
    config = Config(getattr(args, "config", "config.json"))
    for key, value in (config.get("run", {}) or {}).items():
        attribute = key.replace("-", "_")
        if not hasattr(args, attribute):
            setattr(args, attribute, value)
    for attribute, path in FLAG_CONFIG_KEYS.items():
        if hasattr(args, attribute):
            config.set(path, getattr(args, attribute))
    tolerance = getattr(args, "tolerance", None)
    if tolerance is not None:
        config.set("quadrature.rel_tol", float(tolerance))
        config.set("kms.tolerance", float(tolerance))
        config.set("cluster.kms_tolerance", float(tolerance))
    if not config.validate():
        raise ThermalConfigError("Configuration is invalid (see log for details)")
    return config


def configure_logging(level_name: str) -> None:
    logging.basicConfig(
        level=getattr(logging, str(level_name).upper(), logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )


def _emit(document: Any, config: Config, args: argparse.Namespace, stream: TextIO,
          columns: Optional[Sequence[str]] = None, rows: Optional[List[Dict[str, Any]]] = None) -> None:
    """Write rows as CSV (when columns are given and csv is selected) or the document as JSON."""
    if columns is not None and config.get("output.format") == "csv":
        text = render_csv(rows or [], columns)
    else:
        reproducible = bool(config.get("output.reproducible", False))
        text = render_json(with_metadata(document, reproducible) if isinstance(document, dict) else document)
    write_text(text, getattr(args, "output", None), stream)


def _field(config: Config) -> FieldParams:
    return FieldParams.from_config(config)


# --- Commands --------------------------------------------------------------

def cmd_propagator(args: argparse.Namespace, config: Config, stream: TextIO) -> int:
    """Two-point values on a (u, r, t) grid with a cross-check delta per point.

    The vacuum delta compares closed form and radial quadrature; the thermal
    delta compares the split and mirror representations.
    """
    params = _field(config)
    params.require_massive()
    quad = QuadratureConfig.from_config(config)
    grid = dict(PROPAGATOR_GRIDS[getattr(args, "grid", "default")])
    for axis in ("u", "r", "t"):
        if hasattr(args, axis):
            grid[axis] = float_list(getattr(args, axis))
    rows = []
    for u in grid["u"]:
        if not params.is_vacuum and not 0 < u < params.beta:
            logger.info(f"skipping u={u} outside the strip (0, {params.beta})")
            continue
        for r in grid["r"]:
            for t in grid["t"]:
                d = ComplexTimeDisplacement(t, u, r)
                value = two_point(d, params, quad)
                if params.is_vacuum:
                    reference = vac_two_point_quadrature(d, params, quad).value
                else:
                    reference = kms_two_point(d, params, quad, method="mirror")
                rows.append({"u": u, "r": r, "t": t, "re": value.real, "im": value.imag,
                             "delta": abs(value - reference)})
    document = {"state": params.describe(), "mass": params.mass, "rows": rows}
    _emit(document, config, args, stream, PROPAGATOR_COLUMNS, rows)
    return EXIT_OK


def _default_times(n: int, params: FieldParams) -> List[float]:
    span = params.beta if not params.is_vacuum else 1.0
    return [i * span / (n + 1) for i in range(1, n + 1)]


def cmd_cluster(args: argparse.Namespace, config: Config, stream: TextIO) -> int:
    params = _field(config)
    quad = QuadratureConfig.from_config(config)
    powers = int_list(getattr(args, "powers", "2,2"))
    n = len(powers) - 1
    radii = float_list(getattr(args, "radii", DEFAULT_RADII))
    if getattr(args, "ray", "spatial") == "imaginary_time":
        scan = ClusterScan.imaginary_ray(powers, params)
    else:
        u = float_list(args.u) if hasattr(args, "u") else _default_times(n, params)
        scan = ClusterScan.collinear(powers, params, u)
    samples = sample_scan(scan, radii, quad=quad)
    r_e = [s.r_e for s in samples]
    values = [s.value for s in samples]
    fit = fit_decay(r_e, values, float(config.get("cluster.noise_floor", 1e-30)))
    rate = getattr(args, "rate", None)
    if rate is None:
        rate = params.mass / math.sqrt(n)
    negative = bool(getattr(args, "negative_control", False))
    if negative:
        rate = 2.0 * max(fit.rate, rate) + 1.0
    bound = bound_from_samples(r_e, values, rate, float(config.get("cluster.bound_tolerance", 1e-9)))
    document: Dict[str, Any] = {"scan": scan.describe(), "fit": fit.as_dict(), "bound": bound.as_dict()}
    rearrangement = None
    if not params.is_vacuum:
        rearrangement = kms_rearrangement_check(scan, radii[0], float(config.get("cluster.kms_tolerance", 1e-6)),
                                                quad=quad)
        document["kms_rearrangement"] = rearrangement.as_dict()

    rows = [s.as_row(scan) for s in samples]
    if config.get("output.format") == "csv":
        write_text(render_csv(rows, SCAN_COLUMNS), getattr(args, "output", None), stream)
        fit_output = getattr(args, "fit_output", None)
        output = getattr(args, "output", None)
        if fit_output is None and output not in (None, "-"):
            fit_output = str(Path(output).with_suffix(".fit.json"))
        if fit_output is not None:
            write_text(render_json(document), fit_output, stream)
        else:
            logger.info(f"fit: {document['fit']}")
    else:
        document["samples"] = rows
        _emit(document, config, args, stream)

    if not bound.passed:
        raise CheckFailed(f"Exponential bound at rate {rate:g} violated at r_e={bound.offending[0]:g}")
    if rearrangement is not None and not rearrangement.passed:
        raise CheckFailed(f"KMS rearrangement discrepancy {rearrangement.discrepancy:.3e}")
    return EXIT_OK


def _interaction(args: argparse.Namespace, config: Config) -> InteractionSpec:
    if hasattr(args, "interaction"):
        return InteractionSpec(monomial_power(args.interaction))
    return InteractionSpec(int(config.get("kms.interaction_power", 4)))


def _smearing(args: argparse.Namespace, config: Config, profile: Optional[str] = None) -> TimeSmearing:
    epsilon = float(getattr(args, "epsilon", config.get("kms.epsilon", 0.1)))
    profile = profile or getattr(args, "profile", config.get("kms.profile", "poly2"))
    if profile == "delta":
        return TimeSmearing(epsilon, config.get("kms.profile", "poly2"), "delta")
    return TimeSmearing(epsilon, profile)


def cmd_kms_correct(args: argparse.Namespace, config: Config, stream: TextIO) -> int:
    params = _field(config)
    settings = KMSSettings.from_config(config)
    observable = monomial_power(getattr(args, "obs", "phi4"))
    interaction = _interaction(args, config)
    smearing = _smearing(args, config)
    order = int(getattr(args, "order", 1))
    indices = vanhove_indices(getattr(args, "vanhove", "2"))
    reports = []
    for n in indices:
        h = VanHoveProfile(n)
        if order == 1:
            reports.append(first_order_correction(observable, interaction, smearing, h, params, settings))
        else:
            result = second_order_correction(observable, interaction, smearing, h, params, settings)
            reports.append(result.as_report(observable, interaction, smearing, h, params))
    if len(reports) == 1:
        document: Dict[str, Any] = reports[0].as_dict()
    else:
        limit = van_hove_limit({r.profile_index: r.value for r in reports}, settings.tolerance)
        document = {"reports": [r.as_dict() for r in reports], "van_hove": limit.as_dict()}
    _emit(document, config, args, stream)
    return EXIT_OK


def cmd_kms_thermal_mass(args: argparse.Namespace, config: Config, stream: TextIO) -> int:
    params = _field(config)
    report = thermal_mass(params, QuadratureConfig.from_config(config))
    document = {"beta": params.beta, "mass": params.mass, **report.as_dict()}
    _emit(document, config, args, stream)
    return EXIT_OK


def cmd_kms_check(args: argparse.Namespace, config: Config, stream: TextIO) -> int:
    params = _field(config)
    settings = KMSSettings.from_config(config)
    tolerance = float(getattr(args, "tolerance", 1e-4))
    observable = monomial_power(getattr(args, "obs", "phi4"))
    interaction = _interaction(args, config)
    h = VanHoveProfile(int(getattr(args, "vanhove", 2)))
    if args.check == "shift":
        shifts = float_list(getattr(args, "shifts", "-0.3,-0.2,-0.15"))
        report = t_shift_invariance(observable, interaction, params, shifts, h, settings, tolerance)
    elif args.check == "reorder":
        report = wick_reordering_check(params, int(getattr(args, "power", interaction.power)),
                                       QuadratureConfig.from_config(config), tolerance=min(tolerance, 1e-9))
    else:
        labels = str(getattr(args, "profiles", "poly2,poly3,delta")).split(",")
        smearings = [_smearing(args, config, label.strip()) for label in labels]
        report = profile_independence_check(observable, interaction, params, smearings, h, settings, tolerance)
    document = {"check": args.check, **report.as_dict()}
    _emit(document, config, args, stream)
    if not report.passed:
        raise CheckFailed(f"{args.check} check failed")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, config: Config, stream: TextIO) -> int:
    epsilon = str(getattr(args, "epsilon", config.get("scattering.epsilon", "1")))
    depth = int(getattr(args, "depth", config.get("scattering.search_depth", 2)))
    table = corrupted_rule_table() if getattr(args, "corrupt_rules", False) else SOUND_RULES
    if getattr(args, "corrupt_rules", False):
        logger.warning("verify: running with the corrupted rule table")
    trace_dir = getattr(args, "trace_dir", None)

    if hasattr(args, "t") or hasattr(args, "s"):
        if not (hasattr(args, "t") and hasattr(args, "s")):
            raise DomainError("--t and --s must be given together")
        trace = cocycle_check(args.t, args.s, epsilon, depth, table)
        write_text(trace.to_text(), getattr(args, "output", None), stream)
        return EXIT_OK

    results = verify_corpus(identity_corpus(epsilon), depth, table,
                            int(config.get("scattering.step_budget", 10000)))
    if trace_dir is not None:
        directory = Path(trace_dir)
        directory.mkdir(parents=True, exist_ok=True)
        for result in results:
            if result.trace is not None:
                (directory / f"{_safe_name(result.name)}.trace").write_text(result.trace.to_text(), encoding="utf-8")
    rows = [{"name": r.name, "passed": r.passed, "steps": r.steps, "error": r.error} for r in results]
    document = {"epsilon": epsilon, "all_passed": all(r.passed for r in results), "identities": rows}
    _emit(document, config, args, stream, ["name", "passed", "steps", "error"], rows)
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise CheckFailed(f"{len(failed)} identities failed: {', '.join(failed)}")
    return EXIT_OK


# --- Entry point -----------------------------------------------------------

def main(argv: Optional[Sequence[str]] = None, stream: Optional[TextIO] = None) -> int:
    stream = stream or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(getattr(args, "log_level", "INFO"))
    try:
        config = load_config(args)
        configure_logging(str(config.get("server.log_level", "INFO")))
        return args.handler(args, config, stream)
    except CheckFailed as e:
        print(f"check failed: {e}", file=sys.stderr)
        return EXIT_PROOF
    except ProofFailure as e:
        residual = f" (residual {e.residual})" if e.residual else ""
        print(f"proof failure: {e}{residual}", file=sys.stderr)
        return EXIT_PROOF
    except (NumericalError, CapacityError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DomainError, ThermalConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
