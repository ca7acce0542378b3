"""
MCP Tool Handlers

Handlers for the toolkit tools. Each handler receives the arguments
dict and the active Config, runs the computation in a worker thread and
returns MCP TextContent with a JSON body.

The dispatch_tool_call function routes tool names to the correct handler
using the dispatch map from tool_generator.
"""

import asyncio
import json
import logging
from typing import Any, Callable, Dict, List

from mcp.types import TextContent

# Handle both direct execution and package imports
try:
    from .cluster_decay import ClusterScan, fit_decay, sample_scan
    from .config import Config
    from .exports import jsonable
    from .kms_perturbation import (
        InteractionSpec, KMSSettings, TimeSmearing, VanHoveProfile, first_order_correction, thermal_mass,
        wick_reordering_check,
    )
    from .propagators import ComplexTimeDisplacement, FieldParams, two_point
    from .quadrature import QuadratureConfig
    from .scattering import identity_corpus, verify_corpus
except ImportError:
    from cluster_decay import ClusterScan, fit_decay, sample_scan
    from config import Config
    from exports import jsonable
    from kms_perturbation import (
        InteractionSpec, KMSSettings, TimeSmearing, VanHoveProfile, first_order_correction, thermal_mass,
        wick_reordering_check,
    )
    from propagators import ComplexTimeDisplacement, FieldParams, two_point
    from quadrature import QuadratureConfig
    from scattering import identity_corpus, verify_corpus

logger = logging.getLogger(__name__)


# --- Response formatting ---

def _format_response(operation: str, data: Any) -> List[TextContent]:
    """Format a standardized success response."""
    result: Dict[str, Any] = {
        "success": True,
        "operation": operation,
    }
    if isinstance(data, list):
        result["count"] = len(data)
    result["data"] = data

    return [TextContent(
        type="text",
        text=json.dumps(jsonable(result), indent=2, default=str),
    )]


def _format_error(operation: str, error: Exception) -> List[TextContent]:
    """Format a standardized error response."""
    result: Dict[str, Any] = {
        "success": False,
        "operation": operation,
        "error_type": type(error).__name__,
        "error": str(error),
    }

    return [TextContent(
        type="text",
        text=json.dumps(result, indent=2, default=str),
    )]


# --- Argument helpers ---

def _field_params(arguments: Dict[str, Any], config: Config) -> FieldParams:
    """State from the tool arguments, falling back to the configured field."""
    mass = float(arguments.get("mass", config.get("field.mass", 1.0)))
    beta = arguments.get("beta")
    if beta is None:
        return FieldParams(mass, FieldParams.from_config(config).beta)
    return FieldParams(mass, float(beta))


def _smearing(arguments: Dict[str, Any], config: Config) -> TimeSmearing:
    epsilon = float(arguments.get("epsilon", config.get("kms.epsilon", 0.1)))
    profile = arguments.get("profile", config.get("kms.profile", "poly2"))
    if profile == "delta":
        return TimeSmearing(epsilon, config.get("kms.profile", "poly2"), "delta")
    return TimeSmearing(epsilon, profile)


# --- Computations (run in worker threads) ---

def _two_point(arguments: Dict[str, Any], config: Config) -> Dict[str, Any]:
    params = _field_params(arguments, config)
    d = ComplexTimeDisplacement(float(arguments.get("t", 0.0)), float(arguments.get("u", 0.0)),
                                float(arguments["r"]))
    value = two_point(d, params, QuadratureConfig.from_config(config))
    return {"state": params.describe(), "t": d.t, "u": d.u, "r": d.r, "value": value}


def _cluster_scan(arguments: Dict[str, Any], config: Config) -> Dict[str, Any]:
    params = _field_params(arguments, config)
    scan = ClusterScan.collinear(arguments["powers"], params, arguments["u"])
    quad = QuadratureConfig.from_config(config)
    samples = sample_scan(scan, arguments["radii"], quad=quad)
    fit = fit_decay([s.r_e for s in samples], [s.value for s in samples],
                    float(config.get("cluster.noise_floor", 1e-30)))
    return {"scan": scan.describe(), "samples": [s.as_row(scan) for s in samples], "fit": fit.as_dict()}


def _first_order(arguments: Dict[str, Any], config: Config) -> Dict[str, Any]:
    params = _field_params(arguments, config)
    interaction = InteractionSpec(int(arguments.get("interaction_power",
                                                    config.get("kms.interaction_power", 4))))
    report = first_order_correction(int(arguments["observable_power"]), interaction,
                                    _smearing(arguments, config),
                                    VanHoveProfile(int(arguments.get("vanhove_index", 2))), params,
                                    KMSSettings.from_config(config))
    return report.as_dict()


def _thermal_mass(arguments: Dict[str, Any], config: Config) -> Dict[str, Any]:
    params = _field_params(arguments, config)
    return thermal_mass(params, QuadratureConfig.from_config(config)).as_dict()


def _reordering_check(arguments: Dict[str, Any], config: Config) -> Dict[str, Any]:
    params = _field_params(arguments, config)
    report = wick_reordering_check(params, int(arguments.get("power", 4)), QuadratureConfig.from_config(config))
    return report.as_dict()


def _verify_identities(arguments: Dict[str, Any], config: Config) -> Dict[str, Any]:
    epsilon = str(arguments.get("epsilon", config.get("scattering.epsilon", "1")))
    depth = int(arguments.get("depth", config.get("scattering.search_depth", 2)))
    results = verify_corpus(identity_corpus(epsilon), depth,
                            step_budget=int(config.get("scattering.step_budget", 10000)))
    return {
        "all_passed": all(r.passed for r in results),
        "identities": [{"name": r.name, "passed": r.passed, "steps": r.steps, "error": r.error}
                       for r in results],
    }


# --- Dispatch ---

HANDLER_DISPATCH: Dict[str, Callable[[Dict[str, Any], Config], Any]] = {
    "two_point": _two_point,
    "cluster_scan": _cluster_scan,
    "first_order": _first_order,
    "thermal_mass": _thermal_mass,
    "reordering_check": _reordering_check,
    "verify_identities": _verify_identities,
}


async def run_action(action: str, arguments: Dict[str, Any], config: Config) -> List[TextContent]:
    """Run one computation off the event loop; failures become error bodies."""
    handler = HANDLER_DISPATCH.get(action)
    if not handler:
        raise ValueError(f"Unknown action: {action}")
    try:
        data = await asyncio.to_thread(handler, arguments or {}, config)
        return _format_response(action, data)
    except Exception as e:
        logger.warning(f"{action} failed: {type(e).__name__}: {e}")
        return _format_error(action, e)


async def dispatch_tool_call(name: str, arguments: Dict[str, Any], config: Config,
                             tool_dispatch: Dict[str, str]) -> List[TextContent]:
    """Dispatch a tool call to the appropriate handler.

    Args:
        name: Tool name (e.g., "kms_thermal_mass")
        arguments: Tool arguments from MCP
        config: Active configuration
        tool_dispatch: Mapping of tool_name -> action from generate_tools()
    """
    if name not in tool_dispatch:
        raise ValueError(f"Unknown tool: {name}")
    return await run_action(tool_dispatch[name], arguments, config)
