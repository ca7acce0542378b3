"""
MCP Tool Generator

Builds the MCP Tool definitions and the dispatch mapping for the
toolkit operations exposed over the service surface. Every tool shares
the field-state arguments (mass, beta) so callers can target either the
vacuum or a thermal state.
"""

from typing import Dict, List, Tuple

from mcp.types import Tool

# Type alias: tool_name -> action
ToolDispatch = Dict[str, str]

TOOL_PREFIX = "kms"


def _tool_name(action: str) -> str:
    """Generate tool name like kms_{action}."""
    return f"{TOOL_PREFIX}_{action}"


def _state_properties(thermal_only: bool = False) -> dict:
    """Schema properties selecting the quasi-free state."""
    beta_description = (
        "Inverse temperature (> 0)" if thermal_only
        else "Inverse temperature (> 0); omit for the vacuum"
    )
    return {
        "mass": {
            "type": "number",
            "description": "Field mass m (natural units)",
            "minimum": 0,
            "default": 1.0,
        },
        "beta": {
            "type": "number",
            "description": beta_description,
            "exclusiveMinimum": 0,
        },
    }


def _interaction_properties() -> dict:
    return {
        "observable_power": {
            "type": "integer",
            "description": "Power a of the observable :phi^a: at the origin",
            "minimum": 0,
            "maximum": 6,
        },
        "interaction_power": {
            "type": "integer",
            "description": "Even power k of the interaction density :phi^k:",
            "enum": [2, 4, 6],
            "default": 4,
        },
        "epsilon": {
            "type": "number",
            "description": "Smearing support is (-2 eps, -eps)",
            "exclusiveMinimum": 0,
            "default": 0.1,
        },
        "profile": {
            "type": "string",
            "description": "Smearing profile",
            "enum": ["poly2", "poly3", "delta"],
            "default": "poly2",
        },
    }


# --- Tool generators ---
# Each returns (Tool, action_string) so the dispatch map can be built.


def _gen_two_point_tool() -> Tuple[Tool, str]:
    return Tool(
        name=_tool_name("two_point"),
        description=(
            "Evaluate the two-point function D(t - iu, x) of the free scalar field "
            "in the vacuum or a KMS state. Returns the complex value and its error bound."
        ),
        inputSchema={
            "type": "object",
            "properties": {
                **_state_properties(),
                "t": {"type": "number", "description": "Real-time displacement", "default": 0.0},
                "u": {"type": "number", "description": "Imaginary-time displacement in [0, beta]",
                      "default": 0.0},
                "r": {"type": "number", "description": "Spatial distance |x|", "minimum": 0},
            },
            "required": ["r"],
        },
    ), "two_point"


def _gen_cluster_scan_tool() -> Tuple[Tool, str]:
    return Tool(
        name=_tool_name("cluster_scan"),
        description=(
            "Sample the connected correlation of collinear Wick monomials along a "
            "spatial ray and fit the exponential decay rate."
        ),
        inputSchema={
            "type": "object",
            "properties": {
                **_state_properties(),
                "powers": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 0, "maximum": 6},
                    "description": "Wick powers a_0, ..., a_n",
                    "minItems": 2,
                },
                "u": {
                    "type": "array",
                    "items": {"type": "number"},
                    "description": "Imaginary times 0 < u_1 < ... < u_n",
                },
                "radii": {
                    "type": "array",
                    "items": {"type": "number", "minimum": 0},
                    "description": "Scaling parameters r at which to sample",
                    "minItems": 4,
                },
            },
            "required": ["powers", "u", "radii"],
        },
    ), "cluster_scan"


def _gen_first_order_tool() -> Tuple[Tool, str]:
    return Tool(
        name=_tool_name("first_order"),
        description=(
            "First-order perturbative correction to the KMS (or ground) state "
            "expectation of :phi^a: at van Hove index n."
        ),
        inputSchema={
            "type": "object",
            "properties": {
                **_state_properties(),
                **_interaction_properties(),
                "vanhove_index": {
                    "type": "integer",
                    "description": "Spatial cutoff index n of h_n",
                    "minimum": 1,
                    "default": 2,
                },
            },
            "required": ["observable_power"],
        },
    ), "first_order"


def _gen_thermal_mass_tool() -> Tuple[Tool, str]:
    return Tool(
        name=_tool_name("thermal_mass"),
        description="Compute the thermal mass c(beta) used in Wick reordering.",
        inputSchema={
            "type": "object",
            "properties": _state_properties(thermal_only=True),
            "required": ["beta"],
        },
    ), "thermal_mass"


def _gen_reordering_tool() -> Tuple[Tool, str]:
    return Tool(
        name=_tool_name("reordering_check"),
        description=(
            "Determine the reordering constants between vacuum and thermal Wick "
            "ordering and cross-check them on a two-point expectation."
        ),
        inputSchema={
            "type": "object",
            "properties": {
                **_state_properties(thermal_only=True),
                "power": {"type": "integer", "enum": [2, 4, 6], "default": 4},
            },
            "required": ["beta"],
        },
    ), "reordering_check"


def _gen_verify_tool() -> Tuple[Tool, str]:
    return Tool(
        name=_tool_name("verify_identities"),
        description=(
            "Prove the scattering-matrix identity corpus with the rewrite engine "
            "and replay every proof trace."
        ),
        inputSchema={
            "type": "object",
            "properties": {
                "epsilon": {
                    "type": "string",
                    "description": "Rational time-slice half width, e.g. '1' or '1/2'",
                    "default": "1",
                },
                "depth": {
                    "type": "integer",
                    "description": "Split-search depth",
                    "minimum": 0,
                    "maximum": 4,
                    "default": 2,
                },
            },
        },
    ), "verify_identities"


# Generator registry
_GENERATORS = [
    _gen_two_point_tool,
    _gen_cluster_scan_tool,
    _gen_first_order_tool,
    _gen_thermal_mass_tool,
    _gen_reordering_tool,
    _gen_verify_tool,
]


def generate_tools() -> Tuple[List[Tool], ToolDispatch]:
    """Generate all MCP tools and the dispatch mapping.

    Returns:
        Tuple of (list of Tool objects, dispatch dict: tool_name -> action)
    """
    tools: List[Tool] = []
    dispatch: ToolDispatch = {}
    for generator in _GENERATORS:
        tool, action = generator()
        tools.append(tool)
        dispatch[tool.name] = action
    return tools, dispatch
