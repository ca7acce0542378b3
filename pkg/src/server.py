#!/usr/bin/env python3
"""
Thermal KMS MCP Server

A Model Context Protocol server exposing the free-field propagators,
cluster scans, perturbative KMS corrections and the scattering-identity
prover as tools over stdio.
"""

import asyncio
import logging
import sys
from typing import Any, Dict, List

from mcp.server import Server
from mcp.server.models import InitializationOptions
from mcp.server.stdio import stdio_server
from mcp.types import ServerCapabilities, TextContent, Tool, ToolsCapability

# Handle both direct execution and package imports
try:
    from .config import Config
    from .tool_generator import generate_tools
    from .tool_handlers import dispatch_tool_call
except ImportError:
    from config import Config
    from tool_generator import generate_tools
    from tool_handlers import dispatch_tool_call

SERVER_NAME = "thermal-kms-server"
SERVER_VERSION = "1.0.0"

logger = logging.getLogger(__name__)

config = Config()
if not config.validate():
    logger.warning("Configuration has problems; falling back to per-call arguments where given.")

server = Server(SERVER_NAME)

_tools, _dispatch = generate_tools()


@server.list_tools()
async def handle_list_tools() -> List[Tool]:
    """List all available toolkit tools."""
    return _tools


@server.call_tool()
async def handle_call_tool(name: str, arguments: Dict[str, Any]) -> List[TextContent]:
    """Handle tool calls by dispatching to the matching handler."""
    logger.info(f"call_tool: {name} args={arguments}")
    try:
        result = await dispatch_tool_call(name, arguments or {}, config, _dispatch)
        logger.info(f"call_tool: {name} completed")
        return result
    except Exception as e:
        logger.error(f"Error in {name}: {e}", exc_info=True)
        return [TextContent(type="text", text=f"Error: {e}")]


def configure_logging(level_name: str) -> None:
    """Route logs to standard error; stdout carries the protocol stream."""
    logging.basicConfig(
        level=getattr(logging, level_name.upper(), logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )


async def main():
    """Main server entry point."""
    configure_logging(str(config.get("server.log_level", "INFO")))

    logger.info(f"Starting {SERVER_NAME}...")
    logger.info(f"Default field: mass={config.get('field.mass')} beta={config.get('field.beta')}")
    logger.info(f"Registered tools: {len(_tools)}")
    for tool in _tools:
        logger.debug(f"  - {tool.name}")

    async with stdio_server() as (read_stream, write_stream):
        await server.run(
            read_stream,
            write_stream,
            InitializationOptions(
                server_name=SERVER_NAME,
                server_version=SERVER_VERSION,
                capabilities=ServerCapabilities(
                    tools=ToolsCapability(listChanged=False),
                ),
            ),
        )


if __name__ == "__main__":
    asyncio.run(main())
