"""HTTP gateway over the registry, executor and usage ledger."""

from .config import GatewayConfig, load_config
from .server import Gateway, GatewayServer, make_server, serve

__all__ = ["Gateway", "GatewayConfig", "GatewayServer", "load_config", "make_server", "serve"]
