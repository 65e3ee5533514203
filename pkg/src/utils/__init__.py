"""Utilitaires pour Branch Network Stability Tool."""

from utils.paths import get_bundled_network, get_networks_dir, get_logs_dir
from utils.logging_config import (
    close_session_logger,
    create_simulation_session_logger,
    get_app_logger,
    setup_app_logging,
)

__all__ = [
    "get_bundled_network",
    "get_networks_dir",
    "get_logs_dir",
    "setup_app_logging",
    "create_simulation_session_logger",
    "close_session_logger",
    "get_app_logger",
]
