"""Interface en ligne de commande: lecture des fichiers, rapports et sous-commandes."""

from cli.commands import ExitCode, cmd_analyze, cmd_drift_check, cmd_oracle, cmd_simulate, cmd_validate
from cli.network_io import NetworkFile

__all__ = [
    "ExitCode",
    "NetworkFile",
    "cmd_analyze",
    "cmd_drift_check",
    "cmd_oracle",
    "cmd_simulate",
    "cmd_validate",
]
