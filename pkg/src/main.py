"""Point d'entrée de Branch Network Stability Tool.

Ce module configure le logging, lit les arguments et délègue aux
sous-commandes de cli.commands.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import NoReturn, Sequence

# Configurer le path pour PyInstaller et le mode développement
if getattr(sys, 'frozen', False):
    # Mode exe PyInstaller
    _BASE_PATH: Path = Path(sys._MEIPASS)  # type: ignore[attr-defined]
else:
    # Mode développement
    _BASE_PATH = Path(__file__).parent

if str(_BASE_PATH) not in sys.path:
    sys.path.insert(0, str(_BASE_PATH))

from cli.commands import ExitCode, cmd_analyze, cmd_drift_check, cmd_oracle, cmd_simulate, cmd_validate
from core.numeric import NumberMode
from utils.logging_config import setup_app_logging
from utils.paths import get_bundled_network


def resolve_network_path(raw: str) -> Path:
    """Chemin tel quel s'il existe, sinon réseau fourni du même nom (ex: "fig1")."""
    path: Path = Path(raw)
    if path.exists() or len(path.parts) > 1:
        return path
    try:
        return get_bundled_network(raw)
    except FileNotFoundError:
        return path


def _bound(raw: str) -> int | None:
    """--bound: entier positif ou "auto"."""
    if raw == "auto":
        return None
    try:
        value: int = int(raw)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"borne invalide: {raw!r}") from e
    if value < 1:
        raise argparse.ArgumentTypeError("la borne doit être >= 1")
    return value


def _positive(raw: str) -> int:
    value: int = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError(f"entier >= 1 attendu: {raw!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    """Construit le parseur des sous-commandes."""
    parser = argparse.ArgumentParser(
        prog="branchnet",
        description="Stabilité des réseaux de files à branchement contrôlé",
    )
    parser.add_argument("--debug", action="store_true", help="Logs DEBUG sur stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, default_mode: NumberMode = NumberMode.RATIONAL) -> None:
        p.add_argument("network", help="Fichier JSON du réseau (ou nom d'un réseau fourni)")
        p.add_argument(
            "--mode",
            choices=[m.value for m in NumberMode],
            default=default_mode.value,
            help="Arithmétique exacte (rational) ou flottante (float)",
        )
        p.add_argument(
            "--allow-k-increase",
            action="store_true",
            help="Autoriser l'uniformisation à augmenter K",
        )

    p_validate = sub.add_parser("validate", help="Valider un fichier de réseau")
    p_validate.add_argument("network", help="Fichier JSON du réseau")
    p_validate.add_argument("--mode", choices=[m.value for m in NumberMode], default=NumberMode.RATIONAL.value)

    p_analyze = sub.add_parser("analyze", help="Décider la stabilisabilité et synthétiser l'ordonnanceur")
    add_common(p_analyze)
    p_analyze.add_argument("--exact-regions", action="store_true", help="Vérifier la non-vacuité des régions par LP")

    p_simulate = sub.add_parser("simulate", help="Simuler le réseau sous un ordonnanceur statique")
    add_common(p_simulate)
    p_simulate.add_argument("--scheduler", default="synth", help="'synth' ou fichier JSON d'ordonnanceur")
    p_simulate.add_argument("--cycles", type=_positive, default=100_000, help="Cycles de régénération par réplique")
    p_simulate.add_argument("--seed", type=int, default=0)
    p_simulate.add_argument("--replicas", type=_positive, default=1)
    p_simulate.add_argument("--workers", type=_positive, default=1, help="Processus pour les répliques")
    p_simulate.add_argument("--time-budget", type=float, default=math.inf, help="Budget en temps simulé")
    p_simulate.add_argument("--batches", type=_positive, default=30, help="Nombre de lots (intervalles de confiance)")
    p_simulate.add_argument("--csv", dest="csv_dir", default=None, help="Dossier des traces CSV")

    p_drift = sub.add_parser("drift-check", help="Certifier la dérive négative de la fonction de Lyapunov")
    add_common(p_drift)
    p_drift.add_argument("--exact-regions", action="store_true")

    p_oracle = sub.add_parser("oracle", help="Loi stationnaire de la chaîne tronquée")
    add_common(p_oracle, NumberMode.FLOAT)
    p_oracle.add_argument("--bound", type=_bound, default=None, help="Borne B ou 'auto'")
    p_oracle.add_argument("--scheduler", default=None, help="Ordonnanceur pour un réseau contrôlé")

    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """Exécute une sous-commande et retourne son code de sortie."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse sort avec 2 sur une erreur d'usage
        return int(e.code) if isinstance(e.code, int) else ExitCode.INPUT_ERROR

    logger = setup_app_logging(debug=args.debug)
    logger.debug(f"Commande: {args.command}")

    path: Path = resolve_network_path(args.network)
    mode: NumberMode = NumberMode(args.mode)

    if args.command == "validate":
        return cmd_validate(path, mode)
    if args.command == "analyze":
        return cmd_analyze(path, mode, args.allow_k_increase, args.exact_regions)
    if args.command == "simulate":
        return cmd_simulate(
            path,
            scheduler=args.scheduler,
            cycles=args.cycles,
            seed=args.seed,
            replicas=args.replicas,
            workers=args.workers,
            time_budget=args.time_budget,
            batches=args.batches,
            csv_dir=args.csv_dir,
            mode=mode,
            allow_k_increase=args.allow_k_increase,
        )
    if args.command == "drift-check":
        return cmd_drift_check(path, mode, args.exact_regions, args.allow_k_increase)
    if args.command == "oracle":
        return cmd_oracle(path, args.bound, mode, args.scheduler, args.allow_k_increase)
    return ExitCode.INPUT_ERROR


def main() -> NoReturn:
    """Point d'entrée principal de l'application."""
    sys.exit(int(run()))


if __name__ == "__main__":
    main()
