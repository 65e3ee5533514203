"""Sous-commandes: validate, analyze, simulate, drift-check, oracle.

Chaque commande écrit un rapport JSON sur stdout et retourne un code de
sortie:
- 0: succès
- 1: résultat analytique négatif (réseau invalide, non stabilisable, dérive non certifiée)
- 2: erreur d'entrée (fichier absent, JSON mal formé, action inconnue)
- 3: budget de simulation épuisé avant le premier retour à 0
"""

from __future__ import annotations

import csv
import math
import sys
from enum import IntEnum
from pathlib import Path
from typing import Any, TextIO

from cli.network_io import NetworkFile, scheduler_to_dict
from cli.reports import (
    AnalysisReport,
    Verdict,
    budget_exceeded_to_dict,
    certificate_to_dict,
    deterministic_bound_to_dict,
    dumps,
    lp_to_dict,
    lyapunov_to_dict,
    oracle_to_dict,
    sim_report_to_dict,
    traffic_to_dict,
    validation_to_dict,
)
from core.errors import (
    BudgetExceededBeforeFirstReturnError,
    CertificationFailedError,
    DivergentError,
    NetworkFormatError,
    NotDeficientError,
    OracleError,
    UniformizationOverflowError,
    UnknownActionError,
)
from core.lyapunov import build_lyapunov, cancellation_identities, certify_drift, check_max_property
from core.network import Network, StaticScheduler, ValidationReport, induce_pure_network, uniformize, validate
from core.numeric import NumberMode
from core.oracle import OracleResult, auto_bound, solve_bounded
from core.simplex import LpStatus
from core.simulator import (
    SimReport,
    StaticPolicy,
    estimate_exponential_moment,
    flow_balance,
    run_replicas,
    utilization_identity,
)
from core.traffic import TrafficData, solve_traffic
from core.traffic_lp import deterministic_bound, is_stabilizable, synthesize_scheduler
from utils.logging_config import close_session_logger, create_simulation_session_logger, get_app_logger


# Nombre maximal d'ordonnanceurs déterministes énumérés dans analyze
DETERMINISTIC_ENUMERATION_LIMIT: int = 64


class ExitCode(IntEnum):
    """Contrat des codes de sortie."""

    SUCCESS = 0
    NEGATIVE = 1
    INPUT_ERROR = 2
    BUDGET_EXCEEDED = 3


class InputError(Exception):
    """Erreur d'entrée déjà journalisée, convertie en code 2."""


def _emit(document: dict[str, Any], out: TextIO | None) -> None:
    stream: TextIO = out or sys.stdout
    stream.write(dumps(document) + "\n")
    stream.flush()


def _error_document(kind: str, message: str) -> dict[str, Any]:
    return {"error": kind, "message": message}


def load_input(path: str | Path, allow_k_increase: bool = False) -> Network:
    """Charge un réseau et applique l'uniformisation si des actions portent leur taux.

    Raises:
        InputError: Si le fichier est absent, mal formé ou si l'uniformisation déborde
    """
    logger = get_app_logger()
    try:
        net: Network = NetworkFile.load(path)
    except FileNotFoundError as e:
        logger.error(str(e))
        raise InputError(str(e)) from e
    except NetworkFormatError as e:
        logger.error(f"Fichier mal formé: {e}")
        raise InputError(str(e)) from e

    if net.has_action_rates:
        try:
            net = uniformize(net, allow_k_increase=allow_k_increase)
        except UniformizationOverflowError as e:
            logger.error(str(e))
            raise InputError(f"{e} (utiliser --allow-k-increase)") from e
        logger.info(f"Réseau {net.name} uniformisé")
    return net


def _validated(path: str | Path, mode: NumberMode, allow_k_increase: bool) -> tuple[Network, ValidationReport]:
    net: Network = load_input(path, allow_k_increase)
    return net, validate(net, mode)


def cmd_validate(path: str | Path, mode: NumberMode = NumberMode.RATIONAL, out: TextIO | None = None) -> int:
    """Valide un fichier de réseau (0 si valide, 1 si violations, 2 si illisible)."""
    try:
        net: Network = NetworkFile.load(path)
    except (FileNotFoundError, NetworkFormatError) as e:
        get_app_logger().error(str(e))
        _emit(_error_document("input", str(e)), out)
        return ExitCode.INPUT_ERROR

    report: ValidationReport = validate(net, mode)
    _emit(validation_to_dict(net, report), out)
    if not report.ok:
        get_app_logger().warning(f"{net.name}: {len(report.violations)} violation(s)")
        return ExitCode.NEGATIVE
    return ExitCode.SUCCESS


def analyze_network(
    net: Network,
    report: ValidationReport,
    mode: NumberMode = NumberMode.RATIONAL,
    exact_regions: bool = False,
) -> AnalysisReport:
    """Pipeline LP -> ordonnanceur -> réseau induit -> trafic -> Lyapunov."""
    logger = get_app_logger()
    analysis: AnalysisReport = AnalysisReport(
        network=net.name,
        mode=mode.value,
        validation=validation_to_dict(net, report),
        verdict=Verdict.NOT_STABILIZABLE,
    )
    if not report.ok:
        analysis.messages.append("Réseau invalide")
        return analysis

    if net.is_pure:
        try:
            analysis.traffic = traffic_to_dict(solve_traffic(net, mode))
        except DivergentError as e:
            logger.warning(f"{net.name}: {e}")
            analysis.verdict = Verdict.DIVERGENT
            analysis.messages.append(str(e))
            return analysis

    stabilizable, solution = is_stabilizable(net, mode)
    analysis.lp_solution = lp_to_dict(solution)
    if solution.status is not LpStatus.OPTIMAL:
        analysis.messages.append(f"LP de trafic {solution.status.value}")
        return analysis

    if len(net.action_keys()) > net.n and _deterministic_count(net) <= DETERMINISTIC_ENUMERATION_LIMIT:
        analysis.deterministic_bound = deterministic_bound_to_dict(deterministic_bound(net, mode))

    if not stabilizable:
        analysis.messages.append(f"delta* = {solution.delta_star} >= 1")
        return analysis

    scheduler: StaticScheduler = synthesize_scheduler(net, solution)
    analysis.scheduler = scheduler_to_dict(scheduler)
    induced: Network = induce_pure_network(net, scheduler)
    try:
        traffic: TrafficData = solve_traffic(induced, mode, require_reachable=False)
    except DivergentError as e:
        logger.error(f"Réseau induit divergent: {e}")
        analysis.verdict = Verdict.DIVERGENT
        analysis.messages.append(str(e))
        return analysis
    analysis.induced_traffic = traffic_to_dict(traffic)

    ld = build_lyapunov(traffic)
    try:
        certificate = certify_drift(induced, ld, exact_regions=exact_regions, strict=False)
    except NotDeficientError as e:
        logger.error(f"Réseau induit non déficient malgré delta* < 1: {e}")
        analysis.lyapunov = lyapunov_to_dict(ld, None)
        analysis.messages.append(str(e))
        return analysis

    analysis.lyapunov = lyapunov_to_dict(ld, certificate, check_max_property(ld), cancellation_identities(ld))
    if certificate.passed:
        analysis.verdict = Verdict.STABILIZABLE
    else:
        logger.error("Certificat de dérive en échec malgré delta* < 1")
        analysis.messages.append("Certificat de dérive en échec")
    return analysis


def _deterministic_count(net: Network) -> int:
    count: int = 1
    for queue in net.queues:
        count *= len(queue.actions)
    return count


def cmd_analyze(
    path: str | Path,
    mode: NumberMode = NumberMode.RATIONAL,
    allow_k_increase: bool = False,
    exact_regions: bool = False,
    out: TextIO | None = None,
) -> int:
    """Décide la stabilisabilité et synthétise l'ordonnanceur (0 si Stabilizable)."""
    try:
        net, report = _validated(path, mode, allow_k_increase)
    except InputError as e:
        _emit(_error_document("input", str(e)), out)
        return ExitCode.INPUT_ERROR

    analysis: AnalysisReport = analyze_network(net, report, mode, exact_regions)
    _emit(analysis.to_dict(), out)
    get_app_logger().info(f"{net.name}: {analysis.verdict.value}")
    return ExitCode.SUCCESS if analysis.verdict is Verdict.STABILIZABLE else ExitCode.NEGATIVE


def _resolve_scheduler(net: Network, scheduler: str, mode: NumberMode) -> StaticScheduler:
    """Ordonnanceur synthétisé ("synth") ou lu depuis un fichier.

    Raises:
        InputError: Si le fichier est illisible ou référence une action inconnue
        NotDeficientError: Si le LP de trafic est infaisable
    """
    if scheduler == "synth":
        _, solution = is_stabilizable(net, mode)
        if solution.status is not LpStatus.OPTIMAL:
            raise NotDeficientError(f"LP de trafic {solution.status.value}: aucun ordonnanceur à synthétiser")
        if not solution.stabilizable:
            get_app_logger().warning(
                f"delta* = {solution.delta_star} >= 1: simulation d'un ordonnanceur instable"
            )
        return synthesize_scheduler(net, solution, allow_unstable=True)

    try:
        return NetworkFile.load_scheduler(scheduler, net)
    except (FileNotFoundError, NetworkFormatError, UnknownActionError) as e:
        get_app_logger().error(f"Ordonnanceur illisible: {e}")
        raise InputError(str(e)) from e


def _analytic_utilization(net: Network, scheduler: StaticScheduler, mode: NumberMode) -> list[Any] | None:
    try:
        traffic: TrafficData = solve_traffic(induce_pure_network(net, scheduler), mode, require_reachable=False)
    except DivergentError:
        return None
    return list(traffic.utilization)


def write_csv(directory: Path, report: SimReport | None, trace: tuple[tuple[float, int], ...]) -> None:
    """Écrit trace.csv, et pour une simulation complète occupancy.csv et size_histogram.csv."""
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "trace.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=["time", "total"], lineterminator="\n")
        writer.writeheader()
        for time, total in trace:
            writer.writerow({"time": repr(time), "total": total})
    if report is None:
        return

    n: int = len(report.utilization)
    fields: list[str] = [f"x{i + 1}" for i in range(n)] + ["fraction"]
    with open(directory / "occupancy.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for state, fraction in report.occupancy.items():
            row: dict[str, Any] = {f"x{i + 1}": v for i, v in enumerate(state)}
            row["fraction"] = repr(fraction)
            writer.writerow(row)
    with open(directory / "size_histogram.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=["size", "fraction"], lineterminator="\n")
        writer.writeheader()
        for size, fraction in enumerate(report.size_histogram):
            writer.writerow({"size": size, "fraction": repr(float(fraction))})


def cmd_simulate(
    path: str | Path,
    scheduler: str = "synth",
    cycles: int = 100_000,
    seed: int = 0,
    replicas: int = 1,
    workers: int = 1,
    time_budget: float = math.inf,
    batches: int = 30,
    csv_dir: str | Path | None = None,
    mode: NumberMode = NumberMode.RATIONAL,
    allow_k_increase: bool = False,
    out: TextIO | None = None,
) -> int:
    """Simule le réseau sous un ordonnanceur statique (0, ou 3 sans retour à 0)."""
    logger = get_app_logger()
    try:
        net, report = _validated(path, mode, allow_k_increase)
        if not report.ok:
            _emit(validation_to_dict(net, report), out)
            return ExitCode.NEGATIVE
        sched: StaticScheduler = _resolve_scheduler(net, scheduler, mode)
    except InputError as e:
        _emit(_error_document("input", str(e)), out)
        return ExitCode.INPUT_ERROR
    except NotDeficientError as e:
        _emit(_error_document("not_stabilizable", str(e)), out)
        return ExitCode.NEGATIVE

    session, log_file = create_simulation_session_logger(net.name)
    session.info(f"Réseau: {net.name} | graine {seed} | {cycles} cycles | {replicas} réplique(s)")
    session.info(f"Budget de temps simulé: {time_budget}")
    session.info(f"Ordonnanceur: {scheduler_to_dict(sched)}")
    try:
        result: SimReport = run_replicas(
            net, StaticPolicy(sched), seed, cycles, time_budget, replicas, workers, batches
        )
    except BudgetExceededBeforeFirstReturnError as e:
        session.warning(f"Aucun retour à 0: t={e.clock}, {e.events} événements")
        close_session_logger(session)
        if csv_dir is not None:
            write_csv(Path(csv_dir), None, e.trace)
        document: dict[str, Any] = budget_exceeded_to_dict(e.clock, e.events, e.trace)
        document["scheduler"] = scheduler_to_dict(sched)
        _emit(document, out)
        return ExitCode.BUDGET_EXCEEDED

    session.info(f"Terminé: {result.cycles} cycles, {result.events} événements, t={result.total_time:.6g}")
    close_session_logger(session)
    logger.debug(f"Log de session: {log_file}")

    moments = []
    if math.isfinite(result.tail.rate) and result.tail.rate > 0:
        moments = [
            estimate_exponential_moment(result, result.tail.rate / 2),
            estimate_exponential_moment(result, result.tail.rate * 2),
        ]
    document = sim_report_to_dict(
        result,
        scheduler=sched,
        analytic_utilization=_analytic_utilization(net, sched, mode),
        flow=flow_balance(result, net),
        utilization_check=utilization_identity(result, net),
        moments=moments,
    )
    if csv_dir is not None:
        write_csv(Path(csv_dir), result, result.trace)
    _emit(document, out)
    return ExitCode.SUCCESS


def cmd_drift_check(
    path: str | Path,
    mode: NumberMode = NumberMode.RATIONAL,
    exact_regions: bool = False,
    allow_k_increase: bool = False,
    out: TextIO | None = None,
) -> int:
    """Certifie la dérive négative d'un réseau pur, ou du réseau induit par l'ordonnanceur synthétisé."""
    logger = get_app_logger()
    try:
        net, report = _validated(path, mode, allow_k_increase)
    except InputError as e:
        _emit(_error_document("input", str(e)), out)
        return ExitCode.INPUT_ERROR
    if not report.ok:
        _emit(validation_to_dict(net, report), out)
        return ExitCode.NEGATIVE

    document: dict[str, Any] = {"network": net.name, "mode": mode.value}
    try:
        target: Network = net
        if not net.is_pure:
            stabilizable, solution = is_stabilizable(net, mode)
            if not stabilizable:
                raise NotDeficientError(f"Aucun ordonnanceur statique ergodique (LP {solution.status.value})")
            sched: StaticScheduler = synthesize_scheduler(net, solution)
            document["scheduler"] = scheduler_to_dict(sched)
            target = induce_pure_network(net, sched)
        traffic: TrafficData = solve_traffic(target, mode, require_reachable=net.is_pure)
        ld = build_lyapunov(traffic)
        certificate = certify_drift(target, ld, exact_regions=exact_regions, strict=True)
    except DivergentError as e:
        logger.warning(str(e))
        document.update({"passed": False, "error": "divergent", "message": str(e)})
        _emit(document, out)
        return ExitCode.NEGATIVE
    except NotDeficientError as e:
        logger.warning(str(e))
        document.update({"passed": False, "error": "not_deficient", "message": str(e)})
        _emit(document, out)
        return ExitCode.NEGATIVE
    except CertificationFailedError as e:
        logger.error(str(e))
        document.update({"passed": False, "error": "certification_failed", "message": str(e)})
        if e.certificate is not None:
            document["certificate"] = certificate_to_dict(e.certificate)
        _emit(document, out)
        return ExitCode.NEGATIVE

    document.update(lyapunov_to_dict(ld, certificate, check_max_property(ld), cancellation_identities(ld)))
    document["passed"] = certificate.passed
    _emit(document, out)
    return ExitCode.SUCCESS


def cmd_oracle(
    path: str | Path,
    bound: int | None = None,
    mode: NumberMode = NumberMode.FLOAT,
    scheduler: str | None = None,
    allow_k_increase: bool = False,
    out: TextIO | None = None,
) -> int:
    """Loi stationnaire de la chaîne tronquée (borne automatique si bound est None)."""
    logger = get_app_logger()
    try:
        net, report = _validated(path, mode, allow_k_increase)
        if not report.ok:
            _emit(validation_to_dict(net, report), out)
            return ExitCode.NEGATIVE
        sched: StaticScheduler | None = None
        if not net.is_pure:
            sched = _resolve_scheduler(net, scheduler or "synth", mode)
    except InputError as e:
        _emit(_error_document("input", str(e)), out)
        return ExitCode.INPUT_ERROR
    except NotDeficientError as e:
        _emit(_error_document("not_stabilizable", str(e)), out)
        return ExitCode.NEGATIVE

    try:
        result: OracleResult = (
            auto_bound(net, mode, sched) if bound is None else solve_bounded(net, bound, mode, sched)
        )
    except OracleError as e:
        logger.error(str(e))
        _emit(_error_document("oracle", str(e)), out)
        return ExitCode.INPUT_ERROR if bound is not None and bound < net.K else ExitCode.NEGATIVE

    analytic: list[Any] | None = None
    if sched is not None:
        analytic = _analytic_utilization(net, sched, mode)
    else:
        try:
            analytic = list(solve_traffic(net, mode).utilization)
        except DivergentError:
            analytic = None
    document: dict[str, Any] = {"network": net.name}
    document.update(oracle_to_dict(result, analytic))
    if sched is not None:
        document["scheduler"] = scheduler_to_dict(sched)
    _emit(document, out)
    return ExitCode.SUCCESS
