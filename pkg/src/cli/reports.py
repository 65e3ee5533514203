"""Rapports JSON des sous-commandes.

Les rationnels sont écrits "p/q", les flottants comme nombres JSON; les
files sont numérotées à partir de 1. Aucun horodatage n'entre dans un
rapport: deux exécutions identiques produisent les mêmes octets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from cli.network_io import scheduler_to_dict
from core.lyapunov import CancellationReport, DriftCertificate, LyapunovData, MaxPropertyReport
from core.network import Network, StaticScheduler, ValidationReport, network_size
from core.numeric import format_matrix, format_scalar, format_vector
from core.oracle import OracleResult
from core.simulator import ExponentialMoment, IdentityCheck, SimReport
from core.traffic import TrafficData
from core.traffic_lp import DeterministicBound, LpSolution


class Verdict(str, Enum):
    """Conclusion de l'analyse."""

    STABILIZABLE = "Stabilizable"
    NOT_STABILIZABLE = "NotStabilizable"
    DIVERGENT = "Divergent"


def _queues(indices: Any) -> list[int]:
    """Indices internes -> numéros de files."""
    return sorted(int(i) + 1 for i in indices)


def _number(value: float) -> float | str:
    """Flottant JSON (inf et nan écrits en toutes lettres)."""
    value = float(value)
    if math.isfinite(value):
        return value
    return "inf" if value > 0 else ("-inf" if value < 0 else "nan")


def validation_to_dict(net: Network, report: ValidationReport) -> dict[str, Any]:
    """Rapport de validation."""
    result: dict[str, Any] = {
        "network": net.name,
        "ok": report.ok,
        "violations": [
            {"code": v.code, "location": v.location, "message": v.message} for v in report.violations
        ],
    }
    if report.ok:
        result["size"] = network_size(net)
        result["pure"] = net.is_pure
    return result


def traffic_to_dict(traffic: TrafficData) -> dict[str, Any]:
    """Données de trafic d'un réseau pur."""
    return {
        "alpha": format_vector(traffic.alpha),
        "mean_matrix": format_matrix(traffic.mean_matrix),
        "star": format_matrix(traffic.star),
        "col_norms": format_vector(traffic.col_norms),
        "lambda": format_vector(traffic.lam),
        "mu": format_vector(traffic.mu),
        "utilization": format_vector(traffic.utilization),
        "deficient": traffic.deficient,
        "residual": format_scalar(traffic.residual()),
    }


def lp_to_dict(solution: LpSolution) -> dict[str, Any]:
    """Solution du LP de trafic (lambda_bar imbriqué par file puis action)."""
    lambda_bar: dict[str, dict[str, Any]] = {}
    for (queue, action_id), value in solution.lambda_bar.items():
        lambda_bar.setdefault(str(queue + 1), {})[action_id] = format_scalar(value)
    return {
        "status": solution.status.value,
        "delta_star": format_scalar(solution.delta_star) if solution.delta_star is not None else None,
        "lambda_bar": lambda_bar,
        "basis": list(solution.basis),
        "iterations": solution.iterations,
        "stabilizable": solution.stabilizable,
    }


def certificate_to_dict(certificate: DriftCertificate) -> dict[str, Any]:
    """Certificat de dérive par motif de support."""
    return {
        "passed": certificate.passed,
        "gamma": format_scalar(certificate.gamma),
        "exact_regions": certificate.exact_regions,
        "patterns": [
            {
                "support": _queues(pattern.support),
                "velocity": format_vector(pattern.velocity),
                "margins": {str(i + 1): format_scalar(m) for i, m in pattern.margins},
                "passed": pattern.passed,
            }
            for pattern in certificate.patterns
        ],
    }


def lyapunov_to_dict(
    ld: LyapunovData,
    certificate: DriftCertificate | None,
    max_property: MaxPropertyReport | None = None,
    cancellation: CancellationReport | None = None,
) -> dict[str, Any]:
    """Vecteurs q, gamma et certificat."""
    result: dict[str, Any] = {
        "gamma": format_scalar(ld.gamma),
        "q": format_matrix(ld.q),
    }
    if max_property is not None:
        result["max_property"] = {
            "holds": list(max_property.holds),
            "witnesses": {str(i + 1): format_vector(x) for i, x in max_property.witnesses.items()},
        }
    if cancellation is not None:
        result["cancellation"] = {
            "holds": cancellation.holds,
            "values": format_matrix(cancellation.values),
            "max_residual": format_scalar(cancellation.max_residual),
        }
    if certificate is not None:
        result["certificate"] = certificate_to_dict(certificate)
    return result


def deterministic_bound_to_dict(bound: DeterministicBound) -> dict[str, Any]:
    """Meilleur ordonnanceur déterministe."""
    return {
        "value": format_scalar(bound.value) if bound.value is not None else None,
        "scheduler": scheduler_to_dict(bound.scheduler) if bound.scheduler is not None else None,
        "evaluated": len(bound.evaluated),
    }


@dataclass
class AnalysisReport:
    """Agrégat du pipeline analyze."""

    network: str
    mode: str
    validation: dict[str, Any]
    verdict: Verdict
    traffic: dict[str, Any] | None = None
    """Trafic du réseau d'entrée s'il est pur."""

    lp_solution: dict[str, Any] | None = None
    scheduler: dict[str, Any] | None = None
    induced_traffic: dict[str, Any] | None = None
    lyapunov: dict[str, Any] | None = None
    deterministic_bound: dict[str, Any] | None = None
    messages: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        """Vue JSON (les sections absentes sont omises)."""
        result: dict[str, Any] = {
            "network": self.network,
            "mode": self.mode,
            "verdict": self.verdict.value,
            "validation": self.validation,
        }
        for key in ("traffic", "lp_solution", "scheduler", "induced_traffic", "lyapunov", "deterministic_bound"):
            value: Any = getattr(self, key)
            if value is not None:
                result[key] = value
        if self.messages:
            result["messages"] = self.messages
        return result


def _estimates(values: np.ndarray, half_widths: np.ndarray) -> list[dict[str, Any]]:
    return [
        {"value": _number(v), "half_width": _number(h)} for v, h in zip(values, half_widths)
    ]


def identity_to_dict(check: IdentityCheck) -> dict[str, Any]:
    """Résidus d'identité empiriques."""
    return {
        "residuals": [_number(v) for v in check.residuals],
        "half_widths": [_number(v) for v in check.half_widths],
        "within_3_half_widths": check.within(3.0),
    }


def sim_report_to_dict(
    report: SimReport,
    scheduler: StaticScheduler | None = None,
    analytic_utilization: list[Any] | None = None,
    flow: IdentityCheck | None = None,
    utilization_check: IdentityCheck | None = None,
    moments: list[ExponentialMoment] | None = None,
) -> dict[str, Any]:
    """Rapport de simulation."""
    firing: dict[str, dict[str, Any]] = {}
    for (queue, action_id), value, hw in zip(report.action_keys, report.firing_freq, report.firing_hw):
        firing.setdefault(str(queue + 1), {})[action_id] = {"value": _number(value), "half_width": _number(hw)}

    result: dict[str, Any] = {
        "status": "completed",
        "seed": report.seed,
        "replicas": report.replicas,
        "batches": report.batches,
        "cycles": report.cycles,
        "events": report.events,
        "total_time": _number(report.total_time),
        "mean_return_time": {"value": _number(report.mean_return_time), "half_width": _number(report.return_time_hw)},
        "utilization": _estimates(report.utilization, report.utilization_hw),
        "firing_freq": firing,
        "arrival_freq": _number(report.arrival_freq),
        "tail": {
            "rate": _number(report.tail.rate),
            "intercept": _number(report.tail.intercept),
            "ratio": _number(report.tail.geometric_ratio),
            "max_size": report.tail.max_size,
        },
        "occupancy": [
            {"state": list(state), "fraction": _number(value)} for state, value in report.occupancy.items()
        ],
    }
    if scheduler is not None:
        result["scheduler"] = scheduler_to_dict(scheduler)
    if analytic_utilization is not None:
        result["analytic_utilization"] = format_vector(analytic_utilization)
    if flow is not None:
        result["flow_balance"] = identity_to_dict(flow)
    if utilization_check is not None:
        result["utilization_identity"] = identity_to_dict(utilization_check)
    if moments:
        result["exponential_moments"] = [
            {"delta": _number(m.delta), "value": _number(m.value), "diverged": m.diverged} for m in moments
        ]
    return result


def budget_exceeded_to_dict(clock: float, events: int, trace: tuple[tuple[float, int], ...]) -> dict[str, Any]:
    """Rapport d'une simulation sans retour à 0."""
    return {
        "status": "budget_exceeded_before_first_return",
        "clock": _number(clock),
        "events": events,
        "trace": [[_number(t), size] for t, size in trace],
    }


def oracle_to_dict(result: OracleResult, analytic_utilization: list[Any] | None = None) -> dict[str, Any]:
    """Loi stationnaire tronquée et diagnostics."""
    distribution = result.distribution
    n: int = len(distribution.states[0]) if distribution.states else 0
    report: dict[str, Any] = {
        "bound": result.bound,
        "states": result.chain.size,
        "mode": distribution.mode.value,
        "shell_mass": _number(result.shell_mass),
        "marginal_busy": format_vector(distribution.utilization()),
        "joint_busy": format_scalar(distribution.joint_busy(tuple(range(n)))),
        "stationary": [
            {"state": list(state), "probability": format_scalar(p)}
            for state, p in distribution.as_dict().items()
        ],
    }
    if analytic_utilization is not None:
        report["analytic_utilization"] = format_vector(analytic_utilization)
    return report


def dumps(document: dict[str, Any]) -> str:
    """Sérialisation JSON stable."""
    return json.dumps(document, indent=2, ensure_ascii=False)
