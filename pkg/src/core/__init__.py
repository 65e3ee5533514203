"""Core business logic pour Branch Network Stability Tool."""

from core.network import Network, StaticScheduler, induce_pure_network, uniformize, validate
from core.numeric import NumberMode
from core.traffic import TrafficData, solve_traffic
from core.traffic_lp import LpSolution, build_lp, is_stabilizable, solve_lp, synthesize_scheduler
from core.lyapunov import DriftCertificate, LyapunovData, build_lyapunov, certify_drift
from core.simulator import SimReport, StaticPolicy, run_cycles, run_replicas
from core.oracle import StationaryDistribution, TruncatedChain, auto_bound, build_truncated, stationary

__all__ = [
    "Network",
    "StaticScheduler",
    "induce_pure_network",
    "uniformize",
    "validate",
    "NumberMode",
    "TrafficData",
    "solve_traffic",
    "LpSolution",
    "build_lp",
    "is_stabilizable",
    "solve_lp",
    "synthesize_scheduler",
    "DriftCertificate",
    "LyapunovData",
    "build_lyapunov",
    "certify_drift",
    "SimReport",
    "StaticPolicy",
    "run_cycles",
    "run_replicas",
    "StationaryDistribution",
    "TruncatedChain",
    "auto_bound",
    "build_truncated",
    "stationary",
]
