"""Benchmark problems, reporting, and the closed-loop tuning demo."""

from .problems import REGISTRY, BenchmarkProblem, NotFound, OracleResult, get, names
from .report import BenchmarkReport, BenchmarkRow, run_benchmark, run_suite

__all__ = [
    "REGISTRY",
    "BenchmarkProblem",
    "BenchmarkReport",
    "BenchmarkRow",
    "NotFound",
    "OracleResult",
    "get",
    "names",
    "run_benchmark",
    "run_suite",
]
