"""Pathology observables, state dumps, and report aggregation."""

from .aggregate import (METRICS, ProbeReport, aggregate, build_report,
                        read_rows, write_rows)
from .dumps import (dump_stage, dump_trace, list_samples, list_stages,
                    read_stage)
from .metrics import DEFAULT_THETA, cka_rbf, effort, spectrum

__all__ = [
    "METRICS", "ProbeReport", "aggregate", "build_report", "read_rows",
    "write_rows", "dump_stage", "dump_trace", "list_samples", "list_stages",
    "read_stage", "DEFAULT_THETA", "cka_rbf", "effort", "spectrum",
]
