"""Nonparametric revealed-preference tests for utility maximization.

Modules:
    core         datasets, certificates, piecewise-linear utilities, CSV/JSON
    lpqp         small dense LP / minimum-norm QP contract
    garp         revealed-preference relations and the GARP check
    afriat       Afriat inequalities, utility reconstruction, prediction
    changepoint  deterministic change-point detection and min-norm recovery
    noisy        change points and hypothesis tests under measurement noise
    jl           random projections for GARP on wide probes
    sim          synthetic agents, CUSUM baseline, ROC harness
"""

from .core import (
    AfriatCertificate,
    ChangePointCertificate,
    Dataset,
    PiecewiseLinearUtility,
    RevPrefError,
    read_csv,
    validate_dataset,
    write_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AfriatCertificate",
    "ChangePointCertificate",
    "Dataset",
    "PiecewiseLinearUtility",
    "RevPrefError",
    "read_csv",
    "validate_dataset",
    "write_csv",
]
