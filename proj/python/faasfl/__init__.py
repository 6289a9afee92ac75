"""Serverless federated learning simulator."""

from ._core import (
    Error,
    __version__,
    billed_duration,
    derive_seed,
    estimate_cost,
    federated_eval,
    fedavg,
    fedavg_running,
    run_session,
    select_clients,
)

__all__ = [
    "Error",
    "__version__",
    "billed_duration",
    "derive_seed",
    "estimate_cost",
    "federated_eval",
    "fedavg",
    "fedavg_running",
    "run_session",
    "select_clients",
]
