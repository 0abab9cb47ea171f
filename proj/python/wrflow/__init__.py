"""Weighted-residual operator flows: residual trees, path measures, sampling and frame atoms."""

from ._core import (
    Flow,
    WrflowError,
    dissipated,
    energy_support_basis,
    psd_sqrt,
    run_scenario,
    wr_update,
)

__all__ = [
    "Flow",
    "WrflowError",
    "dissipated",
    "energy_support_basis",
    "psd_sqrt",
    "run_scenario",
    "wr_update",
]
