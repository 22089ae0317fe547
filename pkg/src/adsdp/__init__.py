"""User-level private streaming measurement of ad conversions with bounded per-day contributions."""

from ._kernels import BACKEND
from .accounting import BoundedScales, BudgetLedger, mechanism_budget, sensitivity
from .attribution import ConversionStream, Model, attribute
from .events import join, load_conversions, load_impressions
from .mechanism import AdsBpcConfig, run_adsbpc
from .scales import init_privacy_constrained, init_utility_constrained
from .workload import QueryWorkload, prefix_sum_workload, sliding_window_workload

__all__ = [
    "BACKEND",
    "AdsBpcConfig",
    "BoundedScales",
    "BudgetLedger",
    "ConversionStream",
    "Model",
    "QueryWorkload",
    "attribute",
    "init_privacy_constrained",
    "init_utility_constrained",
    "join",
    "load_conversions",
    "load_impressions",
    "mechanism_budget",
    "prefix_sum_workload",
    "run_adsbpc",
    "sensitivity",
    "sliding_window_workload",
]
