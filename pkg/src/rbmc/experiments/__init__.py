"""Variance-ratio tables, fan charts and budget reports over many realizations."""

from .budget import BudgetReport, equal_budget_report
from .fanchart import FanChart, fan_chart, fan_chart_csv, log_checkpoints
from .integrands import build_integrand
from .spec import BUNDLED, ExperimentSpec, load_spec, parse_spec
from .svg import render_fan_chart_svg
from .tables import (
    VarianceRatioCell,
    VarianceRatioTable,
    ordering_fraction,
    render_text,
    table_csv,
    variance_ratio_table,
)

__all__ = [
    "BUNDLED", "BudgetReport", "ExperimentSpec", "FanChart", "VarianceRatioCell",
    "VarianceRatioTable", "build_integrand", "equal_budget_report", "fan_chart",
    "fan_chart_csv", "load_spec", "log_checkpoints", "ordering_fraction", "parse_spec",
    "render_fan_chart_svg", "render_text", "table_csv", "variance_ratio_table",
]
