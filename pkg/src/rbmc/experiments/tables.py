"""Variance-ratio tables: vanilla and waste-recycling against the standard estimator.

For every grid cell, realization ``r`` runs all three estimators on stream
``r`` of the master seed, so the modes see identical proposal and uniform
draws. Variances across realizations are Bessel-corrected.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core.rng import RngStreamSpec
from ..errors import DegenerateConfigurationError
from ..mh import simulate_mh_trace
from ..restore import run_jump_restore
from .parallel import chunk_ranges, ordered_map
from .runner import MODE_ORDER, cell_context
from .spec import ExperimentSpec

CHUNK = 50
DEGENERATE = "degenerate"
FAILED = "failed"

CSV_HEADER = (
    "sampler", "target", "proposal", "param", "integrand", "ratio_vanilla", "ratio_waste",
    "var_std", "var_van", "var_wr", "mean_std", "mean_van", "mean_wr",
    "se_std", "se_van", "se_wr", "realizations", "budget", "seed",
)


def realization_estimates(spec_json: str, cell: int, r: int) -> np.ndarray:
    """Estimates of realization ``r`` as a ``(3, n_integrands)`` array (std, van, wr)."""
    ctx = cell_context(spec_json, cell)
    spec = ctx.spec
    if spec.sampler == "MH":
        trace = simulate_mh_trace(ctx.target, ctx.proposal, spec.budget,
                                  RngStreamSpec(spec.master_seed, r))
        n = spec.budget
        return np.array([
            [trace.standard(f, n) for f in ctx.integrands],
            [trace.vanilla(f, n) for f in ctx.integrands],
            [trace.waste_recycling(f, n) for f in ctx.integrands],
        ])
    return np.array([
        run_jump_restore(ctx.restore_config(mode, r), ctx.integrands).estimates
        for mode in MODE_ORDER
    ])


def _chunk_task(task):
    spec_json, cell, start, stop = task
    try:
        return np.stack([realization_estimates(spec_json, cell, r) for r in range(start, stop)])
    except (DegenerateConfigurationError, ValueError, ArithmeticError) as exc:
        return f"{type(exc).__name__}: {exc}"


@dataclass
class VarianceRatioCell:
    param: Optional[float]
    integrand: str
    ratio_vanilla: float
    ratio_waste: float
    variances: Tuple[float, float, float]
    means: Tuple[float, float, float]
    standard_errors: Tuple[float, float, float]
    failure: Optional[str] = None

    @property
    def degenerate(self) -> bool:
        return self.failure is None and math.isnan(self.ratio_vanilla)


@dataclass
class VarianceRatioTable:
    spec: ExperimentSpec
    cells: List[VarianceRatioCell]
    estimates: List[Optional[np.ndarray]] = field(default_factory=list, repr=False)

    def cell(self, param, integrand: str) -> VarianceRatioCell:
        for c in self.cells:
            if c.param == param and c.integrand == integrand:
                return c
        raise KeyError((param, integrand))

    @property
    def failures(self) -> List[VarianceRatioCell]:
        return [c for c in self.cells if c.failure is not None]


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return math.nan
    return num / den


def summarize_cell(param, label: str, values: np.ndarray) -> VarianceRatioCell:
    """Build a cell from a ``(realizations, 3)`` array of std/van/wr estimates."""
    r = values.shape[0]
    var = tuple(float(v) for v in np.var(values, axis=0, ddof=1))
    mean = tuple(float(v) for v in np.mean(values, axis=0))
    se = tuple(math.sqrt(v / r) for v in var)
    return VarianceRatioCell(param, label, _ratio(var[1], var[0]), _ratio(var[2], var[0]),
                             var, mean, se)


def variance_ratio_table(spec: ExperimentSpec, jobs: int = 1) -> VarianceRatioTable:
    """Run every grid cell and return vanilla/standard and waste/standard variance ratios."""
    if spec.realizations < 2:
        raise ValueError("variance ratios need at least 2 realizations")
    spec_json = spec.to_json()
    chunks = chunk_ranges(spec.realizations, CHUNK)
    tasks = [(spec_json, c, s, e) for c in range(spec.cell_count) for s, e in chunks]
    results = ordered_map(_chunk_task, tasks, jobs)

    labels = [i.label for i in spec.integrands]
    cells: List[VarianceRatioCell] = []
    estimates: List[Optional[np.ndarray]] = []
    per_cell = len(chunks)
    for c, param in enumerate(spec.grid_values):
        parts = results[c * per_cell:(c + 1) * per_cell]
        errors = [p for p in parts if isinstance(p, str)]
        if errors:
            nan3 = (math.nan,) * 3
            for label in labels:
                cells.append(VarianceRatioCell(param, label, math.nan, math.nan,
                                               nan3, nan3, nan3, failure=errors[0]))
            estimates.append(None)
            continue
        block = np.concatenate(parts, axis=0)
        estimates.append(block)
        for k, label in enumerate(labels):
            cells.append(summarize_cell(param, label, block[:, :, k]))
    return VarianceRatioTable(spec, cells, estimates)


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else repr(float(x))


def _fmt_ratio(cell: VarianceRatioCell, x: float) -> str:
    if cell.failure is not None:
        return FAILED
    return DEGENERATE if math.isnan(x) else repr(float(x))


def _component_label(component) -> str:
    if not component.params:
        return component.name
    inner = ";".join(f"{k}={component.params[k]}" for k in sorted(component.params))
    return f"{component.name}({inner})"


def table_csv(table: VarianceRatioTable) -> str:
    spec = table.spec
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for c in table.cells:
        writer.writerow([
            spec.sampler,
            _component_label(spec.target),
            _component_label(spec.proposal),
            "" if c.param is None else repr(float(c.param)),
            c.integrand,
            _fmt_ratio(c, c.ratio_vanilla),
            _fmt_ratio(c, c.ratio_waste),
            *(_fmt(v) for v in c.variances),
            *(_fmt(v) for v in c.means),
            *(_fmt(v) for v in c.standard_errors),
            spec.realizations,
            spec.budget,
            spec.master_seed,
        ])
    return buf.getvalue()


def render_text(table: VarianceRatioTable) -> str:
    """Aligned table: one row per grid value, ``vanilla / waste`` per integrand."""
    spec = table.spec
    labels = [i.label for i in spec.integrands]
    head = spec.grid.label if spec.grid is not None else "cell"
    rows = [[head] + labels]
    for param in spec.grid_values:
        row = ["-" if param is None else f"{param:g}"]
        for label in labels:
            c = table.cell(param, label)
            if c.failure is not None:
                row.append(FAILED)
            elif c.degenerate:
                row.append(DEGENERATE)
            else:
                row.append(f"{c.ratio_vanilla:.3f} / {c.ratio_waste:.3f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = [f"{spec.name}: variance ratio vanilla / waste-recycling against standard "
             f"({spec.sampler}, budget {spec.budget}, {spec.realizations} realizations, "
             f"seed {spec.master_seed})"]
    for i, r in enumerate(rows):
        lines.append("  ".join(v.rjust(w) for v, w in zip(r, widths)))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    for c in table.failures:
        lines.append(f"failure at {c.param}, {c.integrand}: {c.failure}")
    return "\n".join(lines) + "\n"


def ordering_fraction(cells: Sequence[VarianceRatioCell]) -> float:
    """Share of non-degenerate cells with ``ratio_vanilla < ratio_waste < 1``."""
    usable = [c for c in cells if c.failure is None and not c.degenerate]
    if not usable:
        return math.nan
    ok = sum(1 for c in usable if c.ratio_vanilla < c.ratio_waste < 1.0)
    return ok / len(usable)

