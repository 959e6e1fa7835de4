"""Quantile fan charts of running estimates over many independent realizations."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from ..core.rng import RngStreamSpec
from ..mh import EstimatorMode, simulate_mh_trace
from ..restore import run_jump_restore
from .parallel import chunk_ranges, ordered_map
from .runner import cell_context
from .spec import ExperimentSpec

CSV_HEADER = ("t", "q_lo_std", "q_hi_std", "q_lo_van", "q_hi_van",
              "min_std", "max_std", "min_van", "max_van")
CHUNK = 25


def log_checkpoints(final: int, count: int) -> List[int]:
    """``count`` distinct increasing integers from 1 to ``final``, roughly log-spaced.

    Early points that would round onto each other are pushed up by one; the
    last point is always ``final``.
    """
    if count < 1 or final < count:
        raise ValueError("need 1 <= count <= final")
    if count == 1:
        return [final]
    ideal = np.geomspace(1.0, float(final), count)
    points: List[int] = []
    for i, v in enumerate(ideal):
        lowest = points[-1] + 1 if points else 1
        # leave room for the remaining points below ``final``
        highest = final - (count - 1 - i)
        points.append(int(min(max(round(v), lowest), highest)))
    return points


def _trajectories(task):
    spec_json, start, stop, checkpoints = task
    ctx = cell_context(spec_json, 0)
    spec = ctx.spec
    f = ctx.integrands[0]
    cps = np.asarray(checkpoints)
    std = np.empty((stop - start, len(cps)))
    van = np.empty_like(std)
    for row, r in enumerate(range(start, stop)):
        if spec.sampler == "MH":
            trace = simulate_mh_trace(ctx.target, ctx.proposal, int(cps[-1]),
                                      RngStreamSpec(spec.master_seed, r))
            std[row] = trace.running_standard(f, cps)
            van[row] = trace.running_vanilla(f, cps)
        else:
            for out, mode in ((std, EstimatorMode.STANDARD), (van, EstimatorMode.VANILLA)):
                res = run_jump_restore(ctx.restore_config(mode, r, int(cps[-1])), [f])
                lifetimes = np.cumsum([t.lifetime for t in res.tours])
                sums = np.cumsum([t.weighted_sums[0] for t in res.tours])
                out[row] = sums[cps - 1] / lifetimes[cps - 1]
    return std, van


@dataclass
class FanChart:
    spec: ExperimentSpec
    checkpoints: np.ndarray
    quantiles: Sequence[float]
    bands: Dict[str, Dict[str, np.ndarray]]
    trajectories: Dict[str, np.ndarray]

    def width(self, estimator: str) -> np.ndarray:
        """Interquantile width ``q_hi - q_lo`` at each checkpoint."""
        b = self.bands[estimator]
        return b["hi"] - b["lo"]


def _band(values: np.ndarray, q_lo: float, q_hi: float) -> Dict[str, np.ndarray]:
    return {
        "lo": np.quantile(values, q_lo, axis=0),
        "hi": np.quantile(values, q_hi, axis=0),
        "min": values.min(axis=0),
        "max": values.max(axis=0),
    }


def fan_chart(spec: ExperimentSpec, quantiles: Sequence[float] = None,
              checkpoints: Sequence[int] = None, jobs: int = 1) -> FanChart:
    """Running standard and vanilla estimates at each checkpoint, summarized by quantiles.

    ``checkpoints`` are sample counts for MH and tour counts for Jump Restore;
    by default ``spec.checkpoints`` log-spaced points up to ``spec.budget``.
    The band is spanned by the smallest and largest requested quantile.
    """
    quantiles = tuple(spec.quantiles if quantiles is None else quantiles)
    if not quantiles:
        raise ValueError("need at least one quantile")
    if checkpoints is None:
        checkpoints = log_checkpoints(spec.budget, spec.checkpoints)
    cps = [int(c) for c in checkpoints]
    if any(c < 1 for c in cps) or any(b <= a for a, b in zip(cps, cps[1:])):
        raise ValueError("checkpoints must be positive and strictly increasing")
    spec_json = spec.to_json()
    tasks = [(spec_json, s, e, cps) for s, e in chunk_ranges(spec.realizations, CHUNK)]
    parts = ordered_map(_trajectories, tasks, jobs)
    std = np.concatenate([p[0] for p in parts], axis=0)
    van = np.concatenate([p[1] for p in parts], axis=0)
    q_lo, q_hi = min(quantiles), max(quantiles)
    return FanChart(
        spec=spec,
        checkpoints=np.asarray(cps),
        quantiles=quantiles,
        bands={"std": _band(std, q_lo, q_hi), "van": _band(van, q_lo, q_hi)},
        trajectories={"std": std, "van": van},
    )


def fan_chart_csv(chart: FanChart) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    s, v = chart.bands["std"], chart.bands["van"]
    for i, t in enumerate(chart.checkpoints):
        writer.writerow([int(t)] + [repr(float(x)) for x in (
            s["lo"][i], s["hi"][i], v["lo"][i], v["hi"][i],
            s["min"][i], s["max"][i], v["min"][i], v["max"][i],
        )])
    return buf.getvalue()
