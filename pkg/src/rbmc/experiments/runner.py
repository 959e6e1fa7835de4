"""Per-realization work units shared by the table, fan-chart and budget reports.

Workers receive the spec as JSON plus indices and rebuild the sampler
objects locally (targets hold closures, which do not pickle). Built cells are
cached per process, so the quadrature tables behind ``a(x)`` are computed
once per worker and cell.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from ..core.model import TargetModel
from ..core.rng import RngStreamSpec
from ..mh import EstimatorMode
from ..restore import Absorbed, RestoreConfig, WithNormalization
from .integrands import build_integrand
from .spec import ExperimentSpec, build_components, parse_spec

# column order of every (realization, mode, integrand) array
MODE_ORDER = (EstimatorMode.STANDARD, EstimatorMode.VANILLA, EstimatorMode.WASTE_RECYCLING)


@dataclass
class CellContext:
    spec: ExperimentSpec
    cell: int
    target: TargetModel
    proposal: Any
    transfer: Any
    integrands: List[Any]

    def restore_config(self, mode: EstimatorMode, stream: int,
                       tour_budget: Optional[int] = None) -> RestoreConfig:
        r = self.spec.restore
        rate = (Absorbed(r.rate_value) if r.rate_variant == "absorbed"
                else WithNormalization(r.rate_value))
        return RestoreConfig(
            target=self.target,
            local_proposal=self.proposal,
            transfer=self.transfer,
            tour_budget=tour_budget or self.spec.budget,
            mode=mode,
            rng=RngStreamSpec(self.spec.master_seed, stream),
            holding_rate=r.holding_rate,
            rate=rate,
            exact_terminal_interval=r.exact_terminal_interval,
        )


_CACHE: Dict[Tuple[str, int], CellContext] = {}


def cell_context(spec_json: str, cell: int) -> CellContext:
    """Sampler objects and integrands for one grid cell of a spec.

    The cache key ignores the seed, so repeated runs under different master
    seeds reuse the same integrand tables.
    """
    raw = json.loads(spec_json)
    seed = raw.pop("master_seed", 0)
    key = (json.dumps(raw, sort_keys=True), cell)
    ctx = _CACHE.get(key)
    if ctx is None:
        spec = parse_spec(raw)
        target, proposal, transfer = build_components(spec, cell)
        integrands = [build_integrand(i, target, proposal) for i in spec.integrands]
        ctx = CellContext(spec, cell, target, proposal, transfer, integrands)
        if len(_CACHE) > 64:
            _CACHE.clear()
        _CACHE[key] = ctx
    if ctx.spec.master_seed != seed:
        ctx = dataclasses.replace(ctx, spec=ctx.spec.with_seed(seed))
    return ctx
