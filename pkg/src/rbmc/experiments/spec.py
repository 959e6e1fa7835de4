"""Experiment specifications: JSON documents naming a sampler configuration.

A spec names a target, a proposal (optionally with a one-parameter grid), a
transfer distribution for Jump Restore runs, the integrands, the budget and
the number of independent realizations. Parsing validates every field and
reports the first offending one through :class:`~rbmc.errors.SpecError`.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..core.catalog import Catalog, builtin_targets_and_proposals
from ..errors import SpecError

KINDS = ("table", "fanchart", "bias", "normalize")
SAMPLERS = ("MH", "JumpRestore")
INTEGRAND_KINDS = ("x", "x2", "indicator", "acceptance", "constant")
RATE_VARIANTS = ("absorbed", "with_normalization")
_U64 = 2**64


@dataclass(frozen=True)
class ComponentSpec:
    """A catalog entry plus its keyword parameters."""

    name: str
    params: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "params": dict(self.params)}


@dataclass(frozen=True)
class GridSpec:
    param: str
    values: Tuple[float, ...]
    label: str = ""

    def to_dict(self):
        return {"param": self.param, "values": list(self.values), "label": self.label}


@dataclass(frozen=True)
class IntegrandSpec:
    kind: str
    threshold: float = 0.0
    value: float = 1.0
    # tabulation interval for the continuous expected-acceptance integrand
    lo: float = -60.0
    hi: float = 60.0

    @property
    def label(self) -> str:
        if self.kind == "x":
            return "x"
        if self.kind == "x2":
            return "x^2"
        if self.kind == "indicator":
            return f"1{{x>{self.threshold:g}}}"
        if self.kind == "acceptance":
            return "a(x)"
        return f"const({self.value:g})"

    def to_dict(self):
        out: Dict[str, Any] = {"kind": self.kind}
        if self.kind == "indicator":
            out["threshold"] = self.threshold
        elif self.kind == "constant":
            out["value"] = self.value
        elif self.kind == "acceptance":
            out["range"] = [self.lo, self.hi]
        return out


@dataclass(frozen=True)
class RestoreSpec:
    holding_rate: float = 1.0
    rate_variant: str = "absorbed"
    rate_value: float = 1.0
    exact_terminal_interval: bool = False

    def to_dict(self):
        return {
            "holding_rate": self.holding_rate,
            "rate": {"variant": self.rate_variant, "value": self.rate_value},
            "exact_terminal_interval": self.exact_terminal_interval,
        }


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    name: str
    sampler: str
    target: ComponentSpec
    proposal: ComponentSpec
    integrands: Tuple[IntegrandSpec, ...]
    budget: int
    realizations: int
    master_seed: int
    grid: Optional[GridSpec] = None
    transfer: Optional[ComponentSpec] = None
    restore: RestoreSpec = field(default_factory=RestoreSpec)
    quantiles: Tuple[float, ...] = (0.05, 0.95)
    checkpoints: int = 100
    gate_floor: int = 1000
    tolerance: float = 0.05

    @property
    def grid_values(self) -> Tuple[Optional[float], ...]:
        return self.grid.values if self.grid is not None else (None,)

    @property
    def cell_count(self) -> int:
        return len(self.grid_values)

    def with_seed(self, seed: int) -> "ExperimentSpec":
        return dataclasses.replace(self, master_seed=_u64(seed, "master_seed"))

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "kind": self.kind,
            "name": self.name,
            "sampler": self.sampler,
            "target": self.target.to_dict(),
            "proposal": self.proposal.to_dict(),
            "integrands": [i.to_dict() for i in self.integrands],
            "budget": self.budget,
            "realizations": self.realizations,
            "master_seed": self.master_seed,
        }
        if self.grid is not None:
            out["proposal"]["grid"] = self.grid.to_dict()
        if self.transfer is not None:
            out["transfer"] = self.transfer.to_dict()
        if self.sampler == "JumpRestore":
            out["restore"] = self.restore.to_dict()
        if self.kind == "fanchart":
            out["fanchart"] = {"quantiles": list(self.quantiles), "checkpoints": self.checkpoints}
        if self.kind == "normalize":
            out["normalize"] = {"gate_floor": self.gate_floor, "tolerance": self.tolerance}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _u64(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecError(where, f"expected an unsigned 64-bit integer, got {value!r}")
    if not 0 <= value < _U64:
        raise SpecError(where, f"{value} does not fit in 64 unsigned bits")
    return value


def _positive_int(value, where, minimum=1):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecError(where, f"expected an integer, got {value!r}")
    if value < minimum:
        raise SpecError(where, f"must be at least {minimum}, got {value}")
    return value


def _positive_real(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(where, f"expected a number, got {value!r}")
    if not (math.isfinite(value) and value > 0):
        raise SpecError(where, f"must be positive and finite, got {value!r}")
    return float(value)


def _mapping(value, where):
    if not isinstance(value, dict):
        raise SpecError(where, f"expected an object, got {type(value).__name__}")
    return value


def _component(raw, where, known) -> ComponentSpec:
    raw = _mapping(raw, where)
    name = raw.get("name")
    if not isinstance(name, str):
        raise SpecError(f"{where}.name", "missing or not a string")
    if name not in known:
        raise SpecError(f"{where}.name", f"unknown {where} {name!r}; known: {sorted(known)}")
    params = _mapping(raw.get("params", {}), f"{where}.params")
    return ComponentSpec(name, dict(params))


def _integrand(raw, where) -> IntegrandSpec:
    raw = _mapping(raw, where)
    kind = raw.get("kind")
    if kind not in INTEGRAND_KINDS:
        raise SpecError(f"{where}.kind", f"expected one of {INTEGRAND_KINDS}, got {kind!r}")
    if kind == "indicator":
        t = raw.get("threshold", 0.0)
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not math.isfinite(t):
            raise SpecError(f"{where}.threshold", f"expected a finite number, got {t!r}")
        return IntegrandSpec(kind, threshold=float(t))
    if kind == "constant":
        v = raw.get("value", 1.0)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise SpecError(f"{where}.value", f"expected a finite number, got {v!r}")
        return IntegrandSpec(kind, value=float(v))
    if kind == "acceptance":
        rng = raw.get("range", [-60.0, 60.0])
        if (not isinstance(rng, list) or len(rng) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in rng)
                or not rng[0] < rng[1]):
            raise SpecError(f"{where}.range", f"expected [lo, hi] with lo < hi, got {rng!r}")
        return IntegrandSpec(kind, lo=float(rng[0]), hi=float(rng[1]))
    return IntegrandSpec(kind)


def _restore(raw) -> RestoreSpec:
    raw = _mapping(raw, "restore")
    holding = _positive_real(raw.get("holding_rate", 1.0), "restore.holding_rate")
    rate = _mapping(raw.get("rate", {}), "restore.rate")
    variant = rate.get("variant", "absorbed")
    if variant not in RATE_VARIANTS:
        raise SpecError("restore.rate.variant", f"expected one of {RATE_VARIANTS}, got {variant!r}")
    value = _positive_real(rate.get("value", 1.0), "restore.rate.value")
    exact = raw.get("exact_terminal_interval", False)
    if not isinstance(exact, bool):
        raise SpecError("restore.exact_terminal_interval", "expected true or false")
    return RestoreSpec(holding, variant, value, exact)


def parse_spec(raw: Dict[str, Any], catalog: Optional[Catalog] = None) -> ExperimentSpec:
    """Validate a decoded JSON document and build an :class:`ExperimentSpec`.

    Raises:
        SpecError: naming the first invalid field.
    """
    catalog = catalog or builtin_targets_and_proposals()
    raw = _mapping(raw, "<root>")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise SpecError("kind", f"expected one of {KINDS}, got {kind!r}")
    name = raw.get("name", kind)
    if not isinstance(name, str) or not name:
        raise SpecError("name", "expected a non-empty string")
    sampler = raw.get("sampler", "MH")
    if sampler not in SAMPLERS:
        raise SpecError("sampler", f"expected one of {SAMPLERS}, got {sampler!r}")
    if "target" not in raw:
        raise SpecError("target", "missing")
    target = _component(raw["target"], "target", catalog.targets)
    if "proposal" not in raw:
        raise SpecError("proposal", "missing")
    proposal = _component(raw["proposal"], "proposal", catalog.proposals)

    grid = None
    grid_raw = _mapping(raw["proposal"], "proposal").get("grid")
    if grid_raw is not None:
        grid_raw = _mapping(grid_raw, "proposal.grid")
        param = grid_raw.get("param")
        if not isinstance(param, str) or not param:
            raise SpecError("proposal.grid.param", "expected a parameter name")
        values = grid_raw.get("values")
        if not isinstance(values, list) or not values:
            raise SpecError("proposal.grid.values", "expected a non-empty list")
        vals = tuple(_positive_real(v, f"proposal.grid.values[{i}]") for i, v in enumerate(values))
        label = grid_raw.get("label", param)
        if not isinstance(label, str):
            raise SpecError("proposal.grid.label", "expected a string")
        grid = GridSpec(param, vals, label)

    transfer = None
    if sampler == "JumpRestore":
        if "transfer" not in raw:
            raise SpecError("transfer", "JumpRestore needs a transfer distribution")
        transfer = _component(raw["transfer"], "transfer", catalog.proposals)
    elif "transfer" in raw:
        raise SpecError("transfer", "only JumpRestore specs take a transfer distribution")
    restore = _restore(raw.get("restore", {})) if sampler == "JumpRestore" else RestoreSpec()

    integrands_raw = raw.get("integrands", [] if kind in ("bias", "normalize") else None)
    if not isinstance(integrands_raw, list):
        raise SpecError("integrands", "expected a list")
    if kind in ("table", "fanchart") and not integrands_raw:
        raise SpecError("integrands", "need at least one integrand")
    integrands = tuple(_integrand(v, f"integrands[{i}]") for i, v in enumerate(integrands_raw))
    if kind == "fanchart" and len(integrands) != 1:
        raise SpecError("integrands", "a fan chart tracks exactly one integrand")

    if "budget" not in raw:
        raise SpecError("budget", "missing")
    budget = _positive_int(raw["budget"], "budget")
    if kind == "table" and sampler == "MH" and budget < 2:
        raise SpecError("budget", "MH tables need at least 2 samples")
    min_real = 2 if kind == "table" else 1
    realizations = _positive_int(raw.get("realizations", 1), "realizations", min_real)
    seed = _u64(raw.get("master_seed", 0), "master_seed")

    quantiles: Tuple[float, ...] = (0.05, 0.95)
    checkpoints = 100
    if kind == "fanchart":
        fc = _mapping(raw.get("fanchart", {}), "fanchart")
        qs = fc.get("quantiles", [0.05, 0.95])
        if not isinstance(qs, list) or not qs:
            raise SpecError("fanchart.quantiles", "expected a non-empty list")
        for i, q in enumerate(qs):
            if isinstance(q, bool) or not isinstance(q, (int, float)) or not 0 <= q <= 1:
                raise SpecError(f"fanchart.quantiles[{i}]", f"expected a number in [0, 1], got {q!r}")
        quantiles = tuple(float(q) for q in qs)
        checkpoints = _positive_int(fc.get("checkpoints", 100), "fanchart.checkpoints")
        if checkpoints > budget:
            raise SpecError("fanchart.checkpoints", "more checkpoints than budget steps")

    gate_floor, tolerance = 1000, 0.05
    if kind == "normalize":
        if sampler != "JumpRestore":
            raise SpecError("sampler", "normalization checks run on JumpRestore")
        if restore.rate_variant != "absorbed":
            raise SpecError("restore.rate.variant", "normalization checks need the absorbed rate")
        nm = _mapping(raw.get("normalize", {}), "normalize")
        gate_floor = _positive_int(nm.get("gate_floor", 1000), "normalize.gate_floor")
        tolerance = _positive_real(nm.get("tolerance", 0.05), "normalize.tolerance")

    spec = ExperimentSpec(
        kind=kind, name=name, sampler=sampler, target=target, proposal=proposal,
        integrands=integrands, budget=budget, realizations=realizations, master_seed=seed,
        grid=grid, transfer=transfer, restore=restore, quantiles=quantiles,
        checkpoints=checkpoints, gate_floor=gate_floor, tolerance=tolerance,
    )
    # build every cell once so bad catalog parameters surface as spec errors
    for cell in range(spec.cell_count):
        build_components(spec, cell, catalog)
    return spec


def build_components(spec: ExperimentSpec, cell: int, catalog: Optional[Catalog] = None):
    """Instantiate ``(target, proposal, transfer)`` for grid cell ``cell``."""
    catalog = catalog or builtin_targets_and_proposals()
    try:
        target = catalog.target(spec.target.name, **spec.target.params)
    except (TypeError, ValueError) as exc:
        raise SpecError("target.params", str(exc)) from None
    params = dict(spec.proposal.params)
    value = spec.grid_values[cell]
    if spec.grid is not None:
        params[spec.grid.param] = value
    if spec.proposal.name == "langevin":
        params["target"] = target
    try:
        proposal = catalog.proposal(spec.proposal.name, **params)
    except (TypeError, ValueError) as exc:
        raise SpecError("proposal.params", str(exc)) from None
    transfer = None
    if spec.transfer is not None:
        try:
            transfer = catalog.proposal(spec.transfer.name, **spec.transfer.params)
        except (TypeError, ValueError) as exc:
            raise SpecError("transfer.params", str(exc)) from None
        if not hasattr(transfer, "draw"):
            raise SpecError("transfer.name", "transfer must be a state-independent distribution")
    return target, proposal, transfer


BUNDLED = (
    "table_e1", "table_e2", "table_e3", "table_e4", "table_e5",
    "fig_e1", "fig_e2", "fig_e3", "fig_e4", "bias_3state", "normalize_gauss2",
)


def bundled_spec_text(name: str) -> str:
    if name not in BUNDLED:
        raise SpecError("spec", f"no bundled spec {name!r}; bundled: {', '.join(BUNDLED)}")
    return resources.files("rbmc.specs").joinpath(f"{name}.json").read_text(encoding="utf-8")


def load_spec(path_or_name: str) -> ExperimentSpec:
    """Parse a spec from a file path, or from a bundled spec name such as ``table_e1``."""
    path = Path(path_or_name)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    elif path.suffix == "" and path_or_name in BUNDLED:
        text = bundled_spec_text(path_or_name)
    else:
        raise SpecError("spec", f"{path_or_name!r} is neither a file nor a bundled spec name")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError("spec", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_spec(raw)
