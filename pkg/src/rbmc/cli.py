"""Command-line entry point: ``rbmc {table,fanchart,bias-check,normalize-check,budget}``.

Every command reads a JSON spec (a path or a bundled name such as
``table_e1``), writes its reports into ``--out`` and exits with

* 0 on success,
* 2 on an invalid spec or refused output (error record names the field),
* 3 when a sampler configuration is degenerate,
* 4 when a check's acceptance gate fails.

Error records are single-line JSON objects on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

from . import __version__, bias_oracle
from .core.rng import RngStreamSpec
from .errors import DegenerateConfigurationError, SpecError
from .experiments.budget import budget_rows_csv, budget_summary_csv, equal_budget_report
from .experiments.fanchart import fan_chart, fan_chart_csv
from .experiments.runner import cell_context
from .experiments.spec import ExperimentSpec, build_components, load_spec, parse_spec
from .experiments.svg import render_fan_chart_svg
from .experiments.tables import render_text, table_csv, variance_ratio_table
from .mh import EstimatorMode
from .restore import estimate_normalization, run_jump_restore

EXIT_OK, EXIT_SPEC, EXIT_DEGENERATE, EXIT_GATE = 0, 2, 3, 4
BIAS_GATE_SE = 4.0
METADATA = "run_metadata.json"
_U64 = 2**64


class OutputExists(Exception):
    def __init__(self, path: Path):
        super().__init__(f"{path} exists; pass --force to overwrite")
        self.path = path


@dataclass
class RunManifest:
    spec_path: str
    out_dir: Path
    seed: Optional[int]
    jobs: int
    force: bool
    svg: bool
    command: str


def _error(kind: str, message: str, **extra) -> None:
    record = {"error": kind, "message": message, **extra}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


def _parse_u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < _U64:
        raise argparse.ArgumentTypeError(f"{value} does not fit in 64 unsigned bits")
    return value


def _parse_jobs(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("jobs must be at least 1")
    return value


class _Writer:
    """Collects output files and refuses to clobber existing ones without ``force``."""

    def __init__(self, out_dir: Path, force: bool):
        self.out_dir, self.force = out_dir, force
        self.pending: Dict[str, str] = {}

    def add(self, name: str, text: str):
        self.pending[name] = text

    def check(self, names: List[str]):
        if self.force:
            return
        for name in names:
            path = self.out_dir / name
            if path.exists():
                raise OutputExists(path)

    def flush(self):
        self.check(list(self.pending))
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in self.pending.items():
            with open(self.out_dir / name, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)


def _metadata(manifest: RunManifest, spec: ExperimentSpec, extra=None) -> str:
    # parallelism and timing stay out so the file is identical for any --jobs
    record = {
        "command": manifest.command,
        "version": __version__,
        "seed": spec.master_seed,
        "spec": spec.to_dict(),
    }
    if extra:
        record.update(extra)
    return json.dumps(record, indent=2, sort_keys=True) + "\n"


def read_metadata_spec(path) -> ExperimentSpec:
    """Re-parse the experiment spec recorded in a ``run_metadata.json``."""
    with open(path, encoding="utf-8") as fh:
        return parse_spec(json.load(fh)["spec"])


def _expect_kind(spec: ExperimentSpec, kind: str):
    if spec.kind != kind:
        raise SpecError("kind", f"command needs a {kind!r} spec, got {spec.kind!r}")


def cmd_table(manifest: RunManifest, spec: ExperimentSpec) -> int:
    _expect_kind(spec, "table")
    writer = _Writer(manifest.out_dir, manifest.force)
    writer.check(["table.csv", "table.txt", METADATA])
    table = variance_ratio_table(spec, jobs=manifest.jobs)
    text = render_text(table)
    writer.add("table.csv", table_csv(table))
    writer.add("table.txt", text)
    writer.add(METADATA, _metadata(manifest, spec))
    writer.flush()
    print(text, end="")
    if table.failures:
        _error("degenerate", f"{len(table.failures)} cell(s) failed",
               cells=sorted({str(c.param) for c in table.failures}))
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_fanchart(manifest: RunManifest, spec: ExperimentSpec) -> int:
    _expect_kind(spec, "fanchart")
    writer = _Writer(manifest.out_dir, manifest.force)
    names = ["fanchart.csv", METADATA] + (["fanchart.svg"] if manifest.svg else [])
    writer.check(names)
    chart = fan_chart(spec, jobs=manifest.jobs)
    writer.add("fanchart.csv", fan_chart_csv(chart))
    if manifest.svg:
        writer.add("fanchart.svg", render_fan_chart_svg(chart, title=spec.name))
    writer.add(METADATA, _metadata(manifest, spec))
    writer.flush()
    w_std, w_van = chart.width("std")[-1], chart.width("van")[-1]
    print(f"{spec.name}: interquantile width at t={int(chart.checkpoints[-1])}: "
          f"standard {w_std:.6g}, vanilla {w_van:.6g}")
    return EXIT_OK


def cmd_bias_check(manifest: RunManifest, spec: ExperimentSpec) -> int:
    _expect_kind(spec, "bias")
    target, proposal, _ = build_components(spec, 0)
    if not target.reference.is_discrete:
        raise SpecError("target.name", "the bias check needs a discrete target")
    writer = _Writer(manifest.out_dir, manifest.force)
    writer.check(["bias.csv", METADATA])
    reports = bias_oracle.verify_bias_theorem(target, proposal, spec.budget,
                                              RngStreamSpec(spec.master_seed, 0))
    lines = ["state,a,r2,predicted_bias,empirical_bias,standard_error,z,tours"]
    failed = []
    for r in reports:
        z = r.z_score
        lines.append(",".join([str(r.state), repr(r.expected_acceptance),
                               repr(r.rejection_second_moment), repr(r.predicted_bias),
                               repr(r.empirical_bias), repr(r.standard_error), repr(z),
                               str(r.tour_count)]))
        if abs(z) > BIAS_GATE_SE:
            failed.append(r.state)
    writer.add("bias.csv", "\n".join(lines) + "\n")
    writer.add(METADATA, _metadata(manifest, spec))
    writer.flush()
    print(f"{'state':>5} {'a(z)':>10} {'r2(z)':>10} {'predicted':>12} {'empirical':>12} "
          f"{'SE':>10} {'z':>7}")
    for r in reports:
        print(f"{r.state!s:>5} {r.expected_acceptance:10.6f} {r.rejection_second_moment:10.6f} "
              f"{r.predicted_bias:12.6f} {r.empirical_bias:12.6f} {r.standard_error:10.2e} "
              f"{r.z_score:7.2f}")
    if failed:
        _error("gate", f"bias outside {BIAS_GATE_SE:g} standard errors", states=failed)
        return EXIT_GATE
    return EXIT_OK


def cmd_normalize_check(manifest: RunManifest, spec: ExperimentSpec) -> int:
    _expect_kind(spec, "normalize")
    ctx = cell_context(spec.to_json(), 0)
    truth = ctx.target.exact_normalization
    if truth is None:
        raise SpecError("target.name", "target has no exact normalization to compare against")
    writer = _Writer(manifest.out_dir, manifest.force)
    writer.check(["normalize.json", METADATA])
    result = run_jump_restore(ctx.restore_config(EstimatorMode.STANDARD, 0), ctx.integrands or
                              [lambda x: 1.0])
    estimate = estimate_normalization(spec.restore.rate_value, result.total_elapsed,
                                      result.tour_count)
    rel = abs(estimate - truth) / truth
    gated = spec.budget >= spec.gate_floor
    passed = rel <= spec.tolerance
    record = {
        "estimate": estimate, "true": truth, "relative_error": rel, "tours": spec.budget,
        "c_tilde": spec.restore.rate_value, "gate_active": gated, "passed": passed,
    }
    writer.add("normalize.json", json.dumps(record, indent=2, sort_keys=True) + "\n")
    writer.add(METADATA, _metadata(manifest, spec))
    writer.flush()
    print(f"estimated C = {estimate:.6g}, true C = {truth:.6g}, relative error {rel:.3%}"
          + ("" if gated else f" (informational: fewer than {spec.gate_floor} tours)"))
    if gated and not passed:
        _error("gate", f"relative error {rel:.4g} above {spec.tolerance:g}")
        return EXIT_GATE
    return EXIT_OK


def cmd_budget(manifest: RunManifest, spec: ExperimentSpec) -> int:
    _expect_kind(spec, "table")
    writer = _Writer(manifest.out_dir, manifest.force)
    writer.check(["budget.csv", "budget_summary.csv", METADATA])
    report = equal_budget_report(spec, jobs=manifest.jobs)
    writer.add("budget.csv", budget_rows_csv(report))
    summary = budget_summary_csv(report)
    writer.add("budget_summary.csv", summary)
    writer.add(METADATA, _metadata(manifest, spec))
    writer.flush()
    print(summary, end="")
    return EXIT_OK


COMMANDS = {
    "table": cmd_table,
    "fanchart": cmd_fanchart,
    "bias-check": cmd_bias_check,
    "normalize-check": cmd_normalize_check,
    "budget": cmd_budget,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbmc",
        description="Rao-Blackwellized MCMC experiments: variance tables, fan charts, checks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "table": "variance-ratio table (CSV + aligned text)",
        "fanchart": "quantile fan chart of running estimates (CSV, optional SVG)",
        "bias-check": "vanilla weight bias against its closed form on a discrete target",
        "normalize-check": "normalization constant estimated from Jump Restore tours",
        "budget": "realized proposal counts and cost-normalized variances per mode",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--spec", required=True, help="spec file path or bundled name")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--seed", type=_parse_u64, default=None,
                       help="master seed override (env RBMC_SEED)")
        p.add_argument("--jobs", type=_parse_jobs, default=None,
                       help="worker processes (env RBMC_JOBS, default 1)")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--svg", action="store_true", help="also write an SVG chart")
    return parser


def _manifest(args, environ) -> RunManifest:
    seed = args.seed
    if seed is None and environ.get("RBMC_SEED"):
        try:
            seed = _parse_u64(environ["RBMC_SEED"])
        except argparse.ArgumentTypeError as exc:
            raise SpecError("RBMC_SEED", str(exc)) from None
    jobs = args.jobs
    if jobs is None:
        try:
            jobs = _parse_jobs(environ.get("RBMC_JOBS", "1"))
        except argparse.ArgumentTypeError as exc:
            raise SpecError("RBMC_JOBS", str(exc)) from None
    return RunManifest(args.spec, args.out, seed, jobs, args.force, args.svg, args.command)


def main(argv=None, environ=None) -> int:
    environ = os.environ if environ is None else environ
    args = build_parser().parse_args(argv)
    try:
        manifest = _manifest(args, environ)
        spec = load_spec(manifest.spec_path)
        if manifest.seed is not None:
            spec = spec.with_seed(manifest.seed)
        return COMMANDS[args.command](manifest, spec)
    except SpecError as exc:
        _error("spec", exc.message, field=exc.field)
        return EXIT_SPEC
    except OutputExists as exc:
        _error("output_exists", str(exc), path=str(exc.path))
        return EXIT_SPEC
    except DegenerateConfigurationError as exc:
        _error("degenerate", str(exc))
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
