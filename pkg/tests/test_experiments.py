import csv
import io
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from scipy import stats

from rbmc.core import GaussianRandomWalk, IndependentCauchy, RngStreamSpec, normal_target
from rbmc.errors import SpecError
from rbmc.experiments import (
    BUNDLED,
    equal_budget_report,
    fan_chart,
    fan_chart_csv,
    load_spec,
    log_checkpoints,
    ordering_fraction,
    parse_spec,
    render_fan_chart_svg,
    render_text,
    table_csv,
    variance_ratio_table,
)
from rbmc.experiments import tables
from rbmc.experiments.budget import budget_rows_csv, budget_summary_csv
from rbmc.experiments.integrands import ExpectedAcceptance, acceptance_quad, sinh_grid
from rbmc.experiments.parallel import chunk_ranges, ordered_map
from rbmc.experiments.runner import cell_context
from rbmc.mh import EstimatorMode, simulate_mh_trace


def mh_table(**overrides):
    raw = {
        "kind": "table", "name": "small", "sampler": "MH",
        "target": {"name": "normal"},
        "proposal": {"name": "gaussian_rw", "grid": {"param": "scale", "values": [1.0, 3.0]}},
        "integrands": [{"kind": "x"}, {"kind": "x2"}],
        "budget": 30, "realizations": 40, "master_seed": 5,
    }
    raw.update(overrides)
    return raw


def restore_table(**overrides):
    raw = {
        "kind": "table", "name": "small_restore", "sampler": "JumpRestore",
        "target": {"name": "normal"},
        "proposal": {"name": "gaussian_rw", "params": {"scale": 2.0}},
        "transfer": {"name": "gaussian", "params": {"scale": 1.5}},
        "restore": {"exact_terminal_interval": True},
        "integrands": [{"kind": "x"}],
        "budget": 5, "realizations": 30, "master_seed": 2,
    }
    raw.update(overrides)
    return raw


def fan_spec(**overrides):
    raw = {
        "kind": "fanchart", "name": "small_fan", "sampler": "MH",
        "target": {"name": "normal"},
        "proposal": {"name": "gaussian_rw", "params": {"scale": 3.0}},
        "integrands": [{"kind": "x"}],
        "budget": 200, "realizations": 60, "master_seed": 3,
        "fanchart": {"quantiles": [0.05, 0.95], "checkpoints": 20},
    }
    raw.update(overrides)
    return raw


# ---------------------------------------------------------------- spec parsing


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_specs_round_trip(name):
    spec = load_spec(name)
    again = parse_spec(json.loads(spec.to_json()))
    assert again == spec
    assert again.to_json() == spec.to_json()


def test_bundled_table_shapes():
    assert load_spec("table_e1").cell_count * len(load_spec("table_e1").integrands) == 16
    assert load_spec("fig_e1").checkpoints == 100
    assert load_spec("bias_3state").budget == 100_000


@pytest.mark.parametrize("patch,field", [
    (dict(integrands=[]), "integrands"),
    (dict(kind="plot"), "kind"),
    (dict(target={"name": "banana"}), "target.name"),
    (dict(realizations=1), "realizations"),
    (dict(budget=1), "budget"),
    (dict(master_seed=-3), "master_seed"),
    (dict(proposal={"name": "gaussian_rw", "grid": {"param": "scale", "values": [1.0, -2.0]}}),
     "proposal.grid.values[1]"),
    (dict(proposal={"name": "gaussian_rw", "grid": {"param": "width", "values": [1.0]}}),
     "proposal.params"),
    (dict(transfer={"name": "gaussian", "params": {"scale": 1.0}}), "transfer"),
    (dict(integrands=[{"kind": "x3"}]), "integrands[0].kind"),
])
def test_invalid_specs_name_the_field(patch, field):
    with pytest.raises(SpecError) as err:
        parse_spec(mh_table(**patch))
    assert err.value.field == field


def test_restore_spec_needs_transfer():
    raw = restore_table()
    del raw["transfer"]
    with pytest.raises(SpecError) as err:
        parse_spec(raw)
    assert err.value.field == "transfer"


def test_fan_chart_takes_one_integrand():
    with pytest.raises(SpecError) as err:
        parse_spec(fan_spec(integrands=[{"kind": "x"}, {"kind": "x2"}]))
    assert err.value.field == "integrands"


def test_unknown_spec_name():
    with pytest.raises(SpecError):
        load_spec("table_e9")


def test_with_seed_changes_only_the_seed():
    spec = parse_spec(mh_table())
    other = spec.with_seed(99)
    assert other.master_seed == 99 and other.budget == spec.budget


# ---------------------------------------------------------------- integrands


def test_expected_acceptance_oracle_at_origin():
    # for a N(0, s^2) random walk on N(0, 1), a(0) = 1 / sqrt(1 + s^2)
    for s in (0.5, 2.0, 7.0):
        value = acceptance_quad(normal_target(), GaussianRandomWalk(s), 0.0)
        assert value == pytest.approx(1 / math.sqrt(1 + s * s), abs=1e-7)


def test_expected_acceptance_table_matches_quadrature():
    f = ExpectedAcceptance(normal_target(), IndependentCauchy(0.0, 1.0))
    xs = np.array([-70.0, -3.3, -0.2, 0.0, 1.7, 9.5, 75.0])
    direct = np.array([acceptance_quad(normal_target(), IndependentCauchy(0.0, 1.0), x) for x in xs])
    assert np.max(np.abs(f.batch(xs) - direct)) < 1e-3
    assert f(1.7) == pytest.approx(f.batch([1.7])[0], abs=1e-15)


def test_sinh_grid_is_increasing_and_spans_range():
    g = sinh_grid(-60.0, 60.0, 101)
    assert g[0] == -60.0 and g[-1] == 60.0 and np.all(np.diff(g) > 0)


# ---------------------------------------------------------------- parallel helpers


def test_chunk_ranges_cover_everything():
    assert chunk_ranges(7, 3) == [(0, 3), (3, 6), (6, 7)]


def test_ordered_map_keeps_order():
    assert ordered_map(abs, [-3, 1, -2], 2) == [3, 1, 2]


# ---------------------------------------------------------------- tables


def test_cell_cache_ignores_seed_but_keeps_it():
    spec = parse_spec(mh_table())
    a = cell_context(spec.to_json(), 0)
    b = cell_context(spec.with_seed(11).to_json(), 0)
    assert a.integrands is b.integrands
    assert b.spec.master_seed == 11 and a.spec.master_seed == 5


def test_ratios_are_recomputable_from_variances():
    table = variance_ratio_table(parse_spec(mh_table()))
    assert len(table.cells) == 4
    for c in table.cells:
        assert all(v >= 0 for v in c.variances)
        assert c.ratio_vanilla == pytest.approx(c.variances[1] / c.variances[0], rel=1e-12)
        assert c.ratio_waste == pytest.approx(c.variances[2] / c.variances[0], rel=1e-12)
        for se, v in zip(c.standard_errors, c.variances):
            assert se == pytest.approx(math.sqrt(v / 40), rel=1e-12)


def test_table_is_deterministic_across_jobs():
    spec = parse_spec(mh_table(realizations=120))
    one = table_csv(variance_ratio_table(spec, jobs=1))
    two = table_csv(variance_ratio_table(spec, jobs=2))
    assert one == two


def test_csv_header_and_rows():
    table = variance_ratio_table(parse_spec(mh_table()))
    rows = list(csv.reader(io.StringIO(table_csv(table))))
    assert ",".join(rows[0]) == (
        "sampler,target,proposal,param,integrand,ratio_vanilla,ratio_waste,var_std,var_van,"
        "var_wr,mean_std,mean_van,mean_wr,se_std,se_van,se_wr,realizations,budget,seed")
    assert len(rows) == 5
    assert rows[1][0] == "MH" and rows[1][-3:] == ["40", "30", "5"]


def test_constant_integrand_cell_is_degenerate():
    table = variance_ratio_table(parse_spec(mh_table(integrands=[{"kind": "constant", "value": 2.0}])))
    for c in table.cells:
        assert c.degenerate and c.variances[0] == 0.0
    text = table_csv(table)
    assert text.count("degenerate") == 2 * len(table.cells)
    assert "degenerate" in render_text(table)


def test_failure_is_recorded_per_cell(monkeypatch):
    real = tables.realization_estimates

    def flaky(spec_json, cell, r):
        if cell == 1:
            raise ValueError("boom")
        return real(spec_json, cell, r)

    monkeypatch.setattr(tables, "realization_estimates", flaky)
    table = variance_ratio_table(parse_spec(mh_table()), jobs=1)
    assert [c.failure is None for c in table.cells] == [True, True, False, False]
    assert "failed" in table_csv(table)
    assert "boom" in render_text(table)


def test_stream_matching_between_table_and_trace():
    spec = parse_spec(mh_table())
    table = variance_ratio_table(spec)
    block = table.estimates[0]
    ctx = cell_context(spec.to_json(), 0)
    trace = simulate_mh_trace(ctx.target, ctx.proposal, spec.budget, RngStreamSpec(5, 7))
    assert block[7, 0, 0] == trace.standard(ctx.integrands[0], 30)
    assert block[7, 1, 0] == trace.vanilla(ctx.integrands[0], 30)
    assert block[7, 2, 0] == trace.waste_recycling(ctx.integrands[0], 30)


def test_restore_table_runs_all_modes():
    table = variance_ratio_table(parse_spec(restore_table()))
    (cell,) = table.cells
    assert cell.failure is None and all(v > 0 for v in cell.variances)


def test_ordering_fraction():
    table = variance_ratio_table(parse_spec(mh_table()))
    frac = ordering_fraction(table.cells)
    assert 0.0 <= frac <= 1.0
    assert math.isnan(ordering_fraction([]))


# ---------------------------------------------------------------- fan charts


def test_log_checkpoints():
    cps = log_checkpoints(1000, 100)
    assert len(cps) == 100 and cps[0] == 1 and cps[-1] == 1000
    assert all(b > a for a, b in zip(cps, cps[1:]))
    assert log_checkpoints(5, 5) == [1, 2, 3, 4, 5]
    with pytest.raises(ValueError):
        log_checkpoints(3, 4)


def test_single_realization_collapses_the_band():
    chart = fan_chart(parse_spec(fan_spec(realizations=1)))
    traj = chart.trajectories["std"][0]
    for key in ("lo", "hi", "min", "max"):
        assert np.array_equal(chart.bands["std"][key], traj)
        assert np.array_equal(chart.bands["van"][key], chart.trajectories["van"][0])


def test_quantile_bands_are_ordered():
    chart = fan_chart(parse_spec(fan_spec()))
    for est in ("std", "van"):
        b = chart.bands[est]
        assert np.all(b["min"] <= b["lo"]) and np.all(b["lo"] <= b["hi"]) and np.all(b["hi"] <= b["max"])


def test_fan_chart_matches_trace_running_estimates():
    spec = parse_spec(fan_spec(realizations=3))
    chart = fan_chart(spec)
    ctx = cell_context(spec.to_json(), 0)
    trace = simulate_mh_trace(ctx.target, ctx.proposal, 200, RngStreamSpec(3, 2))
    assert np.array_equal(chart.trajectories["std"][2], trace.running_standard(ctx.integrands[0], chart.checkpoints))
    assert np.array_equal(chart.trajectories["van"][2], trace.running_vanilla(ctx.integrands[0], chart.checkpoints))


def test_median_only_band():
    chart = fan_chart(parse_spec(fan_spec(fanchart={"quantiles": [0.5], "checkpoints": 10})))
    assert np.array_equal(chart.bands["std"]["lo"], chart.bands["std"]["hi"])
    assert np.all(chart.width("van") == 0.0)


def test_fan_chart_csv_and_determinism():
    spec = parse_spec(fan_spec())
    one = fan_chart_csv(fan_chart(spec, jobs=1))
    two = fan_chart_csv(fan_chart(spec, jobs=2))
    assert one == two
    rows = one.strip().split("\n")
    assert rows[0] == "t,q_lo_std,q_hi_std,q_lo_van,q_hi_van,min_std,max_std,min_van,max_van"
    assert len(rows) == 21


def test_restore_fan_chart_uses_tour_counts():
    raw = restore_table(kind="fanchart", budget=12, realizations=5,
                        fanchart={"quantiles": [0.1, 0.9], "checkpoints": 4})
    chart = fan_chart(parse_spec(raw))
    assert list(chart.checkpoints)[-1] == 12
    assert chart.trajectories["std"].shape == (5, 4)


def test_svg_is_self_contained_xml():
    chart = fan_chart(parse_spec(fan_spec()))
    svg = render_fan_chart_svg(chart, title="x & y")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert "href" not in svg and "http://" not in svg.replace("http://www.w3.org/2000/svg", "")
    assert svg.count("<polyline") == 2 * 60 + 4


# ---------------------------------------------------------------- equal budget


def test_always_accepting_budget_equals_nominal():
    raw = mh_table(proposal={"name": "point_mass"}, integrands=[{"kind": "x"}], realizations=10)
    report = equal_budget_report(parse_spec(raw))
    for row in report.rows:
        assert row.proposals == 29


def test_vanilla_overshoot_is_at_most_one_tour():
    spec = parse_spec(mh_table(budget=100, realizations=200,
                               proposal={"name": "gaussian_rw", "params": {"scale": 2.0}}))
    ctx = cell_context(spec.to_json(), 0)
    for r in range(200):
        trace = simulate_mh_trace(ctx.target, ctx.proposal, 100, RngStreamSpec(5, r))
        used = trace.realized_proposals(EstimatorMode.VANILLA, 100)
        m = int(np.searchsorted(trace.tour_ends, used))
        last_tour = trace.tour_ends[m] - (trace.tour_ends[m - 1] if m > 0 else 0)
        assert 99 <= used <= 99 + last_tour - 1


def test_budget_totals_recomputable_from_rows():
    spec = parse_spec(mh_table(realizations=20))
    report = equal_budget_report(spec)
    assert len(report.rows) == 2 * 3 * 20
    for s in report.summaries:
        sel = [r for r in report.rows if r.param == s.param and r.mode == s.mode]
        assert s.mean_proposals == pytest.approx(np.mean([r.proposals for r in sel]), rel=1e-12)
        assert s.max_proposals == max(r.proposals for r in sel)
        assert s.variance == pytest.approx(np.var([r.estimate for r in sel], ddof=1), rel=1e-12)
        assert s.variance_per_proposal == pytest.approx(s.variance * s.mean_proposals, rel=1e-12)
    assert budget_rows_csv(report) == budget_rows_csv(equal_budget_report(spec))
    assert budget_summary_csv(report).startswith("param,mode,nominal")


def test_standard_and_waste_budget_estimates_match_table():
    spec = parse_spec(mh_table(realizations=10))
    report = equal_budget_report(spec)
    table = variance_ratio_table(spec)
    std = [r.estimate for r in report.rows if r.param == 1.0 and r.mode == "standard"]
    assert np.allclose(std, table.estimates[0][:, 0, 0], rtol=1e-12, atol=1e-15)
    assert stats.describe(std).nobs == 10
