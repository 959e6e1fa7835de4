import json

import pytest

from rbmc import bias_oracle
from rbmc.cli import main, read_metadata_spec
from rbmc.experiments import load_spec


def write_spec(tmp_path, raw, name="spec.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


def small_table(**overrides):
    raw = {
        "kind": "table", "name": "cli_table", "sampler": "MH",
        "target": {"name": "normal"},
        "proposal": {"name": "gaussian_rw", "grid": {"param": "scale", "values": [1.0, 2.0]}},
        "integrands": [{"kind": "x"}, {"kind": "indicator", "threshold": 0.0}],
        "budget": 20, "realizations": 60, "master_seed": 1,
    }
    raw.update(overrides)
    return raw


def run(args, env=None):
    return main(args, environ=env or {})


def last_error(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


def test_table_writes_csv_text_and_metadata(tmp_path, capsys):
    spec = write_spec(tmp_path, small_table())
    out = tmp_path / "out"
    assert run(["table", "--spec", spec, "--out", str(out)]) == 0
    rows = (out / "table.csv").read_text().strip().split("\n")
    assert len(rows) == 1 + 4
    assert "cli_table" in (out / "table.txt").read_text()
    assert "cli_table" in capsys.readouterr().out
    assert read_metadata_spec(out / "run_metadata.json") == load_spec(spec)


def test_metadata_round_trip_keeps_seed_override(tmp_path):
    spec = write_spec(tmp_path, small_table())
    out = tmp_path / "out"
    assert run(["table", "--spec", spec, "--out", str(out), "--seed", "77"]) == 0
    again = read_metadata_spec(out / "run_metadata.json")
    assert again.master_seed == 77
    assert again == load_spec(spec).with_seed(77)


def test_refuses_to_overwrite_without_force(tmp_path, capsys):
    spec = write_spec(tmp_path, small_table())
    out = tmp_path / "out"
    assert run(["table", "--spec", spec, "--out", str(out)]) == 0
    before = (out / "table.csv").read_text()
    assert run(["table", "--spec", spec, "--out", str(out), "--seed", "2"]) == 2
    assert last_error(capsys)["error"] == "output_exists"
    assert (out / "table.csv").read_text() == before
    assert run(["table", "--spec", spec, "--out", str(out), "--seed", "2", "--force"]) == 0
    assert (out / "table.csv").read_text() != before


def test_empty_integrands_is_a_spec_error(tmp_path, capsys):
    spec = write_spec(tmp_path, small_table(integrands=[]))
    assert run(["table", "--spec", spec, "--out", str(tmp_path / "o")]) == 2
    record = last_error(capsys)
    assert record["error"] == "spec" and record["field"] == "integrands"
    assert not (tmp_path / "o").exists()


def test_missing_spec_and_bad_json(tmp_path, capsys):
    assert run(["table", "--spec", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["table", "--spec", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert last_error(capsys)["field"] == "spec"


def test_wrong_command_for_spec_kind(tmp_path, capsys):
    spec = write_spec(tmp_path, small_table())
    assert run(["fanchart", "--spec", spec, "--out", str(tmp_path / "o")]) == 2
    assert last_error(capsys)["field"] == "kind"


def test_degenerate_sampler_exits_3(tmp_path, capsys):
    raw = {
        "kind": "table", "name": "stuck", "sampler": "JumpRestore",
        "target": {"name": "exponential"},
        "proposal": {"name": "gaussian_rw", "params": {"scale": 1.0}},
        "transfer": {"name": "gaussian", "params": {"loc": -100.0, "scale": 1.0}},
        "integrands": [{"kind": "x"}],
        "budget": 3, "realizations": 4, "master_seed": 1,
    }
    spec = write_spec(tmp_path, raw)
    out = tmp_path / "o"
    assert run(["table", "--spec", spec, "--out", str(out)]) == 3
    assert last_error(capsys)["error"] == "degenerate"
    assert "failed" in (out / "table.csv").read_text()


def test_same_seed_is_byte_identical_for_any_jobs(tmp_path):
    spec = write_spec(tmp_path, small_table(realizations=120))
    outs = []
    for i, jobs in enumerate(["1", "2", "1"]):
        out = tmp_path / f"o{i}"
        assert run(["table", "--spec", spec, "--out", str(out), "--jobs", jobs]) == 0
        outs.append(out)
    for name in ("table.csv", "table.txt", "run_metadata.json"):
        texts = {(o / name).read_bytes() for o in outs}
        assert len(texts) == 1


def test_environment_overrides(tmp_path):
    spec = write_spec(tmp_path, small_table())
    assert run(["table", "--spec", spec, "--out", str(tmp_path / "a")], {"RBMC_SEED": "9", "RBMC_JOBS": "2"}) == 0
    assert run(["table", "--spec", spec, "--out", str(tmp_path / "b"), "--seed", "9"]) == 0
    assert (tmp_path / "a" / "table.csv").read_bytes() == (tmp_path / "b" / "table.csv").read_bytes()
    # the flag wins over the environment
    assert run(["table", "--spec", spec, "--out", str(tmp_path / "c"), "--seed", "9"], {"RBMC_SEED": "3"}) == 0
    assert (tmp_path / "c" / "table.csv").read_bytes() == (tmp_path / "b" / "table.csv").read_bytes()
    assert run(["table", "--spec", spec, "--out", str(tmp_path / "d")], {"RBMC_JOBS": "zero"}) == 2


def test_seed_flag_must_be_u64(tmp_path):
    spec = write_spec(tmp_path, small_table())
    with pytest.raises(SystemExit):
        run(["table", "--spec", spec, "--out", str(tmp_path), "--seed", str(2**64)])


def test_bundled_fig_e1_has_100_rows_and_no_svg_by_default(tmp_path):
    out = tmp_path / "fig"
    assert run(["fanchart", "--spec", "fig_e1", "--out", str(out)]) == 0
    rows = (out / "fanchart.csv").read_text().strip().split("\n")
    assert len(rows) == 1 + 100
    assert not (out / "fanchart.svg").exists()


def test_svg_flag_writes_svg(tmp_path):
    raw = {
        "kind": "fanchart", "name": "median", "sampler": "MH",
        "target": {"name": "normal"},
        "proposal": {"name": "gaussian_rw", "params": {"scale": 2.0}},
        "integrands": [{"kind": "x"}],
        "budget": 100, "realizations": 50, "master_seed": 1,
        "fanchart": {"quantiles": [0.5], "checkpoints": 10},
    }
    spec = write_spec(tmp_path, raw)
    out = tmp_path / "fig"
    assert run(["fanchart", "--spec", spec, "--out", str(out), "--svg"]) == 0
    assert (out / "fanchart.svg").read_text().startswith("<svg")
    rows = [r.split(",") for r in (out / "fanchart.csv").read_text().strip().split("\n")[1:]]
    assert all(r[1] == r[2] and r[3] == r[4] for r in rows)


def test_bias_check_bundled_passes(tmp_path, capsys):
    out = tmp_path / "bias"
    assert run(["bias-check", "--spec", "bias_3state", "--out", str(out)]) == 0
    lines = (out / "bias.csv").read_text().strip().split("\n")
    assert len(lines) == 1 + 3


def bias_spec(tmp_path, weights, proposal):
    raw = {"kind": "bias", "name": "b", "sampler": "MH",
           "target": {"name": "discrete", "params": {"weights": weights}},
           "proposal": proposal, "budget": 2000, "master_seed": 1}
    return write_spec(tmp_path, raw)


def test_bias_check_always_accepting_spec(tmp_path):
    w = [0.2, 0.5, 0.3]
    spec = bias_spec(tmp_path, w, {"name": "matrix", "params": {"matrix": [w, w, w]}})
    out = tmp_path / "bias"
    assert run(["bias-check", "--spec", spec, "--out", str(out)]) == 0
    for line in (out / "bias.csv").read_text().strip().split("\n")[1:]:
        fields = line.split(",")
        assert abs(float(fields[3])) < 1e-12 and float(fields[4]) == 0.0


def test_tampered_prediction_fails_the_gate(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(bias_oracle, "predicted_bias", lambda a, r2: (1 - a) / (1 - r2) + 0.2)
    spec = bias_spec(tmp_path, [0.5, 0.3, 0.2], {"name": "uniform_discrete", "params": {"state_count": 3}})
    assert run(["bias-check", "--spec", spec, "--out", str(tmp_path / "bias")]) == 4
    assert last_error(capsys)["error"] == "gate"


def test_bias_check_needs_discrete_target(tmp_path):
    raw = {"kind": "bias", "name": "b", "target": {"name": "normal"},
           "proposal": {"name": "gaussian_rw", "params": {"scale": 1.0}}, "budget": 10}
    assert run(["bias-check", "--spec", write_spec(tmp_path, raw), "--out", str(tmp_path / "o")]) == 2


def normalize_spec(tmp_path, tours, c_tilde=1.0):
    raw = json.loads(load_spec("normalize_gauss2").to_json())
    raw["budget"] = tours
    raw["restore"]["rate"]["value"] = c_tilde
    return write_spec(tmp_path, raw, name=f"norm_{tours}_{c_tilde}.json")


def test_normalize_check_bundled_passes(tmp_path):
    out = tmp_path / "n"
    assert run(["normalize-check", "--spec", "normalize_gauss2", "--out", str(out)]) == 0
    record = json.loads((out / "normalize.json").read_text())
    assert record["gate_active"] and record["passed"] and record["true"] == 2.0


def test_normalize_check_small_budget_is_informational(tmp_path):
    out = tmp_path / "n"
    assert run(["normalize-check", "--spec", normalize_spec(tmp_path, 10), "--out", str(out)]) == 0
    assert json.loads((out / "normalize.json").read_text())["gate_active"] is False


def test_normalize_check_verdict_is_invariant_in_c_tilde(tmp_path):
    codes = [run(["normalize-check", "--spec", normalize_spec(tmp_path, 10_000, c), "--out",
                  str(tmp_path / f"n{c}")]) for c in (1.0, 2.0)]
    assert codes == [0, 0]


def test_budget_command(tmp_path):
    spec = write_spec(tmp_path, small_table(realizations=10))
    out = tmp_path / "b"
    assert run(["budget", "--spec", spec, "--out", str(out)]) == 0
    assert len((out / "budget.csv").read_text().strip().split("\n")) == 1 + 2 * 3 * 10
    assert (out / "budget_summary.csv").exists()
