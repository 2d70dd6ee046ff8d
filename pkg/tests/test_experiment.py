import csv
import json

import pytest
import yaml

from symrl import cli
from symrl.errors import ValidationError
from symrl.experiment import (
    METRIC_FIELDS,
    OUTPUT_DIR_ENV,
    ExperimentConfig,
    RunSummary,
    compare,
    export_csv,
    metrics_path,
    run_experiment,
    summarize_metrics,
)

BASE = {
    "name": "tiny",
    "env": "gridworld",
    "noise": {"kind": "bsc", "p": 0.1},
    "seeds": [0, 1],
    "trainer": {"total_updates": 3, "n_envs": 2, "n_steps": 16, "minibatch_size": 16, "eval_episodes": 3,
                "loss": {"alpha": 0.5, "beta": 10.0}},
}


def config(tmp_path, **changes):
    raw = {**BASE, **changes}
    return ExperimentConfig.from_dict(raw, output_dir=tmp_path / raw["name"])


def test_run_writes_one_metrics_file_per_seed_and_a_summary(tmp_path):
    cfg = config(tmp_path, seeds=[0, 1, 2, 3, 4])
    summary = run_experiment(cfg)
    files = sorted(p.name for p in cfg.output_dir.iterdir())
    assert files == [f"metrics_seed{s}.jsonl" for s in range(5)] + ["summary.json"]
    on_disk = json.loads((cfg.output_dir / "summary.json").read_text())
    assert on_disk["aggregate"]["n"] == 5 and on_disk["config_hash"] == summary.config_hash
    lines = metrics_path(cfg.output_dir, 0).read_text().splitlines()
    assert len(lines) == 3
    assert all(set(METRIC_FIELDS) <= set(json.loads(line)) for line in lines)


def test_metrics_reaggregate_to_the_summary(tmp_path):
    cfg = config(tmp_path, seeds=[3, 4, 5])
    summary = run_experiment(cfg)
    seeds, mean, se = summarize_metrics({s: metrics_path(cfg.output_dir, s) for s in cfg.seeds})
    assert (mean, se) == (summary.aggregate_mean, summary.aggregate_se)
    assert [s.final_returns for s in seeds] == [s.final_returns for s in summary.seeds]


def test_parallel_jobs_do_not_change_results(tmp_path):
    serial = config(tmp_path, name="serial")
    parallel = config(tmp_path, name="parallel")
    run_experiment(serial)
    run_experiment(parallel, jobs=2)
    for s in serial.seeds:
        assert metrics_path(serial.output_dir, s).read_bytes() == metrics_path(parallel.output_dir, s).read_bytes()


@pytest.mark.parametrize(
    "changes",
    [
        {"env": "mountaincar"},
        {"env": "pointmass"},
        {"seeds": []},
        {"seeds": [1, 1]},
        {"noise": {"kind": "laplace"}},
        {"trainer": {"algorithm": "DQN"}},
        {"trainer": {"no_such_field": 1}},
        {"extra": True},
    ],
)
def test_invalid_configs_raise_before_writing(tmp_path, changes):
    with pytest.raises(ValidationError):
        config(tmp_path, **changes)
    assert not any(tmp_path.iterdir())


def test_config_hash_ignores_name_and_output_dir(tmp_path):
    a = config(tmp_path)
    b = ExperimentConfig.from_dict({**BASE, "name": "other"}, output_dir=tmp_path / "elsewhere")
    assert a.config_hash() == b.config_hash()
    for changes in ({"seeds": [0, 2]}, {"noise": {"kind": "bsc", "p": 0.2}}, {"trainer": {**BASE["trainer"], "learning_rate": 1e-3}}):
        assert config(tmp_path, **changes).config_hash() != a.config_hash()


def test_output_dir_resolution(tmp_path, monkeypatch):
    raw = {k: v for k, v in BASE.items()}
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env"))
    assert ExperimentConfig.from_dict(raw).output_dir == tmp_path / "env" / "tiny"
    assert ExperimentConfig.from_dict({**raw, "output_dir": str(tmp_path / "cfg")}).output_dir == tmp_path / "cfg"
    assert ExperimentConfig.from_dict(raw, output_dir=tmp_path / "flag").output_dir == tmp_path / "flag"


def test_compare_self_is_a_tie(tmp_path):
    summary = run_experiment(config(tmp_path))
    report = compare(summary, summary)
    assert report["verdict"] == "tie" and report["mean_difference"] == 0.0
    assert all(p["diff"] == 0 for p in report["paired"])


def test_compare_signed_difference(tmp_path):
    ppo = run_experiment(config(tmp_path, name="ppo", trainer={**BASE["trainer"], "loss": {"alpha": 1.0, "beta": 0.0}}))
    run_experiment(config(tmp_path, name="sppo"))
    sppo = RunSummary.load(tmp_path / "sppo" / "summary.json")
    report = compare(tmp_path / "ppo" / "summary.json", tmp_path / "sppo" / "summary.json")
    expected = sppo.aggregate_mean - ppo.aggregate_mean
    assert report["mean_difference"] == pytest.approx(expected, abs=1e-12)
    assert report["verdict"] in ("a", "b", "tie")


def test_compare_rejects_mismatched_runs(tmp_path):
    a = run_experiment(config(tmp_path, name="a"))
    b = run_experiment(config(tmp_path, name="b", seeds=[0, 2]))
    with pytest.raises(ValidationError):
        compare(a, b)
    c = run_experiment(config(tmp_path, name="c", noise={"kind": "none"}))
    with pytest.raises(ValidationError):
        compare(a, c)


def test_export_csv(tmp_path):
    cfg = config(tmp_path, seeds=[0])
    run_experiment(cfg)
    out = export_csv(metrics_path(cfg.output_dir, 0))
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 3 and rows[0]["update"] == "1" and rows[0]["seconds"] == ""


def test_cli_run_compare_verify_export(tmp_path, capsys):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(BASE))
    out = tmp_path / "out"
    assert cli.main(["run", str(path), "--output-dir", str(out), "--seed-override", "4", "--quiet"]) == 0
    assert [p.name for p in sorted(out.iterdir())] == ["metrics_seed4.jsonl", "summary.json"]
    assert cli.main(["compare", str(out / "summary.json"), str(out / "summary.json"), "--quiet"]) == 0
    assert json.loads(capsys.readouterr().out.strip().splitlines()[-1])["verdict"] == "tie"
    assert cli.main(["export-csv", str(out / "metrics_seed4.jsonl"), "-o", str(tmp_path / "m.csv")]) == 0
    assert (tmp_path / "m.csv").exists()
    assert cli.main(["verify", "noise"]) == 0


def test_cli_usage_errors(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump({**BASE, "env": "nowhere"}))
    assert cli.main(["run", str(path), "--output-dir", str(tmp_path / "x")]) == 2
    assert not (tmp_path / "x").exists()
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == 2
    with pytest.raises(SystemExit):
        cli.main(["verify", "everything"])


def test_cli_reports_numeric_failure(tmp_path, monkeypatch):
    from symrl import experiment
    from symrl.errors import NumericError

    def boom(self):
        raise NumericError("non-finite training loss")

    monkeypatch.setattr(experiment.Trainer, "step", boom)
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(BASE))
    assert cli.main(["run", str(path), "--output-dir", str(tmp_path / "o")]) == 1
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert all("NumericError" in s["error"] for s in summary["seeds"])


def test_shipped_configs_parse():
    from pathlib import Path

    configs = sorted((Path(__file__).parent.parent / "configs").glob("*.yaml"))
    assert configs
    for p in configs:
        ExperimentConfig.load(p, output_dir="unused")
