import json

from click.testing import CliRunner

from querygate.cli import main
from querygate.config import load_config
from querygate.model import load_model, write_dataset
from querygate.taxonomy import parse_category
from tests.conftest import signature_training_set


def test_config_defaults():
    cfg = load_config(env={})
    assert cfg.listen_port == 8080
    assert cfg.sample_size == 50


def test_config_file_and_env_overrides(tmp_path):
    path = tmp_path / "gw.yaml"
    path.write_text("listen_port: 9000\nlog_path: /data/d.log\n")
    cfg = load_config(str(path), env={"QUERYGATE_SAMPLE_SIZE": "25",
                                      "QUERYGATE_LISTEN_PORT": "9100"})
    assert cfg.listen_port == 9100  # env wins over file
    assert cfg.log_path == "/data/d.log"
    assert cfg.sample_size == 25


def test_cli_simulate_and_replay(tmp_path):
    runner = CliRunner()
    stream = tmp_path / "s.jsonl"
    labels = tmp_path / "s.labels"
    res = runner.invoke(main, [
        "simulate", "--days", "4", "--peak", "200", "--seed", "5",
        "--out", str(stream), "--labels", str(labels),
    ])
    assert res.exit_code == 0, res.output
    assert stream.exists() and labels.exists()

    # train a model on signature text, then replay locally
    dataset = tmp_path / "train.jsonl"
    write_dataset(dataset, signature_training_set())
    model_path = tmp_path / "m.qgm"
    res = runner.invoke(main, [
        "train", "--dataset", str(dataset), "--out", str(model_path),
        "--epochs", "60", "--lr", "0.5",
    ])
    assert res.exit_code == 0, res.output
    # training-time featurizer is the package default
    assert load_model(model_path).dim == 2**18

    res = runner.invoke(main, [
        "replay", "--stream", str(stream), "--labels", str(labels),
        "--model", str(model_path), "--log", str(tmp_path / "replay.log"),
        "--limit", "120",
    ])
    assert res.exit_code == 0, res.output
    assert "agreement:" in res.output


def test_cli_catalog():
    res = CliRunner().invoke(main, ["catalog"])
    assert res.exit_code == 0
    doc = json.loads(res.output)
    assert doc["categories"]["safe"]["ordinal"] == 12


def test_cli_analytics_export(tmp_path, sig_model, small_featurizer):
    from datetime import datetime, timezone

    from querygate.gateway import Gateway, QueryRecord

    gw = Gateway(tmp_path / "d.log", weights=sig_model, featurizer=small_featurizer,
                 clock=lambda: datetime(2025, 1, 1, tzinfo=timezone.utc))
    for i, text in enumerate(["sig_safe 방법 n1", "sig_privacy 주소 n1"]):
        gw.decide(QueryRecord(f"q{i}", text, datetime(2025, 1, 1, tzinfo=timezone.utc)))

    runner = CliRunner()
    res = runner.invoke(main, ["analytics", "export", "--log", str(tmp_path / "d.log"),
                               "--what", "overall"])
    assert res.exit_code == 0, res.output
    assert "privacy,100.0000" in res.output

    res = runner.invoke(main, ["analytics", "export", "--log", str(tmp_path / "d.log"),
                               "--what", "volume", "--format", "json"])
    assert json.loads(res.output)["ratio"]["2025-01-01"] == 1.0


def test_cli_analytics_plot(tmp_path, sig_model, small_featurizer):
    from datetime import datetime, timezone

    from querygate.gateway import Gateway, QueryRecord

    gw = Gateway(tmp_path / "d.log", weights=sig_model, featurizer=small_featurizer)
    for day in (1, 2):
        for i in range(3):
            gw._clock = lambda d=day: datetime(2025, 1, d, tzinfo=timezone.utc)
            gw.decide(QueryRecord(f"q{day}-{i}", "sig_privacy 주소 n1",
                                  datetime(2025, 1, day, tzinfo=timezone.utc)))

    res = CliRunner().invoke(main, ["analytics", "plot", "--log", str(tmp_path / "d.log"),
                                    "--out-dir", str(tmp_path / "figs")])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "figs" / "volume_ratio.png").exists()
    assert (tmp_path / "figs" / "daily_distribution.png").exists()
    assert (tmp_path / "figs" / "correlation.png").exists()
