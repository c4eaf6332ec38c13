import json

import pytest

from infogcl import cli
from infogcl.cli import run_cli
from infogcl.errors import NumericError

FIXTURES = __import__("pathlib").Path(__file__).parent / "fixtures"


def run(capsys, *argv):
    code = run_cli(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_gradcheck_exits_zero(capsys):
    code, out, _ = run(capsys, "gradcheck")
    assert code == 0 and "FAIL" not in out and "gcn2+infonce" in out


def test_gradcheck_failure_exit_code(capsys, monkeypatch):
    real = cli.run_gradcheck_suite

    def broken(seed):
        results = real(seed)
        results[0].max_rel_error = 1.0
        return results

    monkeypatch.setattr(cli, "run_gradcheck_suite", broken)
    assert run(capsys, "gradcheck")[0] == 4


def test_mi_joint_and_bound(capsys):
    code, out, _ = run(capsys, "mi", "--joint", "[[0.5, 0], [0, 0.5]]")
    assert code == 0 and json.loads(out)["nats"] == pytest.approx(0.6931471805599453, abs=1e-15)
    code, out, _ = run(capsys, "mi", "--nce-loss", "1.0", "--n", "8")
    assert json.loads(out)["nats"] == pytest.approx(1.0794415416798357)
    assert run(capsys, "mi", "--n", "3")[0] == 1
    assert run(capsys, "mi", "--joint", "[[0.5, 0.6]]")[0] == 2


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["train", "--out", "x"], ["select", "--data", "synthetic:dense"],
                                  ["ingest", "--data", "synthetic:nope"]])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1 and "error" in err


def test_missing_data_exits_two(capsys, tmp_path):
    assert run(capsys, "ingest", "--data", str(tmp_path / "absent"))[0] == 2
    (tmp_path / "junk").mkdir()
    assert run(capsys, "ingest", "--data", str(tmp_path / "junk"))[0] == 2


def test_bad_config_exits_one(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"optimizer": {"epochs": 1, "momentum": 0.9}}))
    assert run(capsys, "train", "--data", "synthetic:dense", "--config", str(cfg), "--out", str(tmp_path))[0] == 1


def test_ingest_fixtures(capsys):
    code, out, _ = run(capsys, "ingest", "--data", str(FIXTURES / "hand"))
    summary = json.loads(out)
    assert code == 0 and summary["graphs"] == 2
    code, out, _ = run(capsys, "ingest", "--data", str(FIXTURES / "node6"))
    assert code == 0 and json.loads(out)["nodes"] == 6


def test_augment_preview(capsys):
    code, out, _ = run(capsys, "augment-preview", "--data", str(FIXTURES / "hand"), "--kind", "node_drop",
                       "--ratio", "0.4", "--seed", "3")
    doc = json.loads(out)
    assert code == 0 and doc["view"]["nodes"] == 3
    assert run(capsys, "augment-preview", "--data", str(FIXTURES / "hand"), "--kind", "warp")[0] == 1


def test_train_then_eval_checkpoint(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"optimizer": {"epochs": 2, "batch_size": 32}, "encoder": {"hidden_dim": 8}}))
    code, out, _ = run(capsys, "train", "--data", "synthetic:triangle-count", "--config", str(cfg),
                       "--out", str(tmp_path / "t"))
    assert code == 0 and json.loads(out)["epochs_run"] == 2
    lines = (tmp_path / "t" / "metrics.csv").read_text().splitlines()
    assert lines[0] == "epoch,split,metric,value" and len(lines) == 3
    code, out, _ = run(capsys, "eval", "--data", "synthetic:triangle-count", "--config", str(cfg),
                       "--checkpoint", str(tmp_path / "t" / "checkpoint.json"), "--out", str(tmp_path / "e"))
    doc = json.loads((tmp_path / "e" / "results.json").read_text())
    assert code == 0 and 0 <= doc["mean"] <= 1 and doc["protocol"] == "kfold10"


def test_divergence_exit_code(capsys, tmp_path, monkeypatch):
    from infogcl import pipeline

    def nan_loss(*args, **kwargs):
        raise NumericError("non-finite")

    monkeypatch.setattr(pipeline, "contrastive_loss", nan_loss)
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"optimizer": {"epochs": 1}}))
    code, _, err = run(capsys, "train", "--data", "synthetic:dense", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 3 and "epoch 0" in err


def test_select_augmentation_json(capsys):
    code, out, _ = run(capsys, "select", "--stage", "augmentation", "--data", "synthetic:two-factor",
                       "--candidates", '[{"kind": "identity"}, {"kind": "attr_mask", "ratio": 0.5}]')
    doc = json.loads(out)
    assert code == 0 and doc["task"] == "augmentation" and len(doc["candidates"]) == 3
    assert run(capsys, "select", "--stage", "augmentation", "--data", "synthetic:two-factor",
               "--candidates", '[{"kind": "attr_mask", "ratio": 2}]')[0] == 1


def test_select_mode_rejects_node_task(capsys):
    assert run(capsys, "select", "--stage", "mode", "--data", str(FIXTURES / "node6"))[0] == 1
