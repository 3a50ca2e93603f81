import csv
import hashlib
import json

import pytest

from defaultpred.cli import main


def digest(directory):
    """Checksums of the artifacts; run_config.json records the output path."""
    return {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(directory.iterdir())
        if p.is_file() and p.name != "run_config.json"
    }


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["generate", "--firms", "800", "--seed", "5", "--out", str(out)]) == 0
    return out


def test_generate_outputs_and_rerun_is_identical(data_dir, tmp_path):
    names = {p.name for p in data_dir.iterdir()}
    assert {"firm_quarters.csv", "balance_sheets.csv", "calibration.json", "run_config.json"} <= names
    calib = json.loads((data_dir / "calibration.json").read_text())
    assert calib["n_firms"] == 800 and calib["generator"]["seed"] == 5
    assert main(["generate", "--firms", "800", "--seed", "5", "--out", str(tmp_path)]) == 0
    assert digest(tmp_path) == digest(data_dir)


def test_generate_rejects_zero_firms(tmp_path, capsys):
    out = tmp_path / "new"
    assert main(["generate", "--firms", "0", "--out", str(out)]) == 2
    assert "firms" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_flag_is_usage_error():
    assert main(["generate", "--frims", "3"]) == 2


def test_evaluate_single_method(data_dir, tmp_path, capsys):
    code = main(["evaluate", "--data", str(data_dir), "--mode", "loan_imbalanced", "--methods", "NAIVE",
                 "--out", str(tmp_path)])
    assert code == 0
    with open(tmp_path / "loan_imbalanced.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["method"] for r in rows] == ["NAIVE"]
    assert (tmp_path / "loan_imbalanced.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert "NAIVE" in capsys.readouterr().out


def test_missing_column_is_data_error(data_dir, tmp_path, capsys):
    bad = tmp_path / "bad"
    bad.mkdir()
    lines = (data_dir / "firm_quarters.csv").read_text().splitlines()
    header = lines[0].split(",")
    drop = header.index("L7")
    (bad / "firm_quarters.csv").write_text(
        "\n".join(",".join(v for i, v in enumerate(line.split(",")) if i != drop) for line in lines) + "\n"
    )
    (bad / "balance_sheets.csv").write_bytes((data_dir / "balance_sheets.csv").read_bytes())
    assert main(["featurize", "--data", str(bad), "--out", str(tmp_path / "o")]) == 3
    err = capsys.readouterr().err
    assert "firm_quarters.csv" in err and "L7" in err


def test_featurize_and_train_from_features(data_dir, tmp_path):
    assert main(["featurize", "--data", str(data_dir), "--reference-year", "2014", "--out", str(tmp_path)]) == 0
    feats = tmp_path / "features_loan_2014.csv"
    assert feats.exists() and feats.with_suffix(".json").exists()
    assert main(["train", "--features", str(feats), "--method", "DT", "--out", str(tmp_path / "m")]) == 0
    assert (tmp_path / "m" / "model_DT.json").exists()


def test_pd_report_oracle(data_dir, tmp_path, capsys):
    assert main(["pd-report", "--data", str(data_dir), "--oracle", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "pd_summary.json").read_text())
    assert summary["model_source"] == "oracle"
    for g in ("coarse", "fine"):
        assert summary[g]["mean_error"]["model"] == 0.0
        assert (tmp_path / f"pd_{g}.csv").exists() and (tmp_path / f"pd_{g}.png").exists()
    assert "fine:" in capsys.readouterr().out


def test_pd_report_needs_a_model(data_dir, tmp_path):
    assert main(["pd-report", "--data", str(data_dir), "--out", str(tmp_path / "a")]) == 2
    missing = tmp_path / "nope.json"
    assert main(["pd-report", "--data", str(data_dir), "--model", str(missing), "--out", str(tmp_path / "b")]) == 3


def test_pd_report_with_trained_model(data_dir, tmp_path):
    m = tmp_path / "m"
    assert main(["train", "--data", str(data_dir), "--method", "DT", "--reference-year", "2013", "--out", str(m)]) == 0
    out = tmp_path / "r"
    assert main(["pd-report", "--data", str(data_dir), "--model", str(m / "model_DT.json"), "--out", str(out)]) == 0
    assert json.loads((out / "pd_summary.json").read_text())["model_source"] == "given"


def test_config_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 9, "generate": {"firms": 30, "quarters": 24}}))
    out = tmp_path / "o"
    assert main(["generate", "--config", str(cfg), "--firms", "40", "--out", str(out)]) == 0
    resolved = json.loads((out / "run_config.json").read_text())["config"]
    assert resolved["seed"] == 9  # config file over default
    assert resolved["quarters"] == 24  # command section
    assert resolved["firms"] == 40  # flag over config file
    assert resolved["default_rate"] > 0  # untouched default


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"generate": {"firmz": 3}}))
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    bad.write_text("{not json")
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["generate", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2


def test_evaluate_rerun_is_identical(data_dir, tmp_path):
    args = ["evaluate", "--data", str(data_dir), "--mode", "loan_balanced", "--methods", "NAIVE,DT,LOG", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert digest(tmp_path / "a") == digest(tmp_path / "b")
