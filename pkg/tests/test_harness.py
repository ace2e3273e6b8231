import json
import sys

import numpy as np
import pytest
import yaml

from faultloc import cli
from faultloc.errors import ConfigError, UnsupportedFormatError
from faultloc.experiment import EvalReport, ExperimentConfig, run_experiment
from faultloc.report import SUMMARY_COLUMNS, emit_report, lar_grid

QUICK = {
    "name": "quick39",
    "system": "39",
    "seed": 5,
    "generation": {"per_type": 12, "null_count": 4},
    "train": {"max_steps": 60, "check_period": 20, "learning_rate": 0.003},
}


def quick(**over):
    d = json.loads(json.dumps(QUICK))
    d.update(over)
    return ExperimentConfig.from_dict(d)


def write_config(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"sytem": "39"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"train": {"lr": 1}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"placement": {"algorithm": "greedy", "ratio": 1.5}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"classifier": "svm"})


def test_placement_size():
    cfg = ExperimentConfig.from_dict({"placement": {"algorithm": "random", "ratio": 0.18}})
    assert cfg.placement.size(68) == 13
    assert ExperimentConfig.from_dict({"placement": {"algorithm": "random", "K": 12}}).placement.size(68) == 12


def test_run_experiment_report_fields(tmp_path):
    rep = run_experiment(quick(), model_out=tmp_path / "m.bin", history_out=tmp_path / "h.csv")
    assert rep.status == "ok", rep.error
    assert 0 <= rep.lar <= 1 and rep.arc >= 1
    h = rep.hop
    assert h["exact"] <= h["one_hop"] <= h["two_hop"] <= 1
    assert {"TP", "LG", "DLG", "LL"} <= set(rep.lar_by_type) <= {"TP", "LG", "DLG", "LL", "NONE"}
    assert rep.runtime["training_steps"] == 60
    assert rep.zeta_test > 0
    assert (tmp_path / "m.bin").exists() and (tmp_path / "h.csv").exists()


def test_same_seed_byte_identical_reports(tmp_path):
    a = run_experiment(quick()).to_json()
    b = run_experiment(quick()).to_json()
    assert a == b
    c = run_experiment(quick(seed=6)).to_json()
    assert a != c


def test_pretrained_model_skips_training(tmp_path):
    first = run_experiment(quick(), model_out=tmp_path / "m.bin")
    cfg = quick(model=str(tmp_path / "m.bin"))
    again = run_experiment(cfg)
    assert again.status == "ok"
    assert again.runtime["training_steps"] == 0
    assert again.lar == first.lar and again.arc == first.arc


def test_delay_config_reports_nu_d():
    rep = run_experiment(quick(delay={"mu_d": 20, "sigma_d": 6, "fraction": 0.5,
                                      "fault_windows_ms": [100, 300]}))
    assert rep.status == "ok", rep.error
    assert rep.nu_d is not None
    assert set(rep.nu_f) == {"100", "300"}


def test_partial_observability_and_nn():
    rep = run_experiment(quick(classifier="nn", placement={"algorithm": "random", "ratio": 0.3}))
    assert rep.status == "ok", rep.error
    assert len(rep.observed) == 12 and rep.ratio == pytest.approx(12 / 39)


def test_failure_is_captured():
    rep = run_experiment(quick(case_file="does/not/exist.csv"))
    assert rep.failed and rep.failed_stage == "grid" and rep.error_kind == "validation"


def make_reports():
    reps = []
    for k, ratio in enumerate([0.2, 0.3, 0.2]):
        reps.append(EvalReport(f"e{k}", {}, system="68", classifier="cnn", observed=[1, 2],
                               ratio=ratio, lar=0.5 + 0.1 * k,
                               lar_by_type={"TP": 0.5 + k / 10, "LG": 0.4}, arc=1.5))
    return reps


def test_lar_grid_four_by_four():
    reps = []
    for q in (0.15, 0.2, 0.25, 0.3):
        reps.append(EvalReport(f"r{q}", {}, ratio=q, lar=0.5,
                               lar_by_type={t: q for t in ("TP", "LG", "DLG", "LL")}))
    types, ratios, grid = lar_grid(reps)
    assert types == ["TP", "LG", "DLG", "LL"] and ratios == [0.15, 0.2, 0.25, 0.3]
    assert np.allclose(np.array(grid, float), np.tile([0.15, 0.2, 0.25, 0.3], (4, 1)))


def test_emit_report_csv(tmp_path):
    paths = emit_report(make_reports(), tmp_path)
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0].split(",") == list(SUMMARY_COLUMNS)
    assert len(summary) == 4
    grid = (tmp_path / "lar_grid.csv").read_text().splitlines()
    assert grid[0] == "fault_type,ratio_0.2,ratio_0.3"
    assert grid[1].startswith("TP,0.6,0.6")
    assert len(paths) == 2


def test_empty_report_is_header_only(tmp_path):
    emit_report([], tmp_path)
    assert (tmp_path / "summary.csv").read_text() == ",".join(SUMMARY_COLUMNS) + "\n"


def test_svg_output(tmp_path):
    pytest.importorskip("matplotlib")
    a = emit_report(make_reports(), tmp_path / "a", ["csv", "svg"])[-1].read_bytes()
    b = emit_report(make_reports(), tmp_path / "b", ["svg"])[-1].read_bytes()
    assert a.startswith(b"<?xml") and a == b


def test_svg_without_matplotlib(tmp_path, monkeypatch):
    monkeypatch.setitem(sys.modules, "matplotlib", None)
    with pytest.raises(UnsupportedFormatError):
        emit_report(make_reports(), tmp_path, ["svg"])
    with pytest.raises(UnsupportedFormatError):
        emit_report(make_reports(), tmp_path, ["pdf"])


def test_report_json_roundtrip(tmp_path):
    rep = make_reports()[0]
    path = rep.save(tmp_path / "r.json")
    assert EvalReport.load(path) == rep


# ---- command line ------------------------------------------------------------

def test_cli_evaluate_and_report(tmp_path, capsys):
    cfg = write_config(tmp_path, QUICK)
    out = tmp_path / "run"
    assert cli.main(["evaluate", "--config", str(cfg), "--seed", "5", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["status"] == "ok" and rep["config"]["seed"] == 5
    assert (out / "placement.json").exists()
    rcfg = write_config(tmp_path, {"reports": [str(out / "report.json")], "formats": ["csv"]}, "r.yaml")
    assert cli.main(["report", "--config", str(rcfg), "--out", str(tmp_path / "tables")]) == 0
    assert (tmp_path / "tables" / "summary.csv").exists()


def test_cli_generate_train_place(tmp_path):
    cfg = write_config(tmp_path, QUICK)
    out = tmp_path / "o"
    assert cli.main(["generate", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "train.csv").exists() and (out / "test.csv").exists()
    assert (out / "train.json").exists()
    assert cli.main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "model.bin").exists() and (out / "history.csv").exists()
    pcfg = write_config(tmp_path, {**QUICK, "placement": {"algorithm": "two_hop_vc"}}, "p.yaml")
    assert cli.main(["place", "--config", str(pcfg), "--out", str(out)]) == 0
    assert json.loads((out / "placement.json").read_text())["algorithm"] == "two_hop_vc"


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_cli_exit_codes(tmp_path):
    missing = tmp_path / "nope.yaml"
    assert cli.main(["evaluate", "--config", str(missing), "--out", str(tmp_path)]) == 1
    bad = write_config(tmp_path, {"system": "39", "bogus": 1}, "bad.yaml")
    assert cli.main(["generate", "--config", str(bad), "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit) as info:
        cli.main(["train", "--config", str(bad), "--seed", "-3"])
    assert info.value.code == 1
    # training blows up numerically -> computation failure
    diverge = write_config(tmp_path, {**QUICK, "train": {"max_steps": 50, "learning_rate": 1e300,
                                                         "check_period": 10}}, "div.yaml")
    assert cli.main(["evaluate", "--config", str(diverge), "--out", str(tmp_path / "d")]) == 2
    rep = json.loads((tmp_path / "d" / "report.json").read_text())
    assert rep["failed_stage"] == "train"


def test_cli_seed_overrides_config(tmp_path):
    cfg = write_config(tmp_path, QUICK)
    cli.main(["generate", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path / "a")])
    meta = json.loads((tmp_path / "a" / "train.json").read_text())
    assert meta["config"]["generation"]["seed"] == 9
