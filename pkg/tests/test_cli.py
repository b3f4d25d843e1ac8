import json
from pathlib import Path

import numpy as np
import pytest

from emonet.cli import main
from emonet.dataset import load_dataset


def write_config(path: Path, **overrides) -> Path:
    cfg = {
        "seed": 21,
        "dataset": {"path": str(path.parent / "data")},
        "generate": {
            "n_classes": 3,
            "n_per_class": 30,
            "n_units": 8,
            "n_bins": 10,
            "separation": 2.0,
            "noise": {"kind": "symmetric", "rate": 0.2, "exact_count": True},
        },
        "model": {"hidden_sizes": [12], "epochs": 10, "batch_size": 32},
        "cleaning": {
            "k_folds": 4,
            "aux": {"hidden_sizes": [8], "epochs": 15, "batch_size": 32},
        },
        "harness": {"ratios": [0.0, 0.2], "seeds": 2, "test_fraction": 0.2, "cv_folds": 4},
    }
    for key, value in overrides.items():
        section, _, leaf = key.partition(".")
        if leaf:
            cfg[section][leaf] = value
        else:
            cfg[section] = value
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture
def workspace(tmp_path):
    cfg = write_config(tmp_path / "config.json")
    rc = main(["generate", "--config", str(cfg), "--out", str(tmp_path / "data")])
    assert rc == 0
    return tmp_path, cfg


class TestGenerate:
    def test_identity_noise_zero_flips(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", **{"generate.noise": {"kind": "none"}})
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "d")]) == 0
        ds = load_dataset(tmp_path / "d")
        assert np.array_equal(ds.noisy_labels, ds.true_labels)

    def test_same_seed_bit_identical(self, tmp_path):
        cfg = write_config(tmp_path / "c.json")
        main(["generate", "--config", str(cfg), "--out", str(tmp_path / "a")])
        main(["generate", "--config", str(cfg), "--out", str(tmp_path / "b")])
        for name in ["manifest.json", "features.f32le", "labels.u8", "true_labels.u8"]:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = write_config(tmp_path / "c.json")
        main(["generate", "--config", str(cfg), "--out", str(tmp_path / "a")])
        main(["generate", "--config", str(cfg), "--seed", "99", "--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "features.f32le").read_bytes()
        b = (tmp_path / "b" / "features.f32le").read_bytes()
        assert a != b

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg_path = tmp_path / "c.json"
        write_config(cfg_path)
        raw = json.loads(cfg_path.read_text())
        raw["generate"]["n_classse"] = 3
        cfg_path.write_text(json.dumps(raw))
        assert main(["generate", "--config", str(cfg_path), "--out", str(tmp_path / "d")]) == 2

    def test_env_var_out_root(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path / "c.json")
        monkeypatch.setenv("EMONET_OUT", str(tmp_path / "root"))
        assert main(["generate", "--config", str(cfg)]) == 0
        assert (tmp_path / "root" / "generate" / "manifest.json").is_file()

    def test_no_out_no_env_exits_2(self, tmp_path, monkeypatch):
        monkeypatch.delenv("EMONET_OUT", raising=False)
        cfg = write_config(tmp_path / "c.json")
        assert main(["generate", "--config", str(cfg)]) == 2


class TestClean:
    def test_outputs(self, workspace):
        tmp_path, cfg = workspace
        out = tmp_path / "cleaned"
        assert main(["clean", "--config", str(cfg), "--out", str(out)]) == 0
        lines = (out / "clean.csv").read_text().strip().splitlines()
        assert len(lines) == 91  # header + 90 samples
        report = json.loads((out / "confident_joint.json").read_text())
        assert len(report["counts"]) == 3

    def test_deterministic(self, workspace):
        tmp_path, cfg = workspace
        main(["clean", "--config", str(cfg), "--out", str(tmp_path / "c1")])
        main(["clean", "--config", str(cfg), "--out", str(tmp_path / "c2")])
        assert (tmp_path / "c1" / "clean.csv").read_bytes() == (
            tmp_path / "c2" / "clean.csv"
        ).read_bytes()


class TestTrain:
    @pytest.mark.parametrize("mode", ["baseline", "emo_p", "emo_r"])
    def test_modes_produce_artifacts(self, workspace, mode):
        tmp_path, cfg = workspace
        out = tmp_path / f"train-{mode}"
        assert main(["train", "--config", str(cfg), "--mode", mode, "--out", str(out)]) == 0
        for name in ["checkpoint.bin", "training_log.csv", "training_curve.png",
                     "weights.csv", "train.json"]:
            assert (out / name).is_file(), name
        doc = json.loads((out / "train.json").read_text())
        assert doc["mode"] == mode
        assert 0.0 <= doc["metrics"]["accuracy"] <= 1.0
        assert doc["config"]["seed"] == 21

    def test_all_pruned_exits_3(self, workspace):
        tmp_path, _ = workspace
        cfg = write_config(
            tmp_path / "prune_all.json",
            **{"cleaning.method": "by_rank_fraction", "cleaning.rank_fraction": 1.0},
        )
        rc = main(["train", "--config", str(cfg), "--mode", "emo_p",
                   "--out", str(tmp_path / "t")])
        assert rc == 3

    def test_eval_dataset(self, workspace):
        tmp_path, cfg_path = workspace
        raw = json.loads(cfg_path.read_text())
        raw["dataset"]["eval_path"] = raw["dataset"]["path"]
        cfg2 = tmp_path / "eval.json"
        cfg2.write_text(json.dumps(raw))
        out = tmp_path / "train-eval"
        assert main(["train", "--config", str(cfg2), "--out", str(out)]) == 0
        doc = json.loads((out / "train.json").read_text())
        assert doc["evaluated_on"] == "eval"


class TestAblate:
    def test_outputs_and_shared_baseline(self, workspace):
        tmp_path, cfg = workspace
        out = tmp_path / "abl"
        assert main(["ablate", "--config", str(cfg), "--out", str(out)]) == 0
        doc = json.loads((out / "ablation.json").read_text())
        assert [p["ratio"] for p in doc["points"]] == [0.0, 0.2]
        zero = doc["points"][0]
        assert zero["per_seed_cl"] == zero["per_seed_random"]
        assert (out / "ablation.csv").is_file()
        assert (out / "ablation.png").is_file()


class TestCv:
    def test_cv_outputs(self, workspace):
        tmp_path, cfg = workspace
        out = tmp_path / "cv"
        assert main(["cv", "--config", str(cfg), "--out", str(out)]) == 0
        doc = json.loads((out / "cv.json").read_text())
        assert doc["n_folds"] == 4
        assert len((out / "cv.csv").read_text().strip().splitlines()) == 5


class TestReport:
    def build_results(self, workspace):
        tmp_path, cfg = workspace
        results = tmp_path / "results"
        for mode in ["baseline", "emo_p", "emo_r"]:
            main(["train", "--config", str(cfg), "--mode", mode,
                  "--out", str(results / f"train-{mode}")])
        return tmp_path, results

    def test_aggregates_and_bolds(self, workspace):
        tmp_path, results = self.build_results(workspace)
        out = tmp_path / "report"
        assert main(["report", str(results), "--out", str(out)]) == 0
        csv_lines = (out / "report.csv").read_text().strip().splitlines()
        assert csv_lines[0].startswith("dataset,experiment,baseline_accuracy")
        assert len(csv_lines) == 2
        md = (out / "report.md").read_text()
        docs = [json.loads(p.read_text()) for p in results.glob("*/train.json")]
        by_mode = {d["mode"]: d["metrics"]["accuracy"] for d in docs}
        for mode in ["emo_p", "emo_r"]:
            formatted = f"{by_mode[mode]:.4f}"
            if by_mode[mode] > by_mode["baseline"]:
                assert f"**{formatted}**" in md
        assert (out / "report.png").is_file()

    def test_idempotent_rerun(self, workspace):
        tmp_path, results = self.build_results(workspace)
        out = tmp_path / "report"
        main(["report", str(results), "--out", str(out)])
        first = {p.name: p.read_bytes() for p in out.iterdir() if p.name != ".emonet.lock"}
        main(["report", str(results), "--out", str(out)])
        second = {p.name: p.read_bytes() for p in out.iterdir() if p.name != ".emonet.lock"}
        assert first == second

    def test_empty_dir_exits_2(self, tmp_path):
        (tmp_path / "empty").mkdir()
        assert main(["report", str(tmp_path / "empty"), "--out", str(tmp_path / "r")]) == 2

    def test_mixed_versions_exit_4(self, workspace):
        tmp_path, results = self.build_results(workspace)
        doc = json.loads((results / "train-baseline" / "train.json").read_text())
        doc["format_version"] = 2
        (results / "train-baseline" / "train.json").write_text(json.dumps(doc))
        assert main(["report", str(results), "--out", str(tmp_path / "r")]) == 4


class TestLocking:
    def test_held_lock_exits_4(self, workspace):
        tmp_path, cfg = workspace
        out = tmp_path / "locked"
        out.mkdir()
        (out / ".emonet.lock").write_text("123\n")
        rc = main(["clean", "--config", str(cfg), "--out", str(out)])
        assert rc == 4

    def test_lock_released_after_run(self, workspace):
        tmp_path, cfg = workspace
        out = tmp_path / "c1"
        assert main(["clean", "--config", str(cfg), "--out", str(out)]) == 0
        assert not (out / ".emonet.lock").exists()
        assert main(["clean", "--config", str(cfg), "--out", str(out)]) == 0
