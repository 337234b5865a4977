import csv
import json
import textwrap

import numpy as np
import pytest

from mlasdi.cli import main
from mlasdi.config import load_config, parse_config
from mlasdi.data import load_snapshots, save_snapshots
from mlasdi.errors import ConfigError

CONFIG = """
seed = 3
output = "{out}"

[dataset]
kind = "toy"
train_amplitudes = [1.0, 1.4]
test_amplitudes = [1.2]
nx = {nx}
nt = 21

[[stages]]
architecture = [{nx}, 8, 3]
iterations = {iters}
lr = 2e-3
beta1 = 0.1
beta2 = 1e-3

[[stages]]
architecture = [{nx}, 8, 3]
iterations = {iters}
lr = 2e-3
beta1 = 1.0
beta2 = 1e-3

[prediction]
n_samples = 4
"""


def write_config(tmp_path, nx=16, iters=60, text=None):
    path = tmp_path / "run.toml"
    path.write_text(text if text is not None else CONFIG.format(out=tmp_path / "run", nx=nx, iters=iters))
    return str(path)


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    cfg = write_config(tmp)
    assert main(["generate", "--config", cfg]) == 0
    assert main(["train", "--config", cfg]) == 0
    return tmp, cfg


class TestConfig:
    def test_parse(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        stages = cfg.stage_configs()
        assert [s.beta1 for s in stages] == [0.1, 1.0]
        assert stages[0].architecture == (16, 8, 3)
        assert stages[0].gp_kind == "matern15"
        assert cfg.n_samples == 4 and cfg.seed == 3

    def test_missing_dataset(self):
        with pytest.raises(ConfigError, match="dataset"):
            parse_config({"stages": [{}]})

    @pytest.mark.parametrize("field", ["lr", "beta1", "beta2", "iterations", "architecture"])
    def test_no_hidden_defaults(self, field):
        stage = {"architecture": [4, 2], "iterations": 1, "lr": 1e-3, "beta1": 0.1, "beta2": 1e-3}
        del stage[field]
        with pytest.raises(ConfigError, match=field):
            parse_config({"dataset": {"kind": "toy", "train_amplitudes": [1.0], "test_amplitudes": []},
                          "stages": [stage]})

    def test_bad_values(self):
        base = {"dataset": {"kind": "toy", "train_amplitudes": [1.0], "test_amplitudes": []}}
        with pytest.raises(ConfigError, match="lr"):
            parse_config(dict(base, stages=[{"architecture": [4, 2], "iterations": 1, "lr": -1.0,
                                             "beta1": 0.1, "beta2": 0.0}]))
        with pytest.raises(ConfigError, match="kind"):
            parse_config({"dataset": {"kind": "vlasov"}, "stages": [{}]})

    def test_syntax_error_has_location(self, tmp_path):
        with pytest.raises(ConfigError, match="line"):
            load_config(write_config(tmp_path, text="seed = \n[dataset"))


class TestCommands:
    def test_generate(self, run_dir):
        tmp, _ = run_dir
        train = load_snapshots(tmp / "run" / "train.mlsd")
        test = load_snapshots(tmp / "run" / "test.mlsd")
        assert train.values.shape == (2, 21, 16)
        assert test.values.shape == (1, 21, 16)
        assert len(rows(tmp / "run" / "data_manifest.csv")) == 3

    def test_train_outputs(self, run_dir):
        tmp, _ = run_dir
        stack = tmp / "run" / "stack"
        manifest = json.loads((stack / "manifest.json").read_text())
        assert manifest["stages"] == ["stage_000.mlsm", "stage_001.mlsm"]
        assert manifest["config"]["stages"][1]["beta1"] == 1.0
        # the manifest's config echo reproduces the run
        assert load_config(str(stack / "manifest.json")).to_dict() == load_config(str(tmp / "run.toml")).to_dict()

    def test_rerun_identical(self, run_dir, tmp_path):
        tmp, cfg = run_dir
        assert main(["train", "--config", cfg, "--stack", str(tmp_path / "again")]) == 0
        for name in ("stage_000.mlsm", "stage_001.mlsm", "losses.csv"):
            assert (tmp_path / "again" / name).read_bytes() == (tmp / "run" / "stack" / name).read_bytes()

    def test_seed_override(self, run_dir, tmp_path):
        tmp, cfg = run_dir
        assert main(["train", "--config", cfg, "--seed", "4", "--stack", str(tmp_path / "s4")]) == 0
        assert (tmp_path / "s4" / "stage_000.mlsm").read_bytes() != (tmp / "run" / "stack" / "stage_000.mlsm").read_bytes()
        assert json.loads((tmp_path / "s4" / "manifest.json").read_text())["seed"] == 4

    def test_evaluate(self, run_dir, capsys):
        tmp, cfg = run_dir
        assert main(["evaluate", "--config", cfg]) == 0
        out = rows(tmp / "run" / "stack" / "errors_test.csv")
        assert out[0] == ["mu0", "max_rel_error", "std_score", "is_training"]
        assert len(out) == 2 and out[1][-1] == "false"
        assert np.isfinite(float(out[1][2]))
        assert "p90=" in capsys.readouterr().out

    def test_evaluate_training_flags(self, run_dir):
        tmp, cfg = run_dir
        data = str(tmp / "run" / "train.mlsd")
        assert main(["evaluate", "--config", cfg, "--data", data, "--samples", "0"]) == 0
        out = rows(tmp / "run" / "stack" / "errors_train.csv")
        assert [r[-1] for r in out[1:]] == ["true", "true"]
        assert all(r[2] == "nan" for r in out[1:])

    def test_evaluate_dimension_mismatch(self, run_dir, tmp_path):
        tmp, cfg = run_dir
        other = write_config(tmp_path, nx=10)
        assert main(["generate", "--config", other]) == 0
        code = main(["evaluate", "--stack", str(tmp / "run" / "stack"),
                     "--data", str(tmp_path / "run" / "test.mlsd")])
        assert code == 2

    @pytest.mark.parametrize("what,per_stage", [("coefficients", 2 * 3 * 4), ("gp_params", 3 * 4)])
    def test_export_counts(self, run_dir, what, per_stage, tmp_path):
        tmp, _ = run_dir
        out = tmp_path / f"{what}.csv"
        assert main(["export", what, "--stack", str(tmp / "run" / "stack"), "--out", str(out)]) == 0
        body = rows(out)[1:]
        assert len(body) == 2 * per_stage
        assert sum(r[0] == "1" for r in body) == per_stage

    def test_export_losses(self, run_dir, tmp_path):
        tmp, _ = run_dir
        out = tmp_path / "losses.csv"
        assert main(["export", "losses", "--stack", str(tmp / "run" / "stack"), "--out", str(out)]) == 0
        body = rows(out)
        assert body[0] == ["stage", "iteration", "total", "ae", "di", "ridge"]
        # checkpoints at 0 and the final iteration, per stage
        assert [(r[0], r[1]) for r in body[1:]] == [("0", "0"), ("0", "60"), ("1", "0"), ("1", "60")]


class TestExitCodes:
    def test_missing_dataset(self, tmp_path, capsys):
        cfg = write_config(tmp_path, text='[[stages]]\narchitecture = [4, 2]\n')
        assert main(["generate", "--config", cfg]) == 2
        assert "dataset" in capsys.readouterr().err

    def test_invalid_grid(self, tmp_path, capsys):
        cfg = write_config(tmp_path, nx=1)
        assert main(["generate", "--config", cfg]) == 2

    def test_unknown_export(self, run_dir):
        tmp, _ = run_dir
        assert main(["export", "weights", "--stack", str(tmp / "run" / "stack")]) == 2

    def test_missing_file(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["train", "--config", cfg]) == 4
        assert main(["export", "losses", "--stack", str(tmp_path / "none")]) == 4

    def test_corrupt_file(self, tmp_path):
        cfg = write_config(tmp_path)
        (tmp_path / "run").mkdir()
        (tmp_path / "run" / "train.mlsd").write_bytes(b"MLSD\x01" + bytes(10))
        assert main(["train", "--config", cfg]) == 4

    def test_numeric_failure(self, tmp_path):
        text = CONFIG.format(out=tmp_path / "run", nx=16, iters=50).replace("lr = 2e-3", "lr = 1e300")
        cfg = write_config(tmp_path, text=text)
        assert main(["generate", "--config", cfg]) == 0
        assert main(["train", "--config", cfg]) == 3

    def test_architecture_mismatch(self, tmp_path):
        text = CONFIG.format(out=tmp_path / "run", nx=16, iters=5).replace("[16, 8, 3]", "[20, 8, 3]", 1)
        cfg = write_config(tmp_path, text=text)
        assert main(["generate", "--config", cfg]) == 0
        assert main(["train", "--config", cfg]) == 2
