import json

import numpy as np
import pytest

from quanvbench import cli, quanv
from quanvbench.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main, parse_config_text
from quanvbench.data import save_idx, subset
from quanvbench.synthdata import synthetic_dataset


TINY_SWEEP = """
# small but complete sweep
dataset = mnist
source = synthetic
synth_count = 120
n_train = 20
n_test = 10
architectures = classical_cnn, qunn
ansatz_list = zz_full
attack_list = fgsm
epsilons = 0, 0.1, 1
epsilons_fgsm_extra =
trials = 2
train.epochs = 6
cache = false
"""


@pytest.fixture
def idx_dir(tmp_path):
    root = tmp_path / "data" / "mnist"
    root.mkdir(parents=True)
    pool = synthetic_dataset("mnist", 400, seed=5)
    train, test = subset(pool, 120, 60, seed=0)
    save_idx(train, root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte")
    save_idx(test, root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte")
    return tmp_path / "data"


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def test_config_defaults_and_overrides():
    cfg = parse_config_text("trials = 3\nmode = end_to_end\n")
    assert cfg["trials"] == "3"
    assert cfg["mode"] == "end_to_end"
    assert cfg["dataset"] == "mnist"  # default preserved


def test_config_rejects_unknown_key():
    with pytest.raises(cli.ConfigError, match="no_such_key"):
        parse_config_text("no_such_key = 1\n")


def test_config_rejects_malformed_line():
    with pytest.raises(cli.ConfigError, match="line 2"):
        parse_config_text("trials = 3\nbogus line\n")


def test_config_comments_and_blanks_ignored():
    cfg = parse_config_text("# comment\n\ntrials = 5  # trailing\n")
    assert cfg["trials"] == "5"


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def test_cmd_verify_passes(capsys):
    assert main(["verify"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 5
    assert "[FAIL]" not in out


# ---------------------------------------------------------------------------
# quanvolve
# ---------------------------------------------------------------------------

def test_cmd_quanvolve_synthetic(tmp_path, capsys):
    out = tmp_path / "maps.qnvf"
    rc = main(["quanvolve", "--synthetic", "--dataset", "mnist",
               "--ansatz", "zz_full", "--seed", "1", "--out", str(out)])
    assert rc == EXIT_OK
    maps, _meta = quanv.read_qnvf(out)
    assert maps.shape == (80, 14, 14, 4)  # 50 train + 30 test
    assert "80 maps of 14x14x4" in capsys.readouterr().out


def test_cmd_quanvolve_idx_files(idx_dir, tmp_path):
    out = tmp_path / "maps.qnvf"
    rc = main(["quanvolve", "--dataset-dir", str(idx_dir), "--dataset", "mnist",
               "--n-train", "20", "--n-test", "10", "--seed", "2", "--out", str(out)])
    assert rc == EXIT_OK
    maps, _ = quanv.read_qnvf(out)
    assert maps.shape == (30, 14, 14, 4)


def test_cmd_quanvolve_rerun_byte_identical(tmp_path):
    a, b = tmp_path / "a.qnvf", tmp_path / "b.qnvf"
    flags = ["quanvolve", "--synthetic", "--ansatz", "zz_star", "--seed", "3"]
    assert main(flags + ["--out", str(a)]) == EXIT_OK
    assert main(flags + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_cmd_quanvolve_missing_file_exit_2(tmp_path, capsys):
    rc = main(["quanvolve", "--dataset-dir", str(tmp_path / "nowhere"),
               "--out", str(tmp_path / "x.qnvf")])
    assert rc == EXIT_USAGE
    assert "nowhere" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def test_cmd_sweep_end_to_end(tmp_path, capsys):
    config = tmp_path / "sweep.cfg"
    config.write_text(TINY_SWEEP)
    out_dir = tmp_path / "out"
    rc = main(["sweep", "--config", str(config), "--out", str(out_dir)])
    assert rc == EXIT_OK

    csv_lines = (out_dir / "results.csv").read_text().splitlines()
    # 2 architectures x 1 ansatz x 1 attack x 2 trials x 3 epsilons
    assert len(csv_lines) == 1 + 12
    assert csv_lines[0] == "dataset,architecture,ansatz,attack,mode,epsilon,trial,accuracy"
    assert (out_dir / "plot_fgsm.svg").exists()

    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["records_written"] == 12
    assert manifest["config_hash"] == cli.config_hash(manifest["config"])


def test_cmd_sweep_unknown_ansatz_exit_2(tmp_path, capsys):
    config = tmp_path / "bad.cfg"
    config.write_text(TINY_SWEEP.replace("ansatz_list = zz_full", "ansatz_list = zz_mesh"))
    rc = main(["sweep", "--config", str(config), "--out", str(tmp_path / "o")])
    assert rc == EXIT_USAGE
    assert "zz_mesh" in capsys.readouterr().err


def test_cmd_sweep_unknown_key_exit_2(tmp_path, capsys):
    config = tmp_path / "bad.cfg"
    config.write_text(TINY_SWEEP + "mystery_key = 1\n")
    rc = main(["sweep", "--config", str(config), "--out", str(tmp_path / "o")])
    assert rc == EXIT_USAGE
    assert "mystery_key" in capsys.readouterr().err


def test_cmd_sweep_seed_override_changes_hash(tmp_path):
    config = tmp_path / "sweep.cfg"
    config.write_text(TINY_SWEEP)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["sweep", "--config", str(config), "--out", str(out1)]) == EXIT_OK
    assert main(["sweep", "--config", str(config), "--out", str(out2), "--seed", "99"]) == EXIT_OK
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    assert m1["config_hash"] != m2["config_hash"]
    assert m2["config"]["base_seed"] == "99"


def test_cmd_sweep_failure_preserves_partial_csv(tmp_path, capsys, monkeypatch):
    from quanvbench import harness

    config = tmp_path / "sweep.cfg"
    config.write_text(TINY_SWEEP)
    out_dir = tmp_path / "out"

    real = harness.run_trial
    calls = {"n": 0}

    def explode_on_third(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 3:
            raise RuntimeError("injected mid-run failure")
        return real(*args, **kwargs)

    monkeypatch.setattr(harness, "run_trial", explode_on_third)
    rc = main(["sweep", "--config", str(config), "--out", str(out_dir)])
    assert rc == EXIT_FAILURE

    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["status"] == "FAILED"
    assert "injected" in manifest["error"]
    csv_lines = (out_dir / "results.csv").read_text().splitlines()
    assert len(csv_lines) == 1 + 6  # two completed cell-trials of 3 epsilons


def test_cmd_sweep_missing_config_exit_2(tmp_path, capsys):
    rc = main(["sweep", "--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path / "o")])
    assert rc == EXIT_USAGE
