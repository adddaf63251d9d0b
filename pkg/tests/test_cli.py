"""The five subcommands, their outputs, and their failure modes."""

import shutil
import subprocess

import numpy as np
import pytest

from gabordefect import cli, net

CFG_TEMPLATE = """
image_size = 32
base_width = 8
depth = 2
patch_size = 8
embed_dim = 32
num_heads = 4

epochs = 2
batch_size = 8
learning_rate = 0.001
seed = 0
grid_k = 8
p_salt = 0.05
p_pepper = 0.05
p_patch = 0.5

gabor_kernel_size = 9
gabor_sigma = 3.0
gabor_lambda = 8.0
gabor_gamma = 1.0

dataset_root = {root}
output_dir = {out}
"""


@pytest.fixture(scope="module")
def cli_run(tmp_path_factory):
    """A synthesized dataset, a config pointing at it, and a trained run."""
    base = tmp_path_factory.mktemp("cliflow")
    ds = base / "ds"
    rc = cli.main([
        "synth", "--out", str(ds), "--size", "32", "--period", "8",
        "--train", "12", "--test-normal", "6", "--test-defect", "6",
        "--seed", "2",
    ])
    assert rc == 0
    cfg = base / "run.cfg"
    out = base / "run"
    cfg.write_text(CFG_TEMPLATE.format(root=ds, out=out))
    assert cli.main(["train", "--config", str(cfg)]) == 0
    return base, ds, cfg, out


def test_synth_tree_and_count(cli_run, capsys):
    base, ds, _, _ = cli_run
    assert sorted(p.name for p in (ds / "train" / "good").iterdir()) == [
        f"{i:03d}.png" for i in range(12)
    ]
    assert len(list((ds / "test" / "good").iterdir())) == 6
    assert len(list((ds / "test" / "blob").iterdir())) == 6
    # regenerating with the same seed is byte-identical
    ds2 = base / "ds2"
    cli.main([
        "synth", "--out", str(ds2), "--size", "32", "--period", "8",
        "--train", "12", "--test-normal", "6", "--test-defect", "6",
        "--seed", "2",
    ])
    out = capsys.readouterr().out
    assert "wrote 24 images" in out
    for rel in ("train/good/003.png", "test/good/001.png", "test/blob/005.png"):
        assert (ds / rel).read_bytes() == (ds2 / rel).read_bytes(), rel


def test_train_outputs(cli_run):
    _, _, _, out = cli_run
    assert (out / "epoch_001.ckpt").is_file()
    assert (out / "epoch_002.ckpt").is_file()
    lines = (out / "loss.csv").read_text().strip().splitlines()
    assert lines[0] == "epoch,l1,gaussian,total"
    assert len(lines) == 3


def test_train_progress_lines_and_determinism(cli_run, capsys):
    base, _, cfg, out = cli_run
    out2 = base / "rerun"
    assert cli.main(["train", "--config", str(cfg), "--out", str(out2)]) == 0
    stdout = capsys.readouterr().out
    assert "epoch 1: l1=" in stdout and "epoch 2: l1=" in stdout
    for name in ("epoch_001.ckpt", "epoch_002.ckpt", "loss.csv"):
        assert (out / name).read_bytes() == (out2 / name).read_bytes(), name


def test_train_seed_override_changes_run(cli_run, tmp_path):
    _, _, cfg, out = cli_run
    assert cli.main([
        "train", "--config", str(cfg), "--out", str(tmp_path), "--seed", "9",
    ]) == 0
    assert (tmp_path / "loss.csv").read_bytes() != (out / "loss.csv").read_bytes()


def test_eval_prints_auc_and_writes_csvs(cli_run, tmp_path, capsys):
    _, _, cfg, out = cli_run
    rc = cli.main([
        "eval", "--config", str(cfg),
        "--checkpoint", str(out / "epoch_002.ckpt"), "--out", str(tmp_path),
    ])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert stdout.startswith("AUC: ")
    auc = float(stdout.split(":", 1)[1])
    assert 0.0 <= auc <= 1.0
    scores = (tmp_path / "scores.csv").read_text().strip().splitlines()
    assert scores[0] == "path,label,score"
    assert len(scores) == 13  # header + 12 test images
    assert (tmp_path / "roc.csv").read_text().startswith("fpr,tpr")


def test_sweep_csv_and_best_line(cli_run, tmp_path, capsys):
    _, _, cfg, out = cli_run
    rc = cli.main([
        "sweep", "--config", str(cfg),
        "--checkpoint", str(out / "epoch_002.ckpt"), "--out", str(tmp_path),
        "--kernel", "7", "--sigma", "2:4:2", "--lambda", "8", "--gamma", "1",
    ])
    assert rc == 0
    stdout = capsys.readouterr().out
    lines = (tmp_path / "sweep.csv").read_text().strip().splitlines()
    assert lines[0] == "kernel,sigma,lambda,gamma,auc"
    assert len(lines) == 3  # sigma 2.0 and 4.0
    kernel, sigma, lambd, gamma, auc = lines[1].split(",")
    assert f"best: kernel={kernel} sigma={sigma} lambda={lambd} gamma={gamma} auc={auc}" \
        in stdout
    aucs = [float(l.split(",")[4]) for l in lines[1:]]
    assert aucs == sorted(aucs, reverse=True)


def test_visualize_writes_18_pngs(cli_run, tmp_path):
    _, ds, cfg, out = cli_run
    image = next((ds / "test" / "blob").glob("*.png"))
    rc = cli.main([
        "visualize", "--config", str(cfg),
        "--checkpoint", str(out / "epoch_002.ckpt"),
        "--image", str(image), "--out", str(tmp_path),
    ])
    assert rc == 0
    names = sorted(p.name for p in tmp_path.glob("*.png"))
    want = sorted(
        ["recon.png", "avg.png"]
        + [f"resp_{k}.png" for k in range(8)]
        + [f"bank_{k}.png" for k in range(8)]
    )
    assert names == want


# ---------------------------------------------------------------- error paths

def test_eval_without_dataset_root(cli_run, tmp_path, capsys):
    _, _, _, out = cli_run
    cfg = tmp_path / "no_root.cfg"
    cfg.write_text(CFG_TEMPLATE.format(root="IGNORED", out=tmp_path).replace(
        "dataset_root = IGNORED\n", ""
    ))
    rc = cli.main([
        "eval", "--config", str(cfg),
        "--checkpoint", str(out / "epoch_002.ckpt"),
    ])
    assert rc == 2
    assert "dataset_root" in capsys.readouterr().err


def test_train_missing_dataset_dir(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(CFG_TEMPLATE.format(root=tmp_path / "absent", out=tmp_path))
    assert cli.main(["train", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "absent" in err


def test_config_error_reports_location(cli_run, tmp_path, capsys):
    cfg = tmp_path / "typo.cfg"
    cfg.write_text("epochs = 1\nmomentum = 0.9\n")
    assert cli.main(["train", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert f"{cfg}:2" in err and "momentum" in err


def test_checkpoint_config_mismatch(cli_run, tmp_path, capsys):
    _, _, cfg, _ = cli_run
    other = net.ModelConfig(image_size=32, base_width=16, depth=2,
                            patch_size=8, embed_dim=32, num_heads=4)
    ckpt = tmp_path / "other.ckpt"
    net.save_checkpoint(ckpt, net.init_params(other, seed=0), other)
    rc = cli.main(["eval", "--config", str(cfg), "--checkpoint", str(ckpt)])
    assert rc == 2
    err = capsys.readouterr().err
    assert "mismatch" in err and "base_width" in err


def test_sweep_rejects_bad_range(cli_run, capsys):
    _, _, cfg, out = cli_run
    rc = cli.main([
        "sweep", "--config", str(cfg),
        "--checkpoint", str(out / "epoch_002.ckpt"), "--sigma", "5:1",
    ])
    assert rc == 2
    assert "range" in capsys.readouterr().err


def test_visualize_missing_image(cli_run, tmp_path, capsys):
    _, _, cfg, out = cli_run
    rc = cli.main([
        "visualize", "--config", str(cfg),
        "--checkpoint", str(out / "epoch_002.ckpt"),
        "--image", str(tmp_path / "nope.png"), "--out", str(tmp_path),
    ])
    assert rc == 2
    assert "nope.png" in capsys.readouterr().err


def test_synth_refuses_file_target(tmp_path, capsys):
    target = tmp_path / "blocker"
    target.write_text("occupied")
    rc = cli.main(["synth", "--out", str(target / "ds"), "--train", "1",
                   "--test-normal", "1", "--test-defect", "1"])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error:")


# ------------------------------------------------------------ console script

def test_console_script_installed():
    exe = shutil.which("gabordefect")
    if exe is None:
        pytest.skip("console script not on PATH")
    proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for word in ("train", "eval", "sweep", "visualize", "synth"):
        assert word in proc.stdout
