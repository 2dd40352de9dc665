"""End-to-end command-line interface coverage on a tiny corpus."""

import csv
import os
import re

import numpy as np
import pytest

from melmask import matrixio
from melmask.cli import main
from melmask.config import TrainConfig, format_config


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One tiny corpus, config file, and finished pretrain run for all tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = TrainConfig(
        n_mels=16, n_layers=1, n_heads=1,
        enc_channels="4,8,8,4", enc_pools="2x2,2x2,2x2,2x2",
        repr_dim=16, proj_hidden=16, proj_dim=8,
        seg_len=4096, batch_size=4, epochs=1, seed=0,
    )
    cfg_path = str(root / "tiny.cfg")
    with open(cfg_path, "w", encoding="utf-8") as fh:
        fh.write(format_config(cfg))
    data = str(root / "genre")
    assert main(["make-data", "--kind", "genre", "--out", data, "--n", "8",
                 "--sample-rate", "16000", "--clip-len", "6000"]) == 0
    covers = str(root / "covers")
    assert main(["make-data", "--kind", "covers", "--out", covers, "--n", "8",
                 "--cliques", "4", "--sample-rate", "16000", "--clip-len", "6000"]) == 0
    run = str(root / "run")
    assert main(["pretrain", "--config", cfg_path, "--data", data, "--out", run]) == 0
    return {
        "root": root,
        "cfg_path": cfg_path,
        "data": data,
        "covers": covers,
        "ckpt": os.path.join(run, "checkpoint-2.bin"),
    }


class TestMakeData:
    def test_genre_artifacts(self, workspace):
        names = sorted(os.listdir(workspace["data"]))
        assert "labels.csv" in names
        assert sum(n.endswith(".wav") for n in names) == 8

    def test_covers_use_clique_field(self, workspace):
        with open(os.path.join(workspace["covers"], "labels.csv"),
                  newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh))
        assert header == ["name", "clique"]


class TestSpectrogram:
    def test_writes_matrix_and_reports_shape(self, workspace, capsys):
        wav = os.path.join(workspace["data"], "clip_0000.wav")
        out = str(workspace["root"] / "spec.bin")
        assert main(["spectrogram", wav, out]) == 0
        line = capsys.readouterr().out.strip()
        m = re.match(r"frames=(\d+) bins=(\d+) hop=128 n_fft=256 n_mels=128 "
                     r"sample_rate=16000$", line)
        assert m is not None
        mat = matrixio.load_matrix(out)
        assert mat.shape == (int(m.group(1)), int(m.group(2)))
        assert mat.shape == (1 + (6000 - 256) // 128, 128)

    def test_unreadable_input_exits_one(self, workspace, capsys):
        bogus = str(workspace["root"] / "not_audio.wav")
        with open(bogus, "wb") as fh:
            fh.write(b"junk")
        assert main(["spectrogram", bogus, str(workspace["root"] / "x.bin")]) == 1
        assert "error:" in capsys.readouterr().err


class TestPretrainCommand:
    def test_reports_final_checkpoint(self, workspace, capsys):
        out = str(workspace["root"] / "run2")
        assert main(["pretrain", "--config", workspace["cfg_path"],
                     "--data", workspace["data"], "--out", out, "--verbose"]) == 0
        text = capsys.readouterr().out
        assert "step 1:" in text and "step 2:" in text
        assert f"final checkpoint: {os.path.join(out, 'checkpoint-2.bin')}" in text

    def test_seed_override_changes_losses(self, workspace):
        out = str(workspace["root"] / "run3")
        assert main(["pretrain", "--config", workspace["cfg_path"],
                     "--data", workspace["data"], "--out", out, "--seed", "9"]) == 0
        with open(os.path.join(out, "loss.csv"), newline="", encoding="utf-8") as fh:
            seeded = list(csv.reader(fh))[1:]
        run = os.path.dirname(workspace["ckpt"])
        with open(os.path.join(run, "loss.csv"), newline="", encoding="utf-8") as fh:
            base = list(csv.reader(fh))[1:]
        assert seeded != base

    def test_dump_masks_writes_matrices(self, workspace):
        out = str(workspace["root"] / "run4")
        dump = str(workspace["root"] / "masks")
        assert main(["pretrain", "--config", workspace["cfg_path"],
                     "--data", workspace["data"], "--out", out,
                     "--dump-masks", dump]) == 0
        scores = matrixio.load_matrix(os.path.join(dump, "scores.bin"))
        mask = matrixio.load_matrix(os.path.join(dump, "mask.bin"))
        frames = matrixio.load_matrix(os.path.join(dump, "frames_pos.bin"))
        n = 1 + (4096 - 256) // 128
        assert scores.shape == (n,)
        assert mask.shape == (n,)
        assert set(np.unique(mask)) <= {0.0, 1.0}
        assert frames.shape == (n, 16)


class TestEmbedCommand:
    def test_embeds_inputs_to_matrix(self, workspace, capsys):
        wavs = [os.path.join(workspace["data"], f"clip_000{i}.wav") for i in range(3)]
        out = str(workspace["root"] / "emb.bin")
        assert main(["embed", workspace["ckpt"], *wavs, out]) == 0
        assert "wrote 3 x 16 embeddings" in capsys.readouterr().out
        mat = matrixio.load_matrix(out)
        assert mat.shape == (3, 16)
        assert np.all(np.isfinite(mat))

    def test_missing_checkpoint_exits_one(self, workspace, capsys):
        wav = os.path.join(workspace["data"], "clip_0000.wav")
        missing = str(workspace["root"] / "no.bin")
        assert main(["embed", missing, wav, str(workspace["root"] / "o.bin")]) == 1
        assert "error:" in capsys.readouterr().err


class TestProbeCommand:
    def test_prints_both_metrics(self, workspace, capsys):
        assert main(["probe", "--checkpoint", workspace["ckpt"],
                     "--data", workspace["data"]]) == 0
        out = capsys.readouterr().out
        assert re.search(r"^ROC-AUC \d\.\d{4}$", out, re.M)
        assert re.search(r"^PR-AUC \d\.\d{4}$", out, re.M)

    def test_label_fraction_and_mlp_paths(self, workspace, capsys):
        assert main(["probe", "--checkpoint", workspace["ckpt"],
                     "--data", workspace["data"],
                     "--label-fraction", "0.5", "--mlp"]) == 0
        assert "ROC-AUC" in capsys.readouterr().out


class TestRetrieveCommand:
    def test_prints_retrieval_metrics(self, workspace, capsys):
        assert main(["retrieve", "--checkpoint", workspace["ckpt"],
                     "--queries", workspace["covers"],
                     "--refs", workspace["covers"]]) == 0
        out = capsys.readouterr().out
        assert re.search(r"^MAP \d\.\d{4}$", out, re.M)
        assert re.search(r"^Precision@10 \d\.\d{4}$", out, re.M)
        assert re.search(r"^MR1 \d+\.\d{2}$", out, re.M)


class TestSweepCommand:
    def test_emits_table_with_drop_verification(self, workspace, capsys):
        out = str(workspace["root"] / "sweep")
        assert main(["sweep", "--config", workspace["cfg_path"],
                     "--data", workspace["data"], "--out", out,
                     "--ratios", "0.1", "0.5"]) == 0
        text = capsys.readouterr().out
        assert re.search(r"^r=0\.1: dropped (\d+)/\1 expected", text, re.M)
        assert re.search(r"^r=0\.5: dropped (\d+)/\1 expected", text, re.M)
        table = os.path.join(out, "ratio_sweep.csv")
        assert f"table: {table}" in text
        with open(table, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["mask_ratio", "expected_dropped", "observed_dropped",
                           "probe_roc_auc"]
        assert [r[0] for r in rows[1:]] == ["0.1", "0.5"]
        for r in rows[1:]:
            assert r[1] == r[2]


class TestParser:
    def test_unknown_command_exits(self):
        with pytest.raises(SystemExit):
            main(["frobnicate"])

    def test_no_command_exits(self):
        with pytest.raises(SystemExit):
            main([])
