import numpy as np
import pytest

from hmcm.checkpoint import load_checkpoint, save_checkpoint
from hmcm.cli import RunConfig, UsageError, main
from hmcm.errors import FingerprintMismatch
from hmcm.hierarchy import build_from_edges, build_from_prefix_codes, load_hierarchy, write_edges
from hmcm.network import NetworkConfig, forward, init_model


def logit(p):
    return float(np.log(p / (1 - p)))


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["gen-synth", "--out", str(out), "--depth", "3", "--branching", "3",
                 "--samples-per-leaf", "10", "--feature-dim", "4", "--seed", "2"]) == 0
    return out


@pytest.fixture(scope="module")
def trained(synth, tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    args = ["train", "--hierarchy", str(synth / "hierarchy.txt"), "--data", str(synth / "data.csv"),
            "--out", str(out), "--epochs", "4", "--backbone-dims", "8", "--head-hidden", "16"]
    assert main(args) == 0
    return out, args


class TestGenSynth:
    def test_rows(self, synth):
        lines = (synth / "data.csv").read_text().splitlines()
        assert lines[0] == "f0,f1,f2,f3,label"
        assert len(lines) == 91
        assert load_hierarchy(synth / "hierarchy.txt", "prefix").label_count == 13

    def test_same_seed_same_files(self, synth, tmp_path):
        main(["gen-synth", "--out", str(tmp_path), "--samples-per-leaf", "10", "--feature-dim", "4", "--seed", "2"])
        for name in ("data.csv", "hierarchy.txt"):
            assert (tmp_path / name).read_bytes() == (synth / name).read_bytes()

    def test_depth_one(self, tmp_path):
        assert main(["gen-synth", "--out", str(tmp_path), "--depth", "1", "--samples-per-leaf", "2"]) == 0
        assert (tmp_path / "hierarchy.txt").read_text() == "1\n"


class TestTrain:
    def test_outputs(self, trained, capsys):
        out, _ = trained
        curve = (out / "learning_curve.csv").read_text().splitlines()
        assert len(curve) == 1 + 4
        assert (out / "model.npz").is_file()
        assert (out / "config.txt").is_file()
        report = (out / "metrics.txt").read_text()
        assert [ln.split(" = ")[0] for ln in report.splitlines()] == ["auprc", "emr", "hamming", "sample_count"]

    def test_rerun_byte_identical(self, trained, tmp_path):
        out, args = trained
        rerun = tmp_path / "again"
        assert main(["train", "--config", str(out / "config.txt"), "--out", str(rerun)]) == 0
        assert (rerun / "learning_curve.csv").read_bytes() == (out / "learning_curve.csv").read_bytes()

    def test_missing_hierarchy(self, synth, tmp_path, capsys):
        missing = tmp_path / "nope.txt"
        code = main(["train", "--hierarchy", str(missing), "--data", str(synth / "data.csv"), "--out", str(tmp_path)])
        assert code == 2
        assert str(missing) in capsys.readouterr().err

    def test_usage_errors(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--loss", "hinge"])
        assert exc.value.code == 1
        assert main(["train", "--hierarchy", ""]) == 1


class TestEvaluate:
    def test_matches_train_report(self, trained, synth, tmp_path, capsys):
        out, _ = trained
        capsys.readouterr()
        assert main(["evaluate", "--config", str(out / "config.txt"), "--out", str(tmp_path)]) == 0
        assert capsys.readouterr().out == (out / "metrics.txt").read_text()
        assert (tmp_path / "pr_curve_test.csv").read_text().startswith("threshold,precision,recall\n")

    def test_fingerprint_mismatch(self, trained, tmp_path, capsys):
        out, _ = trained
        other = tmp_path / "other.txt"
        other.write_text("9\n", encoding="utf-8")
        data = tmp_path / "d.csv"
        data.write_text("f0,f1,f2,f3,label\n0,0,0,0,9\n", encoding="utf-8")
        code = main(["evaluate", "--checkpoint", str(out / "model.npz"), "--hierarchy", str(other),
                     "--data", str(data), "--out", str(tmp_path), "--split", "all"])
        assert code == 2
        assert "different hierarchy" in capsys.readouterr().err

    def test_memorize_toy(self, tmp_path, capsys):
        data_dir = tmp_path / "toy"
        main(["gen-synth", "--out", str(data_dir), "--depth", "2", "--branching", "2",
              "--samples-per-leaf", "5", "--feature-dim", "4", "--noise-sigma", "0"])
        common = ["--hierarchy", str(data_dir / "hierarchy.txt"), "--data", str(data_dir / "data.csv"),
                  "--out", str(tmp_path / "run"), "--backbone-dims", "", "--head-hidden", "16"]
        assert main(["train", *common, "--epochs", "100", "--batch", "4", "--lr", "0.01"]) == 0
        capsys.readouterr()
        assert main(["evaluate", *common, "--split", "all"]) == 0
        report = dict(ln.split(" = ") for ln in capsys.readouterr().out.splitlines())
        assert float(report["emr"]) == 1.0 and report["sample_count"] == "10"


def _toy_checkpoint(tmp_path):
    """a -> {b, c}; constant outputs h = (0.2, 0.7, 0.5) whatever the input."""
    hier = build_from_edges([("b", "a"), ("c", "a")])
    hpath = tmp_path / "h.tsv"
    write_edges(hpath, hier)
    model = init_model(NetworkConfig(input_dim=2, label_count=3, head_hidden=1))
    model.layers[-1].weight[:] = 0.0
    model.layers[-1].bias[:] = [logit(0.2), logit(0.7), logit(0.5)]
    ckpt = tmp_path / "toy.npz"
    save_checkpoint(ckpt, model, hier)
    return hier, hpath, ckpt


class TestPredict:
    def test_hand_evaluated(self, tmp_path):
        _, hpath, ckpt = _toy_checkpoint(tmp_path)
        data = tmp_path / "x.csv"
        data.write_text("f0,f1\n0.3,-1.2\n", encoding="utf-8")
        assert main(["predict", "--hierarchy", str(hpath), "--hierarchy-mode", "edges", "--checkpoint", str(ckpt),
                     "--data", str(data), "--out", str(tmp_path), "--emit-probs", "true"]) == 0
        lines = (tmp_path / "predictions.csv").read_text().splitlines()
        assert lines[0] == "labels,p_a,p_b,p_c"
        cells = lines[1].split(",")
        assert cells[0] == "a;b"
        np.testing.assert_allclose([float(c) for c in cells[1:]], [0.7, 0.7, 0.5], atol=1e-12)

    def test_empty_input(self, tmp_path):
        _, hpath, ckpt = _toy_checkpoint(tmp_path)
        data = tmp_path / "x.csv"
        data.write_text("f0,f1,label\n", encoding="utf-8")
        assert main(["predict", "--hierarchy", str(hpath), "--hierarchy-mode", "edges", "--checkpoint", str(ckpt),
                     "--data", str(data), "--out", str(tmp_path)]) == 0
        assert (tmp_path / "predictions.csv").read_text() == "labels\n"

    def test_predictions_consistent(self, trained, synth, tmp_path):
        out, _ = trained
        assert main(["predict", "--config", str(out / "config.txt"), "--out", str(tmp_path)]) == 0
        hier = load_hierarchy(synth / "hierarchy.txt", "prefix")
        rows = (tmp_path / "predictions.csv").read_text().splitlines()[1:]
        assert len(rows) == 90
        for row in rows:
            members = {hier.index(lab) for lab in row.split(";")}
            assert hier.is_consistent(members)


class TestCheckpoint:
    def test_roundtrip(self, tmp_path, rng):
        hier = build_from_prefix_codes(["11", "12"])
        model = init_model(NetworkConfig(input_dim=3, label_count=3, backbone_dims=(4,), freeze_backbone=True, seed=5))
        save_checkpoint(tmp_path / "m.npz", model, hier)
        back, meta = load_checkpoint(tmp_path / "m.npz", hier)
        assert back.config == model.config and meta["labels"] == ["1", "11", "12"]
        x = rng.standard_normal((4, 3))
        assert np.array_equal(forward(back, x), forward(model, x))
        assert [l.frozen for l in back.layers] == [True, False, False]

    def test_mismatch(self, tmp_path):
        model = init_model(NetworkConfig(input_dim=1, label_count=2))
        save_checkpoint(tmp_path / "m.npz", model, build_from_prefix_codes(["12"]))
        with pytest.raises(FingerprintMismatch):
            load_checkpoint(tmp_path / "m.npz", build_from_prefix_codes(["13"]))


class TestConfig:
    def test_precedence(self, tmp_path):
        cfg_file = tmp_path / "c.txt"
        cfg_file.write_text("# settings\nepochs = 7\nlr = 0.5\nfreeze-backbone = true\n", encoding="utf-8")
        from hmcm.cli import build_parser, resolve_args

        args = build_parser().parse_args(["train", "--config", str(cfg_file), "--lr", "0.25"])
        cfg = resolve_args(args)
        assert (cfg.epochs, cfg.lr, cfg.freeze_backbone, cfg.batch) == (7, 0.25, True, 32)

    def test_paper_preset(self):
        cfg = RunConfig.resolve({}, {"preset": "paper"})
        assert (cfg.lr, cfg.weight_decay, cfg.batch, cfg.epochs) == (5e-6, 1e-6, 32, 120)
        assert RunConfig.resolve({"preset": "paper"}, {"epochs": 3}).epochs == 3

    def test_text_roundtrip(self):
        cfg = RunConfig.resolve({}, {"backbone_dims": "", "ratios": "0.8,0.1,0.1", "noise_sigma": 0.1})
        lines = dict(ln.split(" = ", 1) for ln in cfg.to_text().splitlines())
        assert RunConfig.resolve(lines, {}) == cfg

    def test_unknown_key(self):
        with pytest.raises(UsageError):
            RunConfig.resolve({"learning_rate": "1"}, {})


def test_grad_check_command(capsys):
    assert main(["grad-check"]) == 0
    out = capsys.readouterr().out
    assert float(out.splitlines()[-1].split(" = ")[1]) < 1e-5
