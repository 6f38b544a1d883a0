import json

import pytest

from neuform.cli import build_parser, load_config, main
from neuform.evaluate import read_report
from neuform.manifest import read_manifest
from neuform.mapper import read_loss_curve, smooth
from neuform.params import read_params_csv
from neuform.synth import make_corpus
from neuform.vocoder import import_mel


@pytest.fixture
def manifest(corpus):
    return corpus / "manifest.csv"


@pytest.fixture
def wav_path(corpus):
    return corpus / "wavs" / "spk000_u0000.wav"


class TestExitCodes:
    def test_unknown_command(self):
        assert main(["transmogrify"]) == 1

    def test_analyze_without_files(self, tmp_path):
        assert main(["analyze", "--out-dir", str(tmp_path)]) == 1

    def test_manipulate_zero_factor(self, wav_path, tmp_path):
        argv = ["manipulate", str(wav_path), "--out", str(tmp_path / "x.wav")]
        assert main(argv + ["--scale", "f1=0"]) == 1

    def test_manipulate_without_scale(self, wav_path, tmp_path):
        argv = ["manipulate", str(wav_path), "--out", str(tmp_path / "x.wav")]
        assert main(argv) == 1

    def test_invalid_config(self, manifest, tmp_path):
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"jobs": 0}))
        argv = ["evaluate", str(manifest), "--system", "identity"]
        argv += ["--config", str(config), "--out", str(tmp_path / "r.csv")]
        assert main(argv) == 1

    def test_missing_checkpoint(self, wav_path, tmp_path):
        argv = ["resynth", str(wav_path), "--out", str(tmp_path / "x.wav")]
        assert main(argv + ["--checkpoint", str(tmp_path / "absent.nfckpt")]) == 2

    def test_missing_audio(self, tmp_path):
        argv = ["analyze", str(tmp_path / "absent.wav"), "--out-dir", str(tmp_path)]
        assert main(argv) == 2

    def test_no_train_rows(self, tmp_path):
        manifest = tmp_path / "manifest.csv"
        manifest.write_text("utterance_id,audio_path,split\nx,x.wav,test\n")
        assert main(["train", str(manifest), "--out", str(tmp_path / "m.nfckpt")]) == 2

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            build_parser().parse_args(["--version"])
        assert excinfo.value.code == 0
        assert capsys.readouterr().out.strip()


class TestSynthCorpus:
    def test_writes_manifest(self, tmp_path):
        out_dir = tmp_path / "corpus"
        argv = ["synth-corpus", "--n", "4", "--speakers", "4", "--seed", "2"]
        assert main(argv + ["--out-dir", str(out_dir)]) == 0
        assert len(read_manifest(out_dir / "manifest.csv")) == 4
        assert json.loads((out_dir / "config.json").read_text())["seed"] == 2


class TestAnalyze:
    def test_writes_params_and_mel(self, wav_path, tmp_path):
        assert main(["analyze", str(wav_path), "--out-dir", str(tmp_path)]) == 0
        params = read_params_csv(tmp_path / "spk000_u0000.csv")
        mel = import_mel(tmp_path / "spk000_u0000.nfmel", n_mels=80)
        assert len(params) == mel.n_frames > 0
        assert (tmp_path / "config.json").is_file()


class TestEvaluate:
    def test_identity_copy(self, manifest, tmp_path):
        out = tmp_path / "copy.csv"
        argv = ["evaluate", str(manifest), "--system", "identity", "--out", str(out)]
        assert main(argv) == 0
        rows = read_report(out)
        assert [row["parameter"] for row in rows][:2] == ["vuv", "log_f0"]
        assert all(row["mse"] == 0.0 for row in rows)

    def test_identity_sweep(self, manifest, tmp_path):
        out = tmp_path / "sweep.json"
        argv = ["evaluate", str(manifest), "--system", "identity", "--mode", "sweep"]
        argv += ["--factors", "0.9", "1.1", "--parameters", "f1", "tilt"]
        assert main(argv + ["--format", "json", "--out", str(out)]) == 0
        document = json.loads(out.read_text())
        assert document["kind"] == "sweep"
        assert len(document["rows"]) == 2 * 2 * 9


class TestTrainAndRender:
    def test_end_to_end(self, manifest, wav_path, tmp_path):
        checkpoint = tmp_path / "model" / "model.nfckpt"
        argv = ["train", str(manifest), "--out", str(checkpoint)]
        assert main(argv + ["--max-updates", "2", "--batch-size", "2"]) == 0
        assert (checkpoint.parent / "norm_stats.json").is_file()
        assert (checkpoint.parent / "loss.csv").is_file()

        out = tmp_path / "resynth.wav"
        argv = ["resynth", str(wav_path), "--checkpoint", str(checkpoint)]
        assert main(argv + ["--n-iters", "4", "--out", str(out)]) == 0
        assert out.is_file()

        mel_out = tmp_path / "manipulated.nfmel"
        argv = ["manipulate", str(wav_path), "--checkpoint", str(checkpoint)]
        argv += ["--scale", "f1=1.2", "--backend", "export", "--out", str(mel_out)]
        assert main(argv) == 0
        assert import_mel(mel_out, n_mels=80).n_frames > 0

        plot = tmp_path / "loss.png"
        loss_csv = checkpoint.parent / "loss.csv"
        assert main(["plot", "loss", str(loss_csv), "--out", str(plot)]) == 0
        assert plot.is_file()

    def test_threads_flag(self, manifest):
        args = build_parser().parse_args(["train", str(manifest), "--threads", "1"])
        assert load_config(args).train.threads == 1

    def test_fixed_seed_loss_curve_is_bitwise_identical(self, manifest, tmp_path):
        curves = []
        for run in ("a", "b"):
            checkpoint = tmp_path / run / "model.nfckpt"
            argv = ["train", str(manifest), "--out", str(checkpoint), "--threads", "1"]
            assert main(argv + ["--max-updates", "5", "--batch-size", "2"]) == 0
            curves.append((checkpoint.parent / "loss.csv").read_bytes())
            assert checkpoint.is_file()
        assert curves[0] == curves[1]
        checkpoints = [(tmp_path / run / "model.nfckpt").read_bytes() for run in "ab"]
        assert checkpoints[0] == checkpoints[1]


@pytest.fixture(scope="class")
def desk_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk")
    make_corpus(200, root / "corpus", seed=0)
    checkpoint = root / "model" / "model.nfckpt"
    argv = ["train", str(root / "corpus" / "manifest.csv")]
    argv += ["--out", str(checkpoint), "--threads", "1", "--max-updates", "5000"]
    assert main(argv) == 0
    return root, checkpoint


@pytest.mark.slow
class TestDeskTraining:
    def test_loss_falls_tenfold(self, desk_run):
        _, checkpoint = desk_run
        losses, _ = read_loss_curve(checkpoint.parent / "loss.csv")
        assert len(losses) == 5000
        smoothed = smooth(losses)
        assert smoothed[-1] <= 0.1 * smoothed[0]

    def test_manipulations_track_targets(self, desk_run):
        root, checkpoint = desk_run
        out = root / "sweep.csv"
        argv = ["evaluate", str(root / "corpus" / "manifest.csv")]
        argv += ["--checkpoint", str(checkpoint), "--mode", "sweep"]
        argv += ["--factors", "0.9", "1.1", "--parameters", "log_f0", "f1"]
        assert main(argv + ["--out", str(out)]) == 0
        rows = [row for row in read_report(out) if row["median_ratio"] is not None]
        assert len(rows) == 4
        tolerance = {"log_f0": 0.03, "f1": 0.06}
        for row in rows:
            assert row["median_ratio"] == pytest.approx(
                1.0, abs=tolerance[row["manipulated"]]
            )


class TestPlot:
    def test_label_mismatch(self, tmp_path):
        report = tmp_path / "r.csv"
        report.write_text("parameter,mse,median_se,n_frames\nf1,0.1,0.1,3\n")
        argv = ["plot", "copy", str(report), "--labels", "a", "b"]
        assert main(argv + ["--out", str(tmp_path / "p.png")]) == 1

    def test_copy(self, tmp_path):
        report = tmp_path / "r.csv"
        report.write_text("parameter,mse,median_se,n_frames\nf1,0.1,0.1,3\n")
        out = tmp_path / "p.png"
        assert main(["plot", "copy", str(report), "--out", str(out)]) == 0
        assert out.is_file()
