import json
import logging

import numpy as np
import pytest

from neuform.core import Utterance
from neuform.errors import EvaluationError
from neuform.evaluate import (
    COPY_COLUMNS,
    SWEEP_COLUMNS,
    ErrorAccumulator,
    SweepReport,
    align_frames,
    copy_synthesis_error,
    evaluate_copy,
    manipulation_sweep,
    median_ratio,
    read_report,
    widen_preset,
    write_report,
)
from neuform.models import (
    CONTINUOUS,
    FrameGrid,
    MelSpectrogram,
    NormStats,
    Parameter,
    SpeechParams,
    Waveform,
)
from neuform.params import Analysis, compute_norm_stats
from neuform.pitch import preset_config

from .conftest import make_params


def fake_utterance(utterance_id: str, params: SpeechParams) -> Utterance:
    mel = MelSpectrogram(np.zeros((len(params), 80)), params.grid)
    analysis = Analysis(params, mel, preset_config("low"))
    return Utterance(utterance_id, Waveform(np.zeros(16)), analysis)


def tilt_pipeline(utterance, params, preset):
    return params.replace("tilt", params["tilt"] * 1.05)


@pytest.fixture
def stats(params):
    return compute_norm_stats([params])


@pytest.fixture
def utterances():
    return [fake_utterance(f"u{i}", make_params(20, seed=i)) for i in range(3)]


class TestCopySynthesisError:
    def test_identical(self, params, stats):
        report = copy_synthesis_error(params, params, stats)
        assert all(e.mse == 0.0 for e in report.errors.values())
        assert report["log_f0"].n_frames == int(params.voiced.sum())
        assert report["tilt"].n_frames == len(params)

    def test_one_std_offset(self, params, stats):
        offset = stats.std[CONTINUOUS.index(Parameter.F1)]
        shifted = params.replace("f1", params["f1"] + offset)
        report = copy_synthesis_error(params, shifted, stats)
        assert report["f1"].mse == pytest.approx(1.0)
        assert report["f1"].median_se == pytest.approx(1.0)
        assert report["f2"].mse == 0.0

    def test_symmetric(self, params, stats):
        other = make_params(20, seed=5)
        forward = copy_synthesis_error(params, other, stats)
        backward = copy_synthesis_error(other, params, stats)
        for name, error in forward.errors.items():
            assert error.mse == pytest.approx(backward[name].mse)
        assert forward.vuv_disagreement == backward.vuv_disagreement

    def test_three_frame_hand_computed(self):
        reference = np.array(
            [
                [1, 5.0, 500, 1500, 2500, 3500, -0.005, 1000, 1.0],
                [1, 5.1, 600, 1600, 2600, 3600, -0.004, 1100, 2.0],
                [0, 5.2, 700, 1700, 2700, 3700, -0.003, 1200, 3.0],
            ]
        )
        test = reference.copy()
        test[:, 1] += [0.1, 0.3, 0.5]
        test[1, 0] = 0
        test[:, 2] += [10.0, 20.0, 30.0]
        test[:, 7] += [100.0, -100.0, 200.0]
        stats = NormStats(np.zeros(8), np.ones(8))
        report = copy_synthesis_error(
            SpeechParams(reference, FrameGrid(n_frames=3)),
            SpeechParams(test, FrameGrid(n_frames=3)),
            stats,
        )
        assert report.vuv_disagreement == pytest.approx(1 / 3)
        assert report["log_f0"].mse == pytest.approx(0.01)
        assert report["log_f0"].n_frames == 1
        assert report["f1"].mse == pytest.approx(100.0)
        assert report["centroid"].mse == pytest.approx((1e4 + 1e4 + 4e4) / 3)
        assert report["centroid"].median_se == pytest.approx(1e4)
        assert report.n_frames == 3


class TestAlignFrames:
    def test_truncates_small_mismatch(self, caplog):
        with caplog.at_level(logging.WARNING, logger="neuform.evaluate"):
            a, b = align_frames(make_params(10), make_params(12))
        assert len(a) == len(b) == 10
        assert "Truncating to 10 frames" in caplog.text

    def test_large_mismatch(self):
        with pytest.raises(EvaluationError, match="Frame counts differ by 3"):
            align_frames(make_params(10), make_params(13))


class TestErrorAccumulator:
    def test_empty(self, stats):
        report = ErrorAccumulator(stats).report()
        assert np.isnan(report["f1"].mse)
        assert report["f1"].n_frames == 0

    def test_pools_frames(self, stats, params):
        accumulator = ErrorAccumulator(stats)
        accumulator.add(params, params)
        accumulator.add(make_params(5), make_params(5))
        assert accumulator.report()["energy"].n_frames == 25


class TestMedianRatio:
    def test_log_f0(self, params):
        shifted = params.replace("log_f0", params["log_f0"] + np.log(1.1))
        assert median_ratio(Parameter.LOG_F0, params, shifted) == pytest.approx(1.1)

    def test_formant(self, params):
        scaled = params.replace("f2", params["f2"] * 0.8)
        assert median_ratio(Parameter.F2, params, scaled) == pytest.approx(0.8)


class TestEvaluateCopy:
    def test_records_failures(self, utterances, stats):
        def pipeline(utterance, params, preset):
            if utterance.utterance_id == "u1":
                raise RuntimeError("boom")
            return params

        report, failures = evaluate_copy(utterances, pipeline, stats, jobs=2)
        assert list(failures) == ["u1"]
        assert str(failures["u1"]) == "boom"
        assert report.n_frames == 40
        assert report["tilt"].mse == 0.0

    def test_mismatched_lengths_are_failures(self, utterances, stats):
        report, failures = evaluate_copy(
            utterances, lambda u, p, preset: p.truncate(10), stats
        )
        assert set(failures) == {"u0", "u1", "u2"}
        assert report.n_frames == 0


class TestManipulationSweep:
    def test_without_pipeline(self, utterances, stats):
        report = manipulation_sweep(utterances, (0.8, 1.2), stats=stats)
        assert len(report) == 2 * len(CONTINUOUS)
        entry = report["f1", 1.2]
        assert entry.median_ratio == pytest.approx(1.0)
        assert all(e.mse == 0.0 for e in entry.report.errors.values())
        assert report["log_f0", 0.8].median_ratio == pytest.approx(1.0)

    def test_unit_factor_matches_copy(self, utterances, stats):
        copy, _ = evaluate_copy(utterances, tilt_pipeline, stats)
        sweep = manipulation_sweep(
            utterances, (1.0,), tilt_pipeline, stats, parameters=["f1"]
        )
        assert sweep["f1", 1.0].report == copy

    def test_failures(self, utterances, stats):
        def pipeline(utterance, params, preset):
            if utterance.utterance_id == "u2":
                raise RuntimeError("boom")
            return params

        report = manipulation_sweep(
            utterances, (1.2,), pipeline, stats, parameters=["f1"]
        )
        assert report.failures == {("f1", 1.2): {"u2": "boom"}}
        assert report["f1", 1.2].report.n_frames == 40

    def test_voicing_rejected(self, utterances, stats):
        with pytest.raises(ValueError, match="voicing flag cannot be swept"):
            manipulation_sweep(utterances, stats=stats, parameters=["vuv"])

    def test_needs_stats(self, utterances):
        with pytest.raises(ValueError, match="normalization stats"):
            manipulation_sweep(utterances)

    def test_missing_entry(self, utterances, stats):
        report = manipulation_sweep(utterances, (1.2,), stats=stats, parameters=["f1"])
        with pytest.raises(KeyError):
            report["f2", 1.2]


class TestWidenPreset:
    def test_f0(self):
        preset = preset_config("low")
        widened = widen_preset(preset, Parameter.LOG_F0, 1.3, 11025.0)
        assert widened.f0.f_max == pytest.approx(390.0)
        assert widened.f0.f_min == preset.f0.f_min
        assert widened.formant_ceiling == preset.formant_ceiling

    def test_formant_ceiling(self):
        widened = widen_preset(preset_config("high"), Parameter.F2, 1.3, 11025.0)
        assert widened.formant_ceiling == pytest.approx(7150.0)

    def test_ceiling_capped(self):
        widened = widen_preset(preset_config("high"), Parameter.F3, 1.3, 6000.0)
        assert widened.formant_ceiling == 6000.0

    def test_other_parameters_unchanged(self):
        preset = preset_config("low")
        widened = widen_preset(preset, Parameter.TILT, 1.3, 11025.0)
        assert widened.f0 == preset.f0


class TestReports:
    def test_csv_and_json_agree(self, utterances, stats, tmp_path):
        report, _ = evaluate_copy(utterances, tilt_pipeline, stats)
        csv_path = write_report(report, tmp_path / "copy.csv")
        json_path = write_report(report, tmp_path / "copy.json", format="json")
        assert read_report(csv_path) == read_report(json_path)
        header = csv_path.read_text().splitlines()[0]
        assert header == ",".join(COPY_COLUMNS)
        document = json.loads(json_path.read_text())
        assert document["kind"] == "copy"
        assert [row["parameter"] for row in document["rows"]][0] == "vuv"

    def test_sweep_rows(self, utterances, stats, tmp_path):
        report = manipulation_sweep(utterances, (1.2,), stats=stats, parameters=["f1"])
        rows = read_report(write_report(report, tmp_path / "sweep.csv"))
        assert len(rows) == 9
        assert list(rows[0]) == list(SWEEP_COLUMNS)
        f1 = next(row for row in rows if row["parameter"] == "f1")
        assert f1["median_ratio"] == pytest.approx(1.0)
        assert next(row for row in rows if row["parameter"] == "f2")[
            "median_ratio"
        ] is None

    def test_empty_sweep(self, tmp_path):
        path = write_report(SweepReport(), tmp_path / "empty.csv")
        assert path.read_text().splitlines() == [",".join(SWEEP_COLUMNS)]

    def test_unknown_format(self, stats, params, tmp_path):
        report = copy_synthesis_error(params, params, stats)
        with pytest.raises(ValueError, match="Unknown report format"):
            write_report(report, tmp_path / "x.txt", format="xml")

    def test_undefined_errors_written_as_null(self, params, stats, tmp_path):
        unvoiced = params.replace("vuv", np.zeros(len(params)))
        report = copy_synthesis_error(params, unvoiced, stats)
        json_path = write_report(report, tmp_path / "copy.json", format="json")
        csv_path = write_report(report, tmp_path / "copy.csv")
        document = json.loads(json_path.read_text())
        f1 = next(row for row in document["rows"] if row["parameter"] == "f1")
        assert f1["mse"] is None
        assert f1["n_frames"] == 0
        assert "NaN" not in json_path.read_text()
        assert read_report(csv_path) == read_report(json_path)
