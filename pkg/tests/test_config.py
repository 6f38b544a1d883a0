import json

import pytest
from pydantic import ValidationError

from neuform.config import (
    AnalysisConfig,
    F0Config,
    FrameConfig,
    LpcFrameConfig,
    MapperConfig,
    MelConfig,
    RunConfig,
)
from neuform.models import VoicePreset


class TestDefaults:
    def test_frame(self):
        frame = FrameConfig()
        assert (frame.sample_rate, frame.win_length, frame.hop_length) == (
            22050,
            1024,
            256,
        )
        assert frame.n_fft == 1024

    def test_mel(self):
        mel = MelConfig()
        assert (mel.n_mels, mel.f_min, mel.f_max, mel.floor) == (80, 0.0, 8000.0, 1e-5)

    def test_receptive_field(self):
        assert MapperConfig().dilations == (1, 2, 4, 1, 2, 4)
        assert MapperConfig().receptive_field == 29

    def test_frozen(self):
        with pytest.raises(ValidationError):
            RunConfig().jobs = 4


class TestValidation:
    def test_hop_longer_than_window(self):
        with pytest.raises(ValidationError, match="win_length must be >= hop_length"):
            FrameConfig(win_length=256, hop_length=512)

    def test_even_kernel(self):
        with pytest.raises(ValidationError, match="kernel_width must be odd"):
            MapperConfig(kernel_width=4)

    def test_empty_dilations(self):
        with pytest.raises(ValidationError, match="dilations"):
            MapperConfig(dilations=())

    def test_mel_above_nyquist(self):
        with pytest.raises(ValidationError, match="Nyquist"):
            AnalysisConfig(frame=FrameConfig(sample_rate=8000))

    def test_lpc_order(self):
        with pytest.raises(ValidationError, match="2 \\* max_formants"):
            LpcFrameConfig(order=12)

    def test_extra_field(self):
        with pytest.raises(ValidationError):
            RunConfig.model_validate({"bogus": 1})


class TestWidening:
    def test_f0_upward(self):
        widened = F0Config().widened(1.3)
        assert widened.f_min == 75.0
        assert widened.f_max == pytest.approx(390.0)

    def test_f0_downward(self):
        widened = F0Config().widened(0.7)
        assert widened.f_min == pytest.approx(52.5)
        assert widened.f_max == 300.0

    def test_ceiling_capped(self):
        lpc = LpcFrameConfig(ceiling=5000.0)
        assert lpc.widened(1.2, 11025.0).ceiling == pytest.approx(6000.0)
        assert lpc.widened(3.0, 11025.0).ceiling == 11025.0
        assert lpc.widened(0.8, 11025.0).ceiling == 5000.0


class TestRunConfig:
    def test_overrides(self):
        config = RunConfig().with_overrides(
            {"train.max_updates": 10, "jobs": 2, "seed": None}
        )
        assert config.train.max_updates == 10
        assert config.jobs == 2
        assert config.seed == 0

    def test_enum_override(self):
        config = RunConfig().with_overrides({"analysis.voice": VoicePreset.HIGH})
        assert config.analysis.voice is VoicePreset.HIGH

    def test_unknown_override(self):
        with pytest.raises(ValueError, match="Unknown config field 'train.bogus'"):
            RunConfig().with_overrides({"train.bogus": 1})

    def test_unknown_section(self):
        with pytest.raises(ValueError, match="Unknown config section 'nope'"):
            RunConfig().with_overrides({"nope.value": 1})

    def test_invalid_override(self):
        with pytest.raises(ValidationError):
            RunConfig().with_overrides({"jobs": 0})

    def test_echo_round_trip(self, tmp_path):
        config = RunConfig(jobs=3)
        path = config.echo(tmp_path / "out")
        assert path.name == "config.json"
        assert RunConfig.from_json_file(path) == config

    def test_from_partial_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"griffinlim": {"n_iters": 5}}))
        config = RunConfig.from_json_file(path)
        assert config.griffinlim.n_iters == 5
        assert config.griffinlim.momentum == 0.99
