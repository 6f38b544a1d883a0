import numpy as np
import pytest

from neuform.config import F0Config
from neuform.errors import ConfigError, NoVoicedFramesError
from neuform.models import FrameGrid, PitchTrack, VoicePreset, Waveform
from neuform.pitch import (
    auto_voice_preset,
    estimate_f0,
    interpolate_unvoiced,
    preset_config,
)
from neuform.synth import pulse_train, sine, synth_vowel

SR = 22050
SWEEP_RATES = range(75, 505, 5)
SWEEP_RANGE = F0Config(f_min=75.0, f_max=500.0)


def grid_for(waveform: Waveform) -> FrameGrid:
    return FrameGrid.for_samples(len(waveform), sample_rate=waveform.sample_rate)


def periodic_source(kind: str, f0: float, duration: float = 1.0) -> Waveform:
    """A periodic test signal at `f0`."""
    n_samples = int(round(duration * SR))
    if kind == "rounded":
        samples = np.zeros(n_samples)
        epochs = np.round(np.arange(0.0, n_samples, SR / f0)).astype(int)
        samples[epochs[epochs < n_samples]] = 0.5
        return Waveform(samples)
    if kind == "phase":
        return Waveform(0.5 * pulse_train(f0, duration))
    if kind == "harmonics":
        n = np.arange(n_samples)[:, None]
        harmonics = np.arange(1, int(0.45 * SR // f0) + 1)[None, :]
        samples = np.cos(2 * np.pi * f0 * harmonics * n / SR).sum(axis=1)
        return Waveform(0.5 * samples / np.abs(samples).max())
    return sine(f0, duration)


class TestEstimateF0:
    def test_pulse_train(self, pulses_150):
        track = estimate_f0(pulses_150, F0Config(), grid_for(pulses_150))
        assert len(track) == 83
        accurate = track.voiced & (np.abs(np.exp(track.log_f0) - 150.0) <= 3.0)
        assert accurate.mean() >= 0.95

    def test_white_noise(self):
        noise = Waveform(0.3 * np.random.default_rng(0).standard_normal(SR))
        track = estimate_f0(noise, F0Config(), grid_for(noise))
        assert (1 - track.voiced.mean()) >= 0.9

    def test_sine(self):
        tone = sine(220.0, 1.0, amplitude=0.5)
        cfg = F0Config(f_min=100.0, f_max=500.0)
        track = estimate_f0(tone, cfg, grid_for(tone))
        assert track.voiced.mean() >= 0.95
        f0 = np.exp(np.median(track.log_f0[track.voiced]))
        assert f0 == pytest.approx(220.0, abs=2.0)

    def test_vowel(self, vowel):
        track = estimate_f0(vowel, F0Config(), grid_for(vowel))
        f0 = np.exp(np.median(track.log_f0[track.voiced]))
        assert f0 == pytest.approx(120.0, rel=0.03)

    def test_amplitude_invariant(self, vowel):
        louder = Waveform(2 * vowel.samples, vowel.sample_rate)
        quiet = estimate_f0(vowel, F0Config(), grid_for(vowel))
        loud = estimate_f0(louder, F0Config(), grid_for(louder))
        np.testing.assert_array_equal(quiet.vuv, loud.vuv)
        voiced = quiet.voiced
        np.testing.assert_allclose(
            loud.log_f0[voiced], quiet.log_f0[voiced], rtol=1e-6
        )

    @pytest.mark.parametrize("f0", SWEEP_RATES)
    @pytest.mark.parametrize("source", ["rounded", "phase", "harmonics", "sine"])
    def test_rate_sweep(self, f0, source):
        audio = periodic_source(source, float(f0))
        track = estimate_f0(audio, SWEEP_RANGE, grid_for(audio))
        assert track.voiced.mean() >= 0.9
        error = np.abs(np.exp(track.log_f0[track.voiced]) / f0 - 1)
        assert (error <= 0.02).mean() >= 0.95

    def test_voicing_alternation(self):
        voiced_part = synth_vowel(f0=140.0, duration=0.5).samples
        segment = len(voiced_part)
        rng = np.random.default_rng(3)
        parts = [
            voiced_part if i % 2 == 0 else 0.1 * rng.standard_normal(segment)
            for i in range(6)
        ]
        audio = Waveform(np.concatenate(parts))
        grid = grid_for(audio)
        track = estimate_f0(audio, F0Config(), grid)

        centers = grid.frame_starts() + grid.win_length // 2
        half_window = int(round(3.0 / 75.0 * SR)) // 2
        index = np.minimum(centers // segment, 5)
        clear = (centers - half_window >= index * segment) & (
            centers + half_window < (index + 1) * segment
        )
        expected = index % 2 == 0
        assert clear.sum() >= 150
        assert (track.voiced[clear] == expected[clear]).mean() >= 0.95

    def test_lag_refinement_off_keeps_integer_grid(self, pulses_150):
        cfg = F0Config(lag_upsampling=1, lowpass_hz=None, subharmonic_ratio=1.0)
        track = estimate_f0(pulses_150, cfg, grid_for(pulses_150))
        assert len(track) == 83
        assert track.voiced.mean() >= 0.9

    def test_unvoiced_frames_hold_nan(self):
        noise = Waveform(np.random.default_rng(1).standard_normal(SR))
        track = estimate_f0(noise, F0Config(), grid_for(noise))
        assert np.all(np.isnan(track.log_f0[~track.voiced]))

    def test_silence(self):
        silence = Waveform(np.zeros(SR))
        track = estimate_f0(silence, F0Config(), grid_for(silence))
        assert not track.voiced.any()

    def test_shorter_than_pitch_window(self):
        short = Waveform(pulse_train(150.0, 1024 / SR))
        track = estimate_f0(short, F0Config(f_min=50.0), grid_for(short))
        assert len(track) == 1
        assert not track.voiced.any()

    def test_ceiling_above_nyquist(self):
        audio = Waveform(np.zeros(4096), 500)
        grid = FrameGrid(sample_rate=500, n_frames=1)
        with pytest.raises(ConfigError, match="Nyquist"):
            estimate_f0(audio, F0Config(), grid)

    def test_rate_mismatch(self, vowel):
        grid = FrameGrid(sample_rate=16000, n_frames=3)
        with pytest.raises(ConfigError, match="Grid is at 16000 Hz"):
            estimate_f0(vowel, F0Config(), grid)


class TestInterpolateUnvoiced:
    def test_midpoint(self):
        track = PitchTrack(np.array([5.0, np.nan, 5.2]), np.array([1, 0, 1]))
        filled = interpolate_unvoiced(track)
        assert filled.log_f0[1] == pytest.approx(5.1)
        np.testing.assert_array_equal(filled.vuv, [1, 0, 1])

    def test_all_voiced_identity(self):
        track = PitchTrack(np.array([4.8, 4.9, 5.0]), np.ones(3))
        np.testing.assert_array_equal(interpolate_unvoiced(track).log_f0, track.log_f0)

    def test_leading_edge_hold(self):
        track = PitchTrack(np.array([np.nan, np.nan, 4.9]), np.array([0, 0, 1]))
        np.testing.assert_array_equal(interpolate_unvoiced(track).log_f0, [4.9] * 3)

    def test_no_voiced_frames(self):
        track = PitchTrack(np.full(3, np.nan), np.zeros(3))
        with pytest.raises(NoVoicedFramesError, match="without voiced frames"):
            interpolate_unvoiced(track)


class TestVoicePreset:
    def test_presets(self):
        low = preset_config("low")
        high = preset_config(VoicePreset.HIGH)
        assert (low.f0.f_min, low.f0.f_max, low.formant_ceiling) == (75, 300, 5000)
        assert (high.f0.f_min, high.f0.f_max, high.formant_ceiling) == (
            100,
            500,
            5500,
        )

    def test_auto_needs_audio(self):
        with pytest.raises(ValueError, match="auto preset needs audio"):
            preset_config("auto")

    def test_low_voice(self):
        choice = auto_voice_preset(Waveform(pulse_train(120.0, 1.0)))
        assert choice.preset is VoicePreset.LOW
        assert not choice.warning
        assert choice.median_f0 == pytest.approx(120.0, rel=0.03)

    def test_high_voice(self):
        choice = auto_voice_preset(Waveform(pulse_train(210.0, 1.0)))
        assert choice.preset is VoicePreset.HIGH
        assert choice.formant_ceiling == 5500.0

    def test_silence_falls_back_to_low(self):
        silence = Waveform(np.zeros(SR))
        choice = auto_voice_preset(silence)
        assert choice.preset is VoicePreset.LOW
        assert choice.warning
        assert choice.median_f0 is None

    def test_empty(self):
        with pytest.raises(ValueError, match="empty waveform"):
            auto_voice_preset(Waveform(np.zeros(0)))
