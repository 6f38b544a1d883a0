import struct

import numpy as np
import pytest

from neuform.config import GriffinLimConfig
from neuform.errors import MelFormatError
from neuform.models import FrameGrid, MagnitudeSpectrogram, MelSpectrogram, Waveform
from neuform.spectral import (
    bin_frequencies,
    frame_energy,
    frame_signal,
    make_grid,
    mel_filterbank,
    mel_spectrogram,
    spectral_convergence,
    stft_magnitude,
)
from neuform.synth import sine
from neuform.vocoder import (
    export_mel,
    frame_gains,
    griffin_lim,
    import_mel,
    match_energy,
    mel_to_linear,
)

N_FFT = 1024
N_BINS = N_FFT // 2 + 1


@pytest.fixture(scope="module")
def basis():
    return mel_filterbank(N_FFT)


def smooth_spectrogram(n_frames: int = 4, offset: float = 1.0) -> MagnitudeSpectrogram:
    frequencies = bin_frequencies(N_BINS, 22050)
    row = offset + 0.5 * np.cos(2 * np.pi * frequencies / 4000.0)
    values = np.tile(row, (n_frames, 1))
    return MagnitudeSpectrogram(values, N_FFT, FrameGrid(n_frames=n_frames))


class TestMelToLinear:
    def test_smooth_spectrum(self, basis):
        spec = smooth_spectrogram()
        restored = mel_to_linear(mel_spectrogram(spec, basis), basis)
        band = (bin_frequencies(N_BINS, 22050) >= 100) & (
            bin_frequencies(N_BINS, 22050) <= 7500
        )
        reference = spec.values[:, band]
        error = np.linalg.norm(restored.values[:, band] - reference)
        assert error / np.linalg.norm(reference) <= 0.15

    def test_floor_is_silent(self, basis):
        mel = MelSpectrogram(np.full((3, 80), np.log(1e-5)), FrameGrid(n_frames=3))
        assert np.max(mel_to_linear(mel, basis).values) <= 1e-4

    def test_log_offset_doubles(self, basis):
        mel = mel_spectrogram(smooth_spectrogram(), basis)
        doubled = MelSpectrogram(mel.values + np.log(2.0), mel.grid)
        np.testing.assert_allclose(
            mel_to_linear(doubled, basis).values,
            2 * mel_to_linear(mel, basis).values,
            rtol=1e-9,
            atol=1e-12,
        )

    def test_non_negative(self, basis):
        rng = np.random.default_rng(0)
        mel = MelSpectrogram(rng.normal(-3, 2, (5, 80)), FrameGrid(n_frames=5))
        assert np.all(mel_to_linear(mel, basis).values >= 0)

    def test_band_mismatch(self, basis):
        mel = MelSpectrogram(np.zeros((1, 40)), FrameGrid(n_frames=1))
        with pytest.raises(ValueError, match="40 bands"):
            mel_to_linear(mel, basis)


class TestGriffinLim:
    def test_sine_reconstruction(self):
        tone = sine(1000.0, 1.0)
        grid = make_grid(tone)
        target = stft_magnitude(frame_signal(tone, grid), grid)
        recon = griffin_lim(target, GriffinLimConfig(n_iters=60))
        assert len(recon) == grid.n_samples
        assert np.max(np.abs(recon.samples)) == pytest.approx(0.95)
        estimate = stft_magnitude(frame_signal(recon, grid), grid)
        convergence = spectral_convergence(
            target.values, estimate.values, scale_invariant=True
        )
        assert convergence <= -20.0

    def test_zero_magnitudes(self):
        grid = FrameGrid(n_frames=5)
        silent = MagnitudeSpectrogram(np.zeros((5, N_BINS)), N_FFT, grid)
        recon = griffin_lim(silent)
        assert len(recon) == 2048
        assert not recon.samples.any()

    def test_no_frames(self):
        empty = MagnitudeSpectrogram(np.zeros((0, N_BINS)), N_FFT, FrameGrid())
        assert len(griffin_lim(empty)) == 0

    def test_window_mismatch(self):
        spec = MagnitudeSpectrogram(np.zeros((1, 257)), 512, FrameGrid(n_frames=1))
        with pytest.raises(ValueError, match="n_fft 512"):
            griffin_lim(spec)


class TestGriffinLimConvergence:
    @pytest.fixture
    def target(self, vowel):
        grid = make_grid(vowel)
        return stft_magnitude(frame_signal(vowel, grid), grid)

    @staticmethod
    def error(target, cfg):
        recon = griffin_lim(target, cfg, normalize=False)
        estimate = stft_magnitude(frame_signal(recon, target.grid), target.grid)
        return spectral_convergence(target.values, estimate.values)

    def test_plain_iterations_never_increase_error(self, target):
        errors = [
            self.error(target, GriffinLimConfig(n_iters=n, momentum=0.0))
            for n in (2, 4, 8, 16, 32)
        ]
        assert np.all(np.diff(errors) <= 1e-6)

    def test_doubling_iterations(self, target):
        short = self.error(target, GriffinLimConfig(n_iters=30))
        long = self.error(target, GriffinLimConfig(n_iters=60))
        assert long <= short


class TestMatchEnergy:
    @pytest.fixture
    def energies(self, vowel):
        return frame_energy(frame_signal(vowel, make_grid(vowel)))

    def test_identity(self, vowel, energies):
        matched = match_energy(vowel, energies, make_grid(vowel))
        np.testing.assert_allclose(matched.samples, vowel.samples, rtol=1e-12)

    def test_four_times_energy_doubles_amplitude(self, vowel, energies):
        matched = match_energy(vowel, 4 * energies, make_grid(vowel))
        np.testing.assert_allclose(matched.samples, 2 * vowel.samples, rtol=1e-12)

    def test_length_mismatch(self, vowel):
        with pytest.raises(ValueError, match="Expected 83 target energies"):
            match_energy(vowel, np.ones(3), make_grid(vowel))

    def test_empty_waveform(self):
        empty = Waveform(np.zeros(0))
        assert match_energy(empty, np.zeros(0), FrameGrid()) is empty


class TestFrameGains:
    def test_clamped(self):
        assert frame_gains(np.array([0.0]), np.array([1.0]))[0] == 8.0
        assert frame_gains(np.array([4.0]), np.array([0.0]))[0] == 0.125

    def test_square_root(self):
        np.testing.assert_allclose(frame_gains([1.0, 4.0], [4.0, 1.0]), [2.0, 0.5])


class TestMelFile:
    @pytest.fixture
    def mel(self):
        values = np.arange(5 * 80, dtype=np.float32).reshape(5, 80) / 8 - 20
        return MelSpectrogram(values, FrameGrid(n_frames=5))

    @pytest.fixture
    def path(self, mel, tmp_path):
        return export_mel(tmp_path / "utt.nfmel", mel)

    def test_round_trip(self, mel, path):
        restored = import_mel(path, n_mels=80)
        np.testing.assert_array_equal(restored.values, mel.values)
        assert restored.values.dtype == np.float64
        assert restored.grid == mel.grid

    def test_layout(self, path):
        data = path.read_bytes()
        assert data[:6] == b"NFMEL1"
        assert struct.unpack("<4I", data[6:22]) == (5, 80, 22050, 256)
        assert len(data) == 22 + 4 * 5 * 80

    def test_empty(self, tmp_path):
        empty = MelSpectrogram(np.zeros((0, 80)), FrameGrid())
        restored = import_mel(export_mel(tmp_path / "empty.nfmel", empty))
        assert restored.values.shape == (0, 80)

    def test_truncated_payload(self, path):
        path.write_bytes(path.read_bytes()[:-2])
        with pytest.raises(MelFormatError, match="truncated"):
            import_mel(path)

    def test_truncated_header(self, path):
        path.write_bytes(path.read_bytes()[:10])
        with pytest.raises(MelFormatError, match="inside the header"):
            import_mel(path)

    def test_bad_magic(self, path):
        path.write_bytes(b"NFMEL2" + path.read_bytes()[6:])
        with pytest.raises(MelFormatError, match="bad magic"):
            import_mel(path)

    def test_band_mismatch(self, path):
        with pytest.raises(MelFormatError, match="expected 40"):
            import_mel(path, n_mels=40)

    def test_trailing_bytes(self, path):
        path.write_bytes(path.read_bytes() + b"\x00" * 3)
        with pytest.raises(MelFormatError, match="3 bytes after"):
            import_mel(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            import_mel(tmp_path / "absent.nfmel")
