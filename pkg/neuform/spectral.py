from __future__ import annotations

import logging
from typing import Literal

import librosa
import numpy as np
from scipy.signal import get_window

from .config import FrameConfig, MelConfig
from .errors import ConfigError
from .models import FrameGrid, MagnitudeSpectrogram, MelBasis, MelSpectrogram, Waveform

logger = logging.getLogger(__name__)

MAGNITUDE_FLOOR = 1e-5


def make_grid(waveform: Waveform, frame: FrameConfig | None = None) -> FrameGrid:
    """Creates the frame grid of a waveform without pre-padding.

    Args:
        waveform: The input audio, at the configured sample rate.
        frame: Window and hop settings. Defaults to `FrameConfig()`.

    Returns:
        FrameGrid: The shared grid of every trajectory of this waveform.
    """
    frame = frame or FrameConfig()
    if waveform.sample_rate != frame.sample_rate:
        raise ConfigError(
            f"Expected audio at {frame.sample_rate} Hz; "
            f"received {waveform.sample_rate} Hz. Resample first."
        )
    return FrameGrid.for_samples(
        len(waveform), frame.win_length, frame.hop_length, frame.sample_rate
    )


def frame_signal(waveform: Waveform, grid: FrameGrid) -> np.ndarray:
    """Slices a waveform into frames of `win_length` at `hop_length` stride.

    Frame `t` starts at sample `t * hop_length`; no padding is applied.

    Args:
        waveform: The input audio.
        grid: The frame grid, typically from `make_grid`.

    Returns:
        np.ndarray: A read-only view of shape (n_frames, win_length).
    """
    if grid.n_frames == 0:
        return np.zeros((0, grid.win_length))
    if grid.n_samples > len(waveform):
        raise ValueError(
            f"Grid spans {grid.n_samples} samples; waveform has {len(waveform)}."
        )
    windows = np.lib.stride_tricks.sliding_window_view(
        waveform.samples, grid.win_length
    )
    return windows[:: grid.hop_length][: grid.n_frames]


def analysis_window(n_fft: int) -> np.ndarray:
    """Periodic Hann window."""
    return get_window("hann", n_fft, fftbins=True)


def stft_magnitude(frames: np.ndarray, grid: FrameGrid) -> MagnitudeSpectrogram:
    """Hann-windowed real-FFT magnitudes of every frame.

    Args:
        frames: Array of shape (n_frames, win_length).
        grid: The frame grid; `n_fft` equals `win_length`.

    Returns:
        MagnitudeSpectrogram: The per-bin moduli.
    """
    frames = np.asarray(frames, dtype=np.float64)
    n_fft = grid.win_length
    if frames.ndim != 2 or frames.shape[1] != n_fft:
        raise ValueError(
            f"Expected frames of shape (n, {n_fft}); received {frames.shape}."
        )
    spectrum = np.fft.rfft(frames * analysis_window(n_fft), axis=1)
    return MagnitudeSpectrogram(np.abs(spectrum), n_fft, grid.with_frames(len(frames)))


def hz_to_mel(frequency: float | np.ndarray) -> float | np.ndarray:
    """HTK mel scale, `2595 * log10(1 + f / 700)`."""
    return librosa.hz_to_mel(frequency, htk=True)


def mel_to_hz(mel: float | np.ndarray) -> float | np.ndarray:
    """Inverse of `hz_to_mel`."""
    return librosa.mel_to_hz(mel, htk=True)


def mel_filterbank(
    n_fft: int,
    n_mels: int = 80,
    f_min: float = 0.0,
    f_max: float = 8000.0,
    sample_rate: int = 22050,
) -> MelBasis:
    """Triangular filters on the HTK mel scale with slaney area normalization.

    Args:
        n_fft: FFT size.
        n_mels: Number of filters.
        f_min: Lowest filter edge in Hz.
        f_max: Highest filter edge in Hz.
        sample_rate: Sample rate in Hz.

    Returns:
        MelBasis: Filters ordered by center frequency.
    """
    if not 0 <= f_min < f_max <= sample_rate / 2:
        raise ValueError(
            f"Expected 0 <= f_min < f_max <= {sample_rate / 2}; "
            f"received f_min={f_min} and f_max={f_max}."
        )
    weights = librosa.filters.mel(
        sr=sample_rate,
        n_fft=n_fft,
        n_mels=n_mels,
        fmin=f_min,
        fmax=f_max,
        htk=True,
        norm="slaney",
    ).astype(np.float64)
    empty = np.flatnonzero(weights.max(axis=1) <= 0)
    if len(empty):
        raise ValueError(
            f"Mel filters {empty.tolist()} cover no FFT bin; "
            f"use fewer mel bands or a larger n_fft."
        )
    return MelBasis(weights, float(f_min), float(f_max), int(sample_rate))


def mel_basis_for(frame: FrameConfig, mel: MelConfig) -> MelBasis:
    """Filterbank matching a frame and mel configuration."""
    return mel_filterbank(
        frame.n_fft, mel.n_mels, mel.f_min, mel.f_max, frame.sample_rate
    )


def mel_spectrogram(
    spec: MagnitudeSpectrogram, basis: MelBasis, floor: float = MAGNITUDE_FLOOR
) -> MelSpectrogram:
    """Log-compressed mel energies, `ln(max(basis @ |X|, floor))`.

    Args:
        spec: Magnitude spectrogram.
        basis: Mel filterbank with a matching bin count.
        floor: Floor applied before the log.

    Returns:
        MelSpectrogram: Values of shape (n_frames, n_mels).
    """
    if basis.weights.shape[1] != spec.values.shape[1]:
        raise ValueError(
            f"Mel basis expects {basis.weights.shape[1]} bins; "
            f"spectrogram has {spec.values.shape[1]}."
        )
    mel = spec.values @ basis.weights.T
    return MelSpectrogram(np.log(np.maximum(mel, floor)), spec.grid)


def bin_frequencies(n_bins: int, sample_rate: int) -> np.ndarray:
    """Center frequency of each of the `n_fft // 2 + 1` bins."""
    n_fft = 2 * (n_bins - 1)
    return np.arange(n_bins) * sample_rate / n_fft


def spectral_tilt(
    magnitude: np.ndarray,
    sample_rate: int = 22050,
    scale: Literal["db", "linear"] = "db",
) -> float | np.ndarray:
    """Least-squares slope of the magnitude spectrum against frequency.

    Args:
        magnitude: One frame of bins 0..n_fft/2, or an array of frames.
        sample_rate: Sample rate in Hz.
        scale: Regress `20 log10(max(|X|, 1e-5))` ("db") or `|X|` ("linear").

    Returns:
        The slope in dB (or magnitude units) per Hz, per frame.
    """
    magnitude = np.asarray(magnitude, dtype=np.float64)
    if magnitude.shape[-1] < 2:
        raise ValueError("Spectral tilt needs at least two bins.")
    if scale == "db":
        values = 20 * np.log10(np.maximum(magnitude, MAGNITUDE_FLOOR))
    elif scale == "linear":
        values = magnitude
    else:
        raise ValueError(f"Unknown tilt scale '{scale}'; expected 'db' or 'linear'.")
    frequencies = bin_frequencies(magnitude.shape[-1], sample_rate)
    centered = frequencies - frequencies.mean()
    deviations = values - values.mean(axis=-1, keepdims=True)
    return (deviations @ centered) / (centered @ centered)


def spectral_centroid(
    magnitude: np.ndarray, sample_rate: int = 22050
) -> float | np.ndarray:
    """Magnitude-weighted mean frequency, 0 Hz for an all-zero frame.

    Args:
        magnitude: One frame of bins 0..n_fft/2, or an array of frames.
        sample_rate: Sample rate in Hz.

    Returns:
        The centroid in Hz, per frame.
    """
    magnitude = np.asarray(magnitude, dtype=np.float64)
    frequencies = bin_frequencies(magnitude.shape[-1], sample_rate)
    total = magnitude.sum(axis=-1)
    weighted = magnitude @ frequencies
    safe_total = np.where(total > 0, total, 1.0)
    return np.where(total > 0, weighted / safe_total, 0.0)[()]


def frame_energy(frame: np.ndarray) -> float | np.ndarray:
    """Sum of squared samples of an unwindowed frame (or of each frame)."""
    frame = np.asarray(frame, dtype=np.float64)
    return np.einsum("...i,...i->...", frame, frame)[()]


def spectral_convergence(
    reference: np.ndarray, estimate: np.ndarray, scale_invariant: bool = False
) -> float:
    """Spectral convergence `||S - S'|| / ||S||` in dB.

    Args:
        reference: Reference magnitudes.
        estimate: Estimated magnitudes of the same shape.
        scale_invariant: Fit the least-squares gain of `estimate` first, for
            comparing peak-normalized reconstructions.

    Returns:
        float: `20 log10` of the ratio; -inf for an exact match.
    """
    reference = np.asarray(reference, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if reference.shape != estimate.shape:
        raise ValueError(
            f"Expected equal shapes; received {reference.shape} and {estimate.shape}."
        )
    reference_norm = np.linalg.norm(reference)
    if reference_norm == 0:
        return 0.0 if np.any(estimate) else -np.inf
    if scale_invariant:
        energy = np.vdot(estimate, estimate)
        if energy > 0:
            estimate = estimate * (np.vdot(reference, estimate) / energy)
    error = np.linalg.norm(reference - estimate) / reference_norm
    with np.errstate(divide="ignore"):
        return float(20 * np.log10(error))
