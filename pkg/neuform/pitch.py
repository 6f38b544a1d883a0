from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft, rfftfreq
from scipy.signal import get_window

from .config import F0Config
from .errors import ConfigError, NoVoicedFramesError
from .models import FrameGrid, PitchTrack, VoicePreset, Waveform
from .utils import interpolate_gaps

logger = logging.getLogger(__name__)

AUTO_RANGE = (60.0, 600.0)
AUTO_SPLIT_HZ = 165.0
SUBHARMONIC_TOLERANCE = 0.03
MAX_SUBHARMONIC_DIVISOR = 8

PRESETS: dict[VoicePreset, tuple[F0Config, float]] = {
    VoicePreset.LOW: (F0Config(f_min=75.0, f_max=300.0), 5000.0),
    VoicePreset.HIGH: (F0Config(f_min=100.0, f_max=500.0), 5500.0),
}


@dataclass(frozen=True)
class PresetChoice:
    """Extractor settings selected for a voice.

    Attributes:
        preset: The resolved preset, never `VoicePreset.AUTO`.
        f0: Pitch range and thresholds.
        formant_ceiling: LPC formant ceiling in Hz.
        warning: True when the choice fell back to the low preset because
            the first pass found no voiced frame.
        median_f0: Median voiced F0 of the first pass, if any.
    """

    preset: VoicePreset
    f0: F0Config
    formant_ceiling: float
    warning: bool = False
    median_f0: float | None = None


def preset_config(preset: VoicePreset | str) -> PresetChoice:
    """Settings of a fixed voice preset.

    Args:
        preset: `low` or `high`.

    Returns:
        PresetChoice: The preset's pitch range and formant ceiling.
    """
    preset = VoicePreset(preset)
    if preset is VoicePreset.AUTO:
        raise ValueError("The auto preset needs audio; use auto_voice_preset.")
    f0, ceiling = PRESETS[preset]
    return PresetChoice(preset, f0, ceiling)


def _pitch_segments(
    samples: np.ndarray, grid: FrameGrid, window_length: int
) -> np.ndarray:
    """Pitch windows centered on the grid's frame centers, zero-padded at edges."""
    half = window_length // 2
    centers = (grid.frame_starts() + grid.win_length // 2).astype(int)
    padded = np.pad(samples, (half, half + window_length))
    index = centers[:, None] + np.arange(window_length)[None, :]
    return padded[index]


def _spectral_taper(n_fft: int, sample_rate: float, edge: float | None) -> np.ndarray:
    """Power weights falling as cos^2 from DC to `edge`; all ones without an edge."""
    freqs = rfftfreq(n_fft, d=1.0 / sample_rate)
    if edge is None or edge >= sample_rate / 2:
        return np.ones_like(freqs)
    return np.where(freqs < edge, np.cos(0.5 * np.pi * freqs / edge) ** 2, 0.0)


def _normalized_autocorrelation(
    frames: np.ndarray,
    n_fft: int,
    n_lags: int,
    upsampling: int = 1,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Autocorrelation on a lag grid of `1 / upsampling` samples, unit at lag 0.

    The finer grid is the band-limited interpolation of the integer-lag
    autocorrelation, obtained by zero-padding the power spectrum.
    """
    power = np.abs(rfft(frames, n=n_fft, axis=-1)) ** 2
    if weights is not None:
        power = power * weights
    if upsampling > 1 and n_fft % 2 == 0:
        power[..., -1] *= 0.5
    autocorrelation = irfft(power, n=n_fft * upsampling, axis=-1)[..., :n_lags]
    zero_lag = autocorrelation[..., :1]
    safe = np.where(zero_lag > 0, zero_lag, 1.0)
    return np.where(zero_lag > 0, autocorrelation / safe, 0.0)


def _prefer_subharmonic_lags(
    best: np.ndarray,
    peak_lag: np.ndarray,
    strength: np.ndarray,
    candidate: np.ndarray,
    ratio: float,
) -> np.ndarray:
    """Moves each frame's pick to the shortest strong lag dividing the best lag.

    A period-doubled pick sits at an integer multiple of the true period with
    nearly the same strength; the largest divisor with a peak of at least
    `ratio` times the picked strength wins.
    """
    rows = np.arange(len(best))
    best_lag = peak_lag[rows, best][:, None]
    best_strength = strength[rows, best][:, None]
    chosen = best.copy()
    resolved = np.zeros(len(best), dtype=bool)
    for divisor in range(MAX_SUBHARMONIC_DIVISOR, 1, -1):
        target = best_lag / divisor
        near = (
            candidate
            & (np.abs(peak_lag - target) <= SUBHARMONIC_TOLERANCE * target)
            & (strength >= ratio * best_strength)
        )
        hit = near.any(axis=1) & ~resolved
        if hit.any():
            pick = np.argmax(np.where(near, strength, -np.inf), axis=1)
            chosen[hit] = pick[hit]
            resolved |= hit
    return chosen


def estimate_f0(waveform: Waveform, cfg: F0Config, grid: FrameGrid) -> PitchTrack:
    """Autocorrelation pitch tracking on the shared frame grid.

    Each frame's window spans `window_periods / f_min` seconds around the
    frame center. The frame spectrum is tapered above `lowpass_hz`, and the
    Hann-windowed autocorrelation, computed on a lag grid refined by
    `lag_upsampling`, is divided by the window's own autocorrelation. Local
    maxima inside the lag range are refined by parabolic interpolation and
    scored as `strength - octave_cost * log2(f_min * lag)`. When a peak at an
    integer fraction of the winning lag is at least `subharmonic_ratio` as
    strong, the shorter lag is taken instead. A frame is voiced when the
    chosen candidate's strength exceeds `voicing_threshold` and the frame RMS
    exceeds `silence_threshold` times the loudest frame's RMS. Voiced runs are
    smoothed by a 3-frame median filter and clamped to `[f_min, f_max]`.

    Args:
        waveform: The input audio at the grid's sample rate.
        cfg: Pitch range and thresholds.
        grid: The shared frame grid.

    Returns:
        PitchTrack: Natural-log F0 (NaN where unvoiced) and voicing flags.
    """
    sample_rate = waveform.sample_rate
    if sample_rate != grid.sample_rate:
        raise ConfigError(
            f"Grid is at {grid.sample_rate} Hz; waveform at {sample_rate} Hz."
        )
    if cfg.f_max >= sample_rate / 2:
        raise ConfigError(
            f"F0 ceiling {cfg.f_max} Hz must be below the Nyquist frequency."
        )

    n_frames = grid.n_frames
    log_f0 = np.full(n_frames, np.nan)
    vuv = np.zeros(n_frames, dtype=np.int8)
    window_length = int(round(cfg.window_periods / cfg.f_min * sample_rate))
    if n_frames == 0 or len(waveform) < window_length:
        logger.debug("Waveform shorter than one pitch window; all frames unvoiced.")
        return PitchTrack(log_f0, vuv)

    up = cfg.lag_upsampling
    min_lag = sample_rate / cfg.f_max
    max_lag = sample_rate / cfg.f_min
    search_end = (int(np.ceil(max_lag)) + 1) * up
    n_lags = search_end + 2
    n_fft = next_fast_len(window_length + int(np.ceil(max_lag)) + 3)

    segments = _pitch_segments(waveform.samples, grid, window_length)
    rms = np.sqrt(np.mean(np.square(segments), axis=1))
    segments = segments - segments.mean(axis=1, keepdims=True)

    window = get_window("hann", window_length, fftbins=False)
    weights = _spectral_taper(n_fft, sample_rate, cfg.lowpass_hz)
    r_signal = _normalized_autocorrelation(
        segments * window, n_fft, n_lags, up, weights
    )
    r_window = _normalized_autocorrelation(window[None, :], n_fft, n_lags, up)[0]
    r = r_signal / np.maximum(r_window, 1e-12)

    lags = np.arange(max(1, int(np.floor(min_lag * up))), search_end)
    left, center, right = r[:, lags - 1], r[:, lags], r[:, lags + 1]
    is_peak = (center > left) & (center >= right) & (center > 0)

    curvature = left - 2 * center + right
    safe_curvature = np.where(curvature < 0, curvature, -1.0)
    offset = np.where(curvature < 0, 0.5 * (left - right) / safe_curvature, 0.0)
    offset = np.clip(offset, -0.5, 0.5)
    peak_lag = (lags[None, :] + offset) / up
    strength = center - 0.25 * (left - right) * offset
    strength = np.where(strength > 1, 1 / np.maximum(strength, 1e-12), strength)

    in_range = (peak_lag >= min_lag * 0.98) & (peak_lag <= max_lag * 1.02)
    candidate = is_peak & in_range
    score = strength - cfg.octave_cost * np.log2(cfg.f_min * peak_lag / sample_rate)
    score = np.where(candidate, score, -np.inf)

    best = np.argmax(score, axis=1)
    rows = np.arange(n_frames)
    has_candidate = np.isfinite(score[rows, best])
    best = _prefer_subharmonic_lags(
        best, peak_lag, strength, candidate, cfg.subharmonic_ratio
    )
    best_strength = np.where(has_candidate, strength[rows, best], 0.0)
    loud = rms > cfg.silence_threshold * rms.max()
    voiced = has_candidate & (best_strength > cfg.voicing_threshold) & loud

    f0 = np.clip(sample_rate / peak_lag[rows, best], cfg.f_min, cfg.f_max)
    log_f0[voiced] = np.log(f0[voiced])
    vuv[voiced] = 1

    if cfg.median_filter and n_frames >= 3:
        filled = np.where(voiced, log_f0, 0.0)
        stacked = np.stack([filled[:-2], filled[1:-1], filled[2:]])
        interior = voiced[:-2] & voiced[1:-1] & voiced[2:]
        smoothed = log_f0.copy()
        smoothed[1:-1][interior] = np.median(stacked, axis=0)[interior]
        log_f0 = smoothed

    logger.debug(f"Pitch: {int(vuv.sum())} of {n_frames} frames voiced.")
    return PitchTrack(log_f0, vuv)


def interpolate_unvoiced(track: PitchTrack) -> PitchTrack:
    """Fills unvoiced log-F0 by linear interpolation with edge hold.

    Args:
        track: A pitch track from `estimate_f0`.

    Returns:
        PitchTrack: Finite log-F0 everywhere; voicing flags unchanged.

    Raises:
        NoVoicedFramesError: If no frame is voiced.
    """
    if not track.voiced.any():
        raise NoVoicedFramesError(
            "Cannot interpolate a pitch track without voiced frames."
        )
    return PitchTrack(interpolate_gaps(track.log_f0, track.voiced), track.vuv.copy())


def auto_voice_preset(
    waveform: Waveform, grid: FrameGrid | None = None
) -> PresetChoice:
    """Chooses the low or high preset from a wide-range first pass.

    The first pass tracks F0 over 60-600 Hz; a median voiced F0 below
    165 Hz selects the low preset, anything else the high preset. Audio
    without voiced frames falls back to the low preset with `warning` set.

    Args:
        waveform: The input audio.
        grid: The frame grid. Defaults to the standard grid of the waveform.

    Returns:
        PresetChoice: The chosen settings.
    """
    if len(waveform) == 0:
        raise ValueError("Cannot choose a voice preset for an empty waveform.")
    if grid is None:
        grid = FrameGrid.for_samples(len(waveform), sample_rate=waveform.sample_rate)
    first_pass = F0Config(f_min=AUTO_RANGE[0], f_max=AUTO_RANGE[1])
    track = estimate_f0(waveform, first_pass, grid)
    if not track.voiced.any():
        logger.warning("No voiced frames in the first pitch pass; using low preset.")
        return PresetChoice(VoicePreset.LOW, *PRESETS[VoicePreset.LOW], warning=True)

    median_f0 = float(np.exp(np.median(track.log_f0[track.voiced])))
    preset = VoicePreset.LOW if median_f0 < AUTO_SPLIT_HZ else VoicePreset.HIGH
    logger.info(f"Median F0 {median_f0:.1f} Hz; using the {preset.value} preset.")
    return PresetChoice(preset, *PRESETS[preset], median_f0=median_f0)
