from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from scipy.linalg import LinAlgError, companion, solve_toeplitz
from scipy.signal import get_window

from .audio import resample
from .config import LpcFrameConfig
from .errors import (
    ConfigError,
    DegenerateFrameError,
    FormantMissingError,
    RootFindingError,
)
from .models import FormantCandidate, FormantTracks, FrameGrid, Waveform
from .utils import interpolate_gaps

logger = logging.getLogger(__name__)

N_TRACKED = 4


def pre_emphasis(
    frame: np.ndarray, sample_rate: int, from_hz: float = 50.0
) -> np.ndarray:
    """First-order pre-emphasis `y[n] = x[n] - a x[n-1]`, `y[0] = x[0] (1 - a)`.

    Args:
        frame: Samples along the last axis.
        sample_rate: Sample rate in Hz.
        from_hz: Corner frequency; `a = exp(-2 pi from_hz / sample_rate)`.

    Returns:
        np.ndarray: The filtered samples.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[-1] == 0:
        raise ValueError("Cannot pre-emphasize an empty frame.")
    a = np.exp(-2 * np.pi * from_hz / sample_rate)
    emphasized = np.empty_like(frame)
    emphasized[..., 0] = frame[..., 0] * (1 - a)
    emphasized[..., 1:] = frame[..., 1:] - a * frame[..., :-1]
    return emphasized


def burg_reflection(frame: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Burg recursion returning both predictor and reflection coefficients.

    Args:
        frame: Windowed samples; longer than `order`.
        order: Predictor order.

    Returns:
        A tuple `(a, k)` of the predictor `a[1..order]` of
        `A(z) = 1 + sum a_k z^-k` and the reflection coefficients.

    Raises:
        DegenerateFrameError: If the frame carries no energy.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if len(frame) <= order:
        raise ValueError(
            f"Frame of {len(frame)} samples is too short for order {order}."
        )
    if not np.any(frame):
        raise DegenerateFrameError("All-zero LPC frame.")

    a = np.zeros(order + 1)
    a[0] = 1.0
    reflection = np.zeros(order)
    forward = frame[1:].copy()
    backward = frame[:-1].copy()
    for k in range(1, order + 1):
        denominator = np.dot(forward, forward) + np.dot(backward, backward)
        if denominator <= np.finfo(float).tiny:
            break
        rc = -2.0 * np.dot(forward, backward) / denominator
        reflection[k - 1] = rc
        previous = a.copy()
        a[1 : k + 1] = previous[1 : k + 1] + rc * previous[k - 1 :: -1]
        new_forward = forward + rc * backward
        new_backward = backward + rc * forward
        forward, backward = new_forward[1:], new_backward[:-1]
    return a[1:], reflection


def burg_lpc(frame: np.ndarray, order: int = 10) -> np.ndarray:
    """LPC coefficients by the Burg method.

    Args:
        frame: Windowed, pre-emphasized samples.
        order: Predictor order.

    Returns:
        np.ndarray: `a[1..order]` of the minimum-phase `A(z)`.
    """
    return burg_reflection(frame, order)[0]


def levinson_lpc(frame: np.ndarray, order: int = 10) -> np.ndarray:
    """LPC coefficients by the autocorrelation method (Levinson-Durbin).

    Args:
        frame: Windowed, pre-emphasized samples.
        order: Predictor order.

    Returns:
        np.ndarray: `a[1..order]` of `A(z) = 1 + sum a_k z^-k`.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if len(frame) <= order:
        raise ValueError(
            f"Frame of {len(frame)} samples is too short for order {order}."
        )
    n = len(frame)
    r = np.array([np.dot(frame[: n - lag], frame[lag:]) for lag in range(order + 1)])
    if r[0] <= 0:
        raise DegenerateFrameError("All-zero LPC frame.")
    return solve_toeplitz(r[:order], -r[1 : order + 1])


def lpc_roots(coefficients: np.ndarray, frame_index: int | None = None) -> np.ndarray:
    """Roots of `A(z)` from the eigenvalues of its companion matrix.

    Args:
        coefficients: `a[1..order]`.
        frame_index: Frame index reported on failure.

    Returns:
        np.ndarray: The `order` complex roots.

    Raises:
        RootFindingError: If the eigenvalue iteration does not converge.
    """
    coefficients = np.asarray(coefficients, dtype=np.float64)
    if coefficients.ndim != 1 or len(coefficients) < 1:
        raise ValueError("Expected at least one LPC coefficient.")
    matrix = companion(np.concatenate([[1.0], coefficients]))
    try:
        roots = np.linalg.eigvals(matrix)
    except LinAlgError as exc:
        raise RootFindingError(f"Eigenvalues did not converge: {exc}", frame_index)
    if not np.all(np.isfinite(roots)):
        raise RootFindingError("Non-finite polynomial roots", frame_index)
    return roots


def formant_to_pole(frequency: float, bandwidth: float, sample_rate: int) -> complex:
    """Pole `exp(-pi B / sr) exp(2 pi i F / sr)` of a resonance."""
    radius = np.exp(-np.pi * bandwidth / sample_rate)
    return complex(radius * np.exp(2j * np.pi * frequency / sample_rate))


def roots_to_formants(
    roots: np.ndarray,
    sample_rate: int,
    ceiling: float,
    min_frequency: float = 50.0,
    max_bandwidth: float = 700.0,
) -> list[FormantCandidate]:
    """Converts upper-half-plane roots to formant candidates.

    For a root `r`, `F = angle(r) sr / 2 pi` and `B = -ln|r| sr / pi`.
    Candidates with `min_frequency < F < ceiling` and `B < max_bandwidth`
    are kept.

    Args:
        roots: Complex roots of `A(z)`.
        sample_rate: Sample rate of the analyzed signal in Hz.
        ceiling: Formant ceiling in Hz.
        min_frequency: Lowest admitted frequency in Hz.
        max_bandwidth: Widest admitted bandwidth in Hz.

    Returns:
        list[FormantCandidate]: Candidates sorted by frequency.
    """
    roots = np.asarray(roots, dtype=np.complex128)
    upper = roots[(roots.imag > 0) & (np.abs(roots) > 0)]
    frequencies = np.angle(upper) * sample_rate / (2 * np.pi)
    bandwidths = -np.log(np.abs(upper)) * sample_rate / np.pi
    keep = (
        (frequencies > min_frequency)
        & (frequencies < ceiling)
        & (bandwidths < max_bandwidth)
    )
    order = np.argsort(frequencies[keep])
    return [
        FormantCandidate(float(f), float(b))
        for f, b in zip(frequencies[keep][order], bandwidths[keep][order])
    ]


def track_formants(
    candidates: Sequence[Sequence[FormantCandidate] | None],
    vuv: np.ndarray,
    grid: FrameGrid,
) -> FormantTracks:
    """Assembles F1-F4 trajectories from per-frame candidates.

    The lowest four candidates of each frame are F1-F4. A formant is missing
    where a frame has fewer candidates or is degenerate (None); missing
    values are filled by linear interpolation over time with edge hold, and
    each frame is then sorted so that F1 <= F2 <= F3 <= F4. Gaps in voiced
    frames are bridged between voiced measurements only; unvoiced gaps use
    every measurement.

    Args:
        candidates: Per-frame candidate lists, None for degenerate frames.
        vuv: Voicing flags aligned with the grid.
        grid: The frame grid.

    Returns:
        FormantTracks: Filled trajectories with the missing mask.

    Raises:
        FormantMissingError: If a formant is missing in every frame.
    """
    n_frames = grid.n_frames
    if len(candidates) != n_frames or len(vuv) != n_frames:
        raise ValueError(
            f"Expected {n_frames} frames of candidates and voicing flags; "
            f"received {len(candidates)} and {len(vuv)}."
        )
    values = np.full((n_frames, N_TRACKED), np.nan)
    for t, frame_candidates in enumerate(candidates):
        if frame_candidates is None:
            continue
        lowest = [c.frequency for c in frame_candidates[:N_TRACKED]]
        values[t, : len(lowest)] = lowest

    missing = np.isnan(values)
    voiced = np.asarray(vuv) > 0
    for i in range(N_TRACKED):
        found = ~missing[:, i]
        if not found.any():
            raise FormantMissingError(i + 1)
        filled = interpolate_gaps(values[:, i], found)
        voiced_found = found & voiced
        voiced_gaps = missing[:, i] & voiced
        if voiced_found.any() and voiced_gaps.any():
            bridged = interpolate_gaps(values[:, i], voiced_found)
            filled[voiced_gaps] = bridged[voiced_gaps]
        values[:, i] = filled
    if missing.any():
        logger.debug(f"Interpolated {int(missing.sum())} missing formant values.")
    return FormantTracks(np.sort(values, axis=1), missing)


def lpc_window(n_samples: int, shape: str = "gaussian") -> np.ndarray:
    """The LPC analysis window; the gaussian reaches zero at both ends.

    Args:
        n_samples: Physical window length.
        shape: `gaussian` or `hann`.

    Returns:
        np.ndarray: Window weights with a peak of one.
    """
    if shape == "hann":
        return get_window("hann", n_samples, fftbins=False)
    if shape != "gaussian":
        raise ConfigError(f"Unknown LPC window shape '{shape}'.")
    edge = np.exp(-12.0)
    position = np.arange(1, n_samples + 1) - 0.5 * (n_samples + 1)
    bell = np.exp(-48.0 * position**2 / (n_samples + 1) ** 2)
    return (bell - edge) / (1.0 - edge)


def lpc_window_length(sample_rate: float, cfg: LpcFrameConfig) -> int:
    """Physical LPC window length in samples at `sample_rate`."""
    span = 2.0 if cfg.window_shape == "gaussian" else 1.0
    return max(cfg.order + 1, int(round(span * cfg.window_ms / 1000 * sample_rate)))


def frame_candidates(
    frames: np.ndarray, sample_rate: int, cfg: LpcFrameConfig
) -> list[list[FormantCandidate] | None]:
    """LPC formant candidates of every pre-emphasized frame."""
    estimator = burg_lpc if cfg.method == "burg" else levinson_lpc
    window = lpc_window(frames.shape[1], cfg.window_shape)
    candidates: list[list[FormantCandidate] | None] = []
    for index, frame in enumerate(frames):
        try:
            coefficients = estimator(frame * window, cfg.order)
        except DegenerateFrameError:
            candidates.append(None)
            continue
        roots = lpc_roots(coefficients, frame_index=index)
        candidates.append(
            roots_to_formants(
                roots,
                sample_rate,
                cfg.ceiling,
                cfg.min_frequency,
                cfg.max_bandwidth,
            )[: cfg.max_formants]
        )
    return candidates


def analyze_formants(
    waveform: Waveform,
    grid: FrameGrid,
    cfg: LpcFrameConfig | None = None,
    vuv: np.ndarray | None = None,
) -> FormantTracks:
    """Formant trajectories on the shared frame grid.

    The signal is resampled to twice the ceiling (when enabled) and
    pre-emphasized; an analysis window of effective duration `window_ms` is
    centered on every frame center. The default gaussian window physically
    spans twice that.

    Args:
        waveform: The input audio at the grid's sample rate.
        grid: The frame grid.
        cfg: LPC settings. Defaults to `LpcFrameConfig()`.
        vuv: Voicing flags; defaults to all voiced.

    Returns:
        FormantTracks: Filled F1-F4 trajectories.
    """
    cfg = cfg or LpcFrameConfig()
    if cfg.ceiling > waveform.sample_rate / 2:
        raise ConfigError(
            f"Formant ceiling {cfg.ceiling} Hz exceeds the Nyquist frequency "
            f"of {waveform.sample_rate} Hz audio."
        )
    if vuv is None:
        vuv = np.ones(grid.n_frames, dtype=np.int8)

    analyzed = waveform
    if cfg.resample_to_ceiling:
        analyzed = resample(waveform, int(round(2 * cfg.ceiling)))
    sample_rate = analyzed.sample_rate
    if len(analyzed) == 0:
        return track_formants([None] * grid.n_frames, vuv, grid)

    signal = pre_emphasis(analyzed.samples, sample_rate, cfg.pre_emphasis_from)
    window_length = lpc_window_length(sample_rate, cfg)
    half = window_length // 2
    centers = np.round(grid.frame_centers() / grid.sample_rate * sample_rate)
    padded = np.pad(signal, (half, window_length))
    index = centers.astype(int)[:, None] + np.arange(window_length)[None, :]
    frames = padded[index]

    return track_formants(frame_candidates(frames, sample_rate, cfg), vuv, grid)
