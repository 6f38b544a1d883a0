from __future__ import annotations

import logging
import struct
from pathlib import Path

import librosa
import numpy as np

from .config import GriffinLimConfig
from .errors import MelFormatError
from .models import (
    DEFAULT_WIN_LENGTH,
    FrameGrid,
    MagnitudeSpectrogram,
    MelBasis,
    MelSpectrogram,
    Waveform,
)
from .spectral import MAGNITUDE_FLOOR, frame_energy, frame_signal

logger = logging.getLogger(__name__)

MEL_MAGIC = b"NFMEL1"
_MEL_HEADER = struct.Struct("<4I")

GAIN_RANGE = (0.125, 8.0)
ENERGY_FLOOR = 1e-12


def mel_to_linear(
    mel: MelSpectrogram, basis: MelBasis, floor: float = MAGNITUDE_FLOOR
) -> MagnitudeSpectrogram:
    """Approximate linear magnitudes of a log-mel spectrogram.

    Each frame is solved in the least-squares sense through the filterbank
    pseudo-inverse and projected onto non-negative values. Mel bands at the
    log floor are treated as silent.

    Args:
        mel: Log-compressed mel-spectrogram.
        basis: The filterbank that produced it.
        floor: The log floor of `mel`.

    Returns:
        MagnitudeSpectrogram: Magnitudes on the mel's frame grid.
    """
    if mel.n_mels != basis.n_mels:
        raise ValueError(
            f"Mel has {mel.n_mels} bands; basis has {basis.n_mels} filters."
        )
    linear = np.exp(mel.values)
    linear[mel.values <= np.log(floor) + 1e-9] = 0.0
    magnitudes = np.maximum(linear @ np.linalg.pinv(basis.weights).T, 0.0)
    return MagnitudeSpectrogram(magnitudes, basis.n_fft, mel.grid)


def griffin_lim(
    magnitude: MagnitudeSpectrogram,
    cfg: GriffinLimConfig | None = None,
    normalize: bool = True,
) -> Waveform:
    """Reconstructs a waveform from magnitudes by iterative phase retrieval.

    The STFT uses the analysis framing (periodic Hann, no centering), so the
    output spans `(n_frames - 1) * hop + win` samples.

    Args:
        magnitude: The target magnitudes.
        cfg: Iteration count and momentum. Defaults to `GriffinLimConfig()`.
        normalize: Scale the output to `cfg.peak`.

    Returns:
        Waveform: The reconstruction.
    """
    cfg = cfg or GriffinLimConfig()
    grid = magnitude.grid
    if magnitude.n_fft != grid.win_length:
        raise ValueError(
            f"Magnitudes use n_fft {magnitude.n_fft}; "
            f"grid window is {grid.win_length}."
        )
    if magnitude.n_frames == 0:
        return Waveform(np.zeros(0), grid.sample_rate)
    if not np.any(magnitude.values):
        return Waveform(np.zeros(grid.n_samples), grid.sample_rate)

    samples = librosa.griffinlim(
        magnitude.values.T,
        n_iter=cfg.n_iters,
        hop_length=grid.hop_length,
        win_length=grid.win_length,
        window="hann",
        center=False,
        length=grid.n_samples,
        momentum=cfg.momentum,
        init=None,
    ).astype(np.float64)
    peak = np.max(np.abs(samples))
    if normalize and peak > 0:
        samples *= cfg.peak / peak
    return Waveform(samples, grid.sample_rate)


def frame_gains(
    extracted: np.ndarray, target: np.ndarray, gain_range=GAIN_RANGE
) -> np.ndarray:
    """Per-frame amplitude gains `sqrt(target / extracted)`, clamped."""
    extracted = np.asarray(extracted, dtype=np.float64)
    target = np.maximum(np.asarray(target, dtype=np.float64), 0.0)
    gains = np.sqrt(target / np.maximum(extracted, ENERGY_FLOOR))
    return np.clip(gains, *gain_range)


def match_energy(
    waveform: Waveform, target_energy: np.ndarray, grid: FrameGrid
) -> Waveform:
    """Applies time-varying gain so frame energies approach a target.

    Frame gains are linearly interpolated between frame centers and held
    beyond the first and last center.

    Args:
        waveform: The synthesized audio.
        target_energy: Linear frame energy per grid frame.
        grid: The frame grid of the target.

    Returns:
        Waveform: The gain-corrected audio.
    """
    target_energy = np.asarray(target_energy, dtype=np.float64)
    if len(target_energy) != grid.n_frames:
        raise ValueError(
            f"Expected {grid.n_frames} target energies; "
            f"received {len(target_energy)}."
        )
    if grid.n_frames == 0 or len(waveform) == 0:
        return waveform
    samples = waveform.samples
    if len(samples) < grid.n_samples:
        samples = np.pad(samples, (0, grid.n_samples - len(samples)))
    padded = Waveform(samples, waveform.sample_rate)
    extracted = frame_energy(frame_signal(padded, grid))
    gains = frame_gains(extracted, target_energy)
    envelope = np.interp(np.arange(len(waveform)), grid.frame_centers(), gains)
    clamped = int(np.sum((gains == GAIN_RANGE[0]) | (gains == GAIN_RANGE[1])))
    if clamped:
        logger.debug(f"Clamped the gain of {clamped} of {len(gains)} frames.")
    return Waveform(waveform.samples * envelope, waveform.sample_rate)


def export_mel(path: str | Path, mel: MelSpectrogram) -> Path:
    """Writes a mel-spectrogram in the NFMEL1 format.

    The file holds the magic bytes, four u32 little-endian fields
    (n_frames, n_mels, sample_rate, hop_length) and the values as
    frame-major float32 little-endian.

    Args:
        path: Destination path.
        mel: The mel-spectrogram.

    Returns:
        Path: The written path.
    """
    path = Path(path)
    grid = mel.grid
    header = _MEL_HEADER.pack(
        mel.n_frames, mel.n_mels, grid.sample_rate, grid.hop_length
    )
    payload = np.ascontiguousarray(mel.values, dtype="<f4").tobytes()
    path.write_bytes(MEL_MAGIC + header + payload)
    return path


def import_mel(
    path: str | Path, n_mels: int | None = None, win_length: int = DEFAULT_WIN_LENGTH
) -> MelSpectrogram:
    """Reads an NFMEL1 file.

    Args:
        path: Path of the file.
        n_mels: Expected band count, if known.
        win_length: Window length of the grid; the format stores only the hop.

    Returns:
        MelSpectrogram: The mel values widened to float64.

    Raises:
        MelFormatError: On bad magic, a short header or a payload whose size
            differs from the header's.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"No such mel file: '{path}'.")
    data = path.read_bytes()
    if not data.startswith(MEL_MAGIC):
        raise MelFormatError(f"{path} is not an NFMEL1 file (bad magic).")
    start = len(MEL_MAGIC) + _MEL_HEADER.size
    if len(data) < start:
        raise MelFormatError(f"{path} is truncated inside the header.")
    n_frames, bands, sample_rate, hop_length = _MEL_HEADER.unpack_from(
        data, len(MEL_MAGIC)
    )
    if n_mels is not None and bands != n_mels:
        raise MelFormatError(f"{path} holds {bands} mel bands; expected {n_mels}.")
    expected = 4 * n_frames * bands
    if len(data) - start < expected:
        raise MelFormatError(
            f"{path} is truncated: header declares {expected} payload bytes; "
            f"found {len(data) - start}."
        )
    if len(data) - start > expected:
        raise MelFormatError(
            f"{path} has {len(data) - start - expected} bytes after the "
            f"{expected} payload bytes its header declares."
        )
    if expected:
        values = np.frombuffer(data[start : start + expected], dtype="<f4")
    else:
        values = np.zeros(0, dtype="<f4")
    grid = FrameGrid(max(win_length, hop_length), hop_length, sample_rate, n_frames)
    return MelSpectrogram(values.reshape(n_frames, bands).astype(np.float64), grid)
