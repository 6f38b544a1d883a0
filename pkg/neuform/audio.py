from __future__ import annotations

import logging
import struct
from math import gcd
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .config import VadConfig
from .errors import UnsupportedCodecError, WavFormatError
from .models import DEFAULT_SAMPLE_RATE, Waveform
from .utils import frame_count

logger = logging.getLogger(__name__)

PCM = 1
IEEE_FLOAT = 3
EXTENSIBLE = 0xFFFE

PCM16_SCALE = 32768.0
RESAMPLE_WINDOW = ("kaiser", 8.0)


def _parse_fmt(data: bytes, body: int, size: int) -> tuple[int, int, int, int, int]:
    if size < 16:
        raise WavFormatError(f"fmt chunk too short ({size} bytes)", offset=body)
    tag, channels, rate, _, block_align, bits = struct.unpack_from(
        "<HHIIHH", data, body
    )
    if tag == EXTENSIBLE:
        if size < 26:
            raise WavFormatError("Extensible fmt chunk lacks a sub-format", body)
        (tag,) = struct.unpack_from("<H", data, body + 24)
    return tag, channels, rate, block_align, bits


def read_wav(path: str | Path) -> Waveform:
    """Reads a PCM16 or IEEE-float32 WAV file as mono.

    Stereo input is averaged to mono and PCM16 is scaled by 1/32768.

    Args:
        path: Path of the WAV file.

    Returns:
        Waveform: The decoded audio at the file's sample rate.

    Raises:
        FileNotFoundError: If the file does not exist.
        WavFormatError: If the RIFF structure is malformed.
        UnsupportedCodecError: If the codec or channel count is unsupported.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"No such WAV file: '{path}'.")
    data = path.read_bytes()

    if len(data) < 12:
        raise WavFormatError("Truncated RIFF header", offset=len(data))
    if data[0:4] != b"RIFF":
        raise WavFormatError(f"Expected 'RIFF' magic; received {data[0:4]!r}", 0)
    if data[8:12] != b"WAVE":
        raise WavFormatError(f"Expected 'WAVE' form; received {data[8:12]!r}", 8)

    fmt = None
    fmt_offset = 12
    payload = None
    data_offset = 0
    position = 12
    while position + 8 <= len(data):
        chunk_id, size = struct.unpack_from("<4sI", data, position)
        body = position + 8
        if body + size > len(data):
            raise WavFormatError(
                f"Chunk {chunk_id!r} of {size} bytes extends past end of file",
                offset=position,
            )
        if chunk_id == b"fmt ":
            fmt = _parse_fmt(data, body, size)
            fmt_offset = body
        elif chunk_id == b"data":
            payload = data[body : body + size]
            data_offset = body
        position = body + size + (size & 1)

    if fmt is None:
        raise WavFormatError("Missing fmt chunk", offset=12)
    if payload is None:
        raise WavFormatError("Missing data chunk", offset=position)

    tag, channels, rate, block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedCodecError(
            f"Expected 1 or 2 channels; received {channels}", offset=fmt_offset + 2
        )
    if tag == PCM and bits == 16:
        dtype = np.dtype("<i2")
    elif tag == IEEE_FLOAT and bits == 32:
        dtype = np.dtype("<f4")
    else:
        raise UnsupportedCodecError(
            f"Unsupported codec (format tag {tag}, {bits} bits); "
            f"expected PCM16 or IEEE float32",
            offset=fmt_offset,
        )
    if rate == 0:
        raise WavFormatError("Sample rate is zero", offset=fmt_offset + 4)
    if block_align != channels * dtype.itemsize or len(payload) % block_align:
        raise WavFormatError(
            f"Data chunk of {len(payload)} bytes is not a whole number of "
            f"{channels * dtype.itemsize}-byte frames",
            offset=fmt_offset + 12,
        )

    samples = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    if tag == PCM:
        samples /= PCM16_SCALE
    elif not np.all(np.isfinite(samples)):
        raise WavFormatError("Float samples must be finite", data_offset)
    samples = samples.reshape(-1, channels).mean(axis=1)
    logger.debug(f"Read {path}: {len(samples)} samples, {rate} Hz, {channels} ch.")
    return Waveform(samples, rate)


def quantize_pcm16(samples: np.ndarray) -> np.ndarray:
    """Clamps samples to [-1, 1] and quantizes them to int16."""
    scaled = np.round(np.clip(samples, -1.0, 1.0) * PCM16_SCALE)
    return np.clip(scaled, -32768, 32767).astype(np.int16)


def write_wav(path: str | Path, waveform: Waveform):
    """Writes a waveform as mono PCM16.

    Args:
        path: Destination path; its directory must exist.
        waveform: The audio to write.
    """
    wavfile.write(str(path), waveform.sample_rate, quantize_pcm16(waveform.samples))
    logger.debug(f"Wrote {path}: {len(waveform)} samples.")


def resample(waveform: Waveform, target_rate: int) -> Waveform:
    """Resamples with a Kaiser-windowed sinc polyphase filter.

    Args:
        waveform: The input audio.
        target_rate: Output sample rate in Hz.

    Returns:
        Waveform: Audio of length `round(n * target_rate / sample_rate)`.
    """
    if int(target_rate) != target_rate or target_rate <= 0:
        raise ValueError(
            f"Target rate must be a positive integer; received {target_rate!r}."
        )
    target_rate = int(target_rate)
    source_rate = waveform.sample_rate
    if target_rate == source_rate:
        return waveform

    n_out = int(round(len(waveform) * target_rate / source_rate))
    if len(waveform) == 0:
        return Waveform(np.zeros(0), target_rate)

    divisor = gcd(target_rate, source_rate)
    up, down = target_rate // divisor, source_rate // divisor
    samples = resample_poly(waveform.samples, up, down, window=RESAMPLE_WINDOW)
    if len(samples) < n_out:
        samples = np.pad(samples, (0, n_out - len(samples)))
    return Waveform(samples[:n_out], target_rate)


def short_time_rms(samples: np.ndarray, win_length: int, hop_length: int) -> np.ndarray:
    """RMS of every full window; a signal shorter than one window is one window."""
    n_frames = frame_count(len(samples), win_length, hop_length)
    if n_frames == 0:
        return np.array([np.sqrt(np.mean(np.square(samples)))])
    frames = np.lib.stride_tricks.sliding_window_view(samples, win_length)[::hop_length]
    return np.sqrt(np.mean(np.square(frames[:n_frames]), axis=1))


def trim_silence(waveform: Waveform, cfg: VadConfig | None = None) -> Waveform:
    """Removes leading and trailing silence with an energy detector.

    Short-time RMS is measured over 20 ms windows with a 10 ms hop. Edge
    regions quieter than `energy_threshold_db` relative to the loudest window
    are removed when they last at least `min_silence_ms`; `margin_ms` of audio
    is kept next to the speech. Interior audio is never removed.

    Args:
        waveform: The input audio; must not be empty.
        cfg: Detector settings. Defaults to `VadConfig()`.

    Returns:
        Waveform: A contiguous slice of the input, empty if all silent.
    """
    cfg = cfg or VadConfig()
    n_samples = len(waveform)
    if n_samples == 0:
        raise ValueError("Cannot trim an empty waveform.")

    sample_rate = waveform.sample_rate
    win_length = max(1, int(round(0.020 * sample_rate)))
    hop_length = max(1, int(round(0.010 * sample_rate)))
    rms = short_time_rms(waveform.samples, win_length, hop_length)
    peak = rms.max()
    if peak == 0:
        logger.warning("Waveform is entirely silent; trimmed to empty.")
        return Waveform(np.zeros(0), sample_rate)

    threshold = peak * 10 ** (cfg.energy_threshold_db / 20)
    speech = np.flatnonzero(rms >= threshold)
    min_silence = int(round(cfg.min_silence_ms * sample_rate / 1000))
    margin = int(round(cfg.margin_ms * sample_rate / 1000))

    speech_start = int(speech[0]) * hop_length
    speech_end = min(n_samples, int(speech[-1]) * hop_length + win_length)
    start = max(0, speech_start - margin) if speech_start >= min_silence else 0
    trailing = n_samples - speech_end
    end = min(n_samples, speech_end + margin) if trailing >= min_silence else n_samples
    if start > 0 or end < n_samples:
        logger.debug(f"Trimmed {start} leading and {n_samples - end} trailing samples.")
    return Waveform(waveform.samples[start:end], sample_rate)


def load_audio(
    path: str | Path,
    target_rate: int = DEFAULT_SAMPLE_RATE,
    vad: VadConfig | None = None,
) -> Waveform:
    """Reads, resamples and optionally trims a WAV file.

    Args:
        path: Path of the WAV file.
        target_rate: Working sample rate in Hz.
        vad: Silence-trimming settings; None disables trimming.

    Returns:
        Waveform: The audio ready for analysis.
    """
    waveform = resample(read_wav(path), target_rate)
    if vad is not None and len(waveform):
        waveform = trim_silence(waveform, vad)
    return waveform
