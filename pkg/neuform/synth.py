from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .audio import write_wav
from .manifest import Manifest, ManifestEntry, assign_splits, write_manifest
from .models import DEFAULT_SAMPLE_RATE, Waveform

logger = logging.getLogger(__name__)

DEFAULT_FORMANTS = (600.0, 1200.0, 2500.0, 3400.0)
DEFAULT_BANDWIDTHS = (80.0, 90.0, 120.0, 150.0)

VOWELS: dict[str, tuple[float, float, float, float]] = {
    "a": (730.0, 1090.0, 2440.0, 3400.0),
    "e": (530.0, 1840.0, 2480.0, 3500.0),
    "i": (300.0, 2200.0, 2950.0, 3750.0),
    "o": (570.0, 840.0, 2410.0, 3300.0),
    "u": (320.0, 870.0, 2240.0, 3300.0),
}


def resonator(
    signal: np.ndarray, frequency: float, bandwidth: float, sample_rate: int
) -> np.ndarray:
    """Second-order resonator with unit gain at DC.

    Args:
        signal: Input samples.
        frequency: Resonance frequency in Hz.
        bandwidth: Resonance bandwidth in Hz.
        sample_rate: Sample rate in Hz.

    Returns:
        np.ndarray: The filtered samples.
    """
    c = -np.exp(-2 * np.pi * bandwidth / sample_rate)
    b = 2 * np.exp(-np.pi * bandwidth / sample_rate) * np.cos(
        2 * np.pi * frequency / sample_rate
    )
    a = 1 - b - c
    return lfilter([a], [1.0, -b, -c], signal)


def pulse_train(
    f0: float,
    duration: float,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    f0_end: float | None = None,
) -> np.ndarray:
    """Unit impulses at the glottal epochs of a constant or gliding F0.

    Args:
        f0: Starting F0 in Hz.
        duration: Length in seconds.
        sample_rate: Sample rate in Hz.
        f0_end: F0 at the end of a linear glide; None keeps F0 constant.

    Returns:
        np.ndarray: Impulse train with the first pulse at sample 0.
    """
    if f0 <= 0 or (f0_end is not None and f0_end <= 0):
        raise ValueError("F0 must be positive.")
    n_samples = int(round(duration * sample_rate))
    n = np.arange(n_samples)
    if f0_end is None or n_samples == 0:
        phase = n * f0 / sample_rate
    else:
        slope = (f0_end - f0) / n_samples
        phase = (f0 * n + 0.5 * slope * n**2) / sample_rate
    cycle = np.floor(phase + 1e-9)
    pulses = np.zeros(n_samples)
    if n_samples:
        pulses[0] = 1.0
        pulses[1:][np.diff(cycle) > 0] = 1.0
    return pulses


def sine(
    frequency: float,
    duration: float,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    amplitude: float = 0.5,
) -> Waveform:
    """A pure tone."""
    n = np.arange(int(round(duration * sample_rate)))
    samples = amplitude * np.sin(2 * np.pi * frequency * n / sample_rate)
    return Waveform(samples, sample_rate)


def synth_vowel(
    formants: Sequence[float] = DEFAULT_FORMANTS,
    bandwidths: Sequence[float] = DEFAULT_BANDWIDTHS,
    f0: float = 120.0,
    duration: float = 1.0,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    f0_end: float | None = None,
    amplitude: float = 0.5,
    noise: float = 0.0,
    seed: int | None = None,
) -> Waveform:
    """A source-filter vowel: an impulse train through cascaded resonators.

    Args:
        formants: Resonance frequencies in Hz.
        bandwidths: Resonance bandwidths in Hz.
        f0: Starting F0 in Hz.
        duration: Length in seconds.
        sample_rate: Sample rate in Hz.
        f0_end: F0 at the end of a linear glide.
        amplitude: Output peak level.
        noise: Level of white aspiration noise relative to the source.
        seed: Seed of the aspiration noise.

    Returns:
        Waveform: The peak-normalized vowel.
    """
    if len(formants) != len(bandwidths):
        raise ValueError(
            f"Expected one bandwidth per formant; received {len(formants)} "
            f"formants and {len(bandwidths)} bandwidths."
        )
    source = pulse_train(f0, duration, sample_rate, f0_end)
    if noise:
        rng = np.random.default_rng(seed)
        source = source + noise * rng.standard_normal(len(source))
    signal = source
    for frequency, bandwidth in zip(formants, bandwidths):
        signal = resonator(signal, frequency, bandwidth, sample_rate)
    peak = np.max(np.abs(signal)) if len(signal) else 0.0
    if peak > 0:
        signal = signal * (amplitude / peak)
    return Waveform(signal, sample_rate)


def ar_process(
    coefficients: Sequence[float], n_samples: int, seed: int | None = None
) -> np.ndarray:
    """White noise through the all-pole filter `1 / A(z)`, `A(z) = 1 + sum a z^-k`."""
    noise = np.random.default_rng(seed).standard_normal(n_samples)
    return lfilter([1.0], np.concatenate([[1.0], coefficients]), noise)


def make_corpus(
    n_utterances: int,
    out_dir: str | Path,
    seed: int = 0,
    n_speakers: int | None = None,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
) -> Manifest:
    """Writes a corpus of synthetic vowels and its speaker-split manifest.

    Every synthetic speaker has a base F0 between 90 and 220 Hz and a vocal
    tract scale between 0.9 and 1.2 that grows with F0. Every utterance is a
    random vowel with a random F0 glide and duration.

    Args:
        n_utterances: Number of utterances.
        out_dir: Output directory; WAVs go to `out_dir/wavs`.
        seed: Seed of every random choice.
        n_speakers: Number of speakers. Defaults to one per 10 utterances,
            at least 3.
        sample_rate: Sample rate in Hz.
        ratios: Train/val/test ratios of whole speakers.

    Returns:
        Manifest: The written manifest (`out_dir/manifest.csv`).
    """
    if n_utterances <= 0:
        raise ValueError(f"Expected a positive corpus size; received {n_utterances}.")
    out_dir = Path(out_dir)
    wav_dir = out_dir / "wavs"
    wav_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n_speakers = n_speakers or max(3, n_utterances // 10)

    base_f0 = rng.uniform(90.0, 220.0, n_speakers)
    tract_scale = 0.9 + 0.3 * (base_f0 - 90.0) / 130.0
    vowel_names = sorted(VOWELS)

    speakers: dict[str, str] = {}
    entries = []
    for index in range(n_utterances):
        speaker = index % n_speakers
        speaker_id = f"spk{speaker:03d}"
        utterance_id = f"{speaker_id}_u{index:04d}"
        vowel = vowel_names[rng.integers(len(vowel_names))]
        formants = np.array(VOWELS[vowel]) * tract_scale[speaker]
        formants *= rng.uniform(0.95, 1.05, len(formants))
        f0 = base_f0[speaker] * rng.uniform(0.9, 1.1)
        waveform = synth_vowel(
            formants=np.sort(formants),
            f0=f0,
            f0_end=f0 * rng.uniform(0.85, 1.15),
            duration=rng.uniform(0.6, 1.2),
            sample_rate=sample_rate,
            amplitude=rng.uniform(0.3, 0.8),
        )
        path = wav_dir / f"{utterance_id}.wav"
        write_wav(path, waveform)
        speakers[utterance_id] = speaker_id
        entries.append((utterance_id, path, speaker_id))

    splits = assign_splits(speakers, ratios=ratios, seed=seed)
    manifest = Manifest(
        [
            ManifestEntry(utterance_id, path, splits[utterance_id], speaker=speaker_id)
            for utterance_id, path, speaker_id in entries
        ],
        root=out_dir,
    )
    write_manifest(manifest, out_dir / "manifest.csv")
    logger.info(
        f"Wrote {n_utterances} utterances of {n_speakers} speakers to {out_dir}."
    )
    return manifest
