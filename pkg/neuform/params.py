from __future__ import annotations

import csv
import json
import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .audio import resample
from .config import AnalysisConfig
from .errors import NoVoicedFramesError
from .formant import analyze_formants
from .models import (
    CONTINUOUS,
    PARAMETER_NAMES,
    PARAMETERS,
    FrameGrid,
    MelSpectrogram,
    NormStats,
    Parameter,
    SpeechParams,
    VoicePreset,
    Waveform,
)
from .pitch import (
    PresetChoice,
    auto_voice_preset,
    estimate_f0,
    interpolate_unvoiced,
    preset_config,
)
from .spectral import (
    frame_energy,
    frame_signal,
    make_grid,
    mel_basis_for,
    mel_spectrogram,
    spectral_centroid,
    spectral_tilt,
    stft_magnitude,
)
from .utils import format_float

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-8
CSV_COLUMNS = ("frame", "time_s", *PARAMETER_NAMES)
_CONTINUOUS_INDEX = np.array([p.index for p in CONTINUOUS])


class Analysis(NamedTuple):
    """Result of `analyze`.

    Attributes:
        params: The nine interpolated parameter trajectories.
        mel: The reference mel-spectrogram on the same grid.
        preset: The extractor settings that were used.
    """

    params: SpeechParams
    mel: MelSpectrogram
    preset: PresetChoice


def resolve_preset(
    waveform: Waveform, config: AnalysisConfig, grid: FrameGrid | None = None
) -> PresetChoice:
    """Extractor settings for a waveform after applying config overrides."""
    if config.voice is VoicePreset.AUTO:
        choice = auto_voice_preset(waveform, grid)
    else:
        choice = preset_config(config.voice)
    return PresetChoice(
        choice.preset,
        config.f0 or choice.f0,
        config.formant_ceiling or choice.formant_ceiling,
        choice.warning,
        choice.median_f0,
    )


def analyze(
    waveform: Waveform,
    config: AnalysisConfig | None = None,
    preset: PresetChoice | None = None,
) -> Analysis:
    """Extracts the nine speech parameters and the reference mel-spectrogram.

    All trajectories share one frame grid: voicing and log-F0 from the pitch
    tracker, F1-F4 from Burg LPC, spectral tilt and centroid from the STFT
    magnitudes, and energy from the unwindowed frames.

    Args:
        waveform: Mono audio; resampled to the configured rate if needed.
        config: Analysis settings. Defaults to `AnalysisConfig()`.
        preset: Fixed extractor settings that bypass the voice preset.

    Returns:
        Analysis: The parameters, mel-spectrogram and extractor settings.

    Raises:
        NoVoicedFramesError: If the audio is too short or has no voiced frame.
        FormantMissingError: If a formant is missing in every frame.
    """
    config = config or AnalysisConfig()
    frame = config.frame
    if waveform.sample_rate != frame.sample_rate:
        logger.debug(f"Resampling {waveform.sample_rate} Hz to {frame.sample_rate} Hz.")
        waveform = resample(waveform, frame.sample_rate)
    grid = make_grid(waveform, frame)
    if grid.n_frames == 0:
        raise NoVoicedFramesError(
            f"Waveform of {len(waveform)} samples is shorter than one "
            f"{frame.win_length}-sample analysis window."
        )

    preset = preset or resolve_preset(waveform, config, grid)
    track = interpolate_unvoiced(estimate_f0(waveform, preset.f0, grid))
    lpc = config.lpc.model_copy(update={"ceiling": preset.formant_ceiling})
    formants = analyze_formants(waveform, grid, lpc, track.vuv)

    frames = frame_signal(waveform, grid)
    spec = stft_magnitude(frames, grid)
    mel = mel_spectrogram(spec, mel_basis_for(frame, config.mel), config.mel.floor)
    sample_rate = frame.sample_rate
    params = SpeechParams.from_columns(
        {
            Parameter.VUV: track.vuv,
            Parameter.LOG_F0: track.log_f0,
            Parameter.F1: formants.f1,
            Parameter.F2: formants.f2,
            Parameter.F3: formants.f3,
            Parameter.F4: formants.f4,
            Parameter.TILT: spectral_tilt(spec.values, sample_rate, config.tilt_scale),
            Parameter.CENTROID: spectral_centroid(spec.values, sample_rate),
            Parameter.ENERGY: frame_energy(frames),
        },
        grid,
    )
    return Analysis(params, mel, preset)


def compute_norm_stats(
    params_collection: Iterable[SpeechParams],
    mels: Iterable[MelSpectrogram] | None = None,
) -> NormStats:
    """Pooled mean and population standard deviation over all frames.

    Args:
        params_collection: Parameters of the training utterances.
        mels: Optional mel-spectrograms of the same utterances.

    Returns:
        NormStats: Statistics with standard deviations floored at 1e-8.
    """
    rows = [p.values[:, _CONTINUOUS_INDEX] for p in params_collection]
    if not rows or sum(len(r) for r in rows) == 0:
        raise ValueError("Cannot compute normalization stats of zero frames.")
    pooled = np.concatenate(rows)
    mean = pooled.mean(axis=0)
    std = np.maximum(pooled.std(axis=0), STD_FLOOR)

    mel_mean = mel_std = None
    if mels is not None:
        mel_rows = [m.values for m in mels]
        if mel_rows and sum(len(m) for m in mel_rows):
            pooled_mel = np.concatenate(mel_rows)
            mel_mean = pooled_mel.mean(axis=0)
            mel_std = np.maximum(pooled_mel.std(axis=0), STD_FLOOR)
    return NormStats(mean, std, mel_mean, mel_std)


def normalize(params: SpeechParams, stats: NormStats) -> np.ndarray:
    """Z-scores the continuous parameters; the voicing flag passes through.

    Args:
        params: The parameters.
        stats: Normalization statistics.

    Returns:
        np.ndarray: Rows of shape (n_frames, 9) in `Parameter` order.
    """
    z = params.values.copy()
    z[:, _CONTINUOUS_INDEX] = (z[:, _CONTINUOUS_INDEX] - stats.mean) / stats.std
    return z


def denormalize(
    z: np.ndarray, stats: NormStats, grid: FrameGrid | None = None
) -> SpeechParams:
    """Inverse of `normalize`."""
    values = np.array(z, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != len(PARAMETERS):
        raise ValueError(
            f"Expected rows of shape (n, {len(PARAMETERS)}); received {values.shape}."
        )
    values[:, _CONTINUOUS_INDEX] = values[:, _CONTINUOUS_INDEX] * stats.std + stats.mean
    return SpeechParams(values, grid or FrameGrid(n_frames=len(values)))


def _require_mel_stats(stats: NormStats):
    if not stats.has_mel:
        raise ValueError("Normalization stats carry no mel statistics.")


def normalize_mel(mel: MelSpectrogram, stats: NormStats) -> np.ndarray:
    """Z-scores every mel band."""
    _require_mel_stats(stats)
    return (mel.values - stats.mel_mean) / stats.mel_std


def denormalize_mel(
    z: np.ndarray, stats: NormStats, grid: FrameGrid | None = None
) -> MelSpectrogram:
    """Inverse of `normalize_mel`."""
    _require_mel_stats(stats)
    values = np.asarray(z, dtype=np.float64) * stats.mel_std + stats.mel_mean
    return MelSpectrogram(values, grid or FrameGrid(n_frames=len(values)))


@dataclass(frozen=True)
class ManipulationSpec:
    """Constant per-parameter manipulations.

    Attributes:
        factors: Multiplicative factor of any of f1-f4, tilt, centroid and
            energy.
        log_f0_shift: Additive shift of log-F0; `ln(a)` scales F0 by `a`.
    """

    factors: Mapping[Parameter, float] = field(default_factory=dict)
    log_f0_shift: float | None = None

    def __post_init__(self):
        factors = {Parameter.parse(p): float(f) for p, f in self.factors.items()}
        for parameter, factor in factors.items():
            if parameter is Parameter.VUV:
                raise ValueError("The voicing flag cannot be manipulated.")
            if parameter is Parameter.LOG_F0:
                raise ValueError("Manipulate log-F0 with log_f0_shift, not a factor.")
            if not np.isfinite(factor) or factor <= 0:
                raise ValueError(
                    f"Factor of {parameter.value} must be positive; received {factor}."
                )
        if self.log_f0_shift is not None and not np.isfinite(self.log_f0_shift):
            raise ValueError("The log-F0 shift must be finite.")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def scale(cls, parameter: Parameter | str, factor: float) -> ManipulationSpec:
        """Scales one parameter by `factor`; log-F0 is shifted by `ln(factor)`.

        Args:
            parameter: The parameter to manipulate.
            factor: A positive factor.

        Returns:
            ManipulationSpec: The single-parameter spec.
        """
        parameter = Parameter.parse(parameter)
        if parameter is Parameter.LOG_F0:
            if not factor > 0:
                raise ValueError(f"F0 factor must be positive; received {factor}.")
            return cls(log_f0_shift=float(np.log(factor)))
        return cls({parameter: factor})

    @classmethod
    def from_flags(
        cls, scales: Sequence[str] = (), scale_f0: float | None = None
    ) -> ManipulationSpec:
        """Parses command-line flags such as `f1=1.2`.

        Args:
            scales: `name=factor` items; `f0` (or `log_f0`) maps to a shift.
            scale_f0: F0 factor, mapped to the shift `ln(scale_f0)`.

        Returns:
            ManipulationSpec: The parsed spec.
        """
        factors: dict[Parameter, float] = {}
        shift = None
        if scale_f0 is not None:
            shift = cls.scale(Parameter.LOG_F0, scale_f0).log_f0_shift
        for item in scales:
            name, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"Expected name=factor; received '{item}'.")
            try:
                factor = float(value)
            except ValueError:
                raise ValueError(f"Factor in '{item}' is not a number.")
            key = "log_f0" if name.strip().lower() == "f0" else name
            parameter = Parameter.parse(key)
            if parameter is Parameter.LOG_F0:
                if shift is not None:
                    raise ValueError("F0 is manipulated more than once.")
                shift = cls.scale(parameter, factor).log_f0_shift
                continue
            if parameter in factors:
                raise ValueError(f"{parameter.value} is manipulated more than once.")
            factors[parameter] = factor
        return cls(factors, shift)

    @property
    def is_empty(self) -> bool:
        return not self.factors and self.log_f0_shift is None

    @property
    def targets(self) -> tuple[Parameter, ...]:
        """The manipulated parameters, in column order."""
        shifted = (Parameter.LOG_F0,) if self.log_f0_shift is not None else ()
        return tuple(p for p in PARAMETERS if p in self.factors or p in shifted)


def manipulate(params: SpeechParams, spec: ManipulationSpec) -> SpeechParams:
    """Applies constant manipulations to parameter trajectories.

    Linear-scale parameters are multiplied by their factor and log-F0 is
    shifted additively; every other column, including voicing, is copied
    bitwise.

    Args:
        params: Interpolated parameters.
        spec: The manipulations.

    Returns:
        SpeechParams: The manipulated parameters.
    """
    values = params.values.copy()
    for parameter, factor in spec.factors.items():
        values[:, parameter.index] *= factor
    if spec.log_f0_shift is not None:
        values[:, Parameter.LOG_F0.index] += spec.log_f0_shift
    return SpeechParams(values, params.grid)


def write_params_csv(params: SpeechParams, path: str | Path):
    """Writes one row per frame with 9 significant digits.

    Args:
        params: The parameters.
        path: Destination CSV path.
    """
    times = params.grid.frame_times()
    with Path(path).open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for index, (time, row) in enumerate(zip(times, params.values)):
            vuv = str(int(row[0]))
            floats = map(format_float, row[1:])
            writer.writerow([index, format_float(time), vuv, *floats])


def read_params_csv(path: str | Path, grid: FrameGrid | None = None) -> SpeechParams:
    """Reads a params CSV written by `write_params_csv`.

    Args:
        path: Path of the CSV.
        grid: Frame grid of the parameters. Defaults to the standard grid.

    Returns:
        SpeechParams: The parameters.
    """
    with Path(path).open(newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
            raise ValueError(
                f"Expected params CSV header {','.join(CSV_COLUMNS)}; "
                f"received {header}."
            )
        rows = [[float(v) for v in row[2:]] for row in reader if row]
    values = np.array(rows, dtype=np.float64).reshape(-1, len(PARAMETERS))
    return SpeechParams(values, (grid or FrameGrid()).with_frames(len(values)))


def write_norm_stats(stats: NormStats, path: str | Path):
    """Writes normalization stats as JSON."""
    Path(path).write_text(json.dumps(stats.to_dict(), indent=2))


def read_norm_stats(path: str | Path) -> NormStats:
    """Reads normalization stats written by `write_norm_stats`."""
    return NormStats.from_dict(json.loads(Path(path).read_text()))
