from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .utils import frame_count, lookup_name

DEFAULT_SAMPLE_RATE = 22050
DEFAULT_WIN_LENGTH = 1024
DEFAULT_HOP_LENGTH = 256


class Parameter(Enum):
    """Enumeration of the per-frame control parameters, in column order.

    Attributes:
        VUV: Binary voiced/unvoiced flag.
        LOG_F0: Natural-log fundamental frequency.
        F1: First formant in Hz.
        F2: Second formant in Hz.
        F3: Third formant in Hz.
        F4: Fourth formant in Hz.
        TILT: Spectral tilt in dB per Hz.
        CENTROID: Spectral centroid in Hz.
        ENERGY: Linear frame energy.
    """

    VUV = "vuv"
    LOG_F0 = "log_f0"
    F1 = "f1"
    F2 = "f2"
    F3 = "f3"
    F4 = "f4"
    TILT = "tilt"
    CENTROID = "centroid"
    ENERGY = "energy"

    @classmethod
    def parse(cls, name: Parameter | str) -> Parameter:
        """Looks up a parameter by name.

        Args:
            name: A parameter or its name, case-insensitive.

        Returns:
            Parameter: The matching parameter.
        """
        if isinstance(name, Parameter):
            return name
        if not isinstance(name, str):
            raise TypeError(f"Expected str or Parameter; received {type(name)!r}.")
        return cls(lookup_name(name, [p.value for p in cls], kind="parameter"))

    @property
    def index(self) -> int:
        """Column index in a parameter matrix."""
        return list(Parameter).index(self)

    @property
    def is_continuous(self) -> bool:
        """Whether the parameter is normalized and manipulable."""
        return self is not Parameter.VUV

    @property
    def is_log_scale(self) -> bool:
        """Whether manipulations act additively on the parameter."""
        return self is Parameter.LOG_F0

    @property
    def is_voiced_only(self) -> bool:
        """Whether errors are measured on mutually voiced frames only."""
        return self in FORMANTS or self is Parameter.LOG_F0


PARAMETERS: tuple[Parameter, ...] = tuple(Parameter)
CONTINUOUS: tuple[Parameter, ...] = tuple(p for p in Parameter if p.is_continuous)
FORMANTS: tuple[Parameter, ...] = (
    Parameter.F1,
    Parameter.F2,
    Parameter.F3,
    Parameter.F4,
)
PARAMETER_NAMES: tuple[str, ...] = tuple(p.value for p in Parameter)


class VoicePreset(Enum):
    """Enumeration of the extractor voice presets.

    Attributes:
        AUTO: Choose from a first-pass median F0.
        LOW: 75-300 Hz pitch range, 5000 Hz formant ceiling.
        HIGH: 100-500 Hz pitch range, 5500 Hz formant ceiling.
    """

    AUTO = "auto"
    LOW = "low"
    HIGH = "high"


class Split(Enum):
    """Enumeration of dataset splits."""

    TRAIN = "train"
    VAL = "val"
    TEST = "test"


def _as_float_array(values: Any, ndim: int, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != ndim:
        raise ValueError(
            f"Expected {name} with {ndim} dimension(s); received shape {array.shape}."
        )
    return array


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono audio samples with their sample rate.

    Attributes:
        samples: Real amplitudes, nominally in [-1, 1].
        sample_rate: Sample rate in Hz.
    """

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = _as_float_array(self.samples, 1, "mono samples")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(
                f"Sample rate must be a positive integer; "
                f"received {self.sample_rate!r}."
            )
        if not np.all(np.isfinite(samples)):
            raise ValueError("Waveform samples must be finite.")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        """Duration in seconds."""
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, Waveform):
            return False
        return self.sample_rate == other.sample_rate and np.array_equal(
            self.samples, other.samples
        )

    def __repr__(self) -> str:
        return f"Waveform({len(self)} samples, {self.sample_rate} Hz)"


@dataclass(frozen=True)
class FrameGrid:
    """The shared analysis grid of every per-frame trajectory.

    Attributes:
        win_length: Window length in samples.
        hop_length: Hop length in samples.
        sample_rate: Sample rate in Hz.
        n_frames: Number of frames.
    """

    win_length: int = DEFAULT_WIN_LENGTH
    hop_length: int = DEFAULT_HOP_LENGTH
    sample_rate: int = DEFAULT_SAMPLE_RATE
    n_frames: int = 0

    def __post_init__(self):
        if not self.win_length >= self.hop_length > 0:
            raise ValueError(
                f"Expected win_length >= hop_length > 0; received "
                f"{self.win_length} and {self.hop_length}."
            )
        if self.n_frames < 0:
            raise ValueError(f"Frame count must be >= 0; received {self.n_frames}.")

    @classmethod
    def for_samples(
        cls,
        n_samples: int,
        win_length: int = DEFAULT_WIN_LENGTH,
        hop_length: int = DEFAULT_HOP_LENGTH,
        sample_rate: int = DEFAULT_SAMPLE_RATE,
    ) -> FrameGrid:
        """Creates the grid covering a signal of a given length.

        Args:
            n_samples: Signal length in samples.
            win_length: Window length in samples.
            hop_length: Hop length in samples.
            sample_rate: Sample rate in Hz.

        Returns:
            FrameGrid: The grid, with pre-padding disabled.
        """
        n_frames = frame_count(n_samples, win_length, hop_length)
        return cls(win_length, hop_length, sample_rate, n_frames)

    def with_frames(self, n_frames: int) -> FrameGrid:
        """Returns the same grid with a different frame count."""
        return FrameGrid(self.win_length, self.hop_length, self.sample_rate, n_frames)

    def frame_starts(self) -> np.ndarray:
        """First sample index of every frame."""
        return np.arange(self.n_frames) * self.hop_length

    def frame_centers(self) -> np.ndarray:
        """Center sample position of every frame."""
        return self.frame_starts() + self.win_length / 2

    def frame_times(self) -> np.ndarray:
        """Start time of every frame in seconds, `frame * hop / sr`."""
        return self.frame_starts() / self.sample_rate

    @property
    def n_samples(self) -> int:
        """Samples spanned by the frames."""
        if self.n_frames == 0:
            return 0
        return (self.n_frames - 1) * self.hop_length + self.win_length


@dataclass(frozen=True, eq=False)
class MagnitudeSpectrogram:
    """Per-frame STFT magnitudes.

    Attributes:
        values: Array of shape (n_frames, n_fft // 2 + 1).
        n_fft: FFT size.
        grid: The frame grid.
    """

    values: np.ndarray
    n_fft: int
    grid: FrameGrid

    def __post_init__(self):
        values = _as_float_array(self.values, 2, "magnitudes")
        if values.shape[1] != self.n_fft // 2 + 1:
            raise ValueError(
                f"Expected {self.n_fft // 2 + 1} bins; received {values.shape[1]}."
            )
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("Magnitudes must be finite and non-negative.")
        object.__setattr__(self, "values", values)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class MelBasis:
    """Triangular mel filterbank.

    Attributes:
        weights: Array of shape (n_mels, n_fft // 2 + 1).
        f_min: Lowest filter edge in Hz.
        f_max: Highest filter edge in Hz.
        sample_rate: Sample rate in Hz.
    """

    weights: np.ndarray
    f_min: float
    f_max: float
    sample_rate: int

    @property
    def n_mels(self) -> int:
        return self.weights.shape[0]

    @property
    def n_fft(self) -> int:
        return 2 * (self.weights.shape[1] - 1)


@dataclass(frozen=True, eq=False)
class MelSpectrogram:
    """Log-compressed mel-band energies.

    Attributes:
        values: Array of shape (n_frames, n_mels).
        grid: The frame grid.
    """

    values: np.ndarray
    grid: FrameGrid

    def __post_init__(self):
        values = _as_float_array(self.values, 2, "mel values")
        if not np.all(np.isfinite(values)):
            raise ValueError("Mel values must be finite.")
        object.__setattr__(self, "values", values)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_mels(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class PitchTrack:
    """Log-F0 trajectory with voicing flags.

    Unvoiced frames hold NaN until `interpolate_unvoiced` fills them.

    Attributes:
        log_f0: Natural-log F0 per frame.
        vuv: Voicing flag per frame, 0 or 1.
    """

    log_f0: np.ndarray
    vuv: np.ndarray

    def __post_init__(self):
        log_f0 = _as_float_array(self.log_f0, 1, "log-F0")
        vuv = np.asarray(self.vuv).astype(np.int8)
        if vuv.shape != log_f0.shape:
            raise ValueError("log-F0 and voicing flags must have equal length.")
        if np.any((vuv != 0) & (vuv != 1)):
            raise ValueError("Voicing flags must be 0 or 1.")
        object.__setattr__(self, "log_f0", log_f0)
        object.__setattr__(self, "vuv", vuv)

    @property
    def voiced(self) -> np.ndarray:
        return self.vuv.astype(bool)

    def __len__(self) -> int:
        return len(self.log_f0)


@dataclass(frozen=True)
class FormantCandidate:
    """A single LPC resonance.

    Attributes:
        frequency: Center frequency in Hz.
        bandwidth: 3 dB bandwidth in Hz.
    """

    frequency: float
    bandwidth: float


@dataclass(frozen=True, eq=False)
class FormantTracks:
    """F1-F4 trajectories.

    Attributes:
        values: Array of shape (n_frames, 4) in Hz.
        missing_mask: Boolean array of shape (n_frames, 4); True where the
            value was filled by interpolation.
    """

    values: np.ndarray
    missing_mask: np.ndarray

    def __post_init__(self):
        values = _as_float_array(self.values, 2, "formant values")
        missing = np.asarray(self.missing_mask, dtype=bool)
        if values.shape != missing.shape or values.shape[1:] != (4,):
            raise ValueError(
                f"Expected formant arrays of shape (n, 4); received "
                f"{values.shape} and {missing.shape}."
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing_mask", missing)

    def __getitem__(self, formant: int) -> np.ndarray:
        """Trajectory of formant 1-4."""
        if not 1 <= formant <= 4:
            raise IndexError(f"Formant number must be 1-4; received {formant}.")
        return self.values[:, formant - 1]

    @property
    def f1(self) -> np.ndarray:
        return self[1]

    @property
    def f2(self) -> np.ndarray:
        return self[2]

    @property
    def f3(self) -> np.ndarray:
        return self[3]

    @property
    def f4(self) -> np.ndarray:
        return self[4]


@dataclass(frozen=True, eq=False)
class SpeechParams:
    """The nine control parameters of every frame.

    Attributes:
        values: Array of shape (n_frames, 9) in `Parameter` column order.
        grid: The frame grid.
    """

    values: np.ndarray
    grid: FrameGrid = field(default_factory=FrameGrid)

    def __post_init__(self):
        values = _as_float_array(self.values, 2, "parameter rows")
        if values.shape[1] != len(PARAMETERS):
            raise ValueError(
                f"Expected {len(PARAMETERS)} parameter columns; "
                f"received {values.shape[1]}."
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("Speech parameters must be finite.")
        vuv = values[:, Parameter.VUV.index]
        if np.any((vuv != 0) & (vuv != 1)):
            raise ValueError("Voicing flags must be 0 or 1.")
        grid = self.grid
        if grid.n_frames != len(values):
            grid = grid.with_frames(len(values))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "grid", grid)

    @classmethod
    def from_columns(
        cls, columns: dict[Parameter | str, np.ndarray], grid: FrameGrid
    ) -> SpeechParams:
        """Creates parameters from one trajectory per parameter.

        Args:
            columns: Trajectories keyed by parameter; all nine are required.
            grid: The frame grid.

        Returns:
            SpeechParams: The assembled parameters.
        """
        parsed = {Parameter.parse(key): value for key, value in columns.items()}
        missing = [p.value for p in PARAMETERS if p not in parsed]
        if missing:
            raise ValueError(f"Missing parameter columns: {missing}.")
        values = np.column_stack(
            [np.asarray(parsed[p], dtype=np.float64) for p in PARAMETERS]
        )
        return cls(values, grid)

    def __getitem__(self, parameter: Parameter | str) -> np.ndarray:
        """Returns a copy of one trajectory."""
        return self.values[:, Parameter.parse(parameter).index].copy()

    def __iter__(self) -> Iterator[tuple[Parameter, np.ndarray]]:
        for parameter in PARAMETERS:
            yield parameter, self[parameter]

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, SpeechParams):
            return False
        return np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        return f"SpeechParams({len(self)} frames)"

    @property
    def n_frames(self) -> int:
        return len(self.values)

    @property
    def voiced(self) -> np.ndarray:
        return self.values[:, Parameter.VUV.index].astype(bool)

    def replace(self, parameter: Parameter | str, values: np.ndarray) -> SpeechParams:
        """Returns new parameters with one trajectory replaced.

        Args:
            parameter: The parameter to replace.
            values: The new trajectory.

        Returns:
            SpeechParams: New parameters; the others are copied bitwise.
        """
        new_values = self.values.copy()
        new_values[:, Parameter.parse(parameter).index] = values
        return SpeechParams(new_values, self.grid)

    def truncate(self, n_frames: int) -> SpeechParams:
        """Returns the first `n_frames` frames."""
        return SpeechParams(self.values[:n_frames].copy(), self.grid)


@dataclass(frozen=True, eq=False)
class NormStats:
    """Mean and standard deviation of each continuous parameter.

    Attributes:
        mean: Array of shape (8,) in `CONTINUOUS` order.
        std: Array of shape (8,), floored at 1e-8.
        mel_mean: Optional per-band mel mean.
        mel_std: Optional per-band mel standard deviation.
    """

    mean: np.ndarray
    std: np.ndarray
    mel_mean: np.ndarray | None = None
    mel_std: np.ndarray | None = None

    def __post_init__(self):
        for name in ("mean", "std", "mel_mean", "mel_std"):
            value = getattr(self, name)
            if value is None:
                continue
            array = _as_float_array(value, 1, name)
            if not np.all(np.isfinite(array)):
                raise ValueError(f"Normalization {name} must be finite.")
            object.__setattr__(self, name, array)
        if self.mean.shape != (len(CONTINUOUS),) or self.std.shape != self.mean.shape:
            raise ValueError(
                f"Expected {len(CONTINUOUS)} means and standard deviations; "
                f"received {self.mean.shape} and {self.std.shape}."
            )
        if (self.mel_mean is None) != (self.mel_std is None):
            raise ValueError("Mel mean and standard deviation must be set together.")

    @property
    def has_mel(self) -> bool:
        return self.mel_mean is not None

    def to_dict(self) -> dict[str, Any]:
        """Plain-JSON representation keyed by parameter name."""
        data: dict[str, Any] = {
            "parameters": {
                p.value: {"mean": float(m), "std": float(s)}
                for p, m, s in zip(CONTINUOUS, self.mean, self.std)
            }
        }
        if self.has_mel:
            data["mel_mean"] = [float(v) for v in self.mel_mean]  # type: ignore
            data["mel_std"] = [float(v) for v in self.mel_std]  # type: ignore
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> NormStats:
        """Inverse of `to_dict`."""
        parameters = data["parameters"]
        try:
            mean = [parameters[p.value]["mean"] for p in CONTINUOUS]
            std = [parameters[p.value]["std"] for p in CONTINUOUS]
        except KeyError as exc:
            raise ValueError(f"Normalization stats lack parameter {exc}.")
        return cls(
            np.array(mean),
            np.array(std),
            None if data.get("mel_mean") is None else np.array(data["mel_mean"]),
            None if data.get("mel_std") is None else np.array(data["mel_std"]),
        )

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, NormStats):
            return False
        return all(
            (a is None and b is None)
            or (a is not None and b is not None and np.array_equal(a, b))
            for a, b in (
                (self.mean, other.mean),
                (self.std, other.std),
                (self.mel_mean, other.mel_mean),
                (self.mel_std, other.mel_std),
            )
        )
