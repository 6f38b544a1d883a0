from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .models import (
    DEFAULT_HOP_LENGTH,
    DEFAULT_SAMPLE_RATE,
    DEFAULT_WIN_LENGTH,
    VoicePreset,
)


class _Config(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class FrameConfig(_Config):
    sample_rate: int = Field(
        default=DEFAULT_SAMPLE_RATE, gt=0, description="Working sample rate in Hz."
    )
    win_length: int = Field(
        default=DEFAULT_WIN_LENGTH,
        gt=0,
        description="Analysis window and FFT size in samples.",
    )
    hop_length: int = Field(
        default=DEFAULT_HOP_LENGTH, gt=0, description="Hop between frames in samples."
    )

    @model_validator(mode="after")
    def _check_hop(self) -> FrameConfig:
        if self.win_length < self.hop_length:
            raise ValueError("win_length must be >= hop_length.")
        return self

    @property
    def n_fft(self) -> int:
        return self.win_length


class MelConfig(_Config):
    n_mels: int = Field(default=80, gt=0, description="Number of mel bands.")
    f_min: float = Field(default=0.0, ge=0, description="Lowest filter edge in Hz.")
    f_max: float = Field(default=8000.0, gt=0, description="Highest filter edge in Hz.")
    floor: float = Field(
        default=1e-5, gt=0, description="Floor applied before the natural log."
    )

    @model_validator(mode="after")
    def _check_range(self) -> MelConfig:
        if self.f_min >= self.f_max:
            raise ValueError("f_min must be below f_max.")
        return self


class VadConfig(_Config):
    energy_threshold_db: float = Field(
        default=-40.0,
        allow_inf_nan=False,
        description="Silence threshold in dB relative to the loudest window.",
    )
    min_silence_ms: float = Field(
        default=100.0,
        ge=0,
        allow_inf_nan=False,
        description="Shortest leading/trailing silence that gets removed.",
    )
    margin_ms: float = Field(
        default=50.0,
        ge=0,
        allow_inf_nan=False,
        description="Audio kept on either side of the detected speech.",
    )


class F0Config(_Config):
    f_min: float = Field(default=75.0, gt=0, description="Lowest F0 in Hz.")
    f_max: float = Field(default=300.0, gt=0, description="Highest F0 in Hz.")
    voicing_threshold: float = Field(
        default=0.45, description="Autocorrelation strength needed to call voicing."
    )
    silence_threshold: float = Field(
        default=0.03, ge=0, description="Frame RMS relative to the loudest frame."
    )
    octave_cost: float = Field(
        default=0.01, ge=0, description="Penalty per octave below the top of the range."
    )
    window_periods: float = Field(
        default=3.0, ge=3.0, description="Window length in periods of f_min."
    )
    median_filter: bool = Field(
        default=True, description="Apply a 3-frame median filter to voiced F0."
    )
    lowpass_hz: float | None = Field(
        default=4000.0,
        gt=0,
        description="Edge of the cos^2 taper applied to the frame spectrum before "
        "autocorrelation; None keeps the full band.",
    )
    lag_upsampling: int = Field(
        default=4,
        ge=1,
        le=16,
        description="Lag grid refinement of the autocorrelation.",
    )
    subharmonic_ratio: float = Field(
        default=0.93,
        gt=0,
        le=1,
        description="A candidate at an integer fraction of the best lag replaces "
        "it when at least this strong relative to the best.",
    )

    @model_validator(mode="after")
    def _check_range(self) -> F0Config:
        if not 0 < self.f_min < self.f_max:
            raise ValueError("Expected 0 < f_min < f_max.")
        return self

    def widened(self, factor: float) -> F0Config:
        """Widens the range so that `factor` times any in-range F0 still fits.

        Args:
            factor: The manipulation factor.

        Returns:
            F0Config: A new config.
        """
        return self.model_copy(
            update={
                "f_min": self.f_min * min(1.0, factor),
                "f_max": self.f_max * max(1.0, factor),
            }
        )


class LpcFrameConfig(_Config):
    order: int = Field(default=10, gt=0, description="LPC order.")
    window_ms: float = Field(default=25.0, gt=0, description="LPC window in ms.")
    pre_emphasis_from: float = Field(
        default=50.0, ge=0, description="Pre-emphasis corner frequency in Hz."
    )
    ceiling: float = Field(default=5000.0, gt=0, description="Formant ceiling in Hz.")
    max_formants: int = Field(default=5, gt=0, description="Poles pairs per frame.")
    min_frequency: float = Field(
        default=50.0, ge=0, description="Lowest admitted formant frequency in Hz."
    )
    max_bandwidth: float = Field(
        default=700.0, gt=0, description="Widest admitted formant bandwidth in Hz."
    )
    resample_to_ceiling: bool = Field(
        default=True,
        description="Resample to twice the ceiling before LPC analysis.",
    )
    method: Literal["burg", "levinson"] = Field(
        default="burg", description="LPC estimator."
    )
    window_shape: Literal["gaussian", "hann"] = Field(
        default="gaussian",
        description="LPC window. A gaussian window spans twice window_ms and has "
        "the effective duration of a window_ms Hann window.",
    )

    @model_validator(mode="after")
    def _check_order(self) -> LpcFrameConfig:
        if self.order != 2 * self.max_formants:
            raise ValueError("LPC order must equal 2 * max_formants.")
        return self

    def widened(self, factor: float, nyquist: float) -> LpcFrameConfig:
        """Raises the ceiling for upward formant manipulations.

        Args:
            factor: The manipulation factor.
            nyquist: Half the working sample rate, which caps the ceiling.

        Returns:
            LpcFrameConfig: A new config.
        """
        ceiling = min(self.ceiling * max(1.0, factor), nyquist)
        return self.model_copy(update={"ceiling": ceiling})


class AnalysisConfig(_Config):
    frame: FrameConfig = Field(default_factory=FrameConfig)
    mel: MelConfig = Field(default_factory=MelConfig)
    voice: VoicePreset = Field(
        default=VoicePreset.AUTO, description="Voice preset for F0 and formants."
    )
    f0: F0Config | None = Field(
        default=None, description="Explicit F0 settings; overrides the preset range."
    )
    lpc: LpcFrameConfig = Field(default_factory=LpcFrameConfig)
    formant_ceiling: float | None = Field(
        default=None, gt=0, description="Explicit ceiling; overrides the preset."
    )
    tilt_scale: Literal["db", "linear"] = Field(
        default="db", description="Magnitude scale of the tilt regression."
    )

    @model_validator(mode="after")
    def _check_consistency(self) -> AnalysisConfig:
        if self.mel.f_max > self.frame.sample_rate / 2:
            raise ValueError("Mel f_max must not exceed the Nyquist frequency.")
        return self


class MapperConfig(_Config):
    in_channels: int = Field(default=9, gt=0, description="Input parameter channels.")
    mel_channels: int = Field(default=80, gt=0, description="Output mel channels.")
    residual_channels: int = Field(default=64, gt=0)
    skip_channels: int = Field(default=64, gt=0)
    post_channels: int = Field(default=64, gt=0)
    kernel_width: int = Field(default=3, gt=0)
    dilations: tuple[int, ...] = Field(default=(1, 2, 4, 1, 2, 4))
    seed: int = Field(default=0, ge=0, description="Weight initialization seed.")

    @field_validator("kernel_width")
    @classmethod
    def _check_kernel(cls, value: int) -> int:
        if value % 2 != 1:
            raise ValueError("kernel_width must be odd.")
        return value

    @field_validator("dilations")
    @classmethod
    def _check_dilations(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value or any(d <= 0 for d in value):
            raise ValueError("dilations must be a non-empty sequence of positive ints.")
        return value

    @property
    def receptive_field(self) -> int:
        return 1 + (self.kernel_width - 1) * sum(self.dilations)


class TrainConfig(_Config):
    learning_rate: float = Field(default=1e-4, gt=0)
    batch_size: int = Field(default=16, gt=0, description="Sequences per update.")
    seq_len: int = Field(default=46, gt=0, description="Frames per sequence.")
    max_updates: int = Field(default=5000, gt=0)
    beta1: float = Field(default=0.9, gt=0, lt=1)
    beta2: float = Field(default=0.999, gt=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    seed: int = Field(default=0, ge=0, description="Crop sampling seed.")
    log_every: int = Field(default=100, gt=0)
    checkpoint_every: int = Field(
        default=1000, ge=0, description="Updates between checkpoints; 0 disables."
    )
    val_every: int = Field(
        default=500, ge=0, description="Updates between validation passes; 0 disables."
    )
    threads: int | None = Field(
        default=1,
        ge=1,
        description="BLAS threads while training; None keeps the library default. "
        "One thread makes the loss curve bitwise reproducible.",
    )


class GriffinLimConfig(_Config):
    n_iters: int = Field(default=60, ge=1)
    momentum: float = Field(default=0.99, ge=0, lt=1)
    init: Literal["zero"] = Field(default="zero", description="Initial phase.")
    peak: float = Field(default=0.95, gt=0, le=1, description="Output peak level.")
    match_energy: bool = Field(
        default=True, description="Apply per-frame gain toward the target energy."
    )


class RunConfig(_Config):
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    vad: VadConfig = Field(default_factory=VadConfig)
    trim_silence: bool = Field(
        default=True, description="Trim leading/trailing silence before analysis."
    )
    mapper: MapperConfig = Field(default_factory=MapperConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    griffinlim: GriffinLimConfig = Field(default_factory=GriffinLimConfig)
    output_dir: Path = Field(default=Path("neuform_out"))
    seed: int = Field(default=0, ge=0)
    jobs: int = Field(default=1, gt=0, description="Utterance-level workers.")

    @classmethod
    def from_json_file(cls, path: str | Path) -> RunConfig:
        """Loads a config from a JSON document.

        Args:
            path: Path of the JSON file.

        Returns:
            RunConfig: The validated config.
        """
        return cls.model_validate_json(Path(path).read_text())

    def with_overrides(self, overrides: dict[str, Any]) -> RunConfig:
        """Applies dotted-key overrides such as `{"train.max_updates": 10}`.

        Args:
            overrides: Values keyed by dotted field path; None values are skipped.

        Returns:
            RunConfig: A new, re-validated config.
        """
        data = self.model_dump(mode="json")
        for key, value in overrides.items():
            if value is None:
                continue
            node = data
            *parents, leaf = key.split(".")
            for parent in parents:
                if not isinstance(node.get(parent), dict):
                    raise ValueError(f"Unknown config section '{parent}' in '{key}'.")
                node = node[parent]
            if leaf not in node:
                raise ValueError(f"Unknown config field '{key}'.")
            node[leaf] = value.value if hasattr(value, "value") else value
        return type(self).model_validate(data)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2)

    def echo(self, directory: str | Path) -> Path:
        """Writes the effective config as `config.json` into a directory.

        Args:
            directory: The output directory; created if needed.

        Returns:
            Path: The written file.
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "config.json"
        path.write_text(self.to_json())
        return path
