from __future__ import annotations

import concurrent.futures
import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TypeVar

import numpy as np

from .audio import load_audio
from .config import AnalysisConfig, RunConfig
from .errors import ConfigError
from .manifest import Manifest, ManifestEntry
from .mapper import MapperModel, predict_mel
from .models import MelSpectrogram, Parameter, SpeechParams, VoicePreset, Waveform
from .params import Analysis, ManipulationSpec, analyze, manipulate
from .pitch import PresetChoice
from .spectral import mel_basis_for
from .vocoder import griffin_lim, match_energy, mel_to_linear

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class System(Enum):
    """What renders audio from parameters.

    `nf` maps parameters to mel with the trained network, `vocoder` renders
    the reference mel directly, and `identity` skips synthesis and returns
    the parameters unchanged.
    """

    NF = "nf"
    VOCODER = "vocoder"
    IDENTITY = "identity"


@dataclass(frozen=True)
class Utterance:
    """An analyzed utterance.

    Attributes:
        utterance_id: Identifier, typically from the manifest.
        waveform: The analyzed audio at the working sample rate.
        analysis: Parameters, reference mel and extractor settings.
    """

    utterance_id: str
    waveform: Waveform
    analysis: Analysis

    @property
    def params(self) -> SpeechParams:
        return self.analysis.params

    @property
    def mel(self) -> MelSpectrogram:
        return self.analysis.mel

    @property
    def preset(self) -> PresetChoice:
        return self.analysis.preset

    def __repr__(self) -> str:
        return f"Utterance({self.utterance_id!r}, {len(self.params)} frames)"


def analyze_file(
    path: str | Path,
    config: RunConfig | None = None,
    voice: VoicePreset | None = None,
    utterance_id: str | None = None,
) -> Utterance:
    """Loads and analyzes one WAV file.

    Args:
        path: Path of the WAV file.
        config: Run settings. Defaults to `RunConfig()`.
        voice: Voice preset overriding the configured one.
        utterance_id: Identifier. Defaults to the file stem.

    Returns:
        Utterance: The analyzed utterance.
    """
    config = config or RunConfig()
    analysis_config = config.analysis
    if voice is not None:
        analysis_config = analysis_config.model_copy(update={"voice": voice})
    waveform = load_audio(
        path,
        analysis_config.frame.sample_rate,
        config.vad if config.trim_silence else None,
    )
    analysis = analyze(waveform, analysis_config)
    utterance_id = utterance_id or Path(path).stem
    logger.debug(f"Analyzed {utterance_id}: {len(analysis.params)} frames.")
    return Utterance(utterance_id, waveform, analysis)


def analyze_entry(
    manifest: Manifest, entry: ManifestEntry, config: RunConfig | None = None
) -> Utterance:
    """Analyzes one manifest entry, honoring its voice override."""
    path = manifest.resolve(entry)
    return analyze_file(path, config, entry.voice, entry.utterance_id)


def parallel_map(
    function: Callable[[T], R], items: Iterable[T], jobs: int = 1
) -> list[R | Exception]:
    """Applies `function` to every item, collecting exceptions as results.

    Args:
        function: The per-item work.
        items: The inputs.
        jobs: Worker threads; 1 runs serially in the calling thread.

    Returns:
        list: Results or raised exceptions, in input order.
    """

    def guarded(item: T) -> R | Exception:
        try:
            return function(item)
        except Exception as exc:
            return exc

    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [guarded(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(guarded, items))


class Synthesizer:
    """Renders speech parameters to audio and re-analyzes the result.

    Args:
        model: The trained mapper; required for the `nf` system.
        config: Run settings. Defaults to `RunConfig()`.
        system: The rendering system.
    """

    def __init__(
        self,
        model: MapperModel | None = None,
        config: RunConfig | None = None,
        system: System | str = System.NF,
    ):
        self.config = config or RunConfig()
        self.system = System(system)
        self.model = model
        frame = self.config.analysis.frame
        if self.system is System.NF:
            if model is None:
                raise ConfigError("The nf system needs a trained mapper checkpoint.")
            if model.stats is None or not model.stats.has_mel:
                raise ConfigError("The mapper carries no normalization stats.")
            if model.frame != frame or model.mel != self.config.analysis.mel:
                raise ConfigError(
                    f"Checkpoint was trained at {model.frame.sample_rate} Hz with "
                    f"hop {model.frame.hop_length} and {model.mel.n_mels} mels; "
                    f"the run config uses {frame.sample_rate} Hz with hop "
                    f"{frame.hop_length} and {self.config.analysis.mel.n_mels} mels."
                )
        self.basis = mel_basis_for(frame, self.config.analysis.mel)

    def __repr__(self) -> str:
        return f"Synthesizer(system={self.system.value!r})"

    @property
    def renders_audio(self) -> bool:
        return self.system is not System.IDENTITY

    def params_to_mel(
        self, params: SpeechParams, reference_mel: MelSpectrogram | None = None
    ) -> MelSpectrogram:
        """The mel-spectrogram that the system renders for `params`.

        Args:
            params: The (possibly manipulated) parameters.
            reference_mel: The analyzed mel; required by the vocoder system.

        Returns:
            MelSpectrogram: The mel on the parameters' grid.
        """
        if self.system is System.NF:
            assert self.model is not None
            return predict_mel(self.model, params)
        if reference_mel is None:
            raise ValueError(f"The {self.system.value} system needs a reference mel.")
        return reference_mel

    def mel_to_waveform(
        self, mel: MelSpectrogram, energy: np.ndarray | None = None
    ) -> Waveform:
        """Renders a mel-spectrogram with Griffin-Lim.

        Args:
            mel: The mel-spectrogram on the working frame grid.
            energy: Target frame energy; applied when energy matching is on.

        Returns:
            Waveform: The rendered audio.
        """
        gl = self.config.griffinlim
        magnitude = mel_to_linear(mel, self.basis, self.config.analysis.mel.floor)
        waveform = griffin_lim(magnitude, gl)
        if energy is not None and gl.match_energy:
            waveform = match_energy(waveform, energy, mel.grid)
            peak = np.max(np.abs(waveform.samples)) if len(waveform) else 0.0
            if peak > 1.0:
                logger.warning(
                    f"Energy-matched audio peaks at {peak:.2f}; it will clip."
                )
        return waveform

    def synthesize(
        self, params: SpeechParams, reference_mel: MelSpectrogram | None = None
    ) -> Waveform:
        """Parameters to audio: mel prediction, Griffin-Lim and energy matching."""
        if not self.renders_audio:
            raise ValueError("The identity system does not render audio.")
        mel = self.params_to_mel(params, reference_mel)
        return self.mel_to_waveform(mel, params[Parameter.ENERGY])

    def resynthesize(self, utterance: Utterance) -> Waveform:
        """Copy synthesis of an analyzed utterance."""
        return self.synthesize(utterance.params, utterance.mel)

    def manipulate(self, utterance: Utterance, spec: ManipulationSpec) -> Waveform:
        """Synthesizes an utterance with manipulated parameters."""
        return self.synthesize(manipulate(utterance.params, spec), utterance.mel)

    def roundtrip(
        self,
        utterance: Utterance,
        params: SpeechParams,
        preset: PresetChoice | None = None,
    ) -> SpeechParams:
        """Synthesizes `params` and analyzes the result again.

        Args:
            utterance: The source utterance, for its reference mel and preset.
            params: The parameters to render.
            preset: Extractor settings of the re-analysis. Defaults to the
                utterance's own.

        Returns:
            SpeechParams: The re-extracted parameters.
        """
        if not self.renders_audio:
            return params
        waveform = self.synthesize(params, utterance.mel)
        analysis_config: AnalysisConfig = self.config.analysis
        return analyze(waveform, analysis_config, preset or utterance.preset).params


def analyze_many(
    paths: Sequence[str | Path], config: RunConfig | None = None
) -> list[Utterance | Exception]:
    """Analyzes several files with `config.jobs` workers."""
    config = config or RunConfig()
    return parallel_map(lambda p: analyze_file(p, config), paths, config.jobs)
