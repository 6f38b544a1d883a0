import numpy as np
import pytest

from neuform.config import MapperConfig, MelConfig
from neuform.models import FrameGrid, SpeechParams, Waveform
from neuform.synth import make_corpus, pulse_train, synth_vowel

SAMPLE_RATE = 22050


@pytest.fixture
def vowel() -> Waveform:
    return synth_vowel(f0=120.0, duration=1.0)


@pytest.fixture
def gliding_vowel() -> Waveform:
    return synth_vowel(f0=120.0, f0_end=180.0, duration=1.0)


@pytest.fixture
def pulses_150() -> Waveform:
    return Waveform(pulse_train(150.0, 1.0), SAMPLE_RATE)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_mapper_config() -> MapperConfig:
    return MapperConfig(
        residual_channels=8,
        skip_channels=8,
        post_channels=8,
        mel_channels=80,
    )


@pytest.fixture
def tiny_mapper_kwargs() -> dict:
    return {
        "config": MapperConfig(
            residual_channels=4,
            skip_channels=4,
            post_channels=4,
            mel_channels=5,
            dilations=(1, 2),
        ),
        "mel": MelConfig(n_mels=5),
    }


def make_params(n_frames: int = 10, seed: int = 0) -> SpeechParams:
    """Plausible random parameters with a voiced middle section."""
    rng = np.random.default_rng(seed)
    vuv = np.zeros(n_frames)
    vuv[n_frames // 5 : n_frames - n_frames // 5] = 1
    columns = {
        "vuv": vuv,
        "log_f0": np.log(rng.uniform(100, 200, n_frames)),
        "f1": rng.uniform(400, 800, n_frames),
        "f2": rng.uniform(1000, 1800, n_frames),
        "f3": rng.uniform(2200, 2800, n_frames),
        "f4": rng.uniform(3200, 3800, n_frames),
        "tilt": rng.uniform(-0.01, -0.001, n_frames),
        "centroid": rng.uniform(800, 2500, n_frames),
        "energy": rng.uniform(0.1, 10.0, n_frames),
    }
    return SpeechParams.from_columns(columns, FrameGrid(n_frames=n_frames))


@pytest.fixture
def params() -> SpeechParams:
    return make_params(20)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("corpus")
    make_corpus(8, out_dir, seed=0, n_speakers=4)
    return out_dir
