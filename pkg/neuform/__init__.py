"""Speech parameter analysis, manipulation and resynthesis"""

from .config import RunConfig
from .core import Synthesizer, Utterance, analyze_file
from .models import Parameter, SpeechParams, Waveform
from .params import ManipulationSpec, analyze, manipulate

__version__ = "0.1.0"

__all__ = [
    "ManipulationSpec",
    "Parameter",
    "RunConfig",
    "SpeechParams",
    "Synthesizer",
    "Utterance",
    "Waveform",
    "analyze",
    "analyze_file",
    "manipulate",
]
