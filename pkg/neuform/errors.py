from __future__ import annotations


class NeuformError(ValueError):
    """Base class for data and numeric failures raised by neuform."""


class ConfigError(NeuformError):
    """Raised when configurations, checkpoints or inputs disagree."""


class WavFormatError(NeuformError):
    """Raised when a WAV container is malformed.

    Attributes:
        offset: Byte offset in the file where the problem was detected.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedCodecError(WavFormatError):
    """Raised for WAV codecs other than PCM16 and IEEE float32."""


class NoVoicedFramesError(NeuformError):
    """Raised when a pitch track contains no voiced frame."""


class DegenerateFrameError(NeuformError):
    """Raised when an LPC frame carries no signal."""


class FormantMissingError(NeuformError):
    """Raised when a formant is missing in every frame.

    Attributes:
        formant: The 1-based formant number.
    """

    def __init__(self, formant: int):
        super().__init__(f"Formant F{formant} is missing in every frame.")
        self.formant = formant


class RootFindingError(NeuformError):
    """Raised when the companion-matrix eigenvalue iteration fails.

    Attributes:
        frame_index: Index of the analysis frame, if known.
    """

    def __init__(self, message: str, frame_index: int | None = None):
        if frame_index is not None:
            message = f"{message} (frame {frame_index})"
        super().__init__(message)
        self.frame_index = frame_index


class MelFormatError(NeuformError):
    """Raised when an NFMEL1 file is malformed."""


class CheckpointError(NeuformError):
    """Raised when an NFCKPT1 checkpoint is malformed or mismatched."""


class EvaluationError(NeuformError):
    """Raised when two parameter sets cannot be compared."""


class NumericError(NeuformError):
    """Raised when a computation produces non-finite values."""


class TrainingDivergedError(NumericError):
    """Raised when the training loss becomes non-finite.

    Attributes:
        step: The update index at which the loss diverged.
    """

    def __init__(self, step: int, loss: float):
        super().__init__(f"Non-finite training loss {loss!r} at step {step}.")
        self.step = step
        self.loss = loss
