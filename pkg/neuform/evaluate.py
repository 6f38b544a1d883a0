from __future__ import annotations

import csv
import json
import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np

from .config import LpcFrameConfig
from .core import Utterance, parallel_map
from .errors import EvaluationError
from .models import (
    CONTINUOUS,
    FORMANTS,
    PARAMETERS,
    NormStats,
    Parameter,
    SpeechParams,
)
from .params import ManipulationSpec, manipulate, normalize
from .pitch import PresetChoice
from .utils import format_float, round_float

logger = logging.getLogger(__name__)

DEFAULT_FACTORS = (0.7, 0.8, 0.9, 1.1, 1.2, 1.3)
MAX_FRAME_MISMATCH = 2

COPY_COLUMNS = ("parameter", "mse", "median_se", "n_frames")
SWEEP_COLUMNS = (
    "manipulated",
    "factor",
    "parameter",
    "mse",
    "median_se",
    "n_frames",
    "median_ratio",
)

Pipeline = Callable[[Utterance, SpeechParams, PresetChoice], SpeechParams]


@dataclass(frozen=True)
class ParamError:
    """Pooled error of one parameter.

    Attributes:
        mse: Mean squared error of z-scored values; the disagreement rate
            for the voicing flag.
        median_se: Median squared error.
        n_frames: Frames included.
    """

    mse: float
    median_se: float
    n_frames: int


@dataclass(frozen=True)
class ParamErrorReport:
    """Per-parameter copy-synthesis error.

    Attributes:
        errors: Error of every parameter, voicing included.
    """

    errors: dict[Parameter, ParamError]

    def __getitem__(self, parameter: Parameter | str) -> ParamError:
        return self.errors[Parameter.parse(parameter)]

    @property
    def vuv_disagreement(self) -> float:
        return self.errors[Parameter.VUV].mse

    @property
    def n_frames(self) -> int:
        return self.errors[Parameter.VUV].n_frames

    def mse(self) -> dict[str, float]:
        """MSE keyed by parameter name."""
        return {p.value: e.mse for p, e in self.errors.items()}

    def rows(self) -> list[dict[str, Any]]:
        return [
            {
                "parameter": p.value,
                "mse": e.mse,
                "median_se": e.median_se,
                "n_frames": e.n_frames,
            }
            for p, e in self.errors.items()
        ]


def align_frames(
    reference: SpeechParams, test: SpeechParams
) -> tuple[SpeechParams, SpeechParams]:
    """Truncates two trajectories to a common length.

    Raises:
        EvaluationError: If the frame counts differ by more than 2.
    """
    difference = abs(len(reference) - len(test))
    if difference > MAX_FRAME_MISMATCH:
        raise EvaluationError(
            f"Frame counts differ by {difference}: {len(reference)} reference "
            f"and {len(test)} re-analyzed frames."
        )
    if difference:
        logger.warning(
            f"Truncating to {min(len(reference), len(test))} frames "
            f"(re-analysis differs by {difference})."
        )
        n_frames = min(len(reference), len(test))
        reference, test = reference.truncate(n_frames), test.truncate(n_frames)
    return reference, test


class ErrorAccumulator:
    """Pools per-frame squared errors across utterances.

    Args:
        stats: Statistics used to z-score both sides.
    """

    def __init__(self, stats: NormStats):
        self.stats = stats
        self._errors: dict[Parameter, list[np.ndarray]] = {p: [] for p in PARAMETERS}

    def add(self, reference: SpeechParams, test: SpeechParams):
        """Adds the squared errors of one utterance.

        Log-F0 and formants count only frames voiced in both; the voicing
        flag and the spectral parameters count every frame.
        """
        reference, test = align_frames(reference, test)
        z_reference = normalize(reference, self.stats)
        z_test = normalize(test, self.stats)
        both_voiced = reference.voiced & test.voiced
        for parameter in PARAMETERS:
            column = parameter.index
            squared = np.square(z_reference[:, column] - z_test[:, column])
            if parameter.is_voiced_only:
                squared = squared[both_voiced]
            self._errors[parameter].append(squared)

    def report(self) -> ParamErrorReport:
        errors = {}
        for parameter, chunks in self._errors.items():
            pooled = np.concatenate(chunks) if chunks else np.zeros(0)
            if len(pooled) == 0:
                errors[parameter] = ParamError(float("nan"), float("nan"), 0)
                continue
            errors[parameter] = ParamError(
                float(np.mean(pooled)), float(np.median(pooled)), len(pooled)
            )
        return ParamErrorReport(errors)


def copy_synthesis_error(
    reference: SpeechParams, resynthesized: SpeechParams, stats: NormStats
) -> ParamErrorReport:
    """Per-parameter z-scored error between analysis and re-analysis.

    Args:
        reference: Parameters of the original audio.
        resynthesized: Parameters re-extracted from the synthesized audio.
        stats: Normalization statistics of the training split.

    Returns:
        ParamErrorReport: The errors; voicing reports the disagreement rate.
    """
    accumulator = ErrorAccumulator(stats)
    accumulator.add(reference, resynthesized)
    return accumulator.report()


def median_ratio(
    parameter: Parameter, target: SpeechParams, test: SpeechParams
) -> float:
    """Median ratio of re-extracted to target values of one parameter.

    Only frames voiced in both count for log-F0 and formants; the log-F0
    ratio compares F0, `exp(median(test - target))`.
    """
    target, test = align_frames(target, test)
    mask = np.ones(len(target), dtype=bool)
    if parameter.is_voiced_only:
        mask = target.voiced & test.voiced
    a = target[parameter][mask]
    b = test[parameter][mask]
    if parameter is Parameter.LOG_F0:
        return float(np.exp(np.median(b - a))) if len(a) else float("nan")
    valid = a != 0
    if not valid.any():
        return float("nan")
    return float(np.median(b[valid] / a[valid]))


def evaluate_copy(
    utterances: Sequence[Utterance],
    pipeline: Pipeline,
    stats: NormStats,
    jobs: int = 1,
) -> tuple[ParamErrorReport, dict[str, Exception]]:
    """Copy-synthesis error pooled over utterances.

    Args:
        utterances: Analyzed test utterances.
        pipeline: Renders and re-analyzes parameters.
        stats: Normalization statistics.
        jobs: Utterance-level workers.

    Returns:
        The pooled report and the failures keyed by utterance id.
    """
    results = parallel_map(lambda u: pipeline(u, u.params, u.preset), utterances, jobs)
    accumulator = ErrorAccumulator(stats)
    failures: dict[str, Exception] = {}
    for utterance, result in zip(utterances, results):
        if isinstance(result, Exception):
            failures[utterance.utterance_id] = result
            logger.warning(
                f"Copy synthesis of {utterance.utterance_id} failed: {result}"
            )
            continue
        try:
            accumulator.add(utterance.params, result)
        except EvaluationError as exc:
            failures[utterance.utterance_id] = exc
            logger.warning(f"Skipping {utterance.utterance_id}: {exc}")
    return accumulator.report(), failures


@dataclass(frozen=True)
class SweepEntry:
    """Errors after scaling one parameter by one factor.

    Attributes:
        manipulated: The scaled parameter.
        factor: The scale factor.
        report: Error of every parameter against the manipulated target.
        median_ratio: Median re-extracted / target ratio of the manipulated
            parameter.
    """

    manipulated: Parameter
    factor: float
    report: ParamErrorReport
    median_ratio: float

    def rows(self) -> list[dict[str, Any]]:
        return [
            {
                "manipulated": self.manipulated.value,
                "factor": self.factor,
                **row,
                "median_ratio": (
                    self.median_ratio
                    if row["parameter"] == self.manipulated.value
                    else ""
                ),
            }
            for row in self.report.rows()
        ]


@dataclass
class SweepReport:
    """Manipulation-accuracy results of every (parameter, factor) pair.

    Attributes:
        entries: One entry per pair, in sweep order.
        failures: Failed utterances per pair, as messages.
    """

    entries: list[SweepEntry] = field(default_factory=list)
    failures: dict[tuple[str, float], dict[str, str]] = field(default_factory=dict)

    def __getitem__(self, key: tuple[Parameter | str, float]) -> SweepEntry:
        parameter, factor = Parameter.parse(key[0]), key[1]
        for entry in self.entries:
            if entry.manipulated is parameter and entry.factor == factor:
                return entry
        raise KeyError(f"No sweep entry for {parameter.value} x {factor}.")

    def __len__(self) -> int:
        return len(self.entries)

    def rows(self) -> list[dict[str, Any]]:
        return [row for entry in self.entries for row in entry.rows()]


def compare_targets(
    utterance: Utterance, params: SpeechParams, preset: PresetChoice
) -> SpeechParams:
    """A pipeline that returns the target parameters unchanged."""
    return params


def widen_preset(
    preset: PresetChoice,
    parameter: Parameter,
    factor: float,
    nyquist: float,
    lpc: LpcFrameConfig | None = None,
) -> PresetChoice:
    """Extractor settings whose ranges admit the manipulated target.

    F0 bounds widen for log-F0 manipulations and the formant ceiling rises
    for upward formant manipulations; other parameters keep the preset.
    """
    f0 = preset.f0
    ceiling = preset.formant_ceiling
    if parameter is Parameter.LOG_F0:
        f0 = f0.widened(factor)
    elif parameter in FORMANTS:
        lpc = (lpc or LpcFrameConfig()).model_copy(update={"ceiling": ceiling})
        ceiling = lpc.widened(factor, nyquist).ceiling
    return PresetChoice(preset.preset, f0, ceiling, preset.warning, preset.median_f0)


def manipulation_sweep(
    utterances: Sequence[Utterance],
    factors: Iterable[float] = DEFAULT_FACTORS,
    pipeline: Pipeline | None = None,
    stats: NormStats | None = None,
    parameters: Iterable[Parameter | str] = CONTINUOUS,
    nyquist: float = 11025.0,
    lpc: LpcFrameConfig | None = None,
    jobs: int = 1,
) -> SweepReport:
    """Scales each parameter in isolation and measures what comes back.

    For every (parameter, factor) each utterance's parameters are
    manipulated, rendered and re-analyzed with widened extractor ranges. The
    re-extracted parameters are compared to the manipulated target, which
    equals the unmanipulated reference in every other column.

    Args:
        utterances: Analyzed test utterances.
        factors: Scale factors.
        pipeline: Renders and re-analyzes parameters; None compares the
            manipulated parameters with themselves.
        stats: Normalization statistics.
        parameters: Parameters to sweep.
        nyquist: Half the working sample rate.
        lpc: LPC settings used to cap widened formant ceilings.
        jobs: Utterance-level workers.

    Returns:
        SweepReport: Entries of every pair; failed utterances are skipped
        and listed in `failures`.
    """
    if stats is None:
        raise ValueError("A sweep needs normalization stats.")
    pipeline = pipeline or compare_targets
    report = SweepReport()
    for parameter in map(Parameter.parse, parameters):
        if parameter is Parameter.VUV:
            raise ValueError("The voicing flag cannot be swept.")
        for factor in factors:
            spec = ManipulationSpec.scale(parameter, factor)

            def run(utterance: Utterance) -> tuple[SpeechParams, SpeechParams]:
                target = manipulate(utterance.params, spec)
                preset = widen_preset(utterance.preset, parameter, factor, nyquist, lpc)
                return target, pipeline(utterance, target, preset)

            accumulator = ErrorAccumulator(stats)
            targets, tests = [], []
            failures: dict[str, str] = {}
            for utterance, result in zip(
                utterances, parallel_map(run, utterances, jobs)
            ):
                try:
                    if isinstance(result, Exception):
                        raise result
                    accumulator.add(*result)
                except Exception as exc:
                    failures[utterance.utterance_id] = str(exc)
                    logger.warning(
                        f"{parameter.value} x {factor}: "
                        f"{utterance.utterance_id} failed: {exc}"
                    )
                    continue
                targets.append(result[0])
                tests.append(result[1])
            if failures:
                report.failures[(parameter.value, factor)] = failures
            ratio = _pooled_ratio(parameter, targets, tests)
            report.entries.append(
                SweepEntry(parameter, float(factor), accumulator.report(), ratio)
            )
            logger.info(f"Swept {parameter.value} x {factor}: ratio {ratio:.4f}")
    return report


def _pooled_ratio(
    parameter: Parameter,
    targets: Sequence[SpeechParams],
    tests: Sequence[SpeechParams],
) -> float:
    if not targets:
        return float("nan")
    ratios = [median_ratio(parameter, t, r) for t, r in zip(targets, tests)]
    ratios = [r for r in ratios if np.isfinite(r)]
    return float(np.median(ratios)) if ratios else float("nan")


def _report_kind(report: ParamErrorReport | SweepReport) -> tuple[str, tuple]:
    if isinstance(report, ParamErrorReport):
        return "copy", COPY_COLUMNS
    if isinstance(report, SweepReport):
        return "sweep", SWEEP_COLUMNS
    raise TypeError(
        f"Expected ParamErrorReport or SweepReport; received {type(report)!r}."
    )


def _format_cell(value: Any) -> str:
    if value is None or (isinstance(value, float) and not np.isfinite(value)):
        return ""
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def _json_cell(value: Any) -> Any:
    if isinstance(value, float):
        return round_float(value) if np.isfinite(value) else None
    return value


def write_report(
    report: ParamErrorReport | SweepReport,
    path: str | Path,
    format: Literal["csv", "json"] = "csv",
) -> Path:
    """Writes a report with a stable column order and 9 significant digits.

    Undefined values (no frames to pool) are written as empty CSV cells or
    JSON nulls.

    Args:
        report: The copy-synthesis or sweep report.
        path: Destination path.
        format: `csv`, or `json` with the same fields.

    Returns:
        Path: The written path.
    """
    path = Path(path)
    kind, columns = _report_kind(report)
    rows = report.rows()
    if format == "csv":
        with path.open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_format_cell(row[c]) for c in columns])
    elif format == "json":
        document = {
            "kind": kind,
            "columns": list(columns),
            "rows": [{c: _json_cell(row[c]) for c in columns} for row in rows],
        }
        path.write_text(json.dumps(document, indent=2, allow_nan=False))
    else:
        raise ValueError(f"Unknown report format '{format}'; expected csv or json.")
    return path


def _parse_cell(column: str, value: Any) -> Any:
    if column in ("parameter", "manipulated"):
        return value
    if value == "" or value is None:
        return None
    if column == "n_frames":
        return int(value)
    return float(value)


def read_report(path: str | Path) -> list[dict[str, Any]]:
    """Reads the rows of a CSV or JSON report.

    Args:
        path: A file written by `write_report`.

    Returns:
        list[dict[str, Any]]: Rows with numeric cells parsed; empty cells
        become None.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        document = json.loads(path.read_text())
        return [
            {c: _parse_cell(c, row[c]) for c in document["columns"]}
            for row in document["rows"]
        ]
    with path.open(newline="") as f:
        return [
            {c: _parse_cell(c, v) for c, v in row.items()} for row in csv.DictReader(f)
        ]
