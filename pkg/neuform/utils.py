from __future__ import annotations

from collections.abc import Iterable
from difflib import get_close_matches

import numpy as np


def lookup_name(name: str, choices: Iterable[str], kind: str = "name") -> str:
    """
    Look up a name case-insensitively among choices.

    Args:
        name: The name to look up.
        choices: The valid names.
        kind: What the name refers to, used in the error message.

    Returns:
        The matching choice.
    """
    lower_choices = {choice.lower(): choice for choice in choices}
    try:
        return lower_choices[name.strip().lower()]
    except KeyError:
        matches = get_close_matches(name, lower_choices.values(), n=5, cutoff=0.1)
        if matches:
            raise ValueError(
                f"Unknown {kind} '{name}'. Did you mean one of these: {matches}?"
            )
        else:
            raise ValueError(f"Unknown {kind} '{name}'.")


def interpolate_gaps(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """
    Fill invalid entries by linear interpolation over the index.

    Entries before the first or after the last valid entry take the
    nearest valid value.

    Args:
        values: A 1-D array of values.
        valid: A boolean mask of the entries to keep.

    Returns:
        A new array with every entry filled.
    """
    values = np.asarray(values, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if values.shape != valid.shape:
        raise ValueError(
            f"Expected values and mask of equal shape; "
            f"received {values.shape} and {valid.shape}."
        )
    if not valid.any():
        raise ValueError("Cannot interpolate without any valid entry.")
    if valid.all():
        return values.copy()
    index = np.arange(len(values))
    return np.interp(index, index[valid], values[valid])


def frame_count(n_samples: int, win_length: int, hop_length: int) -> int:
    """
    Number of full analysis frames that fit in a signal, without padding.

    Args:
        n_samples: Signal length in samples.
        win_length: Window length in samples.
        hop_length: Hop length in samples.

    Returns:
        The frame count.
    """
    if n_samples < win_length:
        return 0
    return 1 + (n_samples - win_length) // hop_length


def format_float(value: float) -> str:
    """
    Format a float with 9 significant digits.

    Args:
        value: The value to format.

    Returns:
        The formatted string.
    """
    return f"{float(value):.9g}"


def round_float(value: float) -> float:
    """
    Round a float to 9 significant digits.

    Args:
        value: The value to round.

    Returns:
        The value as it reads back from `format_float`.
    """
    return float(format_float(value))
