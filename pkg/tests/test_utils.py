import numpy as np
import pytest

from neuform.utils import (
    format_float,
    frame_count,
    interpolate_gaps,
    lookup_name,
    round_float,
)

CHOICES = ["vuv", "log_f0", "f1", "f2", "tilt"]


class TestLookupName:
    def test_valid(self):
        assert lookup_name("tilt", CHOICES) == "tilt"

    def test_mixed_case(self):
        assert lookup_name("LoG_F0", CHOICES) == "log_f0"

    def test_whitespace(self):
        assert lookup_name(" f1 ", CHOICES) == "f1"

    def test_invalid(self):
        with pytest.raises(ValueError, match="Unknown parameter 'xyz"):
            lookup_name("xyz", CHOICES, kind="parameter")

    def test_suggestion(self):
        with pytest.raises(ValueError, match="Did you mean one of these"):
            lookup_name("tlt", CHOICES)

    def test_non_string_input(self):
        with pytest.raises(AttributeError):
            lookup_name(123, CHOICES)


class TestInterpolateGaps:
    def test_midpoint(self):
        filled = interpolate_gaps(
            np.array([5.0, np.nan, 5.2]), np.array([True, False, True])
        )
        np.testing.assert_allclose(filled, [5.0, 5.1, 5.2])

    def test_edge_hold(self):
        filled = interpolate_gaps(
            np.array([np.nan, np.nan, 4.9, 5.0, np.nan]),
            np.array([False, False, True, True, False]),
        )
        np.testing.assert_array_equal(filled, [4.9, 4.9, 4.9, 5.0, 5.0])

    def test_all_valid_copies(self):
        values = np.array([1.0, 2.0])
        filled = interpolate_gaps(values, np.ones(2, dtype=bool))
        np.testing.assert_array_equal(filled, values)
        assert filled is not values

    def test_no_valid(self):
        with pytest.raises(ValueError, match="without any valid entry"):
            interpolate_gaps(np.zeros(3), np.zeros(3, dtype=bool))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="equal shape"):
            interpolate_gaps(np.zeros(3), np.ones(2, dtype=bool))


class TestFrameCount:
    @pytest.mark.parametrize(
        "n_samples, expected", [(22050, 83), (1024, 1), (1023, 0), (0, 0)]
    )
    def test_counts(self, n_samples, expected):
        assert frame_count(n_samples, 1024, 256) == expected


class TestFormatFloat:
    def test_significant_digits(self):
        assert format_float(1 / 3) == "0.333333333"

    def test_integer_valued(self):
        assert format_float(2.0) == "2"

    def test_round_float_reads_back(self):
        assert round_float(np.pi) == float(format_float(np.pi))
