"""
Input validation utilities for the bone-length attack toolkit.
Provides checks for arrays, numeric ranges and configuration values.
"""

from typing import Any, Iterable, Optional, Sequence, Tuple

import numpy as np

from utils.error_handling import (
    ConfigurationError,
    DimensionMismatchError,
    ValidationError,
)


class ArrayValidator:
    """Validator for numeric arrays."""

    def as_float_array(self, value: Any, name: str) -> np.ndarray:
        """Convert to a float64 array, raising ValidationError on bad input."""
        try:
            array = np.asarray(value, dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise ValidationError(
                message=f"'{name}' is not numeric: {e}",
                field=name,
                recovery_suggestions=["Check the nested array structure"],
            )
        return array

    def require_finite(self, array: np.ndarray, name: str):
        """Raise ValidationError if any entry is NaN or infinite."""
        if not np.all(np.isfinite(array)):
            bad = int(np.size(array) - np.count_nonzero(np.isfinite(array)))
            raise ValidationError(
                message=f"'{name}' contains {bad} non-finite entries",
                field=name,
                recovery_suggestions=["Remove NaN/Inf values from the input"],
            )

    def require_shape(
        self, array: np.ndarray, shape: Sequence[Optional[int]], name: str
    ):
        """
        Check an array shape; None entries in ``shape`` match any size.

        Raises:
            DimensionMismatchError: if rank or a fixed axis differs
        """
        if array.ndim != len(shape) or any(
            want is not None and got != want for got, want in zip(array.shape, shape)
        ):
            expected = "x".join("*" if s is None else str(s) for s in shape)
            raise DimensionMismatchError(
                message=f"'{name}' has shape {array.shape}, expected {expected}",
                context={"field": name},
            )


class RangeValidator:
    """Validator for scalar configuration values."""

    def require_range(
        self,
        value: float,
        name: str,
        low: Optional[float] = None,
        high: Optional[float] = None,
        closed: Tuple[bool, bool] = (True, True),
    ):
        """Raise ConfigurationError unless low <= value <= high (openness per side)."""
        if not np.isfinite(value):
            raise ConfigurationError(message=f"{name} must be finite, got {value}")

        low_ok = low is None or (value >= low if closed[0] else value > low)
        high_ok = high is None or (value <= high if closed[1] else value < high)
        if not (low_ok and high_ok):
            left = "[" if closed[0] else "("
            right = "]" if closed[1] else ")"
            raise ConfigurationError(
                message=f"{name}={value} outside {left}{low}, {high}{right}",
                recovery_suggestions=[f"Choose {name} inside the allowed range"],
            )

    def require_positive_int(self, value: int, name: str, minimum: int = 1):
        """Raise ConfigurationError unless value is an integer >= minimum."""
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise ConfigurationError(message=f"{name} must be an integer")
        if value < minimum:
            raise ConfigurationError(message=f"{name} must be >= {minimum}, got {value}")

    def require_choice(self, value: Any, name: str, choices: Iterable[Any]):
        """Raise ConfigurationError unless value is one of ``choices``."""
        options = list(choices)
        if value not in options:
            raise ConfigurationError(
                message=f"{name}={value!r} not in {options}",
                recovery_suggestions=[f"Use one of: {', '.join(map(str, options))}"],
            )


array_validator = ArrayValidator()
range_validator = RangeValidator()
