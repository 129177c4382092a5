"""
Tests for the error hierarchy, the centralized handler and the validators.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from utils.error_handling import (
    ApplicationError,
    BadBoneIndexError,
    ConfigurationError,
    CycleError,
    DimensionMismatchError,
    ErrorCategory,
    ErrorHandler,
    ErrorSeverity,
    FileSystemError,
    NonFiniteGradientError,
    NonFiniteLossError,
    NumericalError,
    PreprocessError,
    PreprocessingError,
    TooFewFramesError,
    TopologyError,
    ValidationError,
    with_error_handling,
)
from utils.validation import array_validator, range_validator


class TestErrorHierarchy:
    """Categories and extra attributes of the error classes."""

    def test_topology_errors(self):
        error = CycleError("cycle through joint 4", joint=4)
        assert isinstance(error, TopologyError)
        assert error.category == ErrorCategory.TOPOLOGY
        assert error.error_code == "TOPO_CYCLE"
        assert error.joint == 4
        assert BadBoneIndexError("bad", bone=2).bone == 2

    def test_numerical_errors_keep_their_stage(self):
        assert NonFiniteLossError("nan loss").category == ErrorCategory.TRAINING
        assert NonFiniteGradientError("nan grad").category == ErrorCategory.ATTACK
        assert isinstance(NonFiniteGradientError("x"), NumericalError)

    def test_preprocess_error_lists_failures(self):
        error = PreprocessError("2 samples failed", failures=[("a", "short"), ("b", "nan")])
        assert isinstance(error, PreprocessingError)
        assert error.failures == [("a", "short"), ("b", "nan")]
        assert error.context["failures"] == ["a: short", "b: nan"]
        assert TooFewFramesError("short").category == ErrorCategory.PREPROCESSING

    def test_user_message_defaults_to_message(self):
        error = ConfigurationError("bad epsilon", recovery_suggestions=["use 0.1"])
        assert error.user_message == "bad epsilon"
        assert error.recovery_suggestions == ["use 0.1"]
        assert error.severity == ErrorSeverity.HIGH


class TestErrorHandler:
    """Test the centralized error handler."""

    def setup_method(self):
        self.error_handler = ErrorHandler()

    def test_handle_application_error(self):
        error = ValidationError(
            message="Label 9 outside [0, 2]",
            field="label",
            recovery_suggestions=["Remap the labels"],
        )
        result = self.error_handler.handle_error(error)

        assert not result["success"]
        assert result["error"]["category"] == "validation"
        assert result["error"]["severity"] == "low"
        assert "Remap the labels" in result["error"]["recovery_suggestions"]
        assert result["technical_details"]["exception_type"] == "ValidationError"

    @pytest.mark.parametrize(
        "error, category",
        [
            (FileNotFoundError("missing.json"), "file_system"),
            (FloatingPointError("overflow in exp"), "numerical"),
            (ValueError("bad value"), "validation"),
            (KeyError("parents"), "validation"),
            (RuntimeError("unexpected"), "numerical"),
        ],
    )
    def test_generic_exceptions_are_converted(self, error, category):
        result = self.error_handler.handle_error(error)
        assert result["error"]["category"] == category
        assert type(error).__name__ in result["technical_details"]["original_message"]

    def test_context_is_merged(self):
        result = self.error_handler.handle_error(
            DimensionMismatchError("shape"), context={"sample_id": "m3"}
        )
        assert result["error"]["context"]["sample_id"] == "m3"

    def test_error_is_logged(self, caplog):
        with caplog.at_level(logging.WARNING):
            self.error_handler.handle_error(
                NonFiniteLossError("loss is nan"), log_level=logging.WARNING
            )
        assert "[TRAINING] loss is nan" in caplog.text

    def test_error_statistics_tracking(self):
        self.error_handler.handle_error(ValueError("Error 1"))
        self.error_handler.handle_error(ValidationError("Error 2", "field"))
        self.error_handler.handle_error(ConfigurationError("Error 3"))

        stats = self.error_handler.get_error_statistics()
        assert stats["total_errors"] == 3
        assert stats["error_counts"]["validation:ValidationError"] == 2
        assert stats["error_counts"]["configuration:ConfigurationError"] == 1
        assert len(stats["recent_errors"]) == 3

        self.error_handler.reset()
        assert self.error_handler.get_error_statistics()["total_errors"] == 0

    def test_history_is_bounded(self):
        self.error_handler.max_error_history = 5
        for index in range(8):
            self.error_handler.handle_error(ValidationError(f"Error {index}"))
        assert len(self.error_handler.last_errors) == 5
        assert self.error_handler.last_errors[0]["message"] == "Error 3"

    def test_counts_are_exact_across_threads(self):
        def report_many(_):
            for index in range(200):
                self.error_handler.handle_error(
                    NonFiniteGradientError(f"gradient {index}"), log_level=logging.DEBUG
                )

        with ThreadPoolExecutor(max_workers=8) as pool:
            list(pool.map(report_many, range(8)))
        stats = self.error_handler.get_error_statistics()
        assert stats["total_errors"] == 1600
        assert len(self.error_handler.last_errors) == self.error_handler.max_error_history


class TestErrorHandlingDecorator:
    """Test the with_error_handling decorator."""

    def test_successful_call(self):
        @with_error_handling(category=ErrorCategory.ATTACK)
        def double(x):
            return 2 * x

        assert double(4) == 8

    def test_application_errors_pass_through(self):
        @with_error_handling(category=ErrorCategory.FILE_SYSTEM)
        def load():
            raise FileSystemError("absent", file_path="x.json")

        with pytest.raises(FileSystemError) as info:
            load()
        assert info.value.file_path == "x.json"

    def test_other_errors_are_wrapped(self):
        @with_error_handling(category=ErrorCategory.FILE_SYSTEM, severity=ErrorSeverity.HIGH)
        def load_topology(path):
            raise KeyError("joints")

        with pytest.raises(ApplicationError) as info:
            load_topology("topo.json")
        error = info.value
        assert error.category == ErrorCategory.FILE_SYSTEM
        assert error.severity == ErrorSeverity.HIGH
        assert "load_topology" in error.message
        assert error.context["function"] == "load_topology"
        assert isinstance(error.__cause__, KeyError)


class TestArrayValidator:
    def test_as_float_array(self):
        array = array_validator.as_float_array([[1, 2], [3, 4]], "coords")
        assert array.dtype == np.float64
        with pytest.raises(ValidationError) as info:
            array_validator.as_float_array([[1, 2], [3]], "coords")
        assert info.value.field == "coords"

    def test_require_finite(self):
        array_validator.require_finite(np.ones(3), "beta")
        with pytest.raises(ValidationError) as info:
            array_validator.require_finite(np.array([1.0, np.nan, np.inf]), "beta")
        assert "2 non-finite" in info.value.message

    def test_require_shape(self):
        array_validator.require_shape(np.zeros((4, 25, 3)), (None, 25, 3), "coords")
        with pytest.raises(DimensionMismatchError):
            array_validator.require_shape(np.zeros((4, 24, 3)), (None, 25, 3), "coords")
        with pytest.raises(DimensionMismatchError):
            array_validator.require_shape(np.zeros((25, 3)), (None, 25, 3), "coords")


class TestRangeValidator:
    def test_require_range(self):
        range_validator.require_range(0.5, "epsilon", 0.0, 1.0, closed=(False, False))
        range_validator.require_range(0.0, "epsilon", 0.0, 1.0, closed=(True, False))
        for bad in (0.0, 1.0, float("nan")):
            with pytest.raises(ConfigurationError):
                range_validator.require_range(bad, "epsilon", 0.0, 1.0, closed=(False, False))

    def test_require_positive_int(self):
        range_validator.require_positive_int(3, "epochs")
        range_validator.require_positive_int(0, "seed", minimum=0)
        for bad in (0, True, 2.0):
            with pytest.raises(ConfigurationError):
                range_validator.require_positive_int(bad, "epochs")

    def test_require_choice(self):
        range_validator.require_choice("pgd", "optimizer", ["pgd", "adam"])
        with pytest.raises(ConfigurationError) as info:
            range_validator.require_choice("sgd", "optimizer", ["pgd", "adam"])
        assert "adam" in info.value.recovery_suggestions[0]
