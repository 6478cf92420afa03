"""
Unit tests for utility modules (validators, exceptions).
"""

import os

import pytest
from c3sim.utils.validators import (
    parse_json,
    read_text,
    validate_count,
    validate_fields,
    validate_fraction,
    validate_non_negative,
    validate_number,
    validate_positive,
    write_text_atomic,
)
from c3sim.utils.exceptions import (
    C3Error,
    CalibrationError,
    ConfigFileError,
    ConfigParseError,
    IncompleteCoverageError,
    InvariantViolationError,
    MalformedTableError,
    PlanValidationError,
    SelectorSyntaxError,
    UnknownScenarioError,
    WorkConservationError,
)


class TestValidators:
    """Test validator functions."""

    def test_validate_count_accepts_ints(self):
        """Test integer counts pass through unchanged."""
        assert validate_count(8, "gpus") == 8
        assert validate_count(0, "payload") == 0

    def test_validate_count_rejects_bool(self):
        """Test booleans are not counts."""
        with pytest.raises(InvariantViolationError):
            validate_count(True, "gpus")

    def test_validate_count_rejects_float_and_small(self):
        """Test floats and values below the minimum raise error."""
        with pytest.raises(InvariantViolationError):
            validate_count(8.0, "gpus")
        with pytest.raises(InvariantViolationError):
            validate_count(0, "gpus", minimum=1)

    def test_validate_positive(self):
        """Test strictly positive numbers."""
        assert validate_positive(5.3e12, "hbm") == 5.3e12
        for bad in (0, -1.0, "3"):
            with pytest.raises(InvariantViolationError):
                validate_positive(bad, "hbm")

    def test_non_finite_rejected(self):
        """Test infinities and NaN fail every numeric validator."""
        for bad in (float("inf"), float("-inf"), float("nan")):
            for validator in (validate_number, validate_positive, validate_non_negative, validate_fraction):
                with pytest.raises(InvariantViolationError):
                    validator(bad, "hbm")

    def test_validate_non_negative(self):
        """Test zero is allowed, negatives are not."""
        assert validate_non_negative(0, "overhead") == 0.0
        with pytest.raises(InvariantViolationError):
            validate_non_negative(-1e-6, "overhead")

    def test_validate_fraction(self):
        """Test the (0, 1] interval."""
        assert validate_fraction(1, "efficiency") == 1.0
        assert validate_fraction(0.7, "efficiency") == 0.7
        for bad in (0, 1.01, -0.5):
            with pytest.raises(InvariantViolationError):
                validate_fraction(bad, "efficiency")

    def test_validate_fields_missing_and_unknown(self):
        """Test missing required and unexpected keys raise error."""
        validate_fields({"a": 1, "b": 2}, ["a"], "doc", optional=["b"])
        with pytest.raises(InvariantViolationError) as exc:
            validate_fields({"b": 2}, ["a"], "doc", optional=["b"])
        assert exc.value.field == "a"
        with pytest.raises(InvariantViolationError) as exc:
            validate_fields({"a": 1, "zzz": 2}, ["a"], "doc")
        assert exc.value.field == "zzz"

    def test_validate_fields_not_object(self):
        """Test a non-object document is a parse error."""
        with pytest.raises(ConfigParseError):
            validate_fields([1, 2], ["a"], "doc")

    def test_parse_json_error(self):
        """Test malformed JSON raises ConfigParseError."""
        with pytest.raises(ConfigParseError):
            parse_json("{not json", "doc")


class TestFiles:
    """Test file helpers."""

    def test_read_missing_file_names_path(self, tmp_path):
        """Test reading a missing file reports its path."""
        path = tmp_path / "nope.json"
        with pytest.raises(ConfigFileError) as exc:
            read_text(path)
        assert str(path) in str(exc.value)

    def test_write_text_atomic(self, tmp_path):
        """Test atomic write leaves only the final file."""
        path = tmp_path / "out.csv"
        write_text_atomic(path, "a,b\n1,2\n")
        assert path.read_text() == "a,b\n1,2\n"
        assert not os.path.exists(str(path) + ".tmp")

    def test_read_invalid_utf8(self, tmp_path):
        """Test undecodable bytes raise ConfigParseError naming the file."""
        path = tmp_path / "node.json"
        path.write_bytes(b'{"gpus_per_node": 8, "x": "\xff\xfe"}')
        with pytest.raises(ConfigParseError) as exc:
            read_text(path)
        assert exc.value.source == str(path)
        assert exc.value.exit_code == 2

    def test_write_text_atomic_cleans_up_on_failure(self, tmp_path):
        """Test a failed rename leaves no temporary file behind."""
        target = tmp_path / "out"
        target.mkdir()
        with pytest.raises(ConfigFileError):
            write_text_atomic(target, "x")
        assert not os.path.exists(str(target) + ".tmp")
        assert target.is_dir()

    def test_write_text_atomic_bad_directory(self, tmp_path):
        """Test writing into a missing directory raises ConfigFileError."""
        with pytest.raises(ConfigFileError):
            write_text_atomic(tmp_path / "missing" / "out.csv", "x")


class TestExceptions:
    """Test exception hierarchy."""

    def test_inheritance(self):
        """Test all exceptions inherit from C3Error."""
        assert issubclass(ConfigFileError, C3Error)
        assert issubclass(IncompleteCoverageError, PlanValidationError)
        assert issubclass(PlanValidationError, C3Error)

    def test_exit_codes(self):
        """Test each family maps to its exit code."""
        assert ConfigFileError("x", "missing").exit_code == 2
        assert MalformedTableError(3, "bad").exit_code == 2
        assert SelectorSyntaxError("bad").exit_code == 2
        assert UnknownScenarioError("cb9").exit_code == 3
        assert IncompleteCoverageError(1, 2).exit_code == 4
        assert CalibrationError("diverged").exit_code == 5

    def test_error_attributes(self):
        """Test exceptions carry structured attributes."""
        error = IncompleteCoverageError(rank=3, slot=5)
        assert error.rank == 3
        assert error.slot == 5

        error = WorkConservationError("gemm", 2.0, 2.1)
        assert error.kernel == "gemm"
        assert error.relative_error == pytest.approx(0.05)

    def test_selector_error_shows_text(self):
        """Test selector errors include the offending text."""
        error = SelectorSyntaxError("unexpected token", "size >>= 1G")
        assert "size >>= 1G" in str(error)
        assert error.message == "unexpected token"
