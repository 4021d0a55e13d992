"""
Unit tests for shared/utils/exceptions.py
Tests exit codes of the exception families and the exception report
"""
import logging

import numpy as np
import pytest

from shared.utils.exceptions import (
    EXIT_CONFIG_ERROR,
    EXIT_DATA_ERROR,
    EXIT_NUMERICAL_ERROR,
    AlignmentException,
    BaseServiceException,
    ConfigurationException,
    DataFormatException,
    DivergenceException,
    EstimationException,
    IncompleteRunException,
    InsufficientDataException,
    MissingDataFileException,
    NumericalException,
    UnsupportedModelException,
    ValidationException,
    format_exception_report,
)


@pytest.mark.unit
class TestBaseServiceException:
    """Test base exception class"""

    def test_default_initialization(self):
        """Test exception with default values"""
        exc = BaseServiceException()
        assert exc.code == "service_error"
        assert exc.detail == "A service error occurred"
        assert exc.exit_code == 1
        assert exc.context == {}

    def test_custom_detail_and_code(self):
        """Test exception with custom detail and code"""
        exc = BaseServiceException(detail="Custom error message", code="custom_code")
        assert exc.detail == "Custom error message"
        assert exc.code == "custom_code"

    def test_custom_exit_code_is_per_instance(self):
        """Test an explicit exit code does not leak into the class"""
        exc = DataFormatException(exit_code=9)
        assert exc.exit_code == 9
        assert DataFormatException().exit_code == EXIT_DATA_ERROR

    def test_str_includes_location(self):
        """Test module and op from the context are appended to the message"""
        exc = EstimationException("Cholesky failed", context={'module': 'models', 'op': 'fit_niw'})
        assert str(exc) == "Cholesky failed [models.fit_niw]"
        assert exc.where == "models.fit_niw"

    def test_str_without_location(self):
        """Test a bare message is left alone"""
        assert str(ValidationException("bad")) == "bad"
        assert ValidationException("bad", context={'op': 'parse'}).where == 'parse'

    def test_to_dict(self):
        """Test the error dict is JSON-friendly"""
        exc = InsufficientDataException(
            "Too short", context={'module': 'timeseries_core', 'n': np.int64(3), 'months': ('2020-01', 5)}
        )
        payload = exc.to_dict()['error']
        assert payload['code'] == 'insufficient_data'
        assert payload['exit_code'] == EXIT_DATA_ERROR
        assert payload['type'] == 'InsufficientDataException'
        assert payload['context'] == {'module': 'timeseries_core', 'n': '3', 'months': ['2020-01', 5]}


@pytest.mark.unit
class TestExitCodes:
    """Test the three exception families map to their exit codes"""

    @pytest.mark.parametrize('exc_class', [ConfigurationException, ValidationException, UnsupportedModelException])
    def test_configuration_family(self, exc_class):
        """Test configuration problems exit with 2"""
        assert exc_class().exit_code == EXIT_CONFIG_ERROR == 2

    @pytest.mark.parametrize('exc_class', [
        MissingDataFileException, DataFormatException, InsufficientDataException,
        AlignmentException, IncompleteRunException,
    ])
    def test_data_family(self, exc_class):
        """Test data problems exit with 3"""
        assert exc_class().exit_code == EXIT_DATA_ERROR == 3

    @pytest.mark.parametrize('exc_class', [NumericalException, EstimationException, DivergenceException])
    def test_numerical_family(self, exc_class):
        """Test numerical failures exit with 4"""
        assert exc_class().exit_code == EXIT_NUMERICAL_ERROR == 4

    def test_validation_is_configuration(self):
        """Test invalid arguments can be caught as configuration errors"""
        with pytest.raises(ConfigurationException):
            raise ValidationException("window must be odd")


@pytest.mark.unit
class TestFormatExceptionReport:
    """Test exception logging and the returned error dict"""

    def test_numerical_logged_as_error(self, caplog):
        """Test numerical failures are logged at ERROR"""
        with caplog.at_level(logging.DEBUG, logger='shared.utils.exceptions'):
            payload = format_exception_report(DivergenceException("Kalman filter diverged"), {'run_id': 'abc'})
        assert payload['error']['exit_code'] == 4
        assert caplog.records[-1].levelno == logging.ERROR
        assert caplog.records[-1].run_id == 'abc'

    def test_data_logged_as_warning(self, caplog):
        """Test config and data errors are logged at WARNING"""
        with caplog.at_level(logging.DEBUG, logger='shared.utils.exceptions'):
            format_exception_report(MissingDataFileException("Data file not found: x.csv"))
        assert caplog.records[-1].levelno == logging.WARNING

    def test_unexpected_exception(self, caplog):
        """Test foreign exceptions are reported without their message"""
        with caplog.at_level(logging.DEBUG, logger='shared.utils.exceptions'):
            payload = format_exception_report(RuntimeError("secret detail"))
        assert payload['error']['code'] == 'internal_error'
        assert 'secret detail' not in payload['error']['message']
        assert caplog.records[-1].levelno == logging.ERROR
