from shared.utils.exceptions import (
    ValidationException,
    DataException,
    InsufficientDataException,
    AlignmentException,
    NumericalException,
)


# ========================
# Series Service Base Exceptions
# ========================

class SeriesServiceException(DataException):
    """Base exception for series operations"""
    default_code = 'series_service_error'
    default_detail = 'Series operation failed'


# ========================
# Transform Exceptions
# ========================

class DomainErrorException(SeriesServiceException):
    """Log transform applied to a nonpositive value"""
    default_code = 'domain_error'
    default_detail = 'Value outside the domain of the transform'


class DegenerateSeriesException(SeriesServiceException):
    """Zero-variance series where a scale is required"""
    default_code = 'degenerate_series'
    default_detail = 'Series has zero variance'


class SeriesAlignmentException(AlignmentException):
    default_code = 'series_alignment_error'
    default_detail = 'Series have no common date range'


class SeriesTooShortException(InsufficientDataException):
    default_code = 'series_too_short'
    default_detail = 'Series is too short for this operation'


# ========================
# Disaggregation Exceptions
# ========================

class CollinearityException(NumericalException):
    """Singular regressor cross-product in the Chow-Lin regression"""
    default_code = 'collinearity'
    default_detail = 'Regressors are collinear'


class IndicatorCoverageException(SeriesServiceException):
    default_code = 'indicator_coverage'
    default_detail = 'Indicator does not cover the annual sample'


class LengthMismatchException(ValidationException):
    default_code = 'length_mismatch'
    default_detail = 'Series lengths differ'


# ========================
# Factor Exceptions
# ========================

class FactorCountException(ValidationException):
    default_code = 'factor_count_out_of_range'
    default_detail = 'Requested number of factors is out of range'


class UnknownClassException(SeriesServiceException):
    default_code = 'unknown_predictor_class'
    default_detail = 'Unknown predictor class tag'


class InvalidWindowException(ValidationException):
    default_code = 'invalid_window'
    default_detail = 'Invalid moving-average window'


# ========================
# Synthetic Data Exceptions
# ========================

class NonStationaryConfigException(ValidationException):
    default_code = 'nonstationary_config'
    default_detail = 'Synthetic DGP is not stationary'
