from shared.utils.exceptions import (
    ValidationException,
    DataException,
    AlignmentException,
    IncompleteRunException,
    NumericalException,
)


# ========================
# Backtest Exceptions
# ========================

class BacktestPlanException(ValidationException):
    default_code = 'invalid_backtest_plan'
    default_detail = 'Invalid backtest plan'


class RecordFormatException(DataException):
    default_code = 'record_format_error'
    default_detail = 'Malformed forecast record file'


class RecordAlignmentException(AlignmentException):
    """Model and benchmark records do not cover the same origins"""
    default_code = 'record_alignment_error'
    default_detail = 'Forecast records are not aligned with the benchmark'


# ========================
# Scoring Exceptions
# ========================

class ZeroBenchmarkException(NumericalException):
    default_code = 'zero_benchmark_rmsfe'
    default_detail = 'Benchmark RMSFE is zero'


class GridMismatchException(ValidationException):
    default_code = 'quantile_grid_mismatch'
    default_detail = 'Quantile levels are not the j/J grid'


class UnknownRegionException(ValidationException):
    default_code = 'unknown_region'
    default_detail = "Region must be 'center', 'right' or 'left'"


class ScoreInputException(ValidationException):
    default_code = 'score_input_error'
    default_detail = 'Score inputs have mismatched or empty lengths'


# ========================
# Test Statistic Exceptions
# ========================

class UndefinedTestException(NumericalException):
    """Zero variance or degenerate sign margins"""
    default_code = 'undefined_test'
    default_detail = 'Test statistic is undefined for this sample'


class ShortSampleException(ValidationException):
    default_code = 'test_sample_too_short'
    default_detail = 'Sample too short for the test'


class InvalidFluctuationWindowException(ValidationException):
    default_code = 'invalid_fluctuation_window'
    default_detail = 'Fluctuation window must be odd and no longer than the sample'


# ========================
# Monitoring Exceptions
# ========================

class InsufficientHistoryException(DataException):
    default_code = 'insufficient_history'
    default_detail = 'Not enough trailing observations at the origin'


class InvalidOverlapException(ValidationException):
    default_code = 'invalid_overlap'
    default_detail = 'Months to year end must lie in 1..12'


# ========================
# Run Directory Exceptions
# ========================

class MissingStageOutputException(IncompleteRunException):
    default_code = 'missing_stage_output'
    default_detail = 'A required stage output is missing from the run directory'
