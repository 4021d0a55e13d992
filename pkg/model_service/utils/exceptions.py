from shared.utils.exceptions import (
    UnsupportedModelException,
    ValidationException,
    InsufficientDataException,
    NumericalException,
    EstimationException,
    DivergenceException,
)


# ========================
# Model Specification Exceptions
# ========================

class UnsupportedOrderException(UnsupportedModelException):
    """ARIMA order outside (0|1, 1, 0|1)"""
    default_code = 'unsupported_order'
    default_detail = 'unsupported order'


class DimensionMismatchException(ValidationException):
    default_code = 'dimension_mismatch'
    default_detail = 'Data dimensions do not match the model specification'


class ModelDataException(InsufficientDataException):
    default_code = 'model_insufficient_data'
    default_detail = 'Not enough observations to estimate the model'


# ========================
# Estimation Exceptions
# ========================

class SingularDesignException(NumericalException):
    """Moment matrix of the regressors cannot be inverted"""
    default_code = 'singular_design'
    default_detail = 'Singular design matrix'


class ArimaConvergenceException(EstimationException):
    default_code = 'arima_not_converged'
    default_detail = 'ARIMA likelihood optimization did not converge'


class SamplerDivergenceException(DivergenceException):
    default_code = 'sv_divergence'
    default_detail = 'Log-volatility path left the admissible range'


# ========================
# Forecast Exceptions
# ========================

class ExplosiveForecastException(DivergenceException):
    default_code = 'explosive_forecast'
    default_detail = 'Forecast path exploded'


class ForecastOverflowException(NumericalException):
    default_code = 'forecast_overflow'
    default_detail = 'Level conversion overflowed'
