from typing import Optional, Dict, Any
import logging

logger = logging.getLogger(__name__)

# Process exit codes used by the management commands
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_NUMERICAL_ERROR = 4


class BaseServiceException(Exception):
    """Base exception for all service exceptions"""
    default_code = "service_error"
    default_detail = "A service error occurred"
    exit_code = 1

    def __init__(
        self,
        detail: Optional[str] = None,
        code: Optional[str] = None,
        exit_code: Optional[int] = None,
        context: Optional[Dict[str, Any]] = None,
    ):
        resolved_code = code or getattr(self, "default_code", "error")
        resolved_detail = detail or getattr(self, "default_detail", "An error occurred")

        # Only override the class-level exit code when explicitly provided
        if exit_code is not None:
            self.exit_code = exit_code

        super().__init__(resolved_detail)
        self.code = resolved_code
        self.detail = resolved_detail
        self.context = context or {}

    def __str__(self) -> str:
        where = self.where
        return f"{self.detail} [{where}]" if where else str(self.detail)

    @property
    def where(self) -> str:
        """module.op location carried in the context, if any"""
        module = self.context.get("module")
        op = self.context.get("op")
        if module and op:
            return f"{module}.{op}"
        return module or op or ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": {
                "code": getattr(self, "code", "error"),
                "message": str(self.detail),
                "exit_code": self.exit_code,
                "context": _jsonable(self.context),
                "type": self.__class__.__name__,
            }
        }


def _jsonable(context: Dict[str, Any]) -> Dict[str, Any]:
    clean = {}
    for key, value in context.items():
        if isinstance(value, (str, int, float, bool)) or value is None:
            clean[key] = value
        elif isinstance(value, (list, tuple)):
            clean[key] = [v if isinstance(v, (str, int, float, bool)) else str(v) for v in value]
        else:
            clean[key] = str(value)
    return clean


# ========================
# Configuration & Validation Exceptions
# ========================
class ConfigurationException(BaseServiceException):
    default_code = 'configuration_error'
    default_detail = 'Invalid run configuration'
    exit_code = EXIT_CONFIG_ERROR

class ValidationException(ConfigurationException):
    default_code = 'validation_error'
    default_detail = 'Invalid argument'

class UnsupportedModelException(ConfigurationException):
    default_code = 'unsupported_model'
    default_detail = 'Unsupported model specification'

# ========================
# Data Exceptions
# ========================
class DataException(BaseServiceException):
    default_code = 'data_error'
    default_detail = 'Input data error'
    exit_code = EXIT_DATA_ERROR

class MissingDataFileException(DataException):
    default_code = 'missing_data_file'
    default_detail = 'Required data file not found'

class DataFormatException(DataException):
    default_code = 'data_format_error'
    default_detail = 'Malformed data file'

class InsufficientDataException(DataException):
    default_code = 'insufficient_data'
    default_detail = 'Not enough observations'

class AlignmentException(DataException):
    default_code = 'alignment_error'
    default_detail = 'Series date ranges do not overlap'

class IncompleteRunException(DataException):
    default_code = 'incomplete_run'
    default_detail = 'Run directory is missing stage outputs'

# ========================
# Numerical Exceptions
# ========================
class NumericalException(BaseServiceException):
    default_code = 'numerical_error'
    default_detail = 'Numerical failure'
    exit_code = EXIT_NUMERICAL_ERROR

class EstimationException(NumericalException):
    default_code = 'estimation_failed'
    default_detail = 'Model estimation failed'

class DivergenceException(NumericalException):
    default_code = 'divergence'
    default_detail = 'Iteration diverged'


# ========================
# Exception Reporting
# ========================
def format_exception_report(exc: BaseException, context: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Log an exception at the appropriate level and return its error dict"""
    log_context = {
        'exception_type': exc.__class__.__name__,
        **(context or {}),
    }

    if isinstance(exc, BaseServiceException):
        if exc.exit_code >= EXIT_NUMERICAL_ERROR:
            logger.error(f"Numerical failure: {exc}", extra=log_context, exc_info=True)
        elif exc.exit_code >= EXIT_CONFIG_ERROR:
            logger.warning(f"Run error: {exc}", extra=log_context)
        else:
            logger.info(f"Service exception: {exc}", extra=log_context)
        return exc.to_dict()

    # Unexpected exceptions - always log as error
    logger.error(f"Unexpected exception: {exc}", extra=log_context, exc_info=True)
    return {
        "error": {
            "code": "internal_error",
            "message": "An unexpected error occurred",
            "exit_code": 1,
            "type": "UnexpectedException",
            "context": {},
        }
    }
