# shared/utils/run_config.py
"""
Run configuration.

A run is described by a flat key-value file in dotenv syntax::

    BACKTEST__FIRST_ESTIMATION_END=2017-12
    BACKTEST__MODELS=rw;bvar(1);bfavar(1,1)-sv
    PRIOR__LAMBDA_OVERALL=0.2

Keys are ``SECTION__KEY``. Anything not set in the file falls back to the
``CARBON_*`` defaults in Django settings. Values are coerced to the field
types of the section dataclasses and validated; any problem raises
``ConfigurationException`` (exit code 2).
"""
import dataclasses
import logging
import re
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from django.conf import settings
from dotenv import dotenv_values

from shared.utils.artifacts import sha256_json, to_jsonable
from shared.utils.exceptions import ConfigurationException

logger = logging.getLogger(__name__)

_MONTH_PATTERN = re.compile(r'^\d{4}-(0[1-9]|1[0-2])$')
PIPELINE_STAGES = ('ingest', 'interpolate', 'factors', 'backtest', 'score', 'monitor', 'report')


def _setting(name: str, default: Any = None) -> Any:
    return getattr(settings, name, default)


@dataclass(frozen=True)
class DataConfig:
    bundle_dir: Optional[str] = None

    @classmethod
    def from_settings(cls) -> 'DataConfig':
        return cls()

    def validate(self):
        pass


@dataclass(frozen=True)
class SeriesConfig:
    outlier_iqr_multiple: float = 20.0
    standardize_per_window: bool = True

    @classmethod
    def from_settings(cls) -> 'SeriesConfig':
        return cls(
            outlier_iqr_multiple=_setting('CARBON_OUTLIER_IQR_MULTIPLE', 20.0),
            standardize_per_window=_setting('CARBON_STANDARDIZE_PER_WINDOW', True),
        )

    def validate(self):
        if self.outlier_iqr_multiple <= 0:
            raise ConfigurationException("SERIES__OUTLIER_IQR_MULTIPLE must be positive")


@dataclass(frozen=True)
class DisaggConfig:
    constant: bool = True
    rho_bound: float = 0.99
    grid_step: float = 0.05

    @classmethod
    def from_settings(cls) -> 'DisaggConfig':
        return cls(
            constant=_setting('CARBON_CHOWLIN_CONSTANT', True),
            rho_bound=_setting('CARBON_CHOWLIN_RHO_BOUND', 0.99),
            grid_step=_setting('CARBON_CHOWLIN_GRID_STEP', 0.05),
        )

    def validate(self):
        if not 0 < self.rho_bound < 1:
            raise ConfigurationException("DISAGG__RHO_BOUND must lie in (0, 1)")
        if not 0 < self.grid_step < self.rho_bound:
            raise ConfigurationException("DISAGG__GRID_STEP must lie in (0, rho_bound)")


@dataclass(frozen=True)
class FactorConfig:
    standardize_factors: bool = False

    @classmethod
    def from_settings(cls) -> 'FactorConfig':
        return cls(standardize_factors=_setting('CARBON_STANDARDIZE_FACTORS', False))

    def validate(self):
        pass


@dataclass(frozen=True)
class PriorConfig:
    lambda_overall: float = 0.2
    lambda_cross: float = 0.5
    lambda_lagdecay: float = 2.0
    intercept_scale: float = 100.0
    own_mean_first_lag: float = 0.0
    strict_minnesota: bool = False
    aic_pmax: int = 12

    @classmethod
    def from_settings(cls) -> 'PriorConfig':
        return cls(
            lambda_overall=_setting('CARBON_LAMBDA_OVERALL', 0.2),
            lambda_cross=_setting('CARBON_LAMBDA_CROSS', 0.5),
            lambda_lagdecay=_setting('CARBON_LAMBDA_LAGDECAY', 2.0),
            intercept_scale=_setting('CARBON_INTERCEPT_SCALE', 100.0),
            own_mean_first_lag=_setting('CARBON_OWN_MEAN_FIRST_LAG', 0.0),
            strict_minnesota=_setting('CARBON_STRICT_MINNESOTA', False),
            aic_pmax=_setting('CARBON_AIC_PMAX', 12),
        )

    def validate(self):
        if self.lambda_overall <= 0 or self.lambda_lagdecay <= 0 or self.intercept_scale <= 0:
            raise ConfigurationException("PRIOR lambdas and intercept scale must be positive")
        if not 0 < self.lambda_cross <= 1:
            raise ConfigurationException("PRIOR__LAMBDA_CROSS must lie in (0, 1]")
        if self.aic_pmax < 1:
            raise ConfigurationException("PRIOR__AIC_PMAX must be at least 1")


@dataclass(frozen=True)
class SvConfig:
    draws: int = 5000
    burn: int = 2000
    thin: int = 1
    phi_mean: float = 0.95
    phi_sd: float = 0.04
    mu_var: float = 10.0
    sigma_shape: float = 5.0
    sigma_scale: float = 0.16
    b0_prior_var: float = 10.0
    log_offset: float = 1e-6
    state_sampler: str = 'ffbs'
    divergence_bound: float = 50.0

    @classmethod
    def from_settings(cls) -> 'SvConfig':
        return cls(
            draws=_setting('CARBON_SV_DRAWS', 5000),
            burn=_setting('CARBON_SV_BURN', 2000),
            thin=_setting('CARBON_SV_THIN', 1),
            phi_mean=_setting('CARBON_SV_PHI_MEAN', 0.95),
            phi_sd=_setting('CARBON_SV_PHI_SD', 0.04),
            mu_var=_setting('CARBON_SV_MU_VAR', 10.0),
            sigma_shape=_setting('CARBON_SV_SIGMA_SHAPE', 5.0),
            sigma_scale=_setting('CARBON_SV_SIGMA_SCALE', 0.16),
            b0_prior_var=_setting('CARBON_SV_B0_PRIOR_VAR', 10.0),
            log_offset=_setting('CARBON_SV_LOG_OFFSET', 1e-6),
            state_sampler=_setting('CARBON_SV_STATE_SAMPLER', 'ffbs'),
            divergence_bound=_setting('CARBON_SV_DIVERGENCE_BOUND', 50.0),
        )

    def validate(self):
        if self.draws <= 0 or self.burn <= 0 or self.thin <= 0:
            raise ConfigurationException("SV__DRAWS, SV__BURN and SV__THIN must be positive")
        if self.phi_sd <= 0 or self.mu_var <= 0 or self.sigma_shape <= 0 or self.sigma_scale <= 0:
            raise ConfigurationException("SV prior scales must be positive")
        if self.b0_prior_var <= 0 or self.log_offset <= 0:
            raise ConfigurationException("SV__B0_PRIOR_VAR and SV__LOG_OFFSET must be positive")
        if self.state_sampler not in ('ffbs', 'precision'):
            raise ConfigurationException("SV__STATE_SAMPLER must be 'ffbs' or 'precision'")


@dataclass(frozen=True)
class ArimaConfig:
    include_mean: bool = False
    max_iter: int = 500

    @classmethod
    def from_settings(cls) -> 'ArimaConfig':
        return cls(
            include_mean=_setting('CARBON_ARIMA_INCLUDE_MEAN', False),
            max_iter=_setting('CARBON_ARIMA_MAX_ITER', 500),
        )

    def validate(self):
        if self.max_iter < 10:
            raise ConfigurationException("ARIMA__MAX_ITER must be at least 10")


@dataclass(frozen=True)
class ForecastConfig:
    horizon: int = 12
    density: bool = True
    predictive_draws: int = 5000
    quantile_grid: int = 20
    draw_mean_point: bool = False
    blowup_bound: float = 10.0
    store_draws: bool = False

    @classmethod
    def from_settings(cls) -> 'ForecastConfig':
        return cls(
            horizon=_setting('CARBON_HORIZON', 12),
            predictive_draws=_setting('CARBON_PREDICTIVE_DRAWS', 5000),
            quantile_grid=_setting('CARBON_QUANTILE_GRID', 20),
            draw_mean_point=_setting('CARBON_DRAW_MEAN_POINT', False),
            blowup_bound=_setting('CARBON_BLOWUP_BOUND', 10.0),
        )

    def validate(self):
        if self.horizon < 1:
            raise ConfigurationException("FORECAST__HORIZON must be at least 1")
        if self.density and self.predictive_draws < 500:
            raise ConfigurationException("FORECAST__PREDICTIVE_DRAWS must be at least 500")
        if self.quantile_grid < 2:
            raise ConfigurationException("FORECAST__QUANTILE_GRID must be at least 2")


@dataclass(frozen=True)
class BacktestConfig:
    first_estimation_end: Optional[str] = None
    last_origin: Optional[str] = None
    models: Tuple[str, ...] = ('rw',)
    benchmark: str = 'rw'
    align_targets: bool = True

    @classmethod
    def from_settings(cls) -> 'BacktestConfig':
        return cls(
            benchmark=_setting('CARBON_BENCHMARK_MODEL', 'rw'),
            align_targets=_setting('CARBON_ALIGN_TARGETS', True),
        )

    def validate(self):
        for name in ('first_estimation_end', 'last_origin'):
            value = getattr(self, name)
            if value is not None and not _MONTH_PATTERN.match(value):
                raise ConfigurationException(f"BACKTEST__{name.upper()} must be YYYY-MM, got '{value}'")
        if self.first_estimation_end and self.last_origin and self.last_origin < self.first_estimation_end:
            raise ConfigurationException("BACKTEST__LAST_ORIGIN precedes BACKTEST__FIRST_ESTIMATION_END")
        if not self.models:
            raise ConfigurationException("BACKTEST__MODELS must name at least one model")
        if len(set(self.models)) != len(self.models):
            raise ConfigurationException("BACKTEST__MODELS contains duplicates")


@dataclass(frozen=True)
class EvalConfig:
    fluctuation_window: int = 19
    window_se: bool = False
    hac_lags: Optional[int] = None

    @classmethod
    def from_settings(cls) -> 'EvalConfig':
        return cls(
            fluctuation_window=_setting('CARBON_FLUCTUATION_WINDOW', 19),
            window_se=_setting('CARBON_WINDOW_SE', False),
        )

    def validate(self):
        if self.fluctuation_window < 1 or self.fluctuation_window % 2 == 0:
            raise ConfigurationException("EVAL__FLUCTUATION_WINDOW must be a positive odd integer")
        if self.hac_lags is not None and self.hac_lags < 0:
            raise ConfigurationException("EVAL__HAC_LAGS must be nonnegative")


@dataclass(frozen=True)
class MonitorConfig:
    price_model: Optional[str] = None
    emissions_model: Optional[str] = None
    smoothing_window: int = 3
    density_pressure: bool = False
    external_forecasts: Optional[str] = None

    @classmethod
    def from_settings(cls) -> 'MonitorConfig':
        return cls(
            smoothing_window=_setting('CARBON_PRESSURE_SMOOTHING', 3),
            density_pressure=_setting('CARBON_DENSITY_PRESSURE', False),
        )

    def validate(self):
        if self.smoothing_window < 1:
            raise ConfigurationException("MONITOR__SMOOTHING_WINDOW must be at least 1")


@dataclass(frozen=True)
class PipelineConfig:
    stages: Tuple[str, ...] = PIPELINE_STAGES
    seed: int = 0
    jobs: int = 1
    out: Optional[str] = None

    @classmethod
    def from_settings(cls) -> 'PipelineConfig':
        return cls(
            seed=_setting('CARBON_DEFAULT_SEED', 0),
            jobs=_setting('CARBON_DEFAULT_JOBS', 1),
        )

    def validate(self):
        unknown = [s for s in self.stages if s not in PIPELINE_STAGES]
        if unknown:
            raise ConfigurationException(f"Unknown pipeline stage(s): {', '.join(unknown)}")
        if self.jobs < 1:
            raise ConfigurationException("PIPELINE__JOBS must be at least 1")
        if self.seed < 0:
            raise ConfigurationException("PIPELINE__SEED must be nonnegative")


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig
    series: SeriesConfig
    disagg: DisaggConfig
    factors: FactorConfig
    prior: PriorConfig
    sv: SvConfig
    arima: ArimaConfig
    forecast: ForecastConfig
    backtest: BacktestConfig
    eval: EvalConfig
    monitor: MonitorConfig
    pipeline: PipelineConfig
    synth: Dict[str, str] = field(default_factory=dict)
    source: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        payload = {name: to_jsonable(dataclasses.asdict(getattr(self, name))) for name in _SECTIONS.values()}
        payload['synth'] = dict(sorted(self.synth.items()))
        return payload

    def hashed_dict(self) -> Dict[str, Any]:
        """to_dict() without the keys that cannot change results (output location, worker count)"""
        payload = self.to_dict()
        payload['pipeline'] = {k: v for k, v in payload['pipeline'].items() if k not in ('out', 'jobs')}
        return payload

    @property
    def config_hash(self) -> str:
        return sha256_json(self.hashed_dict())

    def with_overrides(self, **section_values: Mapping[str, Any]) -> 'RunConfig':
        """Return a copy with typed values replaced, e.g. pipeline={'seed': 3}"""
        updated = {}
        for attr, values in section_values.items():
            if attr == 'synth':
                updated['synth'] = {**self.synth, **{k: str(v) for k, v in values.items()}}
                continue
            section = getattr(self, attr)
            new_section = replace(section, **values)
            new_section.validate()
            updated[attr] = new_section
        return replace(self, **updated)


_SECTIONS = {
    'DATA': 'data',
    'SERIES': 'series',
    'DISAGG': 'disagg',
    'FACTORS': 'factors',
    'PRIOR': 'prior',
    'SV': 'sv',
    'ARIMA': 'arima',
    'FORECAST': 'forecast',
    'BACKTEST': 'backtest',
    'EVAL': 'eval',
    'MONITOR': 'monitor',
    'PIPELINE': 'pipeline',
}

_SECTION_TYPES = {
    'data': DataConfig,
    'series': SeriesConfig,
    'disagg': DisaggConfig,
    'factors': FactorConfig,
    'prior': PriorConfig,
    'sv': SvConfig,
    'arima': ArimaConfig,
    'forecast': ForecastConfig,
    'backtest': BacktestConfig,
    'eval': EvalConfig,
    'monitor': MonitorConfig,
    'pipeline': PipelineConfig,
}

_TRUE = {'true', '1', 'yes', 'on'}
_FALSE = {'false', '0', 'no', 'off'}


def _coerce(key: str, raw: str, annotation: Any) -> Any:
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin is typing.Union and type(None) in args:
        if raw.strip().lower() in ('', 'none', 'null'):
            return None
        inner = next(a for a in args if a is not type(None))
        return _coerce(key, raw, inner)
    if origin in (tuple, Tuple):
        parts = [p.strip() for p in raw.replace('\n', ';').split(';')]
        return tuple(p for p in parts if p)
    value = raw.strip()
    try:
        if annotation is bool:
            lowered = value.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(value)
        if annotation is int:
            return int(value)
        if annotation is float:
            return float(value)
    except ValueError:
        raise ConfigurationException(
            f"Config key {key}: cannot parse '{raw}' as {annotation.__name__}",
            context={'module': 'cli', 'op': 'load_run_config', 'key': key},
        )
    return value


def apply_section(section_cls, defaults, values: Dict[str, str], section_name: str):
    hints = typing.get_type_hints(section_cls)
    known = {f.name for f in fields(section_cls)}
    parsed = {}
    for name, raw in values.items():
        if name not in known:
            raise ConfigurationException(
                f"Unknown config key {section_name}__{name.upper()}",
                context={'module': 'cli', 'op': 'load_run_config'},
            )
        parsed[name] = _coerce(f"{section_name}__{name.upper()}", raw, hints[name])
    section = replace(defaults, **parsed)
    section.validate()
    return section


def load_run_config(
    path: Optional[str] = None,
    overrides: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Read a run configuration file (optional) plus SECTION__KEY overrides"""
    raw: Dict[str, Optional[str]] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise ConfigurationException(
                f"Config file not found: {config_path}",
                context={'module': 'cli', 'op': 'load_run_config', 'path': str(config_path)},
            )
        raw.update(dotenv_values(config_path))
    raw.update(overrides or {})

    grouped: Dict[str, Dict[str, str]] = {}
    synth: Dict[str, str] = {}
    for key, value in raw.items():
        if value is None:
            raise ConfigurationException(f"Config key {key} has no value")
        if '__' not in key:
            raise ConfigurationException(f"Config key '{key}' must have the form SECTION__KEY")
        section, name = key.split('__', 1)
        section = section.upper()
        if section == 'SYNTH':
            synth[name.lower()] = value
            continue
        if section not in _SECTIONS:
            raise ConfigurationException(f"Unknown config section '{section}' in key {key}")
        grouped.setdefault(section, {})[name.lower()] = value

    sections = {}
    for section, attr in _SECTIONS.items():
        section_cls = _SECTION_TYPES[attr]
        defaults = section_cls.from_settings()
        sections[attr] = apply_section(section_cls, defaults, grouped.get(section, {}), section)

    config = RunConfig(**sections, synth=synth, source=str(path) if path else None)
    logger.debug(f"Loaded run config {config.config_hash[:12]} from {path or 'defaults'}")
    return config


def config_from_dict(payload: Mapping[str, Any]) -> RunConfig:
    """Rebuild a RunConfig from ``RunConfig.to_dict()`` output (task payloads)"""
    sections = {}
    for attr, section_cls in _SECTION_TYPES.items():
        values = dict(payload.get(attr, {}))
        hints = typing.get_type_hints(section_cls)
        for name, value in values.items():
            if isinstance(value, list) and typing.get_origin(hints.get(name)) in (tuple, Tuple):
                values[name] = tuple(value)
        try:
            section = section_cls(**values)
        except TypeError as exc:
            raise ConfigurationException(
                f"Invalid {attr} section in config payload: {exc}",
                context={'module': 'cli', 'op': 'config_from_dict'},
            )
        section.validate()
        sections[attr] = section
    return RunConfig(**sections, synth=dict(payload.get('synth', {})))
