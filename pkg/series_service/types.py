# series_service/types.py
"""
Value types shared by every stage: calendar months, monthly and annual
series, standardized predictor panels, factor models and the data bundle.

All types are immutable after construction; numpy arrays held by them are
marked read-only.
"""
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from dateutil.relativedelta import relativedelta

from shared.utils.exceptions import DataFormatException, ValidationException


class TransformTag(str, Enum):
    NONE = 'none'
    LOG = 'log'
    DIFF = 'diff'
    LOG_DIFF = 'log_diff'


class PredictorClass(str, Enum):
    ECONOMIC_ACTIVITY = 'economic_activity'
    ENERGY = 'energy'
    TECHNICAL = 'technical'
    WEATHER = 'weather'


def _frozen_array(values: Sequence[float]) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, order=True)
class MonthDate:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValidationException(f"Month must be in 1..12, got {self.month}")

    @classmethod
    def parse(cls, text: str) -> 'MonthDate':
        """Parse YYYY-MM (a trailing -DD is tolerated)"""
        parts = str(text).strip().split('-')
        try:
            return cls(int(parts[0]), int(parts[1]))
        except (IndexError, ValueError):
            raise DataFormatException(f"Invalid month '{text}', expected YYYY-MM")

    @classmethod
    def from_ordinal(cls, ordinal: int) -> 'MonthDate':
        year, month_index = divmod(int(ordinal), 12)
        return cls(year, month_index + 1)

    @property
    def ordinal(self) -> int:
        return self.year * 12 + self.month - 1

    def shift(self, months: int) -> 'MonthDate':
        shifted = date(self.year, self.month, 1) + relativedelta(months=months)
        return MonthDate(shifted.year, shifted.month)

    def successor(self) -> 'MonthDate':
        return self.shift(1)

    def months_until(self, other: 'MonthDate') -> int:
        return other.ordinal - self.ordinal

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def month_range(start: MonthDate, end: MonthDate) -> List[MonthDate]:
    """Inclusive list of months from start to end"""
    return [MonthDate.from_ordinal(o) for o in range(start.ordinal, end.ordinal + 1)]


@dataclass(frozen=True, eq=False)
class MonthlySeries:
    name: str
    start: MonthDate
    values: np.ndarray
    transform_tag: TransformTag = TransformTag.NONE

    def __post_init__(self):
        values = _frozen_array(self.values)
        if values.ndim != 1 or values.size < 1:
            raise DataFormatException(f"Series '{self.name}' must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DataFormatException(
                f"Series '{self.name}' has a missing or non-finite value at {self.start.shift(bad)}"
            )
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'transform_tag', TransformTag(self.transform_tag))

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def end(self) -> MonthDate:
        return self.start.shift(len(self) - 1)

    @property
    def dates(self) -> List[MonthDate]:
        return month_range(self.start, self.end)

    def covers(self, when: MonthDate) -> bool:
        return self.start <= when <= self.end

    def value_at(self, when: MonthDate) -> float:
        if not self.covers(when):
            raise DataFormatException(f"Series '{self.name}' has no value at {when}")
        return float(self.values[self.start.months_until(when)])

    def window(self, start: MonthDate, end: MonthDate) -> 'MonthlySeries':
        """Sub-series on [start, end]; both ends must be covered"""
        if start > end or not self.covers(start) or not self.covers(end):
            raise DataFormatException(
                f"Series '{self.name}' ({self.start}..{self.end}) does not cover {start}..{end}"
            )
        lo = self.start.months_until(start)
        hi = self.start.months_until(end) + 1
        return self.with_values(self.values[lo:hi], start=start)

    def truncate(self, end: MonthDate) -> 'MonthlySeries':
        """Keep observations dated <= end"""
        return self.window(self.start, min(end, self.end))

    def with_values(self, values, start: Optional[MonthDate] = None, name: Optional[str] = None,
                    transform_tag: Optional[TransformTag] = None) -> 'MonthlySeries':
        return MonthlySeries(
            name=name or self.name,
            start=start or self.start,
            values=values,
            transform_tag=transform_tag or self.transform_tag,
        )

    def items(self) -> Iterator[Tuple[MonthDate, float]]:
        for offset, value in enumerate(self.values):
            yield self.start.shift(offset), float(value)


@dataclass(frozen=True, eq=False)
class AnnualSeries:
    start_year: int
    values: np.ndarray
    name: str = 'emissions'

    def __post_init__(self):
        values = _frozen_array(self.values)
        if values.ndim != 1 or not np.all(np.isfinite(values)):
            raise DataFormatException(f"Annual series '{self.name}' must be finite and 1-d")
        object.__setattr__(self, 'values', values)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def end_year(self) -> int:
        return self.start_year + len(self) - 1

    @property
    def years(self) -> List[int]:
        return list(range(self.start_year, self.end_year + 1))

    def through(self, last_year: int) -> 'AnnualSeries':
        keep = max(0, min(len(self), last_year - self.start_year + 1))
        return AnnualSeries(self.start_year, self.values[:keep], self.name)

    def carry_forward(self, last_year: int) -> 'AnnualSeries':
        """Extend to last_year by repeating the final observation"""
        missing = last_year - self.end_year
        if missing <= 0:
            return self
        values = np.concatenate([self.values, np.repeat(self.values[-1], missing)])
        return AnnualSeries(self.start_year, values, self.name)


@dataclass(frozen=True, eq=False)
class PredictorPanel:
    series: Tuple[MonthlySeries, ...]
    class_of: Dict[str, PredictorClass]
    means: Dict[str, float] = field(default_factory=dict)
    sds: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'series', tuple(self.series))
        if not self.series:
            raise ValidationException("Predictor panel must contain at least one series")
        first = self.series[0]
        for s in self.series[1:]:
            if s.start != first.start or len(s) != len(first):
                raise ValidationException("Predictor panel series must share start and length")

    @property
    def names(self) -> List[str]:
        return [s.name for s in self.series]

    @property
    def sample(self) -> Tuple[MonthDate, MonthDate]:
        return self.series[0].start, self.series[0].end

    @property
    def n_obs(self) -> int:
        return len(self.series[0])

    @property
    def matrix(self) -> np.ndarray:
        """T x N data matrix"""
        return np.column_stack([s.values for s in self.series])


@dataclass(frozen=True, eq=False)
class ChowLinResult:
    monthly: MonthlySeries
    rho: float
    beta: np.ndarray
    fit_loglik: float

    def __post_init__(self):
        object.__setattr__(self, 'beta', _frozen_array(self.beta))


@dataclass(frozen=True, eq=False)
class FactorModel:
    loadings: np.ndarray
    factors: Tuple[MonthlySeries, ...]
    eigenvalues: np.ndarray
    variance_shares: np.ndarray
    predictor_names: Tuple[str, ...] = ()

    def __post_init__(self):
        loadings = np.array(self.loadings, dtype=float)
        loadings.setflags(write=False)
        object.__setattr__(self, 'loadings', loadings)
        object.__setattr__(self, 'eigenvalues', _frozen_array(self.eigenvalues))
        object.__setattr__(self, 'variance_shares', _frozen_array(self.variance_shares))
        object.__setattr__(self, 'factors', tuple(self.factors))

    @property
    def k(self) -> int:
        return len(self.factors)

    @property
    def scores(self) -> np.ndarray:
        return np.column_stack([f.values for f in self.factors])


@dataclass(frozen=True)
class PredictorMeta:
    name: str
    predictor_class: PredictorClass
    transform: TransformTag


@dataclass(frozen=True, eq=False)
class DataBundle:
    """
    Everything the backtest needs, in the units it is stored on disk:
    real carbon price levels, aggregate and sector industrial production
    levels, annual verified emissions and the raw predictor series.
    """
    price: MonthlySeries
    ip_total: MonthlySeries
    ip_sectors: Tuple[MonthlySeries, ...]
    sector_weights: Tuple[float, ...]
    emissions_annual: AnnualSeries
    predictors: Tuple[MonthlySeries, ...]
    predictor_meta: Dict[str, PredictorMeta]

    def __post_init__(self):
        object.__setattr__(self, 'ip_sectors', tuple(self.ip_sectors))
        object.__setattr__(self, 'sector_weights', tuple(float(w) for w in self.sector_weights))
        object.__setattr__(self, 'predictors', tuple(self.predictors))
        if len(self.ip_sectors) != len(self.sector_weights):
            raise DataFormatException("One weight is required per sector IP series")
        missing = [p.name for p in self.predictors if p.name not in self.predictor_meta]
        if missing:
            raise DataFormatException(f"Predictors without metadata: {', '.join(missing)}")

    @property
    def last_month(self) -> MonthDate:
        return self.price.end


@dataclass(frozen=True, eq=False)
class OriginWindow:
    """
    Model inputs computable at one forecast origin: stationary transforms
    of price, interpolated emissions and industrial production, the
    standardized predictor panel and its factors, and the levels at the
    origin used to convert forecasts back.
    """
    origin: MonthDate
    price: MonthlySeries
    emissions: MonthlySeries
    ip: MonthlySeries
    price_level: float
    emissions_level: float
    chow_lin_rho: float
    panel: Optional[PredictorPanel] = None
    factor_model: Optional[FactorModel] = None

    def target(self, name: str) -> Tuple[MonthlySeries, float]:
        """(Δ-log series, level at origin) for 'price' or 'emissions'"""
        if name == 'price':
            return self.price, self.price_level
        if name == 'emissions':
            return self.emissions, self.emissions_level
        raise ValidationException(f"Unknown forecast target '{name}'")
