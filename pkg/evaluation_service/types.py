# evaluation_service/types.py
"""
Backtest plans and evaluation results.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from evaluation_service.utils.exceptions import BacktestPlanException
from model_service.types import ForecastRecord, ModelSpec
from series_service.types import MonthDate, month_range
from shared.utils.exceptions import ValidationException

REGIONS = ('center', 'right', 'left')
PRESSURE_KINDS = ('demand', 'price_up', 'price_down')


@dataclass(frozen=True)
class BacktestPlan:
    """
    Expanding-window design. With ``align_targets`` every horizon is
    evaluated on the same target months, first_estimation_end + H through
    last_origin + H, so shorter horizons come from later origins and the
    models are estimated at origins first_estimation_end .. last_origin + H - 1.
    """
    first_estimation_end: MonthDate
    last_origin: MonthDate
    horizon: int
    models: Tuple[ModelSpec, ...]
    density: bool = True
    seed: int = 0
    align_targets: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'models', tuple(self.models))
        context = {'module': 'backtest', 'op': 'build_plan'}
        if self.last_origin < self.first_estimation_end:
            raise BacktestPlanException(
                f"Last origin {self.last_origin} precedes first estimation end {self.first_estimation_end}",
                context=context,
            )
        if self.horizon < 1:
            raise BacktestPlanException(f"Horizon must be at least 1, got {self.horizon}", context=context)
        if not self.models:
            raise BacktestPlanException("A backtest needs at least one model", context=context)
        ids = [m.model_id for m in self.models]
        if len(set(ids)) != len(ids):
            raise BacktestPlanException(f"Duplicate model ids in plan: {', '.join(ids)}", context=context)

    @property
    def horizons(self) -> range:
        return range(1, self.horizon + 1)

    @property
    def model_ids(self) -> List[str]:
        return [m.model_id for m in self.models]

    @property
    def evaluation_origins(self) -> List[MonthDate]:
        return month_range(self.first_estimation_end, self.last_origin)

    @property
    def estimation_origins(self) -> List[MonthDate]:
        last = self.last_origin.shift(self.horizon - 1) if self.align_targets else self.last_origin
        return month_range(self.first_estimation_end, last)

    @property
    def n_targets(self) -> int:
        return len(self.evaluation_origins)

    @property
    def target_range(self) -> Tuple[MonthDate, MonthDate]:
        """Common target months of the aligned evaluation sample"""
        return self.first_estimation_end.shift(self.horizon), self.last_origin.shift(self.horizon)

    @property
    def max_factors(self) -> int:
        return max(m.n_factors for m in self.models)

    @property
    def targets(self) -> List[str]:
        return sorted({m.target for m in self.models})

    def in_evaluation(self, origin: MonthDate, horizon: int) -> bool:
        if not self.align_targets:
            return self.first_estimation_end <= origin <= self.last_origin
        first, last = self.target_range
        return first <= origin.shift(horizon) <= last

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> 'BacktestPlan':
        return cls(
            first_estimation_end=MonthDate.parse(payload['first_estimation_end']),
            last_origin=MonthDate.parse(payload['last_origin']),
            horizon=int(payload['horizon']),
            models=tuple(ModelSpec.parse(m) for m in payload['models']),
            density=bool(payload.get('density', True)),
            seed=int(payload.get('seed', 0)),
            align_targets=bool(payload.get('align_targets', True)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'first_estimation_end': str(self.first_estimation_end),
            'last_origin': str(self.last_origin),
            'horizon': self.horizon,
            'models': self.model_ids,
            'density': self.density,
            'seed': self.seed,
            'align_targets': self.align_targets,
        }


@dataclass(frozen=True)
class FitSummary:
    origin: MonthDate
    model_id: str
    lag_order: Optional[int]
    chow_lin_rho: float


@dataclass(frozen=True, eq=False)
class BacktestResult:
    plan: BacktestPlan
    records: Tuple[ForecastRecord, ...]
    fits: Tuple[FitSummary, ...] = ()

    @property
    def evaluation_records(self) -> List[ForecastRecord]:
        return [r for r in self.records if self.plan.in_evaluation(r.origin, r.horizon)]


@dataclass(frozen=True)
class ScoreReport:
    model_id: str
    target: str
    horizon: int
    n_obs: int
    rmsfe: float
    relative_rmsfe: float
    success_ratio: float
    qcrps: Optional[float] = None
    wqcrps_center: Optional[float] = None
    wqcrps_right: Optional[float] = None
    wqcrps_left: Optional[float] = None
    dm_statistic: Optional[float] = None
    dm_pvalue: Optional[float] = None
    pt_statistic: Optional[float] = None
    pt_pvalue: Optional[float] = None


@dataclass(frozen=True)
class PredictiveTestResult:
    name: str
    statistic: float
    p_value: float
    n_obs: int


@dataclass(frozen=True, eq=False)
class FluctuationResult:
    """Rolling relative-performance path; positive values favour the candidate"""
    window: int
    mu: float
    path: np.ndarray
    cv_one_sided_5pct: float
    dates: Tuple[Any, ...] = ()

    def __post_init__(self):
        path = np.array(self.path, dtype=float)
        path.setflags(write=False)
        object.__setattr__(self, 'path', path)
        object.__setattr__(self, 'dates', tuple(self.dates))

    @property
    def max_statistic(self) -> float:
        return float(self.path.max())

    @property
    def reject(self) -> bool:
        return bool(self.max_statistic > self.cv_one_sided_5pct)


@dataclass(frozen=True, eq=False)
class PressureIndex:
    """Monitoring index dated at the forecast origin"""
    kind: str
    dates: Tuple[MonthDate, ...]
    values: np.ndarray
    model_id: str = ''
    smoothed: Optional[np.ndarray] = None
    density: bool = False
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PRESSURE_KINDS:
            raise ValidationException(f"Unknown pressure index kind '{self.kind}'")
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'dates', tuple(self.dates))
        if len(self.dates) != values.size:
            raise ValidationException(
                f"Pressure index '{self.kind}' has {len(self.dates)} dates for {values.size} values"
            )

    def __len__(self) -> int:
        return int(self.values.size)
