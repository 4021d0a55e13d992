# evaluation_service/services/monitor_service.py
"""
Market monitoring from backtest output.

Demand pressure is the gap between the one-year and one-month ahead
emission forecasts issued at an origin. Price pressure is the share of the
next twelve monthly price forecasts above the trailing twelve-month maximum
(up) or below the trailing minimum (down). Indices are dated at the
forecast origin; a backward moving average is stored next to the raw
values for presentation.
"""
import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from evaluation_service.types import PressureIndex
from evaluation_service.utils.exceptions import InsufficientHistoryException, InvalidOverlapException
from model_service.types import ForecastRecord
from series_service.types import MonthDate, MonthlySeries
from shared.utils.exceptions import DataFormatException, MissingDataFileException, ValidationException

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PRESSURE_SPAN = 12
DEMAND_SHORT, DEMAND_LONG = 1, 12


def _by_origin(records: Sequence[ForecastRecord]) -> Dict[MonthDate, Dict[int, ForecastRecord]]:
    grouped: Dict[MonthDate, Dict[int, ForecastRecord]] = defaultdict(dict)
    for record in records:
        grouped[record.origin][record.horizon] = record
    return dict(sorted(grouped.items()))


def _single_model(records: Sequence[ForecastRecord], op: str) -> str:
    ids = sorted({r.model_id for r in records})
    if len(ids) > 1:
        raise ValidationException(
            f"Expected records of one model, got {', '.join(ids)}",
            context={'module': 'monitor', 'op': op},
        )
    return ids[0] if ids else ''


class MonitorService:

    # ------------------------------------------------------------------
    # Fixed-event to fixed-horizon conversion
    # ------------------------------------------------------------------
    @staticmethod
    def fe_to_fh(current_year: float, next_year: float, k: int) -> float:
        """
        One-year-ahead forecast from the current- and next-year fixed-event
        forecasts, weighted by overlap; ``k`` is the number of months left in
        the current year (12 in January, 1 in December).
        """
        if not isinstance(k, (int, np.integer)) or not 1 <= k <= 12:
            raise InvalidOverlapException(
                f"Months to year end must be an integer in 1..12, got {k}",
                context={'module': 'monitor', 'op': 'fe_to_fh'},
            )
        if not (np.isfinite(current_year) and np.isfinite(next_year)):
            raise ValidationException(
                "Fixed-event forecasts must be finite",
                context={'module': 'monitor', 'op': 'fe_to_fh'},
            )
        return (k / 12.0) * float(current_year) + ((12 - k) / 12.0) * float(next_year)

    @staticmethod
    def months_to_year_end(origin: MonthDate) -> int:
        return 13 - origin.month

    # ------------------------------------------------------------------
    # Indices
    # ------------------------------------------------------------------
    def demand_pressure(self, records: Sequence[ForecastRecord]) -> PressureIndex:
        """f(t+12|t) - f(t+1|t) in emission levels; origins lacking either horizon are skipped"""
        model_id = _single_model(records, 'demand_pressure')
        dates, values = [], []
        for origin, by_h in _by_origin(records).items():
            if DEMAND_SHORT not in by_h or DEMAND_LONG not in by_h:
                logger.warning(f"Demand pressure: origin {origin} lacks horizon 1 or 12, skipped")
                continue
            dates.append(origin)
            values.append(by_h[DEMAND_LONG].point_level - by_h[DEMAND_SHORT].point_level)
        return PressureIndex(kind='demand', dates=tuple(dates), values=np.array(values), model_id=model_id)

    @staticmethod
    def trailing_levels(history: MonthlySeries, origin: MonthDate) -> np.ndarray:
        if not history.covers(origin) or history.start.months_until(origin) + 1 < PRESSURE_SPAN:
            raise InsufficientHistoryException(
                f"Price pressure at {origin} needs {PRESSURE_SPAN} observed levels ending at the origin; "
                f"history covers {history.start}..{history.end}",
                context={'module': 'monitor', 'op': 'price_pressure', 'origin': str(origin)},
            )
        return history.window(origin.shift(-(PRESSURE_SPAN - 1)), origin).values

    @staticmethod
    def _breach_share(record: ForecastRecord, bound: float, up: bool) -> float:
        """Probability mass beyond ``bound`` from the stored draws, else from the quantile grid"""
        if record.draws is not None:
            sample = record.draws
        elif record.quantiles:
            sample = np.array([record.quantiles[a] for a in sorted(record.quantiles)])
        else:
            raise ValidationException(
                f"Density price pressure needs draws or quantiles for {record.model_id} at {record.origin}",
                context={'module': 'monitor', 'op': 'price_pressure'},
            )
        return float(np.mean(sample > bound) if up else np.mean(sample < bound))

    def price_pressure(
        self,
        records: Sequence[ForecastRecord],
        history: MonthlySeries,
        direction: str,
        density: bool = False,
    ) -> PressureIndex:
        """
        PP(up) = mean over h = 1..12 of 1[point(t+h|t) > max(R_t..R_t-11)];
        PP(down) uses the minimum and <. With ``density`` the indicator is
        replaced by the predictive probability of the breach.
        """
        if direction not in ('up', 'down'):
            raise ValidationException(
                f"Direction must be 'up' or 'down', got '{direction}'",
                context={'module': 'monitor', 'op': 'price_pressure'},
            )
        up = direction == 'up'
        model_id = _single_model(records, 'price_pressure')
        dates, values = [], []
        for origin, by_h in _by_origin(records).items():
            missing = [h for h in range(1, PRESSURE_SPAN + 1) if h not in by_h]
            if missing:
                logger.warning(f"Price pressure: origin {origin} lacks horizon(s) {missing}, skipped")
                continue
            trailing = self.trailing_levels(history, origin)
            bound = trailing.max() if up else trailing.min()
            path = [by_h[h] for h in range(1, PRESSURE_SPAN + 1)]
            if density:
                shares = [self._breach_share(r, bound, up) for r in path]
            else:
                points = np.array([r.point_level for r in path])
                shares = (points > bound) if up else (points < bound)
            dates.append(origin)
            values.append(float(np.mean(shares)))
        return PressureIndex(
            kind='price_up' if up else 'price_down',
            dates=tuple(dates),
            values=np.array(values),
            model_id=model_id,
            density=density,
        )

    @staticmethod
    def smooth(index: PressureIndex, window: int) -> PressureIndex:
        """
        Backward moving average over the ``window`` calendar months ending at
        each origin. Months without an index value leave the average undefined.
        """
        if window < 1:
            raise ValidationException(
                f"Smoothing window must be positive, got {window}",
                context={'module': 'monitor', 'op': 'smooth'},
            )
        periods = pd.PeriodIndex([str(d) for d in index.dates], freq='M')
        series = pd.Series(index.values, index=periods, dtype=float)
        if len(series):
            calendar = pd.period_range(periods.min(), periods.max(), freq='M')
            series = series.reindex(calendar)
        smoothed = series.rolling(window, min_periods=window).mean().reindex(periods).to_numpy()
        return PressureIndex(
            kind=index.kind,
            dates=index.dates,
            values=index.values,
            model_id=index.model_id,
            smoothed=smoothed,
            density=index.density,
            meta={**index.meta, 'smoothing_window': window},
        )

    # ------------------------------------------------------------------
    # External forecasts
    # ------------------------------------------------------------------
    @staticmethod
    def load_external_forecasts(path: PathLike) -> pd.DataFrame:
        """CSV with columns origin (YYYY-MM), current_year, next_year"""
        path = Path(path)
        if not path.is_file():
            raise MissingDataFileException(
                f"External forecast file not found: {path}",
                context={'module': 'monitor', 'op': 'compare_external_forecasts', 'path': str(path)},
            )
        frame = pd.read_csv(path, dtype={'origin': str}, encoding='utf-8')
        missing = {'origin', 'current_year', 'next_year'} - set(frame.columns)
        if missing:
            raise DataFormatException(
                f"{path} lacks column(s): {', '.join(sorted(missing))}",
                context={'module': 'monitor', 'op': 'compare_external_forecasts', 'path': str(path)},
            )
        return frame

    def compare_external_forecasts(
        self,
        external: pd.DataFrame,
        records: Sequence[ForecastRecord],
        realized: MonthlySeries,
    ) -> pd.DataFrame:
        """
        Per external forecast origin: the converted one-year-ahead forecast,
        the model's 12-step forecast from the same origin, the realized
        price twelve months on and the absolute-error difference (positive
        when the external forecast is less accurate). Origins without a
        model forecast or a realization are dropped.
        """
        model_forecasts = {r.origin: r.point_level for r in records if r.horizon == PRESSURE_SPAN}
        rows = []
        for row in external.itertuples(index=False):
            origin = MonthDate.parse(row.origin)
            target = origin.shift(PRESSURE_SPAN)
            if origin not in model_forecasts or not realized.covers(target):
                continue
            k = self.months_to_year_end(origin)
            external_fh = self.fe_to_fh(float(row.current_year), float(row.next_year), k)
            actual = realized.value_at(target)
            external_error = actual - external_fh
            model_error = actual - model_forecasts[origin]
            rows.append({
                'origin': str(origin),
                'k': k,
                'external_fh': external_fh,
                'model_fh': model_forecasts[origin],
                'realized': actual,
                'external_error': external_error,
                'model_error': model_error,
                'abs_error_diff': abs(external_error) - abs(model_error),
            })
        logger.info(f"Compared {len(rows)} of {len(external)} external forecasts with model forecasts")
        return pd.DataFrame(rows, columns=[
            'origin', 'k', 'external_fh', 'model_fh', 'realized',
            'external_error', 'model_error', 'abs_error_diff',
        ])

    @staticmethod
    def rmsfe_difference(comparison: pd.DataFrame) -> Optional[float]:
        """RMSFE(external) - RMSFE(model) over the compared origins"""
        if comparison.empty:
            return None
        external = float(np.sqrt(np.mean(comparison['external_error'] ** 2)))
        model = float(np.sqrt(np.mean(comparison['model_error'] ** 2)))
        return external - model

    # ------------------------------------------------------------------
    # Output
    # ------------------------------------------------------------------
    @staticmethod
    def index_frame(index: PressureIndex) -> pd.DataFrame:
        frame = pd.DataFrame({
            'origin': [str(d) for d in index.dates],
            'value': index.values,
        })
        frame['smoothed'] = index.smoothed if index.smoothed is not None else np.nan
        return frame

    def write_index(self, index: PressureIndex, directory: PathLike) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        suffix = '_density' if index.density else ''
        path = directory / f"{index.kind}{suffix}.csv"
        self.index_frame(index).to_csv(path, index=False, float_format='%.10g', lineterminator='\n')
        return path

    @staticmethod
    def summarize(index: PressureIndex) -> Dict[str, object]:
        values = index.values
        return {
            'kind': index.kind,
            'model_id': index.model_id,
            'density': index.density,
            'n_origins': len(index),
            'first_origin': str(index.dates[0]) if len(index) else None,
            'last_origin': str(index.dates[-1]) if len(index) else None,
            'mean': float(values.mean()) if len(index) else None,
            'last_value': float(values[-1]) if len(index) else None,
        }


monitor_service = MonitorService()
