# series_service/services/series_service.py

import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings

from series_service.types import (
    MonthDate,
    MonthlySeries,
    PredictorClass,
    PredictorPanel,
    TransformTag,
)
from series_service.utils.exceptions import (
    DegenerateSeriesException,
    DomainErrorException,
    SeriesAlignmentException,
    SeriesTooShortException,
    UnknownClassException,
)

logger = logging.getLogger(__name__)

_STANDARDIZE_TOL = 1e-10


class SeriesService:
    """
    Transformations, standardization, outlier screening and alignment of
    monthly series. All methods are pure.
    """

    # ------------------------------------------------------------------
    # Transforms
    # ------------------------------------------------------------------
    def log_diff(self, series: MonthlySeries) -> MonthlySeries:
        """First difference of the log; start advances one month."""
        self._require_positive(series, 'log_diff')
        if len(series) < 2:
            raise SeriesTooShortException(
                f"log_diff needs at least 2 observations, '{series.name}' has {len(series)}",
                context={'module': 'timeseries_core', 'op': 'log_diff'},
            )
        values = np.diff(np.log(series.values))
        return series.with_values(values, start=series.start.successor(), transform_tag=TransformTag.LOG_DIFF)

    def levels_from_log_diff(self, first_level: float, series: MonthlySeries, name: Optional[str] = None) -> MonthlySeries:
        """Inverse of log_diff given the level one month before ``series.start``."""
        if first_level <= 0:
            raise DomainErrorException(
                f"Reconstruction needs a positive first level, got {first_level}",
                context={'module': 'timeseries_core', 'op': 'levels_from_log_diff'},
            )
        log_path = np.log(first_level) + np.concatenate([[0.0], np.cumsum(series.values)])
        return MonthlySeries(
            name=name or series.name,
            start=series.start.shift(-1),
            values=np.exp(log_path),
            transform_tag=TransformTag.NONE,
        )

    def diff(self, series: MonthlySeries) -> MonthlySeries:
        if len(series) < 2:
            raise SeriesTooShortException(
                f"diff needs at least 2 observations, '{series.name}' has {len(series)}",
                context={'module': 'timeseries_core', 'op': 'diff'},
            )
        return series.with_values(np.diff(series.values), start=series.start.successor(), transform_tag=TransformTag.DIFF)

    def log(self, series: MonthlySeries) -> MonthlySeries:
        self._require_positive(series, 'log')
        return series.with_values(np.log(series.values), transform_tag=TransformTag.LOG)

    def apply_transform(self, series: MonthlySeries, tag: TransformTag) -> MonthlySeries:
        """Transform a raw series to the stationary form named by its metadata tag."""
        tag = TransformTag(tag)
        if tag is TransformTag.NONE:
            return series
        if tag is TransformTag.LOG:
            return self.log(series)
        if tag is TransformTag.DIFF:
            return self.diff(series)
        return self.log_diff(series)

    def _require_positive(self, series: MonthlySeries, op: str):
        bad = np.flatnonzero(series.values <= 0)
        if bad.size:
            when = series.start.shift(int(bad[0]))
            raise DomainErrorException(
                f"Series '{series.name}' has nonpositive value {series.values[bad[0]]} at {when}",
                context={'module': 'timeseries_core', 'op': op, 'date': str(when)},
            )

    # ------------------------------------------------------------------
    # Standardization and screening
    # ------------------------------------------------------------------
    def standardize(self, series: MonthlySeries) -> Tuple[MonthlySeries, float, float]:
        """Return (standardized series, mean, sd) with the n-1 variance denominator."""
        if len(series) < 2:
            raise SeriesTooShortException(
                f"standardize needs at least 2 observations, '{series.name}' has {len(series)}",
                context={'module': 'timeseries_core', 'op': 'standardize'},
            )
        mean = float(np.mean(series.values))
        sd = float(np.std(series.values, ddof=1))
        if not sd > 0:
            raise DegenerateSeriesException(
                f"Series '{series.name}' has zero variance",
                context={'module': 'timeseries_core', 'op': 'standardize'},
            )
        return series.with_values((series.values - mean) / sd), mean, sd

    def flag_outliers(self, series: MonthlySeries, multiple: Optional[float] = None) -> List[MonthDate]:
        """Dates where |value - median| exceeds ``multiple`` interquartile ranges (flags only)."""
        if multiple is None:
            multiple = getattr(settings, 'CARBON_OUTLIER_IQR_MULTIPLE', 20.0)
        if len(series) < 4:
            raise SeriesTooShortException(
                f"flag_outliers needs at least 4 observations, '{series.name}' has {len(series)}",
                context={'module': 'timeseries_core', 'op': 'flag_outliers'},
            )
        values = series.values
        median = np.median(values)
        q75, q25 = np.percentile(values, [75, 25])
        iqr = q75 - q25
        deviations = np.abs(values - median)
        flagged = np.flatnonzero(deviations > multiple * iqr)
        dates = [series.start.shift(int(i)) for i in flagged]
        if dates:
            logger.info(f"Series '{series.name}': {len(dates)} observation(s) beyond {multiple:g} IQR from the median")
        return dates

    # ------------------------------------------------------------------
    # Alignment
    # ------------------------------------------------------------------
    def common_range(self, series: Sequence[MonthlySeries]) -> Tuple[MonthDate, MonthDate]:
        if not series:
            raise SeriesAlignmentException(
                "Nothing to align",
                context={'module': 'timeseries_core', 'op': 'align_panel'},
            )
        start = max(s.start for s in series)
        end = min(s.end for s in series)
        if start > end:
            raise SeriesAlignmentException(
                f"Series have no common date range (latest start {start}, earliest end {end})",
                context={'module': 'timeseries_core', 'op': 'align_panel'},
            )
        return start, end

    def align(self, series: Sequence[MonthlySeries]) -> List[MonthlySeries]:
        """Truncate every series to the maximal common range."""
        start, end = self.common_range(series)
        return [s.window(start, end) for s in series]

    def align_panel(
        self,
        series: Sequence[MonthlySeries],
        class_of: Optional[Mapping[str, PredictorClass]] = None,
        reference: Optional[PredictorPanel] = None,
    ) -> PredictorPanel:
        """
        Align to the common range, then standardize each series. With a
        ``reference`` panel its means and sds are reused instead of the
        statistics of this sample.
        """
        aligned = self.align(series)
        classes: Dict[str, PredictorClass] = {}
        for s in aligned:
            tag = (class_of or {}).get(s.name, PredictorClass.ECONOMIC_ACTIVITY)
            try:
                classes[s.name] = PredictorClass(tag)
            except ValueError:
                raise UnknownClassException(
                    f"Predictor '{s.name}' has unknown class '{tag}'",
                    context={'module': 'timeseries_core', 'op': 'align_panel'},
                )
        if reference is not None:
            return self._rescale(aligned, classes, reference)
        standardized, means, sds = [], {}, {}
        for s in aligned:
            z, mean, sd = self.standardize(s)
            standardized.append(z)
            means[s.name] = mean
            sds[s.name] = sd
        panel = PredictorPanel(series=tuple(standardized), class_of=classes, means=means, sds=sds)
        self._check_standardized(panel)
        return panel

    def _rescale(
        self,
        aligned: Sequence[MonthlySeries],
        classes: Dict[str, PredictorClass],
        reference: PredictorPanel,
    ) -> PredictorPanel:
        missing = [s.name for s in aligned if s.name not in reference.means or s.name not in reference.sds]
        if missing:
            raise SeriesAlignmentException(
                f"Reference panel has no statistics for {', '.join(missing)}",
                context={'module': 'timeseries_core', 'op': 'align_panel'},
            )
        scaled = [
            s.with_values((s.values - reference.means[s.name]) / reference.sds[s.name])
            for s in aligned
        ]
        return PredictorPanel(
            series=tuple(scaled),
            class_of=classes,
            means={s.name: reference.means[s.name] for s in aligned},
            sds={s.name: reference.sds[s.name] for s in aligned},
        )

    def _check_standardized(self, panel: PredictorPanel):
        matrix = panel.matrix
        if matrix.shape[0] < 2:
            return
        means = matrix.mean(axis=0)
        variances = matrix.var(axis=0, ddof=1)
        worst = int(np.argmax(np.abs(means) + np.abs(variances - 1.0)))
        if np.any(np.abs(means) > _STANDARDIZE_TOL) or np.any(np.abs(variances - 1.0) > 1e-8):
            raise DegenerateSeriesException(
                f"Predictor '{panel.names[worst]}' lost precision in standardization "
                f"(mean {means[worst]:.3g}, variance {variances[worst]:.12g})",
                context={'module': 'timeseries_core', 'op': 'align_panel'},
            )


series_service = SeriesService()
