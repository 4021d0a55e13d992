# series_service/services/io_service.py
"""
CSV ingestion and export.

Monthly files: first column ``date`` (YYYY-MM), one numeric column per
series. Columns may start or end at different months (blank cells outside a
series' range) but interior gaps are rejected. Annual files: ``year,value``.
Predictor metadata: ``name,class,transform``.
"""
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from series_service.types import (
    AnnualSeries,
    DataBundle,
    MonthDate,
    MonthlySeries,
    PredictorClass,
    PredictorMeta,
    TransformTag,
)
from shared.utils.exceptions import DataFormatException, MissingDataFileException

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

BUNDLE_FILES = {
    'price': 'price.csv',
    'activity': 'activity.csv',
    'sector_weights': 'sector_weights.csv',
    'emissions_annual': 'emissions_annual.csv',
    'predictors': 'predictors.csv',
    'predictors_meta': 'predictors_meta.csv',
}
PRICE_COLUMN = 'price'
IP_TOTAL_COLUMN = 'ip_total'


class SeriesIOService:

    # ------------------------------------------------------------------
    # Low-level readers
    # ------------------------------------------------------------------
    @staticmethod
    def _require_file(path: PathLike) -> Path:
        path = Path(path)
        if not path.is_file():
            raise MissingDataFileException(
                f"Data file not found: {path}",
                context={'module': 'timeseries_core', 'op': 'ingest', 'path': str(path)},
            )
        return path

    def _read_frame(self, path: PathLike, required: Sequence[str]) -> pd.DataFrame:
        path = self._require_file(path)
        try:
            frame = pd.read_csv(path, dtype={required[0]: str} if required else None, encoding='utf-8')
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
            raise DataFormatException(
                f"Cannot parse {path}: {exc}",
                context={'module': 'timeseries_core', 'op': 'ingest', 'path': str(path)},
            )
        frame.columns = [str(c).strip() for c in frame.columns]
        missing = [c for c in required if c not in frame.columns]
        if missing:
            raise DataFormatException(
                f"{path} lacks column(s): {', '.join(missing)}",
                context={'module': 'timeseries_core', 'op': 'ingest', 'path': str(path)},
            )
        return frame

    def read_monthly_csv(self, path: PathLike) -> List[MonthlySeries]:
        frame = self._read_frame(path, ['date'])
        dates = [MonthDate.parse(d) for d in frame['date']]
        if not dates:
            raise DataFormatException(f"{path} has no rows", context={'module': 'timeseries_core', 'op': 'ingest'})
        for previous, current in zip(dates, dates[1:]):
            if previous.successor() != current:
                raise DataFormatException(
                    f"{path}: dates must be consecutive months, found {previous} then {current}",
                    context={'module': 'timeseries_core', 'op': 'ingest', 'path': str(path)},
                )
        series = []
        for column in frame.columns[1:]:
            try:
                values = pd.to_numeric(frame[column], errors='raise').to_numpy(dtype=float)
            except (ValueError, TypeError):
                raise DataFormatException(
                    f"{path}: column '{column}' is not numeric",
                    context={'module': 'timeseries_core', 'op': 'ingest', 'path': str(path)},
                )
            present = np.flatnonzero(np.isfinite(values))
            if present.size == 0:
                raise DataFormatException(f"{path}: column '{column}' is empty")
            lo, hi = int(present[0]), int(present[-1])
            gaps = np.flatnonzero(~np.isfinite(values[lo:hi + 1]))
            if gaps.size:
                raise DataFormatException(
                    f"{path}: column '{column}' has a missing interior value at {dates[lo + int(gaps[0])]}",
                    context={'module': 'timeseries_core', 'op': 'ingest', 'path': str(path)},
                )
            series.append(MonthlySeries(name=column, start=dates[lo], values=values[lo:hi + 1]))
        return series

    def write_monthly_csv(self, path: PathLike, series: Sequence[MonthlySeries]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        columns = {}
        for s in series:
            columns[s.name] = pd.Series(s.values, index=[str(d) for d in s.dates])
        frame = pd.DataFrame(columns)
        frame = frame.sort_index()
        frame.index.name = 'date'
        frame.to_csv(path, float_format='%.12g', encoding='utf-8', lineterminator='\n')
        return path

    def read_annual_csv(self, path: PathLike, name: str = 'emissions') -> AnnualSeries:
        frame = self._read_frame(path, ['year', 'value'])
        years = frame['year'].astype(int).to_numpy()
        if years.size < 2 or np.any(np.diff(years) != 1):
            raise DataFormatException(
                f"{path}: years must be consecutive with at least 2 rows",
                context={'module': 'disagg', 'op': 'ingest', 'path': str(path)},
            )
        values = pd.to_numeric(frame['value'], errors='coerce').to_numpy(dtype=float)
        return AnnualSeries(start_year=int(years[0]), values=values, name=name)

    def write_annual_csv(self, path: PathLike, annual: AnnualSeries) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame({'year': annual.years, 'value': annual.values})
        frame.to_csv(path, index=False, float_format='%.12g', encoding='utf-8', lineterminator='\n')
        return path

    def read_predictor_meta(self, path: PathLike) -> Dict[str, PredictorMeta]:
        frame = self._read_frame(path, ['name', 'class', 'transform'])
        meta = {}
        for row in frame.itertuples(index=False):
            name = str(row[0]).strip()
            try:
                meta[name] = PredictorMeta(
                    name=name,
                    predictor_class=PredictorClass(str(row[1]).strip()),
                    transform=TransformTag(str(row[2]).strip()),
                )
            except ValueError:
                raise DataFormatException(
                    f"{path}: predictor '{name}' has invalid class '{row[1]}' or transform '{row[2]}'",
                    context={'module': 'timeseries_core', 'op': 'ingest', 'path': str(path)},
                )
        return meta

    def write_predictor_meta(self, path: PathLike, meta: Dict[str, PredictorMeta]) -> Path:
        path = Path(path)
        frame = pd.DataFrame(
            [(m.name, m.predictor_class.value, m.transform.value) for m in meta.values()],
            columns=['name', 'class', 'transform'],
        )
        frame.to_csv(path, index=False, encoding='utf-8', lineterminator='\n')
        return path

    # ------------------------------------------------------------------
    # Bundle
    # ------------------------------------------------------------------
    def load_bundle(self, bundle_dir: PathLike) -> DataBundle:
        """Read the six bundle files from ``bundle_dir``."""
        root = Path(bundle_dir)
        if not root.is_dir():
            raise MissingDataFileException(
                f"Bundle directory not found: {root}",
                context={'module': 'timeseries_core', 'op': 'ingest', 'path': str(root)},
            )
        files = {key: root / name for key, name in BUNDLE_FILES.items()}
        for path in files.values():
            self._require_file(path)

        price_columns = {s.name: s for s in self.read_monthly_csv(files['price'])}
        if PRICE_COLUMN not in price_columns:
            raise DataFormatException(f"{files['price']} lacks column '{PRICE_COLUMN}'")
        activity = {s.name: s for s in self.read_monthly_csv(files['activity'])}
        if IP_TOTAL_COLUMN not in activity:
            raise DataFormatException(f"{files['activity']} lacks column '{IP_TOTAL_COLUMN}'")

        weights_frame = self._read_frame(files['sector_weights'], ['sector', 'weight'])
        sectors, weights = [], []
        for row in weights_frame.itertuples(index=False):
            sector = str(row[0]).strip()
            if sector not in activity:
                raise DataFormatException(
                    f"{files['sector_weights']}: sector '{sector}' has no column in {files['activity']}",
                    context={'module': 'disagg', 'op': 'ingest', 'path': str(files['sector_weights'])},
                )
            sectors.append(activity[sector])
            weights.append(float(row[1]))

        predictors = self.read_monthly_csv(files['predictors'])
        meta = self.read_predictor_meta(files['predictors_meta'])
        bundle = DataBundle(
            price=price_columns[PRICE_COLUMN],
            ip_total=activity[IP_TOTAL_COLUMN],
            ip_sectors=tuple(sectors),
            sector_weights=tuple(weights),
            emissions_annual=self.read_annual_csv(files['emissions_annual']),
            predictors=tuple(predictors),
            predictor_meta=meta,
        )
        logger.info(
            f"Loaded bundle from {root}: price {bundle.price.start}..{bundle.price.end}, "
            f"{len(bundle.predictors)} predictors, {len(bundle.ip_sectors)} sectors"
        )
        return bundle

    def save_bundle(self, bundle: DataBundle, bundle_dir: PathLike) -> Path:
        root = Path(bundle_dir)
        root.mkdir(parents=True, exist_ok=True)
        self.write_monthly_csv(root / BUNDLE_FILES['price'], [bundle.price.with_values(bundle.price.values, name=PRICE_COLUMN)])
        self.write_monthly_csv(
            root / BUNDLE_FILES['activity'],
            [bundle.ip_total.with_values(bundle.ip_total.values, name=IP_TOTAL_COLUMN), *bundle.ip_sectors],
        )
        pd.DataFrame(
            {'sector': [s.name for s in bundle.ip_sectors], 'weight': list(bundle.sector_weights)}
        ).to_csv(root / BUNDLE_FILES['sector_weights'], index=False, float_format='%.12g', lineterminator='\n')
        self.write_annual_csv(root / BUNDLE_FILES['emissions_annual'], bundle.emissions_annual)
        self.write_monthly_csv(root / BUNDLE_FILES['predictors'], bundle.predictors)
        self.write_predictor_meta(root / BUNDLE_FILES['predictors_meta'], bundle.predictor_meta)
        return root


series_io_service = SeriesIOService()
