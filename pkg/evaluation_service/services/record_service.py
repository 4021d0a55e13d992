# evaluation_service/services/record_service.py
"""
Forecast records on disk: a flat CSV for people and plots, and a JSON file
that the later stages read back without loss of precision.
"""
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from evaluation_service.utils.exceptions import MissingStageOutputException, RecordFormatException
from model_service.types import ForecastRecord
from series_service.types import MonthDate
from shared.utils.artifacts import read_json, write_json

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

RECORD_COLUMNS = (
    'model_id', 'target', 'origin', 'horizon', 'target_month', 'origin_level',
    'point_level', 'sign', 'draw_mean', 'realized', 'evaluation',
)


def canonical_key(record: ForecastRecord):
    return record.origin, record.model_id, record.horizon


def canonical_order(records: Iterable[ForecastRecord]) -> List[ForecastRecord]:
    """Sort by (origin, model id, horizon) so output is independent of scheduling"""
    return sorted(records, key=canonical_key)


class RecordService:

    @staticmethod
    def record_to_dict(record: ForecastRecord) -> Dict[str, Any]:
        return {
            'model_id': record.model_id,
            'target': record.target,
            'origin': str(record.origin),
            'horizon': record.horizon,
            'origin_level': float(record.origin_level),
            'point_level': float(record.point_level),
            'sign': int(record.sign),
            'quantiles': {str(float(alpha)): float(value) for alpha, value in sorted(record.quantiles.items())},
            'draws': None if record.draws is None else record.draws.tolist(),
            'draw_mean': None if record.draw_mean is None else float(record.draw_mean),
            'realized': None if record.realized is None else float(record.realized),
        }

    @staticmethod
    def record_from_dict(payload: Dict[str, Any]) -> ForecastRecord:
        try:
            draws = payload.get('draws')
            return ForecastRecord(
                model_id=payload['model_id'],
                target=payload['target'],
                origin=MonthDate.parse(payload['origin']),
                horizon=int(payload['horizon']),
                origin_level=float(payload['origin_level']),
                point_level=float(payload['point_level']),
                sign=int(payload['sign']),
                quantiles={float(a): float(v) for a, v in (payload.get('quantiles') or {}).items()},
                draws=None if draws is None else np.asarray(draws, dtype=float),
                draw_mean=None if payload.get('draw_mean') is None else float(payload['draw_mean']),
                realized=None if payload.get('realized') is None else float(payload['realized']),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RecordFormatException(
                f"Malformed forecast record: {exc}",
                context={'module': 'backtest', 'op': 'load_records'},
            )

    def to_frame(
        self,
        records: Sequence[ForecastRecord],
        in_evaluation: Optional[Callable[[MonthDate, int], bool]] = None,
    ) -> pd.DataFrame:
        rows = []
        for record in canonical_order(records):
            row = {
                'model_id': record.model_id,
                'target': record.target,
                'origin': str(record.origin),
                'horizon': record.horizon,
                'target_month': str(record.target_month),
                'origin_level': record.origin_level,
                'point_level': record.point_level,
                'sign': record.sign,
                'draw_mean': record.draw_mean,
                'realized': record.realized,
                'evaluation': True if in_evaluation is None else bool(in_evaluation(record.origin, record.horizon)),
            }
            for alpha, value in sorted(record.quantiles.items()):
                row[f"q{alpha:.4f}"] = value
            rows.append(row)
        frame = pd.DataFrame(rows)
        if frame.empty:
            return pd.DataFrame(columns=list(RECORD_COLUMNS))
        quantile_columns = sorted(c for c in frame.columns if c.startswith('q'))
        return frame[list(RECORD_COLUMNS) + quantile_columns]

    def save_records(
        self,
        records: Sequence[ForecastRecord],
        directory: PathLike,
        in_evaluation: Optional[Callable[[MonthDate, int], bool]] = None,
    ) -> Dict[str, Path]:
        """Write ``records.csv`` and ``records.json`` in canonical order"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        ordered = canonical_order(records)
        csv_path = directory / 'records.csv'
        self.to_frame(ordered, in_evaluation).to_csv(
            csv_path, index=False, float_format='%.10g', lineterminator='\n', encoding='utf-8'
        )
        json_path = write_json(directory / 'records.json', [self.record_to_dict(r) for r in ordered])
        logger.info(f"Wrote {len(ordered)} forecast records to {directory}")
        return {'records_csv': csv_path, 'records_json': json_path}

    def load_records(self, path: PathLike) -> List[ForecastRecord]:
        path = Path(path)
        if not path.is_file():
            raise MissingStageOutputException(
                f"Record file not found: {path}",
                context={'module': 'backtest', 'op': 'load_records', 'path': str(path)},
            )
        payload = read_json(path)
        if not isinstance(payload, list):
            raise RecordFormatException(
                f"{path} must hold a list of records",
                context={'module': 'backtest', 'op': 'load_records', 'path': str(path)},
            )
        return canonical_order(self.record_from_dict(item) for item in payload)


record_service = RecordService()
