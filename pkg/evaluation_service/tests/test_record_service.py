"""
Unit tests for evaluation_service/services/record_service.py
"""
import json

import numpy as np
import pandas as pd
import pytest

from evaluation_service.services.record_service import canonical_order, record_service
from evaluation_service.utils.exceptions import MissingStageOutputException, RecordFormatException
from model_service.types import ForecastRecord
from series_service.types import MonthDate


def make_record(model_id='bvar(1)', origin=MonthDate(2021, 3), horizon=2, **kwargs):
    values = dict(
        model_id=model_id,
        target='price',
        origin=origin,
        horizon=horizon,
        origin_level=60.5,
        point_level=np.float64(61.25),
        sign=1,
        quantiles={np.float64(1 / 3): 58.0, np.float64(2 / 3): 64.0},
    )
    values.update(kwargs)
    return ForecastRecord(**values)


@pytest.mark.unit
class TestRecordService:
    """Test record ordering and the CSV/JSON stage files"""

    def test_canonical_order(self):
        """Test sorting by origin, model id and horizon"""
        records = [
            make_record('rw', MonthDate(2021, 4), 1),
            make_record('bvar(1)', MonthDate(2021, 4), 2),
            make_record('bvar(1)', MonthDate(2021, 4), 1),
            make_record('rw', MonthDate(2021, 3), 3),
        ]
        ordered = canonical_order(records)
        assert [(str(r.origin), r.model_id, r.horizon) for r in ordered] == [
            ('2021-03', 'rw', 3), ('2021-04', 'bvar(1)', 1), ('2021-04', 'bvar(1)', 2), ('2021-04', 'rw', 1),
        ]

    def test_json_is_lossless(self, tmp_path):
        """Test records read back equal the records written"""
        records = [
            make_record(realized=63.0, draws=np.array([60.0, 61.0, 62.5]), draw_mean=61.1666),
            make_record('rw', quantiles={}),
        ]
        record_service.save_records(records, tmp_path)
        loaded = record_service.load_records(tmp_path / 'records.json')
        expected = [record_service.record_to_dict(r) for r in canonical_order(records)]
        assert [record_service.record_to_dict(r) for r in loaded] == expected
        assert loaded[0].quantiles[1 / 3] == 58.0

    def test_json_payload_is_plain(self, tmp_path):
        """Test numpy scalars are stored as plain JSON numbers"""
        record_service.save_records([make_record()], tmp_path)
        payload = json.loads((tmp_path / 'records.json').read_text(encoding='utf-8'))
        assert payload[0]['point_level'] == 61.25
        assert set(payload[0]['quantiles']) == {str(1 / 3), str(2 / 3)}

    def test_csv_columns(self, tmp_path):
        """Test the flat CSV carries the evaluation flag and one column per quantile"""
        records = [make_record(origin=MonthDate(2021, 1)), make_record(origin=MonthDate(2021, 2))]
        outputs = record_service.save_records(
            records, tmp_path, in_evaluation=lambda origin, horizon: origin == MonthDate(2021, 2)
        )
        frame = pd.read_csv(outputs['records_csv'])
        assert list(frame.columns[:11]) == [
            'model_id', 'target', 'origin', 'horizon', 'target_month', 'origin_level',
            'point_level', 'sign', 'draw_mean', 'realized', 'evaluation',
        ]
        assert list(frame.columns[11:]) == ['q0.3333', 'q0.6667']
        assert list(frame['evaluation']) == [False, True]
        assert list(frame['target_month']) == ['2021-03', '2021-04']

    def test_missing_file(self, tmp_path):
        """Test loading from an incomplete run directory"""
        with pytest.raises(MissingStageOutputException) as exc_info:
            record_service.load_records(tmp_path / 'records.json')
        assert exc_info.value.exit_code == 3

    def test_malformed_records(self, tmp_path):
        """Test records lacking fields are rejected"""
        path = tmp_path / 'records.json'
        path.write_text(json.dumps([{'model_id': 'rw'}]), encoding='utf-8')
        with pytest.raises(RecordFormatException):
            record_service.load_records(path)

    def test_not_a_list(self, tmp_path):
        """Test the file must hold a list"""
        path = tmp_path / 'records.json'
        path.write_text(json.dumps({'records': []}), encoding='utf-8')
        with pytest.raises(RecordFormatException):
            record_service.load_records(path)
