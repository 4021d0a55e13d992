"""
Unit tests for series_service/services/io_service.py
Tests CSV ingestion rules and bundle loading
"""
import numpy as np
import pytest

from series_service.services.io_service import BUNDLE_FILES, series_io_service
from series_service.types import MonthDate, PredictorClass, TransformTag
from shared.utils.exceptions import DataFormatException, MissingDataFileException


@pytest.mark.unit
class TestMonthlyCsv:
    """Test monthly CSV parsing"""

    def test_ragged_columns(self, tmp_path):
        """Test columns with different start and end months"""
        path = tmp_path / 'monthly.csv'
        path.write_text('date,a,b\n2020-01,1.0,\n2020-02,2.0,5.0\n2020-03,,6.0\n', encoding='utf-8')
        a, b = series_io_service.read_monthly_csv(path)
        assert (a.name, a.start, a.end) == ('a', MonthDate(2020, 1), MonthDate(2020, 2))
        assert (b.name, b.start, b.end) == ('b', MonthDate(2020, 2), MonthDate(2020, 3))
        np.testing.assert_allclose(b.values, [5.0, 6.0])

    def test_interior_gap_rejected(self, tmp_path):
        """Test a missing interior value is a data error naming the month"""
        path = tmp_path / 'monthly.csv'
        path.write_text('date,a\n2020-01,1\n2020-02,\n2020-03,3\n', encoding='utf-8')
        with pytest.raises(DataFormatException) as exc_info:
            series_io_service.read_monthly_csv(path)
        assert '2020-02' in str(exc_info.value)

    def test_non_consecutive_dates(self, tmp_path):
        """Test skipped months are rejected"""
        path = tmp_path / 'monthly.csv'
        path.write_text('date,a\n2020-01,1\n2020-03,3\n', encoding='utf-8')
        with pytest.raises(DataFormatException):
            series_io_service.read_monthly_csv(path)

    def test_missing_file(self, tmp_path):
        """Test a missing file raises exit code 3 with the path"""
        with pytest.raises(MissingDataFileException) as exc_info:
            series_io_service.read_monthly_csv(tmp_path / 'nope.csv')
        assert 'nope.csv' in str(exc_info.value)
        assert exc_info.value.exit_code == 3


@pytest.mark.unit
class TestSidecars:
    """Test annual and metadata files"""

    def test_annual(self, tmp_path):
        """Test year,value parsing"""
        path = tmp_path / 'annual.csv'
        path.write_text('year,value\n2015,10\n2016,12.5\n', encoding='utf-8')
        annual = series_io_service.read_annual_csv(path)
        assert annual.start_year == 2015
        np.testing.assert_allclose(annual.values, [10.0, 12.5])

    def test_meta(self, tmp_path):
        """Test name,class,transform parsing"""
        path = tmp_path / 'meta.csv'
        path.write_text('name,class,transform\nbrent,energy,log_diff\nhdd,weather,none\n', encoding='utf-8')
        meta = series_io_service.read_predictor_meta(path)
        assert meta['brent'].predictor_class is PredictorClass.ENERGY
        assert meta['hdd'].transform is TransformTag.NONE

    def test_meta_bad_class(self, tmp_path):
        """Test an unknown class is a data error"""
        path = tmp_path / 'meta.csv'
        path.write_text('name,class,transform\nbrent,fuel,log_diff\n', encoding='utf-8')
        with pytest.raises(DataFormatException):
            series_io_service.read_predictor_meta(path)


@pytest.mark.unit
class TestBundle:
    """Test bundle save/load"""

    def test_written_bundle_reads_back(self, synth_bundle, tmp_path):
        """Test the generator's output is readable by the ingestion layer"""
        series_io_service.save_bundle(synth_bundle, tmp_path / 'bundle')
        loaded = series_io_service.load_bundle(tmp_path / 'bundle')
        assert loaded.price.start == synth_bundle.price.start
        np.testing.assert_allclose(loaded.price.values, synth_bundle.price.values, rtol=1e-11)
        assert [p.name for p in loaded.predictors] == [p.name for p in synth_bundle.predictors]
        assert loaded.predictor_meta == synth_bundle.predictor_meta
        np.testing.assert_allclose(loaded.sector_weights, synth_bundle.sector_weights, rtol=1e-11)

    def test_missing_predictor_file(self, synth_bundle, tmp_path):
        """Test a missing predictor file names its path"""
        root = series_io_service.save_bundle(synth_bundle, tmp_path / 'bundle')
        (root / BUNDLE_FILES['predictors']).unlink()
        with pytest.raises(MissingDataFileException) as exc_info:
            series_io_service.load_bundle(root)
        assert BUNDLE_FILES['predictors'] in str(exc_info.value)
