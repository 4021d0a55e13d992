"""
Unit tests for evaluation_service/services/report_service.py
"""
import numpy as np
import pandas as pd
import pytest

from evaluation_service.services.report_service import best_model, report_service
from evaluation_service.utils.exceptions import MissingStageOutputException
from shared.utils.artifacts import read_json


def score_rows(model_id, relative, success, target='price'):
    return [
        {
            'model_id': model_id, 'target': target, 'horizon': h, 'benchmark': 'rw', 'n_obs': 20,
            'rmsfe': 2.0 * rel, 'relative_rmsfe': rel, 'success_ratio': sr, 'qcrps': 0.5 * rel,
            'wqcrps_center': 0.1, 'wqcrps_right': 0.2, 'wqcrps_left': 0.3,
            'dm_statistic': None, 'dm_pvalue': None, 'pt_statistic': None, 'pt_pvalue': None,
        }
        for h, (rel, sr) in enumerate(zip(relative, success), start=1)
    ]


@pytest.fixture
def scores():
    rows = (
        score_rows('rw', [1.0] * 12, [0.5] * 12)
        + score_rows('bvar(1)', np.linspace(0.8, 1.2, 12), [0.6] * 12)
        + score_rows('bar(1)', [0.9] * 12, [0.6] * 12)
    )
    return pd.DataFrame(rows)


def write_run(run_dir, scores, tests=None, fluctuation=None):
    score_dir = run_dir / 'score'
    score_dir.mkdir(parents=True)
    scores.to_csv(score_dir / 'scores.csv', index=False)
    (tests if tests is not None else pd.DataFrame(
        columns=['model_id', 'target', 'horizon', 'benchmark', 'test', 'statistic', 'p_value', 'n_obs', 'reject']
    )).to_csv(score_dir / 'tests.csv', index=False)
    (fluctuation if fluctuation is not None else pd.DataFrame(
        columns=['model_id', 'target', 'horizon', 'benchmark', 'loss', 'date', 'statistic', 'cv']
    )).to_csv(score_dir / 'fluctuation.csv', index=False)


@pytest.mark.unit
class TestBestModel:
    """Test the row-wise best flag"""

    def test_smaller_is_better(self):
        """Test argmin for loss metrics"""
        assert best_model(pd.Series({'rw': 1.0, 'bvar(1)': 0.8}), False) == 'bvar(1)'

    def test_larger_is_better(self):
        """Test argmax for the success ratio"""
        assert best_model(pd.Series({'rw': 0.5, 'bvar(1)': 0.7}), True) == 'bvar(1)'

    def test_tie_break(self):
        """Test exact ties go to the lexicographically smallest id"""
        assert best_model(pd.Series({'rw': 0.9, 'bvar(1)': 0.9, 'bar(1)': 0.9}), False) == 'bar(1)'

    def test_missing_values(self):
        """Test NaN entries are ignored and an all-NaN row has no best model"""
        assert best_model(pd.Series({'rw': np.nan, 'bvar(1)': 1.1}), False) == 'bvar(1)'
        assert best_model(pd.Series({'rw': np.nan}), False) is None


@pytest.mark.unit
class TestMetricTables:
    """Test horizon x model tables"""

    def test_shape_and_flags(self, scores):
        """Test 12 horizon rows, sorted model columns and one best flag per row"""
        table = report_service.metric_table(scores, 'price', 'relative_rmsfe')
        assert len(table) == 12
        assert list(table.columns[:4]) == ['horizon', 'bar(1)', 'bvar(1)', 'rw']
        flags = table[[c for c in table.columns if c.startswith('best__')]]
        assert (flags.sum(axis=1) == 1).all()
        assert table.loc[0, 'best'] == 'bvar(1)'
        assert table.loc[11, 'best'] == 'bar(1)'

    def test_best_matches_argmin(self, scores):
        """Test the best column agrees with a direct argmin"""
        table = report_service.metric_table(scores, 'price', 'qcrps')
        values = table[['bar(1)', 'bvar(1)', 'rw']]
        np.testing.assert_array_equal(table['best'], values.idxmin(axis=1))

    def test_success_ratio_tie(self, scores):
        """Test equal success ratios resolve to bar(1) before bvar(1)"""
        table = report_service.metric_table(scores, 'price', 'success_ratio')
        assert set(table['best']) == {'bar(1)'}

    def test_pvalue_tables_have_no_flags(self, scores):
        """Test p-value columns are tabulated without a best flag"""
        frame = scores.assign(dm_pvalue=0.2)
        table = report_service.metric_table(frame, 'price', 'dm_pvalue')
        assert 'best' not in table.columns

    def test_empty_metrics_skipped(self, scores):
        """Test metrics that are missing everywhere get no table"""
        tables = report_service.build_tables(scores)
        assert 'price_relative_rmsfe' in tables
        assert 'price_dm_pvalue' not in tables


@pytest.mark.unit
class TestReport:
    """Test the report stage"""

    def test_incomplete_run(self, tmp_path):
        """Test a run without score outputs raises with exit code 3"""
        with pytest.raises(MissingStageOutputException) as exc_info:
            report_service.report(tmp_path)
        assert exc_info.value.exit_code == 3
        assert 'scores.csv' in str(exc_info.value)

    def test_full_report(self, scores, tmp_path):
        """Test tables, paths and summaries are written"""
        tests = pd.DataFrame([{
            'model_id': 'bvar(1)', 'target': 'price', 'horizon': 1, 'benchmark': 'rw',
            'test': 'fluctuation_point', 'statistic': 3.4, 'p_value': None, 'n_obs': 20, 'reject': True,
        }])
        fluctuation = pd.DataFrame([
            {'model_id': 'bvar(1)', 'target': 'price', 'horizon': 1, 'benchmark': 'rw',
             'loss': 'point', 'date': f"2020-0{i}", 'statistic': float(i), 'cv': 2.9}
            for i in range(1, 4)
        ])
        write_run(tmp_path, scores, tests, fluctuation)

        outputs = report_service.report(tmp_path, run_info={'config_hash': 'abc', 'seed': 7})

        assert outputs['price_relative_rmsfe'].is_file()
        wide = pd.read_csv(outputs['fluctuation_paths'])
        assert list(wide.columns) == ['date', 'bvar(1)|price|h1|point']
        summary = read_json(outputs['summary_json'])
        assert summary['run'] == {'config_hash': 'abc', 'seed': 7}
        assert summary['best']['price_relative_rmsfe']['1'] == 'bvar(1)'
        assert summary['fluctuation_rejections'][0]['loss'] == 'point'
        assert 'monitor' not in summary
        markdown = outputs['summary_md'].read_text(encoding='utf-8')
        assert '## price_relative_rmsfe' in markdown
        assert 'best__' not in markdown

    def test_monitor_summary_included(self, scores, tmp_path):
        """Test the monitoring report is folded into the summary"""
        write_run(tmp_path, scores)
        (tmp_path / 'monitor').mkdir()
        (tmp_path / 'monitor' / 'monitoring_report.json').write_text('{"model_id": "bvar(1)"}', encoding='utf-8')
        outputs = report_service.report(tmp_path)
        assert read_json(outputs['summary_json'])['monitor'] == {'model_id': 'bvar(1)'}
