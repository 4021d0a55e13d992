"""
Integration tests for evaluation_service/services/pipeline_service.py and the
management commands that drive it
"""
import pandas as pd
import pytest
from django.core.management import CommandError, call_command
from freezegun import freeze_time

from evaluation_service.services.pipeline_service import pipeline_service
from evaluation_service.utils.exceptions import MissingStageOutputException
from shared.utils.artifacts import read_json
from shared.utils.exceptions import ConfigurationException
from shared.utils.run_config import PIPELINE_STAGES, load_run_config

SYNTH_KEYS = {
    'SYNTH__N_MONTHS': '120',
    'SYNTH__START': '2012-06',
    'SYNTH__N_PREDICTORS': '6',
    'SYNTH__CLASS_SIZES': '2;2;1;1',
    'SYNTH__N_FACTORS': '2',
}
RUN_KEYS = {
    **SYNTH_KEYS,
    'BACKTEST__FIRST_ESTIMATION_END': '2019-01',
    'BACKTEST__LAST_ORIGIN': '2019-12',
    'BACKTEST__MODELS': 'rw;bar(1);rw@emissions;bar(1)@emissions',
    'FORECAST__HORIZON': '12',
    'FORECAST__DENSITY': 'false',
    'EVAL__FLUCTUATION_WINDOW': '5',
    'PIPELINE__SEED': '5',
}


def make_config(**keys):
    return load_run_config(overrides={**RUN_KEYS, **{k: str(v) for k, v in keys.items()}})


def write_config_file(path, **keys):
    lines = [f"{k}={v}" for k, v in {**RUN_KEYS, **keys}.items()]
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return path


@pytest.fixture(scope='module')
def full_run(tmp_path_factory):
    """One complete pipeline run shared by the read-only checks below"""
    out = tmp_path_factory.mktemp('pipeline') / 'run'
    pipeline_service.run(make_config(), out)
    return out


@pytest.mark.integration
class TestPipelineRun:
    """Test a full run over a small synthetic bundle"""

    def test_stage_outputs(self, full_run):
        """Test every stage wrote its directory and the manifest lists them in order"""
        for relative in (
            'ingest/price.csv', 'ingest/ledger.json', 'ingest/source.json',
            'interpolate/emissions_monthly.csv', 'interpolate/chow_lin.json',
            'factors/loadings.csv', 'factors/variance_shares.csv', 'factors/r2.csv',
            'factors/factors.csv', 'factors/contributions.csv',
            'backtest/records.csv', 'backtest/records.json', 'backtest/plan.json', 'backtest/fits.csv',
            'score/scores.csv', 'score/tests.csv', 'score/fluctuation.csv',
            'monitor/demand.csv', 'monitor/price_up.csv', 'monitor/price_down.csv',
            'monitor/monitoring_report.json',
            'report/summary.json', 'report/summary.md', 'report/price_relative_rmsfe.csv',
        ):
            assert (full_run / relative).is_file(), relative
        manifest = read_json(full_run / 'manifest.json')
        assert list(manifest['stages']) == list(PIPELINE_STAGES)
        assert manifest['seed'] == 5
        assert 'backtest/records.json' in manifest['stages']['backtest']['outputs']
        assert set(manifest['stage_timings_ms']) == set(PIPELINE_STAGES)

    def test_common_evaluation_sample(self, full_run):
        """Test every model and horizon is evaluated on the same twelve target months"""
        records = pd.read_csv(full_run / 'backtest' / 'records.csv')
        evaluated = records[records['evaluation']]
        counts = evaluated.groupby(['model_id', 'horizon']).size()
        assert (counts == 12).all()
        assert len(counts) == 4 * 12
        months = evaluated.groupby(['model_id', 'horizon'])['target_month'].agg(lambda s: tuple(sorted(s)))
        assert months.nunique() == 1
        assert months.iloc[0][0] == '2020-01'

    def test_best_flags(self, full_run):
        """Test the report's best column is the row argmin with ties to the smallest id"""
        table = pd.read_csv(full_run / 'report' / 'price_relative_rmsfe.csv')
        models = [c for c in table.columns if c not in ('horizon', 'best') and not c.startswith('best__')]
        assert models == ['bar(1)', 'rw']
        assert (table['rw'] == 1.0).all()
        for _, row in table.iterrows():
            smallest = min(row[m] for m in models)
            assert row['best'] == sorted(m for m in models if row[m] == smallest)[0]
            assert row[f"best__{row['best']}"]

    def test_price_pressure_bounds(self, full_run):
        """Test PP+ + PP- <= 1 at every origin"""
        up = pd.read_csv(full_run / 'monitor' / 'price_up.csv')
        down = pd.read_csv(full_run / 'monitor' / 'price_down.csv')
        merged = up.merge(down, on='origin', suffixes=('_up', '_down'))
        assert len(merged) == len(up) > 0
        assert ((merged['value_up'] + merged['value_down']) <= 1.0).all()
        report = read_json(full_run / 'monitor' / 'monitoring_report.json')
        assert report['price_model'] == 'bar(1)'
        assert report['emissions_model'] == 'bar(1)@emissions'
        assert report['max_pressure_sum'] <= 1.0

    def test_manifest_hash_is_reproducible(self, full_run, tmp_path):
        """Test a second run with the same config and seed gives the same manifest hash"""
        again = pipeline_service.run(make_config(), tmp_path / 'again')
        first = read_json(full_run / 'manifest.json')
        second = read_json(again / 'manifest.json')
        assert second['manifest_hash'] == first['manifest_hash']
        assert second['stages'] == first['stages']

    def test_single_stage_rerun(self, full_run, tmp_path):
        """Test the report stage alone reproduces the report of the full run"""
        copy = tmp_path / 'copy'
        copy.mkdir()
        for stage in ('score', 'monitor'):
            (copy / stage).mkdir()
            for path in (full_run / stage).iterdir():
                (copy / stage / path.name).write_bytes(path.read_bytes())
        pipeline_service.run(make_config(), copy, stages=['report'])
        assert (
            (copy / 'report' / 'summary.json').read_bytes()
            == (full_run / 'report' / 'summary.json').read_bytes()
        )


@pytest.mark.integration
class TestPipelineStages:
    """Test stage selection, inputs and the manifest timestamp"""

    def test_unknown_stage(self, tmp_path):
        """Test unknown stage names are a configuration error"""
        with pytest.raises(ConfigurationException):
            pipeline_service.run(make_config(), tmp_path, stages=['ingest', 'plot'])

    def test_missing_upstream_stage(self, tmp_path):
        """Test score without backtest outputs reports the missing file"""
        with pytest.raises(MissingStageOutputException) as exc_info:
            pipeline_service.run(make_config(), tmp_path, stages=['score'])
        assert exc_info.value.exit_code == 3
        assert 'plan.json' in str(exc_info.value)

    def test_ingest_needs_a_source(self, tmp_path):
        """Test a config with neither bundle dir nor synthetic keys is rejected"""
        config = load_run_config(overrides={'BACKTEST__FIRST_ESTIMATION_END': '2019-01'})
        with pytest.raises(ConfigurationException):
            pipeline_service.run(config, tmp_path, stages=['ingest'])

    @freeze_time('2024-05-01 12:00:00')
    def test_manifest_timestamp(self, tmp_path):
        """Test created_at is written from the current time"""
        pipeline_service.run(make_config(), tmp_path, stages=['ingest'])
        manifest = read_json(tmp_path / 'manifest.json')
        assert manifest['created_at'].startswith('2024-05-01T12:00:00')
        assert list(manifest['stages']) == ['ingest']

    def test_manifest_keeps_earlier_stages(self, tmp_path):
        """Test a later single-stage run adds to the manifest of the same config"""
        pipeline_service.run(make_config(), tmp_path, stages=['ingest'])
        pipeline_service.run(make_config(), tmp_path, stages=['interpolate'])
        manifest = read_json(tmp_path / 'manifest.json')
        assert list(manifest['stages']) == ['ingest', 'interpolate']

    def test_short_horizon_skips_monitoring(self, tmp_path):
        """Test monitoring needs the twelve-month path"""
        config = make_config(FORECAST__HORIZON=3, BACKTEST__MODELS='rw;bar(1)')
        pipeline_service.run(config, tmp_path, stages=['ingest', 'backtest', 'monitor'])
        report = read_json(tmp_path / 'monitor' / 'monitoring_report.json')
        assert report['skipped'] == 'horizon'

    def test_unknown_monitor_model(self, tmp_path):
        """Test the configured monitor model must be part of the backtest"""
        config = make_config(MONITOR__PRICE_MODEL='bvar(2)', BACKTEST__MODELS='rw;bar(1)')
        with pytest.raises(ConfigurationException):
            pipeline_service.run(config, tmp_path, stages=['ingest', 'backtest', 'monitor'])


@pytest.mark.integration
class TestCommands:
    """Test exit codes of the management commands"""

    def test_unsupported_arima_order(self, tmp_path):
        """Test arima(2,1,2) stops the backtest with exit code 2"""
        config = write_config_file(tmp_path / 'run.cfg', BACKTEST__MODELS='rw;arima(2,1,2)')
        with pytest.raises(CommandError) as exc_info:
            call_command('run', config=str(config), out=str(tmp_path / 'run'), stages='ingest,backtest')
        assert exc_info.value.returncode == 2
        assert 'arima(2,1,2)' in str(exc_info.value)

    def test_missing_predictor_file(self, tmp_path):
        """Test a bundle without predictors.csv stops ingest with exit code 3 naming the file"""
        bundle_dir = pipeline_service.synthesize(make_config(), tmp_path / 'bundle')
        (bundle_dir / 'predictors.csv').unlink()
        config = write_config_file(tmp_path / 'run.cfg', DATA__BUNDLE_DIR=str(bundle_dir))
        with pytest.raises(CommandError) as exc_info:
            call_command('ingest', config=str(config), out=str(tmp_path / 'run'))
        assert exc_info.value.returncode == 3
        assert str(bundle_dir / 'predictors.csv') in str(exc_info.value)

    def test_bad_config_value(self, tmp_path):
        """Test an unparsable value is a configuration error"""
        config = write_config_file(tmp_path / 'run.cfg', FORECAST__HORIZON='twelve')
        with pytest.raises(CommandError) as exc_info:
            call_command('ingest', config=str(config), out=str(tmp_path / 'run'))
        assert exc_info.value.returncode == 2

    def test_synth_command(self, tmp_path):
        """Test synth writes a loadable bundle plus its ledger"""
        config = write_config_file(tmp_path / 'run.cfg')
        call_command('synth', config=str(config), out=str(tmp_path / 'bundle'))
        assert (tmp_path / 'bundle' / 'predictors.csv').is_file()
        assert read_json(tmp_path / 'bundle' / 'ledger.json')['seed'] == 5

    def test_report_on_incomplete_run(self, tmp_path):
        """Test report on a directory without score outputs exits with 3"""
        config = write_config_file(tmp_path / 'run.cfg')
        with pytest.raises(CommandError) as exc_info:
            call_command('report', str(tmp_path / 'empty'), config=str(config))
        assert exc_info.value.returncode == 3

    def test_seed_flag_changes_config_hash(self, tmp_path):
        """Test --seed feeds the manifest"""
        config = write_config_file(tmp_path / 'run.cfg')
        call_command('ingest', config=str(config), out=str(tmp_path / 'run'), seed=9)
        assert read_json(tmp_path / 'run' / 'manifest.json')['seed'] == 9


@pytest.mark.slow
class TestFactorAugmentedAccuracy:
    """Test the factor-augmented VAR beats the random walk when price loads on the factors"""

    ACCURACY_KEYS = {
        'SYNTH__N_MONTHS': '168',
        'SYNTH__START': '2009-01',
        'SYNTH__N_PREDICTORS': '20',
        'SYNTH__CLASS_SIZES': '8;7;3;2',
        'SYNTH__N_FACTORS': '2',
        'SYNTH__FACTOR_PERSISTENCE': '0.9',
        'SYNTH__PRICE_FACTOR_LOADING': '0.03',
        'SYNTH__PRICE_SD': '0.03',
        'BACKTEST__FIRST_ESTIMATION_END': '2015-12',
        'BACKTEST__MODELS': 'rw;bfavar(1,2)',
        'FORECAST__HORIZON': '12',
        'FORECAST__DENSITY': 'false',
    }

    def test_twelve_month_relative_rmsfe(self, tmp_path):
        """Test mean twelve-month relative RMSFE over five seeds is below 0.95"""
        ratios = []
        for seed in range(5):
            config = load_run_config(overrides={**self.ACCURACY_KEYS, 'PIPELINE__SEED': str(seed)})
            out = tmp_path / f"seed_{seed}"
            pipeline_service.run(config, out, stages=['ingest', 'backtest', 'score'])
            scores = pd.read_csv(out / 'score' / 'scores.csv')
            price = scores[(scores['target'] == 'price') & (scores['horizon'] == 12)].set_index('model_id')
            assert price.loc['rw', 'relative_rmsfe'] == pytest.approx(1.0)
            ratios.append(price.loc['bfavar(1,2)', 'relative_rmsfe'])
        assert sum(ratios) / len(ratios) < 0.95
