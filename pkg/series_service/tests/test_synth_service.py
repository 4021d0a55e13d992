"""
Unit tests for series_service/services/synth_service.py
Tests determinism, ground-truth recovery and config validation of synthetic bundles
"""
import numpy as np
import pytest

from model_service.services.bvar_service import bvar_service
from model_service.services.forecast_service import forecast_service
from model_service.types import MinnesotaPrior
from series_service.services.factor_service import factor_service
from series_service.services.series_service import series_service
from series_service.services.synth_service import SynthConfig, synth_service
from series_service.services.window_service import window_service
from series_service.types import MonthDate, PredictorClass
from series_service.utils.exceptions import NonStationaryConfigException
from shared.utils.exceptions import ConfigurationException, ValidationException


def canonical_correlations(a, b):
    qa, _ = np.linalg.qr(a - a.mean(axis=0))
    qb, _ = np.linalg.qr(b - b.mean(axis=0))
    return np.linalg.svd(qa.T @ qb, compute_uv=False)


@pytest.mark.unit
class TestSynthConfig:
    """Test config parsing and validation"""

    def test_defaults_mirror_reference_geometry(self):
        """Test defaults give 136 months from Jun 2012 and 21 predictors in 9/7/3/2 classes"""
        config = SynthConfig()
        assert config.n_months == 136
        assert config.start_month == MonthDate(2012, 6)
        assert config.end_month == MonthDate(2023, 9)
        assert config.class_sizes == (9, 7, 3, 2)
        config.validate()

    def test_from_mapping(self):
        """Test raw SYNTH strings are coerced to field types"""
        config = SynthConfig.from_mapping(
            {'N_MONTHS': '150', 'SV': 'true', 'CLASS_SIZES': '10;6;3;2', 'PRICE_DRIFT': '0.02'}, seed=11
        )
        assert config.n_months == 150
        assert config.sv is True
        assert config.class_sizes == (10, 6, 3, 2)
        assert config.price_drift == pytest.approx(0.02)
        assert config.seed == 11

    def test_from_mapping_unknown_key(self):
        """Test unknown SYNTH keys are configuration errors"""
        with pytest.raises(ConfigurationException):
            SynthConfig.from_mapping({'WOBBLE': '1'})

    def test_non_stationary_rejected(self):
        """Test a unit-root factor process is rejected"""
        with pytest.raises(NonStationaryConfigException) as exc_info:
            synth_service.generate_bundle(SynthConfig(factor_persistence=1.0))
        assert exc_info.value.exit_code == 2

    def test_too_short_rejected(self):
        """Test fewer than 120 months is rejected"""
        with pytest.raises(ValidationException):
            synth_service.generate_bundle(SynthConfig(n_months=60))

    def test_class_sizes_must_sum(self):
        """Test class sizes must add up to the predictor count"""
        with pytest.raises(ValidationException):
            synth_service.generate_bundle(SynthConfig(n_predictors=20))


@pytest.mark.unit
class TestGenerateBundle:
    """Test bundle shape and ground truth"""

    def test_deterministic(self, small_synth_config):
        """Test a fixed seed gives identical bundles"""
        first = synth_service.generate_bundle(small_synth_config).bundle
        second = synth_service.generate_bundle(small_synth_config).bundle
        np.testing.assert_array_equal(first.price.values, second.price.values)
        np.testing.assert_array_equal(first.emissions_annual.values, second.emissions_annual.values)
        for a, b in zip(first.predictors, second.predictors):
            np.testing.assert_array_equal(a.values, b.values)

    def test_seed_changes_draws(self, small_synth_config):
        """Test different seeds give different bundles"""
        first = synth_service.generate_bundle(small_synth_config, seed=1).bundle
        second = synth_service.generate_bundle(small_synth_config, seed=2).bundle
        assert not np.array_equal(first.price.values, second.price.values)

    def test_shapes(self, synth_result, small_synth_config):
        """Test geometry of the generated bundle"""
        bundle = synth_result.bundle
        assert bundle.price.start == MonthDate(2012, 6)
        assert len(bundle.price) == small_synth_config.n_months
        assert bundle.ip_total.start == MonthDate(2012, 1)
        assert bundle.emissions_annual.start_year == 2012
        assert len(bundle.predictors) == 6
        classes = [bundle.predictor_meta[p.name].predictor_class for p in bundle.predictors]
        assert classes.count(PredictorClass.ECONOMIC_ACTIVITY) == 2
        assert classes.count(PredictorClass.WEATHER) == 1
        assert np.all(bundle.price.values > 0)

    def test_annual_totals_are_monthly_sums(self, synth_result):
        """Test annual emissions are calendar-year sums of the monthly truth"""
        monthly = np.asarray(synth_result.ledger['emissions_monthly'])
        annual = synth_result.bundle.emissions_annual.values
        np.testing.assert_allclose(annual, monthly[:12 * annual.size].reshape(-1, 12).sum(axis=1))

    def test_chow_lin_constraint_on_bundle(self, synth_bundle):
        """Test the interpolated emissions respect every annual total"""
        result = window_service.interpolate_emissions(synth_bundle)
        annual = synth_bundle.emissions_annual
        sums = result.monthly.values[:12 * len(annual)].reshape(-1, 12).sum(axis=1)
        np.testing.assert_allclose(sums, annual.values, rtol=1e-9)

    def test_noiseless_factor_recovery(self):
        """Test zero idiosyncratic noise lets PCA recover the factor space"""
        config = SynthConfig(idio_sd=0.0, seed=3)
        result = synth_service.generate_bundle(config)
        bundle = result.bundle
        transformed = window_service.transformed_predictors(bundle, bundle.price.end)
        panel = series_service.align_panel(transformed)
        model = factor_service.extract_factors(panel, config.n_factors)
        lead = MonthDate(2012, 1).months_until(panel.sample[0])
        truth = np.asarray(result.ledger['factors'])[lead:lead + panel.n_obs]
        assert canonical_correlations(model.scores, truth).min() > 0.999

    def test_sv_off_shocks_homoskedastic(self):
        """Test squared price shocks are serially uncorrelated without SV"""
        result = synth_service.generate_bundle(SynthConfig(n_months=2000, seed=5))
        shocks = np.asarray(result.ledger['price_shocks']) ** 2
        rho = np.corrcoef(shocks[1:], shocks[:-1])[0, 1]
        assert abs(rho) < 0.1
        assert result.ledger['log_vol'] is None

    def test_sv_on_records_log_vol(self, small_synth_config):
        """Test the SV path is kept in the ledger"""
        config = SynthConfig(**{**small_synth_config.__dict__, 'sv': True})
        result = synth_service.generate_bundle(config)
        assert np.asarray(result.ledger['log_vol']).shape == (len(result.bundle.ip_total),)

    def test_oracle_forecast_shape(self, synth_result):
        """Test oracle Δ-log price paths are available for any origin"""
        path = synth_service.oracle_price_forecast(synth_result, MonthDate(2017, 12), 12)
        assert path.shape == (12,)
        assert np.all(np.isfinite(path))

    def test_oracle_lower_bounds_fitted_models(self):
        """Test on a bundle without price noise the oracle path beats a fitted BAR(1) and the random walk"""
        result = synth_service.generate_bundle(SynthConfig(
            price_sd=0.0, emissions_sd=0.0, factor_persistence=0.9, price_factor_loading=0.04, seed=4,
        ))
        realized = np.asarray(result.ledger['price_dlog'])
        monthly_start = MonthDate.parse(result.ledger['monthly_start'])
        price = result.bundle.price

        errors = {'oracle': [], 'bar': [], 'rw': []}
        origin = MonthDate(2016, 1)
        while origin <= price.end.shift(-12):
            t = monthly_start.months_until(origin)
            actual = realized[t + 1:t + 13]
            dlog = series_service.log_diff(price.truncate(origin))
            post = bvar_service.fit_bar(dlog, 1, MinnesotaPrior())
            paths = {
                'oracle': synth_service.oracle_price_forecast(result, origin, 12),
                'bar': forecast_service.iterate_var(post.coef_mean, dlog.values[:, None], 1, 12)[:, 0],
                'rw': np.zeros(12),
            }
            for name, path in paths.items():
                errors[name].append((actual[0] - path[0], actual.sum() - path.sum()))
            origin = origin.shift(1)

        rmsfe = {name: np.sqrt(np.mean(np.square(e), axis=0)) for name, e in errors.items()}
        assert rmsfe['oracle'][0] < 1e-10
        for fitted in ('bar', 'rw'):
            assert rmsfe['oracle'][0] <= rmsfe[fitted][0]
            assert rmsfe['oracle'][1] <= rmsfe[fitted][1]
