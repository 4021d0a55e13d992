"""
Unit tests for model_service/services/forecast_service.py
Tests point iteration, level conversion, sign forecasts, predictive simulation and quantile grids
"""
import numpy as np
import pytest

from model_service.services.bvar_service import bvar_service
from model_service.services.forecast_service import forecast_service
from model_service.types import (
    ArimaPosterior,
    ConjugatePosterior,
    MinnesotaPrior,
    RandomWalkPosterior,
    SvDraws,
    VarSpec,
)
from model_service.utils.exceptions import (
    ExplosiveForecastException,
    ForecastOverflowException,
    ModelDataException,
)
from series_service.services.series_service import series_service
from series_service.types import MonthDate, MonthlySeries
from shared.utils.exceptions import ValidationException
from shared.utils.run_config import ForecastConfig


def ar_posterior(coefs, intercept=0.0, sigma2=0.01):
    """Conjugate posterior of a univariate AR with the given means"""
    p = len(coefs)
    spec = VarSpec(n=1, p=p)
    return ConjugatePosterior(
        coef_mean=np.array([[intercept]] + [[c] for c in coefs]),
        coef_row_cov=1e-4 * np.eye(p + 1),
        sigma_scale=np.array([[sigma2 * 10.0]]),
        sigma_dof=12.0,
        spec=spec,
    )


def rw(sigma2=0.01, drift=0.0):
    return RandomWalkPosterior(drift=drift, sigma2=sigma2, with_drift=drift != 0.0, n_obs=100)


@pytest.mark.unit
class TestPointForecast:
    """Test plug-in iteration"""

    def test_random_walk_is_flat(self):
        """Test the no-change model forecasts zero changes"""
        np.testing.assert_array_equal(forecast_service.iterate_point_forecast(rw(), None, 12), np.zeros(12))

    def test_ar1_geometric_decay(self):
        """Test AR(1) φ=0.5 from Δ=0.2 gives 0.1, 0.05, 0.025"""
        path = forecast_service.iterate_point_forecast(ar_posterior([0.5]), np.array([0.2]), 3)
        np.testing.assert_allclose(path, [0.1, 0.05, 0.025], atol=1e-15)

    def test_var_matches_matrix_powers(self, rng):
        """Test a VAR(1) path equals repeated multiplication by A"""
        A = np.array([[0.5, 0.2, 0.0], [0.1, 0.3, -0.2], [0.0, 0.4, 0.6]])
        coef = np.vstack([np.zeros((1, 3)), A.T])
        history = rng.normal(size=(10, 3))
        path = forecast_service.iterate_var(coef, history, 1, 6)
        state = history[-1]
        for step in range(6):
            state = A @ state
            np.testing.assert_allclose(path[step], state, atol=1e-12)

    def test_var_two_lags(self):
        """Test the lag order of the history is most recent first"""
        coef = np.array([[0.0], [1.0], [-1.0]])
        path = forecast_service.iterate_var(coef, np.array([[1.0], [3.0]]), 2, 2)
        np.testing.assert_allclose(path[:, 0], [2.0, -1.0])

    def test_arima_decay(self):
        """Test the ARMA point path decays at rate φ from the predicted state"""
        post = ArimaPosterior(
            ar=1, ma=0, phi=0.5, theta=0.0, mean=0.0, sigma2=0.01, loglik=0.0, converged=True,
            state_mean=np.array([0.1, 0.0]), state_cov=np.zeros((2, 2)), n_obs=50,
        )
        np.testing.assert_allclose(forecast_service.iterate_point_forecast(post, None, 3), [0.1, 0.05, 0.025])

    def test_drift(self):
        """Test the drift model adds the drift every month"""
        np.testing.assert_allclose(forecast_service.iterate_point_forecast(rw(drift=0.02), None, 3), 0.02)

    def test_blowup_guard(self):
        """Test explosive coefficients abort once |Δ| exceeds 10"""
        with pytest.raises(ExplosiveForecastException) as exc_info:
            forecast_service.iterate_point_forecast(ar_posterior([3.0]), np.array([1.0]), 5)
        assert exc_info.value.exit_code == 4

    def test_short_history(self):
        """Test the history must hold p observations"""
        with pytest.raises(ModelDataException) as exc_info:
            forecast_service.iterate_point_forecast(ar_posterior([0.5, 0.1]), np.array([0.2]), 3)
        assert exc_info.value.exit_code == 3

    def test_fitted_var_target_column(self, rng):
        """Test the target index picks the forecast variable"""
        Y = rng.normal(size=(80, 2)) * 0.1
        post = bvar_service.fit_bvar_minnesota(Y, VarSpec(n=2, p=1), MinnesotaPrior())
        full = forecast_service.iterate_var(post.coef_mean, Y, 1, 4)
        np.testing.assert_allclose(forecast_service.iterate_point_forecast(post, Y, 4, target_index=1), full[:, 1])


@pytest.mark.unit
class TestLevels:
    """Test level conversion and sign forecasts"""

    def test_zero_path(self):
        """Test a zero path keeps the level"""
        np.testing.assert_allclose(forecast_service.to_levels(np.log(25.0), np.zeros(4)), 25.0)

    def test_two_steps(self):
        """Test ln 100 with [0.01, 0.01] gives 100e^0.01 and 100e^0.02"""
        levels = forecast_service.to_levels(np.log(100.0), [0.01, 0.01])
        np.testing.assert_allclose(levels, [101.00501670841679, 102.02013400267558], rtol=1e-12)

    def test_inverse_of_log_diff(self, rng):
        """Test level conversion undoes log differencing"""
        levels = np.exp(np.cumsum(rng.normal(scale=0.05, size=30)) + 3.0)
        changes = series_service.log_diff(MonthlySeries('price', MonthDate(2015, 1), levels))
        rebuilt = forecast_service.to_levels(np.log(levels[0]), changes.values)
        np.testing.assert_allclose(rebuilt, levels[1:], rtol=1e-10)

    def test_overflow(self):
        """Test absurd paths are a numerical error"""
        with pytest.raises(ForecastOverflowException):
            forecast_service.to_levels(700.0, [5.0, 5.0])

    @pytest.mark.parametrize('point,origin,expected', [(105, 100, 1), (100, 100, 0), (99.999, 100, -1)])
    def test_sign(self, point, origin, expected):
        """Test direction of change with exact ties mapped to 0"""
        assert forecast_service.sign_forecast(point, origin) == expected


@pytest.mark.unit
class TestQuantileGrid:
    """Test empirical quantiles"""

    def test_grid(self):
        """Test J=20 gives α = 0.05..0.95"""
        grid = forecast_service.quantile_grid(np.arange(100.0), 20)
        assert list(grid) == pytest.approx([j / 20 for j in range(1, 20)])

    def test_constant_draws(self):
        """Test equal draws give equal quantiles"""
        assert set(forecast_service.quantile_grid(np.full(50, 3.5), 20).values()) == {3.5}

    def test_interpolation_convention(self):
        """Test the median of 1..100 is 50.5"""
        assert forecast_service.quantile_grid(np.arange(1.0, 101.0), 2)[0.5] == pytest.approx(50.5)

    def test_invalid(self):
        """Test empty draws or J < 2 are rejected"""
        with pytest.raises(ValidationException):
            forecast_service.quantile_grid([], 20)
        with pytest.raises(ValidationException):
            forecast_service.quantile_grid([1.0], 1)


@pytest.mark.unit
class TestPredictive:
    """Test predictive simulation"""

    def test_degenerate_random_walk(self):
        """Test zero variance gives every draw equal to the point path"""
        draws = forecast_service.simulate_predictive(rw(sigma2=0.0, drift=0.01), None, 4, 500, 0, np.log(20.0))
        point = forecast_service.to_levels(np.log(20.0), np.full(4, 0.01))
        np.testing.assert_allclose(draws, np.broadcast_to(point, draws.shape))

    def test_minimum_draws(self):
        """Test fewer than 500 draws are rejected"""
        with pytest.raises(ValidationException):
            forecast_service.simulate_predictive(rw(), None, 3, 100, 0, 0.0)

    def test_random_walk_variance_scales_with_horizon(self):
        """Test the h-step log draws have variance h σ² within 5%"""
        sigma2 = 0.004
        draws = forecast_service.simulate_predictive(rw(sigma2=sigma2), None, 6, 100_000, 17, 0.0)
        log_draws = np.log(draws)
        for h in (1, 3, 6):
            assert np.var(log_draws[:, h - 1]) == pytest.approx(h * sigma2, rel=0.05)

    def test_seed_reproducibility(self):
        """Test the same seed reproduces draws exactly"""
        post = ar_posterior([0.4])
        first = forecast_service.simulate_dlog(post, np.array([0.1]), 3, 600, 9)
        second = forecast_service.simulate_dlog(post, np.array([0.1]), 3, 600, 9)
        np.testing.assert_array_equal(first, second)

    def test_conjugate_draws_center_on_point(self):
        """Test conjugate predictive means sit near the plug-in path"""
        post = ar_posterior([0.5], sigma2=0.0001)
        dlog = forecast_service.simulate_dlog(post, np.array([0.2]), 3, 20_000, 3)
        np.testing.assert_allclose(dlog.mean(axis=0), [0.1, 0.05, 0.025], atol=0.01)

    def test_constant_sv_volatility(self):
        """Test φ=0 and σ_ε=0 give predictive volatility e^μ"""
        draws = SvDraws(
            coefs=np.zeros((1, 2, 1)),
            b0=np.ones((1, 1, 1)),
            log_vol=np.full((1, 5, 1), 3.0),
            mu=np.array([[-2.0]]),
            phi=np.array([[0.0]]),
            sigma2=np.array([[0.0]]),
            spec=VarSpec(n=1, p=1),
        )
        dlog = forecast_service.simulate_dlog(draws, np.array([0.0]), 3, 40_000, 1)
        for step in range(3):
            assert np.var(dlog[:, step]) == pytest.approx(np.exp(-2.0), rel=0.05)

    def test_arima_simulation(self):
        """Test ARIMA draws with a known state start at the predicted mean"""
        post = ArimaPosterior(
            ar=1, ma=1, phi=0.5, theta=0.2, mean=0.0, sigma2=0.01, loglik=0.0, converged=True,
            state_mean=np.array([0.1, 0.0]), state_cov=np.array([[1.0, 0.2], [0.2, 0.04]]), n_obs=50,
        )
        dlog = forecast_service.simulate_dlog(post, None, 2, 50_000, 4)
        assert dlog[:, 0].mean() == pytest.approx(0.1, abs=0.005)
        assert np.var(dlog[:, 0]) == pytest.approx(0.01, rel=0.05)


@pytest.mark.unit
class TestForecastRecords:
    """Test per-origin forecast records"""

    def test_random_walk_records(self):
        """Test the no-change point equals the origin level at every horizon"""
        config = ForecastConfig(horizon=4, predictive_draws=500, quantile_grid=20)
        records = forecast_service.forecast_records(
            rw(), None, MonthDate(2018, 6), 15.0, 'rw', config=config, seed=3,
        )
        assert [r.horizon for r in records] == [1, 2, 3, 4]
        for record in records:
            assert record.point_level == pytest.approx(15.0)
            assert record.sign == 0
            assert len(record.quantiles) == 19
            values = [record.quantiles[a] for a in sorted(record.quantiles)]
            assert values == sorted(values)
            assert record.draws is None
        assert records[2].target_month == MonthDate(2018, 9)

    def test_store_draws_and_draw_mean(self):
        """Test stored draws have M entries and the draw-mean point option"""
        config = ForecastConfig(horizon=2, predictive_draws=800, store_draws=True, draw_mean_point=True)
        records = forecast_service.forecast_records(
            rw(sigma2=0.01), None, MonthDate(2018, 6), 15.0, 'rw', config=config, seed=3,
        )
        assert records[0].draws.shape == (800,)
        assert records[0].point_level == pytest.approx(records[0].draws.mean())
        assert records[0].draw_mean == pytest.approx(records[0].point_level)

    def test_points_only(self):
        """Test densities can be switched off"""
        config = ForecastConfig(horizon=3, density=False)
        records = forecast_service.forecast_records(
            rw(drift=0.01), None, MonthDate(2018, 6), 10.0, 'rwd', config=config,
        )
        assert records[0].quantiles == {}
        assert records[0].draw_mean is None
        assert records[0].sign == 1
        assert records[2].point_level == pytest.approx(10.0 * np.exp(0.03))


@pytest.mark.slow
class TestDensityCalibration:
    """Coverage of predictive intervals on simulated data"""

    def test_ninety_percent_interval_coverage(self):
        """Test the 5%-95% one-step band of a BAR(1) covers a Gaussian random walk in 85-95% of 500 replications"""
        rng = np.random.default_rng(2024)
        prior = MinnesotaPrior()
        hits = 0
        for replication in range(500):
            dlog = 0.002 + 0.05 * rng.standard_normal(121)
            history = MonthlySeries('dprice', MonthDate(2010, 1), dlog[:-1])
            post = bvar_service.fit_bar(history, 1, prior)
            draws = forecast_service.simulate_predictive(post, history, 1, 1000, replication, r_last=0.0)
            grid = forecast_service.quantile_grid(draws[:, 0], 20)
            realized = np.exp(dlog[-1])
            hits += grid[0.05] <= realized <= grid[0.95]
        assert 0.85 <= hits / 500 <= 0.95
