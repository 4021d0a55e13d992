# evaluation_service/services/ability_service.py
"""
Predictive-ability tests: Diebold-Mariano with Bartlett long-run variance
and the small-sample correction, Pesaran-Timmermann directional accuracy,
and the rolling fluctuation test of relative performance.

Loss differentials are benchmark loss minus candidate loss, so positive
statistics favour the candidate.
"""
import logging
import math
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from evaluation_service.types import FluctuationResult, PredictiveTestResult
from evaluation_service.utils.critical_values import fluctuation_critical_value
from evaluation_service.utils.exceptions import (
    InvalidFluctuationWindowException,
    ShortSampleException,
    UndefinedTestException,
)

logger = logging.getLogger(__name__)

MIN_TEST_OBS = 10


def _series(values, op: str, minimum: int = 1) -> np.ndarray:
    array = np.asarray(values, dtype=float).ravel()
    if array.size < minimum:
        raise ShortSampleException(
            f"Need at least {minimum} observations, got {array.size}",
            context={'module': 'eval', 'op': op, 'n_obs': int(array.size)},
        )
    if not np.all(np.isfinite(array)):
        raise ShortSampleException(
            "Loss differentials contain non-finite values",
            context={'module': 'eval', 'op': op},
        )
    return array


class PredictiveAbilityService:

    @staticmethod
    def long_run_variance(d: np.ndarray, lags: int) -> float:
        """Bartlett-weighted sum of autocovariances (divided by n) up to ``lags``"""
        n = d.size
        centered = d - d.mean()
        variance = float(centered @ centered) / n
        for lag in range(1, min(lags, n - 1) + 1):
            weight = 1.0 - lag / (lags + 1.0)
            variance += 2.0 * weight * float(centered[lag:] @ centered[:-lag]) / n
        return variance

    @staticmethod
    def newey_west_lags(n: int) -> int:
        return int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))

    def dm_test(self, d: Sequence[float], horizon: int, lags: Optional[int] = None) -> PredictiveTestResult:
        """
        Two-sided test of equal accuracy; truncation h - 1 unless ``lags``
        is given. p-value from Student t with n - 1 degrees of freedom.
        """
        d = _series(d, 'dm_test', MIN_TEST_OBS)
        n = d.size
        if not np.any(d):
            return PredictiveTestResult(name='dm', statistic=0.0, p_value=1.0, n_obs=n)
        truncation = horizon - 1 if lags is None else lags
        variance = self.long_run_variance(d, truncation)
        if variance <= 0.0:
            raise UndefinedTestException(
                "Loss differential has zero long-run variance",
                context={'module': 'eval', 'op': 'dm_test', 'n_obs': n, 'horizon': horizon},
            )
        statistic = d.mean() / math.sqrt(variance / n)
        correction = (n + 1.0 - 2.0 * horizon + horizon * (horizon - 1.0) / n) / n
        if correction <= 0.0:
            raise UndefinedTestException(
                f"Small-sample correction undefined for n={n}, h={horizon}",
                context={'module': 'eval', 'op': 'dm_test', 'n_obs': n, 'horizon': horizon},
            )
        statistic *= math.sqrt(correction)
        p_value = float(2.0 * stats.t.sf(abs(statistic), df=n - 1))
        return PredictiveTestResult(name='dm', statistic=float(statistic), p_value=p_value, n_obs=n)

    def pt_test(self, forecast: Sequence[float], realized: Sequence[float]) -> PredictiveTestResult:
        """
        One-sided test of no directional accuracy. Inputs are signs (or
        changes); only their positivity enters.
        """
        forecast = _series(forecast, 'pt_test', MIN_TEST_OBS)
        realized = _series(realized, 'pt_test', MIN_TEST_OBS)
        if forecast.size != realized.size:
            raise ShortSampleException(
                f"Sign series have lengths {forecast.size} and {realized.size}",
                context={'module': 'eval', 'op': 'pt_test'},
            )
        n = forecast.size
        x = (realized > 0).astype(float)
        y = (forecast > 0).astype(float)
        p_x, p_y = x.mean(), y.mean()
        if p_x in (0.0, 1.0) or p_y in (0.0, 1.0):
            raise UndefinedTestException(
                "Directional test needs both signs in forecasts and outcomes",
                context={'module': 'eval', 'op': 'pt_test', 'p_forecast': p_y, 'p_realized': p_x},
            )
        p_hat = float(np.mean(x == y))
        p_star = p_y * p_x + (1 - p_y) * (1 - p_x)
        var_hat = p_star * (1 - p_star) / n
        var_star = (
            (2 * p_y - 1) ** 2 * p_x * (1 - p_x) / n
            + (2 * p_x - 1) ** 2 * p_y * (1 - p_y) / n
            + 4 * p_x * p_y * (1 - p_x) * (1 - p_y) / n ** 2
        )
        if var_hat - var_star <= 0.0:
            raise UndefinedTestException(
                "Directional test variance is not positive",
                context={'module': 'eval', 'op': 'pt_test', 'n_obs': n},
            )
        statistic = (p_hat - p_star) / math.sqrt(var_hat - var_star)
        return PredictiveTestResult(
            name='pt', statistic=float(statistic), p_value=float(stats.norm.sf(statistic)), n_obs=n
        )

    def fluctuation_test(
        self,
        d: Sequence[float],
        window: int,
        dates: Sequence = (),
        lags: Optional[int] = None,
        window_se: bool = False,
    ) -> FluctuationResult:
        """
        Centered rolling mean of ``d`` over ``window`` observations, scaled
        by sqrt(window) over the HAC standard deviation of the full sample
        (or of each window with ``window_se``). Rejects equal performance
        when the path maximum exceeds the one-sided 5% critical value for
        mu = window / n.
        """
        d = _series(d, 'fluctuation_test')
        n = d.size
        if window < 1 or window % 2 == 0 or window > n:
            raise InvalidFluctuationWindowException(
                f"Window {window} must be odd and at most the sample size {n}",
                context={'module': 'eval', 'op': 'fluctuation_test', 'window': window, 'n_obs': n},
            )
        dates = tuple(dates)
        if dates and len(dates) != n:
            raise ShortSampleException(
                f"{len(dates)} dates for {n} loss differentials",
                context={'module': 'eval', 'op': 'fluctuation_test'},
            )
        mu = window / n
        cv = fluctuation_critical_value(mu)
        half = (window - 1) // 2
        centers = dates[half:n - half] if dates else ()
        count = n - window + 1

        if not np.any(d):
            return FluctuationResult(window=window, mu=mu, path=np.zeros(count), cv_one_sided_5pct=cv, dates=centers)

        means = np.convolve(d, np.ones(window) / window, mode='valid')
        if window_se:
            wl = self.newey_west_lags(window) if lags is None else lags
            sd = np.array([
                math.sqrt(self.long_run_variance(d[i:i + window], wl)) for i in range(count)
            ])
        else:
            full_lags = self.newey_west_lags(n) if lags is None else lags
            sd = np.full(count, math.sqrt(self.long_run_variance(d, full_lags)))
        if np.any(sd <= 0.0):
            raise UndefinedTestException(
                "Loss differential has zero long-run variance",
                context={'module': 'eval', 'op': 'fluctuation_test', 'window': window, 'n_obs': n},
            )
        path = math.sqrt(window) * means / sd
        logger.debug(f"Fluctuation path: n={n}, m={window}, mu={mu:.3f}, max={path.max():.3f}, cv={cv:.3f}")
        return FluctuationResult(window=window, mu=mu, path=path, cv_one_sided_5pct=cv, dates=centers)


ability_service = PredictiveAbilityService()
