# model_service/services/benchmark_service.py
"""
Univariate benchmarks: random walk (with and without drift) and
ARIMA(p,1,q) with p, q in {0, 1} by exact Gaussian maximum likelihood.
"""
import logging
from typing import Optional

import numpy as np
from scipy import optimize

from model_service.types import ArimaPosterior, RandomWalkPosterior
from model_service.utils.exceptions import (
    ArimaConvergenceException,
    ModelDataException,
    UnsupportedOrderException,
)
from model_service.utils.state_space import kalman_filter
from series_service.types import MonthlySeries
from shared.utils.exceptions import EstimationException
from shared.utils.run_config import ArimaConfig

logger = logging.getLogger(__name__)

_COEF_BOUND = 0.999
# fixed restart points in the unconstrained (arctanh) scale
_ARIMA_STARTS = ((0.0, 0.0), (0.5, -0.3), (-0.5, 0.3))
_MIN_ARIMA_OBS = 20
_GRADIENT_TOL = 1e-3


def _accepted(result) -> bool:
    """Converged, or stopped in the line search at a numerically flat point"""
    if result.success:
        return True
    gradient = getattr(result, 'jac', None)
    return gradient is not None and bool(np.all(np.abs(gradient) < _GRADIENT_TOL))


class BenchmarkService:

    def fit_rw(self, y: MonthlySeries, drift: bool = False, differenced: bool = False) -> RandomWalkPosterior:
        """
        No-change forecaster for the log level ``y`` (or its first
        difference when ``differenced``). With drift, the drift and the
        innovation variance are the sample mean and variance of Δy; without,
        the variance is the mean square of Δy.
        """
        changes = y.values if differenced else np.diff(y.values)
        needed = 2 if drift else 1
        if changes.size < needed:
            raise ModelDataException(
                f"Random walk{' with drift' if drift else ''} needs {needed} changes, got {changes.size}",
                context={'module': 'models', 'op': 'fit_rw'},
            )
        if drift:
            mean = float(np.mean(changes))
            sigma2 = float(np.var(changes, ddof=1))
        else:
            mean = 0.0
            sigma2 = float(np.mean(changes ** 2))
        return RandomWalkPosterior(drift=mean, sigma2=sigma2, with_drift=drift, n_obs=int(changes.size))

    def fit_arima(
        self,
        y_diff: MonthlySeries,
        ar: int,
        ma: int,
        config: Optional[ArimaConfig] = None,
    ) -> ArimaPosterior:
        config = config or ArimaConfig.from_settings()
        context = {'module': 'models', 'op': 'fit_arima'}
        if ar not in (0, 1) or ma not in (0, 1):
            raise UnsupportedOrderException(f"unsupported order arima({ar},1,{ma})", context=context)
        y = np.asarray(y_diff.values, dtype=float)
        if y.size < _MIN_ARIMA_OBS:
            raise ModelDataException(
                f"ARIMA needs at least {_MIN_ARIMA_OBS} differenced observations, got {y.size}",
                context=context,
            )
        if not np.var(y) > 0:
            raise EstimationException("ARIMA input has zero variance", context=context)

        def unpack(params):
            position = 0
            phi = theta = 0.0
            if ar:
                phi = _COEF_BOUND * np.tanh(params[position])
                position += 1
            if ma:
                theta = _COEF_BOUND * np.tanh(params[position])
                position += 1
            mean = params[position] if config.include_mean else 0.0
            return float(phi), float(theta), float(mean)

        def negative_loglik(params):
            phi, theta, mean = unpack(params)
            return -kalman_filter(y - mean, phi, theta).loglik

        n_params = ar + ma + int(config.include_mean)
        if n_params == 0:
            best_params = np.zeros(0)
        else:
            best = None
            best_failed = None
            for start_phi, start_theta in _ARIMA_STARTS:
                start = []
                if ar:
                    start.append(start_phi)
                if ma:
                    start.append(start_theta)
                if config.include_mean:
                    start.append(float(np.mean(y)))
                try:
                    result = optimize.minimize(
                        negative_loglik,
                        np.array(start),
                        method='L-BFGS-B',
                        options={'maxiter': config.max_iter},
                    )
                except (ValueError, np.linalg.LinAlgError) as exc:
                    logger.debug(f"ARIMA restart from {start} failed: {exc}")
                    continue
                if not np.isfinite(result.fun):
                    continue
                if not _accepted(result):
                    if best_failed is None or result.fun < best_failed.fun:
                        best_failed = result
                    continue
                if best is None or result.fun < best.fun:
                    best = result
            if best is None:
                best_loglik = float(-best_failed.fun) if best_failed is not None else float('nan')
                raise ArimaConvergenceException(
                    f"ARIMA({ar},1,{ma}) did not converge after {len(_ARIMA_STARTS)} restarts; "
                    f"best loglik {best_loglik:.4f}",
                    context={**context, 'best_loglik': best_loglik},
                )
            best_params = best.x

        phi, theta, mean = unpack(best_params)
        filtered = kalman_filter(y - mean, phi, theta)
        logger.debug(f"ARIMA({ar},1,{ma}): phi={phi:.4f} theta={theta:.4f} loglik={filtered.loglik:.3f}")
        return ArimaPosterior(
            ar=ar,
            ma=ma,
            phi=phi,
            theta=theta,
            mean=mean,
            sigma2=filtered.sigma2,
            loglik=filtered.loglik,
            converged=True,
            state_mean=filtered.state_mean,
            state_cov=filtered.state_cov,
            n_obs=int(y.size),
        )


benchmark_service = BenchmarkService()
