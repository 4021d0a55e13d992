# model_service/services/forecast_service.py
"""
Multi-step forecasts from fitted models.

Point forecasts iterate the model at its posterior-mean (or MLE) parameters,
feeding each step back in as a lag, and are converted to levels with
R_{t+h} = exp(r_t + Σ Δr). Densities come from simulating whole paths with
parameters drawn from the posterior.
"""
import logging
from typing import Dict, List, Optional, Union

import numpy as np
from scipy import linalg, stats

from model_service.services.bvar_service import SeriesInput, as_matrix
from model_service.types import (
    ArimaPosterior,
    ConjugatePosterior,
    ForecastRecord,
    ModelPosterior,
    RandomWalkPosterior,
    StrictMinnesotaPosterior,
    SvDraws,
)
from model_service.utils.exceptions import (
    ExplosiveForecastException,
    ForecastOverflowException,
    ModelDataException,
)
from model_service.utils.state_space import arma_system
from shared.utils.exceptions import ValidationException
from shared.utils.run_config import ForecastConfig

logger = logging.getLogger(__name__)

_LOG_MAX = float(np.log(np.finfo(float).max))
MIN_PREDICTIVE_DRAWS = 500

SeedLike = Union[int, np.random.Generator]


def _generator(seed: SeedLike) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _lag_state(history: np.ndarray, p: int) -> np.ndarray:
    """Last p observations, most recent first (p x n)"""
    if history.shape[0] < p:
        raise ModelDataException(
            f"Forecasting with {p} lags needs at least {p} observations of history, got {history.shape[0]}",
            context={'module': 'forecast', 'op': 'iterate_point_forecast'},
        )
    return history[::-1][:p].copy()


def _regressors(lags: np.ndarray, include_intercept: bool) -> np.ndarray:
    """Stack (..., p, n) lag blocks into (..., K) design rows"""
    flat = lags.reshape(lags.shape[:-2] + (-1,))
    if not include_intercept:
        return flat
    return np.concatenate([np.ones(flat.shape[:-1] + (1,)), flat], axis=-1)


def _push(lags: np.ndarray, newest: np.ndarray) -> np.ndarray:
    return np.concatenate([newest[..., None, :], lags[..., :-1, :]], axis=-2)


class ForecastService:

    # ------------------------------------------------------------------
    # point forecasts
    # ------------------------------------------------------------------

    def iterate_var(self, coef: np.ndarray, history: np.ndarray, p: int, H: int, include_intercept: bool = True) -> np.ndarray:
        """H x n plug-in path of y_{T+h} = B' x_{T+h}"""
        lags = _lag_state(history, p)
        path = np.empty((H, coef.shape[1]))
        for step in range(H):
            path[step] = _regressors(lags, include_intercept) @ coef
            lags = _push(lags, path[step])
        return path

    def iterate_point_forecast(
        self,
        post: ModelPosterior,
        history: Optional[SeriesInput],
        H: int,
        target_index: int = 0,
        blowup_bound: float = 10.0,
    ) -> np.ndarray:
        """Δ-log forecasts of the target variable for h = 1..H"""
        if isinstance(post, RandomWalkPosterior):
            path = np.full(H, post.drift)
        elif isinstance(post, ArimaPosterior):
            transition, _ = arma_system(post.phi, post.theta)
            state = post.state_mean.copy()
            path = np.empty(H)
            for step in range(H):
                path[step] = post.mean + state[0]
                state = transition @ state
        elif isinstance(post, (ConjugatePosterior, StrictMinnesotaPosterior, SvDraws)):
            spec = post.spec
            Y = as_matrix(history)
            if Y.shape[1] != spec.n:
                raise ValidationException(
                    f"History has {Y.shape[1]} variables, model has {spec.n}",
                    context={'module': 'forecast', 'op': 'iterate_point_forecast'},
                )
            path = self.iterate_var(post.coef_mean, Y, spec.p, H, spec.include_intercept)[:, target_index]
        else:
            raise ValidationException(
                f"Cannot forecast from {type(post).__name__}",
                context={'module': 'forecast', 'op': 'iterate_point_forecast'},
            )

        worst = float(np.max(np.abs(path))) if path.size else 0.0
        if not np.isfinite(worst) or worst > blowup_bound:
            raise ExplosiveForecastException(
                f"Point forecast blew up: |Δ| reached {worst:.3g} (bound {blowup_bound:g})",
                context={'module': 'forecast', 'op': 'iterate_point_forecast', 'max_abs_change': worst},
            )
        return path

    def to_levels(self, r_last: float, dlog_path) -> np.ndarray:
        """Levels exp(r_last + cumulative Δ) along the last axis"""
        cumulative = r_last + np.cumsum(np.asarray(dlog_path, dtype=float), axis=-1)
        if not np.all(np.isfinite(cumulative)):
            raise ValidationException(
                "Level conversion received non-finite inputs",
                context={'module': 'forecast', 'op': 'to_levels'},
            )
        if np.any(cumulative > _LOG_MAX):
            raise ForecastOverflowException(
                f"Level conversion overflows: log level reached {float(np.max(cumulative)):.1f}",
                context={'module': 'forecast', 'op': 'to_levels'},
            )
        return np.exp(cumulative)

    @staticmethod
    def sign_forecast(point_level: float, level_at_origin: float) -> int:
        return int(np.sign(point_level - level_at_origin))

    # ------------------------------------------------------------------
    # predictive densities
    # ------------------------------------------------------------------

    def simulate_dlog(
        self,
        post: ModelPosterior,
        history: Optional[SeriesInput],
        H: int,
        M: int,
        seed: SeedLike,
        target_index: int = 0,
    ) -> np.ndarray:
        """M x H simulated Δ-log paths of the target variable"""
        if M < MIN_PREDICTIVE_DRAWS:
            raise ValidationException(
                f"Need at least {MIN_PREDICTIVE_DRAWS} predictive draws, got {M}",
                context={'module': 'forecast', 'op': 'simulate_predictive'},
            )
        rng = _generator(seed)
        if isinstance(post, RandomWalkPosterior):
            return post.drift + np.sqrt(post.sigma2) * rng.standard_normal((M, H))
        if isinstance(post, ArimaPosterior):
            return self._simulate_arima(post, H, M, rng)

        Y = as_matrix(history)
        if isinstance(post, ConjugatePosterior):
            paths = self._simulate_conjugate(post, Y, H, M, rng)
        elif isinstance(post, StrictMinnesotaPosterior):
            paths = self._simulate_strict(post, Y, H, M, rng)
        elif isinstance(post, SvDraws):
            paths = self._simulate_sv(post, Y, H, M, rng)
        else:
            raise ValidationException(
                f"Cannot simulate from {type(post).__name__}",
                context={'module': 'forecast', 'op': 'simulate_predictive'},
            )
        return paths[:, :, target_index]

    def simulate_predictive(
        self,
        post: ModelPosterior,
        history: Optional[SeriesInput],
        H: int,
        M: int,
        seed: SeedLike,
        r_last: float,
        target_index: int = 0,
    ) -> np.ndarray:
        """M x H predictive level draws starting from log level ``r_last``"""
        return self.to_levels(r_last, self.simulate_dlog(post, history, H, M, seed, target_index))

    def _simulate_arima(self, post: ArimaPosterior, H: int, M: int, rng: np.random.Generator) -> np.ndarray:
        transition, selection = arma_system(post.phi, post.theta)
        sd = np.sqrt(post.sigma2)
        cov = post.sigma2 * post.state_cov
        # state_cov is singular for pure AR/MA parts; eigh handles rank deficiency
        values, vectors = np.linalg.eigh(cov)
        root = vectors * np.sqrt(np.clip(values, 0.0, None))
        state = post.state_mean + rng.standard_normal((M, 2)) @ root.T
        paths = np.empty((M, H))
        for step in range(H):
            paths[:, step] = post.mean + state[:, 0]
            shocks = sd * rng.standard_normal(M)
            state = state @ transition.T + shocks[:, None] * selection
        return paths

    def _simulate_var(
        self,
        coefs: np.ndarray,
        shock_roots: np.ndarray,
        history: np.ndarray,
        p: int,
        H: int,
        include_intercept: bool,
        rng: np.random.Generator,
    ) -> np.ndarray:
        """Paths from per-draw coefficients (M,K,n) and shock Cholesky factors (M,n,n)"""
        M, _, n = coefs.shape
        lags = np.broadcast_to(_lag_state(history, p), (M, p, n)).copy()
        paths = np.empty((M, H, n))
        for step in range(H):
            mean = np.einsum('mk,mkn->mn', _regressors(lags, include_intercept), coefs)
            shocks = np.einsum('mij,mj->mi', shock_roots, rng.standard_normal((M, n)))
            paths[:, step] = mean + shocks
            lags = _push(lags, paths[:, step])
        return paths

    def _simulate_conjugate(self, post: ConjugatePosterior, Y: np.ndarray, H: int, M: int, rng) -> np.ndarray:
        spec = post.spec
        sigmas = stats.invwishart(df=post.sigma_dof, scale=post.sigma_scale).rvs(size=M, random_state=rng)
        sigmas = np.asarray(sigmas, dtype=float).reshape(M, spec.n, spec.n)
        sigma_roots = np.linalg.cholesky(sigmas)
        row_root = linalg.cholesky(post.coef_row_cov, lower=True)
        z = rng.standard_normal((M, spec.n_regressors, spec.n))
        coefs = post.coef_mean + np.einsum('kl,mlj,mij->mki', row_root, z, sigma_roots)
        return self._simulate_var(coefs, sigma_roots, Y, spec.p, H, spec.include_intercept, rng)

    def _simulate_strict(self, post: StrictMinnesotaPosterior, Y: np.ndarray, H: int, M: int, rng) -> np.ndarray:
        spec = post.spec
        coefs = np.empty((M, spec.n_regressors, spec.n))
        for i in range(spec.n):
            root = linalg.cholesky(post.coef_cov[i], lower=True)
            coefs[:, :, i] = post.coef_mean[:, i] + rng.standard_normal((M, spec.n_regressors)) @ root.T
        sigma_root = np.broadcast_to(np.linalg.cholesky(post.sigma), (M, spec.n, spec.n))
        return self._simulate_var(coefs, sigma_root, Y, spec.p, H, spec.include_intercept, rng)

    def _simulate_sv(self, post: SvDraws, Y: np.ndarray, H: int, M: int, rng) -> np.ndarray:
        spec = post.spec
        n, p = spec.n, spec.p
        picks = np.arange(M) % post.draw_count
        coefs = post.coefs[picks]
        inv_b0 = np.linalg.inv(post.b0)[picks]
        mu, phi = post.mu[picks], post.phi[picks]
        vol_sd = np.sqrt(post.sigma2[picks])
        h = post.log_vol[picks, -1, :].copy()

        lags = np.broadcast_to(_lag_state(Y, p), (M, p, n)).copy()
        paths = np.empty((M, H, n))
        for step in range(H):
            h = mu + phi * (h - mu) + vol_sd * rng.standard_normal((M, n))
            structural = np.exp(0.5 * h) * rng.standard_normal((M, n))
            mean = np.einsum('mk,mkn->mn', _regressors(lags, spec.include_intercept), coefs)
            paths[:, step] = mean + np.einsum('mij,mj->mi', inv_b0, structural)
            lags = _push(lags, paths[:, step])
        return paths

    @staticmethod
    def quantile_grid(draws, J: int) -> Dict[float, float]:
        """Empirical quantiles at α = j/J, j = 1..J-1, linear in the order statistics"""
        values = np.asarray(draws, dtype=float).ravel()
        if values.size == 0 or J < 2:
            raise ValidationException(
                "Quantile grid needs draws and J >= 2",
                context={'module': 'forecast', 'op': 'quantile_grid'},
            )
        alphas = np.arange(1, J) / J
        levels = np.maximum.accumulate(np.quantile(values, alphas, method='linear'))
        return {round(float(a), 10): float(q) for a, q in zip(alphas, levels)}

    # ------------------------------------------------------------------

    def forecast_records(
        self,
        post: ModelPosterior,
        history: Optional[SeriesInput],
        origin,
        origin_level: float,
        model_id: str,
        target: str = 'price',
        config: Optional[ForecastConfig] = None,
        seed: SeedLike = 0,
        target_index: int = 0,
    ) -> List[ForecastRecord]:
        """Point, sign and (optionally) density forecasts for h = 1..H from one origin"""
        config = config or ForecastConfig.from_settings()
        H = config.horizon
        # scaled from the origin level so that a zero path reproduces it exactly
        point = origin_level * self.to_levels(
            0.0,
            self.iterate_point_forecast(post, history, H, target_index, config.blowup_bound),
        )

        level_draws = None
        if config.density:
            level_draws = origin_level * self.simulate_predictive(
                post, history, H, config.predictive_draws, seed, 0.0, target_index
            )
            if config.draw_mean_point:
                point = level_draws.mean(axis=0)

        records = []
        for step in range(H):
            draws = None if level_draws is None else level_draws[:, step]
            records.append(ForecastRecord(
                model_id=model_id,
                target=target,
                origin=origin,
                horizon=step + 1,
                origin_level=float(origin_level),
                point_level=float(point[step]),
                sign=self.sign_forecast(point[step], origin_level),
                quantiles={} if draws is None else self.quantile_grid(draws, config.quantile_grid),
                draws=draws if (draws is not None and config.store_draws) else None,
                draw_mean=None if draws is None else float(draws.mean()),
            ))
        return records


forecast_service = ForecastService()
