# model_service/services/bvar_service.py
"""
Bayesian (V)AR estimation with Minnesota-type priors.

The default prior is the natural-conjugate Normal-inverse-Wishart version of
the Minnesota prior, which has a closed-form posterior. The strict variant
fixes Σ at the univariate residual variances and treats every equation as an
independent Normal regression, which is what allows the cross-variable
shrinkage factor λ_cross to enter.
"""
import logging
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from model_service.types import (
    ConjugatePosterior,
    MinnesotaPrior,
    StrictMinnesotaPosterior,
    VarSpec,
)
from model_service.utils.exceptions import (
    DimensionMismatchException,
    ModelDataException,
    SingularDesignException,
)
from series_service.types import MonthlySeries

logger = logging.getLogger(__name__)

SeriesInput = Union[np.ndarray, MonthlySeries, Sequence[MonthlySeries]]


def as_matrix(data: SeriesInput) -> np.ndarray:
    """Stack aligned series (or a single series) into a T x n matrix"""
    if isinstance(data, MonthlySeries):
        return data.values.reshape(-1, 1).astype(float)
    if isinstance(data, np.ndarray):
        matrix = np.asarray(data, dtype=float)
        return matrix.reshape(-1, 1) if matrix.ndim == 1 else matrix
    series = list(data)
    spans = {(s.start, s.end) for s in series}
    if len(spans) != 1:
        raise DimensionMismatchException(
            "VAR variables must share one sample; align them first",
            context={'module': 'models', 'op': 'as_matrix', 'spans': [str(s) for s in spans]},
        )
    return np.column_stack([s.values for s in series]).astype(float)


class BvarService:

    def design_matrix(self, Y: np.ndarray, p: int, include_intercept: bool = True) -> Tuple[np.ndarray, np.ndarray]:
        """
        Regressors ``[1, y_{t-1}', ..., y_{t-p}']`` and the matching left-hand
        side for t = p..T-1.
        """
        T = Y.shape[0]
        if T <= p:
            raise ModelDataException(
                f"{T} observations cannot support {p} lags",
                context={'module': 'models', 'op': 'design_matrix'},
            )
        blocks = [Y[p - lag:T - lag] for lag in range(1, p + 1)]
        if include_intercept:
            blocks.insert(0, np.ones((T - p, 1)))
        return np.hstack(blocks), Y[p:]

    def ar_residual_variances(self, Y: np.ndarray, p: int) -> np.ndarray:
        """Residual variance of a univariate AR(p) with intercept for every column"""
        variances = np.empty(Y.shape[1])
        for j in range(Y.shape[1]):
            X, y = self.design_matrix(Y[:, [j]], p)
            dof = y.shape[0] - X.shape[1]
            if dof < 1:
                raise ModelDataException(
                    f"AR({p}) residual variance needs more than {X.shape[1]} usable observations",
                    context={'module': 'models', 'op': 'ar_residual_variances'},
                )
            coef, *_ = linalg.lstsq(X, y)
            resid = y - X @ coef
            variances[j] = float(resid[:, 0] @ resid[:, 0]) / dof
        if np.any(variances <= 0):
            raise SingularDesignException(
                "A VAR variable has zero residual variance",
                context={'module': 'models', 'op': 'ar_residual_variances'},
            )
        return variances

    def prior_mean(self, spec: VarSpec, prior: MinnesotaPrior) -> np.ndarray:
        mean = np.zeros((spec.n_regressors, spec.n))
        offset = int(spec.include_intercept)
        mean[offset:offset + spec.n, :] = prior.own_mean_first_lag * np.eye(spec.n)
        return mean

    def niw_prior(self, spec: VarSpec, prior: MinnesotaPrior, scales: np.ndarray):
        """
        (B0, diag Ω0, S0, ν0) of the conjugate Minnesota prior. The prior
        variance of a coefficient on lag ℓ of variable j in equation i is
        Ω0 · E[Σ_ii] = (λ/ℓ^d)² σ_i²/σ_j².
        """
        n, p = spec.n, spec.p
        omega = []
        if spec.include_intercept:
            omega.append((prior.lambda_overall * prior.intercept_scale) ** 2)
        for lag in range(1, p + 1):
            for j in range(n):
                omega.append((prior.lambda_overall / lag ** prior.lambda_lagdecay) ** 2 / scales[j])
        dof = n + 2.0
        scale = np.diag(scales) * (dof - n - 1.0)
        return self.prior_mean(spec, prior), np.asarray(omega), scale, dof

    def coefficient_variances(self, spec: VarSpec, prior: MinnesotaPrior, scales: np.ndarray) -> np.ndarray:
        """K x n prior variances of the independent (strict) Minnesota prior"""
        n, p = spec.n, spec.p
        sd = np.sqrt(scales)
        variances = np.empty((spec.n_regressors, n))
        row = 0
        if spec.include_intercept:
            variances[0] = (prior.lambda_overall * prior.intercept_scale * sd) ** 2
            row = 1
        for lag in range(1, p + 1):
            tight = prior.lambda_overall / lag ** prior.lambda_lagdecay
            for j in range(n):
                for i in range(n):
                    cross = 1.0 if i == j else prior.lambda_cross * sd[i] / sd[j]
                    variances[row, i] = (tight * cross) ** 2
                row += 1
        return variances

    def _check_sample(self, Y: np.ndarray, spec: VarSpec, op: str):
        if Y.shape[1] != spec.n:
            raise DimensionMismatchException(
                f"Data has {Y.shape[1]} variables, spec expects {spec.n}",
                context={'module': 'models', 'op': op},
            )
        if not np.all(np.isfinite(Y)):
            raise ModelDataException("VAR data contains non-finite values", context={'module': 'models', 'op': op})
        usable = Y.shape[0] - spec.p
        if usable <= spec.n * spec.p + 1:
            raise ModelDataException(
                f"VAR({spec.p}) in {spec.n} variables needs more than {spec.n * spec.p + 1} usable "
                f"observations, got {usable}",
                context={'module': 'models', 'op': op},
            )

    def conjugate_update(
        self,
        X: np.ndarray,
        Yt: np.ndarray,
        prior_mean: np.ndarray,
        omega: np.ndarray,
        prior_scale: np.ndarray,
        prior_dof: float,
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        """
        Closed-form NIW posterior (B, Ω, S, ν) from the design rows. Only
        X'X, X'Y and the residual cross-products enter, so the result does
        not depend on the order of the rows.
        """
        omega_inv = np.diag(1.0 / omega)
        precision = omega_inv + X.T @ X
        try:
            chol = linalg.cho_factor(precision)
        except linalg.LinAlgError as exc:
            raise SingularDesignException(
                f"Posterior precision is not positive definite: {exc}",
                context={'module': 'models', 'op': 'fit_bvar'},
            )
        row_cov = linalg.cho_solve(chol, np.eye(precision.shape[0]))
        coef = linalg.cho_solve(chol, omega_inv @ prior_mean + X.T @ Yt)
        resid = Yt - X @ coef
        shrink = coef - prior_mean
        scale = prior_scale + resid.T @ resid + shrink.T @ omega_inv @ shrink
        return coef, 0.5 * (row_cov + row_cov.T), 0.5 * (scale + scale.T), prior_dof + Yt.shape[0]

    def fit_bvar_minnesota(self, data: SeriesInput, spec: VarSpec, prior: MinnesotaPrior) -> ConjugatePosterior:
        Y = as_matrix(data)
        self._check_sample(Y, spec, 'fit_bvar')
        X, Yt = self.design_matrix(Y, spec.p, spec.include_intercept)
        scales = self.ar_residual_variances(Y, spec.p)
        coef, row_cov, scale, dof = self.conjugate_update(X, Yt, *self.niw_prior(spec, prior, scales))
        posterior = ConjugatePosterior(
            coef_mean=coef,
            coef_row_cov=row_cov,
            sigma_scale=scale,
            sigma_dof=dof,
            spec=spec,
            prior=prior,
            n_obs=int(Yt.shape[0]),
        )
        logger.debug(f"BVAR({spec.p}) n={spec.n} fitted on {Yt.shape[0]} observations")
        return posterior

    def fit_bar(self, y_diff: MonthlySeries, p: int, prior: MinnesotaPrior) -> ConjugatePosterior:
        """Bayesian AR(p): the conjugate BVAR with a single variable"""
        spec = VarSpec(n=1, p=p, variable_names=(y_diff.name,))
        return self.fit_bvar_minnesota(y_diff, spec, prior)

    def fit_strict_minnesota(self, data: SeriesInput, spec: VarSpec, prior: MinnesotaPrior) -> StrictMinnesotaPosterior:
        Y = as_matrix(data)
        self._check_sample(Y, spec, 'fit_strict_minnesota')
        X, Yt = self.design_matrix(Y, spec.p, spec.include_intercept)
        scales = self.ar_residual_variances(Y, spec.p)
        prior_mean = self.prior_mean(spec, prior)
        prior_var = self.coefficient_variances(spec, prior, scales)

        K = spec.n_regressors
        coef = np.empty((K, spec.n))
        cov = np.empty((spec.n, K, K))
        xtx = X.T @ X
        for i in range(spec.n):
            precision = np.diag(1.0 / prior_var[:, i]) + xtx / scales[i]
            rhs = prior_mean[:, i] / prior_var[:, i] + X.T @ Yt[:, i] / scales[i]
            try:
                chol = linalg.cho_factor(precision)
            except linalg.LinAlgError as exc:
                raise SingularDesignException(
                    f"Equation {i} posterior precision is not positive definite: {exc}",
                    context={'module': 'models', 'op': 'fit_strict_minnesota'},
                )
            coef[:, i] = linalg.cho_solve(chol, rhs)
            cov[i] = linalg.cho_solve(chol, np.eye(K))
        return StrictMinnesotaPosterior(
            coef_mean=coef,
            coef_cov=0.5 * (cov + cov.transpose(0, 2, 1)),
            sigma=np.diag(scales),
            spec=spec,
            prior=prior,
            n_obs=int(Yt.shape[0]),
        )

    def fit(self, data: SeriesInput, spec: VarSpec, prior: MinnesotaPrior, strict: bool = False):
        if strict:
            return self.fit_strict_minnesota(data, spec, prior)
        return self.fit_bvar_minnesota(data, spec, prior)

    def select_lag_aic(self, y_diff: Union[MonthlySeries, np.ndarray], pmax: int) -> int:
        """
        AR lag order minimising log σ̂²_p + 2(p+1)/T, every order fitted on
        the same observations (those usable with ``pmax`` lags). Ties go to
        the smaller order.
        """
        return self.select_var_lag_aic(y_diff, pmax)

    def select_var_lag_aic(self, data: SeriesInput, pmax: int) -> int:
        """VAR lag order minimising log det Σ̂_p + 2n(1+np)/T on a common sample"""
        Y = as_matrix(data)
        T, n = Y.shape
        usable = T - pmax
        if pmax < 1 or usable <= 1 + n * pmax:
            raise ModelDataException(
                f"AIC lag search up to {pmax} needs more than {pmax + 1 + n * pmax} observations, got {T}",
                context={'module': 'models', 'op': 'select_lag_aic'},
            )
        scores = np.empty(pmax)
        for p in range(1, pmax + 1):
            X, Yt = self.design_matrix(Y[pmax - p:], p)
            coef, *_ = linalg.lstsq(X, Yt)
            resid = Yt - X @ coef
            sigma = resid.T @ resid / usable
            sign, logdet = np.linalg.slogdet(sigma)
            if sign <= 0:
                raise SingularDesignException(
                    f"Residual covariance of VAR({p}) is singular",
                    context={'module': 'models', 'op': 'select_lag_aic'},
                )
            scores[p - 1] = logdet + 2.0 * n * (1 + n * p) / usable
        chosen = int(np.argmin(scores)) + 1
        logger.debug(f"AIC lag choice {chosen} (pmax={pmax}, n={n})")
        return chosen


bvar_service = BvarService()
