# model_service/services/sv_service.py
"""
Gibbs sampler for a VAR with Choleski multivariate stochastic volatility:

    y_t = B' x_t + u_t,   u_t ~ N(0, Σ_t),   Σ_t⁻¹ = B0' D_t⁻¹ B0,
    D_t = diag(exp(h_{1,t}), ..., exp(h_{n,t})),
    h_{i,t} = μ_i + φ_i (h_{i,t-1} - μ_i) + ε_{i,t},   ε_{i,t} ~ N(0, σ²_i),

with B0 unit lower triangular. Each sweep draws the coefficients (one GLS
step for the whole system), the free elements of B0, the log-volatility paths
through the auxiliary mixture, and the volatility parameters.
"""
import logging
import time
from typing import Optional

import numpy as np
from scipy import linalg

from model_service.services.bvar_service import SeriesInput, as_matrix, bvar_service
from model_service.types import MinnesotaPrior, SvDraws, VarSpec
from model_service.utils.exceptions import (
    ModelDataException,
    SamplerDivergenceException,
    SingularDesignException,
)
from model_service.utils.mixture import (
    VolPrior,
    ffbs_log_vol,
    log_squared,
    precision_log_vol,
    sample_indicators,
    sample_vol_params,
)
from shared.utils.run_config import SvConfig

logger = logging.getLogger(__name__)

_MIN_EXTRA_OBS = 10


def vol_prior_from_config(sv: SvConfig) -> VolPrior:
    return VolPrior(
        phi_mean=sv.phi_mean,
        phi_sd=sv.phi_sd,
        mu_var=sv.mu_var,
        sigma_shape=sv.sigma_shape,
        sigma_scale=sv.sigma_scale,
    )


def _draw_gaussian(precision: np.ndarray, rhs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw from N(precision⁻¹ rhs, precision⁻¹)"""
    chol = linalg.cholesky(precision, lower=True)
    mean = linalg.cho_solve((chol, True), rhs)
    noise = linalg.solve_triangular(chol.T, rng.standard_normal(rhs.size), lower=False)
    return mean + noise


class SvSamplerService:

    def fit_bvar_sv(
        self,
        data: SeriesInput,
        spec: VarSpec,
        prior: MinnesotaPrior,
        sv: Optional[SvConfig] = None,
        draws: Optional[int] = None,
        burn: Optional[int] = None,
        seed: int = 0,
    ) -> SvDraws:
        sv = sv or SvConfig.from_settings()
        draws = sv.draws if draws is None else int(draws)
        burn = sv.burn if burn is None else int(burn)
        context = {'module': 'models', 'op': 'fit_bvar_sv'}
        if draws <= 0 or burn <= 0:
            raise ModelDataException("SV draws and burn-in must be positive", context=context)

        Y = as_matrix(data)
        n, p = spec.n, spec.p
        if Y.shape[0] - p <= n * p + _MIN_EXTRA_OBS:
            raise ModelDataException(
                f"SV-VAR({p}) in {n} variables needs more than {n * p + _MIN_EXTRA_OBS} usable "
                f"observations, got {Y.shape[0] - p}",
                context=context,
            )
        X, Yt = bvar_service.design_matrix(Y, p, spec.include_intercept)
        T, K = X.shape
        rng = np.random.default_rng(seed)
        vol_prior = vol_prior_from_config(sv)
        sample_path = precision_log_vol if sv.state_sampler == 'precision' else ffbs_log_vol

        scales = bvar_service.ar_residual_variances(Y, p)
        prior_mean = bvar_service.prior_mean(spec, prior)
        prior_var = bvar_service.coefficient_variances(spec, prior, scales)
        # equation-major vec(B): element (k, i) sits at i*K + k
        prior_prec = 1.0 / prior_var.T.ravel()
        prior_rhs = prior_prec * prior_mean.T.ravel()

        coef, *_ = linalg.lstsq(X, Yt)
        b0 = np.eye(n)
        resid = Yt - X @ coef
        h = np.tile(np.log(np.maximum(resid.var(axis=0), 1e-12)), (T, 1))
        mu = h[0].copy()
        phi = np.full(n, vol_prior.phi_mean)
        sigma2 = np.full(n, vol_prior.sigma_scale / (vol_prior.sigma_shape - 1.0))

        kept = {'coefs': [], 'b0': [], 'log_vol': [], 'mu': [], 'phi': [], 'sigma2': []}
        total = burn + draws * sv.thin
        started = time.perf_counter()
        for sweep in range(total):
            # (i) coefficients given B0 and the volatilities
            inv_vol = np.exp(-h)
            weights = np.einsum('ji,tj,jk->tik', b0, inv_vol, b0)
            precision = np.einsum('tij,tk,tl->ikjl', weights, X, X).reshape(n * K, n * K)
            precision[np.diag_indices_from(precision)] += prior_prec
            rhs = prior_rhs + np.einsum('tij,tj,tk->ik', weights, Yt, X).ravel()
            try:
                coef = _draw_gaussian(precision, rhs, rng).reshape(n, K).T
            except linalg.LinAlgError as exc:
                raise SingularDesignException(
                    f"Coefficient precision lost definiteness at sweep {sweep}: {exc}",
                    context={**context, 'sweep': sweep},
                )
            resid = Yt - X @ coef

            # (ii) free elements of B0: u_i = -b0[i, :i] u_{<i} + e_i
            for i in range(1, n):
                regressors = -resid[:, :i]
                w = inv_vol[:, i]
                prec = np.eye(i) / sv.b0_prior_var + (regressors * w[:, None]).T @ regressors
                b0[i, :i] = _draw_gaussian(prec, (regressors * w[:, None]).T @ resid[:, i], rng)

            # (iii) log-volatility paths, (iv) their AR(1) parameters
            structural = resid @ b0.T
            for i in range(n):
                y_star = log_squared(structural[:, i], sv.log_offset)
                components = sample_indicators(y_star, h[:, i], rng)
                h[:, i] = sample_path(y_star, components, mu[i], phi[i], sigma2[i], rng)
                mu[i], phi[i], sigma2[i] = sample_vol_params(h[:, i], mu[i], phi[i], sigma2[i], vol_prior, rng)

            peak = float(np.max(np.abs(h)))
            if not np.isfinite(peak) or peak > sv.divergence_bound:
                equation = int(np.argmax(np.max(np.abs(np.nan_to_num(h, nan=np.inf)), axis=0)))
                raise SamplerDivergenceException(
                    f"Log-volatility path left ±{sv.divergence_bound:g} at sweep {sweep} "
                    f"(equation {equation}, max |h| = {peak:.2f})",
                    context={
                        **context,
                        'sweep': sweep,
                        'equation': equation,
                        'max_abs_log_vol': peak,
                        'mu': mu.tolist(),
                        'phi': phi.tolist(),
                        'sigma2': sigma2.tolist(),
                    },
                )

            if sweep >= burn and (sweep - burn) % sv.thin == 0:
                kept['coefs'].append(coef.copy())
                kept['b0'].append(b0.copy())
                kept['log_vol'].append(h.copy())
                kept['mu'].append(mu.copy())
                kept['phi'].append(phi.copy())
                kept['sigma2'].append(sigma2.copy())

        elapsed = time.perf_counter() - started
        stacked = {name: np.stack(values) for name, values in kept.items()}
        logger.info(f"SV-VAR({p}) n={n}: {total} sweeps in {elapsed:.1f}s, kept {draws}")
        return SvDraws(
            spec=spec,
            seed=seed,
            diagnostics={
                'sweeps': total,
                'burn': burn,
                'thin': sv.thin,
                'state_sampler': sv.state_sampler,
                'elapsed_seconds': round(elapsed, 3),
                'max_abs_log_vol': float(np.max(np.abs(stacked['log_vol']))),
            },
            **stacked,
        )


sv_service = SvSamplerService()
