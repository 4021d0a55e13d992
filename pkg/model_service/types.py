# model_service/types.py
"""
Model specifications and fitted posteriors.

Coefficient matrices follow the design-matrix convention of the VAR code:
rows are ``[intercept, lag 1 of every variable, ..., lag p]`` and columns are
equations, so a VAR(p) in n variables has a (1 + n*p) x n coefficient matrix.
"""
import dataclasses
import re
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from model_service.utils.exceptions import UnsupportedOrderException
from shared.utils.exceptions import UnsupportedModelException, ValidationException
from shared.utils.run_config import PriorConfig

TARGETS = ('price', 'emissions')
UNIVARIATE_FAMILIES = ('rw', 'rwd', 'arima', 'bar')
VAR_FAMILIES = ('bvar', 'bfavar')

_SPEC_PATTERN = re.compile(
    r'^(?P<family>[a-z]+)(?:\((?P<args>[^)]*)\))?(?P<sv>-sv)?(?:@(?P<target>[a-z]+))?$'
)


def _frozen(values, ndim: Optional[int] = None) -> np.ndarray:
    array = np.array(values, dtype=float)
    if ndim is not None and array.ndim != ndim:
        raise ValidationException(f"Expected a {ndim}-d array, got shape {array.shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class ModelSpec:
    """
    One entry of the model list, e.g. ``bfavar(aic,2)-sv@emissions``.

    ``p`` is None when the lag order is chosen by AIC at every origin.
    """
    family: str
    p: Optional[int] = None
    ar: int = 0
    ma: int = 0
    n_factors: int = 0
    sv: bool = False
    target: str = 'price'

    @classmethod
    def parse(cls, text: str) -> 'ModelSpec':
        raw = str(text).strip().lower().replace(' ', '')
        match = _SPEC_PATTERN.match(raw)
        if not match:
            raise UnsupportedModelException(
                f"Cannot parse model spec '{text}'",
                context={'module': 'models', 'op': 'parse_model_spec'},
            )
        family = match.group('family')
        args = [a for a in (match.group('args') or '').split(',') if a != ''] if match.group('args') is not None else []
        sv = match.group('sv') is not None
        target = match.group('target') or 'price'
        context = {'module': 'models', 'op': 'parse_model_spec', 'spec': text}

        if target not in TARGETS:
            raise UnsupportedModelException(f"Unknown forecast target '@{target}' in '{text}'", context=context)
        if sv and family not in ('bar', 'bvar', 'bfavar'):
            raise UnsupportedModelException(f"Stochastic volatility is not available for '{family}'", context=context)

        if family in ('rw', 'rwd'):
            if args:
                raise UnsupportedModelException(f"'{family}' takes no arguments", context=context)
            return cls(family=family, target=target)

        if family == 'arima':
            try:
                ar, d, ma = (int(a) for a in args)
            except ValueError:
                raise UnsupportedModelException(f"ARIMA needs three integer orders, got '{text}'", context=context)
            if ar not in (0, 1) or ma not in (0, 1) or d != 1:
                raise UnsupportedOrderException(
                    f"unsupported order arima({ar},{d},{ma}); supported: arima(0|1,1,0|1)",
                    context=context,
                )
            return cls(family='arima', ar=ar, ma=ma, target=target)

        if family in ('bar', 'bvar'):
            if len(args) != 1:
                raise UnsupportedModelException(f"'{family}' takes one lag argument", context=context)
            return cls(family=family, p=cls._parse_lag(args[0], context), sv=sv, target=target)

        if family == 'bfavar':
            if len(args) != 2:
                raise UnsupportedModelException("'bfavar' takes (lag, factors)", context=context)
            try:
                k = int(args[1])
            except ValueError:
                k = 0
            if k < 1:
                raise UnsupportedModelException(f"Factor count must be a positive integer in '{text}'", context=context)
            return cls(family='bfavar', p=cls._parse_lag(args[0], context), n_factors=k, sv=sv, target=target)

        raise UnsupportedModelException(f"Unknown model family '{family}'", context=context)

    @staticmethod
    def _parse_lag(arg: str, context: Dict[str, Any]) -> Optional[int]:
        if arg == 'aic':
            return None
        try:
            p = int(arg)
        except ValueError:
            p = 0
        if p < 1:
            raise UnsupportedModelException(f"Lag order must be a positive integer or 'aic', got '{arg}'", context=context)
        return p

    @property
    def model_id(self) -> str:
        if self.family in ('rw', 'rwd'):
            body = self.family
        elif self.family == 'arima':
            body = f"arima({self.ar},1,{self.ma})"
        else:
            lag = 'aic' if self.p is None else str(self.p)
            args = f"{lag},{self.n_factors}" if self.family == 'bfavar' else lag
            body = f"{self.family}({args})"
        if self.sv:
            body += '-sv'
        if self.target != 'price':
            body += f"@{self.target}"
        return body

    @property
    def is_var(self) -> bool:
        return self.family in VAR_FAMILIES

    @property
    def lag_by_aic(self) -> bool:
        return self.family in ('bar', 'bvar', 'bfavar') and self.p is None

    def __str__(self) -> str:
        return self.model_id


@dataclass(frozen=True)
class VarSpec:
    n: int
    p: int
    include_intercept: bool = True
    variable_names: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'variable_names', tuple(self.variable_names))
        if self.n < 1 or self.p < 1:
            raise ValidationException(
                f"VAR needs n >= 1 and p >= 1, got n={self.n}, p={self.p}",
                context={'module': 'models', 'op': 'var_spec'},
            )
        if self.variable_names and len(self.variable_names) != self.n:
            raise ValidationException(
                f"{len(self.variable_names)} variable names for n={self.n}",
                context={'module': 'models', 'op': 'var_spec'},
            )

    @property
    def n_regressors(self) -> int:
        return int(self.include_intercept) + self.n * self.p


@dataclass(frozen=True)
class MinnesotaPrior:
    lambda_overall: float = 0.2
    lambda_cross: float = 0.5
    lambda_lagdecay: float = 2.0
    intercept_scale: float = 100.0
    own_mean_first_lag: float = 0.0

    def __post_init__(self):
        if self.lambda_overall <= 0 or self.lambda_lagdecay <= 0 or self.intercept_scale <= 0:
            raise ValidationException(
                "Minnesota lambdas and intercept scale must be positive",
                context={'module': 'models', 'op': 'minnesota_prior'},
            )
        if not 0 < self.lambda_cross <= 1:
            raise ValidationException(
                "lambda_cross must lie in (0, 1]",
                context={'module': 'models', 'op': 'minnesota_prior'},
            )

    @classmethod
    def from_config(cls, prior: PriorConfig) -> 'MinnesotaPrior':
        return cls(
            lambda_overall=prior.lambda_overall,
            lambda_cross=prior.lambda_cross,
            lambda_lagdecay=prior.lambda_lagdecay,
            intercept_scale=prior.intercept_scale,
            own_mean_first_lag=prior.own_mean_first_lag,
        )


@dataclass(frozen=True, eq=False)
class RandomWalkPosterior:
    drift: float
    sigma2: float
    with_drift: bool
    n_obs: int

    def summary(self) -> Dict[str, Any]:
        return {'family': 'rwd' if self.with_drift else 'rw', 'drift': self.drift, 'sigma2': self.sigma2, 'n_obs': self.n_obs}


@dataclass(frozen=True, eq=False)
class ArimaPosterior:
    """
    Gaussian MLE of an ARMA(ar, ma) on the differenced series. ``state_mean``
    and ``state_cov`` (in units of ``sigma2``) describe the predicted state
    for the first out-of-sample month.
    """
    ar: int
    ma: int
    phi: float
    theta: float
    mean: float
    sigma2: float
    loglik: float
    converged: bool
    state_mean: np.ndarray
    state_cov: np.ndarray
    n_obs: int

    def __post_init__(self):
        object.__setattr__(self, 'state_mean', _frozen(self.state_mean, 1))
        object.__setattr__(self, 'state_cov', _frozen(self.state_cov, 2))

    def summary(self) -> Dict[str, Any]:
        return {
            'family': 'arima',
            'order': [self.ar, 1, self.ma],
            'phi': self.phi,
            'theta': self.theta,
            'mean': self.mean,
            'sigma2': self.sigma2,
            'loglik': self.loglik,
            'converged': self.converged,
            'n_obs': self.n_obs,
        }


@dataclass(frozen=True, eq=False)
class ConjugatePosterior:
    """Normal-inverse-Wishart posterior: B | Σ ~ MN(coef_mean, coef_row_cov, Σ), Σ ~ IW(sigma_scale, sigma_dof)"""
    coef_mean: np.ndarray
    coef_row_cov: np.ndarray
    sigma_scale: np.ndarray
    sigma_dof: float
    spec: VarSpec
    prior: Optional[MinnesotaPrior] = None
    n_obs: int = 0

    def __post_init__(self):
        for name in ('coef_mean', 'coef_row_cov', 'sigma_scale'):
            object.__setattr__(self, name, _frozen(getattr(self, name), 2))
        if self.coef_mean.shape != (self.spec.n_regressors, self.spec.n):
            raise ValidationException(
                f"coef_mean has shape {self.coef_mean.shape}, expected {(self.spec.n_regressors, self.spec.n)}",
                context={'module': 'models', 'op': 'conjugate_posterior'},
            )

    @property
    def sigma_mean(self) -> np.ndarray:
        """E[Σ] (requires dof > n + 1)"""
        return self.sigma_scale / (self.sigma_dof - self.spec.n - 1)

    def summary(self) -> Dict[str, Any]:
        return {
            'family': 'niw',
            'spec': {'n': self.spec.n, 'p': self.spec.p, 'variables': list(self.spec.variable_names)},
            'prior': None if self.prior is None else self.prior.__dict__,
            'coef_mean': self.coef_mean,
            'sigma_scale': self.sigma_scale,
            'sigma_dof': self.sigma_dof,
            'n_obs': self.n_obs,
        }


@dataclass(frozen=True, eq=False)
class StrictMinnesotaPosterior:
    """Equation-by-equation Normal posterior with Σ fixed at ``sigma``"""
    coef_mean: np.ndarray
    coef_cov: np.ndarray
    sigma: np.ndarray
    spec: VarSpec
    prior: Optional[MinnesotaPrior] = None
    n_obs: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'coef_mean', _frozen(self.coef_mean, 2))
        object.__setattr__(self, 'coef_cov', _frozen(self.coef_cov, 3))
        object.__setattr__(self, 'sigma', _frozen(self.sigma, 2))

    def summary(self) -> Dict[str, Any]:
        return {
            'family': 'strict_minnesota',
            'spec': {'n': self.spec.n, 'p': self.spec.p, 'variables': list(self.spec.variable_names)},
            'coef_mean': self.coef_mean,
            'sigma': self.sigma,
            'n_obs': self.n_obs,
        }


@dataclass(frozen=True, eq=False)
class SvDraws:
    """
    Retained Gibbs draws of the VAR with Choleski stochastic volatility:
    Σ_t⁻¹ = B0' D_t⁻¹ B0 with D_t = diag(exp(h_t)).
    """
    coefs: np.ndarray      # (draws, K, n)
    b0: np.ndarray         # (draws, n, n) unit lower triangular
    log_vol: np.ndarray    # (draws, T, n)
    mu: np.ndarray         # (draws, n)
    phi: np.ndarray        # (draws, n)
    sigma2: np.ndarray     # (draws, n)
    spec: VarSpec
    seed: Optional[int] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'coefs', _frozen(self.coefs, 3))
        object.__setattr__(self, 'b0', _frozen(self.b0, 3))
        object.__setattr__(self, 'log_vol', _frozen(self.log_vol, 3))
        for name in ('mu', 'phi', 'sigma2'):
            object.__setattr__(self, name, _frozen(getattr(self, name), 2))
        counts = {a.shape[0] for a in (self.coefs, self.b0, self.log_vol, self.mu, self.phi, self.sigma2)}
        if len(counts) != 1:
            raise ValidationException(
                "SV draw arrays disagree on the number of draws",
                context={'module': 'models', 'op': 'sv_draws'},
            )

    @property
    def draw_count(self) -> int:
        return int(self.coefs.shape[0])

    @property
    def coef_mean(self) -> np.ndarray:
        return self.coefs.mean(axis=0)

    def summary(self) -> Dict[str, Any]:
        return {
            'family': 'sv',
            'spec': {'n': self.spec.n, 'p': self.spec.p, 'variables': list(self.spec.variable_names)},
            'draw_count': self.draw_count,
            'seed': self.seed,
            'coef_mean': self.coef_mean,
            'b0_mean': self.b0.mean(axis=0),
            'mu_mean': self.mu.mean(axis=0),
            'phi_mean': self.phi.mean(axis=0),
            'sigma2_mean': self.sigma2.mean(axis=0),
            'diagnostics': self.diagnostics,
        }


ModelPosterior = Union[RandomWalkPosterior, ArimaPosterior, ConjugatePosterior, StrictMinnesotaPosterior, SvDraws]


@dataclass(frozen=True, eq=False)
class ForecastRecord:
    """
    One origin x horizon forecast in levels. ``draws`` is kept only when
    requested; ``draw_mean`` is the mean of the level draws, stored next to
    the plug-in point for comparison.
    """
    model_id: str
    target: str
    origin: Any
    horizon: int
    origin_level: float
    point_level: float
    sign: int
    quantiles: Dict[float, float] = field(default_factory=dict)
    draws: Optional[np.ndarray] = None
    draw_mean: Optional[float] = None
    realized: Optional[float] = None

    def __post_init__(self):
        if self.draws is not None:
            object.__setattr__(self, 'draws', _frozen(self.draws, 1))
        levels = [self.quantiles[a] for a in sorted(self.quantiles)]
        if any(b < a for a, b in zip(levels, levels[1:])):
            raise ValidationException(
                "Quantiles must be nondecreasing in alpha",
                context={'module': 'forecast', 'op': 'forecast_record', 'model_id': self.model_id},
            )

    @property
    def target_month(self):
        return self.origin.shift(self.horizon)

    def with_realized(self, value: Optional[float]) -> 'ForecastRecord':
        return dataclasses.replace(self, realized=value)
