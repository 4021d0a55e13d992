# model_service/utils/mixture.py
"""
Auxiliary-mixture sampling of log-volatility paths.

log(e_t² + c) = h_t + log chi²(1) is approximated by a 7-component Gaussian
mixture; conditional on the component indicators the model is linear and
Gaussian in h, which is drawn jointly either by forward-filtering
backward-sampling or from its banded posterior precision.
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg

# Kim-Shephard-Chib mixture for log chi²(1)
MIXTURE_PROBS = np.array([0.00730, 0.10556, 0.00002, 0.04395, 0.34001, 0.24566, 0.25750])
MIXTURE_MEANS = np.array([-10.12999, -3.97281, -8.56686, 2.77786, 0.61942, 1.79518, -1.08819]) - 1.2704
MIXTURE_VARS = np.array([5.79596, 2.61369, 5.17950, 0.16735, 0.64009, 0.34023, 1.26261])

PHI_BOUND = 0.995


@dataclass(frozen=True)
class VolPrior:
    phi_mean: float = 0.95
    phi_sd: float = 0.04
    mu_mean: float = 0.0
    mu_var: float = 10.0
    sigma_shape: float = 5.0
    sigma_scale: float = 0.16


def log_squared(residuals: np.ndarray, offset: float) -> np.ndarray:
    return np.log(residuals ** 2 + offset)


def sample_indicators(y_star: np.ndarray, h: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw mixture components given the current log-volatility path."""
    resid = y_star[:, None] - h[:, None] - MIXTURE_MEANS[None, :]
    log_weights = np.log(MIXTURE_PROBS) - 0.5 * np.log(MIXTURE_VARS) - 0.5 * resid ** 2 / MIXTURE_VARS
    log_weights -= log_weights.max(axis=1, keepdims=True)
    weights = np.exp(log_weights)
    cumulative = np.cumsum(weights, axis=1)
    u = rng.uniform(size=y_star.size) * cumulative[:, -1]
    return np.minimum((cumulative < u[:, None]).sum(axis=1), MIXTURE_PROBS.size - 1)


def ffbs_log_vol(
    y_star: np.ndarray,
    components: np.ndarray,
    mu: float,
    phi: float,
    sigma2: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Forward-filter backward-sample h given the mixture components."""
    n = y_star.size
    obs = y_star - MIXTURE_MEANS[components]
    obs_var = MIXTURE_VARS[components]
    filtered_mean = np.empty(n)
    filtered_var = np.empty(n)
    predicted_var = np.empty(n)

    m_pred = mu
    p_pred = sigma2 / (1.0 - phi ** 2)
    for t in range(n):
        predicted_var[t] = p_pred
        gain = p_pred / (p_pred + obs_var[t])
        filtered_mean[t] = m_pred + gain * (obs[t] - m_pred)
        filtered_var[t] = (1.0 - gain) * p_pred
        m_pred = mu + phi * (filtered_mean[t] - mu)
        p_pred = phi ** 2 * filtered_var[t] + sigma2

    h = np.empty(n)
    h[-1] = filtered_mean[-1] + np.sqrt(filtered_var[-1]) * rng.standard_normal()
    for t in range(n - 2, -1, -1):
        smoother = phi * filtered_var[t] / predicted_var[t + 1]
        mean = filtered_mean[t] + smoother * (h[t + 1] - (mu + phi * (filtered_mean[t] - mu)))
        var = max(filtered_var[t] * (1.0 - smoother * phi), 0.0)
        h[t] = mean + np.sqrt(var) * rng.standard_normal()
    return h


def precision_log_vol(
    y_star: np.ndarray,
    components: np.ndarray,
    mu: float,
    phi: float,
    sigma2: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw h from its tridiagonal posterior precision (same target as FFBS)."""
    n = y_star.size
    obs_var = MIXTURE_VARS[components]
    diagonal = np.full(n, (1.0 + phi ** 2) / sigma2)
    diagonal[0] = diagonal[-1] = 1.0 / sigma2
    if n == 1:
        diagonal[0] = (1.0 - phi ** 2) / sigma2
    diagonal += 1.0 / obs_var
    banded = np.zeros((2, n))
    banded[0] = diagonal
    banded[1, :-1] = -phi / sigma2

    rhs = (y_star - MIXTURE_MEANS[components] - mu) / obs_var
    chol = linalg.cholesky_banded(banded, lower=True)
    mean = linalg.cho_solve_banded((chol, True), rhs)
    upper = np.zeros((2, n))
    upper[0, 1:] = chol[1, :-1]
    upper[1] = chol[0]
    noise = linalg.solve_banded((0, 1), upper, rng.standard_normal(n))
    return mu + mean + noise


def sample_vol_params(
    h: np.ndarray,
    mu: float,
    phi: float,
    sigma2: float,
    prior: VolPrior,
    rng: np.random.Generator,
):
    """One sweep over (sigma2, phi, mu) of the log-volatility AR(1)."""
    n = h.size
    x = h - mu

    # sigma2 | h, mu, phi
    ssr = (1.0 - phi ** 2) * x[0] ** 2 + np.sum((x[1:] - phi * x[:-1]) ** 2)
    shape = prior.sigma_shape + 0.5 * n
    scale = prior.sigma_scale + 0.5 * ssr
    sigma2 = scale / rng.gamma(shape)

    # phi | h, mu, sigma2 with the initial-condition term in an MH step
    lagged = x[:-1]
    precision = 1.0 / prior.phi_sd ** 2 + lagged @ lagged / sigma2
    mean = (prior.phi_mean / prior.phi_sd ** 2 + lagged @ x[1:] / sigma2) / precision
    proposal = mean + rng.standard_normal() / np.sqrt(precision)
    if abs(proposal) < PHI_BOUND:
        def initial_log_density(value):
            return 0.5 * np.log(1.0 - value ** 2) - 0.5 * (1.0 - value ** 2) * x[0] ** 2 / sigma2

        if np.log(rng.uniform()) < initial_log_density(proposal) - initial_log_density(phi):
            phi = float(proposal)

    # mu | h, phi, sigma2
    precision = (
        1.0 / prior.mu_var
        + (1.0 - phi ** 2) / sigma2
        + (n - 1) * (1.0 - phi) ** 2 / sigma2
    )
    weighted = (
        prior.mu_mean / prior.mu_var
        + (1.0 - phi ** 2) * h[0] / sigma2
        + (1.0 - phi) * np.sum(h[1:] - phi * h[:-1]) / sigma2
    )
    mu = weighted / precision + rng.standard_normal() / np.sqrt(precision)
    return float(mu), float(phi), float(sigma2)
