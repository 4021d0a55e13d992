# model_service/utils/state_space.py
"""
ARMA(1,1) in state-space form and its exact Gaussian likelihood.

State alpha_t = [w_t, theta * e_t] with w_t the demeaned observation:

    alpha_t = T alpha_{t-1} + R e_t,   T = [[phi, 1], [0, 0]],  R = [1, theta]'
    w_t     = Z alpha_t,               Z = [1, 0]

The filter runs with unit innovation variance; sigma² is concentrated out.
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg

_MIN_F = 1e-12


@dataclass(frozen=True, eq=False)
class FilterResult:
    loglik: float
    sigma2: float
    innovations: np.ndarray
    variances: np.ndarray
    state_mean: np.ndarray
    state_cov: np.ndarray


def arma_system(phi: float, theta: float):
    transition = np.array([[phi, 1.0], [0.0, 0.0]])
    selection = np.array([1.0, theta])
    return transition, selection


def stationary_covariance(phi: float, theta: float) -> np.ndarray:
    transition, selection = arma_system(phi, theta)
    return linalg.solve_discrete_lyapunov(transition, np.outer(selection, selection))


def kalman_filter(w: np.ndarray, phi: float, theta: float) -> FilterResult:
    """Prediction-error decomposition of the ARMA(1,1) likelihood for demeaned ``w``."""
    transition, selection = arma_system(phi, theta)
    rr = np.outer(selection, selection)
    a = np.zeros(2)
    p = stationary_covariance(phi, theta)
    n = w.size
    innovations = np.empty(n)
    variances = np.empty(n)
    for t in range(n):
        v = w[t] - a[0]
        f = max(p[0, 0], _MIN_F)
        gain = transition @ p[:, 0] / f
        a = transition @ a + gain * v
        p = transition @ p @ transition.T + rr - np.outer(gain, gain) * f
        innovations[t] = v
        variances[t] = f
    sigma2 = float(np.mean(innovations ** 2 / variances))
    sigma2_floor = max(sigma2, 1e-300)
    loglik = -0.5 * n * (np.log(2.0 * np.pi * sigma2_floor) + 1.0) - 0.5 * float(np.sum(np.log(variances)))
    return FilterResult(
        loglik=float(loglik),
        sigma2=sigma2,
        innovations=innovations,
        variances=variances,
        state_mean=a,
        state_cov=0.5 * (p + p.T),
    )
