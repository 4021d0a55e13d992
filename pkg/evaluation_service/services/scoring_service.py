# evaluation_service/services/scoring_service.py
"""
Point, sign and density scores.

Errors are realized minus forecast levels. Quantile scores use
QS(alpha) = 2 [1(R <= q) - alpha] (q - R) on the alpha_j = j/J grid,
averaged over j = 1..J-1, optionally weighted to emphasise the center or
one tail of the predictive distribution.
"""
import logging
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from evaluation_service.types import REGIONS
from evaluation_service.utils.exceptions import (
    GridMismatchException,
    ScoreInputException,
    UnknownRegionException,
    ZeroBenchmarkException,
)

logger = logging.getLogger(__name__)

_GRID_TOL = 1e-9


def _vector(values, name: str, op: str) -> np.ndarray:
    array = np.asarray(values, dtype=float).ravel()
    if array.size == 0:
        raise ScoreInputException(f"{name} is empty", context={'module': 'eval', 'op': op})
    if not np.all(np.isfinite(array)):
        raise ScoreInputException(f"{name} contains non-finite values", context={'module': 'eval', 'op': op})
    return array


def _paired(a, b, op: str):
    x, y = _vector(a, 'first input', op), _vector(b, 'second input', op)
    if x.size != y.size:
        raise ScoreInputException(
            f"Inputs have lengths {x.size} and {y.size}",
            context={'module': 'eval', 'op': op},
        )
    return x, y


class ScoringService:

    # ------------------------------------------------------------------
    # Point and sign scores
    # ------------------------------------------------------------------
    @staticmethod
    def rmsfe(errors: Sequence[float]) -> float:
        e = _vector(errors, 'errors', 'rmsfe')
        return float(np.sqrt(np.mean(e ** 2)))

    def relative_rmsfe(self, model_errors: Sequence[float], benchmark_errors: Sequence[float]) -> float:
        """RMSFE of the model over that of the benchmark; below one the model wins"""
        model, benchmark = _paired(model_errors, benchmark_errors, 'relative_rmsfe')
        denominator = self.rmsfe(benchmark)
        if denominator == 0.0:
            raise ZeroBenchmarkException(
                "Benchmark RMSFE is zero; relative RMSFE undefined",
                context={'module': 'eval', 'op': 'relative_rmsfe', 'n_obs': benchmark.size},
            )
        return self.rmsfe(model) / denominator

    @staticmethod
    def success_ratio(forecast_signs: Sequence[int], realized_signs: Sequence[int]) -> float:
        """Share of exact sign matches; a zero forecast only matches a zero change"""
        forecast, realized = _paired(forecast_signs, realized_signs, 'success_ratio')
        return float(np.mean(np.sign(forecast) == np.sign(realized)))

    # ------------------------------------------------------------------
    # Density scores
    # ------------------------------------------------------------------
    @staticmethod
    def grid_levels(quantiles: Mapping[float, float]) -> np.ndarray:
        """Sorted alphas, checked against j/J for J = len(quantiles) + 1"""
        alphas = np.array(sorted(float(a) for a in quantiles), dtype=float)
        J = alphas.size + 1
        expected = np.arange(1, J) / J
        if alphas.size == 0 or not np.allclose(alphas, expected, rtol=0.0, atol=_GRID_TOL):
            raise GridMismatchException(
                f"Quantile levels {alphas.tolist()} are not the j/{J} grid",
                context={'module': 'eval', 'op': 'qcrps', 'levels': alphas.size},
            )
        return alphas

    def quantile_scores(self, quantiles: Mapping[float, float], realized: float) -> Dict[float, float]:
        alphas = self.grid_levels(quantiles)
        ordered = sorted(quantiles.items())
        q = np.array([value for _, value in ordered], dtype=float)
        scores = 2.0 * ((realized <= q).astype(float) - alphas) * (q - realized)
        return dict(zip(alphas.tolist(), scores.tolist()))

    @staticmethod
    def region_weights(alphas: np.ndarray, region: Optional[str]) -> np.ndarray:
        if region is None:
            return np.ones_like(alphas)
        if region == 'center':
            return alphas * (1.0 - alphas)
        if region == 'right':
            return alphas ** 2
        if region == 'left':
            return (1.0 - alphas) ** 2
        raise UnknownRegionException(
            f"Unknown region '{region}', expected one of {', '.join(REGIONS)}",
            context={'module': 'eval', 'op': 'weighted_qcrps'},
        )

    def weighted_qcrps(self, quantiles: Mapping[float, float], realized: float, region: Optional[str]) -> float:
        weights = self.region_weights(np.array(sorted(float(a) for a in quantiles)), region)
        scores = np.array(list(self.quantile_scores(quantiles, float(realized)).values()))
        return float(np.mean(weights * scores))

    def qcrps(self, quantiles: Mapping[float, float], realized: float) -> float:
        return self.weighted_qcrps(quantiles, realized, None)


scoring_service = ScoringService()
