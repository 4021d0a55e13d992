# series_service/services/factor_service.py

import logging
from typing import Dict, Optional

import numpy as np
from django.conf import settings

from series_service.types import FactorModel, MonthlySeries, PredictorClass, PredictorPanel, TransformTag
from series_service.utils.exceptions import (
    DegenerateSeriesException,
    FactorCountException,
    InvalidWindowException,
    LengthMismatchException,
    UnknownClassException,
)

logger = logging.getLogger(__name__)


class FactorService:
    """
    Principal-component factors of a standardized predictor panel and the
    diagnostics built on them (R² of single predictors, class contributions,
    moving averages for presentation).
    """

    def extract_factors(
        self,
        panel: PredictorPanel,
        k: int,
        standardize_factors: Optional[bool] = None,
    ) -> FactorModel:
        if standardize_factors is None:
            standardize_factors = getattr(settings, 'CARBON_STANDARDIZE_FACTORS', False)
        x = panel.matrix
        n_obs, n_predictors = x.shape
        if not 1 <= k <= min(n_predictors, n_obs - 1):
            raise FactorCountException(
                f"k={k} outside 1..{min(n_predictors, n_obs - 1)} for a {n_obs}x{n_predictors} panel",
                context={'module': 'factors', 'op': 'extract_factors'},
            )

        # correlation matrix of the standardized panel
        corr = (x.T @ x) / (n_obs - 1)
        eigenvalues, eigenvectors = np.linalg.eigh(corr)
        order = np.argsort(eigenvalues)[::-1]
        eigenvalues = np.clip(eigenvalues[order], 0.0, None)
        eigenvectors = eigenvectors[:, order]

        loadings = eigenvectors[:, :k].copy()
        for j in range(k):
            pivot = int(np.argmax(np.abs(loadings[:, j])))
            if loadings[pivot, j] < 0:
                loadings[:, j] = -loadings[:, j]

        scores = x @ loadings
        if standardize_factors:
            scores = scores / scores.std(axis=0, ddof=1)

        start = panel.sample[0]
        factors = tuple(
            MonthlySeries(name=f"factor_{j + 1}", start=start, values=scores[:, j], transform_tag=TransformTag.NONE)
            for j in range(k)
        )
        trace = float(np.trace(corr))
        shares = eigenvalues / trace if trace > 0 else np.zeros_like(eigenvalues)
        logger.debug(f"Extracted {k} factor(s); variance shares {np.round(shares[:k], 3).tolist()}")
        return FactorModel(
            loadings=loadings,
            factors=factors,
            eigenvalues=eigenvalues,
            variance_shares=shares,
            predictor_names=tuple(panel.names),
        )

    def factor_r2(self, factor: MonthlySeries, predictor: MonthlySeries) -> float:
        """R² of an OLS regression of the factor on one predictor (with intercept)."""
        if factor.start != predictor.start or len(factor) != len(predictor):
            raise LengthMismatchException(
                f"Factor '{factor.name}' and predictor '{predictor.name}' cover different samples",
                context={'module': 'factors', 'op': 'factor_r2'},
            )
        x = predictor.values - predictor.values.mean()
        y = factor.values - factor.values.mean()
        sxx = float(x @ x)
        if not sxx > 0:
            raise DegenerateSeriesException(
                f"Predictor '{predictor.name}' has zero variance",
                context={'module': 'factors', 'op': 'factor_r2'},
            )
        syy = float(y @ y)
        if syy == 0:
            return 0.0
        r2 = float(x @ y) ** 2 / (sxx * syy)
        return float(min(max(r2, 0.0), 1.0))

    def r2_table(self, model: FactorModel, panel: PredictorPanel, n_factors: int = 3) -> Dict[str, Dict[str, float]]:
        """predictor -> {factor name -> R²} for the first ``n_factors`` factors"""
        table: Dict[str, Dict[str, float]] = {}
        for predictor in panel.series:
            table[predictor.name] = {
                factor.name: self.factor_r2(factor, predictor)
                for factor in model.factors[:n_factors]
            }
        return table

    def factor_contributions(
        self,
        model: FactorModel,
        panel: PredictorPanel,
        which: int,
    ) -> Dict[PredictorClass, MonthlySeries]:
        """
        Class-grouped contributions loading_{j,which} * x_{j,t} to factor
        ``which`` (0-based); the class series sum to the factor score.
        """
        if not 0 <= which < model.k:
            raise FactorCountException(
                f"Factor index {which} outside 0..{model.k - 1}",
                context={'module': 'factors', 'op': 'factor_contributions'},
            )
        x = panel.matrix
        weights = model.loadings[:, which]
        contributions = x * weights
        grouped: Dict[PredictorClass, np.ndarray] = {}
        for j, name in enumerate(panel.names):
            tag = panel.class_of.get(name)
            try:
                tag = PredictorClass(tag)
            except ValueError:
                raise UnknownClassException(
                    f"Predictor '{name}' has unknown class '{tag}'",
                    context={'module': 'factors', 'op': 'factor_contributions'},
                )
            grouped[tag] = grouped.get(tag, np.zeros(x.shape[0])) + contributions[:, j]
        start = panel.sample[0]
        return {
            tag: MonthlySeries(name=f"{tag.value}_to_factor_{which + 1}", start=start, values=values)
            for tag, values in sorted(grouped.items(), key=lambda item: item[0].value)
        }

    def moving_average(self, series: MonthlySeries, window: int, mode: str = 'centered') -> MonthlySeries:
        """
        Arithmetic moving average without padding. Centered output is dated
        at the window middle; backward output at the window end.
        """
        if mode not in ('centered', 'backward'):
            raise InvalidWindowException(
                f"Unknown moving-average mode '{mode}'",
                context={'module': 'factors', 'op': 'moving_average'},
            )
        if window < 1 or window > len(series) or (mode == 'centered' and window % 2 == 0):
            raise InvalidWindowException(
                f"Window {window} invalid for {mode} average of {len(series)} observations",
                context={'module': 'factors', 'op': 'moving_average'},
            )
        averaged = np.convolve(series.values, np.ones(window) / window, mode='valid')
        offset = (window - 1) // 2 if mode == 'centered' else window - 1
        return series.with_values(averaged, start=series.start.shift(offset))


factor_service = FactorService()
