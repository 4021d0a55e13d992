# series_service/services/disagg_service.py
"""
Chow-Lin temporal disaggregation of annual totals to monthly values.

Model: monthly y_h = X_h beta + u_h with AR(1) residuals, observed only
through annual sums y_l = C y_h. Beta is estimated by GLS on the aggregated
system and the annual residuals are distributed across months with
V C' (C V C')^{-1}, so yearly sums of the result reproduce y_l exactly.
"""
import logging
from typing import Optional, Sequence

import numpy as np
from django.conf import settings
from scipy import linalg, optimize

from series_service.types import AnnualSeries, ChowLinResult, MonthDate, MonthlySeries, TransformTag
from series_service.utils.exceptions import (
    CollinearityException,
    IndicatorCoverageException,
    LengthMismatchException,
    SeriesTooShortException,
)
from shared.utils.exceptions import ValidationException

logger = logging.getLogger(__name__)

MONTHS_PER_YEAR = 12
_CONDITION_LIMIT = 1e12


class DisaggService:

    # ------------------------------------------------------------------
    # Indicator construction
    # ------------------------------------------------------------------
    def weighted_indicator(
        self,
        ip_series: Sequence[MonthlySeries],
        weights: Sequence[float],
        name: str = 'emission_weighted_ip',
    ) -> MonthlySeries:
        """Pointwise weighted average with weights normalized to sum to one."""
        if not ip_series:
            raise ValidationException(
                "At least one indicator series is required",
                context={'module': 'disagg', 'op': 'weighted_indicator'},
            )
        if len(ip_series) != len(weights):
            raise LengthMismatchException(
                f"{len(ip_series)} series but {len(weights)} weights",
                context={'module': 'disagg', 'op': 'weighted_indicator'},
            )
        first = ip_series[0]
        for s in ip_series[1:]:
            if len(s) != len(first) or s.start != first.start:
                raise LengthMismatchException(
                    f"Indicator '{s.name}' ({s.start}, {len(s)} obs) does not match '{first.name}' ({first.start}, {len(first)} obs)",
                    context={'module': 'disagg', 'op': 'weighted_indicator'},
                )
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or not w.sum() > 0:
            raise ValidationException(
                "Indicator weights must be nonnegative with a positive sum",
                context={'module': 'disagg', 'op': 'weighted_indicator'},
            )
        w = w / w.sum()
        values = np.column_stack([s.values for s in ip_series]) @ w
        return MonthlySeries(name=name, start=first.start, values=values, transform_tag=TransformTag.NONE)

    # ------------------------------------------------------------------
    # Chow-Lin
    # ------------------------------------------------------------------
    @staticmethod
    def aggregation_matrix(n_years: int) -> np.ndarray:
        """N x 12N sum-aggregation matrix"""
        return np.kron(np.eye(n_years), np.ones((1, MONTHS_PER_YEAR)))

    @staticmethod
    def ar1_covariance(rho: float, n: int) -> np.ndarray:
        """Unit-innovation AR(1) covariance: rho^|i-j| / (1 - rho^2)"""
        return linalg.toeplitz(rho ** np.arange(n)) / (1.0 - rho ** 2)

    def _gls(self, rho: float, y_l: np.ndarray, x_h: np.ndarray, n_years: int):
        n_months = x_h.shape[0]
        v = self.ar1_covariance(rho, n_months)
        # C V and C V C' by block sums
        cv = v.reshape(n_years, MONTHS_PER_YEAR, n_months).sum(axis=1)
        v_l = cv.reshape(n_years, n_years, MONTHS_PER_YEAR).sum(axis=2)
        x_l = x_h.reshape(n_years, MONTHS_PER_YEAR, -1).sum(axis=1)

        factor = linalg.cho_factor(v_l)
        w_x = linalg.cho_solve(factor, x_l)
        cross = x_l.T @ w_x
        if np.linalg.matrix_rank(x_l) < x_l.shape[1] or np.linalg.cond(cross) > _CONDITION_LIMIT:
            raise CollinearityException(
                "Chow-Lin regressors are collinear (singular X'V^-1X)",
                context={'module': 'disagg', 'op': 'chow_lin', 'rho': float(rho)},
            )
        beta = linalg.solve(cross, w_x.T @ y_l, assume_a='pos')
        resid = y_l - x_l @ beta
        w_resid = linalg.cho_solve(factor, resid)
        monthly = x_h @ beta + cv.T @ w_resid

        sigma2 = max(float(resid @ w_resid) / n_years, 1e-300)
        logdet = 2.0 * np.sum(np.log(np.diag(factor[0])))
        loglik = -0.5 * n_years * (np.log(2.0 * np.pi * sigma2) + 1.0) - 0.5 * logdet
        return beta, monthly, loglik

    def _design(self, indicator: np.ndarray, constant: bool) -> np.ndarray:
        if constant:
            return np.column_stack([np.ones_like(indicator), indicator])
        return indicator.reshape(-1, 1)

    def chow_lin(
        self,
        annual: AnnualSeries,
        indicator: MonthlySeries,
        constant: Optional[bool] = None,
        rho: Optional[float] = None,
        rho_bound: Optional[float] = None,
        grid_step: Optional[float] = None,
    ) -> ChowLinResult:
        """
        Disaggregate ``annual`` using ``indicator``.

        ``rho`` fixes the residual autocorrelation; otherwise it maximizes the
        GLS log-likelihood over a grid on (-rho_bound, rho_bound), refined by
        golden-section search around the best grid point.
        """
        if constant is None:
            constant = getattr(settings, 'CARBON_CHOWLIN_CONSTANT', True)
        if rho_bound is None:
            rho_bound = getattr(settings, 'CARBON_CHOWLIN_RHO_BOUND', 0.99)
        if grid_step is None:
            grid_step = getattr(settings, 'CARBON_CHOWLIN_GRID_STEP', 0.05)

        n_years = len(annual)
        if n_years < 2:
            raise SeriesTooShortException(
                f"Chow-Lin needs at least 2 annual observations, got {n_years}",
                context={'module': 'disagg', 'op': 'chow_lin'},
            )
        expected_start = MonthDate(annual.start_year, 1)
        if len(indicator) != MONTHS_PER_YEAR * n_years or indicator.start != expected_start:
            raise IndicatorCoverageException(
                f"Indicator must cover {expected_start}..{MonthDate(annual.end_year, 12)} "
                f"({MONTHS_PER_YEAR * n_years} months), got {indicator.start}..{indicator.end}",
                context={'module': 'disagg', 'op': 'chow_lin'},
            )

        y_l = annual.values.astype(float)
        x_h = self._design(indicator.values, constant)

        if rho is not None:
            if not -1.0 < rho < 1.0:
                raise ValidationException(
                    f"rho must lie in (-1, 1), got {rho}",
                    context={'module': 'disagg', 'op': 'chow_lin'},
                )
            best_rho = float(rho)
        else:
            best_rho = self._estimate_rho(y_l, x_h, n_years, rho_bound, grid_step)

        beta, monthly, loglik = self._gls(best_rho, y_l, x_h, n_years)
        logger.debug(f"Chow-Lin: {n_years} years, rho={best_rho:.4f}, loglik={loglik:.3f}")
        return ChowLinResult(
            monthly=MonthlySeries(name=annual.name, start=indicator.start, values=monthly),
            rho=best_rho,
            beta=beta,
            fit_loglik=float(loglik),
        )

    def _estimate_rho(self, y_l, x_h, n_years, rho_bound, grid_step) -> float:
        grid = np.arange(-rho_bound, rho_bound + 1e-12, grid_step)
        if grid[-1] < rho_bound - 1e-12:
            grid = np.append(grid, rho_bound)
        logliks = np.array([self._gls(r, y_l, x_h, n_years)[2] for r in grid])
        best = int(np.argmax(logliks))
        if best == 0 or best == grid.size - 1:
            return float(grid[best])

        def negative_loglik(r):
            r = float(np.clip(r, -rho_bound, rho_bound))
            return -self._gls(r, y_l, x_h, n_years)[2]

        try:
            refined = optimize.golden(
                negative_loglik,
                brack=(grid[best - 1], grid[best], grid[best + 1]),
                tol=1e-6,
            )
        except (ValueError, RuntimeError):
            return float(grid[best])
        refined = float(np.clip(refined, -rho_bound, rho_bound))
        if negative_loglik(refined) > -logliks[best]:
            return float(grid[best])
        return refined

    # ------------------------------------------------------------------
    # Sample handling
    # ------------------------------------------------------------------
    @staticmethod
    def extend_by_carry_forward(series: MonthlySeries, end: MonthDate) -> MonthlySeries:
        """Extend ``series`` to ``end`` by repeating its last value."""
        missing = series.end.months_until(end)
        if missing <= 0:
            return series
        values = np.concatenate([series.values, np.repeat(series.values[-1], missing)])
        return series.with_values(values)

    def interpolate(
        self,
        annual: AnnualSeries,
        indicator: MonthlySeries,
        through: Optional[MonthDate] = None,
        constant: Optional[bool] = None,
        rho_bound: Optional[float] = None,
        grid_step: Optional[float] = None,
    ) -> ChowLinResult:
        """
        Disaggregate using only information dated <= ``through``.

        Annual values are used for calendar years before ``through.year``;
        later years (up to ``through.year``) repeat the last annual value and
        the indicator is carried forward past its last usable month. The
        monthly result is truncated at ``through``. Without ``through`` the
        full indicator sample is used and its final, incomplete year is
        filled the same way.
        """
        if through is None:
            through = indicator.end
            last_annual_year = annual.end_year
        else:
            last_annual_year = through.year - 1
        last_annual_year = min(last_annual_year, through.year)
        first_year = indicator.start.year if indicator.start.month == 1 else indicator.start.year + 1
        first_year = max(first_year, annual.start_year)
        usable = AnnualSeries(
            start_year=first_year,
            values=annual.values[first_year - annual.start_year:last_annual_year - annual.start_year + 1],
            name=annual.name,
        ) if last_annual_year >= first_year else None
        if usable is None or len(usable) < 2:
            raise SeriesTooShortException(
                f"Fewer than 2 complete annual observations available through {through}",
                context={'module': 'disagg', 'op': 'chow_lin', 'origin': str(through)},
            )
        last_year = through.year
        usable = usable.carry_forward(last_year)
        window = indicator.truncate(through).window(MonthDate(first_year, 1), min(through, indicator.end))
        window = self.extend_by_carry_forward(window, MonthDate(last_year, 12))
        result = self.chow_lin(usable, window, constant=constant, rho_bound=rho_bound, grid_step=grid_step)
        monthly = result.monthly.truncate(through)
        return ChowLinResult(monthly=monthly, rho=result.rho, beta=result.beta, fit_loglik=result.fit_loglik)


disagg_service = DisaggService()
