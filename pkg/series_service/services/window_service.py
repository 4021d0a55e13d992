# series_service/services/window_service.py
"""
Real-time preparation of the model inputs at one forecast origin.

Everything here is computed from observations dated at or before the
origin: emissions are interpolated with annual values for earlier calendar
years only, predictors are transformed, aligned and standardized inside the
window and factors are re-extracted.
"""
import logging
from typing import List, Optional

from series_service.services.disagg_service import disagg_service
from series_service.services.factor_service import factor_service
from series_service.services.series_service import series_service
from series_service.types import ChowLinResult, DataBundle, MonthDate, MonthlySeries, OriginWindow, PredictorPanel
from series_service.utils.exceptions import SeriesTooShortException
from shared.utils.run_config import DisaggConfig, FactorConfig

logger = logging.getLogger(__name__)


class WindowService:

    def emission_indicator(self, bundle: DataBundle, through: Optional[MonthDate] = None) -> MonthlySeries:
        sectors = bundle.ip_sectors
        if through is not None:
            sectors = [s.truncate(through) for s in sectors]
        return disagg_service.weighted_indicator(list(sectors), list(bundle.sector_weights))

    def interpolate_emissions(
        self,
        bundle: DataBundle,
        through: Optional[MonthDate] = None,
        disagg: Optional[DisaggConfig] = None,
    ) -> ChowLinResult:
        """Monthly emissions from the annual totals; real-time when ``through`` is given."""
        disagg = disagg or DisaggConfig.from_settings()
        indicator = self.emission_indicator(bundle, through)
        return disagg_service.interpolate(
            bundle.emissions_annual,
            indicator,
            through=through,
            constant=disagg.constant,
            rho_bound=disagg.rho_bound,
            grid_step=disagg.grid_step,
        )

    def transformed_predictors(self, bundle: DataBundle, through: MonthDate) -> List[MonthlySeries]:
        transformed = []
        for raw in bundle.predictors:
            meta = bundle.predictor_meta[raw.name]
            transformed.append(series_service.apply_transform(raw.truncate(through), meta.transform))
        return transformed

    @staticmethod
    def _classes(bundle: DataBundle):
        return {name: meta.predictor_class for name, meta in bundle.predictor_meta.items()}

    def reference_panel(self, bundle: DataBundle, origin: MonthDate) -> PredictorPanel:
        """Panel standardized on data through ``origin``, whose statistics later windows reuse"""
        return series_service.align_panel(self.transformed_predictors(bundle, origin), self._classes(bundle))

    def prepare(
        self,
        bundle: DataBundle,
        origin: MonthDate,
        n_factors: int = 0,
        disagg: Optional[DisaggConfig] = None,
        factors: Optional[FactorConfig] = None,
        reference: Optional[PredictorPanel] = None,
    ) -> OriginWindow:
        """
        Inputs at ``origin``. The predictor panel is standardized with its own
        statistics unless a ``reference`` panel fixes them.
        """
        if not bundle.price.covers(origin):
            raise SeriesTooShortException(
                f"Price series {bundle.price.start}..{bundle.price.end} does not cover origin {origin}",
                context={'module': 'backtest', 'op': 'prepare_window', 'origin': str(origin)},
            )
        factors = factors or FactorConfig.from_settings()

        price_levels = bundle.price.truncate(origin)
        price = series_service.log_diff(price_levels)
        ip = series_service.log_diff(bundle.ip_total.truncate(origin))

        interpolation = self.interpolate_emissions(bundle, through=origin, disagg=disagg)
        emissions = series_service.log_diff(interpolation.monthly)

        panel = None
        factor_model = None
        if n_factors > 0:
            panel = series_service.align_panel(
                self.transformed_predictors(bundle, origin), self._classes(bundle), reference=reference
            )
            factor_model = factor_service.extract_factors(
                panel, n_factors, standardize_factors=factors.standardize_factors
            )

        logger.debug(
            f"Prepared window at {origin}: price {price.start}..{price.end}, "
            f"emissions rho={interpolation.rho:.3f}, factors={n_factors}"
        )
        return OriginWindow(
            origin=origin,
            price=price,
            emissions=emissions,
            ip=ip,
            price_level=price_levels.value_at(origin),
            emissions_level=interpolation.monthly.value_at(origin),
            chow_lin_rho=interpolation.rho,
            panel=panel,
            factor_model=factor_model,
        )

    def variable_set(self, window: OriginWindow, n_factors: int = 0) -> List[MonthlySeries]:
        """
        VAR variables on their common sample: (Δr, Δemis, Δip), with Δip
        replaced by the first ``n_factors`` factors when ``n_factors`` > 0.
        """
        variables = [window.price, window.emissions]
        if n_factors > 0:
            if window.factor_model is None or window.factor_model.k < n_factors:
                raise SeriesTooShortException(
                    f"Window at {window.origin} carries fewer than {n_factors} factor(s)",
                    context={'module': 'backtest', 'op': 'variable_set', 'origin': str(window.origin)},
                )
            variables.extend(window.factor_model.factors[:n_factors])
        else:
            variables.append(window.ip)
        return series_service.align(variables)


window_service = WindowService()
