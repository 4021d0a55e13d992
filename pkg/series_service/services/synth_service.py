# series_service/services/synth_service.py
"""
Synthetic data bundles with a known data-generating process.

Latent factors follow a stationary VAR(1). Industrial production growth and
predictor values load on the factors; monthly emissions grow with the
emission-weighted IP index and are only published as calendar-year sums, so
the Chow-Lin step has a recoverable truth. Real carbon price growth depends
on its own lag, lagged factors and lagged emissions growth, optionally with
stochastic volatility. Everything latent is kept in the ledger.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from series_service.types import (
    AnnualSeries,
    DataBundle,
    MonthDate,
    MonthlySeries,
    PredictorClass,
    PredictorMeta,
    TransformTag,
)
from series_service.utils.exceptions import NonStationaryConfigException
from shared.utils.exceptions import ValidationException
from shared.utils.rng import derive_rng
from shared.utils.run_config import apply_section

logger = logging.getLogger(__name__)

CLASS_ORDER = (
    PredictorClass.ECONOMIC_ACTIVITY,
    PredictorClass.ENERGY,
    PredictorClass.TECHNICAL,
    PredictorClass.WEATHER,
)
# raw predictors are stored in levels and mapped back by these tags
CLASS_TRANSFORMS = {
    PredictorClass.ECONOMIC_ACTIVITY: TransformTag.LOG_DIFF,
    PredictorClass.ENERGY: TransformTag.LOG_DIFF,
    PredictorClass.TECHNICAL: TransformTag.DIFF,
    PredictorClass.WEATHER: TransformTag.NONE,
}
_STABILITY_LIMIT = 0.999


@dataclass(frozen=True)
class SynthConfig:
    n_months: int = 136
    start: str = '2012-06'
    n_predictors: int = 21
    class_sizes: Tuple[int, ...] = (9, 7, 3, 2)
    n_factors: int = 2
    factor_persistence: float = 0.7
    idio_sd: float = 0.5
    price_level: float = 20.0
    price_drift: float = 0.01
    price_ar: float = 0.1
    price_factor_loading: float = 0.04
    price_emissions_loading: float = 0.5
    price_sd: float = 0.06
    sv: bool = False
    sv_mu: float = -5.6
    sv_phi: float = 0.95
    sv_sigma: float = 0.2
    ip_level: float = 100.0
    ip_factor_loading: float = 0.005
    ip_sd: float = 0.005
    n_sectors: int = 3
    sector_sd: float = 0.003
    emissions_level: float = 140.0
    emissions_drift: float = -0.002
    emissions_ip_loading: float = 0.8
    emissions_sd: float = 0.01
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'class_sizes', tuple(int(c) for c in self.class_sizes))

    @classmethod
    def from_mapping(cls, values: Mapping[str, str], seed: Optional[int] = None) -> 'SynthConfig':
        """Build from raw ``SYNTH__*`` strings of a run configuration."""
        config = apply_section(cls, cls(), {k.lower(): v for k, v in values.items()}, 'SYNTH')
        if seed is not None and config.seed is None:
            config = cls(**{**asdict(config), 'seed': seed})
        return config

    @property
    def start_month(self) -> MonthDate:
        return MonthDate.parse(self.start)

    @property
    def end_month(self) -> MonthDate:
        return self.start_month.shift(self.n_months - 1)

    def validate(self):
        if self.n_months < 120:
            raise ValidationException(
                f"SYNTH__N_MONTHS must be at least 120, got {self.n_months}",
                context={'module': 'synth', 'op': 'generate_bundle'},
            )
        if len(self.class_sizes) != len(CLASS_ORDER) or sum(self.class_sizes) != self.n_predictors:
            raise ValidationException(
                f"SYNTH__CLASS_SIZES must give {len(CLASS_ORDER)} counts summing to {self.n_predictors}",
                context={'module': 'synth', 'op': 'generate_bundle'},
            )
        if not 1 <= self.n_factors <= self.n_predictors or self.n_sectors < 1:
            raise ValidationException(
                "SYNTH__N_FACTORS must lie in 1..n_predictors and SYNTH__N_SECTORS be positive",
                context={'module': 'synth', 'op': 'generate_bundle'},
            )
        scales = (self.idio_sd, self.price_sd, self.ip_sd, self.sector_sd, self.emissions_sd, self.sv_sigma)
        if any(s < 0 for s in scales) or min(self.price_level, self.ip_level, self.emissions_level) <= 0:
            raise ValidationException(
                "SYNTH scales must be nonnegative and starting levels positive",
                context={'module': 'synth', 'op': 'generate_bundle'},
            )
        for name, value in (
            ('factor_persistence', self.factor_persistence),
            ('price_ar', self.price_ar),
            ('sv_phi', self.sv_phi),
        ):
            if abs(value) >= _STABILITY_LIMIT:
                raise NonStationaryConfigException(
                    f"SYNTH__{name.upper()}={value} makes the growth-rate DGP non-stationary",
                    context={'module': 'synth', 'op': 'generate_bundle'},
                )
        MonthDate.parse(self.start)


@dataclass(frozen=True, eq=False)
class SynthResult:
    bundle: DataBundle
    ledger: Dict[str, Any] = field(default_factory=dict)


class SynthService:

    def generate_bundle(self, config: SynthConfig, seed: Optional[int] = None) -> SynthResult:
        config.validate()
        master_seed = seed if seed is not None else (config.seed if config.seed is not None else 0)
        rng = derive_rng(master_seed, 'synth')

        start = config.start_month
        # emissions and IP start in January so the first year is complete
        monthly_start = MonthDate(start.year, 1)
        lead = monthly_start.months_until(start)
        n_total = lead + config.n_months
        k = config.n_factors

        persistence = np.eye(k) * config.factor_persistence
        innovation_sd = np.sqrt(1.0 - config.factor_persistence ** 2)
        factors = np.zeros((n_total, k))
        factors[0] = rng.standard_normal(k)
        for t in range(1, n_total):
            factors[t] = persistence @ factors[t - 1] + innovation_sd * rng.standard_normal(k)

        # industrial production: total and sectors in levels
        ip_loadings = np.full(k, config.ip_factor_loading)
        dip = factors @ ip_loadings + config.ip_sd * rng.standard_normal(n_total)
        ip_log = np.log(config.ip_level) + np.cumsum(dip)
        sector_weights = rng.uniform(0.5, 2.0, config.n_sectors)
        sector_log = ip_log[:, None] + np.cumsum(
            config.sector_sd * rng.standard_normal((n_total, config.n_sectors)), axis=0
        )
        sector_levels = np.exp(sector_log)
        weighted_ip = sector_levels @ (sector_weights / sector_weights.sum())
        dweighted = np.diff(np.log(weighted_ip), prepend=np.log(weighted_ip[0]))

        # monthly emissions truth
        demis = (
            config.emissions_drift
            + config.emissions_ip_loading * dweighted
            + config.emissions_sd * rng.standard_normal(n_total)
        )
        emissions_monthly = config.emissions_level * np.exp(np.cumsum(demis))
        complete_years = n_total // 12
        annual = emissions_monthly[:complete_years * 12].reshape(complete_years, 12).sum(axis=1)

        # real carbon price
        log_vol = None
        if config.sv:
            log_vol = np.empty(n_total)
            log_vol[0] = config.sv_mu + config.sv_sigma / np.sqrt(1 - config.sv_phi ** 2) * rng.standard_normal()
            for t in range(1, n_total):
                log_vol[t] = (
                    config.sv_mu
                    + config.sv_phi * (log_vol[t - 1] - config.sv_mu)
                    + config.sv_sigma * rng.standard_normal()
                )
            shocks = np.exp(log_vol / 2.0) * rng.standard_normal(n_total)
        else:
            shocks = config.price_sd * rng.standard_normal(n_total)
        price_loadings = np.full(k, config.price_factor_loading)
        dprice = np.zeros(n_total)
        for t in range(1, n_total):
            dprice[t] = (
                config.price_drift
                + config.price_ar * dprice[t - 1]
                + factors[t - 1] @ price_loadings
                + config.price_emissions_loading * demis[t - 1]
                + shocks[t]
            )
        price_log = np.log(config.price_level) + np.concatenate([[0.0], np.cumsum(dprice[lead + 1:])])

        predictors, meta, loadings = self._predictors(config, factors[lead:], rng)

        bundle = DataBundle(
            price=MonthlySeries('price', start, np.exp(price_log)),
            ip_total=MonthlySeries('ip_total', monthly_start, np.exp(ip_log)),
            ip_sectors=tuple(
                MonthlySeries(f"ip_sector_{s + 1}", monthly_start, sector_levels[:, s])
                for s in range(config.n_sectors)
            ),
            sector_weights=tuple(float(w) for w in sector_weights),
            emissions_annual=AnnualSeries(monthly_start.year, annual, 'emissions'),
            predictors=tuple(predictors),
            predictor_meta=meta,
        )
        ledger = {
            'config': asdict(config),
            'seed': master_seed,
            'monthly_start': str(monthly_start),
            'price_start': str(start),
            'factors': factors,
            'factor_persistence': persistence,
            'predictor_loadings': loadings,
            'price_dlog': dprice,
            'price_loadings': price_loadings,
            'price_shocks': shocks,
            'log_vol': log_vol,
            'ip_dlog': dip,
            'emissions_dlog': demis,
            'emissions_monthly': emissions_monthly,
        }
        logger.info(
            f"Generated synthetic bundle: {config.n_months} months from {start}, "
            f"{config.n_predictors} predictors, {k} true factor(s), sv={config.sv}"
        )
        return SynthResult(bundle=bundle, ledger=ledger)

    def _predictors(self, config: SynthConfig, factors: np.ndarray, rng: np.random.Generator):
        n_obs, k = factors.shape
        loadings = rng.standard_normal((config.n_predictors, k))
        stationary = factors @ loadings.T + config.idio_sd * rng.standard_normal((n_obs, config.n_predictors))
        start = config.start_month

        predictors: List[MonthlySeries] = []
        meta: Dict[str, PredictorMeta] = {}
        j = 0
        for predictor_class, size in zip(CLASS_ORDER, config.class_sizes):
            tag = CLASS_TRANSFORMS[predictor_class]
            for member in range(size):
                name = f"{predictor_class.value}_{member + 1}"
                x = stationary[:, j]
                if tag is TransformTag.LOG_DIFF:
                    # scaled so log growth rates stay small
                    levels = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(0.01 * x)]))
                elif tag is TransformTag.DIFF:
                    levels = np.concatenate([[0.0], np.cumsum(x)])
                else:
                    levels = x
                # differenced tags consume one leading month
                first = start if tag is TransformTag.NONE else start.shift(-1)
                predictors.append(MonthlySeries(name, first, levels))
                meta[name] = PredictorMeta(name=name, predictor_class=predictor_class, transform=tag)
                j += 1
        return predictors, meta, loadings

    def oracle_price_forecast(self, result: SynthResult, origin: MonthDate, horizon: int) -> np.ndarray:
        """
        Conditional-mean Δ-log price path for h = 1..horizon given the latent
        state at ``origin`` (emissions growth beyond the origin at its drift).
        """
        ledger = result.ledger
        config = SynthConfig(**{**ledger['config'], 'class_sizes': tuple(ledger['config']['class_sizes'])})
        monthly_start = MonthDate.parse(ledger['monthly_start'])
        t = monthly_start.months_until(origin)
        factors = np.asarray(ledger['factors'])
        if not 0 <= t < factors.shape[0]:
            raise ValidationException(
                f"Origin {origin} outside the synthetic sample",
                context={'module': 'synth', 'op': 'oracle_price_forecast'},
            )
        persistence = np.asarray(ledger['factor_persistence'])
        loadings = np.asarray(ledger['price_loadings'])
        state = factors[t]
        last = float(np.asarray(ledger['price_dlog'])[t])
        demis = float(np.asarray(ledger['emissions_dlog'])[t])
        path = np.empty(horizon)
        for h in range(horizon):
            last = (
                config.price_drift
                + config.price_ar * last
                + state @ loadings
                + config.price_emissions_loading * demis
            )
            path[h] = last
            state = persistence @ state
            demis = config.emissions_drift
        return path


synth_service = SynthService()
