"""
Unit tests for series_service/services/window_service.py
Tests real-time window preparation and VAR variable sets
"""
import dataclasses

import numpy as np
import pytest

from series_service.services.window_service import window_service
from series_service.types import DataBundle, MonthDate, MonthlySeries
from series_service.utils.exceptions import SeriesTooShortException


def poison_after(bundle: DataBundle, origin: MonthDate) -> DataBundle:
    """Multiply every monthly observation after ``origin`` by 7 and the annual values from its year on"""
    def poison(series: MonthlySeries) -> MonthlySeries:
        values = series.values.copy()
        for offset, (when, _) in enumerate(series.items()):
            if when > origin:
                values[offset] *= 7.0
        return series.with_values(values)

    annual = bundle.emissions_annual
    annual_values = annual.values.copy()
    annual_values[origin.year - annual.start_year:] *= 7.0
    return dataclasses.replace(
        bundle,
        price=poison(bundle.price),
        ip_total=poison(bundle.ip_total),
        ip_sectors=tuple(poison(s) for s in bundle.ip_sectors),
        emissions_annual=dataclasses.replace(annual, values=annual_values),
        predictors=tuple(poison(p) for p in bundle.predictors),
    )


@pytest.mark.unit
class TestPrepare:
    """Test per-origin preparation"""

    def test_everything_ends_at_origin(self, synth_bundle):
        """Test every prepared series stops at the origin"""
        origin = MonthDate(2017, 12)
        window = window_service.prepare(synth_bundle, origin, n_factors=2)
        assert window.price.end == origin
        assert window.emissions.end == origin
        assert window.ip.end == origin
        assert window.panel.sample[1] == origin
        assert window.factor_model.k == 2
        assert window.price_level == pytest.approx(synth_bundle.price.value_at(origin))
        assert -1 < window.chow_lin_rho < 1

    def test_no_look_ahead(self, synth_bundle):
        """Test perturbing data after the origin leaves the window unchanged"""
        origin = MonthDate(2016, 8)
        clean = window_service.prepare(synth_bundle, origin, n_factors=2)
        dirty = window_service.prepare(poison_after(synth_bundle, origin), origin, n_factors=2)
        np.testing.assert_array_equal(clean.price.values, dirty.price.values)
        np.testing.assert_array_equal(clean.emissions.values, dirty.emissions.values)
        np.testing.assert_array_equal(clean.factor_model.scores, dirty.factor_model.scores)
        assert clean.emissions_level == dirty.emissions_level

    def test_reference_statistics_reused(self, synth_bundle):
        """Test a reference panel fixes the standardization of a later window"""
        reference = window_service.reference_panel(synth_bundle, MonthDate(2016, 12))
        window = window_service.prepare(synth_bundle, MonthDate(2019, 12), n_factors=2, reference=reference)
        assert window.panel.means == reference.means
        assert window.panel.sds == reference.sds
        assert window.panel.sample[0] == reference.sample[0]
        n = len(reference.series[0])
        np.testing.assert_allclose(window.panel.matrix[:n], reference.matrix, atol=1e-12)

    def test_origin_outside_price(self, synth_bundle):
        """Test an origin past the price sample is rejected"""
        with pytest.raises(SeriesTooShortException):
            window_service.prepare(synth_bundle, synth_bundle.price.end.shift(1))


@pytest.mark.unit
class TestVariableSet:
    """Test VAR variable sets"""

    def test_baseline(self, synth_bundle):
        """Test baseline set is (price, emissions, ip) on a common sample"""
        window = window_service.prepare(synth_bundle, MonthDate(2017, 12))
        variables = window_service.variable_set(window)
        assert [v.name for v in variables] == ['price', 'emissions', 'ip_total']
        assert len({(v.start, v.end) for v in variables}) == 1

    def test_factor_augmented(self, synth_bundle):
        """Test ip is replaced by factors"""
        window = window_service.prepare(synth_bundle, MonthDate(2017, 12), n_factors=2)
        variables = window_service.variable_set(window, n_factors=1)
        assert [v.name for v in variables] == ['price', 'emissions', 'factor_1']

    def test_missing_factors(self, synth_bundle):
        """Test asking for more factors than extracted"""
        window = window_service.prepare(synth_bundle, MonthDate(2017, 12), n_factors=1)
        with pytest.raises(SeriesTooShortException):
            window_service.variable_set(window, n_factors=2)

    def test_targets(self, synth_bundle):
        """Test target lookup for both forecast targets"""
        window = window_service.prepare(synth_bundle, MonthDate(2017, 12))
        series, level = window.target('emissions')
        assert series is window.emissions
        assert level == window.emissions_level
