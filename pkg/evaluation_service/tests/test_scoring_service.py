"""
Unit tests for evaluation_service/services/scoring_service.py
Tests RMSFE ratios, success ratios and the quantile-weighted CRPS family
"""
import numpy as np
import pytest

from evaluation_service.services.scoring_service import scoring_service
from evaluation_service.utils.exceptions import (
    GridMismatchException,
    ScoreInputException,
    UnknownRegionException,
    ZeroBenchmarkException,
)


def grid(values):
    """Quantile map on the j/J grid for J = len(values) + 1"""
    J = len(values) + 1
    return {j / J: float(v) for j, v in enumerate(values, start=1)}


def brute_force_wqcrps(values, realized, region):
    """Direct double loop over the quantile score and weight definitions"""
    J = len(values) + 1
    total = 0.0
    for j, q in enumerate(values, start=1):
        alpha = j / J
        indicator = 1.0 if realized <= q else 0.0
        score = 2.0 * (indicator - alpha) * (q - realized)
        if region is None:
            weight = 1.0
        elif region == 'center':
            weight = alpha * (1.0 - alpha)
        elif region == 'right':
            weight = alpha * alpha
        else:
            weight = (1.0 - alpha) * (1.0 - alpha)
        total += weight * score
    return total / (J - 1)


@pytest.mark.unit
class TestRelativeRmsfe:
    """Test RMSFE and its ratio against the benchmark"""

    def test_hand_computed_ratio(self):
        """Test errors [1,2,2] against [2,2,2] give sqrt(3)/2"""
        ratio = scoring_service.relative_rmsfe([1, 2, 2], [2, 2, 2])
        assert ratio == pytest.approx(np.sqrt(9 / 3) / 2, abs=1e-12)
        assert round(ratio, 4) == 0.8660

    def test_identical_errors_give_exactly_one(self, rng):
        """Test a model compared with itself scores exactly 1"""
        errors = rng.standard_normal(37)
        assert scoring_service.relative_rmsfe(errors, errors) == 1.0

    def test_half_errors(self, rng):
        """Test halving every error halves the ratio"""
        errors = rng.standard_normal(20)
        assert scoring_service.relative_rmsfe(errors / 2, errors) == pytest.approx(0.5, abs=1e-12)

    def test_zero_benchmark(self):
        """Test a perfect benchmark makes the ratio undefined"""
        with pytest.raises(ZeroBenchmarkException) as exc_info:
            scoring_service.relative_rmsfe([1.0, 2.0], [0.0, 0.0])
        assert exc_info.value.exit_code == 4

    def test_length_mismatch(self):
        """Test error vectors must be paired"""
        with pytest.raises(ScoreInputException):
            scoring_service.relative_rmsfe([1.0, 2.0], [1.0])

    def test_non_finite_errors(self):
        """Test NaN errors are rejected"""
        with pytest.raises(ScoreInputException):
            scoring_service.rmsfe([1.0, np.nan])


@pytest.mark.unit
class TestSuccessRatio:
    """Test the share of correctly predicted directions"""

    def test_all_matched(self):
        """Test identical signs give 1"""
        assert scoring_service.success_ratio([1, -1, 1], [1, -1, 1]) == 1.0

    def test_half_matched(self):
        """Test alternating forecasts against a rising series give 0.5"""
        assert scoring_service.success_ratio([1, -1, 1, -1], [1, 1, 1, 1]) == 0.5

    def test_zero_forecast_is_a_miss(self):
        """Test a no-change forecast does not match a rise"""
        assert scoring_service.success_ratio([0], [1]) == 0.0

    def test_zero_matches_zero(self):
        """Test an exact zero change only matches a zero forecast"""
        assert scoring_service.success_ratio([0, 1], [0, 0]) == 0.5

    def test_signs_of_changes(self):
        """Test raw changes are reduced to their signs"""
        assert scoring_service.success_ratio([0.3, -2.0], [5.0, -0.1]) == 1.0


@pytest.mark.unit
class TestQuantileScores:
    """Test qCRPS and its weighted variants"""

    def test_single_component(self):
        """Test alpha=0.25, q=2, R=1 gives QS = 1.5"""
        scores = scoring_service.quantile_scores({0.25: 2.0, 0.5: 2.0, 0.75: 2.0}, 1.0)
        assert scores[0.25] == pytest.approx(1.5, abs=1e-15)

    def test_small_instance(self):
        """Test J=4, quantiles [1,2,3], R=2.5 against the brute-force sum"""
        quantiles = grid([1.0, 2.0, 3.0])
        assert scoring_service.qcrps(quantiles, 2.5) == pytest.approx(0.5, abs=1e-15)
        for region in (None, 'center', 'right', 'left'):
            assert scoring_service.weighted_qcrps(quantiles, 2.5, region) == pytest.approx(
                brute_force_wqcrps([1.0, 2.0, 3.0], 2.5, region), abs=1e-12
            )

    def test_degenerate_density_at_truth(self):
        """Test quantiles all equal to the realization score zero in every region"""
        quantiles = grid([4.2] * 19)
        assert scoring_service.qcrps(quantiles, 4.2) == 0.0
        for region in ('center', 'right', 'left'):
            assert scoring_service.weighted_qcrps(quantiles, 4.2, region) == 0.0

    def test_brute_force_oracle(self, rng):
        """Test 1000 random instances against the direct double loop"""
        for _ in range(1000):
            J = int(rng.integers(2, 25))
            values = np.sort(rng.normal(0.0, 2.0, J - 1))
            realized = float(rng.normal(0.0, 2.0))
            quantiles = grid(values)
            for region in (None, 'center', 'right', 'left'):
                expected = brute_force_wqcrps(values, realized, region)
                assert scoring_service.weighted_qcrps(quantiles, realized, region) == pytest.approx(
                    expected, rel=1e-12, abs=1e-12
                )

    def test_nonnegative(self, rng):
        """Test every weighted score is nonnegative"""
        for _ in range(200):
            values = np.sort(rng.normal(size=9))
            realized = float(rng.normal())
            for region in (None, 'center', 'right', 'left'):
                assert scoring_service.weighted_qcrps(grid(values), realized, region) >= 0.0

    def test_mirror_symmetry(self, rng):
        """Test reflecting the density about R swaps tails and keeps the center score"""
        realized = 1.3
        values = np.sort(rng.normal(realized, 1.0, 19))
        mirrored = np.sort(2 * realized - values)
        original, reflected = grid(values), grid(mirrored)
        assert scoring_service.weighted_qcrps(original, realized, 'center') == pytest.approx(
            scoring_service.weighted_qcrps(reflected, realized, 'center'), abs=1e-12
        )
        assert scoring_service.weighted_qcrps(original, realized, 'right') == pytest.approx(
            scoring_service.weighted_qcrps(reflected, realized, 'left'), abs=1e-12
        )

    def test_grid_mismatch(self):
        """Test levels off the j/J grid are rejected"""
        with pytest.raises(GridMismatchException) as exc_info:
            scoring_service.qcrps({0.1: 1.0, 0.5: 2.0, 0.9: 3.0}, 2.0)
        assert exc_info.value.exit_code == 2

    def test_unknown_region(self):
        """Test only center, right and left weights exist"""
        with pytest.raises(UnknownRegionException):
            scoring_service.weighted_qcrps(grid([1.0, 2.0, 3.0]), 2.0, 'middle')
