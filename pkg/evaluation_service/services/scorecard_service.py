# evaluation_service/services/scorecard_service.py
"""
Score stage: per model, target and horizon scores on the evaluation sample
against the target's benchmark, predictive-ability tests and fluctuation
paths.
"""
import dataclasses
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from evaluation_service.services.ability_service import ability_service
from evaluation_service.services.scoring_service import scoring_service
from evaluation_service.types import REGIONS, FluctuationResult, PredictiveTestResult, ScoreReport
from evaluation_service.utils.exceptions import (
    RecordAlignmentException,
    ShortSampleException,
    UndefinedTestException,
)
from model_service.types import ForecastRecord
from shared.utils.exceptions import InsufficientDataException
from shared.utils.run_config import EvalConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
CellKey = Tuple[str, str, int]


@dataclass(frozen=True, eq=False)
class Scorecard:
    scores: Tuple[ScoreReport, ...]
    tests: Tuple[Dict[str, object], ...]
    fluctuation: Tuple[Dict[str, object], ...]

    def scores_frame(self) -> pd.DataFrame:
        columns = [f.name for f in dataclasses.fields(ScoreReport)]
        return pd.DataFrame([dataclasses.asdict(s) for s in self.scores], columns=columns)

    def tests_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            list(self.tests),
            columns=['model_id', 'target', 'horizon', 'benchmark', 'test', 'statistic', 'p_value', 'n_obs', 'reject'],
        )

    def fluctuation_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            list(self.fluctuation),
            columns=['model_id', 'target', 'horizon', 'benchmark', 'loss', 'date', 'statistic', 'cv'],
        )


def _optional(test: Callable[[], PredictiveTestResult], label: str) -> Optional[PredictiveTestResult]:
    try:
        return test()
    except (UndefinedTestException, ShortSampleException) as exc:
        logger.debug(f"{label}: {exc}")
        return None


class ScorecardService:

    @staticmethod
    def evaluation_cells(
        records: Sequence[ForecastRecord],
        in_evaluation: Optional[Callable] = None,
    ) -> Dict[CellKey, List[ForecastRecord]]:
        """(model id, target, horizon) -> realized evaluation records ordered by target month"""
        cells: Dict[CellKey, List[ForecastRecord]] = defaultdict(list)
        for record in records:
            if record.realized is None:
                continue
            if in_evaluation is not None and not in_evaluation(record.origin, record.horizon):
                continue
            cells[(record.model_id, record.target, record.horizon)].append(record)
        return {key: sorted(cell, key=lambda r: r.target_month) for key, cell in sorted(cells.items())}

    @staticmethod
    def errors(cell: Sequence[ForecastRecord]) -> np.ndarray:
        return np.array([r.realized - r.point_level for r in cell])

    @staticmethod
    def realized_signs(cell: Sequence[ForecastRecord]) -> np.ndarray:
        return np.sign(np.array([r.realized - r.origin_level for r in cell]))

    @staticmethod
    def quantile_losses(cell: Sequence[ForecastRecord], region: Optional[str]) -> Optional[np.ndarray]:
        if not cell or any(not r.quantiles for r in cell):
            return None
        return np.array([scoring_service.weighted_qcrps(r.quantiles, r.realized, region) for r in cell])

    @staticmethod
    def _align(model: List[ForecastRecord], benchmark: List[ForecastRecord], key: CellKey, benchmark_id: str):
        model_months = [r.target_month for r in model]
        benchmark_months = [r.target_month for r in benchmark]
        if model_months != benchmark_months:
            raise RecordAlignmentException(
                f"{key[0]} ({key[1]}, h={key[2]}) and benchmark {benchmark_id} cover different target months",
                context={'module': 'eval', 'op': 'score', 'model_id': key[0], 'horizon': key[2]},
            )

    def score_cell(
        self,
        key: CellKey,
        cell: List[ForecastRecord],
        benchmark_cell: List[ForecastRecord],
        benchmark_id: str,
        eval_config: EvalConfig,
    ) -> Tuple[ScoreReport, List[Dict[str, object]], List[Dict[str, object]]]:
        model_id, target, horizon = key
        self._align(cell, benchmark_cell, key, benchmark_id)
        errors = self.errors(cell)
        benchmark_errors = self.errors(benchmark_cell)
        forecast_signs = np.array([r.sign for r in cell])
        realized_signs = self.realized_signs(cell)

        density = {region: self.quantile_losses(cell, region) for region in (None, *REGIONS)}
        base = {'model_id': model_id, 'target': target, 'horizon': horizon, 'benchmark': benchmark_id}

        d_point = benchmark_errors ** 2 - errors ** 2
        dm = _optional(lambda: ability_service.dm_test(d_point, horizon, eval_config.hac_lags), f"DM {key}")
        pt = _optional(lambda: ability_service.pt_test(forecast_signs, realized_signs), f"PT {key}")
        tests = [
            {**base, 'test': result.name, 'statistic': result.statistic, 'p_value': result.p_value,
             'n_obs': result.n_obs, 'reject': None}
            for result in (dm, pt) if result is not None
        ]

        paths: List[Dict[str, object]] = []
        if model_id != benchmark_id:
            losses = {'point': d_point}
            for region in REGIONS:
                candidate = density[region]
                reference = self.quantile_losses(benchmark_cell, region)
                if candidate is not None and reference is not None:
                    losses[f"wqcrps_{region}"] = reference - candidate
            for loss, d in losses.items():
                result = self._fluctuation(d, cell, eval_config, f"{key} {loss}")
                if result is None:
                    continue
                tests.append({**base, 'test': f"fluctuation_{loss}", 'statistic': result.max_statistic,
                              'p_value': None, 'n_obs': len(cell), 'reject': result.reject})
                paths.extend(
                    {**base, 'loss': loss, 'date': str(date), 'statistic': float(value),
                     'cv': result.cv_one_sided_5pct}
                    for date, value in zip(result.dates, result.path)
                )

        report = ScoreReport(
            model_id=model_id,
            target=target,
            horizon=horizon,
            n_obs=len(cell),
            rmsfe=scoring_service.rmsfe(errors),
            relative_rmsfe=scoring_service.relative_rmsfe(errors, benchmark_errors),
            success_ratio=scoring_service.success_ratio(forecast_signs, realized_signs),
            qcrps=None if density[None] is None else float(density[None].mean()),
            wqcrps_center=None if density['center'] is None else float(density['center'].mean()),
            wqcrps_right=None if density['right'] is None else float(density['right'].mean()),
            wqcrps_left=None if density['left'] is None else float(density['left'].mean()),
            dm_statistic=None if dm is None else dm.statistic,
            dm_pvalue=None if dm is None else dm.p_value,
            pt_statistic=None if pt is None else pt.statistic,
            pt_pvalue=None if pt is None else pt.p_value,
        )
        return report, tests, paths

    @staticmethod
    def _fluctuation(d: np.ndarray, cell, eval_config: EvalConfig, label: str) -> Optional[FluctuationResult]:
        if d.size < eval_config.fluctuation_window:
            logger.info(f"Fluctuation {label}: {d.size} observations < window {eval_config.fluctuation_window}, skipped")
            return None
        try:
            return ability_service.fluctuation_test(
                d,
                eval_config.fluctuation_window,
                dates=[r.target_month for r in cell],
                lags=eval_config.hac_lags,
                window_se=eval_config.window_se,
            )
        except UndefinedTestException as exc:
            logger.debug(f"Fluctuation {label}: {exc}")
            return None

    def score(
        self,
        records: Sequence[ForecastRecord],
        benchmark_ids: Dict[str, str],
        eval_config: Optional[EvalConfig] = None,
        in_evaluation: Optional[Callable] = None,
    ) -> Scorecard:
        """
        Score every (model, target, horizon) cell. ``benchmark_ids`` maps a
        target to the model id its relative scores are computed against.
        """
        eval_config = eval_config or EvalConfig.from_settings()
        cells = self.evaluation_cells(records, in_evaluation)
        if not cells:
            raise InsufficientDataException(
                "No forecast records with realized values in the evaluation sample",
                context={'module': 'eval', 'op': 'score'},
            )
        scores, tests, paths = [], [], []
        for key, cell in cells.items():
            model_id, target, horizon = key
            benchmark_id = benchmark_ids.get(target)
            benchmark_cell = cells.get((benchmark_id, target, horizon))
            if benchmark_cell is None:
                raise RecordAlignmentException(
                    f"No records of benchmark '{benchmark_id}' for {target} at h={horizon}",
                    context={'module': 'eval', 'op': 'score', 'target': target, 'horizon': horizon},
                )
            report, cell_tests, cell_paths = self.score_cell(key, cell, benchmark_cell, benchmark_id, eval_config)
            scores.append(report)
            tests.extend(cell_tests)
            paths.extend(cell_paths)
        logger.info(f"Scored {len(scores)} model x horizon cell(s)")
        return Scorecard(scores=tuple(scores), tests=tuple(tests), fluctuation=tuple(paths))

    def write(self, scorecard: Scorecard, directory: PathLike) -> Dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        outputs = {
            'scores_csv': (scorecard.scores_frame(), directory / 'scores.csv'),
            'tests_csv': (scorecard.tests_frame(), directory / 'tests.csv'),
            'fluctuation_csv': (scorecard.fluctuation_frame(), directory / 'fluctuation.csv'),
        }
        for frame, path in outputs.values():
            frame.to_csv(path, index=False, float_format='%.10g', lineterminator='\n', encoding='utf-8')
        return {name: path for name, (_, path) in outputs.items()}


scorecard_service = ScorecardService()
