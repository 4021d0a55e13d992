# evaluation_service/services/report_service.py
"""
Summary tables from a scored run directory: one table per target and
metric with horizons as rows, models as columns and a flag column per model
marking the best entry of the row (ties go to the lexicographically
smallest model id).
"""
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from evaluation_service.utils.exceptions import MissingStageOutputException
from shared.utils.artifacts import read_json, write_json

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# metric -> True when larger is better; None for columns without a best flag
METRICS = {
    'relative_rmsfe': False,
    'rmsfe': False,
    'success_ratio': True,
    'qcrps': False,
    'wqcrps_center': False,
    'wqcrps_right': False,
    'wqcrps_left': False,
    'dm_pvalue': None,
    'pt_pvalue': None,
}


def best_model(row: pd.Series, larger_is_better: bool) -> Optional[str]:
    """Argmin (argmax) over the row; exact ties resolved by model id"""
    values = row.dropna()
    if values.empty:
        return None
    target = values.max() if larger_is_better else values.min()
    return sorted(str(m) for m, v in values.items() if v == target)[0]


class ReportService:

    @staticmethod
    def _require(path: Path) -> Path:
        if not path.is_file():
            raise MissingStageOutputException(
                f"Run directory is incomplete: {path} not found",
                context={'module': 'cli', 'op': 'report', 'path': str(path)},
            )
        return path

    def metric_table(self, scores: pd.DataFrame, target: str, metric: str) -> pd.DataFrame:
        """Horizon x model table of ``metric`` with best-flag columns"""
        subset = scores[scores['target'] == target]
        table = subset.pivot(index='horizon', columns='model_id', values=metric).sort_index()
        table = table.reindex(columns=sorted(table.columns))
        table.columns.name = None
        larger_is_better = METRICS[metric]
        if larger_is_better is not None:
            best = table.apply(lambda row: best_model(row, larger_is_better), axis=1)
            for model_id in list(table.columns):
                table[f"best__{model_id}"] = best == model_id
            table['best'] = best
        return table.reset_index()

    def build_tables(self, scores: pd.DataFrame) -> Dict[str, pd.DataFrame]:
        tables = {}
        for target in sorted(scores['target'].unique()):
            subset = scores[scores['target'] == target]
            for metric in METRICS:
                if subset[metric].notna().any():
                    tables[f"{target}_{metric}"] = self.metric_table(scores, target, metric)
        return tables

    @staticmethod
    def fluctuation_wide(fluctuation: pd.DataFrame) -> pd.DataFrame:
        """Plot-ready paths: one column per model/target/horizon/loss series"""
        if fluctuation.empty:
            return pd.DataFrame(columns=['date'])
        labels = (
            fluctuation['model_id'] + '|' + fluctuation['target'] + '|h'
            + fluctuation['horizon'].astype(str) + '|' + fluctuation['loss']
        )
        wide = fluctuation.assign(series=labels).pivot(index='date', columns='series', values='statistic')
        wide = wide.reindex(columns=sorted(wide.columns)).sort_index()
        wide.columns.name = None
        return wide.reset_index()

    @staticmethod
    def _markdown(table: pd.DataFrame) -> List[str]:
        columns = [c for c in table.columns if not str(c).startswith('best__')]
        lines = ['| ' + ' | '.join(str(c) for c in columns) + ' |', '|' + '---|' * len(columns)]
        for _, row in table[columns].iterrows():
            cells = []
            for column in columns:
                value = row[column]
                if isinstance(value, (float, np.floating)):
                    cells.append('' if math.isnan(value) else f"{value:.4f}")
                else:
                    cells.append('' if value is None else str(value))
            lines.append('| ' + ' | '.join(cells) + ' |')
        return lines

    def summary(
        self,
        tables: Dict[str, pd.DataFrame],
        tests: pd.DataFrame,
        run_dir: Path,
        run_info: Optional[Dict[str, Any]] = None,
    ) -> Dict[str, Any]:
        best = {
            name: dict(zip(table['horizon'].astype(int).tolist(), table['best'].tolist()))
            for name, table in tables.items()
            if 'best' in table.columns
        }
        rejections = []
        if not tests.empty:
            fluct = tests[tests['test'].astype(str).str.startswith('fluctuation_')]
            for row in fluct[fluct['reject'] == True].itertuples(index=False):  # noqa: E712
                rejections.append({
                    'model_id': row.model_id, 'target': row.target, 'horizon': int(row.horizon),
                    'loss': str(row.test).replace('fluctuation_', ''), 'max_statistic': float(row.statistic),
                })
        summary: Dict[str, Any] = {'tables': sorted(tables), 'best': best, 'fluctuation_rejections': rejections}
        if run_info:
            summary['run'] = dict(run_info)
        monitor_path = run_dir / 'monitor' / 'monitoring_report.json'
        if monitor_path.is_file():
            summary['monitor'] = read_json(monitor_path)
        return summary

    def write_summary_markdown(self, tables: Dict[str, pd.DataFrame], summary: Dict[str, Any], path: Path) -> Path:
        lines = ['# Forecast evaluation summary', '']
        run = summary.get('run')
        if run:
            lines += [f"- config hash: `{run.get('config_hash')}`", f"- seed: {run.get('seed')}", '']
        for name in sorted(tables):
            lines += [f"## {name}", '', *self._markdown(tables[name]), '']
        if summary['fluctuation_rejections']:
            lines += ['## Fluctuation test rejections', '']
            for item in summary['fluctuation_rejections']:
                lines.append(
                    f"- {item['model_id']} ({item['target']}, h={item['horizon']}, {item['loss']}): "
                    f"max {item['max_statistic']:.3f}"
                )
            lines.append('')
        path.write_text('\n'.join(lines), encoding='utf-8')
        return path

    def report(self, run_dir: PathLike, run_info: Optional[Dict[str, Any]] = None) -> Dict[str, Path]:
        """Write report/*.csv, report/summary.json and report/summary.md"""
        run_dir = Path(run_dir)
        scores = pd.read_csv(self._require(run_dir / 'score' / 'scores.csv'))
        tests = pd.read_csv(self._require(run_dir / 'score' / 'tests.csv'))
        fluctuation = pd.read_csv(self._require(run_dir / 'score' / 'fluctuation.csv'))
        out = run_dir / 'report'
        out.mkdir(parents=True, exist_ok=True)

        tables = self.build_tables(scores)
        outputs: Dict[str, Path] = {}
        for name, table in tables.items():
            path = out / f"{name}.csv"
            table.to_csv(path, index=False, float_format='%.10g', lineterminator='\n', encoding='utf-8')
            outputs[name] = path
        wide = self.fluctuation_wide(fluctuation)
        outputs['fluctuation_paths'] = out / 'fluctuation_paths.csv'
        wide.to_csv(outputs['fluctuation_paths'], index=False, float_format='%.10g', lineterminator='\n')

        summary = self.summary(tables, tests, run_dir, run_info)
        outputs['summary_json'] = write_json(out / 'summary.json', summary)
        outputs['summary_md'] = self.write_summary_markdown(tables, summary, out / 'summary.md')
        logger.info(f"Report written to {out}: {len(tables)} table(s)")
        return outputs


report_service = ReportService()
