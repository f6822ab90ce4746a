"""
Experiment reports: CSV rows, a plain-text table and a structured JSON document,
plus the aggregate statistics (mean relative improvement, win rate, paired
one-sided t-test, layout churn, predicted vs oracle cost).
"""

import json
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats

from execution.errors import ReportError, ValidationError

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    'run_index', 'exec_time_min', 'benchmark', 'n', 'mode', 'snapshot_age_min',
    'layout_id', 'accuracy_baseline', 'accuracy_jit', 'rel_improvement',
]
FORMATS = ('csv', 'table', 'structured')
SUFFIX = {'csv': '.csv', 'table': '.txt', 'structured': '.json'}


def _clean(value):
    """JSON-safe scalar: NaN/inf become None, numpy scalars become Python ones."""
    if isinstance(value, (np.generic,)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def paired_test(frame):
    """One-sided paired t-test that JIT accuracy exceeds baseline accuracy."""
    if len(frame) < 2:
        return {'statistic': None, 'pvalue': None, 'cells': len(frame)}
    diff = frame['accuracy_jit'] - frame['accuracy_baseline']
    if np.allclose(diff, diff.iloc[0]):
        return {'statistic': None, 'pvalue': None, 'cells': len(frame)}
    res = stats.ttest_rel(frame['accuracy_jit'], frame['accuracy_baseline'], alternative='greater')
    return {'statistic': _clean(float(res.statistic)), 'pvalue': _clean(float(res.pvalue)), 'cells': len(frame)}


def summarize(frame):
    """Aggregates over a report table (rows as produced by run_scenario or read back from CSV)."""
    if frame.empty:
        raise ValidationError("report has no rows")
    frame = frame.copy()
    frame['rel_improvement'] = pd.to_numeric(frame['rel_improvement'], errors='coerce')
    frame['improved'] = frame['accuracy_jit'] > frame['accuracy_baseline']

    per_bench = frame.groupby('benchmark', sort=False).agg(
        cells=('run_index', 'size'),
        accuracy_baseline=('accuracy_baseline', 'mean'),
        accuracy_jit=('accuracy_jit', 'mean'),
        mean_rel_improvement=('rel_improvement', 'mean'),
        win_rate=('improved', 'mean'),
    )
    for arm in ('baseline', 'jit'):
        col = f'layout_id_{arm}'
        if col in frame:
            per_bench[f'distinct_layouts_{arm}'] = frame.groupby('benchmark', sort=False)[col].nunique()
    per_bench = per_bench.reset_index()

    overall = {
        'cells': int(len(frame)),
        'runs': int(frame['run_index'].nunique()),
        'mean_rel_improvement': _clean(float(frame['rel_improvement'].mean())),
        'undefined_rel_improvement': int(frame['rel_improvement'].isna().sum()),
        'win_rate': float(frame['improved'].mean()),
        'paired_test': paired_test(frame),
    }
    costs = {}
    for arm in ('baseline', 'jit'):
        for kind in ('predicted', 'oracle'):
            col = f'cost_{arm}_{kind}'
            if col in frame:
                costs[f'{arm}_{kind}'] = float(frame[col].mean())
    if costs:
        overall['mean_cost'] = costs
    return {'overall': overall, 'per_benchmark': per_bench}


def csv_frame(report_or_frame):
    frame = report_or_frame if isinstance(report_or_frame, pd.DataFrame) else report_or_frame.to_frame()
    missing = [c for c in CSV_COLUMNS if c not in frame]
    if missing:
        raise ValidationError(f"report rows lack column(s): {', '.join(missing)}")
    return frame[CSV_COLUMNS]


def render_csv(report):
    return csv_frame(report).to_csv(index=False, na_rep='NA', lineterminator='\n')


def render_table(report):
    frame = report.to_frame()
    summary = summarize(frame)
    lines = [f"Experiment on {report.device} ({report.config.mode}, seed {report.config.seed})", '']
    lines.append(csv_frame(frame).to_string(index=False, na_rep='NA', float_format=lambda v: f"{v:.4f}"))
    lines += ['', 'Per benchmark', ''] + _summary_lines(summary)
    return '\n'.join(lines) + '\n'


def _fmt(value):
    return 'NA' if value is None else f"{value:.4f}"


def render_structured(report):
    summary = summarize(report.to_frame())
    doc = {
        'device': report.device,
        'config': {k: list(v) if isinstance(v, tuple) else v for k, v in report.config.to_dict().items()},
        'suite_params': report.suite_params,
        'timeline': report.timeline,
        'rows': [{k: _clean(v) for k, v in row.items()} for row in report.rows],
        'aggregates': {
            'overall': summary['overall'],
            'per_benchmark': [{k: _clean(v) for k, v in rec.items()}
                              for rec in summary['per_benchmark'].to_dict(orient='records')],
        },
    }
    return json.dumps(doc, indent=2) + '\n'


_RENDERERS = {'csv': render_csv, 'table': render_table, 'structured': render_structured}


def render_report(report, fmt='csv'):
    if fmt not in _RENDERERS:
        raise ValidationError(f"format must be one of {', '.join(FORMATS)}, got '{fmt}'")
    return _RENDERERS[fmt](report)


def emit_report(report, fmt, path):
    """Write the report in `fmt` to `path`; returns the path written."""
    text = render_report(report, fmt)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ReportError(f"cannot write report: {exc.strerror}", path)
    logger.info("wrote %s report (%d rows) to %s", fmt, len(report.rows), path)
    return path


def read_report_csv(path):
    """Rows written by emit_report(..., 'csv'); 'NA' reads back as missing."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, na_values=['NA'], keep_default_na=False)
    except OSError as exc:
        raise ReportError(f"cannot read report: {exc.strerror}", path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ReportError(f"malformed report: {exc}", path)
    csv_frame(frame)
    return frame


def _summary_lines(summary):
    o = summary['overall']
    test = o['paired_test']
    lines = [
        summary['per_benchmark'].to_string(index=False, na_rep='NA', float_format=lambda v: f"{v:.4f}"),
        '',
        f"cells: {o['cells']} over {o['runs']} runs",
        f"mean relative improvement: {_fmt(o['mean_rel_improvement'])} ({o['undefined_rel_improvement']} undefined)",
        f"win rate: {o['win_rate']:.3f}",
        f"paired t-test (jit > baseline): t={_fmt(test['statistic'])} p={_fmt(test['pvalue'])}",
    ]
    lines += [f"mean cost {key}: {value:.4f}" for key, value in o.get('mean_cost', {}).items()]
    return lines


def render_summary(frame):
    """Plain-text aggregates for a report read back from CSV."""
    return '\n'.join(_summary_lines(summarize(frame))) + '\n'
