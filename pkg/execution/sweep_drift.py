#!/usr/bin/env python3
"""
Sweep drift volatility and summarise the JIT advantage at each value.

Runs the configured scenario once per volatility (same seed, so only the drift
strength changes) and writes one summary row per value.

Usage:
    python execution/sweep_drift.py --config data/scenarios/dedicated.cfg --volatilities 0,0.03,0.055,0.1
"""

import argparse
import logging
import sys
from pathlib import Path

import pandas as pd

if __package__ in (None, ''):
    sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from execution import settings
from execution.errors import ReportError, ValidationError
from execution.reporting import summarize
from execution.scenario import run_scenario
from execution.settings import load_scenario

logger = logging.getLogger('sweep_drift')


def parse_values(text):
    try:
        values = [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise ValidationError(f"volatilities must be comma-separated numbers, got '{text}'")
    if not values or any(v < 0 for v in values):
        raise ValidationError("volatilities must be a non-empty list of values >= 0")
    return values


def sweep(config, volatilities):
    """One summary row per drift volatility."""
    rows = []
    for vol in volatilities:
        report = run_scenario(config.with_overrides(drift_volatility=vol))
        frame = report.to_frame()
        overall = summarize(frame)['overall']
        rows.append({
            'drift_volatility': vol,
            'cells': overall['cells'],
            'accuracy_baseline': float(frame['accuracy_baseline'].mean()),
            'accuracy_jit': float(frame['accuracy_jit'].mean()),
            'mean_rel_improvement': overall['mean_rel_improvement'],
            'win_rate': overall['win_rate'],
            'pvalue': overall['paired_test']['pvalue'],
        })
        logger.info("volatility %g: win rate %.3f", vol, overall['win_rate'])
    return pd.DataFrame(rows)


def write_sweep(frame, path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, na_rep='NA', lineterminator='\n')
    except OSError as exc:
        raise ReportError(f"cannot write sweep: {exc.strerror}", path)
    return path


def main(argv=None):
    parser = argparse.ArgumentParser(description='Drift-volatility sweep of the COTD vs JIT scenario')
    parser.add_argument('--config', type=Path, default=None)
    parser.add_argument('--seed', type=int, default=None)
    parser.add_argument('--volatilities', default='0,0.02,0.055,0.1')
    parser.add_argument('--out', type=Path, default=settings.REPORT_DIR)
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, settings.LOG_LEVEL, logging.WARNING))

    try:
        config = load_scenario(args.config, seed=args.seed)
        values = parse_values(args.volatilities)
        print(f"📂 Sweeping {len(values)} volatilities on {config.device} ({config.mode}, seed {config.seed})")
        frame = sweep(config, values)
        path = write_sweep(frame, args.out / f"sweep_{config.mode}_seed{config.seed}.csv")
    except ValidationError as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        logger.exception("sweep failed")
        print(f"❌ Internal error: {exc}", file=sys.stderr)
        return 2

    print(frame.to_string(index=False, na_rep='NA'))
    print(f"\n✅ Sweep saved to {path}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
