"""
Sweep Runner
============

Runs a list of configurations over several seeds, in parallel across
(config, seed) pairs, and aggregates final RMSE / F1 per grid cell.

USAGE:
------
    python run_planner.py sweep "configs/*.conf"
"""

import logging
import os
import sys
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.errors import PreconditionError
from app.run_config import RunConfig
from export.result_exporter import ResultExporter
from scripts.experiment_runner import effective_mechanism, run_experiment

logger = logging.getLogger(__name__)

CELL_KEYS = ['policy', 'mechanism', 'eps_total', 'horizon', 't_min']
SCENARIO_KEYS = ['mechanism', 'eps_total', 'horizon', 't_min']


@dataclass
class SweepResult:
    runs: pd.DataFrame
    aggregate: pd.DataFrame
    improvement: pd.DataFrame


def cell_label(config: RunConfig) -> str:
    return (f"{config.policy}_{effective_mechanism(config).value}_eps{config.eps_total:g}"
            f"_T{config.horizon}_tmin{config.t_min}")


def _run_one(config: RunConfig, seed: int, write: bool) -> dict:
    run_config = replace(config, seed=seed,
                         output_dir=os.path.join(config.output_dir, cell_label(config), f"seed_{seed}"))
    try:
        return {**run_experiment(run_config, write=write).summary, 'error': ''}
    except Exception as exc:
        logger.warning("run %s seed %d failed: %s", cell_label(config), seed, exc)
        return {'policy': config.policy, 'mechanism': effective_mechanism(config).value,
                'eps_total': config.eps_total, 'horizon': config.horizon, 't_min': config.t_min,
                'seed': seed, 'error': f"{type(exc).__name__}: {exc}"}


def aggregate_runs(runs: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard deviation of the final metrics per grid cell."""
    runs = runs.copy()
    for column in ('final_rmse', 'final_f1'):
        if column not in runs.columns:
            runs[column] = np.nan
    runs['succeeded'] = (runs['error'] == '').astype(int)
    runs['failed'] = 1 - runs['succeeded']
    aggregate = runs.groupby(CELL_KEYS, sort=True).agg(
        final_rmse_mean=('final_rmse', 'mean'), final_rmse_std=('final_rmse', 'std'),
        final_f1_mean=('final_f1', 'mean'), final_f1_std=('final_f1', 'std'),
        n_runs=('succeeded', 'sum'), n_failed=('failed', 'sum'))
    return aggregate.reset_index()


def improvement_report(aggregate: pd.DataFrame, reference: str = 'bgtplanner') -> pd.DataFrame:
    """Relative RMSE improvement (%) of ``reference`` over every other policy in the same scenario."""
    rows = []
    for scenario, group in aggregate.groupby(SCENARIO_KEYS, sort=True):
        ours = group[group['policy'] == reference]
        if ours.empty or np.isnan(ours['final_rmse_mean'].iloc[0]):
            continue
        ours_rmse = float(ours['final_rmse_mean'].iloc[0])
        for _, other in group[group['policy'] != reference].iterrows():
            base = other['final_rmse_mean']
            if not base or np.isnan(base):
                continue
            rows.append({**dict(zip(SCENARIO_KEYS, scenario)), 'baseline': other['policy'],
                         'baseline_rmse': base, 'reference_rmse': ours_rmse,
                         'improvement_pct': 100.0 * (base - ours_rmse) / base})
    return pd.DataFrame(rows, columns=SCENARIO_KEYS + ['baseline', 'baseline_rmse', 'reference_rmse',
                                                       'improvement_pct'])


def sweep(configs: List[RunConfig], seeds: Optional[int] = None, n_jobs: Optional[int] = None,
          output_dir: Optional[str] = None, write: bool = True) -> SweepResult:
    if not configs:
        raise PreconditionError("sweep needs at least one configuration")
    seeds = seeds or configs[0].seeds
    n_jobs = n_jobs or configs[0].n_jobs
    jobs = [(config, config.seed + offset) for config in configs for offset in range(seeds)]
    logger.info("sweep: %d configurations x %d seeds on %d jobs", len(configs), seeds, n_jobs)

    summaries = Parallel(n_jobs=n_jobs)(delayed(_run_one)(config, seed, write) for config, seed in jobs)
    runs = pd.DataFrame(summaries)
    aggregate = aggregate_runs(runs)
    result = SweepResult(runs, aggregate, improvement_report(aggregate))

    if write:
        exporter = ResultExporter(output_dir or configs[0].output_dir)
        exporter.to_csv(result.runs, 'sweep_runs.csv')
        exporter.to_csv(result.aggregate, 'sweep_aggregate.csv')
        exporter.to_csv(result.improvement, 'sweep_improvement.csv')
    return result
