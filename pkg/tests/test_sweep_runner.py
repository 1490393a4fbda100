from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from app.errors import PreconditionError
from app.run_config import POLICIES, RunConfig
from scripts.sweep_runner import aggregate_runs, improvement_report, sweep


def test_single_config_five_seeds(small_config):
    config = replace(small_config, policy='uniform')
    result = sweep([config], seeds=5, n_jobs=1, write=False)
    assert len(result.runs) == 5
    assert len(result.aggregate) == 1
    assert result.aggregate.loc[0, 'n_runs'] == 5
    assert result.aggregate.loc[0, 'final_rmse_mean'] == pytest.approx(result.runs['final_rmse'].mean())
    assert result.aggregate.loc[0, 'final_rmse_std'] == pytest.approx(result.runs['final_rmse'].std())


def test_grid_over_budgets(small_config):
    configs = [replace(small_config, policy='uniform', eps_total=eps) for eps in (2.0, 5.0, 10.0)]
    result = sweep(configs, seeds=1, n_jobs=1, write=False)
    assert sorted(result.aggregate['eps_total']) == [2.0, 5.0, 10.0]


def test_failed_runs_are_recorded(small_config):
    broken = replace(small_config, dataset_format='ml100k', dataset_path=None)
    result = sweep([replace(small_config, policy='uniform'), broken], seeds=1, n_jobs=1, write=False)
    assert (result.runs['error'] != '').sum() == 1
    assert result.aggregate['n_failed'].sum() == 1


def test_improvement_report(small_config):
    configs = [replace(small_config, policy=p) for p in ('bgtplanner', 'uniform')]
    result = sweep(configs, seeds=1, n_jobs=1, write=False)
    report = result.improvement
    assert list(report['baseline']) == ['uniform']
    row = report.iloc[0]
    assert row['improvement_pct'] == pytest.approx(
        100 * (row['baseline_rmse'] - row['reference_rmse']) / row['baseline_rmse'])


def test_sweep_writes_csvs(small_config, tmp_path):
    sweep([replace(small_config, policy='uniform')], seeds=1, n_jobs=1, output_dir=str(tmp_path))
    for name in ('sweep_runs.csv', 'sweep_aggregate.csv', 'sweep_improvement.csv'):
        assert (tmp_path / name).exists()


def test_empty_sweep():
    with pytest.raises(PreconditionError):
        sweep([])


def test_aggregate_and_improvement_on_fixed_runs():
    scenario = {'mechanism': 'laplace', 'eps_total': 10.0, 'horizon': 100, 't_min': 70}
    runs = pd.DataFrame([
        {**scenario, 'policy': 'bgtplanner', 'seed': 0, 'final_rmse': 0.9, 'final_f1': 0.5, 'error': ''},
        {**scenario, 'policy': 'bgtplanner', 'seed': 1, 'final_rmse': 1.1, 'final_f1': 0.7, 'error': ''},
        {**scenario, 'policy': 'uniform', 'seed': 0, 'final_rmse': 1.25, 'final_f1': 0.4, 'error': ''},
        {**scenario, 'policy': 'uniform', 'seed': 1, 'final_rmse': np.nan, 'final_f1': np.nan,
         'error': 'DomainError: boom'},
    ])
    aggregate = aggregate_runs(runs)
    planner = aggregate[aggregate['policy'] == 'bgtplanner'].iloc[0]
    assert planner['final_rmse_mean'] == pytest.approx(1.0)
    assert planner['n_runs'] == 2 and planner['n_failed'] == 0
    assert aggregate[aggregate['policy'] == 'uniform'].iloc[0]['n_failed'] == 1

    report = improvement_report(aggregate)
    assert len(report) == 1
    assert report.iloc[0]['improvement_pct'] == pytest.approx(20.0)


@pytest.mark.slow
@pytest.mark.parametrize('mechanism', ['laplace', 'gaussian'])
def test_default_synthetic_ranking(tmp_path, mechanism):
    base = RunConfig(mechanism=mechanism, output_dir=str(tmp_path))
    configs = [replace(base, policy=policy) for policy in POLICIES]
    result = sweep(configs, seeds=5, n_jobs=-1, write=False)
    assert (result.runs['error'] == '').all()
    means = result.aggregate.set_index('policy')['final_rmse_mean']
    assert means.idxmin() == 'fedsgd'
    assert means['bgtplanner'] <= means['uniform']
