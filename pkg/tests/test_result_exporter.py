import os

import numpy as np
import pandas as pd
import pytest
from openpyxl import load_workbook

from export.result_exporter import BUNDLE_FILES, ResultExporter


def _metrics():
    return pd.DataFrame({'round': [1, 2, 3], 'rmse': [0.3, 0.28, 0.27], 'f1': [0.5, 0.55, 0.6],
                         'reward': [0.01, 0.02, 0.01], 'action': [1, 2, 1], 'eps_spent': [0.1, 0.12, 0.1]})


def test_csv_has_header_and_unix_newlines(tmp_path):
    exporter = ResultExporter(str(tmp_path / 'out'))
    path = exporter.to_csv(_metrics(), 'metrics.csv')
    raw = open(path, 'rb').read()
    assert raw.startswith(b'round,rmse,f1,reward,action,eps_spent\n')
    assert b'\r\n' not in raw


def test_bundle_writes_known_frames(tmp_path):
    exporter = ResultExporter(str(tmp_path))
    ledger = pd.DataFrame({'client_id': [0], 'consumed_eps': [0.32]})
    paths = exporter.write_bundle({'metrics': _metrics(), 'ledger': ledger, 'gpr_history': None})
    assert set(paths) == {'metrics', 'ledger'}
    assert os.path.basename(paths['ledger']) == BUNDLE_FILES['ledger']


def test_excel_report_has_one_sheet_per_frame(tmp_path):
    exporter = ResultExporter(str(tmp_path))
    paths = exporter.write_bundle({'metrics': _metrics(), 'summary': pd.DataFrame([{'final_rmse': 0.27}])},
                                  excel=True)
    workbook = load_workbook(paths['excel'])
    assert workbook.sheetnames == ['metrics', 'summary']


def test_summary_stats():
    exporter = ResultExporter()
    ledger = pd.DataFrame({'consumed_eps': [0.32, 0.2]})
    stats = exporter.create_summary_stats(_metrics(), ledger, initial_rmse=0.4)
    assert stats['final_rmse'] == 0.27
    assert stats['rounds_executed'] == 3
    assert stats['total_eps_spent'] == pytest.approx(0.32)
    assert stats['max_client_eps_consumed'] == 0.32


def test_summary_of_empty_run_reports_initial_rmse():
    stats = ResultExporter().create_summary_stats(_metrics().iloc[:0], pd.DataFrame({'consumed_eps': []}), 0.4)
    assert stats['final_rmse'] == 0.4
    assert stats['rounds_executed'] == 0
    assert np.isnan(stats['final_f1'])


def test_decision_columns_are_ordered():
    decisions = pd.DataFrame([{'lambda_l1': 1.0, 'p_2': 0.4, 'action': 1, 'beta_2': 0.1, 'round': 1,
                               'p_1': 0.6, 'beta_1': 0.2, 'phase': 'explore_exploit', 'Lambda': 2.0}])
    ordered = ResultExporter().prepare_decisions_export(decisions)
    assert list(ordered.columns) == ['round', 'phase', 'action', 'beta_1', 'beta_2', 'p_1', 'p_2',
                                     'Lambda', 'lambda_l1']
