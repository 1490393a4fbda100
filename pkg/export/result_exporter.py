"""
Result Exporter Module
Writes run bundles as UTF-8 CSV files and an optional multi-sheet Excel workbook
"""

import io
import logging
import os
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from config import OUTPUT_DIR

logger = logging.getLogger(__name__)

# bundle key -> file name
BUNDLE_FILES = {
    'metrics': 'metrics.csv',
    'decisions': 'decisions.csv',
    'ledger': 'ledger.csv',
    'duals': 'dual_trajectory.csv',
    'gpr_history': 'gpr_history.csv',
    'summary': 'summary.csv',
}


class ResultExporter:
    """Handles result export operations"""

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = output_dir or OUTPUT_DIR

    def _path(self, filename: str) -> str:
        os.makedirs(self.output_dir, exist_ok=True)
        return os.path.join(self.output_dir, filename)

    def to_csv(self, df: pd.DataFrame, filename: str) -> str:
        """Write a DataFrame with a header row; returns the file path"""
        path = self._path(filename)
        df.to_csv(path, index=False, encoding='utf-8', lineterminator='\n')
        return path

    def to_excel(self, data_dict: Dict[str, pd.DataFrame], filename: str = 'report.xlsx') -> bytes:
        """Export multiple DataFrames to Excel with multiple sheets"""
        output = io.BytesIO()

        with pd.ExcelWriter(output, engine='openpyxl') as writer:
            for sheet_name, df in data_dict.items():
                df.to_excel(writer, sheet_name=sheet_name[:31], index=False)

        content = output.getvalue()
        with open(self._path(filename), 'wb') as handle:
            handle.write(content)
        return content

    def write_bundle(self, frames: Dict[str, pd.DataFrame], excel: bool = False) -> Dict[str, str]:
        """Write every known frame of a run bundle; returns bundle key -> path"""
        paths = {}
        for key, filename in BUNDLE_FILES.items():
            if key in frames and frames[key] is not None:
                paths[key] = self.to_csv(frames[key], filename)
        if excel:
            self.to_excel({k: v for k, v in frames.items() if v is not None})
            paths['excel'] = self._path('report.xlsx')
        logger.info("wrote %d files to %s", len(paths), self.output_dir)
        return paths

    def prepare_decisions_export(self, decisions_df: pd.DataFrame) -> pd.DataFrame:
        """Order decision columns as round, phase, action, beta_*, p_*, Lambda, lambda_l1"""
        export_df = decisions_df.copy()
        head = [c for c in ('round', 'phase', 'action') if c in export_df.columns]
        betas = sorted((c for c in export_df.columns if c.startswith('beta_')), key=lambda c: int(c[5:]))
        probs = sorted((c for c in export_df.columns if c.startswith('p_')), key=lambda c: int(c[2:]))
        tail = [c for c in ('Lambda', 'lambda_l1') if c in export_df.columns]
        rest = [c for c in export_df.columns if c not in head + betas + probs + tail]
        return export_df[head + betas + probs + tail + rest]

    def create_summary_stats(self, metrics_df: pd.DataFrame, ledger_df: pd.DataFrame,
                             initial_rmse: float = np.nan) -> Dict[str, Any]:
        """Create summary statistics for a run bundle"""
        executed = len(metrics_df)
        return {
            'final_rmse': float(metrics_df['rmse'].iloc[-1]) if executed else initial_rmse,
            'final_f1': float(metrics_df['f1'].iloc[-1]) if executed else np.nan,
            'rounds_executed': executed,
            'total_eps_spent': float(metrics_df['eps_spent'].sum()) if executed else 0.0,
            'max_client_eps_consumed': float(ledger_df['consumed_eps'].max()) if len(ledger_df) else 0.0,
        }
