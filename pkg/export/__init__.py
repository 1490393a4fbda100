"""
Export Module for the privacy-budget planner
Handles result export functionality
"""

from .result_exporter import BUNDLE_FILES, ResultExporter

__all__ = ['BUNDLE_FILES', 'ResultExporter']
