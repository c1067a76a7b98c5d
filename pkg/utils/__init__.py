"""
Utility modules for input validation, tiepoint cleaning and report formatting
"""
from .cleaner import TiePointCleaner
from .formatter import ReportFormatter
from .validator import FileValidator

__all__ = ['TiePointCleaner', 'ReportFormatter', 'FileValidator']
