"""Utility modules"""
from .config import Config
from .logger import setup_logger, PerformanceLogger
from .threaded_loader import ThreadedLoader

__all__ = ['Config', 'setup_logger', 'PerformanceLogger', 'ThreadedLoader']
