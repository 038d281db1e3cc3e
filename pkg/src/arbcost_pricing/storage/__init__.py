"""
Result artifact storage implementations.

This package provides storage backends for persisting command results and
plot-ready tables between runs.
"""

from .base import ResultStorage
from .local_file import LocalFileResultStorage

__all__ = ["ResultStorage", "LocalFileResultStorage"]
