"""
Local file-based result storage implementation.
"""

import hashlib
import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

from ..serialization import dumps, table_to_csv
from .base import ResultStorage

logger = logging.getLogger(__name__)


class LocalFileResultStorage(ResultStorage):
    """Stores each result as a JSON envelope (and tables as CSV) in one folder."""

    def __init__(self, folder: Optional[str] = None):
        """
        Initialize local file storage.

        Args:
            folder: Directory for artifacts. If None, defaults to "results" in
                   the current working directory. Relative and absolute paths
                   are used as given.
        """
        self.folder = "results" if folder is None else folder
        self.results_dir = Path(self.folder).name
        os.makedirs(self.folder, exist_ok=True)

    def _get_path(self, key: str, suffix: str = ".json") -> str:
        """Convert an artifact key to a safe file path."""
        safe_name = key.replace("/", "_").replace("\\", "_").replace(":", "_")
        if len(safe_name) > 200:
            safe_name = hashlib.md5(key.encode()).hexdigest()
        return os.path.join(self.folder, f"{safe_name}{suffix}")

    def _read(self, key: str) -> Optional[Dict]:
        path = self._get_path(key)
        if not os.path.exists(path):
            return None
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except Exception as e:
            logger.warning(f"Failed to read result for {key}: {e}")
            return None
        return data if isinstance(data, dict) else None

    def get(self, key: str) -> Optional[Any]:
        """Get the stored result for an artifact."""
        data = self._read(key)
        return None if data is None else data.get("result")

    def get_metadata(self, key: str) -> Optional[Dict]:
        """Get metadata for an artifact including last write time."""
        data = self._read(key)
        if data is None:
            return None
        return {
            "last_updated": data.get("last_updated"),
            "metadata": data.get("metadata", {}),
            "key": data.get("key"),
        }

    def set(self, key: str, result: Any, metadata: Optional[Dict] = None) -> str:
        """Store a result with metadata; floats keep 17 significant digits."""
        path = self._get_path(key)
        data = {
            "key": key,
            "last_updated": datetime.now(timezone.utc).isoformat(),
            "result": result,
            "metadata": metadata or {},
        }
        try:
            with open(path, "w", encoding="utf-8") as f:
                f.write(dumps(data))
                f.write("\n")
        except Exception as e:
            logger.error(f"Failed to save result for {key}: {e}")
            raise
        logger.debug(f"Stored result {key} in {self.results_dir}")
        return path

    def write_table(
        self, key: str, header: Sequence[str], rows: Iterable[Sequence[Any]]
    ) -> str:
        """Store a CSV table next to the JSON results."""
        path = self._get_path(key, suffix=".csv")
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(table_to_csv(header, rows))
        except Exception as e:
            logger.error(f"Failed to save table for {key}: {e}")
            raise
        logger.debug(f"Stored table {key} in {self.results_dir}")
        return path

    def delete(self, key: str) -> None:
        """Delete the JSON result and CSV table stored under a key."""
        for suffix in (".json", ".csv"):
            path = self._get_path(key, suffix)
            try:
                if os.path.exists(path):
                    os.remove(path)
            except Exception as e:
                logger.warning(f"Failed to delete {path} for {key}: {e}")
