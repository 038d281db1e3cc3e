"""
Base class for result artifact storage implementations.
"""

import logging
from typing import Any, Dict, Iterable, Optional, Sequence

logger = logging.getLogger(__name__)


class ResultStorage:
    """Abstract base class for result artifact storage."""

    def get(self, key: str) -> Optional[Any]:
        """
        Get the stored result for an artifact.

        Args:
            key: The artifact name (e.g., 'pde-price', 'converge-lattice')

        Returns:
            The stored result if found, None otherwise
        """
        logger.debug("ResultStorage.get() not implemented")
        raise NotImplementedError

    def get_metadata(self, key: str) -> Optional[Dict]:
        """
        Get metadata for an artifact including its last write time.

        Args:
            key: The artifact name

        Returns:
            Dictionary containing metadata if found, None otherwise
        """
        logger.debug("ResultStorage.get_metadata() not implemented")
        raise NotImplementedError

    def set(self, key: str, result: Any, metadata: Optional[Dict] = None) -> str:
        """
        Store a JSON result and its metadata.

        Args:
            key: The artifact name
            result: JSON-serializable result document
            metadata: Optional metadata stored with the result

        Returns:
            Location of the stored artifact
        """
        logger.debug("ResultStorage.set() not implemented")
        raise NotImplementedError

    def write_table(
        self, key: str, header: Sequence[str], rows: Iterable[Sequence[Any]]
    ) -> str:
        """
        Store a CSV table.

        Args:
            key: The artifact name
            header: Column names
            rows: Table rows

        Returns:
            Location of the stored table
        """
        logger.debug("ResultStorage.write_table() not implemented")
        raise NotImplementedError

    def delete(self, key: str) -> None:
        """
        Delete every artifact stored under a key.

        Args:
            key: The artifact name
        """
        logger.debug("ResultStorage.delete() not implemented")
        raise NotImplementedError

    def close(self) -> None:
        """
        Clean up any resources used by the storage implementation.
        Default implementation does nothing.
        """
        logger.debug("ResultStorage.close() default implementation called")
