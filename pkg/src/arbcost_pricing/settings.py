"""
Run settings read from the environment (and a project ``.env`` file).
"""

import logging
import os
from dataclasses import dataclass
from typing import Mapping, Optional

from dotenv import load_dotenv

from .errors import ValidationError
from .streams import DEFAULT_BLOCK_SIZE

logger = logging.getLogger(__name__)

ENV_THREADS = "ARBCOST_THREADS"
ENV_OUTPUT_DIR = "ARBCOST_OUTPUT_DIR"
ENV_LOG_LEVEL = "ARBCOST_LOG_LEVEL"
ENV_BLOCK_SIZE = "ARBCOST_BLOCK_SIZE"

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _positive_int(raw: str, name: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"{name} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValidationError(f"{name} must be >= 1, got {value}")
    return value


@dataclass
class RunSettings:
    """Process-level knobs shared by every command."""

    threads: int = 1
    output_dir: Optional[str] = None
    log_level: str = "WARNING"
    block_size: int = DEFAULT_BLOCK_SIZE

    def __post_init__(self) -> None:
        self.log_level = self.log_level.upper()
        if self.log_level not in LOG_LEVELS:
            raise ValidationError(f"log level must be one of {LOG_LEVELS}, got {self.log_level}")
        if self.threads < 1:
            raise ValidationError(f"threads must be >= 1, got {self.threads}")
        if self.block_size < 2 or self.block_size % 2:
            raise ValidationError(f"block size must be even and >= 2, got {self.block_size}")

    @classmethod
    def from_env(
        cls, environ: Optional[Mapping[str, str]] = None, use_dotenv: bool = True
    ) -> "RunSettings":
        """
        Build settings from environment variables.

        Args:
            environ: Mapping to read instead of ``os.environ``
            use_dotenv: Load a ``.env`` file first (existing variables win)

        Raises:
            ValidationError: on malformed values
        """
        if use_dotenv and environ is None:
            load_dotenv()
        env = os.environ if environ is None else environ
        settings = cls(
            threads=_positive_int(env[ENV_THREADS], ENV_THREADS) if env.get(ENV_THREADS) else 1,
            output_dir=env.get(ENV_OUTPUT_DIR) or None,
            log_level=env.get(ENV_LOG_LEVEL) or "WARNING",
            block_size=(
                _positive_int(env[ENV_BLOCK_SIZE], ENV_BLOCK_SIZE)
                if env.get(ENV_BLOCK_SIZE)
                else DEFAULT_BLOCK_SIZE
            ),
        )
        logger.debug(f"Run settings from environment: {settings}")
        return settings
