"""Test configuration and fixtures."""

import pytest
import logging

# Load environment variables for all tests
try:
    from dotenv import load_dotenv

    load_dotenv()
    print("🔑 Loaded environment variables from .env file for tests")
except ImportError:
    print("ℹ️  python-dotenv not available, using system environment variables")

ARBCOST_ENV = (
    "ARBCOST_THREADS",
    "ARBCOST_OUTPUT_DIR",
    "ARBCOST_LOG_LEVEL",
    "ARBCOST_BLOCK_SIZE",
)


def pytest_configure(config):
    """Configure pytest with custom settings."""
    # Set up logging for tests
    logging.basicConfig(
        level=logging.DEBUG,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


@pytest.fixture
def clean_env(monkeypatch):
    """Remove ARBCOST_* variables so settings fall back to defaults."""
    for name in ARBCOST_ENV:
        monkeypatch.delenv(name, raising=False)
    return monkeypatch


@pytest.fixture(autouse=True)
def cleanup_results():
    """Clean up any results folder created during tests."""
    import os
    import shutil

    yield  # Run the test

    # Clean up after test
    if os.path.exists("results"):
        try:
            shutil.rmtree("results")
        except Exception:
            pass  # Best effort cleanup
