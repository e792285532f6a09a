"""
Environment configuration module.
Loads environment variables once, applies defaults, then exports them for use across the simulator.
"""

import logging
import os
from dotenv import load_dotenv


class EnvironmentConfig:
    """
    Centralized environment configuration class.
    Loads environment variables once and validates the numeric ones.
    """

    def __init__(self):
        # Load environment variables from .env file
        load_dotenv()

        self.DEFAULT_SEED = self._get_int("QPE_DEFAULT_SEED", 20240917)
        self.OUTPUT_DIR = self._get_optional("QPE_OUTPUT_DIR", "results")
        # Statevector budget (b ancillas x N system dimension)
        self.MAX_ANCILLA_BITS = self._get_int("QPE_MAX_ANCILLA_BITS", 10)
        self.MAX_SYSTEM_DIM = self._get_int("QPE_MAX_SYSTEM_DIM", 4096)
        self.WORKERS = self._get_int("QPE_WORKERS", 1)
        # Fine eigenbases kept per service (each is N x N doubles)
        self.BASIS_CACHE_SIZE = self._get_int("QPE_BASIS_CACHE_SIZE", 4)
        self.LOG_LEVEL = self._get_optional("LOG_LEVEL", "INFO").upper()
        self.DEBUG = self._get_optional("DEBUG", "False").lower() in ("true", "1", "yes")
        self.ENVIRONMENT = self._get_optional("ENVIRONMENT", "development")

    def _get_optional(self, key: str, default: str = "") -> str:
        """
        Get an optional environment variable with a default value.
        """
        return os.getenv(key, default)

    def _get_int(self, key: str, default: int) -> int:
        """
        Get an integer environment variable.
        Raises ValueError if the variable is set but not an integer.
        """
        value = os.getenv(key)
        if value is None or value.strip() == "":
            return default
        try:
            return int(value)
        except ValueError:
            raise ValueError(
                f"Environment variable '{key}' must be an integer, got '{value}'. "
                f"Please fix it in your .env file."
            )

    def __repr__(self) -> str:
        return (
            f"EnvironmentConfig(\n"
            f"  DEFAULT_SEED={self.DEFAULT_SEED},\n"
            f"  OUTPUT_DIR={self.OUTPUT_DIR},\n"
            f"  MAX_ANCILLA_BITS={self.MAX_ANCILLA_BITS},\n"
            f"  MAX_SYSTEM_DIM={self.MAX_SYSTEM_DIM},\n"
            f"  WORKERS={self.WORKERS},\n"
            f"  BASIS_CACHE_SIZE={self.BASIS_CACHE_SIZE},\n"
            f"  LOG_LEVEL={self.LOG_LEVEL},\n"
            f"  DEBUG={self.DEBUG},\n"
            f"  ENVIRONMENT={self.ENVIRONMENT}\n"
            f")"
        )


# Create a single instance of the configuration
# This ensures environment variables are loaded only once
env = EnvironmentConfig()

DEFAULT_SEED = env.DEFAULT_SEED
OUTPUT_DIR = env.OUTPUT_DIR
MAX_ANCILLA_BITS = env.MAX_ANCILLA_BITS
MAX_SYSTEM_DIM = env.MAX_SYSTEM_DIM
WORKERS = env.WORKERS
BASIS_CACHE_SIZE = env.BASIS_CACHE_SIZE
LOG_LEVEL = env.LOG_LEVEL
DEBUG = env.DEBUG
ENVIRONMENT = env.ENVIRONMENT


def configure_logging() -> None:
    """Configure the root logger once from LOG_LEVEL / DEBUG."""
    level = logging.DEBUG if DEBUG else getattr(logging, LOG_LEVEL, logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
    )
