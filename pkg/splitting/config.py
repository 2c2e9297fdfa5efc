"""
Configuration for the splitting toolkit.
Loads the root .env file (python-dotenv) and exposes typed settings used as
CLI defaults. Library defaults live here as plain constants.
"""

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, TypeVar

from dotenv import load_dotenv

from .errors import ConfigError

# Load environment variables from root .env file
ROOT_DIR = Path(__file__).resolve().parent.parent
load_dotenv(ROOT_DIR / '.env')

DEFAULT_GAMMA = 0.5
DEFAULT_TOL_FP = 1e-8
DEFAULT_TOL_CONSENSUS = 1e-8
DEFAULT_MAX_ITERS = 100_000
DEFAULT_SEED = 0

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

T = TypeVar('T')


def _read(env: Mapping[str, str], name: str, parse: Callable[[str], T], default: T) -> T:
    raw = env.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return parse(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{name}={raw!r} is not valid: {exc}") from exc


@dataclass(frozen=True)
class Settings:
    """Runtime defaults resolved from the environment"""
    gamma: float = DEFAULT_GAMMA
    tol_fp: float = DEFAULT_TOL_FP
    tol_consensus: float = DEFAULT_TOL_CONSENSUS
    max_iters: int = DEFAULT_MAX_ITERS
    seed: int = DEFAULT_SEED
    log_level: str = "WARNING"
    output_dir: Path = Path(".")

    @classmethod
    def from_env(cls, env: Optional[Mapping[str, str]] = None) -> 'Settings':
        """
        Build settings from environment variables.

        Args:
            env: Mapping to read from. Defaults to os.environ.

        Returns:
            Settings with every FRUGAL_* variable applied
        """
        env = os.environ if env is None else env
        level = _read(env, 'FRUGAL_LOG_LEVEL', str.upper, "WARNING")
        if level not in logging.getLevelNamesMapping():
            raise ConfigError(f"FRUGAL_LOG_LEVEL={level!r} is not a logging level")
        settings = cls(
            gamma=_read(env, 'FRUGAL_GAMMA', float, DEFAULT_GAMMA),
            tol_fp=_read(env, 'FRUGAL_TOL_FP', float, DEFAULT_TOL_FP),
            tol_consensus=_read(env, 'FRUGAL_TOL_CONSENSUS', float, DEFAULT_TOL_CONSENSUS),
            max_iters=_read(env, 'FRUGAL_MAX_ITERS', int, DEFAULT_MAX_ITERS),
            seed=_read(env, 'FRUGAL_SEED', int, DEFAULT_SEED),
            log_level=level,
            output_dir=_read(env, 'FRUGAL_OUTPUT_DIR', Path, Path(".")),
        )
        if settings.tol_fp <= 0 or settings.tol_consensus <= 0:
            raise ConfigError("tolerances must be positive")
        if settings.max_iters < 1:
            raise ConfigError("FRUGAL_MAX_ITERS must be at least 1")
        return settings


def configure_logging(level: str = "WARNING") -> None:
    """Install the single root handler used by the command line"""
    logging.basicConfig(level=getattr(logging, level.upper(), logging.WARNING),
                        format=LOG_FORMAT)
