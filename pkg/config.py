"""
Runtime settings read from the environment (and an optional .env file)
"""
import os
from dataclasses import dataclass
from typing import Callable, TypeVar

from dotenv import load_dotenv

from errors import ConfigError

# Load environment variables
load_dotenv()

T = TypeVar("T")

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class Settings:
    """Defaults for the CLI; every value can be overridden by a flag"""
    output_dir: str = "output"
    log_level: str = "INFO"
    workers: int = 1
    ransac_threshold: float = 1.0
    ransac_max_iterations: int = 2000
    ransac_confidence: float = 0.999
    ransac_seed: int = 0
    refit_rounds: int = 3
    max_corners: int = 2000
    fast_threshold: int = 20
    patch_radius: int = 8
    match_ratio: float = 0.9
    quadratic_min_inliers: int = 24


def _env(name: str, default: T, cast: Callable[[str], T]) -> T:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw.strip())
    except ValueError as e:
        raise ConfigError(f"{name}={raw!r} is not a valid value: {e}") from e


def load_settings() -> Settings:
    """
    Build Settings from COREG_* environment variables

    Returns:
        Settings with environment overrides applied
    """
    defaults = Settings()
    settings = Settings(
        output_dir=_env("COREG_OUTPUT_DIR", defaults.output_dir, str),
        log_level=_env("COREG_LOG_LEVEL", defaults.log_level, str).upper(),
        workers=_env("COREG_WORKERS", defaults.workers, int),
        ransac_threshold=_env("COREG_RANSAC_THRESHOLD", defaults.ransac_threshold, float),
        ransac_max_iterations=_env("COREG_RANSAC_MAX_ITER", defaults.ransac_max_iterations, int),
        ransac_confidence=_env("COREG_RANSAC_CONFIDENCE", defaults.ransac_confidence, float),
        ransac_seed=_env("COREG_RANSAC_SEED", defaults.ransac_seed, int),
        refit_rounds=_env("COREG_REFIT_ROUNDS", defaults.refit_rounds, int),
        max_corners=_env("COREG_MAX_CORNERS", defaults.max_corners, int),
        fast_threshold=_env("COREG_FAST_THRESHOLD", defaults.fast_threshold, int),
        patch_radius=_env("COREG_PATCH_RADIUS", defaults.patch_radius, int),
        match_ratio=_env("COREG_MATCH_RATIO", defaults.match_ratio, float),
        quadratic_min_inliers=_env("COREG_QUADRATIC_MIN_INLIERS", defaults.quadratic_min_inliers, int),
    )
    if settings.workers < 1:
        raise ConfigError("COREG_WORKERS must be >= 1")
    if settings.log_level not in LOG_LEVELS:
        raise ConfigError(f"Unknown log level: {settings.log_level}")
    return settings
