"""
Runtime configuration for the fde package.

Values come from the environment (optionally a .env file) the same way the
HTTP service reads its settings.
"""

import os
import logging
from dataclasses import dataclass
from functools import lru_cache

from dotenv import load_dotenv

from fde.errors import InvalidSpec

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_DATEFMT = '%Y-%m-%d %H:%M:%S'


@dataclass(frozen=True)
class Settings:
    """Tolerances, truncation depth and parallelism shared by all modules."""
    threads: int = 1
    tol_pole: float = 1e-12
    tol_region: float = 1e-9
    truncation: int = 10_000
    h2_ceiling: float = 1e6
    log_level: str = "INFO"
    port: int = 8080


def _read(name: str, cast, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw.strip())
    except ValueError as e:
        raise InvalidSpec(f"环境变量 {name} 的值无效: {raw!r}") from e


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    # 加载环境变量
    load_dotenv()
    settings = Settings(
        threads=max(1, _read("FDE_THREADS", int, 1)),
        tol_pole=_read("FDE_TOL_POLE", float, 1e-12),
        tol_region=_read("FDE_TOL_REGION", float, 1e-9),
        truncation=_read("FDE_TRUNCATION", int, 10_000),
        h2_ceiling=_read("FDE_H2_CEILING", float, 1e6),
        log_level=_read("FDE_LOG_LEVEL", str, "INFO").upper(),
        port=_read("PORT", int, 8080),
    )
    if settings.truncation < 1:
        raise InvalidSpec("FDE_TRUNCATION must be positive")
    return settings


def configure_logging(level: str | None = None) -> None:
    """Install the root handler once; later calls only adjust the level."""
    level_name = level or get_settings().log_level
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format=LOG_FORMAT,
        datefmt=LOG_DATEFMT,
    )
    logging.getLogger().setLevel(getattr(logging, level_name, logging.INFO))
