import os
import logging
from dataclasses import dataclass
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
TOOL_VERSION = "0.1.0"


@dataclass(frozen=True)
class Settings:
    out_dir: str | None  # TRIDIAG_OUT, overrides --out when set
    log_level: str
    database_url: str | None  # run ledger; unset disables it
    max_workers: int


def get_settings():
    """Read settings from the environment"""
    try:
        max_workers = int(os.environ.get("TRIDIAG_MAX_WORKERS", "4"))
    except ValueError:
        logging.getLogger(__name__).warning("TRIDIAG_MAX_WORKERS is not an integer, using 4")
        max_workers = 4
    return Settings(
        out_dir=os.environ.get("TRIDIAG_OUT") or None,
        log_level=os.environ.get("TRIDIAG_LOG_LEVEL", "INFO").upper(),
        database_url=os.environ.get("DATABASE_URL") or None,
        max_workers=max(1, max_workers),
    )


def configure_logging(level=None):
    """Configure root logging once for command-line runs"""
    level_name = level or get_settings().log_level
    logging.basicConfig(level=getattr(logging, level_name, logging.INFO), format=LOG_FORMAT)
