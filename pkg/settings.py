import logging
import os

from dotenv import dotenv_values, load_dotenv

from dynsys import ConfigError

logger = logging.getLogger(__name__)

# Priority: command line > --config file > environment (.env) > defaults below
load_dotenv(override=False)

DEFAULT_SEED = 0
DEFAULT_JOBS = 1
DEFAULT_LOG_LEVEL = "WARNING"
DEFAULT_CONSTRAINT_RTOL = 1e-9
DEFAULT_DENSE_LIMIT = 2000

# Reference value of d<J>/ds for the solenoid at s = 1, from averaging 1100
# trimmed LSS runs of length 100000 (+/- 1.7e-5 at 3 sigma).
SOLENOID_TRUTH_S1 = 0.931450


def _env(name, cast, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw.strip())
    except ValueError:
        raise ConfigError(f"environment variable {name}={raw!r} is not a valid {cast.__name__}") from None


def env_seed():
    return _env("LSS_SEED", int, DEFAULT_SEED)


def env_jobs():
    return _env("LSS_JOBS", int, DEFAULT_JOBS)


def log_level():
    return _env("LSS_LOG_LEVEL", str, DEFAULT_LOG_LEVEL).upper()


def constraint_rtol():
    return _env("LSS_CONSTRAINT_RTOL", float, DEFAULT_CONSTRAINT_RTOL)


def dense_limit():
    return _env("LSS_DENSE_LIMIT", int, DEFAULT_DENSE_LIMIT)


def load_config_file(path, allowed=None):
    """
    Read a KEY=VALUE config file. Keys use the long flag names; '_' and '-'
    are interchangeable. Returns {normalized_key: raw string}.
    """
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")

    try:
        values = dotenv_values(path, encoding="utf-8")
    except UnicodeDecodeError:
        # Fallback to UTF-16 (PowerShell default)
        values = dotenv_values(path, encoding="utf-16")

    config = {}
    for key, value in values.items():
        norm = key.strip().lower().replace("_", "-")
        if allowed is not None and norm not in allowed:
            raise ConfigError(f"unknown key '{key}' in {path}")
        if value is None:
            raise ConfigError(f"key '{key}' in {path} has no value")
        config[norm] = value.strip()
    logger.info("loaded %d keys from %s", len(config), path)
    return config
