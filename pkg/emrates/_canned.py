"""
The built-in experiments, one YAML document each in ``emrates/experiments``.
"""
from pathlib import Path
from typing import Dict, Optional

import structlog
from cachetools.func import lru_cache

from emrates._config import ConfigError, ExperimentConfig, load_config

_LOG = structlog.get_logger()

EXPERIMENTS_DIR = Path(__file__).parent / "experiments"


@lru_cache(maxsize=1)
def list_canned() -> Dict[str, Path]:
    """
    Canned experiment names, with the document each is loaded from.

    >>> "indicator_d1" in list_canned()
    True
    """
    return {path.stem: path for path in sorted(EXPERIMENTS_DIR.glob("*.yaml"))}


def canned(name: str, output_dir: Optional[Path] = None) -> ExperimentConfig:
    try:
        path = list_canned()[name]
    except KeyError:
        raise ConfigError(
            f"no canned experiment {name!r} (one of {', '.join(list_canned())})"
        ) from None
    config = load_config(path, output_dir=output_dir)
    if config.name != name:
        raise ConfigError(f"{path.name} declares the name {config.name!r}", "name")
    return config
