import os
import logging
from typing import Dict, Optional

import yaml

from src.exceptions import PreconditionError

proj_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEFAULT_CONFIG = os.path.join(proj_dir, 'config', 'landauer_base.yaml')

_FALLBACK = {
    'tolerances': {'support': 1e-9, 'hermitian': 1e-12, 'psd': 1e-10, 'trace': 1e-9,
                   'marginal': 1e-8, 'certificate': 1e-7},
    'lp': {'tol': 1e-9, 'max_iter': 5000},
    'sdp': {'tol': 1e-8, 'max_iter': 100, 'step': 0.95, 'infeasibility_tol': 1e-7},
    'evaluation': {},
}

_CONFIG_CACHE: Dict[str, Dict] = {}


def parse_yaml(config_yaml: str) -> Dict:
    r"""Parse yaml file.
    Args:
        config_yaml (str): config yaml path
    Returns:
        yaml_dict (Dict): parsed yaml file
    """
    with open(config_yaml, "r") as fr:
        return yaml.load(fr, Loader=yaml.FullLoader)


def load_config(config_yaml: Optional[str] = None) -> Dict:
    r"""Load the configuration, falling back to built-in defaults for missing keys.

    The ``TOL_SUPPORT`` environment variable overrides ``tolerances.support``.
    """
    path = config_yaml or DEFAULT_CONFIG
    if path not in _CONFIG_CACHE:
        loaded = parse_yaml(path) if os.path.exists(path) else {}
        merged = {key: dict(value) for key, value in _FALLBACK.items()}
        for key, value in (loaded or {}).items():
            if isinstance(value, dict) and key in merged:
                merged[key].update(value)
            else:
                merged[key] = value
        _CONFIG_CACHE[path] = merged
    configs = {key: (dict(value) if isinstance(value, dict) else value)
               for key, value in _CONFIG_CACHE[path].items()}
    override = support_override()
    if override is not None:
        configs['tolerances']['support'] = override
    return configs


def tolerance(name: str) -> float:
    return float(load_config()['tolerances'][name])


def support_override() -> Optional[float]:
    r"""TOL_SUPPORT as a relative tolerance in [0, 1), or None when unset."""
    raw = os.environ.get('TOL_SUPPORT')
    if not raw:
        return None
    try:
        value = float(raw)
    except ValueError:
        raise PreconditionError(f"TOL_SUPPORT must be a number, got {raw!r}") from None
    if not 0.0 <= value < 1.0:
        raise PreconditionError(f"TOL_SUPPORT must lie in [0, 1), got {value}")
    return value


def support_tol() -> float:
    # read on every call so TOL_SUPPORT set after import still applies
    override = support_override()
    return tolerance('support') if override is None else override


def get_logger(name: str) -> logging.Logger:
    logger = logging.getLogger(name)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter('[%(levelname)s] %(filename)s: %(message)s'))
        logger.addHandler(handler)
        logger.setLevel(logging.INFO)
        logger.propagate = False
    return logger
