"""Line-based key=value config file support.

Recognized keys:
    topology.packages          int >= 1
    topology.cores_per_package int >= 1
    topology.threads_per_core  int >= 1
    topology.clock_ghz         float > 0

The config path comes from --config or the CORESCOPE_CONFIG environment
variable. Blank lines and lines starting with '#' are ignored. Out-of-range
values are rejected here, at parse time, so the topology layer never sees
them.
"""

from __future__ import annotations

import os
from typing import Dict, Optional, Union

from .errors import ConfigError

ENV_VAR = "CORESCOPE_CONFIG"

_INT_KEYS = ("topology.packages", "topology.cores_per_package", "topology.threads_per_core")
_FLOAT_KEYS = ("topology.clock_ghz",)


def parse_config(text: str) -> Dict[str, Union[int, float]]:
    values: Dict[str, Union[int, float]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in _INT_KEYS:
            try:
                iv = int(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} must be an integer, got {value!r}")
            if iv < 1:
                raise ConfigError(f"line {lineno}: {key} must be >= 1, got {iv}")
            values[key] = iv
        elif key in _FLOAT_KEYS:
            try:
                fv = float(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} must be a number, got {value!r}")
            if fv <= 0:
                raise ConfigError(f"line {lineno}: {key} must be > 0, got {fv}")
            values[key] = fv
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return values


def load_config(path: Optional[str] = None) -> Dict[str, Union[int, float]]:
    """Load overrides from `path`, or from $CORESCOPE_CONFIG, or return {}."""
    if path is None:
        path = os.environ.get(ENV_VAR)
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    return parse_config(text)
