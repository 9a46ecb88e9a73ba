"""
Run configuration and experiment manifests.

A manifest is a TOML file with flat ``key = value`` pairs, optionally grouped in
one table per command::

    seed = 7
    workers = 4

    [gen-data]
    count = 2000

    [train]
    epochs = 30
    batch = 100

Keys use the long option names of the commands (dashes or underscores). Values
given on the command line always win over the manifest.
"""
import os
import sys
from typing import Any, Dict, Iterable, List, Optional

from pydantic import BaseModel, Field, validator

from .cnn.training import TrainConfig
from .socp import SolverOptions

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def default_workers() -> int:
    return os.cpu_count() or 1


class RunConfig(BaseModel):
    """System parameters and option groups of a run. The defaults reproduce the
    full-scale setup: 4 antennas, 3 users, noise variance 0.1 and 5 dB targets."""
    n: int = Field(4, description="Number of transmit antennas.")
    k: int = Field(3, description="Number of users.")
    sigma2: float = Field(0.1, description="Noise variance.")
    gamma_db: float = Field(5.0, description="Common minimum SINR of all users in dB.")
    count: int = Field(20000, description="Number of training samples to generate.")
    seed: Optional[int] = Field(None, ge=0, description="Master seed.")
    workers: int = Field(default_factory=default_workers, description="Worker processes for per-sample stages.")
    gammas: List[float] = Field([0.0, 2.5, 5.0, 7.5, 10.0], description="SINR grid (dB) of the evaluation.")
    solver: SolverOptions = SolverOptions()
    train: TrainConfig = TrainConfig()

    @validator('n', 'k', 'count', 'workers')
    def check_at_least_one(cls, value, field):
        if value < 1:
            raise ValueError(f"{field.name} must be at least 1")
        return value

    @validator('sigma2')
    def check_sigma2(cls, value):
        if not value > 0:
            raise ValueError("sigma2 must be positive")
        return value

    @validator('gammas')
    def check_gammas(cls, value):
        if not value:
            raise ValueError("the SINR grid is empty")
        return value


def _normalize(table: Dict[str, Any]) -> Dict[str, Any]:
    normalized = {}
    for key, value in table.items():
        if isinstance(value, dict):
            continue
        # Lists are given to the comma separated options as text
        if isinstance(value, list):
            value = ','.join(str(item) for item in value)
        normalized[key.replace('-', '_')] = value
    return normalized


def load_manifest(path) -> Dict[str, Any]:
    with open(path, 'rb') as file_in:
        return tomllib.load(file_in)


def default_map(manifest: Dict[str, Any], commands: Iterable[str]) -> Dict[str, Dict[str, Any]]:
    """Defaults per command: the top-level keys, overridden by the command's table."""
    common = _normalize(manifest)
    defaults = {}
    for command in commands:
        table = manifest.get(command) or manifest.get(command.replace('-', '_')) or {}
        defaults[command] = {**common, **_normalize(table)}
    return defaults


__all__ = [
    'RunConfig',
    'load_manifest',
    'default_map',
    'default_workers',
]
