from __future__ import annotations

import difflib
import json
import logging
import os
from dataclasses import dataclass, fields, replace
from typing import Any, Callable, Literal, Optional, Union

import yaml  # type: ignore[import]

from .coupling import Coupling, t_star
from .equilibrium import AUTO_FRACTION, DEFAULT_SAFETY, GameConfig
from .exceptions import (
    ConfigKeyError,
    InvalidGameConfigError,
    UnsupportedConfigFormatError,
)
from .measures import PAPER_GRID_SIZE, PAPER_SUPPORT

logger = logging.getLogger(__name__)

Command = Literal["solve", "iterate", "stability", "reproduce"]

COMMANDS = ("solve", "iterate", "stability", "reproduce")
_COMMAND_ALIASES = {"reproduce-4": "reproduce", "reproduce-§4": "reproduce"}
_FLAT_EXTENSIONS = (".cfg", ".conf", ".txt")


@dataclass(frozen=True)
class RunConfig:
    """Everything a batch run needs.

    Parameters
    ----------
    command :class:`Command`:
        `solve` a single round, `iterate` the game, analyse `stability` of a
        fixed point or `reproduce` the four reference experiments

    distribution :class:`str` [Optional]:
        Initial population, a distribution name or `all` for `reproduce`;
        unset means `all` for `reproduce` and `uniform` otherwise

    measure_path :class:`str` [Optional]:
        A `position,weight` CSV used instead of `distribution`

    t :class:`float | 'auto'`:
        Round horizon; `auto` is 0.9 t*

    coalesce_eps, cluster_gap :class:`float` [Optional]:
        Default to half the grid spacing and a quarter of the support radius

    inner_tolerance :class:`str`:
        How tightly each Picard sweep is solved, see `GameConfig`

    trajectory_stride :class:`int`:
        Every how many rounds positions are written to `trajectory.csv`
    """

    command: Command = "iterate"
    distribution: Optional[str] = None
    measure_path: Optional[str] = None
    n: int = PAPER_GRID_SIZE
    support_min: float = PAPER_SUPPORT[0]
    support_max: float = PAPER_SUPPORT[1]
    coupling: str = "bump"
    t: Union[float, Literal["auto"]] = "auto"
    safety: float = DEFAULT_SAFETY
    max_rounds: int = 5000
    coalesce_eps: Optional[float] = None
    cluster_gap: Optional[float] = None
    stall_tol: Optional[float] = None
    picard_tol: float = 1e-10
    newton_tol: float = 1e-14
    max_picard_iters: int = 10_000
    max_newton_iters: int = 100
    inner_tolerance: str = "tight"
    workers: int = 1
    show_progress: bool = False
    output_dir: str = "out"
    seed: int = 0
    trajectory_stride: int = 1

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigKeyError("command", f"expected one of {', '.join(COMMANDS)}, got '{self.command}'")
        for key in ("n", "max_rounds", "max_picard_iters", "max_newton_iters", "workers", "trajectory_stride"):
            if getattr(self, key) < 1:
                raise ConfigKeyError(key, f"must be at least 1, got {getattr(self, key)}")
        if not self.support_min < self.support_max:
            raise ConfigKeyError("support_min", "must be below support_max")
        if self.t != "auto" and not self.t > 0:
            raise ConfigKeyError("t", f"must be positive or 'auto', got {self.t}")
        if not 0.0 < self.safety < 1.0:
            raise ConfigKeyError("safety", f"must lie in (0, 1), got {self.safety}")
        if self.inner_tolerance not in ("budget", "tight"):
            raise ConfigKeyError("inner_tolerance", f"expected 'budget' or 'tight', got '{self.inner_tolerance}'")
        for key in ("coalesce_eps", "cluster_gap", "stall_tol", "picard_tol", "newton_tol"):
            value = getattr(self, key)
            if value is not None and not value > 0:
                raise ConfigKeyError(key, f"must be positive, got {value}")

    @property
    def support(self) -> tuple[float, float]:
        return (self.support_min, self.support_max)

    def resolved_distribution(self) -> str:
        if self.distribution is not None:
            return self.distribution
        return "all" if self.command == "reproduce" else "uniform"

    def grid_spacing(self) -> float:
        return (self.support_max - self.support_min) / max(self.n - 1, 1)

    def resolved_coalesce_eps(self) -> float:
        return self.coalesce_eps if self.coalesce_eps is not None else 0.5 * self.grid_spacing()

    def resolved_cluster_gap(self, c: Coupling) -> float:
        return self.cluster_gap if self.cluster_gap is not None else 0.25 * c.support_radius

    def to_game_config(self, c: Coupling) -> GameConfig:
        """Builds the solver configuration for `c`.

        Raises
        ------
        `ConfigKeyError`
            When `t` exceeds t*(c, safety)
        """
        limit = t_star(c, self.safety)
        t = AUTO_FRACTION * limit if self.t == "auto" else float(self.t)
        if t > limit:
            raise ConfigKeyError("t", f"{t} exceeds t* = {limit} for coupling '{c.name}'")
        try:
            return GameConfig(
                t,
                c.lambda1,
                c.lipschitz_L1,
                c.sup_phi_prime,
                newton_tol=self.newton_tol,
                picard_tol=self.picard_tol,
                max_newton_iters=self.max_newton_iters,
                max_picard_iters=self.max_picard_iters,
                inner_tolerance=self.inner_tolerance,  # type: ignore[arg-type]
                workers=self.workers,
            )
        except InvalidGameConfigError as e:
            raise ConfigKeyError("t", e.reason) from e

    def with_overrides(self, overrides: dict[str, Any]) -> RunConfig:
        """Gets a copy with every non-None value of `overrides` applied."""
        present = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **_coerce_all(present))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunConfig:
        return cls(**_coerce_all(data or {}))


def _to_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _to_int(value: Any) -> int:
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise ValueError(f"not an integer: {value!r}")
    return int(value)


def _to_optional_float(value: Any) -> Optional[float]:
    if value is None or str(value).strip().lower() in ("", "none", "auto"):
        return None
    return float(value)


def _to_horizon(value: Any) -> Union[float, str]:
    if str(value).strip().lower() == "auto":
        return "auto"
    return float(value)


def _to_command(value: Any) -> str:
    name = str(value).strip().lower()
    return _COMMAND_ALIASES.get(name, name)


def _to_optional_str(value: Any) -> Optional[str]:
    return None if value is None or str(value).strip() == "" else str(value).strip()


_CONVERTERS: dict[str, Callable[[Any], Any]] = {
    "command": _to_command,
    "distribution": _to_optional_str,
    "measure_path": _to_optional_str,
    "n": _to_int,
    "support_min": float,
    "support_max": float,
    "coupling": lambda v: str(v).strip(),
    "t": _to_horizon,
    "safety": float,
    "max_rounds": _to_int,
    "coalesce_eps": _to_optional_float,
    "cluster_gap": _to_optional_float,
    "stall_tol": _to_optional_float,
    "picard_tol": float,
    "newton_tol": float,
    "max_picard_iters": _to_int,
    "max_newton_iters": _to_int,
    "inner_tolerance": lambda v: str(v).strip().lower(),
    "workers": _to_int,
    "show_progress": _to_bool,
    "output_dir": lambda v: str(v).strip(),
    "seed": _to_int,
    "trajectory_stride": _to_int,
}
_ALIASES = {"out": "output_dir", "rounds": "max_rounds", "measure": "measure_path"}


def _normalize_key(key: str) -> str:
    """Maps a raw key onto a field name, accepting `-` for `_`.

    Raises
    ------
    `ConfigKeyError`
        When the key matches no field; the closest field is suggested
    """
    name = str(key).strip().lower().replace("-", "_")
    name = _ALIASES.get(name, name)
    if name in _CONVERTERS:
        return name
    close = difflib.get_close_matches(name, list(_CONVERTERS), n=1)
    hint = f", did you mean '{close[0]}'?" if close else ""
    raise ConfigKeyError(str(key), f"unknown key{hint}")


def _coerce_all(data: dict[str, Any]) -> dict[str, Any]:
    out = {}
    for raw_key, value in data.items():
        key = _normalize_key(raw_key)
        try:
            out[key] = _CONVERTERS[key](value)
        except (TypeError, ValueError) as e:
            raise ConfigKeyError(str(raw_key), f"bad value {value!r} ({e})") from e
    return out


def _read_flat(filepath: str) -> dict[str, str]:
    """Reads `key = value` lines; `#` starts a comment."""
    data = {}
    with open(filepath, "r") as f:
        for lineno, line in enumerate(f, start=1):
            content = line.split("#", 1)[0].strip()
            if not content:
                continue
            if "=" not in content:
                raise ConfigKeyError(f"line {lineno}", f"expected 'key = value', got '{content}'")
            key, value = (part.strip() for part in content.split("=", 1))
            data[key] = value
    return data


def read_config_data(filepath: str) -> dict[str, Any]:
    """Reads the raw key-value data of a configuration file, choosing the
    parser by extension.

    Raises
    ------
    `UnsupportedConfigFormatError`
        When the extension is not one of .yaml, .yml, .json, .cfg, .conf, .txt

    `FileNotFoundError`
        When the file at the filepath does not exist
    """
    _, extension = os.path.splitext(filepath)
    extension = extension.lower()

    if extension == ".json":
        with open(filepath, "r") as f:
            data = json.load(f)
    elif extension in [".yaml", ".yml"]:
        with open(filepath, "r") as f:
            data = yaml.safe_load(f)
    elif extension in _FLAT_EXTENSIONS:
        data = _read_flat(filepath)
    else:
        raise UnsupportedConfigFormatError(extension)

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigKeyError("<root>", f"expected a mapping, got {type(data).__name__}")
    return data


def load_config(filepath: str) -> RunConfig:
    """Loads a `RunConfig` from a YAML, JSON or flat `key = value` file.

    Example
    -------
    ```py
    cfg = load_config("run.yaml")
    cfg = cfg.with_overrides({"max_rounds": 200})
    ```
    """
    config = RunConfig.from_dict(read_config_data(filepath))
    logger.debug("Loaded %s from '%s'", config, filepath)
    return config


def write_config(filepath: str, config: RunConfig) -> None:
    """Writes the full configuration next to the results of a run."""
    data = {f.name: getattr(config, f.name) for f in fields(config)}
    _, extension = os.path.splitext(filepath)
    if extension == ".json":
        with open(filepath, "w") as f:
            json.dump(data, f, indent=4)
    elif extension in [".yaml", ".yml"]:
        with open(filepath, "w") as f:
            yaml.safe_dump(data, f, sort_keys=False)
    else:
        raise UnsupportedConfigFormatError(extension)
