"""Run configuration for sg-waves: dotted-key YAML files merged with command-line flags."""

import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union, get_args, get_origin

import yaml

from sgwaves.errors import CflError, ConfigError, ParameterError
from sgwaves.model import Params

COMMANDS = (
    "equilibria",
    "kink-mu",
    "kink-profile",
    "array",
    "half-array",
    "pair",
    "periods",
    "pde-run",
    "sweep",
)
PDE_PROFILES = ("kink", "antikink", "closed-form", "array", "pair", "static-stable", "static-unstable")
OUTPUT_ENV = "SGWAVES_OUTPUT_DIR"


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV, "sgwaves-output")


@dataclass
class OdeOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    horizon: float = 1e4


@dataclass
class ShootOptions:
    delta: float = 1e-8
    tol: float = 1e-12
    connection_tol: float = 1e-9
    mu_hi: float = 1.0


@dataclass
class ArrayOptions:
    gp0: float = 1.0
    period: Optional[float] = None
    tol: float = 1e-10
    m: int = 1
    horizon: float = 500.0


@dataclass
class PairOptions:
    samples: int = 2001
    velocity: Optional[float] = None


@dataclass
class PeriodOptions:
    energies: List[float] = field(default_factory=lambda: [-0.5, 0.0, 0.5, 3.0])
    method: str = "agm"


@dataclass
class PdeOptions:
    profile: str = "kink"
    dx: float = 0.05
    dt: float = 0.04
    t_end: float = 200.0
    domain: str = "line"
    left: float = -40.0
    right: float = 40.0
    x0: float = -20.0
    m: int = 1
    cadence: float = 1.0
    transient: float = 0.2
    velocity: Optional[float] = None
    perturb: float = 0.0
    snapshot: bool = True


@dataclass
class SweepOptions:
    gammas: List[float] = field(default_factory=lambda: [0.02, 0.01, 0.005])
    alphas: List[float] = field(default_factory=list)
    workers: int = 1


@dataclass
class OutputOptions:
    dir: str = field(default_factory=default_output_dir)
    format: str = "csv"
    name: Optional[str] = None


SECTIONS = {
    "ode": OdeOptions,
    "shoot": ShootOptions,
    "array": ArrayOptions,
    "pair": PairOptions,
    "periods": PeriodOptions,
    "pde": PdeOptions,
    "sweep": SweepOptions,
    "output": OutputOptions,
}


def _coerce(tp, value: Any, key: str) -> Any:
    origin = get_origin(tp)
    if origin is Union:
        if value is None:
            return None
        inner = [t for t in get_args(tp) if t is not type(None)]
        return _coerce(inner[0], value, key)
    if origin in (list, List):
        (item,) = get_args(tp) or (float,)
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split() if v]
        if not isinstance(value, (list, tuple)):
            value = [value]
        return [_coerce(item, v, key) for v in value]
    try:
        if tp is bool:
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if tp is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if tp is float:
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        if tp is str:
            return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for {key}: {value!r}")
    return value


def _flatten(data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


@dataclass
class RunConfig:
    """Configuration class for sg-waves runs."""

    command: Optional[str] = None
    gamma: float = 0.1
    alpha: float = 0.0
    k: int = 0
    log_level: str = "INFO"
    log_file: Optional[str] = None
    ode: OdeOptions = field(default_factory=OdeOptions)
    shoot: ShootOptions = field(default_factory=ShootOptions)
    array: ArrayOptions = field(default_factory=ArrayOptions)
    pair: PairOptions = field(default_factory=PairOptions)
    periods: PeriodOptions = field(default_factory=PeriodOptions)
    pde: PdeOptions = field(default_factory=PdeOptions)
    sweep: SweepOptions = field(default_factory=SweepOptions)
    output: OutputOptions = field(default_factory=OutputOptions)

    @classmethod
    def from_file(cls, config_path: str) -> "RunConfig":
        """Load configuration from a YAML file (flat dotted keys or nested sections)."""
        path = Path(config_path)

        if not path.exists():
            raise ConfigError(f"Config file not found: {config_path}")

        try:
            with open(path, "r") as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"malformed config file {config_path}: {e}")
        if not isinstance(data, dict):
            raise ConfigError(f"config file {config_path} must hold a mapping")
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """Create config from a dictionary; unknown keys raise ConfigError."""
        config = cls()
        config.update(data)
        return config

    def update(self, values: Dict[str, Any]) -> "RunConfig":
        """Set dotted keys in place, e.g. {"pde.dx": 0.05}."""
        for key, value in _flatten(values).items():
            section, _, name = key.rpartition(".")
            if section:
                if section not in SECTIONS:
                    raise ConfigError(f"unknown config section: {section}")
                target = getattr(self, section)
            else:
                target = self
                if name in SECTIONS:
                    raise ConfigError(f"section {name} needs dotted keys, got {value!r}")
            types = {f.name: f.type for f in fields(target)}
            if name not in types:
                raise ConfigError(f"unknown config key: {key}")
            setattr(target, name, _coerce(types[name], value, key))
        return self

    def to_dict(self) -> Dict[str, Any]:
        """Convert config to a flat dictionary of dotted keys."""
        flat: Dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in SECTIONS:
                for inner in fields(value):
                    item = getattr(value, inner.name)
                    flat[f"{f.name}.{inner.name}"] = list(item) if isinstance(item, list) else item
            else:
                flat[f.name] = value
        return flat

    @property
    def params(self) -> Params:
        """Physical parameters with gamma folded onto [0, 1)."""
        return Params(abs(self.gamma), self.alpha)

    def validate(self) -> "RunConfig":
        """Check every solver precondition before dispatch.

        Raises:
            ParameterError: a value outside its admissible range.
            ConfigError: an unknown command or format.
        """
        if self.command is not None and self.command not in COMMANDS:
            raise ConfigError(f"unknown command: {self.command}")
        Params(abs(self.gamma), self.alpha)
        if self.ode.rtol <= 0 or self.ode.atol <= 0 or self.ode.horizon <= 0:
            raise ParameterError("ode.rtol, ode.atol and ode.horizon must be positive")
        if not 0 < self.shoot.delta <= 1e-4:
            raise ParameterError(f"shoot.delta must lie in (0, 1e-4], got {self.shoot.delta}")
        if self.shoot.tol < 1e-13:
            raise ParameterError(f"shoot.tol must be >= 1e-13, got {self.shoot.tol}")
        if self.shoot.connection_tol <= 0 or self.shoot.mu_hi <= 0:
            raise ParameterError("shoot.connection_tol and shoot.mu_hi must be positive")
        if not self.array.gp0 > 0:
            raise ParameterError(f"array.gp0 must be positive, got {self.array.gp0}")
        if self.array.period is not None and not self.array.period > 0:
            raise ParameterError(f"array.period must be positive, got {self.array.period}")
        if self.array.m < 1:
            raise ParameterError(f"array.m must be >= 1, got {self.array.m}")
        if self.pair.samples < 5:
            raise ParameterError(f"pair.samples must be >= 5, got {self.pair.samples}")
        velocity = self.pair.velocity
        if velocity is not None and not (math.isfinite(velocity) and abs(velocity) < 1):
            raise ParameterError(f"pair.velocity must be subluminal, got {velocity}")
        if self.periods.method not in ("agm", "quadrature"):
            raise ConfigError(f"unknown period method: {self.periods.method}")
        self._validate_pde()
        for gamma in self.sweep.gammas:
            if not 0 < gamma < 1:
                raise ParameterError(f"sweep gammas must lie in (0, 1), got {gamma}")
        if self.sweep.workers < 1:
            raise ParameterError(f"sweep.workers must be >= 1, got {self.sweep.workers}")
        if self.output.format not in ("csv", "json"):
            raise ConfigError(f"output.format must be csv or json, got {self.output.format}")
        return self

    def _validate_pde(self):
        pde = self.pde
        if pde.profile not in PDE_PROFILES:
            raise ConfigError(f"pde.profile must be one of {', '.join(PDE_PROFILES)}")
        if pde.domain not in ("line", "circle"):
            raise ConfigError(f"pde.domain must be line or circle, got {pde.domain}")
        if pde.dx <= 0 or pde.dt <= 0 or pde.t_end <= 0 or pde.cadence <= 0:
            raise ParameterError("pde.dx, pde.dt, pde.t_end and pde.cadence must be positive")
        if pde.dt > 0.9 * pde.dx:
            raise CflError(f"pde.dt={pde.dt} violates dt <= 0.9 dx = {0.9 * pde.dx:.6g}")
        if pde.domain == "line" and not pde.left < pde.right:
            raise ParameterError(f"pde.left must be < pde.right, got [{pde.left}, {pde.right}]")
        if not 0 <= pde.transient < 1:
            raise ParameterError(f"pde.transient must lie in [0, 1), got {pde.transient}")
        if pde.velocity is not None and not (math.isfinite(pde.velocity) and abs(pde.velocity) < 1):
            raise ParameterError(f"pde.velocity must be subluminal, got {pde.velocity}")
        if pde.m < 1:
            raise ParameterError(f"pde.m must be >= 1, got {pde.m}")


def get_default_config_path() -> str:
    """Get the default configuration file path."""
    return os.path.join(os.path.expanduser("~"), ".config", "sg-waves", "config.yaml")


def create_default_config(path: str) -> RunConfig:
    """Create a default configuration file."""
    config = RunConfig()
    config_path = Path(path)
    config_path.parent.mkdir(parents=True, exist_ok=True)

    with open(config_path, "w") as f:
        yaml.dump(config.to_dict(), f, default_flow_style=False, sort_keys=False)

    return config
