"""Experiment configuration: a flat human-readable key = value file with
command-line overrides and a canonical serialization that round-trips.

Supported value syntax: integers, floats, booleans, double-quoted strings,
and flat lists like [0, 0.1, 0.2]. Lines starting with # are comments.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

EXPERIMENTS = (
    "student-t-online",
    "dirichlet-online",
    "simplex-compare",
    "flow-equivalence",
    "geodesic-check",
    "lyapunov-suite",
)


class ConfigError(Exception):
    """Invalid configuration; the CLI maps this to exit code 2."""


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    out: str = "runs"
    delta_schedule: str = "1/k"

    # online estimation
    n_steps: int = 10000
    n_traj: int = 10

    # Student-t model
    nu: float = 3.0
    mu_star: float = 0.0
    sigma_star: float = 1.0
    mu0: float = 1.0
    sigma0: float = 2.0

    # Dirichlet perturbation model
    dim: int = 50
    lam: float = -0.3
    truth_concentration: float = 5.0

    # simplex comparison
    n: int = 20
    alpha_list: list = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(10)])
    target: str = "barycenter"
    target_a: float = 1.0
    n_inits: int = 12

    # diagnostics
    dt: float = 1e-4
    t_end: float = 1.0

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; "
                              f"choose one of {', '.join(EXPERIMENTS)}")
        if self.n_steps < 0 or self.n_traj < 1 or self.n_inits < 1:
            raise ConfigError("counts must be positive")
        if self.experiment == "student-t-online" and self.nu <= 0:
            raise ConfigError("nu must be positive")
        if self.experiment == "dirichlet-online":
            if not self.lam < 0:
                raise ConfigError("dirichlet-online requires lam < 0")
            if self.dim < 1:
                raise ConfigError("dim must be >= 1")
        if self.experiment == "simplex-compare":
            if self.n < 2:
                raise ConfigError("simplex size n must be >= 2")
            if self.target not in ("barycenter", "dirichlet"):
                raise ConfigError("target must be 'barycenter' or 'dirichlet'")
            if any(a >= 1.0 for a in self.alpha_list):
                raise ConfigError("alpha values must be < 1")
        if self.experiment in ("flow-equivalence", "geodesic-check", "lyapunov-suite"):
            if self.dt <= 0 or self.t_end <= 0:
                raise ConfigError("dt and t_end must be positive")
        return self


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_format_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize value {v!r}")


def _parse_value(text: str):
    text = text.strip()
    if not text:
        raise ConfigError("empty value")
    if text.startswith('"') and text.endswith('"'):
        return text[1:-1].replace('\\"', '"')
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return [] if not inner else [_parse_value(x) for x in inner.split(",")]
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text  # bare string


def canonical_dumps(config: ExperimentConfig) -> str:
    """Deterministic serialization: sorted keys, one per line."""
    data = dataclasses.asdict(config)
    lines = [f"{k} = {_format_value(data[k])}" for k in sorted(data)]
    return "\n".join(lines) + "\n"


def parse_config(text: str, defaults: Optional[dict] = None) -> ExperimentConfig:
    data = dict(defaults or {})
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        data[key] = _parse_value(value)
    return _build(data)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _build(data: dict) -> ExperimentConfig:
    if "experiment" not in data:
        raise ConfigError("config must set 'experiment'")
    coerced = {}
    for key, value in data.items():
        f = _FIELDS[key]
        if f.type in ("int",) and isinstance(value, bool):
            raise ConfigError(f"{key}: expected a number")
        if f.type == "float" and isinstance(value, int):
            value = float(value)
        if f.type == "int" and isinstance(value, float):
            if value != int(value):
                raise ConfigError(f"{key}: expected an integer")
            value = int(value)
        if f.type == "list" and not isinstance(value, list):
            raise ConfigError(f"{key}: expected a list")
        coerced[key] = value
    try:
        cfg = ExperimentConfig(**coerced)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def apply_overrides(config: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply 'key=value' strings from the command line."""
    data = dataclasses.asdict(config)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"unknown override key {key!r}")
        data[key] = _parse_value(value)
    return _build(data)


def delta_schedule(spec: str, dim: int = 1):
    """Parse a learning-rate schedule. Forms: '1/k', 'c/k', '1/sqrt(k)',
    'c/sqrt(k)', '1/(d*sqrt(k))' (d bound to ``dim``), 'const:c'."""
    spec = spec.strip().replace(" ", "")
    if spec.startswith("const:"):
        c = float(spec[len("const:"):])
        return lambda k: c
    if spec == "1/(d*sqrt(k))":
        return lambda k: 1.0 / (dim * k ** 0.5)
    if spec.endswith("/k"):
        c = float(spec[:-2]) if spec[:-2] != "1" else 1.0
        return lambda k: c / k
    if spec.endswith("/sqrt(k)"):
        head = spec[: -len("/sqrt(k)")]
        c = float(head) if head != "1" else 1.0
        return lambda k: c / k ** 0.5
    raise ConfigError(f"unrecognized delta schedule {spec!r}")
