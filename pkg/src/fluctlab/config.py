"""Experiment configuration: validation, text round-trip, hashing.

The on-disk format is line-oriented ``key = value`` text whose keys
mirror the ExperimentConfig field names exactly. Parsing then
serializing then parsing is the identity on configurations. The
experiment hash covers every field except ``outputs`` (where files land
is environment, not experiment identity, and byte-identical outputs
across output directories is part of the determinism contract).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .ensembles import EntryLaw, LAWS, law_from_name
from .errors import ConfigError
from .observables import (
    Contour,
    TestFunction,
    default_resolvent_grid,
    DEFAULT_KAPPA,
)

_MASK64 = (1 << 64) - 1

_FIELD_ORDER = ("law", "n_values", "replicates", "master_seed", "functions",
                "z_grid", "contour", "kappa", "outputs")


def g17(x: float) -> str:
    """Fixed 17-significant-digit float formatting (round-trips float64)."""
    return format(float(x), ".17g")


def format_complex(c: complex) -> str:
    """Serialize a complex number so complex() parses it back exactly."""
    c = complex(c)
    return f"{c.real:.17g}{c.imag:+.17g}j"


def _default_functions() -> tuple:
    return (TestFunction((0j, 1 + 0j)), TestFunction((0j, 0j, 1 + 0j)))


def _default_grid() -> tuple:
    return tuple(complex(z) for z in default_resolvent_grid())


@dataclass
class ExperimentConfig:
    """Everything that defines one Monte Carlo experiment.

    ``outputs`` names the directory where the sampling step persists its
    records; every other field defines the experiment itself.
    """

    law: EntryLaw = LAWS["complex-gaussian"]
    n_values: tuple = (64,)
    replicates: int = 100
    master_seed: int = 0
    functions: tuple = field(default_factory=_default_functions)
    z_grid: tuple = field(default_factory=_default_grid)
    contour: Contour = Contour(5.0, 512)
    kappa: float = DEFAULT_KAPPA
    outputs: str = "out"

    def __post_init__(self):
        self.n_values = tuple(int(n) for n in self.n_values)
        self.functions = tuple(self.functions)
        self.z_grid = tuple(complex(z) for z in self.z_grid)
        if not isinstance(self.law, EntryLaw):
            self.law = law_from_name(str(self.law))
        if self.replicates < 2:
            raise ConfigError("replicates must be at least 2")
        if not self.n_values or any(n < 2 for n in self.n_values):
            raise ConfigError("every matrix size in n_values must be >= 2")
        if not 0 <= self.master_seed <= _MASK64:
            raise ConfigError("master_seed must fit in 64 bits")
        if not self.functions:
            raise ConfigError("at least one test function is required")
        if not self.z_grid or any(abs(z) <= 1.0 for z in self.z_grid):
            raise ConfigError("z_grid points must satisfy |z| > 1")
        if not self.kappa > 2.0:
            raise ConfigError("kappa must exceed 2")


def _parse_complex(token: str) -> complex:
    try:
        return complex(token.strip())
    except ValueError:
        raise ConfigError(f"cannot parse complex number {token.strip()!r}") \
            from None


def _parse_value(key: str, val: str):
    if key == "law":
        try:
            return law_from_name(val)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if key == "n_values":
        return tuple(int(t) for t in val.split(","))
    if key in ("replicates", "master_seed"):
        return int(val)
    if key == "functions":
        funcs = []
        for part in val.split(";"):
            coeffs = tuple(_parse_complex(t) for t in part.split(","))
            funcs.append(TestFunction(coeffs))
        return tuple(funcs)
    if key == "z_grid":
        return tuple(_parse_complex(t) for t in val.split(","))
    if key == "contour":
        tokens = val.split(",")
        if len(tokens) != 2:
            raise ConfigError("contour expects 'radius, node_count'")
        try:
            return Contour(float(tokens[0]), int(tokens[1]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if key == "kappa":
        return float(val)
    if key == "outputs":
        return val
    raise ConfigError(f"unknown configuration key {key!r}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines; '#' starts a comment line.

    Missing keys take defaults; unknown or duplicate keys are errors.
    """
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _FIELD_ORDER:
            raise ConfigError(
                f"line {lineno}: unknown configuration key {key!r}")
        if key in kwargs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            kwargs[key] = _parse_value(key, val)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return ExperimentConfig(**kwargs)


def read_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    return parse_config(text)


def _serialize_value(cfg: ExperimentConfig, key: str) -> str:
    if key == "law":
        return cfg.law.name
    if key == "n_values":
        return ", ".join(str(n) for n in cfg.n_values)
    if key == "replicates":
        return str(cfg.replicates)
    if key == "master_seed":
        return str(cfg.master_seed)
    if key == "functions":
        return " ; ".join(
            ", ".join(format_complex(c) for c in f.coefficients)
            for f in cfg.functions)
    if key == "z_grid":
        return ", ".join(format_complex(z) for z in cfg.z_grid)
    if key == "contour":
        return f"{g17(cfg.contour.radius)}, {cfg.contour.node_count}"
    if key == "kappa":
        return g17(cfg.kappa)
    if key == "outputs":
        return cfg.outputs
    raise KeyError(key)


def serialize_config(cfg: ExperimentConfig, include_outputs: bool = True) -> str:
    keys = [k for k in _FIELD_ORDER if include_outputs or k != "outputs"]
    return "\n".join(f"{k} = {_serialize_value(cfg, k)}" for k in keys) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    """Hex digest identifying the experiment (outputs path excluded)."""
    canonical = serialize_config(cfg, include_outputs=False)
    return hashlib.sha256(canonical.encode()).hexdigest()
