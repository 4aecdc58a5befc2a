"""Experiment configuration: ``key = value`` files, overrides, JSON round trip."""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError

MODES = ("doim", "plain-otfs")


def parse_grid(text: str) -> tuple:
    """``"0:2:16"`` (inclusive start:step:stop) or ``"0, 5, 10"``."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        try:
            start, step, stop = (float(v) for v in text.split(":"))
        except ValueError:
            raise ConfigError(f"bad grid {text!r}, expected start:step:stop") from None
        if step <= 0 or stop < start:
            raise ConfigError(f"bad grid {text!r}")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(round(start + i * step, 12)) for i in range(n))
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"bad list {text!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    # frame layout
    m: int = 64
    n: int = 32
    m_hat: int = 4
    n_hat: int = 4
    k_hat: int = 1
    mc: int = 4
    # physical layer
    carrier_freq: float = 4e9
    delta_f: float = 15e3
    rolloff: float = 0.4
    n_paths: int = 4
    velocity_kmh: float = 300.0
    tau_max_samples: float = 4.0
    # sweep and budget
    snr_db: tuple = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0)
    min_frames: int = 400
    min_bit_errors: int = 200
    max_frames: int = 4000
    chunk_frames: int = 8
    # detector
    damping: float = 0.4
    rho: float = 0.1
    n_iter_max: int = 10
    energy_keep: float = 0.9999
    # other sweeps
    eps_grid: tuple = (0.0, 0.025, 0.05)
    paths_grid: tuple = (2.0, 5.0)
    velocities: tuple = (300.0, 1000.0)
    converge_iter_max: int = 30
    seed: int = 0
    mode: str = "doim"

    def __post_init__(self):
        problems = []
        for name in ("m", "n", "m_hat", "n_hat", "k_hat", "mc", "n_paths", "min_frames",
                     "max_frames", "chunk_frames", "n_iter_max", "converge_iter_max"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive")
        for name in ("carrier_freq", "delta_f"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        if self.velocity_kmh < 0 or self.tau_max_samples < 0 or self.min_bit_errors < 0:
            problems.append("velocity, delay spread and error budget must be non-negative")
        if not 0 <= self.rolloff <= 1:
            problems.append("rolloff must lie in [0, 1]")
        if not self.snr_db:
            problems.append("snr_db grid is empty")
        elif list(self.snr_db) != sorted(self.snr_db):
            problems.append("snr_db grid must be sorted")
        if any(e < 0 for e in self.eps_grid):
            problems.append("eps_grid values must be non-negative")
        if any(p < 1 for p in self.paths_grid):
            problems.append("paths_grid values must be >= 1")
        if not 0 < self.damping <= 1:
            problems.append("damping must lie in (0, 1]")
        if not 0 < self.rho < 1:
            problems.append("rho must lie in (0, 1)")
        if not 0 < self.energy_keep <= 1:
            problems.append("energy_keep must lie in (0, 1]")
        if self.mode not in MODES:
            problems.append(f"mode must be one of {MODES}")
        if self.max_frames < self.min_frames:
            problems.append("max_frames must be >= min_frames")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def Ts(self) -> float:
        return 1.0 / (self.m * self.delta_f)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _coerce(key: str, value):
    f = _FIELDS[key]
    default = f.default
    try:
        if isinstance(default, tuple):
            return parse_grid(value) if isinstance(value, str) else tuple(float(v) for v in value)
        if isinstance(default, bool):
            return str(value).lower() in ("1", "true", "yes")
        if isinstance(default, int):
            fv = float(value)
            if fv != int(fv):
                raise ValueError
            return int(fv)
        if isinstance(default, float):
            return float(value)
        return str(value).strip()
    except (TypeError, ValueError):
        raise ConfigError(f"cannot parse {key} = {value!r}") from None


def from_mapping(values: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    unknown = sorted(set(values) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    base = ExperimentConfig() if base is None else base
    return base.replace(**{k: _coerce(k, v) for k, v in values.items()})


def read_key_values(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = value
    return out


def parse_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Resolve a config from an optional file plus overrides (overrides win).

    Every key has a default, so nothing is required; keys left out take the
    defaults of :class:`ExperimentConfig`.
    """
    values = read_key_values(path) if path is not None else {}
    values.update(overrides or {})
    return from_mapping(values)


def load_sidecar(path) -> ExperimentConfig:
    with open(path) as fh:
        return from_mapping(json.load(fh)["config"])
