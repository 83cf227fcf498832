"""Experiment configuration in a line-oriented ``section.key = value`` format.

Lines are ``# comments``, blanks, or assignments. ``preset = <name>`` selects
the base values (from anywhere in the file); every other key overrides one
field. Unknown keys are errors.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

from .errors import ConfigError, ParameterError
from .model import DuffingParams, GaussianState
from .quantum import Monitor, SpatialGrid, make_grid


@dataclass(frozen=True)
class GridConfig:
    x_min: float = -12.0
    x_max: float = 12.0
    n_exponent: int = 10

    def build(self) -> SpatialGrid:
        return make_grid(self.x_min, self.x_max, self.n_exponent)


@dataclass(frozen=True)
class ScheduleConfig:
    """Time steps are given as steps per drive period."""

    quantum_steps_per_cycle: int = 2000
    classical_steps_per_cycle: int = 1000
    snapshot_cycles: float = 13.37
    observe_every: int = 20


@dataclass(frozen=True)
class HusimiConfig:
    sigma: float = 0.5
    nx: int = 256
    np: int = 256
    window: str = "auto"
    zero_threshold: float = 1e-6
    floor: float = 1e-12


@dataclass(frozen=True)
class EnsembleConfig:
    n: int = 4000
    seed: int = 0
    on_overflow: str = "exclude"


@dataclass(frozen=True)
class PoincareConfig:
    """Stroboscopic section of the trajectory started at the packet centre."""

    count: int = 0
    transient_cycles: int = 100
    phase: float = 0.0


@dataclass(frozen=True)
class OtocConfig:
    cycles: float = 10.0
    samples: int = 80
    steps_per_cycle: int = 400
    fit_window: str = "auto"
    x_min: float = -8.0
    x_max: float = 8.0
    n_exponent: int = 13

    def build_grid(self) -> SpatialGrid:
        return make_grid(self.x_min, self.x_max, self.n_exponent)


@dataclass(frozen=True)
class LyapunovConfig:
    transient_cycles: float = 100.0
    measure_cycles: float = 1000.0
    steps_per_cycle: int = 1000
    tolerance: float = 0.03


@dataclass(frozen=True)
class FreqResponseConfig:
    omega_min: float = 0.2
    omega_max: float = 4.0
    points: int = 381
    damping: str = "linear"


@dataclass(frozen=True)
class OutputsConfig:
    dir: str = "out"
    figures: bool = True
    png: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str = "chaotic-dissipative"
    params: DuffingParams = field(default_factory=DuffingParams)
    initial: GaussianState = field(default_factory=GaussianState)
    grid: GridConfig = field(default_factory=GridConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    husimi: HusimiConfig = field(default_factory=HusimiConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    poincare: PoincareConfig = field(default_factory=PoincareConfig)
    otoc: OtocConfig = field(default_factory=OtocConfig)
    lyapunov: LyapunovConfig = field(default_factory=LyapunovConfig)
    freqresponse: FreqResponseConfig = field(default_factory=FreqResponseConfig)
    monitor: Monitor = field(default_factory=Monitor)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)

    @property
    def quantum_dt(self) -> float:
        return self.params.period / self.schedule.quantum_steps_per_cycle

    @property
    def classical_dt(self) -> float:
        return self.params.period / self.schedule.classical_steps_per_cycle

    @property
    def snapshot_time(self) -> float:
        return self.schedule.snapshot_cycles * self.params.period


# Parameter values are those of the four regime figures. Grids are chosen so
# that the boundary and spectral-edge monitors stay quiet up to 13.37 cycles:
# under dissipation the canonical wavenumber grows like exp(delta t).
PRESETS: dict[str, dict[str, dict[str, Any]]] = {
    "harmonic-dissipative": {
        "params": dict(alpha=1.0, beta=0.0, delta=0.1, gamma=2.5, omega=2.0),
        "grid": dict(x_min=-8.0, x_max=8.0, n_exponent=12),
    },
    "hardening-transient": {
        "params": dict(alpha=1.0, beta=0.25, delta=0.1, gamma=2.5, omega=2.0),
        "grid": dict(x_min=-10.0, x_max=10.0, n_exponent=14),
    },
    "conservative-chaotic": {
        "params": dict(alpha=-1.0, beta=0.25, delta=0.0, gamma=2.5, omega=2.0),
        "grid": dict(x_min=-12.0, x_max=12.0, n_exponent=10),
    },
    "chaotic-dissipative": {
        "params": dict(alpha=-1.0, beta=0.25, delta=0.1, gamma=2.5, omega=2.0),
        "grid": dict(x_min=-10.0, x_max=10.0, n_exponent=14),
    },
}

SECTIONS = [f.name for f in fields(ExperimentConfig) if f.name != "preset"]


def preset_config(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}", key="preset")
    base = ExperimentConfig(preset=name)
    changes = {
        section: replace(getattr(base, section), **values) for section, values in PRESETS[name].items()
    }
    return replace(base, **changes)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(raw: str, like, key: str, line: int | None):
    try:
        if isinstance(like, bool):
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError(raw)
            return low == "true"
        if isinstance(like, int):
            f = float(raw)
            if not f.is_integer():
                raise ValueError(raw)
            return int(f)
        if isinstance(like, float):
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError(raw)
            return v
    except ValueError:
        raise ConfigError(f"cannot read {raw!r} as {type(like).__name__}", line=line, key=key) from None
    return raw


def iter_assignments(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if not key:
            raise ConfigError("missing key", line=lineno)
        yield lineno, key, value


def apply_overrides(cfg: ExperimentConfig, items) -> ExperimentConfig:
    """Apply ``(line, key, value)`` assignments; ``line`` may be ``None``."""
    pending: dict[str, dict[str, Any]] = {}
    seen: dict[str, int | None] = {}
    for line, key, raw in items:
        if key == "preset":
            raise ConfigError("preset must be chosen before overrides", line=line, key=key)
        section, _, name = key.partition(".")
        if section not in SECTIONS or not name:
            raise ConfigError("unknown key", line=line, key=key)
        current = getattr(cfg, section)
        names = {f.name for f in fields(current)}
        if name not in names:
            raise ConfigError("unknown key", line=line, key=key)
        pending.setdefault(section, {})[name] = _coerce(raw, getattr(current, name), key, line)
        seen[key] = line

    changes = {}
    for section, values in pending.items():
        try:
            changes[section] = replace(getattr(cfg, section), **values)
        except ParameterError as exc:
            key = f"{section}.{exc.field}"
            raise ConfigError(str(exc).split(": ", 1)[-1], line=seen.get(key), key=key) from None
    out = replace(cfg, **changes)
    validate(out)
    return out


def validate(cfg: ExperimentConfig):
    checks = [
        ("grid.n_exponent", cfg.grid.n_exponent >= 4, "must be >= 4"),
        ("grid.x_max", cfg.grid.x_max > cfg.grid.x_min, "must exceed grid.x_min"),
        ("otoc.n_exponent", cfg.otoc.n_exponent >= 4, "must be >= 4"),
        ("otoc.x_max", cfg.otoc.x_max > cfg.otoc.x_min, "must exceed otoc.x_min"),
        ("schedule.quantum_steps_per_cycle", cfg.schedule.quantum_steps_per_cycle > 0, "must be > 0"),
        ("schedule.classical_steps_per_cycle", cfg.schedule.classical_steps_per_cycle > 0, "must be > 0"),
        ("schedule.snapshot_cycles", cfg.schedule.snapshot_cycles >= 0, "must be >= 0"),
        ("schedule.observe_every", cfg.schedule.observe_every > 0, "must be > 0"),
        ("husimi.sigma", cfg.husimi.sigma > 0, "must be > 0"),
        ("husimi.nx", cfg.husimi.nx >= 2, "must be >= 2"),
        ("husimi.np", cfg.husimi.np >= 2, "must be >= 2"),
        ("husimi.floor", cfg.husimi.floor > 0, "must be > 0"),
        ("ensemble.n", cfg.ensemble.n >= 1, "must be >= 1"),
        ("ensemble.on_overflow", cfg.ensemble.on_overflow in ("raise", "exclude"), "raise or exclude"),
        ("otoc.samples", cfg.otoc.samples >= 1, "must be >= 1"),
        ("otoc.steps_per_cycle", cfg.otoc.steps_per_cycle > 0, "must be > 0"),
        ("lyapunov.measure_cycles", cfg.lyapunov.measure_cycles > 0, "must be > 0"),
        ("lyapunov.steps_per_cycle", cfg.lyapunov.steps_per_cycle > 0, "must be > 0"),
        ("freqresponse.points", cfg.freqresponse.points >= 1, "must be >= 1"),
        ("freqresponse.omega_min", cfg.freqresponse.omega_min > 0, "must be > 0"),
        ("freqresponse.omega_max", cfg.freqresponse.omega_max >= cfg.freqresponse.omega_min,
         "must be >= freqresponse.omega_min"),
        ("freqresponse.damping", cfg.freqresponse.damping in ("linear", "literal"), "linear or literal"),
        ("monitor.stride", cfg.monitor.stride >= 1, "must be >= 1"),
    ]
    for key, ok, message in checks:
        if not ok:
            raise ConfigError(message, key=key)
    for key, value in (("husimi.window", cfg.husimi.window), ("otoc.fit_window", cfg.otoc.fit_window)):
        try:
            parse_window(value, 4 if key == "husimi.window" else 2)
        except ValueError as exc:
            raise ConfigError(str(exc), key=key) from None


def parse_window(text: str, size: int) -> tuple[float, ...] | None:
    """``"auto"`` or ``size`` comma-separated numbers in increasing pairs."""
    if text.strip() == "auto":
        return None
    parts = [float(s) for s in text.split(",")]
    if len(parts) != size:
        raise ValueError(f"expected 'auto' or {size} comma-separated numbers")
    for lo, hi in zip(parts[::2], parts[1::2]):
        if not hi > lo:
            raise ValueError("window bounds must increase")
    return tuple(parts)


def parse_config(text: str) -> ExperimentConfig:
    items = list(iter_assignments(text))
    presets = [(line, value) for line, key, value in items if key == "preset"]
    if len(presets) > 1:
        raise ConfigError("preset given more than once", line=presets[1][0], key="preset")
    cfg = preset_config(presets[0][1]) if presets else preset_config("chaotic-dissipative")
    return apply_overrides(cfg, [it for it in items if it[1] != "preset"])


def parse_assignment(text: str) -> tuple[str, str]:
    """Split one ``key=value`` command-line override."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, value = (s.strip() for s in text.split("=", 1))
    return key, value


def config_items(cfg: ExperimentConfig) -> list[tuple[str, Any]]:
    items: list[tuple[str, Any]] = [("preset", cfg.preset)]
    for section in SECTIONS:
        for name, value in asdict(getattr(cfg, section)).items():
            items.append((f"{section}.{name}", value))
    return items


def serialize_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{key} = {_format(value)}\n" for key, value in config_items(cfg))
