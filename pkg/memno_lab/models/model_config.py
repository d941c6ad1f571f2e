from dataclasses import asdict, fields
from typing import Dict, Optional

from memno_lab.errors import ConfigError
from memno_lab.modules import file
from memno_lab.types import ModelConfig


# base configuration
base_config = {
    "hidden": 32,
    "expanded": 128,
    "state_dim": 16,
    "dt_min": 1e-3,
    "dt_max": 1e-1,
}

# memoryless baseline, four FFNO layers
markovian_config = {
    **base_config,
    "layers": "SSSS",
}

# memory layer between the second and third FFNO layers
memory_config = {
    **base_config,
    "layers": "SSTSS",
}

# memoryless model fed the last four states instead of a memory layer
multi_input_config = {
    **markovian_config,
    "multi_input_k": 4,
}

ks_config = {**memory_config, "dim": 1}
burgers_config = {**memory_config, "dim": 1}
ns_config = {**memory_config, "dim": 2}

PRESETS: Dict[str, dict] = {
    "markovian": markovian_config,
    "memory": memory_config,
    "multi_input": multi_input_config,
    "ks": ks_config,
    "burgers": burgers_config,
    "ns": ns_config,
}

# short names used on the command line
ALIASES = {"SSSS": "markovian", "SSTSS": "memory", "ffno": "markovian", "s4ffno": "memory"}


def preset(name: str, **overrides) -> ModelConfig:
    """Builds a ModelConfig from a named preset or a raw layer string."""

    key = ALIASES.get(name, name)
    if key in PRESETS:
        return ModelConfig(**{**PRESETS[key], **overrides})
    if set(name) <= {"S", "T"} and name:
        return ModelConfig(**{**base_config, "layers": name, **overrides})
    raise ConfigError(f"unknown model preset {name!r}, expected one of {sorted(PRESETS)} or a layer string")


def bind_modes(config: ModelConfig, resolution: int) -> int:
    return resolution // 2 if config.modes is None else config.modes


def validate(config: ModelConfig, resolution: Optional[int] = None):
    """Checks a config against itself and, when given, the input resolution.

    Raises:
        ConfigError: On a layer string without S or with letters outside
            {S, T}, a non-positive size, a bad dimension or window, or more
            modes than the resolution can carry.
    """

    if "S" not in config.layers:
        raise ConfigError(f"layer string {config.layers!r} needs at least one S layer")
    unknown = set(config.layers) - {"S", "T"}
    if unknown:
        raise ConfigError(f"layer string {config.layers!r} has unknown letters {sorted(unknown)}")
    for name in ("hidden", "expanded", "state_dim"):
        if getattr(config, name) <= 0:
            raise ConfigError(f"{name} must be positive, got {getattr(config, name)}")
    if config.modes is not None and config.modes <= 0:
        raise ConfigError(f"modes must be positive, got {config.modes}")
    if config.dim not in (1, 2):
        raise ConfigError(f"dim must be 1 or 2, got {config.dim}")
    for name in ("window", "reset_interval", "multi_input_k"):
        if getattr(config, name) < 0:
            raise ConfigError(f"{name} must be >= 0, got {getattr(config, name)}")
    if not 0 < config.dt_min <= config.dt_max:
        raise ConfigError(f"need 0 < dt_min <= dt_max, got {config.dt_min}, {config.dt_max}")
    if resolution is not None and config.modes is not None and config.modes > resolution // 2:
        raise ConfigError(f"modes={config.modes} exceeds floor(f/2)={resolution // 2} at resolution {resolution}")


def config_to_text(config: ModelConfig) -> str:
    return file.to_key_values(asdict(config))


def config_from_text(text: str) -> ModelConfig:
    raw = file.from_key_values(text)
    kwargs = {}
    for f in fields(ModelConfig):
        if f.name not in raw:
            continue
        value = raw[f.name]
        if f.name == "layers":
            kwargs[f.name] = value
        elif f.name == "modes":
            kwargs[f.name] = None if value == "None" else int(value)
        elif f.name in ("dt_min", "dt_max"):
            kwargs[f.name] = float(value)
        else:
            kwargs[f.name] = int(value)
    unknown = set(raw) - {f.name for f in fields(ModelConfig)}
    if unknown:
        raise ConfigError(f"unknown model config keys {sorted(unknown)}")
    return ModelConfig(**kwargs)
