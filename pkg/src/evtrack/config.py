"""Tracker configuration and the plain-text key=value config format."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

TEMPLATE_SIZE = 128
SEARCH_SIZE = 256
INJECTION_ORDER = ("dense", "medium", "sparse")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrackerConfig:
    """All pipeline knobs; defaults follow the reference hyperparameters."""

    dt_us: int = 2000
    patch: int = 16
    embed_dim: int = 192
    heads: int = 3
    hidden_dim: int = 0  # 0 means 4 * embed_dim
    stage_layers: tuple[int, int, int] = (6, 4, 2)
    dps_enabled: bool = True
    moe_enabled: bool = True
    seed: int = 0
    template_factor: float = 2.0
    search_factor: float = 4.0
    tau: float = 1.0
    alpha: float = 0.04
    dps_start_layer: int = 7

    def __post_init__(self):
        if self.dt_us <= 0:
            raise ConfigError(f"dt_us must be positive, got {self.dt_us}")
        if self.patch <= 0 or TEMPLATE_SIZE % self.patch or SEARCH_SIZE % self.patch:
            raise ConfigError(f"patch {self.patch} must divide {TEMPLATE_SIZE} and {SEARCH_SIZE}")
        if self.embed_dim <= 0 or self.embed_dim % self.heads:
            raise ConfigError(f"heads {self.heads} must divide embed_dim {self.embed_dim}")
        if self.hidden % 3:
            raise ConfigError(f"hidden dim {self.hidden} must be divisible by 3")
        if self.embed_dim % 8:
            raise ConfigError(f"embed_dim {self.embed_dim} must be divisible by 8 (head stacks)")
        if len(self.stage_layers) != 3 or any(l <= 0 for l in self.stage_layers):
            raise ConfigError(f"stage_layers must be 3 positive counts, got {self.stage_layers}")
        if self.dps_start_layer != self.stage_layers[0] + 1:
            raise ConfigError(
                f"dps_start_layer {self.dps_start_layer} must be the first stage-2 layer "
                f"({self.stage_layers[0] + 1})"
            )
        if self.template_factor <= 0 or self.search_factor <= 0:
            raise ConfigError("context factors must be positive")
        if self.tau <= 0 or self.alpha <= 0:
            raise ConfigError("tau and alpha must be positive")

    @property
    def hidden(self) -> int:
        return self.hidden_dim if self.hidden_dim else 4 * self.embed_dim

    @property
    def n_layers(self) -> int:
        return sum(self.stage_layers)

    @property
    def n_template_tokens(self) -> int:
        return (TEMPLATE_SIZE // self.patch) ** 2

    @property
    def n_search_tokens(self) -> int:
        return (SEARCH_SIZE // self.patch) ** 2

    @property
    def moe_layer_indices(self) -> tuple[int, ...]:
        """0-based index of the first layer of each stage."""
        first = 0
        out = []
        for n in self.stage_layers:
            out.append(first)
            first += n
        return tuple(out)

    @property
    def dps_start_index(self) -> int:
        return self.dps_start_layer - 1

    @property
    def score_grid(self) -> int:
        return SEARCH_SIZE // self.patch


_BOOL_KEYS = {"dps_enabled", "moe_enabled"}
_INT_KEYS = {"dt_us", "patch", "embed_dim", "heads", "hidden_dim", "seed", "dps_start_layer"}
_FLOAT_KEYS = {"template_factor", "search_factor", "tau", "alpha"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _BOOL_KEYS:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key == "stage_layers":
            parts = tuple(int(v) for v in raw.replace(",", " ").split())
            return parts
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    raise ConfigError(f"unknown config key: {key}")


def parse_config_text(text: str, base: TrackerConfig | None = None) -> TrackerConfig:
    """key = value lines, # comments; unknown keys rejected."""
    known = {f.name for f in fields(TrackerConfig)}
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown config key: {key}")
        updates[key] = _parse_value(key, value)
    base = base if base is not None else TrackerConfig()
    return replace(base, **updates)


def load_config(path, base: TrackerConfig | None = None) -> TrackerConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), base)


def config_to_text(cfg: TrackerConfig) -> str:
    lines = []
    for f in fields(TrackerConfig):
        value = getattr(cfg, f.name)
        if f.name == "stage_layers":
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
