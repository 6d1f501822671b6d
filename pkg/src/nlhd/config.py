"""Pipeline configuration and the ``key = value`` config file format.

Keys are namespaced by stage, e.g.::

    illum.patch_side = 6
    refl.num_rows = 16
    enhance.alpha1 = 0.35
    denoise.k = auto
    color.alpha = 4.5
    pipeline.mode = exp-only
    pipeline.denoise = false
    metrics.loe_max_side = 100
"""
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .color import ColorCorrectParams
from .denoise import DenoiseParams
from .enhance import EnhanceParams
from .grouping import ILLUMINATION, REFLECTANCE, MatchParams

MODES = ("full", "no-nlhd", "exp-only", "log-only", "illum-only", "refl-only")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    illum: MatchParams = ILLUMINATION
    refl: MatchParams = REFLECTANCE
    enhance: EnhanceParams = field(default_factory=EnhanceParams)
    denoise: DenoiseParams = field(default_factory=DenoiseParams)
    color: ColorCorrectParams = field(default_factory=ColorCorrectParams)
    use_denoise: bool = True
    use_color_correct: bool = True
    mode: str = "full"
    abs_all_reflectance: bool = False
    threads: int | None = None
    loe_max_side: int = 100

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.loe_max_side < 1:
            raise ConfigError("loe_max_side must be >= 1")


# section name -> PipelineConfig attribute holding a parameter dataclass
_SECTIONS = {
    "illum": "illum",
    "refl": "refl",
    "enhance": "enhance",
    "denoise": "denoise",
    "color": "color",
}
# flat keys living directly on PipelineConfig
_FLAT = {
    "pipeline.denoise": "use_denoise",
    "pipeline.color_correct": "use_color_correct",
    "pipeline.mode": "mode",
    "pipeline.abs_all_reflectance": "abs_all_reflectance",
    "pipeline.threads": "threads",
    "metrics.loe_max_side": "loe_max_side",
}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key, raw, current):
    raw = raw.strip()
    if key == "denoise.k" and raw.lower() == "auto":
        return "auto"
    if isinstance(current, bool):
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(current, int) or key == "pipeline.threads":
            return int(raw)
        if isinstance(current, float) or key == "denoise.k":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return raw


def parse_config_text(text):
    """Parse ``key = value`` lines into a dict; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        values[key] = value
    return values


def apply_overrides(cfg, values):
    """Return a copy of ``cfg`` with raw string ``values`` applied."""
    flat = {}
    nested = {}
    for key, raw in values.items():
        if key in _FLAT:
            attr = _FLAT[key]
            flat[attr] = _convert(key, raw, getattr(cfg, attr))
            continue
        section, _, name = key.partition(".")
        if section not in _SECTIONS or not name:
            raise ConfigError(f"unknown config key {key!r}")
        params = getattr(cfg, _SECTIONS[section])
        if name not in {f.name for f in dataclasses.fields(params)}:
            raise ConfigError(f"unknown config key {key!r}")
        nested.setdefault(section, {})[name] = _convert(key, raw, getattr(params, name))
    try:
        for section, changes in nested.items():
            attr = _SECTIONS[section]
            flat[attr] = dataclasses.replace(getattr(cfg, attr), **changes)
        return dataclasses.replace(cfg, **flat)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, base=None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return apply_overrides(base or PipelineConfig(), parse_config_text(text))
