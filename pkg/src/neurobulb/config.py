"""Engine configuration: every exposed constant, versioned and hashable.

Config files are TOML. Python 3.10 has no stdlib TOML reader and this
deployment has no third-party one available, so a strict subset is parsed
here: `[section]` tables, `key = value` with ints, floats, booleans, quoted
strings and flat arrays, and `#` comments. That covers the full config
surface; anything fancier is rejected with a line diagnostic.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from typing import Any, Optional

from . import __version__
from .audio import AudioConfig
from .fractal import DEConfig, RenderConfig
from .mapping import MappingConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SourceConfig:
    mode: str = "synthetic"            # live | replay | synthetic | manual
    profile: str = "calm"              # synthetic profile
    tick_hz: float = 10.0              # control loop rate
    replay_path: Optional[str] = None


@dataclass(frozen=True)
class BridgeConfig:
    host: str = "127.0.0.1"            # loopback only by default
    port: int = 8777
    preview_hz: float = 2.0
    preview_size: int = 256
    frame_quality: int = 80            # JPEG quality


@dataclass(frozen=True)
class EngineConfig:
    seed: int = 42
    osc_port: int = 9000
    record_path: Optional[str] = None  # session recording is opt-in
    mapping: MappingConfig = field(default_factory=MappingConfig)
    de: DEConfig = field(default_factory=DEConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    audio: AudioConfig = field(default_factory=AudioConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    bridge: BridgeConfig = field(default_factory=BridgeConfig)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["version"] = __version__
        # normalize through JSON so tuples become lists and the dict compares
        # cleanly against a header loaded back from disk
        return json.loads(json.dumps(d))

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


_SECTION_TYPES = {
    "mapping": MappingConfig,
    "de": DEConfig,
    "render": RenderConfig,
    "audio": AudioConfig,
    "source": SourceConfig,
    "bridge": BridgeConfig,
}

_SECTION_RE = re.compile(r"^\[([A-Za-z0-9_.-]+)\]$")
_KEY_RE = re.compile(r"^([A-Za-z0-9_-]+)\s*=\s*(.+)$")


def _parse_value(raw: str, lineno: int) -> Any:
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(part, lineno) for part in inner.split(",")]
    if raw in ("true", "false"):
        return raw == "true"
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse value {raw!r}") from None


def parse_toml_subset(text: str) -> dict:
    """Parse the TOML subset described in the module docstring."""
    result: dict[str, Any] = {}
    table = result
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        # strip trailing comments outside of strings
        if "#" in line and '"' not in line:
            line = line.split("#", 1)[0].strip()
        m = _SECTION_RE.match(line)
        if m:
            table = result
            for part in m.group(1).split("."):
                table = table.setdefault(part, {})
                if not isinstance(table, dict):
                    raise ConfigError(f"line {lineno}: {part!r} is not a table")
            continue
        m = _KEY_RE.match(line)
        if not m:
            raise ConfigError(f"line {lineno}: expected 'key = value' or '[section]'")
        table[m.group(1)] = _parse_value(m.group(2), lineno)
    return result


def _build_section(cls, data: dict, section: str):
    valid = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in valid:
            raise ConfigError(f"unknown field {section}.{key}")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section [{section}]: {exc}") from exc


def config_from_dict(data: dict) -> EngineConfig:
    data = dict(data)
    data.pop("version", None)
    kwargs: dict[str, Any] = {}
    for section, cls in _SECTION_TYPES.items():
        if section in data:
            payload = data.pop(section)
            if not isinstance(payload, dict):
                raise ConfigError(f"[{section}] must be a table")
            kwargs[section] = _build_section(cls, payload, section)
    top_valid = {f.name for f in fields(EngineConfig)} - set(_SECTION_TYPES)
    for key, value in data.items():
        if key not in top_valid:
            raise ConfigError(f"unknown field {key}")
        kwargs[key] = value
    try:
        return EngineConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> EngineConfig:
    with open(path) as fh:
        return config_from_dict(parse_toml_subset(fh.read()))


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    return repr(value)


def dumps_toml(cfg: EngineConfig) -> str:
    """Serialize the effective config back to the TOML subset."""
    lines = [f"# neurobulb engine config (version {__version__})"]
    top = {
        f.name: getattr(cfg, f.name)
        for f in fields(cfg)
        if not is_dataclass(getattr(cfg, f.name))
    }
    for key, value in top.items():
        if value is None:
            continue
        lines.append(f"{key} = {_format_value(value)}")
    for section in _SECTION_TYPES:
        lines.append("")
        lines.append(f"[{section}]")
        for key, value in asdict(getattr(cfg, section)).items():
            if value is None:
                continue
            lines.append(f"{key} = {_format_value(value)}")
    return "\n".join(lines) + "\n"


def apply_overrides(cfg: EngineConfig, overrides: dict[str, Any]) -> EngineConfig:
    """Apply dotted-path overrides like {'mapping.tau_visual': 2.0}."""
    data = asdict(cfg)
    for path, value in overrides.items():
        parts = path.split(".")
        table = data
        for part in parts[:-1]:
            if part not in table or not isinstance(table[part], dict):
                raise ConfigError(f"unknown config section {path!r}")
            table = table[part]
        if parts[-1] not in table:
            raise ConfigError(f"unknown config field {path!r}")
        table[parts[-1]] = value
    return config_from_dict(data)
