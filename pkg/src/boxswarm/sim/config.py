"""Mission configuration: TOML file <-> nested dataclasses, with line-numbered errors."""

import dataclasses
import hashlib
import json
import math
import re
import sys
import zlib
from dataclasses import dataclass, field

import numpy as np

from boxswarm.errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class SceneConfig:
    n_whales: int = 9
    extent: float = 4096.0  # world and image side, pixels
    spread: float = 0.3


@dataclass(frozen=True)
class AgentsConfig:
    count: int = 5


@dataclass(frozen=True)
class ViewsConfig:
    max_rotation: float = math.pi / 4
    max_shift_frac: float = 0.2
    scale_min: float = 0.8
    scale_max: float = 1.25
    max_shear: float = 0.1
    jitter: float = 0.0  # corner noise std during registration, pixels
    max_resample: int = 100  # pose draws allowed per agent before giving up


@dataclass(frozen=True)
class DetectorConfig:
    s_det: float = 0.95  # per-whale detection probability while scouting


@dataclass(frozen=True)
class ScoutConfig:
    start: tuple = (0.4, 0.4)  # spiral center, fraction of the world extent
    spacing: float = 0.05  # radial gap between spiral rings, fraction of extent
    points_per_turn: int = 16
    footprint: float = 0.25  # side of the scout camera footprint, fraction of extent
    window: int = 10
    threshold: float = 0.8
    max_frames: int = 400


@dataclass(frozen=True)
class RegistrationConfig:
    tol: float = 1e-6
    max_iter: int = 50


@dataclass(frozen=True)
class AssignmentConfig:
    params: str = ""  # parameter file; empty selects the bundled reference weights
    ghost_cost: float = 10.0 * math.sqrt(2.0)
    claims: bool = True  # broadcast a GoalClaim to both neighbors after deciding


@dataclass(frozen=True)
class ProtocolConfig:
    link_bps: float = 1_000_000.0


@dataclass(frozen=True)
class MissionConfig:
    seed: int = 0
    scene: SceneConfig = field(default_factory=SceneConfig)
    agents: AgentsConfig = field(default_factory=AgentsConfig)
    views: ViewsConfig = field(default_factory=ViewsConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    scout: ScoutConfig = field(default_factory=ScoutConfig)
    registration: RegistrationConfig = field(default_factory=RegistrationConfig)
    assignment: AssignmentConfig = field(default_factory=AssignmentConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)

    def to_dict(self):
        return dataclasses.asdict(self)

    def hash(self):
        """Short stable digest of the resolved configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def rng(self, stream):
        """Independent generator for a named sub-stream of the run seed."""
        key = zlib.crc32(stream.encode())
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(key,)))


_CHECKS = {
    ("scene", "n_whales"): lambda v: 2 <= v <= 255,
    ("scene", "extent"): lambda v: v > 0,
    ("scene", "spread"): lambda v: 0 < v < 0.5,
    ("agents", "count"): lambda v: 2 <= v <= 255,
    ("views", "max_rotation"): lambda v: 0 <= v <= math.pi,
    ("views", "max_shift_frac"): lambda v: v >= 0,
    ("views", "scale_min"): lambda v: v > 0,
    ("views", "scale_max"): lambda v: v > 0,
    ("views", "jitter"): lambda v: v >= 0,
    ("detector", "s_det"): lambda v: 0 <= v <= 1,
    ("scout", "spacing"): lambda v: v > 0,
    ("scout", "footprint"): lambda v: v > 0,
    ("scout", "window"): lambda v: v >= 1,
    ("scout", "threshold"): lambda v: 0 < v <= 1,
    ("scout", "max_frames"): lambda v: v >= 1,
    ("registration", "tol"): lambda v: v > 0,
    ("registration", "max_iter"): lambda v: v >= 1,
    ("assignment", "ghost_cost"): lambda v: v > 0,
    ("protocol", "link_bps"): lambda v: v > 0,
}


def _line_of(text, section, key):
    """1-based line where ``key`` is set (inside ``[section]`` when given)."""
    current = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        m = re.fullmatch(r"\[\s*([A-Za-z0-9_.]+)\s*\]", line)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return n
            continue
        if key is not None and current == section and re.match(rf"{re.escape(key)}\s*=", line):
            return n
    return None


def _coerce(value, default, where, line):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false", line)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer", line)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number", line)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string", line)
        return value
    if isinstance(default, tuple):
        if not (isinstance(value, list) and len(value) == len(default)
                and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)):
            raise ConfigError(f"{where} must be a list of {len(default)} numbers", line)
        return tuple(float(x) for x in value)
    raise ConfigError(f"{where}: unsupported setting", line)


def parse_config(text):
    """Build a :class:`MissionConfig` from TOML text; unknown keys are errors."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"invalid TOML: {exc}", int(m.group(1)) if m else None) from None
    top = {f.name: f for f in dataclasses.fields(MissionConfig)}
    kwargs = {}
    for name, value in raw.items():
        if name not in top:
            raise ConfigError(f"unknown setting {name!r}", _line_of(text, None, name) or _line_of(text, name, None))
        if name == "seed":
            kwargs["seed"] = _coerce(value, 0, "seed", _line_of(text, None, "seed"))
            if kwargs["seed"] < 0:
                raise ConfigError("seed must be non-negative", _line_of(text, None, "seed"))
            continue
        if not isinstance(value, dict):
            raise ConfigError(f"[{name}] must be a table", _line_of(text, None, name))
        cls = top[name].default_factory
        defaults = {f.name: f.default for f in dataclasses.fields(cls)}
        section = {}
        for key, v in value.items():
            line = _line_of(text, name, key)
            if key not in defaults:
                raise ConfigError(f"unknown setting {name}.{key}", line)
            v = _coerce(v, defaults[key], f"{name}.{key}", line)
            check = _CHECKS.get((name, key))
            if check is not None and not check(v):
                raise ConfigError(f"{name}.{key} = {v!r} is out of range", line)
            section[key] = v
        kwargs[name] = cls(**section)
    cfg = MissionConfig(**kwargs)
    if cfg.views.scale_min > cfg.views.scale_max:
        raise ConfigError("views.scale_min exceeds views.scale_max", _line_of(text, "views", "scale_min"))
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def dump_config(cfg):
    """TOML text that parses back to ``cfg``."""
    lines = [f"seed = {cfg.seed}"]
    for f in dataclasses.fields(cfg):
        if f.name == "seed":
            continue
        lines.append("")
        lines.append(f"[{f.name}]")
        for k, v in dataclasses.asdict(getattr(cfg, f.name)).items():
            lines.append(f"{k} = {_toml_value(v)}")
    return "\n".join(lines) + "\n"
