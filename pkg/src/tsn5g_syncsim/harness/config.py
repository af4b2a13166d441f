"""Scenario configuration: INI file + CLI overrides, strictly validated.

Precedence is CLI flags > config file > built-in defaults. Unknown sections
and keys are rejected with a :class:`ConfigError` naming the offending path
(``section.key``).

Example::

    [run]
    scenario = sfn_anchored
    seed = 7
    duration_s = 10

    [clock.default]
    drift_ppm = 10
    granularity_ns = 8

    [clock.ue1]
    offset_ns = -3000000

    [link.wireless]
    kind = asymmetric

    [link.wireless.up]
    kind = normal
    mean_ns = 6000000
    sigma_ns = 2000000
    floor_ns = 500000

    [sfn]
    observation_offset.ue2 = 1000
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from tsn5g_syncsim.clock import MAX_DRIFT_PPM, SimulatedClock, as_fraction
from tsn5g_syncsim.netsim import Asymmetric, Constant, LinkModel, Normal, Uniform

SCENARIOS = ("wireline_gptp", "ptp_over_wireless", "sfn_anchored")

DEFAULT_WIRELESS: LinkModel = Asymmetric(
    up=Normal(6_000_000, 2_000_000, 500_000),
    down=Normal(2_000_000, 1_000_000, 500_000),
)
DEFAULT_WIRELINE: LinkModel = Constant(500)


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ClockConfig:
    offset_ns: int = 0
    drift_ppm: Fraction = Fraction(0)
    granularity_ns: int = 1

    def build(self) -> SimulatedClock:
        return SimulatedClock(self.offset_ns, self.drift_ppm, self.granularity_ns)


@dataclass(frozen=True)
class SfnConfig:
    mobile_ues: int = 2
    decimation: int = 1
    store_capacity: int = 64
    staleness_ns: int = 5_120_000_000
    reference_link: str = "wireline"
    per_subframe: bool = False
    first_boundary_ns: int = 0
    observation_offsets: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class DemoConfig:
    enabled: bool = True
    start_s: Fraction = Fraction(2)
    repeats: int = 3
    period_s: Fraction = Fraction(1)
    grid_ns: int = 100_000
    sensor: bool = True
    v_max: float = 4.0
    a_max: float = 30.0
    stroke: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "sfn_anchored"
    seed: int = 1
    duration_ns: int = 10_000_000_000
    sync_interval_ns: int = 31_250_000
    pdelay_interval_ns: int = 1_000_000_000
    pdelay_turnaround_ns: int = 10_000
    probe_interval_ns: int = 1_000_000
    bridge_residence_ns: int = 10_000
    out_dir: str | None = None
    default_clock: ClockConfig = ClockConfig()
    clocks: dict[str, ClockConfig] = field(default_factory=dict)
    wireline: LinkModel = DEFAULT_WIRELINE
    wireless: LinkModel = DEFAULT_WIRELESS
    delivery: LinkModel | None = None
    sfn: SfnConfig = SfnConfig()
    demo: DemoConfig = DemoConfig()

    def clock_for(self, node: str) -> ClockConfig:
        if node in self.clocks:
            return self.clocks[node]
        return ClockConfig() if node == "gm" else self.default_clock

    def node_names(self) -> list[str]:
        return node_names(self.scenario, self.sfn.mobile_ues)

    def with_overrides(self, **overrides) -> ScenarioConfig:
        cfg = replace(self, **{k: v for k, v in overrides.items() if v is not None})
        validate(cfg)
        return cfg


def node_names(scenario: str, mobile_ues: int = 2) -> list[str]:
    if scenario == "wireline_gptp":
        return ["gm", "bridge", "node1", "node2"]
    if scenario == "ptp_over_wireless":
        return ["gm", "node1", "node2"]
    return ["gm", "ref", *(f"ue{i + 1}" for i in range(mobile_ues))]


def validate(cfg: ScenarioConfig) -> None:
    if cfg.scenario not in SCENARIOS:
        raise ConfigError("run.scenario", f"must be one of {', '.join(SCENARIOS)}, got {cfg.scenario!r}")
    for name in ("duration_ns", "sync_interval_ns", "pdelay_interval_ns", "probe_interval_ns"):
        if getattr(cfg, name) <= 0:
            raise ConfigError(f"run.{name}", "must be > 0")
    if cfg.seed < 0 or cfg.seed >= 1 << 64:
        raise ConfigError("run.seed", "must be an unsigned 64-bit integer")
    nodes = cfg.node_names()
    for name in cfg.clocks:
        if name not in nodes:
            raise ConfigError(f"clock.{name}", f"no such node in scenario {cfg.scenario} (nodes: {', '.join(nodes)})")
    if cfg.scenario == "sfn_anchored":
        if cfg.sfn.reference_link != "wireline":
            raise ConfigError("sfn.reference_link", "the Reference UE must sit behind a wireline link")
        if cfg.sfn.mobile_ues < 1:
            raise ConfigError("sfn.mobile_ues", "must be >= 1")
        if cfg.demo.enabled and cfg.sfn.mobile_ues < 2:
            raise ConfigError("sfn.mobile_ues", "the demonstrator needs two mobile UEs")
        for ue in cfg.sfn.observation_offsets:
            if ue not in nodes or ue == "gm":
                raise ConfigError(f"sfn.observation_offset.{ue}", "unknown UE")


# -- INI parsing ---------------------------------------------------------------

_RUN_KEYS = {
    "scenario": str,
    "seed": int,
    "duration_s": "duration",
    "sync_interval_ns": int,
    "pdelay_interval_ns": int,
    "pdelay_turnaround_ns": int,
    "probe_interval_ns": int,
    "out_dir": str,
}


def _parse_int(path: str, raw: str) -> int:
    try:
        return int(raw.replace("_", ""))
    except ValueError:
        raise ConfigError(path, f"expected an integer, got {raw!r}") from None


def _parse_fraction(path: str, raw: str) -> Fraction:
    try:
        return as_fraction(raw.replace("_", ""))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(path, f"expected a number, got {raw!r}") from None


def _parse_bool(path: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(path, f"expected a boolean, got {raw!r}")


def _seconds_to_ns(path: str, raw: str) -> int:
    value = _parse_fraction(path, raw) * 1_000_000_000
    if value.denominator != 1:
        raise ConfigError(path, "must be a whole number of nanoseconds")
    return int(value)


def _check_keys(path: str, section: configparser.SectionProxy, allowed: set[str]) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown key")


def _parse_clock(path: str, section: configparser.SectionProxy, base: ClockConfig) -> ClockConfig:
    _check_keys(path, section, {"offset_ns", "drift_ppm", "granularity_ns"})
    cfg = base
    if "offset_ns" in section:
        cfg = replace(cfg, offset_ns=_parse_int(f"{path}.offset_ns", section["offset_ns"]))
    if "drift_ppm" in section:
        drift = _parse_fraction(f"{path}.drift_ppm", section["drift_ppm"])
        if abs(drift) > MAX_DRIFT_PPM:
            raise ConfigError(f"{path}.drift_ppm", f"|drift| must be <= {MAX_DRIFT_PPM} ppm")
        cfg = replace(cfg, drift_ppm=drift)
    if "granularity_ns" in section:
        gran = _parse_int(f"{path}.granularity_ns", section["granularity_ns"])
        if gran < 1:
            raise ConfigError(f"{path}.granularity_ns", "must be >= 1")
        cfg = replace(cfg, granularity_ns=gran)
    return cfg


_LINK_FIELDS = {
    "constant": (Constant, ("delay_ns",)),
    "uniform": (Uniform, ("min_ns", "max_ns")),
    "normal": (Normal, ("mean_ns", "sigma_ns", "floor_ns")),
}


def _parse_link(path: str, parser: configparser.ConfigParser) -> LinkModel:
    if not parser.has_section(path):
        raise ConfigError(path, "missing section")
    section = parser[path]
    kind = section.get("kind", "").strip().lower()
    if kind == "asymmetric":
        _check_keys(path, section, {"kind"})
        return Asymmetric(up=_parse_link(f"{path}.up", parser), down=_parse_link(f"{path}.down", parser))
    if kind not in _LINK_FIELDS:
        raise ConfigError(f"{path}.kind", f"must be one of constant, uniform, normal, asymmetric; got {kind!r}")
    cls, names = _LINK_FIELDS[kind]
    _check_keys(path, section, {"kind", *names})
    kwargs = {}
    for name in names:
        if name in section:
            kwargs[name] = _parse_int(f"{path}.{name}", section[name])
        elif not (cls is Normal and name == "floor_ns"):
            raise ConfigError(f"{path}.{name}", "missing")
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _parse_dataclass_section(path: str, section: configparser.SectionProxy, base, converters: dict):
    _check_keys(path, section, set(converters))
    updates = {key: conv(f"{path}.{key}", section[key]) for key, conv in converters.items() if key in section}
    return replace(base, **updates)


def _float(path: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(path, f"expected a number, got {raw!r}") from None


def _str(path: str, raw: str) -> str:
    return raw.strip()


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    parser = configparser.ConfigParser(
        interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#", ";")
    )
    parser.optionxform = str  # keep node names case-sensitive
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(source, str(exc).splitlines()[0]) from None

    cfg = ScenarioConfig()
    link_sections = {s for s in parser.sections() if s.startswith("link.")}
    for name in parser.sections():
        section = parser[name]
        if name == "run":
            _check_keys("run", section, set(_RUN_KEYS))
            updates = {}
            for key, conv in _RUN_KEYS.items():
                if key not in section:
                    continue
                if conv == "duration":
                    updates["duration_ns"] = _seconds_to_ns("run.duration_s", section[key])
                elif conv is int:
                    updates[key] = _parse_int(f"run.{key}", section[key])
                else:
                    updates[key] = section[key].strip()
            cfg = replace(cfg, **updates)
        elif name == "clock.default":
            cfg = replace(cfg, default_clock=_parse_clock(name, section, cfg.default_clock))
        elif name.startswith("clock."):
            node = name[len("clock.") :]
            cfg = replace(cfg, clocks={**cfg.clocks, node: _parse_clock(name, section, ClockConfig())})
        elif name == "bridge":
            _check_keys("bridge", section, {"residence_ns"})
            if "residence_ns" in section:
                cfg = replace(cfg, bridge_residence_ns=_parse_int("bridge.residence_ns", section["residence_ns"]))
        elif name == "sfn":
            offsets = {}
            converters = {
                "mobile_ues": _parse_int,
                "decimation": _parse_int,
                "store_capacity": _parse_int,
                "staleness_ns": _parse_int,
                "reference_link": _str,
                "per_subframe": _parse_bool,
                "first_boundary_ns": _parse_int,
            }
            plain = {}
            for key in section:
                if key.startswith("observation_offset."):
                    offsets[key.split(".", 1)[1]] = _parse_int(f"sfn.{key}", section[key])
                elif key in converters:
                    plain[key] = converters[key](f"sfn.{key}", section[key])
                else:
                    raise ConfigError(f"sfn.{key}", "unknown key")
            sfn = replace(cfg.sfn, **plain, observation_offsets=offsets or cfg.sfn.observation_offsets)
            for key in ("decimation", "store_capacity"):
                if getattr(sfn, key) < 1:
                    raise ConfigError(f"sfn.{key}", "must be >= 1")
            if any(v < 0 for v in offsets.values()):
                raise ConfigError("sfn.observation_offset", "offsets must be >= 0")
            cfg = replace(cfg, sfn=sfn)
        elif name == "demonstrator":
            demo = _parse_dataclass_section(
                name,
                section,
                cfg.demo,
                {
                    "enabled": _parse_bool,
                    "start_s": _parse_fraction,
                    "repeats": _parse_int,
                    "period_s": _parse_fraction,
                    "grid_ns": _parse_int,
                    "sensor": _parse_bool,
                    "v_max": _float,
                    "a_max": _float,
                    "stroke": _float,
                },
            )
            if demo.grid_ns <= 0 or demo.repeats < 1:
                raise ConfigError("demonstrator", "grid_ns must be > 0 and repeats >= 1")
            cfg = replace(cfg, demo=demo)
        elif name in link_sections:
            continue
        else:
            raise ConfigError(name, "unknown section")

    top_links = {s.split(".")[1] for s in link_sections}
    for link in top_links:
        if link not in ("wireline", "wireless", "delivery"):
            raise ConfigError(f"link.{link}", "unknown link (expected wireline, wireless or delivery)")
        cfg = replace(cfg, **{link: _parse_link(f"link.{link}", parser)})
    _check_link_subsections(parser, link_sections)
    validate(cfg)
    return cfg


def _check_link_subsections(parser: configparser.ConfigParser, link_sections: set[str]) -> None:
    # every nested section must hang off an asymmetric parent
    for name in link_sections:
        parts = name.split(".")
        if len(parts) > 2:
            parent = ".".join(parts[:-1])
            if parts[-1] not in ("up", "down") or parser.get(parent, "kind", fallback="").lower() != "asymmetric":
                raise ConfigError(name, "nested link sections must be up/down of an asymmetric link")


def load_config(path: str | Path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(str(p), f"cannot read config: {exc.strerror}") from None
    return parse_config(text, source=str(p))

