"""Flat scenario configuration, its text format and validation."""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from .energy import EnergyModel
from .fusion import ADDITIVE, WAVELET, FusionProfile
from .imagecore import DEPTHS
from .wavelet import MAX_LEVELS, SUPPORTED_BASES


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    # field
    area_a: float = 100.0
    area_b: float = 200.0
    num: int = 5
    sink_x: float = 0.0
    sink_y: float = 0.0
    # radio
    comm_radius: float = 10.0
    net_bandwidth: float = 4e6          # bit/s
    beta: float = 3.5
    tx_power: float = 1.0               # mW
    rx_threshold: float = 0.0           # mW; 0 -> tx_power / r^beta
    packet_size: int = 1024             # bytes
    hop_overhead_ms: float = 1.0
    loss: float = -1.0                  # per-hop packet loss; < 0 -> (100 - th) / 500
    listen_ms: float = 50.0
    sleep_ms: float = 50.0
    # energy
    node_batt: float = 90.0
    cost_noncritical: float = 1.0
    cost_critical: float = 2.0
    cost_night: float = 3.0
    power_noncritical: float = 3.1
    power_critical: float = 9.0
    power_night: float = 14.2
    solar_rate: float = 1.0             # mV per hour of daylight
    daylight_start: str = "06:00"
    daylight_end: str = "18:00"
    low_battery_fraction: float = 0.1
    # context detection
    th: float = 60.0
    activity_rule: str = "difference"
    match_mode: str = "exact"
    match_tolerance: float = 4.0
    # fusion
    low_basis: str = "haar"
    low_levels: int = 1
    low_bits: int = 8
    low_window: int = 3
    high_basis: str = "db4"
    high_levels: int = 3
    high_bits: int = 16
    high_window: int = 3
    rho: float = 1.0
    fusion_mode: str = WAVELET
    f_code: int = 4096                  # bytes
    processing_us_per_pixel: float = 2.0
    high_res_cost_factor: float = 4.0
    # schedule
    sensing_times: str = "08:00,11:30,17:00,19:00"
    days: int = 1
    night_start: str = "19:00"
    night_end: str = "06:00"
    collection_window_ms: float = 1000.0
    context_bytes: int = 64
    # imagery
    image_size: int = 64
    feed_dir: str = ""
    event_probability: float = 0.7
    critical_probability: float = 0.3
    templates: int = 2
    seed: int = 7

    def __post_init__(self):
        problems = validate(self)
        if problems:
            raise ConfigError("invalid configuration: " + "; ".join(problems))

    # -- derived -----------------------------------------------------------

    def loss_probability(self) -> float:
        return (100.0 - self.th) / 500.0 if self.loss < 0 else self.loss

    def low_profile(self) -> FusionProfile:
        return FusionProfile("low", self.low_basis, self.low_levels, self.low_bits, self.low_window,
                             self.rho, self.fusion_mode)

    def high_profile(self) -> FusionProfile:
        return FusionProfile("high", self.high_basis, self.high_levels, self.high_bits, self.high_window,
                             self.rho, self.fusion_mode)

    def energy_model(self) -> EnergyModel:
        return EnergyModel((self.cost_noncritical, self.cost_critical, self.cost_night),
                           (self.power_noncritical, self.power_critical, self.power_night),
                           self.solar_rate, clock_hours(self.daylight_start), clock_hours(self.daylight_end),
                           self.low_battery_fraction)

    def sensing_hours(self) -> list:
        return [clock_hours(t) for t in self.sensing_times.split(",") if t.strip()]

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def echo(self) -> list:
        return [f"{f.name} = {format_value(getattr(self, f.name))}" for f in fields(self)]

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.echo()).encode()).hexdigest()


def clock_hours(text: str) -> float:
    try:
        hh, mm = text.strip().split(":")
        h, m = int(hh), int(mm)
    except ValueError:
        raise ConfigError(f"bad clock time {text!r}; use HH:MM") from None
    if not (0 <= h <= 24 and 0 <= m < 60) or h * 60 + m > 24 * 60:
        raise ConfigError(f"clock time {text!r} out of range")
    return h + m / 60.0


def format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def validate(c: ScenarioConfig) -> list:
    p = []

    def need(cond, msg):
        if not cond:
            p.append(msg)

    need(c.num >= 2, f"num must be >= 2 (got {c.num})")
    need(c.area_a > 0 and c.area_b > 0, "area sides must be > 0")
    need(0 <= c.sink_x <= c.area_a and 0 <= c.sink_y <= c.area_b, "sink must lie inside the area")
    need(c.comm_radius > 0, "comm_radius must be > 0")
    need(c.net_bandwidth > 0, "net_bandwidth must be > 0")
    need(c.beta > 0, "beta must be > 0")
    need(c.tx_power > 0, "tx_power must be > 0")
    need(c.rx_threshold >= 0, "rx_threshold must be >= 0")
    need(c.packet_size > 0, "packet_size must be > 0")
    need(c.hop_overhead_ms >= 0, "hop_overhead_ms must be >= 0")
    need(c.loss < 0 or c.loss <= 1, "loss must be in [0, 1] (or negative for the threshold-derived default)")
    need(c.listen_ms > 0, "listen_ms must be > 0")
    need(c.sleep_ms >= 0, "sleep_ms must be >= 0")
    need(c.node_batt > 0, "node_batt must be > 0")
    need(0 <= c.cost_noncritical <= c.cost_critical <= c.cost_night,
         "usage costs must satisfy noncritical <= critical <= night")
    need(0 <= c.power_noncritical <= c.power_critical <= c.power_night,
         "usage powers must satisfy noncritical <= critical <= night")
    need(c.solar_rate >= 0, "solar_rate must be >= 0")
    need(0 <= c.low_battery_fraction < 1, "low_battery_fraction must be in [0, 1)")
    need(0 < c.th <= 100, f"th must be in (0, 100] (got {c.th})")
    need(c.activity_rule in ("difference", "ratio"), "activity_rule must be difference or ratio")
    need(c.match_mode in ("exact", "tolerance"), "match_mode must be exact or tolerance")
    need(c.match_tolerance >= 0, "match_tolerance must be >= 0")
    for tag in ("low", "high"):
        basis, levels = getattr(c, f"{tag}_basis"), getattr(c, f"{tag}_levels")
        bits, window = getattr(c, f"{tag}_bits"), getattr(c, f"{tag}_window")
        need(basis in SUPPORTED_BASES, f"{tag}_basis {basis!r} unsupported")
        need(1 <= levels <= MAX_LEVELS, f"{tag}_levels must be in 1..{MAX_LEVELS}")
        need(bits in DEPTHS, f"{tag}_bits must be one of {DEPTHS}")
        need(window >= 1 and window % 2 == 1, f"{tag}_window must be odd and >= 1")
        if 1 <= levels <= MAX_LEVELS:
            need(c.image_size % (1 << levels) == 0,
                 f"image_size {c.image_size} not divisible by 2^{tag}_levels")
    need(c.fusion_mode in (WAVELET, ADDITIVE), "fusion_mode must be wavelet or additive")
    need(c.f_code > 0, "f_code must be > 0")
    need(c.processing_us_per_pixel >= 0, "processing_us_per_pixel must be >= 0")
    need(c.high_res_cost_factor >= 1, "high_res_cost_factor must be >= 1")
    need(c.days >= 1, "days must be >= 1")
    need(c.collection_window_ms >= 0, "collection_window_ms must be >= 0")
    need(c.context_bytes > 0, "context_bytes must be > 0")
    need(c.image_size >= 2, "image_size must be >= 2")
    need(0 <= c.event_probability <= 1, "event_probability must be in [0, 1]")
    need(0 <= c.critical_probability <= 1, "critical_probability must be in [0, 1]")
    need(c.templates >= 1, "templates must be >= 1")
    need(c.seed >= 0, "seed must be >= 0")
    for name in ("daylight_start", "daylight_end", "night_start", "night_end"):
        try:
            clock_hours(getattr(c, name))
        except ConfigError as exc:
            p.append(f"{name}: {exc}")
    try:
        hours = [clock_hours(t) for t in c.sensing_times.split(",") if t.strip()]
        need(len(hours) > 0, "sensing_times must list at least one HH:MM")
        need(hours == sorted(hours) and len(set(hours)) == len(hours) and all(h < 24 for h in hours),
             "sensing_times must be strictly increasing within a day")
    except ConfigError as exc:
        p.append(f"sensing_times: {exc}")
    return p


FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def coerce(name: str, text: str):
    if name not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    kind = FIELD_TYPES[name]
    text = text.strip()
    try:
        if kind in ("int", int):
            return int(float(text)) if float(text).is_integer() else int(text)
        if kind in ("float", float):
            return float(text)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r} as {kind}") from None
    return text


def parse_config(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = coerce(key, value)
    return dataclasses.replace(base or ScenarioConfig(), **values)


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def dump_config(cfg: ScenarioConfig) -> str:
    return "\n".join(cfg.echo()) + "\n"


PAPER_DEFAULT = ScenarioConfig()

# Desk-scale preset for trend sweeps: the sink sits at the centre of the field
# and the radio range covers most of it, so trips form at every node count.
# Longer listen/sleep windows and a larger battery keep nodes alive over six
# days, enough trips per seed for medians to settle.
DESK = ScenarioConfig(comm_radius=150.0, sink_x=50.0, sink_y=100.0, num=10, listen_ms=200.0,
                      sleep_ms=200.0, node_batt=4000.0, days=6)

PRESETS = {"paper-default": PAPER_DEFAULT, "desk": DESK}
