"""Battery accounting: per-usage debits by usage class, solar recharge."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

MS_PER_HOUR = 3_600_000
MS_PER_DAY = 24 * MS_PER_HOUR


class UsageClass(enum.Enum):
    DAY_NONCRITICAL = "day-noncritical"
    DAY_CRITICAL = "day-critical"
    NIGHT = "night"


class EnergyError(ValueError):
    pass


class DeadNodeError(EnergyError):
    pass


@dataclass(frozen=True)
class EnergyModel:
    cost_mv: tuple = (1.0, 2.0, 3.0)          # noncritical, critical, night
    power_mw: tuple = (3.1, 9.0, 14.2)
    solar_rate_mv_per_h: float = 1.0
    daylight_start_h: float = 6.0
    daylight_end_h: float = 18.0
    low_battery_fraction: float = 0.10

    def __post_init__(self):
        problems = []
        c, p = self.cost_mv, self.power_mw
        if len(c) != 3 or len(p) != 3:
            problems.append("need three costs and three powers")
        else:
            if not (0 <= c[0] <= c[1] <= c[2]):
                problems.append(f"costs {c} must be non-decreasing noncritical<=critical<=night")
            if not (0 <= p[0] <= p[1] <= p[2]):
                problems.append(f"powers {p} must be non-decreasing noncritical<=critical<=night")
        if self.solar_rate_mv_per_h < 0:
            problems.append("solar rate must be >= 0")
        if not 0 <= self.daylight_start_h <= self.daylight_end_h <= 24:
            problems.append("daylight window must satisfy 0 <= start <= end <= 24")
        if not 0 <= self.low_battery_fraction < 1:
            problems.append("low-battery fraction must be in [0, 1)")
        if problems:
            raise EnergyError("; ".join(problems))

    def _index(self, cls: UsageClass) -> int:
        return (UsageClass.DAY_NONCRITICAL, UsageClass.DAY_CRITICAL, UsageClass.NIGHT).index(cls)

    def cost(self, cls: UsageClass) -> float:
        return self.cost_mv[self._index(cls)]

    def power(self, cls: UsageClass) -> float:
        return self.power_mw[self._index(cls)]


DEFAULT_MODEL = EnergyModel()


@dataclass
class UsageEntry:
    time_ms: float
    usage: UsageClass
    cost_mv: float
    battery_mv: float
    draw_mw: float
    what: str = ""


@dataclass
class EnergyState:
    battery_mv: float
    initial_mv: float
    draw_mw: float = 0.0
    usage_log: list = field(default_factory=list)
    alerts: list = field(default_factory=list)      # (time_ms, "low-battery" | "exhausted")
    low_reported: bool = False

    @classmethod
    def full(cls, initial_mv: float) -> "EnergyState":
        return cls(float(initial_mv), float(initial_mv))

    @property
    def alive(self) -> bool:
        return self.battery_mv > 0

    @property
    def last_time(self) -> float:
        return self.usage_log[-1].time_ms if self.usage_log else float("-inf")


def debit(state: EnergyState, usage: UsageClass, at: float,
          model: EnergyModel = DEFAULT_MODEL, what: str = "") -> EnergyState:
    """Charge one usage event. Mutates and returns ``state``."""
    if not state.alive:
        raise DeadNodeError(f"debit at t={at} on an exhausted battery")
    if at < state.last_time:
        raise EnergyError(f"usage at t={at} precedes the last logged usage at t={state.last_time}")
    cost = model.cost(usage)
    state.battery_mv = max(0.0, state.battery_mv - cost)
    state.draw_mw = model.power(usage)
    state.usage_log.append(UsageEntry(at, usage, cost, state.battery_mv, state.draw_mw, what))
    if not state.low_reported and state.battery_mv <= model.low_battery_fraction * state.initial_mv:
        state.low_reported = True
        state.alerts.append((at, "low-battery"))
    if state.battery_mv == 0:
        state.alerts.append((at, "exhausted"))
    return state


def daylight_ms(t_from: float, t_to: float, model: EnergyModel = DEFAULT_MODEL) -> float:
    """Milliseconds of [t_from, t_to] that fall inside the daily daylight window."""
    if t_to <= t_from:
        return 0.0
    lo, hi = model.daylight_start_h * MS_PER_HOUR, model.daylight_end_h * MS_PER_HOUR
    total = 0.0
    day = int(t_from // MS_PER_DAY)
    while day * MS_PER_DAY < t_to:
        base = day * MS_PER_DAY
        a, b = max(t_from, base + lo), min(t_to, base + hi)
        if b > a:
            total += b - a
        day += 1
    return total


def solar_recharge(state: EnergyState, t_from: float, t_to: float,
                   model: EnergyModel = DEFAULT_MODEL) -> EnergyState:
    """Add rate x daylight overlap, clamped at the initial capacity. An
    exhausted node stays exhausted. Mutates and returns ``state``."""
    if t_to < t_from:
        raise EnergyError(f"recharge interval runs backwards ({t_from} > {t_to})")
    if state.alive:
        gain = model.solar_rate_mv_per_h * daylight_ms(t_from, t_to, model) / MS_PER_HOUR
        state.battery_mv = min(state.initial_mv, state.battery_mv + gain)
    return state


def time_of_day_h(t_ms: float) -> float:
    return (t_ms % MS_PER_DAY) / MS_PER_HOUR


def in_window(t_ms: float, start_h: float, end_h: float) -> bool:
    """Whether the time of day lies in [start, end), wrapping past midnight."""
    h = time_of_day_h(t_ms)
    if start_h <= end_h:
        return start_h <= h < end_h
    return h >= start_h or h < end_h
