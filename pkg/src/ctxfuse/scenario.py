"""Experiment driver: run one scenario end to end, compute the metrics, write
CSV/trace outputs, and sweep a parameter axis."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .agency import Agency, AgencySettings, DispatchRefused, ReturnReport
from .config import FIELD_TYPES, ConfigError, ScenarioConfig, coerce, clock_hours
from .energy import UsageClass
from .feed import open_feed, sensing_instants
from .imagecore import Image, error_measure, requantize, save_pgm, save_raw
from .netsim import AGENT_MIGRATION, Simulator, build_topology


class MetricError(ValueError):
    pass


# -- metric formulas -------------------------------------------------------------

def dropping_rate(sent: int, received: int) -> float:
    if sent <= 0:
        raise MetricError("dropping rate undefined: no packets sent")
    if not 0 <= received <= sent:
        raise MetricError(f"received {received} outside [0, {sent}]")
    return (sent - received) / sent


def throughput(image_sent: int, image_received: int) -> float:
    if image_sent <= 0:
        raise MetricError("throughput undefined: no image packets sent")
    if not 0 <= image_received <= image_sent:
        raise MetricError(f"received {image_received} outside [0, {image_sent}]")
    return image_received / image_sent


def bandwidth_required(image, available_bw: float) -> float:
    """Seconds of channel time the image needs: bits / (bit/s). ``image`` is an
    Image or a (width, height, bit_depth) triple."""
    if available_bw <= 0:
        raise MetricError("available bandwidth must be > 0")
    w, h, d = (image.width, image.height, image.bit_depth) if isinstance(image, Image) else image
    return w * h * d / available_bw


def agent_overhead(image_bytes: float, agent_code_bytes: float) -> tuple:
    """(code / (code + image), image / (code + image)). The first falls as the
    image grows; the second is its complement."""
    if image_bytes <= 0 or agent_code_bytes <= 0:
        raise MetricError("sizes must be positive")
    total = agent_code_bytes + image_bytes
    frac = agent_code_bytes / total
    return frac, 1.0 - frac


def _safe(fn, *args):
    try:
        return fn(*args)
    except MetricError:
        return math.nan


def _mean(xs):
    return float(np.mean(xs)) if len(xs) else math.nan


# -- report --------------------------------------------------------------------

@dataclass
class MetricsReport:
    dropping_rate: float = math.nan
    throughput: float = math.nan
    bandwidth_required_s: float = math.nan
    bandwidth_required_pct: float = math.nan
    fused_bandwidth_required_s: float = math.nan
    fusion_time_ms: float = math.nan
    fusion_time_low_ms: float = math.nan
    fusion_time_high_ms: float = math.nan
    agent_overhead: float = math.nan
    overhead_image_fraction: float = math.nan
    error_std: float = math.nan
    error_mse: float = math.nan
    t_load_total: int = 0
    packets_sent: int = 0
    packets_received: int = 0
    image_packets_sent: int = 0
    image_packets_received: int = 0
    context_reports: int = 0
    context_delivery: float = math.nan
    rounds: int = 0
    active_nodes_mean: float = math.nan
    dispatches: int = 0
    dispatches_low: int = 0
    dispatches_high: int = 0
    refusals: int = 0
    deliveries: int = 0
    visited_mean: float = math.nan
    skipped_total: int = 0
    hops_mean: float = math.nan
    power_noncritical_mw: float = math.nan
    power_critical_mw: float = math.nan
    power_night_mw: float = math.nan
    battery_mean_mv: float = math.nan
    battery_min_mv: float = math.nan
    dead_nodes: int = 0
    battery_series: list = field(default_factory=list, repr=False)

    @classmethod
    def columns(cls) -> list:
        return [f.name for f in fields(cls) if f.name != "battery_series"]

    def row(self) -> dict:
        return {k: getattr(self, k) for k in self.columns()}


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    seed: int
    metrics: MetricsReport
    trace: list
    agent_log: list
    reports: list
    topology: object


def _settings(cfg: ScenarioConfig) -> AgencySettings:
    return AgencySettings(
        threshold_pct=cfg.th, activity_rule=cfg.activity_rule, match_mode=cfg.match_mode,
        match_tolerance=cfg.match_tolerance, low_profile=cfg.low_profile(),
        high_profile=cfg.high_profile(), f_code=cfg.f_code, context_bytes=cfg.context_bytes,
        night_start_h=clock_hours(cfg.night_start), night_end_h=clock_hours(cfg.night_end),
        processing_us_per_pixel=cfg.processing_us_per_pixel,
        high_res_cost_factor=cfg.high_res_cost_factor)


def run_scenario(config: ScenarioConfig, seed: int | None = None, feed=None) -> ScenarioResult:
    seed = config.seed if seed is None else int(seed)
    if seed != config.seed:
        config = config.replace(seed=seed)
    topo = build_topology(config, seed)
    feed = feed if feed is not None else open_feed(config, seed)
    sim = Simulator()
    agency = Agency(topo, _settings(config), feed, np.random.default_rng([seed, 1]), sim,
                    config.energy_model(), loss_key=seed)
    sensors = [n.id for n in topo.nodes if n.id != topo.sink_id]
    instants = sensing_instants(config)
    active_counts, refusals, truths = [], [0], {}

    def visit(agent, node_id):
        agency.fa_visit(agent, node_id, sim.now)
        step(agent)

    def step(agent):
        if agent.next_stop is not None:
            sim.schedule(agent.next_stop[1], visit, agent, agent.next_stop[0])
        else:
            sim.schedule(agent.ready_at, agency.fa_return, agent, agent.ready_at)

    def dispatch(round_at):
        trigger = agency.choose_trigger(sim.now, since=round_at)
        if trigger is None:
            refusals[0] += 1
            agency._log(sim.now, "SMA", "idle", topo.sink_id, "no active reports")
            return
        try:
            agent = agency.sma_dispatch(trigger, sim.now, since=round_at)
        except DispatchRefused:
            refusals[0] += 1
            return
        agency.fa_depart(agent, sim.now)
        step(agent)

    def sensing_round(at):
        active = 0
        for i in sensors:
            if not topo.node(i).alive:
                continue
            agency.ca_sense(i, at)
            if agency.nma_interpret(i) is not None:
                active += 1
                agency.nma_report(i, at)
        active_counts.append(active)
        truths[at] = feed.truth(at) if hasattr(feed, "truth") else None
        sim.schedule(at + config.collection_window_ms, dispatch, at)

    for at in instants:
        sim.schedule(at, sensing_round, at)
    sim.run()

    metrics = _collect(config, topo, agency, active_counts, refusals[0], truths)
    return ScenarioResult(config, seed, metrics, sim.trace_lines(),
                          [e.line() for e in agency.events], agency.reports, topo)


@dataclass(frozen=True)
class TrafficTotals:
    packets_sent: int
    packets_received: int
    image_packets_sent: int
    image_packets_received: int
    t_load: int
    hops: tuple


def traffic_totals(reports) -> TrafficTotals:
    """Packet counters over fusing-agent trips. Code-only migrations count per
    leg; the image payload counts once per trip, with the packets that
    survived every leg as received."""
    sent = recv = img_sent = img_recv = t_load = 0
    hops = []
    for rep in reports:
        for rec in rep.records:
            t_load += rec.t_load
            hops.append(rec.hops)
            if rec.kind == AGENT_MIGRATION:
                sent += rec.packets_sent
                recv += rec.packets_received
        img_sent += rep.image_packets_sent
        img_recv += rep.image_packets_received
    return TrafficTotals(sent + img_sent, recv + img_recv, img_sent, img_recv, t_load, tuple(hops))


def _collect(cfg, topo, agency, active_counts, refusals, truths) -> MetricsReport:
    m = MetricsReport()
    reports: list[ReturnReport] = agency.reports
    tt = traffic_totals(reports)
    m.packets_sent, m.packets_received = tt.packets_sent, tt.packets_received
    m.image_packets_sent, m.image_packets_received = tt.image_packets_sent, tt.image_packets_received
    m.t_load_total = tt.t_load
    m.dropping_rate = _safe(dropping_rate, tt.packets_sent, tt.packets_received)
    m.throughput = _safe(throughput, tt.image_packets_sent, tt.image_packets_received)
    m.hops_mean = _mean(tt.hops)

    m.bandwidth_required_s = bandwidth_required((cfg.image_size, cfg.image_size, 8), cfg.net_bandwidth)
    m.bandwidth_required_pct = 100.0 * m.bandwidth_required_s
    delivered = [r for r in reports if r.delivered]
    m.fused_bandwidth_required_s = _mean([bandwidth_required(r.image, cfg.net_bandwidth) for r in delivered])
    m.fusion_time_ms = _mean([r.fusion_time_ms for r in delivered])
    m.fusion_time_low_ms = _mean([r.fusion_time_ms for r in delivered if r.resolution_class == "low"])
    m.fusion_time_high_ms = _mean([r.fusion_time_ms for r in delivered if r.resolution_class == "high"])

    carried = [r for r in reports if r.image_bytes > 0]
    if carried:
        code = sum(r.code_bytes for r in carried)
        image = sum(r.image_bytes for r in carried)
    else:
        code, image = cfg.f_code, cfg.image_size * cfg.image_size * cfg.low_bits // 8
    m.agent_overhead, m.overhead_image_fraction = agent_overhead(image, code)

    errs = []
    for r in delivered:
        truth = truths.get(r.round_at)
        if truth is not None and r.image is not None:
            errs.append(error_measure(truth, requantize(r.image, truth.bit_depth)))
    m.error_std = _mean([e.std for e in errs])
    m.error_mse = _mean([e.mse for e in errs])

    floods = [rep for kind, rep in agency.floods if kind == "context-flood"]
    m.context_reports = len(floods)
    m.context_delivery = _mean([1.0 if rep.reached_node(topo.sink_id) else 0.0 for rep in floods])
    m.rounds = len(active_counts)
    m.active_nodes_mean = _mean(active_counts)
    m.dispatches = len(reports)
    m.dispatches_low = sum(r.resolution_class == "low" for r in reports)
    m.dispatches_high = sum(r.resolution_class == "high" for r in reports)
    m.refusals = refusals
    m.deliveries = len(delivered)
    m.visited_mean = _mean([len(r.visited) for r in reports])
    m.skipped_total = sum(len(r.skipped) for r in reports)

    draws = {c: [] for c in UsageClass}
    series = []
    for n in topo.nodes:
        for e in n.energy.usage_log:
            draws[e.usage].append(e.draw_mw)
            series.append((e.time_ms, n.id, e.battery_mv, e.draw_mw))
    series.sort(key=lambda s: (s[0], s[1]))
    m.battery_series = series
    m.power_noncritical_mw = _mean(draws[UsageClass.DAY_NONCRITICAL])
    m.power_critical_mw = _mean(draws[UsageClass.DAY_CRITICAL])
    m.power_night_mw = _mean(draws[UsageClass.NIGHT])
    batt = [n.battery_mv for n in topo.nodes if n.id != topo.sink_id]
    m.battery_mean_mv = _mean(batt)
    m.battery_min_mv = float(min(batt))
    m.dead_nodes = sum(b <= 0 for b in batt)
    return m


# -- output ----------------------------------------------------------------------

def fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return f"{float(v):.6g}"


def _header(cfg: ScenarioConfig) -> list:
    return [f"# config_sha256={cfg.digest()}"] + [f"# {line}" for line in cfg.echo()]


def metrics_csv(cfg: ScenarioConfig, metrics: MetricsReport) -> str:
    cols = MetricsReport.columns()
    row = metrics.row()
    return "\n".join(_header(cfg) + [",".join(cols), ",".join(fmt(row[c]) for c in cols)]) + "\n"


def battery_csv(cfg: ScenarioConfig, metrics: MetricsReport) -> str:
    lines = _header(cfg) + ["time_ms,node_id,battery_mv,draw_mw"]
    lines += [f"{fmt(t)},{i},{fmt(b)},{fmt(d)}" for t, i, b, d in metrics.battery_series]
    return "\n".join(lines) + "\n"


def write_outputs(result: ScenarioResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    (out / "metrics.csv").write_text(metrics_csv(cfg, result.metrics))
    (out / "battery.csv").write_text(battery_csv(cfg, result.metrics))
    (out / "events.tsv").write_text("time_ms\tevent_kind\tsrc\tdst\tbytes\toutcome\n"
                                    + "".join(line + "\n" for line in result.trace))
    (out / "agents.tsv").write_text("time_ms\tagent_kind\taction\tnode_id\tdetail\n"
                                    + "".join(line + "\n" for line in result.agent_log))
    (out / "config.txt").write_text("\n".join(cfg.echo()) + "\n")
    for rep in result.reports:
        if rep.image is None:
            continue
        stem = out / f"fused_{rep.agent_id:03d}_{rep.resolution_class}"
        if rep.image.bit_depth in (8, 16):
            save_pgm(rep.image, stem.with_suffix(".pgm"))
        else:
            save_raw(rep.image, stem.with_suffix(".raw"))
    return out


# -- sweeps ----------------------------------------------------------------------

@dataclass
class SweepTable:
    base: ScenarioConfig
    axis: str
    values: list
    seeds: list
    rows: list          # one dict per axis value (median over seeds)
    per_seed: list      # rows[i] came from per_seed[i] (list of MetricsReport)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def csv(self) -> str:
        cols = [self.axis, "seeds"] + MetricsReport.columns()
        lines = _header(self.base) + [f"# axis={self.axis} seeds={' '.join(map(str, self.seeds))}",
                                      ",".join(cols)]
        for v, r in zip(self.values, self.rows):
            lines.append(",".join([fmt(v) if not isinstance(v, str) else v, str(len(self.seeds))]
                                  + [fmt(r[c]) for c in MetricsReport.columns()]))
        return "\n".join(lines) + "\n"


def _run_metrics(args):
    cfg, seed = args
    return run_scenario(cfg, seed).metrics


def _median(values):
    arr = np.array([float(v) for v in values])
    finite = arr[~np.isnan(arr)]
    return float(np.median(finite)) if finite.size else math.nan


def sweep(base: ScenarioConfig, axis: str, values, seeds=None, workers: int | None = None) -> SweepTable:
    if axis not in FIELD_TYPES:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    values = [coerce(axis, v) if isinstance(v, str) else v for v in values]
    seeds = [base.seed] if seeds is None else list(seeds)
    configs = [base.replace(**{axis: v}) for v in values]
    jobs = [(c, s) for c in configs for s in seeds]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_metrics, jobs))
    else:
        results = [_run_metrics(j) for j in jobs]
    rows, per_seed = [], []
    for i in range(len(values)):
        chunk = results[i * len(seeds):(i + 1) * len(seeds)]
        per_seed.append(chunk)
        rows.append({c: _median([getattr(m, c) for m in chunk]) for c in MetricsReport.columns()})
    return SweepTable(base, axis, values, seeds, rows, per_seed)


def gnuplot_script(csv_name: str, axis: str, metric: str, column: int) -> str:
    return "\n".join([
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set xlabel '{axis}'",
        f"set ylabel '{metric}'",
        "set grid",
        "set terminal pngcairo size 640,480",
        f"set output '{metric}.png'",
        f"plot '{csv_name}' using 1:{column} with linespoints",
        "",
    ])


def write_sweep(table: SweepTable, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = f"sweep_{table.axis}.csv"
    (out / name).write_text(table.csv())
    cols = [table.axis, "seeds"] + MetricsReport.columns()
    for k, metric in enumerate(MetricsReport.columns()):
        (out / f"plot_{metric}.gp").write_text(gnuplot_script(name, table.axis, metric, cols.index(metric) + 1))
    return out / name
